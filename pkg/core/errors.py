# core/errors.py
"""
추정 파이프라인 공통 예외 정의
"""

from typing import Optional


class NPHMMError(Exception):
    """모든 수치 오류의 기본 클래스 (stage: 실패한 파이프라인 단계 이름)"""

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage


class ValidationError(NPHMMError, ValueError):
    """입력값 또는 사전조건 위반"""


class QuadratureError(NPHMMError):
    """구적법 수렴 실패 (error_estimate: 달성된 오차 추정치)"""

    def __init__(self, message: str, error_estimate: float, stage: Optional[str] = None):
        super().__init__(f"{message} (오차 추정치: {error_estimate:.3e})", stage)
        self.error_estimate = error_estimate


class NotErgodicError(NPHMMError):
    """전이행렬이 기약·비주기가 아님 (정상분포 유일성 없음)"""


class SingularWhitening(NPHMMError):
    """스펙트럴 단계에서 역행렬 조건수가 임계값을 초과"""


class NonRealDiagonalization(NPHMMError):
    """Θ 재추출 한도 안에서 실수 대각화 실패"""


class KTooLarge(NPHMMError):
    """P̂의 유효 특이값 수가 K보다 작음"""


class ConstraintViolation(NPHMMError, ValueError):
    """방출 계수 열이 적분 제약 cᵀA(·,k)=1을 만족하지 않음"""


class NonFiniteObjective(NPHMMError):
    """목적함수가 연속 세대 동안 유한값을 반환하지 않음"""


class CalibrationFailed(NPHMMError):
    """슬로프 휴리스틱 보정 실패"""


class NoJump(CalibrationFailed):
    """ρ 격자 전체에서 M̂(ρ)가 상수 (차원 점프 없음)"""


class ChainDomainError(NPHMMError, ValueError):
    """K=2 다항식 체인 검사의 정의역 위반"""


class StageError(NPHMMError):
    """파이프라인 단계 실패를 단계 이름과 함께 감싼 오류"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}", stage)
        self.cause = cause
