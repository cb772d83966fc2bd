# config/run_config.py
"""
실행 설정 (JSON 파일 + CLI 플래그 덮어쓰기 + 검증)
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from core.basis import BasisKind
from core.errors import ValidationError
from core.hmm_model import HMMSpec, Scenario
from core.selection import CalibrationMethod
from utils.io_utils import read_json, resolve_path

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 10000
MIN_BUDGET = 2
TOLERANCE_KEYS = ('tol_fun',)


@dataclass(frozen=True)
class RunConfig:
    """한 번의 실행을 결정하는 모든 값

    model은 HMMSpec 형식의 딕셔너리이거나 JSON 파일 경로이다.
    rho가 주어지면 calibration은 무시되고 ρ가 선택을 결정한다.
    """
    model: Union[Dict, str, None] = None
    N: Optional[int] = None
    scenario: str = Scenario.B.value
    basis: str = BasisKind.HISTOGRAM.value
    M_max: Optional[int] = None
    calibration: str = CalibrationMethod.DIMENSION_JUMP.value
    rho: Optional[float] = None
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    output_dir: Optional[str] = None
    threads: Optional[int] = None
    replicates: int = 1
    tolerances: Dict[str, float] = field(default_factory=dict)
    hf_constants: Dict[str, float] = field(default_factory=dict)
    clip_display: bool = False
    base_dir: Optional[str] = None

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Union[str, Path]] = None) -> 'RunConfig':
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise ValidationError(f"알 수 없는 설정 필드: {', '.join(sorted(unknown))}")
        values = dict(data)
        if base_dir is not None and values.get('base_dir') is None:
            values['base_dir'] = str(base_dir)
        return cls(**values)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'RunConfig':
        """JSON 설정 파일 읽기 (상대 경로는 파일 위치 기준)"""
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"설정 파일이 없습니다: {path}")
        try:
            data = read_json(path)
        except ValueError as e:
            raise ValidationError(f"설정 파일 JSON 파싱 실패 ({path}): {e}")
        if not isinstance(data, dict):
            raise ValidationError(f"설정 파일 최상위는 객체여야 합니다: {path}")
        logger.info(f"설정 파일 로드: {path}")
        return cls.from_dict(data, base_dir=path.parent)

    def with_overrides(self, **overrides) -> 'RunConfig':
        """None이 아닌 플래그 값으로 해당 필드 덮어쓰기"""
        present = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(present) - set(self.field_names())
        if unknown:
            raise ValidationError(f"알 수 없는 설정 필드: {', '.join(sorted(unknown))}")
        return replace(self, **present)

    def require(self, *names: str) -> 'RunConfig':
        """명령에 필요한 필드가 모두 있는지 확인"""
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValidationError(f"필수 설정 필드가 없습니다: {', '.join(missing)}")
        return self

    def validate(self) -> 'RunConfig':
        if self.N is not None and (not isinstance(self.N, int) or self.N < 1):
            raise ValidationError(f"N은 양의 정수여야 합니다: {self.N}")
        if self.M_max is not None and (not isinstance(self.M_max, int) or self.M_max < 1):
            raise ValidationError(f"M_max는 양의 정수여야 합니다: {self.M_max}")
        for name, enum in (('scenario', Scenario), ('basis', BasisKind), ('calibration', CalibrationMethod)):
            try:
                enum(getattr(self, name))
            except ValueError:
                allowed = ', '.join(e.value for e in enum)
                raise ValidationError(f"{name} 값이 잘못되었습니다: {getattr(self, name)!r} (허용: {allowed})")
        if self.rho is not None and self.rho < 0:
            raise ValidationError(f"rho는 음수가 될 수 없습니다: {self.rho}")
        if not isinstance(self.budget, int) or self.budget < MIN_BUDGET:
            raise ValidationError(f"budget은 {MIN_BUDGET} 이상의 정수여야 합니다: {self.budget}")
        unknown = set(self.tolerances) - set(TOLERANCE_KEYS)
        if unknown:
            raise ValidationError(f"알 수 없는 tolerances 키: {', '.join(sorted(unknown))} (허용: {', '.join(TOLERANCE_KEYS)})")
        for name, value in self.tolerances.items():
            if not isinstance(value, (int, float)) or not value > 0:
                raise ValidationError(f"tolerances.{name}는 양수여야 합니다: {value}")
        if self.threads is not None and self.threads < 1:
            raise ValidationError(f"threads는 1 이상이어야 합니다: {self.threads}")
        if self.replicates < 1:
            raise ValidationError(f"replicates는 1 이상이어야 합니다: {self.replicates}")
        if isinstance(self.model, str):
            path = self.model_path()
            if not path.exists():
                raise ValidationError(f"model 파일을 찾을 수 없습니다: {path}")
        return self

    def model_path(self) -> Optional[Path]:
        return resolve_path(self.model, self.base_dir) if isinstance(self.model, str) else None

    def load_model(self) -> HMMSpec:
        """model 필드를 HMMSpec으로 해석"""
        self.require('model')
        data = read_json(self.model_path()) if isinstance(self.model, str) else self.model
        return HMMSpec.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """보고서에 포함되는 해석된 설정"""
        data = asdict(self)
        data.pop('base_dir')
        if isinstance(self.model, str):
            data['model'] = self.load_model().to_dict()
            data['model_path'] = str(self.model_path())
        return data
