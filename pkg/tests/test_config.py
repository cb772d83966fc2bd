import json
from pathlib import Path

import pytest

from cli.common import open_store, optimizer_template
from config import RunConfig, Settings, load_settings
from core.errors import ValidationError
from core.optimizer import DEFAULT_TOL_FUN

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'tools' / 'configs'


def test_settings_defaults():
    settings = load_settings({})
    assert settings == Settings()
    assert settings.resolved_cache_dir == Path('runs') / 'cache'


def test_settings_from_environment():
    settings = load_settings({'NPHMM_THREADS': '4', 'NPHMM_LOG_LEVEL': 'debug',
                              'NPHMM_OUTPUT_DIR': 'out', 'NPHMM_CACHE_DIR': 'moments'})
    assert settings.threads == 4
    assert settings.log_level == 'DEBUG'
    assert settings.output_dir == Path('out')
    assert settings.resolved_cache_dir == Path('moments')


def test_settings_unknown_log_level_falls_back():
    assert load_settings({'NPHMM_LOG_LEVEL': 'chatty'}).log_level == 'INFO'


@pytest.mark.parametrize("raw", ['many', '0', '-2'])
def test_settings_invalid_threads(raw):
    with pytest.raises(ValidationError):
        load_settings({'NPHMM_THREADS': raw})


def test_unknown_fields_rejected():
    with pytest.raises(ValidationError):
        RunConfig.from_dict({'N': 10, 'sample_size': 10})
    with pytest.raises(ValidationError):
        RunConfig().with_overrides(steps=3)


@pytest.mark.parametrize("values", [
    {'N': 0}, {'M_max': -1}, {'scenario': 'C'}, {'basis': 'wavelet'}, {'calibration': 'guess'},
    {'rho': -0.5}, {'budget': 0}, {'budget': 1}, {'tolerances': {'tol_x': 1e-9}},
    {'tolerances': {'tol_fun': 0.0}}, {'threads': 0}, {'replicates': 0}, {'model': 'missing.json'},
])
def test_validation_failures(values):
    with pytest.raises(ValidationError):
        RunConfig.from_dict(values).validate()


def test_tolerances_reach_optimizer():
    cfg = RunConfig(budget=50, seed=4, tolerances={'tol_fun': 1e-6}).validate()
    template = optimizer_template(cfg)
    assert template.tol_fun == 1e-6
    assert template.max_evals == 50 and template.seed == 4
    assert optimizer_template(RunConfig()).tol_fun == DEFAULT_TOL_FUN


def test_store_cache_follows_output_override(tmp_path):
    store = open_store(RunConfig(output_dir=str(tmp_path / 'out')), load_settings({}))
    assert store.cache_dir == tmp_path / 'out' / 'cache'
    pinned = load_settings({'NPHMM_CACHE_DIR': str(tmp_path / 'moments')})
    assert open_store(RunConfig(output_dir=str(tmp_path / 'out')), pinned).cache_dir == tmp_path / 'moments'


def test_overrides_skip_missing_flags():
    cfg = RunConfig(N=100, seed=3).with_overrides(N=None, seed=7, basis='trig')
    assert cfg.N == 100
    assert cfg.seed == 7
    assert cfg.basis == 'trig'


def test_require_names_missing_fields():
    with pytest.raises(ValidationError, match='model'):
        RunConfig(N=10).require('model', 'N')


def test_from_file_resolves_model_relative_to_config(tmp_path, two_state_spec):
    (tmp_path / 'models').mkdir()
    (tmp_path / 'models' / 'spec.json').write_text(json.dumps(two_state_spec.to_dict()), encoding='utf-8')
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'model': 'models/spec.json', 'N': 500}), encoding='utf-8')
    cfg = RunConfig.from_file(path).validate()
    assert cfg.load_model().K == 2
    resolved = cfg.to_dict()
    assert 'base_dir' not in resolved
    assert resolved['model'] == two_state_spec.to_dict()
    assert resolved['model_path'] == str(tmp_path / 'models' / 'spec.json')


def test_from_file_errors(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig.from_file(tmp_path / 'absent.json')
    broken = tmp_path / 'broken.json'
    broken.write_text('{"N": ', encoding='utf-8')
    with pytest.raises(ValidationError):
        RunConfig.from_file(broken)
    listing = tmp_path / 'list.json'
    listing.write_text('[1, 2]', encoding='utf-8')
    with pytest.raises(ValidationError):
        RunConfig.from_file(listing)


def test_inline_model():
    cfg = RunConfig(model={'Q': [[0.5, 0.5], [0.5, 0.5]], 'emissions': [{'beta': [2.0, 2.0]}, {'uniform': True}]})
    assert cfg.load_model().K == 2
    assert cfg.model_path() is None


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob('*.json')))
def test_shipped_configs_are_valid(name):
    cfg = RunConfig.from_file(CONFIG_DIR / name).validate()
    assert cfg.load_model().K in (2, 3)
