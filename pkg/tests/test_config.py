import logging

import pytest

from predictive_planner.config.config import PlannerConfig
from predictive_planner.config.logging_config import setup_logging


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch, mocker):
    for var in ('PLANNER_OUTPUT_DIR', 'PLANNER_CHECKPOINT_DIR', 'PLANNER_LOG_LEVEL'):
        monkeypatch.delenv(var, raising=False)
    mocker.patch('predictive_planner.config.config.load_dotenv')


def test_defaults():
    config = PlannerConfig.load()
    assert config.output_dir == './output'
    assert config.log_level == 'INFO'
    assert config.predictor.backend == 'ctrv'
    assert config.predictor.num_modes == 3
    assert config.irl.learning_rate == pytest.approx(1e-2)
    assert config.cmp.learning_rate == pytest.approx(2e-4)
    assert config.evaluation.match_radius == pytest.approx(3.0)
    assert config.data.stride == 50


def test_packaged_yaml_matches_defaults():
    from pathlib import Path
    import predictive_planner.config as package

    packaged = PlannerConfig.load(str(Path(package.__file__).parent / 'config.yaml'))
    assert packaged == PlannerConfig.load()


def test_yaml_sections_are_merged(tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text('predictor:\n  backend: idm_reactive\nirl:\n  steps: 10\n')
    config = PlannerConfig.load(str(path))
    assert config.predictor.backend == 'idm_reactive'
    assert config.predictor.max_agents == 10
    assert config.irl.steps == 10


def test_environment_overrides_yaml(tmp_path, monkeypatch):
    path = tmp_path / 'config.yaml'
    path.write_text('output_dir: ./from_yaml\n')
    monkeypatch.setenv('PLANNER_OUTPUT_DIR', '/tmp/from_env')
    monkeypatch.setenv('PLANNER_LOG_LEVEL', 'DEBUG')
    config = PlannerConfig.load(str(path))
    assert config.output_dir == '/tmp/from_env'
    assert config.log_level == 'DEBUG'


@pytest.mark.parametrize('content', [
    'colour: red\n',
    '- a\n- b\n',
    'predictor:\n  backend: kalman\n',
    'features:\n  unknown_threshold: 1.0\n',
    'predictor: [unclosed\n'
])
def test_invalid_files_are_rejected(tmp_path, content):
    path = tmp_path / 'config.yaml'
    path.write_text(content)
    with pytest.raises(ValueError):
        PlannerConfig.load(str(path))


def test_with_overrides():
    config = PlannerConfig.load()
    updated = config.with_overrides('predictor', backend='oracle', num_modes=None)
    assert updated.predictor.backend == 'oracle'
    assert updated.predictor.num_modes == 3
    assert config.predictor.backend == 'ctrv'
    assert config.with_overrides('irl') is config
    with pytest.raises(ValueError):
        config.with_overrides('predictor', num_modes=0)


def test_describe_lists_every_section():
    text = PlannerConfig.load().describe()
    for section in ('predictor', 'features', 'generation', 'idm', 'irl', 'cmp', 'evaluation', 'data'):
        assert f'{section}:' in text


def test_setup_logging_levels(tmp_path):
    log_file = tmp_path / 'run.log'
    setup_logging('debug', str(log_file))
    assert logging.getLogger().level == logging.DEBUG
    logging.getLogger('predictive_planner.test').debug('hello')
    assert ' - DEBUG - hello' in log_file.read_text()

    setup_logging()
    assert logging.getLogger().level == logging.INFO
    with pytest.raises(ValueError):
        setup_logging('chatty')
