import pytest
import yaml

from frontflow.solvers.exceptions import ScenarioConfigError
from frontflow.utils.scenario_config import load_scenario, parse_scenario


def _dump(data):
    return yaml.safe_dump(data, sort_keys=False)


def test_parse_fills_defaults(ball_scenario):
    config = parse_scenario(_dump(ball_scenario))
    assert config['grid']['dt'] == 0.05
    assert config['stepper'] == {
        'curvature_enabled': False,
        'cfl_safety': 0.5,
        'redistance_every': 0,
        'curvature_scheme': 'median',
    }
    assert config['fixedpoint']['relaxation'] == 0.5
    assert config['fixedpoint']['max_iterations'] == 50
    assert config['output']['dump_stride'] == 1
    assert config['output']['formats'] == ['ffld']


def test_default_dt_is_twentieth_of_horizon(ball_scenario):
    del ball_scenario['grid']['dt']
    config = parse_scenario(_dump(ball_scenario))
    assert config['grid']['dt'] == pytest.approx(0.2 / 20.0)


def test_malformed_fixture_reports_line(scenario_dir):
    with pytest.raises(ScenarioConfigError, match="points_per_axis") as exc_info:
        load_scenario(scenario_dir / 'malformed.yaml')
    assert exc_info.value.line == 5
    assert str(exc_info.value).startswith("line 5:")


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ScenarioConfigError, match="Invalid YAML") as exc_info:
        parse_scenario("seed: 1\ngrid: a: b\n")
    assert exc_info.value.line == 2


def test_scenario_must_be_mapping():
    with pytest.raises(ScenarioConfigError, match="mapping"):
        parse_scenario("- 1\n- 2\n")


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioConfigError, match="Cannot read"):
        load_scenario(tmp_path / 'absent.yaml')


def test_kernel_needs_exactly_one_source(ball_scenario):
    ball_scenario['law'] = {
        'tag': 'dislocation',
        'kernel': {'name': 'gaussian', 'sigma': 0.1, 'path': 'kernel.ffld'},
    }
    with pytest.raises(ScenarioConfigError, match="exactly one of 'name' or 'path'") as exc_info:
        parse_scenario(_dump(ball_scenario))
    assert exc_info.value.line is not None


def test_gaussian_kernel_needs_sigma(ball_scenario):
    ball_scenario['law'] = {'tag': 'dislocation', 'kernel': {'name': 'gaussian'}}
    with pytest.raises(ScenarioConfigError, match="width"):
        parse_scenario(_dump(ball_scenario))


def test_law_parameters_are_required_by_tag(ball_scenario):
    ball_scenario['law'] = {'tag': 'volume_dependent'}
    with pytest.raises(ScenarioConfigError, match="law.beta") as exc_info:
        parse_scenario(_dump(ball_scenario))
    lines = _dump(ball_scenario).splitlines()
    assert lines[exc_info.value.line - 1].startswith('law:')


def test_unknown_law_tag(ball_scenario):
    ball_scenario['law'] = {'tag': 'telepathy'}
    with pytest.raises(ScenarioConfigError, match="law.tag"):
        parse_scenario(_dump(ball_scenario))


def test_center_dimension_must_match_grid(ball_scenario):
    ball_scenario['initial']['centers'] = [[0.0, 0.0, 0.0]]
    with pytest.raises(ScenarioConfigError, match="2 components"):
        parse_scenario(_dump(ball_scenario))


def test_ball_needs_one_radius(ball_scenario):
    ball_scenario['initial']['radii'] = [0.3, 0.2]
    ball_scenario['initial']['centers'] = [[0.0, 0.0], [0.1, 0.1]]
    with pytest.raises(ScenarioConfigError, match="exactly one radius"):
        parse_scenario(_dump(ball_scenario))


def test_bare_number_is_constant_function(ball_scenario):
    ball_scenario['law'] = {'tag': 'volume_dependent', 'beta': 0.75}
    config = parse_scenario(_dump(ball_scenario))
    assert config['law']['beta']['kind'] == 'constant'
    assert config['law']['beta']['value'] == 0.75


def test_affine_function_block(ball_scenario):
    ball_scenario['law'] = {'tag': 'volume_dependent', 'beta': {'kind': 'affine', 'intercept': 0.25, 'slope': -1}}
    config = parse_scenario(_dump(ball_scenario))
    assert config['law']['beta']['slope'] == -1.0


def test_stepper_bounds(ball_scenario):
    ball_scenario['stepper'] = {'cfl_safety': 1.5}
    with pytest.raises(ScenarioConfigError, match="stepper.cfl_safety"):
        parse_scenario(_dump(ball_scenario))


def test_shipped_scenarios_parse(scenario_dir):
    paths = sorted(p for p in scenario_dir.glob('*.yaml') if p.name != 'malformed.yaml')
    assert len(paths) >= 8
    for path in paths:
        config = load_scenario(path)
        assert config['grid']['dim'] in (1, 2, 3)
