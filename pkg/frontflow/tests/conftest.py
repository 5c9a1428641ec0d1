from pathlib import Path

import numpy as np
import pytest
import yaml

SCENARIO_DIR = Path(__file__).resolve().parents[2] / 'data' / 'scenarios'


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR


@pytest.fixture
def output_root(settings, tmp_path):
    """Point FRONTFLOW_OUTPUT_DIR at a temporary directory."""
    settings.FRONTFLOW_OUTPUT_DIR = tmp_path / 'output'
    return settings.FRONTFLOW_OUTPUT_DIR


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario mapping (or raw YAML text) to a file and return its path."""

    def write(content, name='scenario.yaml'):
        path = tmp_path / name
        path.write_text(content if isinstance(content, str) else yaml.safe_dump(content, sort_keys=False))
        return path

    return write


@pytest.fixture
def ball_scenario():
    """Small constant-speed ball scenario; tests override blocks as needed."""
    return {
        'seed': 7,
        'grid': {'dim': 2, 'half_extent': 1.0, 'points_per_axis': 41, 't_final': 0.2, 'dt': 0.05},
        'law': {'tag': 'constant', 'speed': 1.0},
        'initial': {'kind': 'ball', 'centers': [[0.0, 0.0]], 'radii': [0.3]},
    }
