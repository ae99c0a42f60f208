import json

import pytest

from bohmscatter.harness import ExperimentConfig, run_experiment


def smoke_config_dict(seed=7, v0=0.5):
    """32^3 pipeline exercise: small box, short flight, few trajectories."""
    return {
        "grid": {"n": 32, "extent": 24.0},
        "potential": {"kind": "gaussian_well", "v0": v0, "a": 1.0},
        "packet": {"sigma": 1.0, "k0": 2.0, "epsilon": 0.5},
        "beam": {"l_source": 7.0, "d_cut": 6.0, "tau": 1000.0},
        "detector": {
            "radii": [5.0, 6.5, 8.0],
            "theta_min_deg": 20.0,
            "theta_max_deg": 160.0,
            "n_theta": 7,
            "n_phi": 1,
        },
        "sampling": {
            "nodes": 4,
            "trajectories_per_node": 60,
            "diagnostic_trajectories": 400,
            "seed": seed,
        },
        "evolution": {"boundary_soft": 0.05},
        "outputs": {"directory": "out"},
    }


@pytest.fixture(scope="session")
def smoke_config():
    return ExperimentConfig.from_dict(smoke_config_dict())


@pytest.fixture(scope="session")
def smoke_report(smoke_config):
    return run_experiment(smoke_config, workers=1)


@pytest.fixture()
def smoke_json(tmp_path):
    p = tmp_path / "smoke.json"
    p.write_text(json.dumps(smoke_config_dict()))
    return p
