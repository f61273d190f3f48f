"""Session-scoped closed-loop runs shared across test modules."""

import numpy as np
import pytest

from htlip import Disturbance, run_scenario

from helpers import make_scenario


@pytest.fixture(scope="session")
def hc1_inplace_run():
    scn = make_scenario("hc1", dtau=0.3, duration=12.0, e0=(0.03, 0.1), seed=1,
                        collect_samples=False)
    return scn, run_scenario(scn)


@pytest.fixture(scope="session")
def hc5_push_runs():
    """20 runs with a 0.3 m/s push at seeded random times on HC5 motion."""
    rng = np.random.default_rng(2024)
    runs = []
    for i in range(20):
        t_push = float(rng.uniform(2.0, 7.5))
        scn = make_scenario(
            "hc5", dtau=0.2, duration=12.0, seed=100 + i, collect_samples=False,
            disturbances=(Disturbance("velocity_impulse", t_push, 0.3),))
        runs.append((t_push, scn, run_scenario(scn)))
    return runs


@pytest.fixture(scope="session")
def static_walk_run():
    scn = make_scenario("static", dtau=0.3, v_des=0.2, duration=9.0,
                        e0=(0.05, 0.0), seed=0, gain_mode="per_step",
                        collect_samples=False)
    return scn, run_scenario(scn)
