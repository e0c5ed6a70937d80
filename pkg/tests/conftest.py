"""Shared fixtures and scenario builders for the test suite."""
from __future__ import annotations

import time
from types import SimpleNamespace

import numpy as np
import pytest

from simlab.config import bundled_scenario, load_config, load_config_dict
from simlab.graph import DirectedTopology
from simlab.sim import run


def random_reachable_topology(rng: np.random.Generator, n_max: int = 10) -> DirectedTopology:
    """Random pinned arborescence where every follower is reachable by construction.

    Unit weights, branching factor at most two, node 1 always pinned, plus
    random extra unit pins. The q-based diagonal scaling does NOT yield a
    positive definite Q for arbitrary reachable digraphs (large edge
    weights or high branching break it; see test_graph's counterexample
    tests), so the certificate suites sample from this class, where the
    property holds with a wide margin.
    """
    n = int(rng.integers(1, n_max + 1))
    a = np.zeros((n, n))
    b = np.zeros(n)
    b[0] = 1.0
    child_count = [0] * n
    for i in range(1, n):
        candidates = [j for j in range(i) if child_count[j] < 2]
        parent = int(rng.choice(candidates))
        a[i, parent] = 1.0
        child_count[parent] += 1
    for i in range(1, n):
        if rng.random() < 0.3:
            b[i] = 1.0
    return DirectedTopology(adjacency=a, pinning=b)


def tiny_scenario(**overrides) -> dict:
    """Minimal valid one-follower scenario mapping; callers override fields."""
    raw = {
        "name": "tiny",
        "seed": 3,
        "mode": "standard",
        "topology": {"adjacency": [[0.0]], "pinning": [1.0]},
        "sliding": {"lambda": [1.0], "alpha": 1.0},
        "barrier": {"mu": 50.0},
        "dnn": {
            "widths": [3, 2],
            "k_w": "1 * eye(2)",
            "k_v": ["0.1 * ones(2, 3)", "0.1 * ones(3, 2)"],
            "v_lower": 0.0,
            "v_upper": 10.0,
            "switch_period": 1.0,
            "init_range": [0.0, 0.0],
        },
        "controller": {"gamma1": 1.0, "gamma2": 0.5},
        "agents": [{"f": "0", "init": [0.0, 0.0], "disturbance": "none"}],
        "leader": {"f0": "0", "init": [0.0, 0.0]},
        "integrator": {"method": "rk4", "dt": 1e-3, "t_final": 0.1, "decimation": 10},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key].update(value)
        else:
            raw[key] = value
    return raw


def load_tiny(**overrides):
    return load_config_dict(tiny_scenario(**overrides))


@pytest.fixture(scope="session")
def reference_cfg():
    return load_config(bundled_scenario("reference_sec5.cfg"))


@pytest.fixture(scope="session")
def reference_run(reference_cfg):
    start = time.monotonic()
    trace, report = run(reference_cfg)
    elapsed = time.monotonic() - start
    return SimpleNamespace(cfg=reference_cfg, trace=trace, report=report, elapsed=elapsed)


@pytest.fixture(scope="session")
def synthetic_cfg():
    return load_config(bundled_scenario("synthetic_truth.cfg"))


@pytest.fixture(scope="session")
def synthetic_run(synthetic_cfg):
    start = time.monotonic()
    trace, report = run(synthetic_cfg)
    elapsed = time.monotonic() - start
    return SimpleNamespace(cfg=synthetic_cfg, trace=trace, report=report, elapsed=elapsed)
