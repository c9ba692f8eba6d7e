import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from privdude.errors import DimensionError, ParameterError
from privdude.ogd import (OgdConfig, OgdHistory, empirical_regret, project_box, regret_bound, run_ogd, step,
                          theorem_step_size, zinkevich_bound)
from privdude.privacy import TAIL_CONSTANT


def test_project_box():
    assert np.array_equal(project_box([-0.5, 3.0], 2), [0.0, 2.0])
    inside = np.array([0.3, 1.2])
    assert np.array_equal(project_box(inside, 2), inside)
    assert np.array_equal(project_box([2.0000001], 2), [2.0])


def test_step_examples():
    assert np.array_equal(step([1.0], [2.0], OgdConfig(0.5, 4, 1, 1, 1)), [2.0])
    assert np.array_equal(step([1.8], [2.0], OgdConfig(0.5, 2, 1, 1, 1)), [2.0])
    assert np.array_equal(step([0.7, 0.1], [0.0, 0.0], OgdConfig(0.5, 2, 2, 1, 1)), [0.7, 0.1])
    with pytest.raises(DimensionError):
        step([1.0], [1.0, 2.0], OgdConfig(0.5, 2, 1, 1, 1))


def test_config_rejects_bad_values():
    with pytest.raises(ParameterError):
        OgdConfig(0.0, 1, 1, 1, 1)
    with pytest.raises(ParameterError):
        OgdConfig(1.0, 0, 1, 1, 1)


def test_regret_trivial_cases():
    hist = OgdHistory(np.zeros((5, 2)), np.zeros((5, 2)), np.zeros((5, 2)), 2.0)
    assert empirical_regret(hist) == 0.0
    hist = OgdHistory(np.zeros((3, 1)), np.array([[1.0], [2.0], [-1.0]]), np.zeros((3, 1)), 0.0)
    assert empirical_regret(hist) == 0.0
    with pytest.raises(ParameterError):
        empirical_regret(OgdHistory(np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 1)), 1.0))


def test_regret_closed_form_matches_grid():
    eta, box = 0.25, 2.0
    hist = run_ogd(np.array([[1.0], [-3.0]]), OgdConfig(eta, box, 1, 3, 2))
    assert np.array_equal(hist.iterates[:, 0], [0.0, eta])
    grid = np.linspace(0, box, 101)
    best = max(g * (1.0 - 3.0) / 2 for g in grid)
    realized = (0 * 1.0 + eta * -3.0) / 2
    assert empirical_regret(hist) == pytest.approx(best - realized, abs=1e-15)


def test_regret_bound_examples():
    assert regret_bound(OgdConfig(1, 1, 1, 1, 100), 0.0, 0.1) == pytest.approx(0.1, rel=1e-15)
    a = regret_bound(OgdConfig(1, 1, 1, 1, 100), 0.0, 0.1)
    b = regret_bound(OgdConfig(1, 1, 1, 1, 400), 0.0, 0.1)
    assert b == pytest.approx(a / 2, rel=1e-15)
    a_const = math.log(2) / (2 * math.pi)
    expected = (1 * math.sqrt(2) * math.sqrt(2) / 10) * (1 + 2 * 1 * math.sqrt(math.log(2 * 100 * 2 / 0.1) / a_const))
    assert regret_bound(OgdConfig(1, 1, 2, 1, 100), 1.0, 0.1) == pytest.approx(expected, rel=1e-14)
    assert TAIL_CONSTANT == a_const


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.floats(0.01, 5), st.integers(0, 2**31 - 1))
def test_iterates_stay_in_box(k, box, seed):
    rng = np.random.default_rng(seed)
    cfg = OgdConfig(float(rng.uniform(0.01, 3)), box, k, 10, 500)
    hist = run_ogd(rng.normal(0, 10, (500, k)), cfg)
    assert np.all(hist.iterates >= 0) and np.all(hist.iterates <= box)


def test_iterates_fuzz_ten_thousand_steps():
    rng = np.random.default_rng(77)
    lam = np.zeros(3)
    cfg = OgdConfig(0.7, 1.5, 3, 1, 1)
    for _ in range(10**4):
        lam = step(lam, rng.normal(0, 5, 3), cfg)
        assert np.all(lam >= 0) and np.all(lam <= 1.5)


def test_noiseless_regret_within_zinkevich():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        T, k, X, box = 2000, 3, 2.0, 1.5
        cfg = OgdConfig(box / (X * math.sqrt(T)), box, k, X, T)

        def adversary(t, lam, rng=rng):
            # Push against the current iterate: positive loss where lam is small.
            return np.where(lam < box / 2, X, -X) * rng.uniform(0.5, 1, k)

        hist = run_ogd(adversary, cfg)
        assert empirical_regret(hist) <= zinkevich_bound(cfg)


def test_theorem_step_size_noiseless_limit():
    cfg = OgdConfig(1, 2, 2, 5, 100)
    assert theorem_step_size(cfg, 0.0, 0.1) == pytest.approx(2 * math.sqrt(2) / (10 * math.sqrt(2) * 5))
