import dataclasses
import math

import numpy as np
import pytest

from privdude import baseline
from privdude.errors import ParameterError, ScaleError
from privdude.model import ProgramMetadata, SeparableProgram, VertexOracle
from privdude.problems import DDemandInstance, KnapsackInstance, generate
from privdude.problems.ddemand import additive_tables
from privdude.solver import SolveConfig, run


def test_brute_force_examples(tiny):
    value, witness = baseline.brute_force_opt(tiny)
    assert value == pytest.approx(1.8) and [w.tolist() for w in witness] == [[1.0], [1.0], [0.0]]
    inst = DDemandInstance([1.0, 1.0], 1, additive_tables([[0.9, 0.1], [0.8, 0.7]], 1))
    assert baseline.brute_force_opt(inst.program())[0] == pytest.approx(1.6)
    empty = SeparableProgram([], [1.0], 1, ProgramMetadata(1, 1, 1))
    assert baseline.brute_force_opt(empty) == (0.0, [])


def test_brute_force_infeasible_and_cap():
    oracle = VertexOracle([[1.0]], [1.0], [[1.0]])
    prog = SeparableProgram([oracle], [0.5], 1, ProgramMetadata(1, 1, 1))
    value, witness = baseline.brute_force_opt(prog)
    assert value == -math.inf and witness is None
    big = generate("knapsack", seed=0, n=21, k=1).program()
    with pytest.raises(ScaleError):
        baseline.brute_force_opt(big)


def test_greedy_examples():
    v, w = [1, 0.8, 0.5], [1, 1, 1]
    assert baseline.greedy_fractional_knapsack(v, w, 2) == pytest.approx(1.8)
    assert baseline.greedy_fractional_knapsack(v, w, 1.5) == pytest.approx(1.4)
    assert baseline.greedy_fractional_knapsack(v, w, 0) == 0.0
    with pytest.raises(ParameterError):
        baseline.greedy_fractional_knapsack(v, np.ones((3, 2)), 1)


def test_greedy_equals_brute_force_on_unit_weights():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 10))
        v = rng.uniform(0, 1, n)
        cap = float(rng.integers(1, n + 1))
        prog = KnapsackInstance(v, np.ones((n, 1)), [cap]).program()
        assert baseline.greedy_fractional_knapsack(v, np.ones(n), cap) == pytest.approx(baseline.brute_force_opt(prog)[0])


def test_brute_force_soundness_fuzz():
    inst = generate("knapsack", seed=4, n=8, k=2)
    prog = inst.program()
    opt, _ = baseline.brute_force_opt(prog)
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 1000:
        x = (rng.random(8) < 0.4).astype(float)
        if np.all(inst.weights.T @ x <= inst.capacities):
            assert opt >= inst.values @ x - 1e-12
            checked += 1


def test_noiseless_opt(tiny):
    value, err = baseline.noiseless_opt(tiny, 10**5)
    assert abs(value - 1.8) <= err
    _, err2 = baseline.noiseless_opt(tiny, 2 * 10**5)
    assert err / err2 == pytest.approx(math.sqrt(2))
    slack = tiny.with_b([10.0])
    assert baseline.noiseless_opt(slack, 100)[0] == pytest.approx(2.3, abs=1e-12)


def test_noiseless_opt_against_linprog():
    scipy_opt = pytest.importorskip("scipy.optimize")
    inst = generate("knapsack", seed=8, n=12, k=2)
    res = scipy_opt.linprog(-inst.values, A_ub=inst.weights.T, b_ub=inst.capacities, bounds=[(0, 1)] * 12)
    value, err = baseline.noiseless_opt(inst.program(), 20000)
    assert abs(value - (-res.fun)) <= err


def test_audit_verdicts(tiny):
    rep = run(tiny, SolveConfig(noise_enabled=False, T_override=2000))
    v = baseline.audit(rep, tiny, 1.8)
    assert v.passed and v.structure_ok and v.billboard_ok
    bad_x = dataclasses.replace(rep.x_bar, contributions=rep.x_bar.contributions * 10)
    forced = dataclasses.replace(rep, x_bar=bad_x)
    v = baseline.audit(forced, tiny, 1.8)
    assert not v.violation_ok and v.margins["violation_margin"] < 0
    other = generate("knapsack", seed=1, n=3, k=2).program()
    v = baseline.audit(rep, other, 1.8)
    assert not v.structure_ok and not v.passed
