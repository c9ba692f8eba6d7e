import math

import numpy as np
import pytest

from privdude import baseline, solver
from privdude.errors import OracleError, ParameterError
from privdude.model import AgentOracle, ProgramMetadata, SeparableProgram, VertexOracle
from privdude.problems import generate
from privdude.rng import Streams
from privdude.solver import SolveConfig, best_respond_all, derive_schedule, noisy_gradient, run


def test_schedule_worked_example():
    s = derive_schedule(ProgramMetadata(sigma=1, tau=1, width=10), SolveConfig(1, 0.01, 0.1), k=2)
    assert s.T == 100
    assert s.epsilon_prime == pytest.approx(0.01536, abs=1e-5)
    assert s.delta_prime == pytest.approx(5e-5, rel=1e-14)
    assert s.noise_std == pytest.approx(293, abs=0.5)
    assert s.eta == pytest.approx(3.96e-4, abs=5e-7)
    assert s.box_hi == 2.0
    # Independent re-evaluation of the closed forms.
    eps_p = 1 / math.sqrt(800 * math.log(200))
    assert s.noise_std == pytest.approx(math.sqrt(2 * math.log(1.25 / 5e-5)) / eps_p, rel=1e-12)
    assert s.eta == pytest.approx(2 / (10 * (10 + math.log(2000) / eps_p)), rel=1e-12)


def test_schedule_noiseless_and_override():
    md = ProgramMetadata(sigma=1, tau=1, width=10)
    s = derive_schedule(md, SolveConfig(noise_enabled=False), 2)
    assert s.eta == pytest.approx(0.02, rel=1e-15) and s.noise_std == 0.0
    s = derive_schedule(md, SolveConfig(T_override=16), 2)
    assert s.T == 16 and s.overridden and s.T_formula == 100
    with pytest.raises(ParameterError):
        derive_schedule(ProgramMetadata(sigma=1, tau=1, width=0.5), SolveConfig(), 1)


def test_override_recorded_in_ledger(tiny):
    rep = run(tiny, SolveConfig(T_override=16))
    assert rep.ledger.rounds == 16 and rep.ledger.T_overridden
    assert rep.ledger.check_identities()


def test_config_domain():
    for bad in (dict(epsilon=0), dict(delta=0.5), dict(beta=1.0), dict(T_override=0)):
        with pytest.raises(ParameterError):
            SolveConfig(**bad)


@pytest.mark.parametrize("lam, xs", [(0.0, [1, 1, 1]), (0.6, [1, 1, 0]), (2.0, [0, 0, 0])])
def test_best_respond_all(tiny, lam, xs):
    pt = best_respond_all(tiny, [lam])
    assert [float(p[0]) for p in pt.points] == xs


def test_noisy_gradient(tiny):
    pt = best_respond_all(tiny, [0.0])
    quiet = derive_schedule(tiny.metadata, SolveConfig(noise_enabled=False), 1)
    assert np.array_equal(noisy_gradient(tiny, pt, quiet, Streams(0), 3), [1.0])
    loud = derive_schedule(tiny.metadata, SolveConfig(), 1)
    assert np.array_equal(noisy_gradient(tiny, pt, loud, Streams(5), 3), noisy_gradient(tiny, pt, loud, Streams(5), 3))


def test_noisy_gradient_scale():
    md = ProgramMetadata(sigma=1, tau=1, width=10)
    sched = derive_schedule(md, SolveConfig(1, 0.01, 0.1), 2)
    prog = SeparableProgram([VertexOracle([[0.0]], [0.0], [[1.0], [1.0]])], [0.0, 0.0], 2, md)
    pt = best_respond_all(prog, [0.0, 0.0])
    draws = np.array([noisy_gradient(prog, pt, sched, Streams(11), t) for t in range(10**4)])
    assert np.all(np.abs(draws.std(axis=0) / sched.noise_std - 1) <= 0.03)


def test_tiny_knapsack_noiseless(tiny):
    rep = run(tiny, SolveConfig(noise_enabled=False, T_override=2000))
    assert 1.75 <= rep.x_bar.objective <= 1.85
    assert rep.audit["total_violation"] <= 0.05
    assert np.all(rep.lambda_bar >= 0) and np.all(rep.lambda_bar <= 2.0)


def test_x_bar_is_the_mean_of_best_responses(tiny):
    rep = run(tiny, SolveConfig(T_override=300, seed=4))
    resp = [best_respond_all(tiny, lam) for lam in rep.history.iterates]
    values = np.mean([r.values for r in resp], axis=0)
    assert np.allclose(rep.x_bar.values, values, atol=1e-12)
    assert np.allclose(rep.lambda_bar, rep.history.iterates.mean(axis=0), atol=0)


def test_agent_zero_alone_with_slack():
    buyer = VertexOracle([[0.0], [1.0], [2.0]], [0.5], [[1.0]])
    prog = SeparableProgram([], [1e6], 1, ProgramMetadata(sigma=1, tau=1, width=2), agent0=buyer)
    rep = run(prog, SolveConfig(noise_enabled=False, T_override=50))
    assert np.array_equal(rep.lambda_bar, [0.0])
    assert np.array_equal(rep.x_bar.point_of(0), [2.0])


def test_determinism(tiny):
    prog = generate("knapsack", seed=2, n=15, k=2).program()
    a = run(prog, SolveConfig(T_override=500, seed=9))
    b = run(prog, SolveConfig(T_override=500, seed=9))
    assert np.array_equal(a.history.noisy_losses, b.history.noisy_losses)
    assert np.array_equal(a.lambda_bar, b.lambda_bar)
    assert all(np.array_equal(p, q) for p, q in zip(a.x_bar.points, b.x_bar.points))
    c = run(prog, SolveConfig(T_override=500, seed=10))
    assert not np.array_equal(a.lambda_bar, c.lambda_bar)


def test_workers_do_not_change_results():
    prog = generate("flow", seed=3, n=6, nodes=5).program()
    a = run(prog, SolveConfig(T_override=200, seed=1, workers=1))
    b = run(prog, SolveConfig(T_override=200, seed=1, workers=4))
    assert np.array_equal(a.lambda_bar, b.lambda_bar)
    assert all(np.array_equal(p, q) for p, q in zip(a.x_bar.points, b.x_bar.points))


def test_billboard_recomputation():
    prog = generate("ddemand", seed=1, n=8, k=3, d=2).program()
    rep = run(prog, SolveConfig(T_override=300, seed=2))
    assert baseline.billboard_check(rep, prog, sample=len(prog.labels))
    for label in prog.labels:
        traj = solver.agent_trajectory(prog, label, rep.history)
        assert np.array_equal(sum(r.point for r in traj) / rep.T, rep.x_bar.point_of(label))


class _Flaky(AgentOracle):
    k = 1

    def __init__(self):
        self.calls = 0

    def best_response(self, lam):
        self.calls += 1
        if self.calls > 5:
            raise RuntimeError("boom")
        return self.respond_at(np.array([1.0]))

    def evaluate(self, point):
        return 1.0, np.array([1.0])


def test_oracle_failure_keeps_partial_history(tiny):
    prog = SeparableProgram([tiny.oracle(1), _Flaky()], [1.0], 1, tiny.metadata)
    with pytest.raises(OracleError) as info:
        run(prog, SolveConfig(T_override=20))
    err = info.value
    assert err.agent == 2 and err.iteration == 5
    assert err.history.iterates.shape == (5, 1)
