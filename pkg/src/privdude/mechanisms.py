"""Mechanisms built on the private solver: price-based satisfaction repair,
constraint reservation with vertex rounding, and flag-guarded rounding."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import solver
from .errors import DimensionError, InternalAssertionError, ParameterError, PreconditionError
from .model import AgentOracle, PrimalPoint, ProgramMetadata, Response, SeparableProgram
from .privacy import SparseVector
from .rng import Streams


def price_of(agent: AgentOracle, point, lambda_bar) -> float:
    lambda_bar = np.asarray(lambda_bar, dtype=float)
    _, contrib = agent.evaluate(point)
    if len(contrib) != len(lambda_bar):
        raise DimensionError(f"{len(contrib)} contributions against {len(lambda_bar)} prices")
    return float(contrib @ lambda_bar)


def utility(agent: AgentOracle, point, lambda_bar) -> float:
    value, _ = agent.evaluate(point)
    return value - price_of(agent, point, lambda_bar)


def is_satisfied(agent: AgentOracle, point, lambda_bar, alpha: float) -> bool:
    if alpha < 0:
        raise ParameterError(f"alpha must be nonnegative, got {alpha}")
    best = agent.best_response(np.asarray(lambda_bar, dtype=float))
    return utility(agent, point, lambda_bar) >= utility(agent, best.point, lambda_bar) - alpha


def truthfulness_params(metadata: ProgramMetadata, k: int, epsilon: float, delta: float, alpha: float):
    """Return ``(rho, gamma)`` for the approximate truthfulness guarantee."""
    rho = math.exp(epsilon)
    C_1 = metadata.C_1 if metadata.C_1 is not None else 0.0
    V = metadata.V if metadata.V is not None else 0.0
    gamma = alpha * (2.0 * math.exp(epsilon) - 1.0) + delta * max(V, C_1 * metadata.tau * math.sqrt(k))
    return rho, gamma


@dataclass
class PricedOutcome:
    points: PrimalPoint
    payments: np.ndarray
    satisfied: np.ndarray
    satisfied_before: np.ndarray
    reassigned: int
    rho: float
    gamma: float
    alpha: float
    report: solver.SolveReport
    xi: float | None = None
    kappa: float | None = None

    @property
    def unsatisfied_before(self) -> int:
        return int((~self.satisfied_before).sum())


def _require_null_actions(program: SeparableProgram):
    for label, oracle in zip(program.labels, program.oracles):
        if not oracle.has_null_action:
            raise PreconditionError(f"null action required: agent {label} has none")


def _require_packing(program: SeparableProgram):
    md = program.metadata
    if not md.packing or md.C_inf is None or not (md.L is not None and md.L > 0):
        raise PreconditionError("packing program required: metadata needs packing=True, C_inf and L > 0")


def _settle(program, report, alpha, pick) -> tuple[list[Response], np.ndarray, np.ndarray]:
    """Check every agent against the averaged prices; unsatisfied agents get
    their best response, satisfied ones whatever ``pick`` returns for them."""
    lam = report.lambda_bar
    finals, before, payments = [], [], []
    for label, oracle in zip(program.labels, program.oracles):
        point = report.x_bar.point_of(label)
        best = oracle.best_response(lam)
        ok = utility(oracle, point, lam) >= utility(oracle, best.point, lam) - alpha
        before.append(ok)
        final = pick(label, oracle, point) if ok else best
        finals.append(final)
        payments.append(float(final.contributions @ lam))
    return finals, np.array(before, dtype=bool), np.array(payments)


def truedude(program: SeparableProgram, config: solver.SolveConfig, alpha: float) -> PricedOutcome:
    if alpha < 0:
        raise ParameterError(f"alpha must be nonnegative, got {alpha}")
    _require_null_actions(program)
    report = solver.run(program, config)
    finals, before, payments = _settle(program, report, alpha, lambda label, oracle, point: oracle.respond_at(point))
    rho, gamma = truthfulness_params(program.metadata, program.k, config.epsilon, config.delta, alpha)
    out = PrimalPoint.from_responses(finals, program.labels)
    return PricedOutcome(out, payments, np.ones(len(finals), dtype=bool), before,
                         int((~before).sum()), rho, gamma, alpha, report)


def compute_reserve(metadata: ProgramMetadata, k: int, b, epsilon: float, delta: float, beta: float,
                    alpha: float) -> float:
    """Amount to shave off every constraint so rounded outputs stay feasible."""
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    b = np.asarray(b, dtype=float)
    w, tau, sigma = metadata.width, metadata.tau, metadata.sigma
    C_inf = metadata.C_inf if metadata.C_inf is not None else 0.0
    noise_term = (160.0 * math.sqrt(8.0) * k * tau * sigma * C_inf / epsilon
                  * math.log(4.0 * w * w * k * k / beta) ** 2 * math.sqrt(math.log(2.0 * w / delta))
                  * (2.0 / tau + C_inf * k / alpha))
    return math.sqrt(3.0 * max(float(b.max()), 0.0)) + noise_term


def tightdude(program: SeparableProgram, config: solver.SolveConfig, alpha: float) -> PricedOutcome:
    _require_packing(program)
    _require_null_actions(program)
    xi = compute_reserve(program.metadata, program.k, program.b, config.epsilon, config.delta, config.beta, alpha)
    ratios = xi / program.b
    kappa = float(ratios.max())
    if not kappa < 1:
        j = int(np.argmax(ratios))
        raise PreconditionError(f"reserve {xi:.6g} leaves no room: kappa={kappa:.6g} at constraint {j}")
    reduced = program.with_b(program.b - xi)
    report = solver.run(reduced, config.scaled(0.5, 0.5, 0.5))
    streams = Streams(config.seed)

    def pick(label, oracle, point):
        return solver.uniform_round(program, label, report.history, streams, "tight-round")

    finals, before, payments = _settle(program, report, alpha, pick)
    out = PrimalPoint.from_responses(finals, program.labels)
    load = out.aggregate()
    if np.any(load > program.b):
        j = int(np.argmax(load - program.b))
        raise InternalAssertionError(f"rounded output violates constraint {j}: {load[j]} > {program.b[j]}")
    rho, gamma = truthfulness_params(program.metadata, program.k, config.epsilon, config.delta, alpha)
    return PricedOutcome(out, payments, np.ones(len(finals), dtype=bool), before,
                         int((~before).sum()), rho, gamma, alpha, report, xi, kappa)


def flag_budget(epsilon: float, delta: float, k: int) -> float:
    """Per-flag privacy level so that ``k`` flags compose to (epsilon/2, delta/2)."""
    return epsilon / (2.0 * math.sqrt(8.0 * k * math.log(2.0 / delta)))


def flag_margin(flag_epsilon: float, n: int, k: int, beta: float) -> float:
    return 8.0 * (math.log(n) + math.log(3.0 * k / beta)) / flag_epsilon


class FlagBank:
    """One sparse vector per constraint, all fed cumulative loads."""

    def __init__(self, b, zeta: float, flag_epsilon: float, streams: Streams, noise_disabled: bool = False):
        self.thresholds = np.asarray(b, dtype=float) - zeta
        self.flags = [SparseVector(flag_epsilon, thr, streams.generator("flag", j), noise_disabled)
                      for j, thr in enumerate(self.thresholds)]

    @property
    def raised(self) -> np.ndarray:
        return np.array([f.halted for f in self.flags], dtype=bool)

    def update(self, loads) -> None:
        for flag, q in zip(self.flags, loads):
            if not flag.halted:
                flag.query(float(q))


@dataclass
class RoundOutcome:
    point: PrimalPoint
    served: np.ndarray
    zeta: float
    thresholds: np.ndarray
    flag_epsilon: float
    report: solver.SolveReport
    raised: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def _rounded(program: SeparableProgram, history, streams: Streams) -> list[Response]:
    """Each agent's uniformly chosen best response, from agent-keyed streams."""
    labels = program.labels
    ts = np.array([streams.generator("round", label).integers(history.T) for label in labels], dtype=int)
    if program.batch is not None and hasattr(program.batch, "best_response_rows"):
        out = []
        if program.agent0 is not None:
            out.append(program.agent0.best_response(history.iterates[ts[0]]))
            ts = ts[1:]
        pts, vals, contrib = program.batch.best_response_rows(history.iterates[ts])
        out.extend(Response(p, float(v), c) for p, v, c in zip(pts, vals, contrib))
        return out
    return [program.oracle(label).best_response(history.iterates[t]) for label, t in zip(labels, ts)]


def rounddude(program: SeparableProgram, config: solver.SolveConfig) -> RoundOutcome:
    _require_packing(program)
    _require_null_actions(program)
    k = program.k
    flag_eps = flag_budget(config.epsilon, config.delta, k)
    zeta = flag_margin(flag_eps, max(program.n, 1), k, config.beta)
    if np.any(program.b <= zeta):
        j = int(np.argmin(program.b))
        raise PreconditionError(f"b_{j}={program.b[j]:.6g} does not exceed the flag margin {zeta:.6g}")
    report = solver.run(program, config.scaled(0.5, 0.5, 1.0 / 3.0))
    streams = Streams(config.seed)
    bank = FlagBank(program.b, zeta, flag_eps, streams, noise_disabled=not config.noise_enabled)
    load = np.zeros(k)
    finals, served = [], []
    for label, oracle, pick in zip(program.labels, program.oracles, _rounded(program, report.history, streams)):
        blocked = np.any(bank.raised & (pick.contributions > 0))
        final = oracle.null_action() if blocked else pick
        finals.append(final)
        served.append(not blocked)
        load = load + final.contributions
        bank.update(load)
    out = PrimalPoint.from_responses(finals, program.labels)
    return RoundOutcome(out, np.array(served, dtype=bool), zeta, bank.thresholds, flag_eps, report, bank.raised)
