"""Private dual decomposition: agents best-respond to public prices while the
dual player runs noisy projected gradient steps on the coupling violations.

Only the dual iterates are ever shared. Each agent's averaged point is a
function of those iterates and the agent's own oracle, which is what makes the
output jointly private.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ogd
from .errors import OracleError, ParameterError
from .model import PrimalPoint, ProgramMetadata, Response, SeparableProgram, evaluate_coupling
from .privacy import BudgetLedger, gaussian_sigma, per_round_budget
from .rng import Streams


@dataclass(frozen=True)
class SolveConfig:
    epsilon: float = 1.0
    delta: float = 0.01
    beta: float = 0.1
    noise_enabled: bool = True
    T_override: int | None = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 0.5:
            raise ParameterError(f"delta must lie in (0, 1/2), got {self.delta}")
        if not 0 < self.beta < 1:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.T_override is not None and self.T_override < 1:
            raise ParameterError(f"T_override must be at least 1, got {self.T_override}")
        if self.seed < 0:
            raise ParameterError(f"seed must be nonnegative, got {self.seed}")
        if self.workers < 1:
            raise ParameterError(f"workers must be at least 1, got {self.workers}")

    def scaled(self, eps_factor: float, delta_factor: float, beta_factor: float) -> "SolveConfig":
        """Same run settings with a fraction of the privacy and confidence budget."""
        return SolveConfig(self.epsilon * eps_factor, self.delta * delta_factor, self.beta * beta_factor,
                           self.noise_enabled, self.T_override, self.seed, self.workers)


@dataclass(frozen=True)
class DualSchedule:
    T: int
    epsilon_prime: float
    delta_prime: float
    eta: float
    noise_std: float
    box_hi: float
    overridden: bool = False
    T_formula: int = 0

    def as_dict(self) -> dict:
        return {
            "T": self.T, "epsilon_prime": self.epsilon_prime, "delta_prime": self.delta_prime,
            "eta": self.eta, "noise_std": self.noise_std, "box_hi": self.box_hi,
            "overridden": self.overridden, "T_formula": self.T_formula,
        }


def derive_schedule(metadata: ProgramMetadata, config: SolveConfig, k: int) -> DualSchedule:
    w, tau = metadata.width, metadata.tau
    if not w >= 1:
        raise ParameterError(f"width must be at least 1, got {w}")
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    T_formula = math.ceil(w * w)
    T = config.T_override if config.T_override is not None else T_formula
    eps_p, delta_p = per_round_budget(config.epsilon, config.delta, T)
    if config.noise_enabled:
        noise_std = gaussian_sigma(metadata.sigma, eps_p, delta_p)
        eta = 2.0 * tau / (math.sqrt(T) * (w + math.log(T * k / config.beta) / eps_p))
    else:
        noise_std = 0.0
        eta = 2.0 * tau / (math.sqrt(T) * w)
    return DualSchedule(T, eps_p, delta_p, eta, noise_std, 2.0 * tau,
                        config.T_override is not None, T_formula)


def rp_theory(metadata: ProgramMetadata, k: int, epsilon: float, delta: float, beta: float) -> float:
    """Dual regret bound at the balanced horizon ``T = w^2``."""
    w, tau, sigma = metadata.width, metadata.tau, metadata.sigma
    return (40.0 * math.sqrt(8.0) * k * tau * sigma / epsilon
            * math.log(2.0 * w * w * k / beta) * math.sqrt(math.log(w * w / delta)))


def rp_actual(metadata: ProgramMetadata, k: int, schedule: DualSchedule, beta: float) -> float:
    """Dual regret bound at the horizon actually run, from the OGD machinery."""
    cfg = ogd.OgdConfig(schedule.eta, schedule.box_hi, k, metadata.width, schedule.T)
    return ogd.regret_bound(cfg, schedule.noise_std, beta)


def rp_for(program: SeparableProgram, config: SolveConfig) -> float:
    schedule = derive_schedule(program.metadata, config, program.k)
    return rp_actual(program.metadata, program.k, schedule, config.beta)


def _wrap(exc, label, iteration=None, history=None):
    if isinstance(exc, OracleError):
        return exc
    err = OracleError(f"oracle of agent {label} failed: {exc}", agent=label, iteration=iteration, history=history)
    err.__cause__ = exc
    return err


class _Responder:
    """Best responses of every agent at one price vector, in label order."""

    def __init__(self, program: SeparableProgram, workers: int = 1):
        self.program = program
        self.pool = ThreadPoolExecutor(workers) if workers > 1 and program.batch is None else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def __call__(self, lam, iteration=None):
        """Return ``(head, body_points, values, contributions)``.

        ``head`` is agent 0's response or None. ``values`` and
        ``contributions`` cover every label, agent 0 first.
        """
        program = self.program
        head = None
        if program.agent0 is not None:
            try:
                head = program.agent0.best_response(lam)
            except Exception as exc:
                raise _wrap(exc, 0, iteration) from exc
        if program.batch is not None:
            try:
                body, vals, contrib = program.batch.best_response_batch(lam)
            except Exception as exc:
                label = self._culprit(lam)
                raise _wrap(exc, label, iteration) from exc
        else:
            responses = self._each(lam, iteration)
            body = [r.point for r in responses]
            vals = np.array([r.value for r in responses])
            contrib = (np.array([r.contributions for r in responses]) if responses
                       else np.zeros((0, program.k)))
        if head is not None:
            vals = np.concatenate(([head.value], vals))
            contrib = np.vstack((head.contributions[None, :], contrib)) if len(contrib) else head.contributions[None, :]
        return head, body, vals, contrib

    def _each(self, lam, iteration):
        agents = self.program.agents

        def one(i):
            try:
                return agents[i].best_response(lam)
            except Exception as exc:
                raise _wrap(exc, i + 1, iteration) from exc

        if self.pool is None:
            return [one(i) for i in range(len(agents))]
        return list(self.pool.map(one, range(len(agents))))

    def _culprit(self, lam):
        for i, agent in enumerate(self.program.agents):
            try:
                agent.best_response(lam)
            except Exception:
                return i + 1
        return None


def best_respond_all(program: SeparableProgram, lam) -> PrimalPoint:
    lam = np.asarray(lam, dtype=float)
    head, body, vals, contrib = _Responder(program)(lam)
    points = ([head.point] if head is not None else []) + [np.asarray(p) for p in body]
    return PrimalPoint(points, vals, contrib, program.labels)


def noisy_gradient(program: SeparableProgram, point: PrimalPoint, schedule: DualSchedule,
                   streams: Streams, t: int) -> np.ndarray:
    grad = evaluate_coupling(program, point)
    if schedule.noise_std > 0:
        grad = grad + schedule.noise_std * streams.generator("gradient-noise", t).standard_normal(program.k)
    return grad


@dataclass
class SolveReport:
    x_bar: PrimalPoint
    lambda_bar: np.ndarray
    history: ogd.OgdHistory
    schedule: DualSchedule
    ledger: BudgetLedger
    config: SolveConfig
    rp_theory: float
    rp: float
    audit: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.schedule.T


def _audit(program: SeparableProgram, x_bar: PrimalPoint, lambda_bar, box_hi) -> dict:
    lhs = x_bar.aggregate() if len(x_bar.values) else np.zeros(program.k)
    slack = program.b - lhs
    return {
        "objective": x_bar.objective,
        "total_violation": float(np.clip(-slack, 0.0, None).sum()),
        "slacks": slack.tolist(),
        "lambda_in_box": bool(np.all(lambda_bar >= 0) and np.all(lambda_bar <= box_hi)),
    }


def run(program: SeparableProgram, config: SolveConfig) -> SolveReport:
    k = program.k
    if len(program.b) != k:
        raise ParameterError(f"b has length {len(program.b)} but k={k}")
    schedule = derive_schedule(program.metadata, config, k)
    T = schedule.T
    streams = Streams(config.seed)
    ogd_cfg = ogd.OgdConfig(schedule.eta, schedule.box_hi, k, program.metadata.width, T)

    iterates = np.empty((T, k))
    losses = np.empty((T, k))
    noisy = np.empty((T, k))
    responder = _Responder(program, config.workers)
    lam = np.zeros(k)
    head_sum = None
    body_sum = None
    val_sum = None
    con_sum = None
    b = program.b
    try:
        for t in range(T):
            iterates[t] = lam
            try:
                head, body, vals, contrib = responder(lam, iteration=t)
            except OracleError as exc:
                exc.iteration = t
                exc.history = ogd.OgdHistory(iterates[:t].copy(), losses[:t].copy(), noisy[:t].copy(), schedule.box_hi)
                raise
            if t == 0:
                head_sum = None if head is None else head.point.astype(float).copy()
                body_sum = np.array(body, dtype=float) if isinstance(body, np.ndarray) else [np.asarray(p, dtype=float).copy() for p in body]
                val_sum = vals.astype(float).copy()
                con_sum = contrib.astype(float).copy()
            else:
                if head is not None:
                    head_sum += head.point
                if isinstance(body_sum, np.ndarray):
                    body_sum += body
                else:
                    for acc, p in zip(body_sum, body):
                        acc += p
                val_sum += vals
                con_sum += contrib
            grad = (contrib.sum(axis=0) - b) if len(vals) else -b
            losses[t] = grad
            if schedule.noise_std > 0:
                grad = grad + schedule.noise_std * streams.generator("gradient-noise", t).standard_normal(k)
            noisy[t] = grad
            lam = np.clip(lam + schedule.eta * grad, 0.0, schedule.box_hi)
    finally:
        responder.close()

    points = ([head_sum / T] if head_sum is not None else []) + [p / T for p in body_sum]
    x_bar = PrimalPoint(points, val_sum / T, con_sum / T if len(val_sum) else np.zeros((0, k)), program.labels)
    lambda_bar = iterates.mean(axis=0)
    history = ogd.OgdHistory(iterates, losses, noisy, schedule.box_hi)

    ledger = BudgetLedger(config.epsilon, config.delta, schedule.epsilon_prime, schedule.delta_prime, T,
                          noise_enabled=config.noise_enabled, T_overridden=schedule.overridden)
    if config.noise_enabled:
        ledger.record("gaussian-gradient", config.epsilon, config.delta)
    rp = rp_actual(program.metadata, k, schedule, config.beta)
    theory = rp_theory(program.metadata, k, config.epsilon, config.delta, config.beta)
    report = SolveReport(x_bar, lambda_bar, history, schedule, ledger, config, theory, rp)
    report.audit = _audit(program, x_bar, lambda_bar, schedule.box_hi)
    report.counts = {"iterations": T, "oracle_calls": T * len(program.labels)}
    return report


def agent_trajectory(program: SeparableProgram, label: int, history: ogd.OgdHistory) -> list[Response]:
    """Recompute one agent's best responses from the published dual iterates."""
    oracle = program.oracle(label)
    return [oracle.best_response(lam) for lam in history.iterates]


def uniform_round(program: SeparableProgram, label: int, history: ogd.OgdHistory,
                  streams: Streams, purpose: str) -> Response:
    """Pick one of the agent's ``T`` best responses uniformly at random.

    The draw uses a stream keyed by the agent, so it is independent of every
    other agent and of processing order.
    """
    t = int(streams.generator(purpose, label).integers(history.T))
    return program.oracle(label).best_response(history.iterates[t])
