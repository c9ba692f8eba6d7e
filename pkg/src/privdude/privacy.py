"""Noise sources, budget accounting and the sparse vector mechanism."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StateError

# Gaussian tail constant: P(|Z| > t) <= 2 exp(-a t^2 / sigma^2) style bounds use this.
TAIL_CONSTANT = math.log(2.0) / (2.0 * math.pi)


@dataclass(frozen=True)
class TailConstants:
    a: float = TAIL_CONSTANT


def _check_eps_delta(epsilon, delta):
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 0.5:
        raise ParameterError(f"delta must lie in (0, 1/2), got {delta}")


def per_round_budget(epsilon: float, delta: float, T: int) -> tuple[float, float]:
    """Split a total (epsilon, delta) budget evenly over ``T`` adaptive rounds."""
    _check_eps_delta(epsilon, delta)
    if T < 1 or int(T) != T:
        raise ParameterError(f"T must be a positive integer, got {T}")
    root = math.sqrt(8.0 * T * math.log(2.0 / delta))
    eps_prime = epsilon / root
    # Step down by an ulp when rounding would push the composed budget over.
    while root * eps_prime > epsilon:
        eps_prime = math.nextafter(eps_prime, 0.0)
    delta_prime = delta / (2.0 * T)
    while 2.0 * T * delta_prime > delta:
        delta_prime = math.nextafter(delta_prime, 0.0)
    return eps_prime, delta_prime


def compose(eps_prime: float, delta_prime: float, T: int, delta_slack: float) -> tuple[float, float]:
    """Advanced composition of ``T`` (eps', delta') mechanisms with slack delta''."""
    if eps_prime < 0 or delta_prime < 0 or not 0 < delta_slack < 1:
        raise ParameterError("composition needs eps', delta' >= 0 and delta'' in (0, 1)")
    eps = eps_prime * math.sqrt(2.0 * T * math.log(1.0 / delta_slack)) + T * eps_prime * math.expm1(eps_prime)
    return eps, T * delta_prime + delta_slack


def gaussian_sigma(delta2_sensitivity: float, epsilon_prime: float, delta_prime: float) -> float:
    """Standard deviation that makes the Gaussian mechanism (eps', delta')-DP."""
    if delta2_sensitivity < 0:
        raise ParameterError(f"sensitivity must be nonnegative, got {delta2_sensitivity}")
    if not epsilon_prime > 0:
        raise ParameterError(f"epsilon' must be positive, got {epsilon_prime}")
    if not 0 < delta_prime < 1:
        raise ParameterError(f"delta' must lie in (0, 1), got {delta_prime}")
    if delta2_sensitivity == 0:
        return 0.0
    return math.sqrt(2.0 * math.log(1.25 / delta_prime)) * delta2_sensitivity / epsilon_prime


def sample_gaussian(std: float, rng: np.random.Generator) -> float:
    if std < 0:
        raise ParameterError(f"std must be nonnegative, got {std}")
    z = rng.standard_normal()
    return float(std * z) if std > 0 else 0.0


def sample_laplace(scale: float, rng: np.random.Generator) -> float:
    if scale < 0:
        raise ParameterError(f"scale must be nonnegative, got {scale}")
    z = rng.laplace()
    return float(scale * z) if scale > 0 else 0.0


def sv_accuracy_bound(epsilon: float, k_queries: int, beta: float) -> float:
    """Accuracy radius of one sparse vector instance answering ``k_queries``."""
    if not epsilon > 0 or k_queries < 1:
        raise ParameterError("sparse vector needs epsilon > 0 and at least one query")
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    return 8.0 * (math.log(k_queries) + math.log(2.0 / beta)) / epsilon


class SparseVector:
    """Above-threshold detector that halts after its first positive answer.

    With ``noise_disabled`` the comparisons are exact, which is only useful
    for testing the control flow.
    """

    def __init__(self, epsilon: float, threshold: float, rng: np.random.Generator,
                 noise_disabled: bool = False):
        if not epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {epsilon}")
        self.epsilon = float(epsilon)
        self.threshold = float(threshold)
        self.noise_disabled = noise_disabled
        self._rng = rng
        shift = 0.0 if noise_disabled else sample_laplace(2.0 / self.epsilon, rng)
        self.noisy_threshold = self.threshold + shift
        self.halted = False
        self.queries = 0

    def query(self, q: float) -> bool:
        """Return True for the positive answer, False otherwise."""
        if self.halted:
            raise StateError("sparse vector already halted")
        self.queries += 1
        y = q if self.noise_disabled else q + sample_laplace(4.0 / self.epsilon, self._rng)
        if y >= self.noisy_threshold:
            self.halted = True
            return True
        return False


def sv_query(sv: SparseVector, q: float) -> bool:
    return sv.query(q)


@dataclass(frozen=True)
class LedgerEntry:
    label: str
    epsilon: float
    delta: float


@dataclass
class BudgetLedger:
    """Append-only record of how a total privacy budget was spent."""

    total_epsilon: float
    total_delta: float
    per_round_epsilon: float
    per_round_delta: float
    rounds: int
    noise_enabled: bool = True
    T_overridden: bool = False
    _entries: list = field(default_factory=list, repr=False)

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def record(self, label: str, epsilon: float, delta: float) -> None:
        self._entries.append(LedgerEntry(label, float(epsilon), float(delta)))

    def check_identities(self) -> bool:
        """True when the per-round split composes back within the total."""
        T = self.rounds
        eps_ok = math.sqrt(8.0 * T * math.log(2.0 / self.total_delta)) * self.per_round_epsilon <= self.total_epsilon
        delta_ok = 2.0 * T * self.per_round_delta <= self.total_delta
        return eps_ok and delta_ok

    def composed(self) -> tuple[float, float]:
        return compose(self.per_round_epsilon, self.per_round_delta, self.rounds, self.total_delta / 2.0)

    def as_dict(self) -> dict:
        return {
            "total_epsilon": self.total_epsilon,
            "total_delta": self.total_delta,
            "per_round_epsilon": self.per_round_epsilon,
            "per_round_delta": self.per_round_delta,
            "rounds": self.rounds,
            "noise_enabled": self.noise_enabled,
            "T_overridden": self.T_overridden,
            "entries": [[e.label, e.epsilon, e.delta] for e in self._entries],
        }
