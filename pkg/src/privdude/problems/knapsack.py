"""Multi-dimensional fractional knapsack: one agent per item.

Item ``i`` has value ``v_i`` and weight ``w_ij`` in every knapsack ``j``. An
item's best response takes it whole when its value beats the priced weight and
leaves it out otherwise, including on exact ties.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..model import AgentOracle, ProgramMetadata, Response, SeparableProgram


class ItemOracle(AgentOracle):
    def __init__(self, value: float, weights):
        self.value = float(value)
        self.weights = np.asarray(weights, dtype=float)
        self.k = len(self.weights)

    def best_response(self, lam):
        margin = self.value - (self.weights * lam).sum()
        x = 1.0 if margin > 0 else 0.0
        return Response(np.array([x]), self.value * x, self.weights * x)

    def evaluate(self, point):
        x = float(np.asarray(point).reshape(-1)[0])
        return self.value * x, self.weights * x

    def contains(self, point, tol=1e-9):
        x = float(np.asarray(point).reshape(-1)[0])
        return -tol <= x <= 1 + tol

    def null_action(self):
        return Response(np.array([0.0]), 0.0, np.zeros(self.k))

    def vertex_enumeration(self):
        return [np.array([0.0]), np.array([1.0])]


class KnapsackBatch:
    """All items at once; row ``i`` matches ``ItemOracle`` ``i`` bit for bit."""

    def __init__(self, values, weights):
        self.values = np.asarray(values, dtype=float)
        self.weights = np.asarray(weights, dtype=float)

    def _assemble(self, margin):
        x = np.where(margin > 0, 1.0, 0.0)
        return x[:, None], self.values * x, self.weights * x[:, None]

    def best_response_batch(self, lam):
        return self._assemble(self.values - (self.weights * lam).sum(axis=1))

    def best_response_rows(self, lams):
        """Best responses where agent ``i`` faces prices ``lams[i]``."""
        return self._assemble(self.values - (self.weights * lams).sum(axis=1))

    def evaluate_batch(self, points):
        x = np.asarray(points, dtype=float).reshape(-1)
        return self.values * x, self.weights * x[:, None]


@dataclass(frozen=True)
class KnapsackInstance:
    values: np.ndarray
    weights: np.ndarray
    capacities: np.ndarray
    seed: int | None = None
    kind = "knapsack"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        c = np.asarray(self.capacities, dtype=float).reshape(-1)
        if w.ndim == 1:
            w = w.reshape(len(v), -1)
        if w.shape != (len(v), len(c)):
            raise ParameterError(f"weights must have shape {(len(v), len(c))}, got {w.shape}")
        if np.any(v < 0) or np.any(v > 1) or np.any(w < 0) or np.any(w > 1):
            raise ParameterError("knapsack values and weights must lie in [0, 1]")
        if np.any(c <= 0):
            raise ParameterError("knapsack capacities must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "capacities", c)

    @property
    def n(self):
        return len(self.values)

    @property
    def k(self):
        return len(self.capacities)

    def metadata(self) -> ProgramMetadata:
        pos = self.weights > 0
        ratios = np.divide(self.values[:, None], self.weights, out=np.zeros_like(self.weights), where=pos)
        tau = float(ratios.max()) if pos.any() else 1.0
        L = float(self.weights[pos].min()) if pos.any() else 1.0
        return ProgramMetadata(sigma=math.sqrt(self.k), tau=tau if tau > 0 else 1.0, width=float(self.n),
                               V=1.0, C_inf=1.0, C_1=float(self.k), L=L, packing=True)

    def program(self) -> SeparableProgram:
        agents = [ItemOracle(v, w) for v, w in zip(self.values, self.weights)]
        return SeparableProgram(agents, self.capacities, self.k, self.metadata(),
                                batch=KnapsackBatch(self.values, self.weights), kind=self.kind)

    def payload(self) -> dict:
        return {"values": self.values.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_payload(cls, payload, b, seed=None):
        return cls(payload["values"], payload["weights"], b, seed)


def generate(n: int, k: int = 1, seed: int = 0, capacity_fraction: float = 0.5) -> KnapsackInstance:
    """Values uniform on [0, 1], weights uniform on [0.1, 1] and capacities a
    fixed fraction of each knapsack's total weight."""
    if n < 1 or k < 1:
        raise ParameterError("knapsack needs n >= 1 and k >= 1")
    if not capacity_fraction > 0:
        raise ParameterError("capacity_fraction must be positive")
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, 1.0, n)
    weights = rng.uniform(0.1, 1.0, (n, k))
    capacities = capacity_fraction * weights.sum(axis=0)
    return KnapsackInstance(values, weights, capacities, seed)
