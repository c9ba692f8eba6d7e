"""Electricity scheduling: each household covers a per-interval demand from a
grid of (interval, slot) cells and may buy extra cells up to a total cap.

Cell ``(t, q)`` is coupling constraint ``t * Q + q`` with capacity ``c_tq``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ScaleError
from ..model import AgentOracle, ProgramMetadata, Response, SeparableProgram


def _fill(x, order, amount):
    """Pour ``amount`` units into ``order``, topping each cell up to 1."""
    for idx in order:
        if amount <= 0:
            break
        take = min(1.0 - x[idx], amount)
        x[idx] += take
        amount -= take
    return x


class HouseholdOracle(AgentOracle):
    def __init__(self, values, demands, d_max: float):
        self.values = np.atleast_2d(np.asarray(values, dtype=float))
        self.demands = np.asarray(demands, dtype=float)
        self.d_max = float(d_max)
        self.T_int, self.Q = self.values.shape
        self.k = self.T_int * self.Q
        self.has_null_action = not np.any(self.demands > 0)

    def best_response(self, lam):
        margin = self.values.reshape(-1) - np.asarray(lam, dtype=float)
        x = np.zeros(self.k)
        for t, need in enumerate(self.demands):
            row = margin[t * self.Q:(t + 1) * self.Q]
            order = t * self.Q + np.argsort(-row, kind="stable")
            _fill(x, order, need)
        spare = self.d_max - self.demands.sum()
        # Leftover budget goes to the best positive margins among unfilled capacity.
        order = [i for i in np.argsort(-margin, kind="stable") if margin[i] > 0 and x[i] < 1.0]
        _fill(x, order, spare)
        return Response(x, float(self.values.reshape(-1) @ x), x.copy())

    def evaluate(self, point):
        point = np.asarray(point, dtype=float)
        return float(self.values.reshape(-1) @ point), point.copy()

    def contains(self, point, tol=1e-9):
        x = np.asarray(point, dtype=float)
        rows = x.reshape(self.T_int, self.Q).sum(axis=1)
        return bool(np.all(x >= -tol) and np.all(x <= 1 + tol)
                    and np.all(rows >= self.demands - tol) and x.sum() <= self.d_max + tol)

    def null_action(self):
        if not self.has_null_action:
            return super().null_action()
        return Response(np.zeros(self.k), 0.0, np.zeros(self.k))

    def vertex_enumeration(self):
        if self.k > 20:
            raise ScaleError(f"{self.k} cells are too many to enumerate")
        if np.any(self.demands != np.round(self.demands)) or self.d_max != round(self.d_max):
            raise ScaleError("binary vertices need integer demands and cap")
        out = []
        for bits in itertools.product((0.0, 1.0), repeat=self.k):
            x = np.array(bits)
            if self.contains(x):
                out.append(x)
        return out


@dataclass(frozen=True)
class ScheduleInstance:
    values: np.ndarray
    demands: np.ndarray
    d_max: float
    capacities: np.ndarray
    seed: int | None = None
    kind = "schedule"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        dem = np.asarray(self.demands, dtype=float)
        caps = np.asarray(self.capacities, dtype=float)
        if v.ndim != 3 or dem.shape != v.shape[:2] or caps.shape != v.shape[1:]:
            raise ParameterError("values must be (n, T, Q), demands (n, T) and capacities (T, Q)")
        if np.any(v < 0) or np.any(v > 1):
            raise ParameterError("slot values must lie in [0, 1]")
        if np.any(dem < 0) or np.any(dem > v.shape[2]):
            raise ParameterError("each interval demand must lie in [0, Q]")
        if np.any(dem.sum(axis=1) > self.d_max):
            raise ParameterError("total demand exceeds the cap d_max")
        if np.any(caps <= 0):
            raise ParameterError("slot capacities must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "demands", dem)
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "d_max", float(self.d_max))

    @property
    def n(self):
        return len(self.values)

    @property
    def k(self):
        return self.capacities.size

    def metadata(self) -> ProgramMetadata:
        null_ok = not np.any(self.demands > 0)
        return ProgramMetadata(sigma=2.0 * math.sqrt(self.d_max), tau=1.0, width=float(self.n * self.d_max),
                               V=self.d_max, C_inf=1.0, C_1=self.d_max, L=1.0 if null_ok else None,
                               packing=null_ok)

    def program(self) -> SeparableProgram:
        agents = [HouseholdOracle(v, d, self.d_max) for v, d in zip(self.values, self.demands)]
        return SeparableProgram(agents, self.capacities.reshape(-1), self.k, self.metadata(), kind=self.kind)

    def payload(self) -> dict:
        return {"values": self.values.tolist(), "demands": self.demands.tolist(), "d_max": self.d_max,
                "shape": list(self.capacities.shape)}

    @classmethod
    def from_payload(cls, payload, b, seed=None):
        caps = np.asarray(b, dtype=float).reshape(payload["shape"])
        return cls(payload["values"], payload["demands"], payload["d_max"], caps, seed)


def generate(n: int, intervals: int = 3, slots: int = 3, d_max: int = 3, seed: int = 0,
             demand_prob: float = 0.3) -> ScheduleInstance:
    """Integer demands of 0 or 1 per interval, truncated to fit under ``d_max``."""
    if n < 1 or intervals < 1 or slots < 1 or d_max < 1:
        raise ParameterError("schedule sizes must be positive")
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, 1.0, (n, intervals, slots))
    demands = (rng.random((n, intervals)) < demand_prob).astype(float)
    for row in demands:
        extra = row.sum() - d_max
        for t in np.flatnonzero(row)[::-1]:
            if extra <= 0:
                break
            row[t] = 0.0
            extra -= 1
    caps = rng.integers(1, max(1, n // 2) + 1, (intervals, slots)).astype(float)
    return ScheduleInstance(values, demands, d_max, caps, seed)
