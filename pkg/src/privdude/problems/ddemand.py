"""d-demand allocation: each agent buys at most one bundle of at most ``d`` goods.

Bundles are listed in lexicographic order of their sorted good indices, with
the empty bundle first. An agent's point is a one-hot vector over the nonempty
bundles, so the all-zero point is the empty bundle.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ScaleError
from ..model import AgentOracle, ProgramMetadata, Response, SeparableProgram

MAX_BUNDLES = 10**6


def bundle_count(k: int, d: int) -> int:
    return sum(math.comb(k, s) for s in range(min(d, k) + 1))


def bundles(k: int, d: int) -> list[tuple[int, ...]]:
    """All bundles of at most ``d`` goods, empty bundle first, lexicographic."""
    count = bundle_count(k, d)
    if count > MAX_BUNDLES:
        raise ScaleError(f"{count} bundles exceed the cap of {MAX_BUNDLES}")
    out = [c for s in range(min(d, k) + 1) for c in itertools.combinations(range(k), s)]
    return sorted(out)


def incidence(bundle_list, k: int) -> np.ndarray:
    inc = np.zeros((len(bundle_list), k))
    for row, bundle in enumerate(bundle_list):
        inc[row, list(bundle)] = 1.0
    return inc


class DemandOracle(AgentOracle):
    """Brute-force demand oracle over an explicit bundle value table."""

    def __init__(self, table, inc):
        self.table = np.asarray(table, dtype=float)
        self.inc = inc
        self.k = inc.shape[1]

    def _at(self, idx):
        point = np.zeros(len(self.table) - 1)
        if idx > 0:
            point[idx - 1] = 1.0
        return Response(point, float(self.table[idx]), self.inc[idx].copy())

    def best_response(self, lam):
        return self._at(int(np.argmax(self.table - self.inc @ lam)))

    def evaluate(self, point):
        point = np.asarray(point, dtype=float)
        return float(self.table[1:] @ point), self.inc[1:].T @ point

    def contains(self, point, tol=1e-9):
        point = np.asarray(point, dtype=float)
        return bool(np.all(point >= -tol) and point.sum() <= 1 + tol)

    def null_action(self):
        return self._at(0)

    def vertex_enumeration(self):
        return [self._at(i).point for i in range(len(self.table))]


class DemandBatch:
    def __init__(self, tables, inc):
        self.tables = np.asarray(tables, dtype=float)
        self.inc = inc

    def _assemble(self, idx):
        n, m = self.tables.shape
        points = np.zeros((n, m - 1))
        served = idx > 0
        points[np.flatnonzero(served), idx[served] - 1] = 1.0
        return points, self.tables[np.arange(n), idx], self.inc[idx]

    def best_response_batch(self, lam):
        return self._assemble(np.argmax(self.tables - (self.inc @ lam)[None, :], axis=1))

    def best_response_rows(self, lams):
        # Row by row so each margin vector is computed exactly as the per-agent oracle does.
        idx = np.array([np.argmax(t - self.inc @ lam) for t, lam in zip(self.tables, lams)], dtype=int)
        return self._assemble(idx)

    def evaluate_batch(self, points):
        points = np.asarray(points, dtype=float)
        return (self.tables[:, 1:] * points).sum(axis=1), points @ self.inc[1:]


@dataclass(frozen=True)
class DDemandInstance:
    supplies: np.ndarray
    d: int
    tables: np.ndarray
    seed: int | None = None
    kind = "ddemand"

    def __post_init__(self):
        s = np.asarray(self.supplies, dtype=float).reshape(-1)
        t = np.atleast_2d(np.asarray(self.tables, dtype=float))
        if self.d < 1:
            raise ParameterError("bundle cap d must be at least 1")
        if t.shape[1] != bundle_count(len(s), self.d):
            raise ParameterError(f"each table needs {bundle_count(len(s), self.d)} entries, got {t.shape[1]}")
        if np.any(t < 0) or np.any(t > 1) or np.any(t[:, 0] != 0):
            raise ParameterError("bundle values must lie in [0, 1] with the empty bundle worth 0")
        if np.any(s <= 0):
            raise ParameterError("supplies must be positive")
        object.__setattr__(self, "supplies", s)
        object.__setattr__(self, "tables", t)

    @property
    def n(self):
        return len(self.tables)

    @property
    def k(self):
        return len(self.supplies)

    def bundle_list(self):
        return bundles(self.k, self.d)

    def metadata(self) -> ProgramMetadata:
        d = min(self.d, self.k)
        return ProgramMetadata(sigma=math.sqrt(2.0) * d, tau=1.0, width=float(self.n * d),
                               V=1.0, C_inf=1.0, C_1=float(d), L=1.0, packing=True)

    def program(self) -> SeparableProgram:
        inc = incidence(self.bundle_list(), self.k)
        agents = [DemandOracle(t, inc) for t in self.tables]
        return SeparableProgram(agents, self.supplies, self.k, self.metadata(),
                                batch=DemandBatch(self.tables, inc), kind=self.kind)

    def payload(self) -> dict:
        return {"d": self.d, "tables": self.tables.tolist()}

    @classmethod
    def from_payload(cls, payload, b, seed=None):
        return cls(b, int(payload["d"]), payload["tables"], seed)


def additive_tables(item_values, d: int) -> np.ndarray:
    """Tables for capped additive valuations ``v(S) = min(1, sum_j u_j)``."""
    item_values = np.atleast_2d(np.asarray(item_values, dtype=float))
    inc = incidence(bundles(item_values.shape[1], d), item_values.shape[1])
    return np.minimum(1.0, item_values @ inc.T)


def generate(n: int, k: int, d: int = 2, seed: int = 0, supply: float | None = None) -> DDemandInstance:
    """Capped additive valuations with item values uniform on [0, 1/d]."""
    if n < 1 or k < 1 or d < 1:
        raise ParameterError("d-demand needs n, k, d >= 1")
    bundles(k, d)
    rng = np.random.default_rng(seed)
    item_values = rng.uniform(0.0, 1.0 / d, (n, k))
    tables = additive_tables(item_values, d)
    if supply is None:
        supply = max(1.0, math.floor(n * d / (2 * k)))
    return DDemandInstance(np.full(k, float(supply)), d, tables, seed)
