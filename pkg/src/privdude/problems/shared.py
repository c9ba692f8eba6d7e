"""Allocation with shared resources.

Agents each join at most one project. Project ``j`` needs every resource in
``R_j``, and a public agent 0 decides how much of each resource ``y_r`` to buy
at unit cost ``c_r``. Constraint ``(j, r)`` says the number of agents on
project ``j`` is at most ``y_r``; constraints are ordered by ``(j, r)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..model import AgentOracle, ProgramMetadata, Response, SeparableProgram, VertexOracle


def constraint_pairs(requirements) -> list[tuple[int, int]]:
    return [(j, r) for j, req in enumerate(requirements) for r in sorted(req)]


class ProjectOracle(VertexOracle):
    """Choose one project, or none when no margin is strictly positive."""

    def __init__(self, values, requirements):
        values = np.asarray(values, dtype=float)
        pairs = constraint_pairs(requirements)
        m = len(values)
        matrix = np.zeros((len(pairs), m))
        for row, (j, _) in enumerate(pairs):
            matrix[row, j] = 1.0
        vertices = np.vstack((np.zeros(m), np.eye(m)))
        super().__init__(vertices, values, matrix)

    def contains(self, point, tol=1e-9):
        point = np.asarray(point, dtype=float)
        return bool(np.all(point >= -tol) and point.sum() <= 1 + tol)


class ResourceBuyer(AgentOracle):
    """Agent 0: buys ``n`` units of a resource exactly when its prices beat its cost."""

    def __init__(self, costs, requirements, n: int):
        self.costs = np.asarray(costs, dtype=float)
        self.pairs = constraint_pairs(requirements)
        self.n = n
        self.k = len(self.pairs)
        self._res = np.array([r for _, r in self.pairs], dtype=int)

    def _contrib(self, y):
        return -y[self._res]

    def best_response(self, lam):
        demand = np.zeros(len(self.costs))
        np.add.at(demand, self._res, np.asarray(lam, dtype=float))
        y = np.where(demand > self.costs, float(self.n), 0.0)
        return Response(y, float(-self.costs @ y), self._contrib(y))

    def evaluate(self, point):
        y = np.asarray(point, dtype=float)
        return float(-self.costs @ y), self._contrib(y)

    def contains(self, point, tol=1e-9):
        y = np.asarray(point, dtype=float)
        return bool(np.all(y >= -tol) and np.all(y <= self.n + tol))

    def null_action(self):
        y = np.zeros(len(self.costs))
        return Response(y, 0.0, self._contrib(y))

    def vertex_enumeration(self):
        m = len(self.costs)
        return [self.n * np.array([(mask >> r) & 1 for r in range(m)], dtype=float) for mask in range(2 ** m)]


@dataclass(frozen=True)
class SharedInstance:
    values: np.ndarray
    costs: np.ndarray
    requirements: tuple
    seed: int | None = None
    kind = "shared"

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        c = np.asarray(self.costs, dtype=float).reshape(-1)
        req = tuple(tuple(sorted(int(r) for r in rs)) for rs in self.requirements)
        if v.shape[1] != len(req):
            raise ParameterError("values need one column per project")
        if np.any(v < 0) or np.any(v > 1) or np.any(c < 0):
            raise ParameterError("project values must lie in [0, 1] and costs be nonnegative")
        if any(not rs or r < 0 or r >= len(c) for rs in req for r in rs):
            raise ParameterError("each project needs a nonempty set of known resources")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "costs", c)
        object.__setattr__(self, "requirements", req)

    @property
    def n(self):
        return len(self.values)

    @property
    def k(self):
        return len(constraint_pairs(self.requirements))

    @property
    def d(self):
        return max(len(r) for r in self.requirements)

    def metadata(self) -> ProgramMetadata:
        return ProgramMetadata(sigma=math.sqrt(2.0 * self.d), tau=1.0, width=float(self.n),
                               V=1.0, C_inf=1.0, C_1=float(self.d), L=1.0)

    def program(self) -> SeparableProgram:
        agents = [ProjectOracle(v, self.requirements) for v in self.values]
        buyer = ResourceBuyer(self.costs, self.requirements, self.n)
        return SeparableProgram(agents, np.zeros(self.k), self.k, self.metadata(), agent0=buyer, kind=self.kind)

    def payload(self) -> dict:
        return {"values": self.values.tolist(), "costs": self.costs.tolist(),
                "requirements": [list(r) for r in self.requirements]}

    @classmethod
    def from_payload(cls, payload, b, seed=None):
        return cls(payload["values"], payload["costs"], payload["requirements"], seed)


def generate(n: int, projects: int = 3, resources: int = 3, d: int = 2, seed: int = 0) -> SharedInstance:
    if n < 1 or projects < 1 or resources < 1 or d < 1:
        raise ParameterError("shared-resource sizes must be positive")
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, 1.0, (n, projects))
    reqs = []
    for _ in range(projects):
        size = int(rng.integers(1, min(d, resources) + 1))
        reqs.append(tuple(sorted(int(r) for r in rng.choice(resources, size, replace=False))))
    costs = rng.uniform(0.0, 1.0, resources)
    return SharedInstance(values, costs, reqs, seed)
