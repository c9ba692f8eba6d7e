"""Linearly separable convex programs and the evaluation helpers every solver uses.

A program is a list of agents, each hidden behind a best-response oracle, plus
``k`` coupling constraints ``sum_i c_i(x_i) <= b``. Oracles report the
per-constraint contributions of the points they return, so nothing outside an
oracle ever needs to look at an agent's private data.
"""
from __future__ import annotations

import abc
import dataclasses
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DimensionError, PreconditionError, ScaleError


@dataclass(frozen=True)
class Response:
    """One oracle answer: a feasible point with its value and contributions."""

    point: np.ndarray
    value: float
    contributions: np.ndarray

    def utility(self, lam: np.ndarray) -> float:
        return float(self.value - self.contributions @ lam)


class AgentOracle(abc.ABC):
    """Best-response access to one agent's private subproblem.

    Subclasses must be pure functions of their data and the price vector, so
    they may be called from several threads at once.
    """

    k: int
    has_null_action: bool = True

    @abc.abstractmethod
    def best_response(self, lam: np.ndarray) -> Response:
        """Maximize ``value(x) - <lam, contributions(x)>`` over the feasible set."""

    @abc.abstractmethod
    def evaluate(self, point: np.ndarray) -> tuple[float, np.ndarray]:
        """Return ``(value, contributions)`` at ``point``."""

    def contains(self, point: np.ndarray, tol: float = 1e-9) -> bool:
        return True

    def null_action(self) -> Response:
        raise PreconditionError(f"{type(self).__name__} has no null action")

    def vertex_enumeration(self) -> list[np.ndarray]:
        raise ScaleError(f"{type(self).__name__} does not enumerate its vertices")

    def respond_at(self, point: np.ndarray) -> Response:
        value, contrib = self.evaluate(point)
        return Response(np.asarray(point, dtype=float), value, contrib)


class BatchOracle(Protocol):
    """Vectorized best responses for agents ``1..n`` sharing one point shape.

    Row ``i`` of every returned array must equal, bit for bit, what the
    ``i``-th per-agent oracle returns for the same prices.
    """

    def best_response_batch(self, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...

    def evaluate_batch(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ...


class VertexOracle(AgentOracle):
    """Linear objective and constraints over the convex hull of listed vertices.

    ``value(x) = values @ x`` and ``contributions(x) = matrix @ x``. Ties in the
    best response go to the earliest vertex, so listing the zero vector first
    makes the null action win ties.
    """

    def __init__(self, vertices, values, matrix):
        self.vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        self.values = np.asarray(values, dtype=float)
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        dim = self.vertices.shape[1]
        if self.values.shape != (dim,) or self.matrix.shape[1] != dim:
            raise DimensionError("values and matrix must match the vertex dimension")
        self.k = self.matrix.shape[0]
        self._vals = self.vertices @ self.values
        self._contrib = self.vertices @ self.matrix.T
        zero = np.flatnonzero(~self.vertices.any(axis=1))
        self.null_index = int(zero[0]) if len(zero) else None
        self.has_null_action = self.null_index is not None

    def _at(self, i):
        return Response(self.vertices[i].copy(), float(self._vals[i]), self._contrib[i].copy())

    def best_response(self, lam):
        idx = int(np.argmax(self._vals - self._contrib @ lam))
        return self._at(idx)

    def evaluate(self, point):
        point = np.asarray(point, dtype=float)
        return float(self.values @ point), self.matrix @ point

    def null_action(self):
        if self.null_index is None:
            return super().null_action()
        return self._at(self.null_index)

    def vertex_enumeration(self):
        return [v.copy() for v in self.vertices]


@dataclass(frozen=True)
class ProgramMetadata:
    """Class-level constants a program's generator knows analytically."""

    sigma: float
    tau: float
    width: float
    V: float | None = None
    C_inf: float | None = None
    C_1: float | None = None
    L: float | None = None
    packing: bool = False

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


@dataclass(frozen=True)
class SeparableProgram:
    agents: tuple
    b: np.ndarray
    k: int
    metadata: ProgramMetadata
    agent0: AgentOracle | None = None
    batch: BatchOracle | None = None
    kind: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def labels(self) -> tuple[int, ...]:
        """Agent labels in storage order; agent 0 comes first when present."""
        start = 0 if self.agent0 is not None else 1
        return tuple(range(start, self.n + 1))

    @property
    def oracles(self) -> list[AgentOracle]:
        head = [self.agent0] if self.agent0 is not None else []
        return head + list(self.agents)

    def oracle(self, label: int) -> AgentOracle:
        if label == 0:
            if self.agent0 is None:
                raise KeyError("program has no agent 0")
            return self.agent0
        return self.agents[label - 1]

    def with_b(self, b) -> "SeparableProgram":
        return dataclasses.replace(self, b=np.asarray(b, dtype=float))

    def with_metadata(self, **changes) -> "SeparableProgram":
        return dataclasses.replace(self, metadata=dataclasses.replace(self.metadata, **changes))


@dataclass
class PrimalPoint:
    """One point per agent (storage order of ``labels``) with cached evaluations."""

    points: list
    values: np.ndarray
    contributions: np.ndarray
    labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.contributions = np.atleast_2d(np.asarray(self.contributions, dtype=float))
        if not self.labels:
            self.labels = tuple(range(1, len(self.values) + 1))

    @property
    def objective(self) -> float:
        return float(self.values.sum())

    def aggregate(self) -> np.ndarray:
        return self.contributions.sum(axis=0)

    def point_of(self, label: int) -> np.ndarray:
        return self.points[self.labels.index(label)]

    @classmethod
    def from_responses(cls, responses: Sequence[Response], labels) -> "PrimalPoint":
        labels = tuple(labels)
        if not responses:
            return cls([], np.zeros(0), np.zeros((0, 0)), labels)
        width = len(responses[0].contributions)
        for label, r in zip(labels, responses):
            if len(r.contributions) != width:
                raise DimensionError(
                    f"agent {label} reports {len(r.contributions)} contributions, expected {width}",
                    agent=label,
                )
        return cls(
            [r.point for r in responses],
            np.array([r.value for r in responses]),
            np.vstack([r.contributions for r in responses]),
            labels,
        )


def _check_dims(program: SeparableProgram, point: PrimalPoint):
    expected = len(program.labels)
    if len(point.values) != expected:
        raise DimensionError(f"point has {len(point.values)} agents, program has {expected}")
    if len(program.b) != program.k:
        raise DimensionError(f"b has length {len(program.b)} but k={program.k}", constraint=len(program.b))
    if expected and point.contributions.shape != (expected, program.k):
        raise DimensionError(
            f"contributions have shape {point.contributions.shape}, expected {(expected, program.k)}",
            constraint=point.contributions.shape[-1],
        )


def evaluate_coupling(program: SeparableProgram, point: PrimalPoint) -> np.ndarray:
    """Coupling gradient ``l_j = sum_i c_ij - b_j``; positive entries are violations."""
    _check_dims(program, point)
    if len(point.values) == 0:
        return -program.b.copy()
    return point.contributions.sum(axis=0) - program.b


def total_violation(program: SeparableProgram, point: PrimalPoint) -> float:
    return float(np.clip(evaluate_coupling(program, point), 0.0, None).sum())


def objective(program: SeparableProgram, point: PrimalPoint) -> float:
    _check_dims(program, point)
    return point.objective


@dataclass(frozen=True)
class Finding:
    kind: str
    message: str
    agent: int | None = None


def validate(program: SeparableProgram) -> list[Finding]:
    """Sample each oracle at zero prices and at the top of the dual box and
    compare what comes back against the declared metadata bounds."""
    findings: list[Finding] = []
    md = program.metadata
    if len(program.b) != program.k:
        findings.append(Finding("structure", f"b has length {len(program.b)} but k={program.k}"))
        return findings
    if program.k < 1:
        findings.append(Finding("structure", "program needs at least one coupling constraint"))
        return findings
    for name in ("sigma", "tau", "width", "V", "C_inf", "C_1", "L"):
        val = getattr(md, name)
        if val is not None and val < 0:
            findings.append(Finding("metadata", f"{name}={val} is negative"))
    if md.tau <= 0:
        findings.append(Finding("metadata", f"tau={md.tau} must be positive"))
    if md.packing and not (md.L is not None and md.L > 0):
        findings.append(Finding("metadata", "packing programs need L > 0"))

    seen = set()

    def note(kind, label, message):
        if (kind, label) not in seen:
            seen.add((kind, label))
            findings.append(Finding(kind, message, label))

    probes = [np.zeros(program.k), np.full(program.k, 2.0 * md.tau)]
    tol = 1e-9
    for label, oracle in zip(program.labels, program.oracles):
        for lam in probes:
            r = oracle.best_response(lam)
            if len(r.contributions) != program.k:
                note("dimension", label, f"agent {label} returned {len(r.contributions)} contributions")
                continue
            if not oracle.contains(r.point):
                note("feasibility", label, f"agent {label} returned a point outside its feasible set")
            if md.V is not None and r.value > md.V + tol:
                note("V", label, f"agent {label} has value {r.value} above V={md.V}")
            if md.C_inf is not None and np.max(r.contributions, initial=0.0) > md.C_inf + tol:
                note("C_inf", label, f"agent {label} contributes {np.max(r.contributions)} above C_inf={md.C_inf}")
            if md.C_1 is not None and r.contributions.sum() > md.C_1 + tol:
                note("C_1", label, f"agent {label} contributes {r.contributions.sum()} in total above C_1={md.C_1}")
    return findings
