"""Multi-commodity unit flow: each agent routes one unit from its source to its
sink and pays its own edge costs. Edge capacities are the coupling constraints.

Costs are negated once here so every solver sees a maximization.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, ParameterError, ScaleError
from ..model import AgentOracle, ProgramMetadata, Response, SeparableProgram

MAX_PATHS = 10**5


def _distances_to(sink: int, n_nodes: int, edges, weights) -> np.ndarray:
    """Dijkstra on the reversed graph: cheapest cost from every node to ``sink``."""
    into = [[] for _ in range(n_nodes)]
    for e, (u, v) in enumerate(edges):
        into[v].append((u, e))
    dist = np.full(n_nodes, math.inf)
    dist[sink] = 0.0
    heap = [(0.0, sink)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u, e in into[v]:
            nd = weights[e] + d
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


class PathOracle(AgentOracle):
    has_null_action = False

    def __init__(self, n_nodes: int, edges, source: int, sink: int, costs):
        self.n_nodes = n_nodes
        self.edges = [tuple(e) for e in edges]
        self.source = source
        self.sink = sink
        self.costs = np.asarray(costs, dtype=float)
        self.k = len(self.edges)
        self._out = [[] for _ in range(n_nodes)]
        for e, (u, v) in enumerate(self.edges):
            self._out[u].append(e)

    def best_response(self, lam):
        weights = self.costs + np.asarray(lam, dtype=float)
        dist = _distances_to(self.sink, self.n_nodes, self.edges, weights)
        if not math.isfinite(dist[self.source]):
            raise InfeasibleError(f"no path from {self.source} to {self.sink}")
        x = np.zeros(self.k)
        node, seen = self.source, {self.source}
        while node != self.sink:
            # Edges are stored in lexicographic order, so the first tight edge wins ties.
            for e in self._out[node]:
                v = self.edges[e][1]
                if v not in seen and weights[e] + dist[v] == dist[node]:
                    break
            else:
                raise InfeasibleError(f"path reconstruction stalled at node {node}")
            x[e] = 1.0
            node = v
            seen.add(v)
        return Response(x, float(-self.costs @ x), x.copy())

    def evaluate(self, point):
        point = np.asarray(point, dtype=float)
        return float(-self.costs @ point), point.copy()

    def contains(self, point, tol=1e-9):
        point = np.asarray(point, dtype=float)
        if np.any(point < -tol) or np.any(point > 1 + tol):
            return False
        net = np.zeros(self.n_nodes)
        for e, (u, v) in enumerate(self.edges):
            net[u] += point[e]
            net[v] -= point[e]
        want = np.zeros(self.n_nodes)
        want[self.source], want[self.sink] = 1.0, -1.0
        return bool(np.all(np.abs(net - want) <= tol))

    def vertex_enumeration(self):
        paths, stack = [], [(self.source, [], {self.source})]
        while stack:
            node, used, seen = stack.pop()
            if node == self.sink:
                x = np.zeros(self.k)
                x[used] = 1.0
                paths.append(x)
                if len(paths) > MAX_PATHS:
                    raise ScaleError(f"more than {MAX_PATHS} simple paths")
                continue
            for e in self._out[node]:
                v = self.edges[e][1]
                if v not in seen:
                    stack.append((v, used + [e], seen | {v}))
        return paths


@dataclass(frozen=True)
class FlowInstance:
    n_nodes: int
    edges: tuple
    endpoints: np.ndarray
    costs: np.ndarray
    capacities: np.ndarray
    path_bound: int
    seed: int | None = None
    kind = "flow"

    def __post_init__(self):
        edges = tuple(tuple(int(x) for x in e) for e in self.edges)
        if list(edges) != sorted(set(edges)):
            raise ParameterError("edges must be distinct and sorted lexicographically")
        ends = np.asarray(self.endpoints, dtype=int).reshape(-1, 2)
        costs = np.atleast_2d(np.asarray(self.costs, dtype=float))
        caps = np.asarray(self.capacities, dtype=float).reshape(-1)
        if costs.shape != (len(ends), len(edges)) or len(caps) != len(edges):
            raise ParameterError("costs must be (agents, edges) and capacities one per edge")
        if np.any(costs < 0) or np.any(costs > 1):
            raise ParameterError("edge costs must lie in [0, 1]")
        if any(not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes) for u, v in edges):
            raise ParameterError("edge endpoint out of range")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "endpoints", ends)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "capacities", caps)

    @property
    def n(self):
        return len(self.endpoints)

    @property
    def k(self):
        return len(self.edges)

    def metadata(self) -> ProgramMetadata:
        return ProgramMetadata(sigma=math.sqrt(2.0 * self.path_bound), tau=1.0, width=float(self.n),
                               V=0.0, C_inf=1.0, C_1=float(self.path_bound))

    def program(self) -> SeparableProgram:
        agents = [PathOracle(self.n_nodes, self.edges, int(s), int(t), c)
                  for (s, t), c in zip(self.endpoints, self.costs)]
        return SeparableProgram(agents, self.capacities, self.k, self.metadata(), kind=self.kind)

    def payload(self) -> dict:
        return {"n_nodes": self.n_nodes, "edges": [list(e) for e in self.edges],
                "endpoints": self.endpoints.tolist(), "costs": self.costs.tolist(),
                "path_bound": self.path_bound}

    @classmethod
    def from_payload(cls, payload, b, seed=None):
        return cls(int(payload["n_nodes"]), payload["edges"], payload["endpoints"], payload["costs"],
                   b, int(payload["path_bound"]), seed)


def generate(n: int, nodes: int = 6, seed: int = 0, density: float = 0.4) -> FlowInstance:
    """Random DAG on ``nodes`` vertices containing the chain ``0 -> 1 -> ...``,
    so every forward source/sink pair is connected."""
    if n < 1 or nodes < 2:
        raise ParameterError("flow needs n >= 1 and at least two nodes")
    rng = np.random.default_rng(seed)
    edges = sorted({(u, u + 1) for u in range(nodes - 1)}
                   | {(u, v) for u in range(nodes) for v in range(u + 2, nodes) if rng.random() < density})
    ends = []
    for _ in range(n):
        s, t = sorted(rng.choice(nodes, 2, replace=False))
        ends.append((int(s), int(t)))
    costs = rng.uniform(0.01, 1.0, (n, len(edges)))
    caps = rng.integers(1, max(1, n // 2) + 1, len(edges)).astype(float)
    return FlowInstance(nodes, edges, ends, costs, caps, nodes - 1, seed)
