"""Non-private references: exact optima where they are cheap, a long noiseless
run elsewhere, and the audit that checks a solve against its accuracy bounds."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ScaleError
from .model import SeparableProgram
from .solver import SolveConfig, SolveReport, run

ENUMERATION_CAP = 2**20
FEASIBILITY_TOL = 1e-9


def brute_force_opt(program: SeparableProgram, cap: int = ENUMERATION_CAP):
    """Best joint choice of enumerated vertices that satisfies every coupling
    constraint. Returns ``(-inf, None)`` when no combination is feasible."""
    oracles = program.oracles
    if not oracles:
        return 0.0, []
    tables = []
    total = 1
    for oracle in oracles:
        verts = oracle.vertex_enumeration()
        total *= len(verts)
        if total > cap:
            raise ScaleError(f"joint enumeration exceeds {cap} combinations")
        evals = [oracle.evaluate(v) for v in verts]
        tables.append((verts, np.array([e[0] for e in evals]), np.array([e[1] for e in evals]).reshape(len(verts), -1)))

    # Grow the joint table one agent at a time; combination index is mixed radix.
    values = np.zeros(1)
    loads = np.zeros((1, program.k))
    for _, vals, contrib in tables:
        values = (values[:, None] + vals[None, :]).reshape(-1)
        loads = (loads[:, None, :] + contrib[None, :, :]).reshape(-1, program.k)
    feasible = np.all(loads <= program.b + FEASIBILITY_TOL, axis=1)
    if not feasible.any():
        return -math.inf, None
    best = int(np.flatnonzero(feasible)[np.argmax(values[feasible])])
    witness = []
    for verts, _, _ in reversed(tables):
        best, pick = divmod(best, len(verts))
        witness.append(verts[pick])
    witness.reverse()
    return float(values[np.flatnonzero(feasible)].max()), witness


def greedy_fractional_knapsack(values, weights, capacity) -> float:
    """Exact optimum of the single-constraint fractional knapsack."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.ndim == 2:
        if weights.shape[1] != 1:
            raise ParameterError("greedy fractional knapsack handles a single constraint only")
        weights = weights[:, 0]
    capacity = float(np.asarray(capacity, dtype=float).reshape(-1)[0]) if np.ndim(capacity) else float(capacity)
    total = 0.0
    free = values[(weights == 0) & (values > 0)].sum()
    ratio = np.divide(values, weights, out=np.zeros_like(values), where=weights > 0)
    room = capacity
    for i in np.argsort(-ratio, kind="stable"):
        if weights[i] == 0 or values[i] <= 0 or room <= 0:
            continue
        take = min(1.0, room / weights[i])
        total += take * values[i]
        room -= take * weights[i]
    return float(total + free)


def noiseless_error_bar(program: SeparableProgram, T: int) -> float:
    md = program.metadata
    return 2.0 * md.tau * math.sqrt(program.k) * md.width / math.sqrt(T)


def noiseless_opt(program: SeparableProgram, T_long: int, workers: int = 1):
    """Objective of a long noiseless run and the error bar of that estimate."""
    report = run(program, SolveConfig(noise_enabled=False, T_override=T_long, workers=workers))
    return report.x_bar.objective, noiseless_error_bar(program, T_long)


@dataclass(frozen=True)
class AuditVerdict:
    structure_ok: bool
    violation_ok: bool
    objective_ok: bool
    lambda_in_box: bool
    billboard_ok: bool
    margins: dict

    @property
    def passed(self) -> bool:
        return all((self.structure_ok, self.violation_ok, self.objective_ok, self.lambda_in_box, self.billboard_ok))

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["passed"] = self.passed
        return out


def _billboard_labels(labels, sample):
    if sample <= 0 or not labels:
        return []
    picks = np.linspace(0, len(labels) - 1, min(sample, len(labels))).round().astype(int)
    return [labels[i] for i in sorted(set(picks.tolist()))]


def billboard_check(report: SolveReport, program: SeparableProgram, sample: int = 5) -> bool:
    """Recompute sampled agents' averaged points from the dual history alone."""
    hist = report.history
    for label in _billboard_labels(program.labels, sample):
        oracle = program.oracle(label)
        acc = None
        for lam in hist.iterates:
            p = oracle.best_response(lam).point
            acc = np.array(p, dtype=float) if acc is None else acc + p
        if not np.array_equal(acc / hist.T, np.asarray(report.x_bar.point_of(label), dtype=float).reshape(acc.shape)):
            return False
    return True


def audit(report: SolveReport, program: SeparableProgram, opt_value: float, opt_error: float = 0.0,
          billboard_sample: int = 5, rp: float | None = None) -> AuditVerdict:
    """Check a report against the violation and objective bounds at regret ``rp``
    (the report's own bound for the horizon it ran, unless given)."""
    rp = report.rp if rp is None else rp
    tau = program.metadata.tau
    k = program.k
    structure_ok = (report.lambda_bar.shape == (k,) and len(program.b) == k
                    and report.x_bar.contributions.shape[-1] == k
                    and len(report.x_bar.values) == len(program.labels))
    if not structure_ok:
        return AuditVerdict(False, False, False, False, False, {"reason": "dimension mismatch"})
    lhs = report.x_bar.aggregate()
    violation = float(np.clip(lhs - program.b, 0.0, None).sum())
    objective = report.x_bar.objective
    vbound = 2.0 * rp / tau
    obound = opt_value - 2.0 * rp - opt_error
    box = report.schedule.box_hi
    in_box = bool(np.all(report.lambda_bar >= 0) and np.all(report.lambda_bar <= box))
    margins = {
        "violation": violation, "violation_bound": vbound, "violation_margin": vbound - violation,
        "objective": objective, "objective_floor": obound, "objective_margin": objective - obound,
        "rp": rp,
    }
    return AuditVerdict(True, violation <= vbound, objective >= obound, in_box,
                        billboard_check(report, program, billboard_sample), margins)
