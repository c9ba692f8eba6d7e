"""Instance generators and best-response oracles for the example problem classes."""
from __future__ import annotations

import json

import numpy as np

from ..errors import ParameterError
from ..model import ProgramMetadata
from . import ddemand, flow, knapsack, schedule, shared
from .ddemand import DDemandInstance
from .flow import FlowInstance
from .knapsack import KnapsackInstance
from .schedule import ScheduleInstance
from .shared import SharedInstance

CLASSES = {
    "knapsack": KnapsackInstance,
    "ddemand": DDemandInstance,
    "flow": FlowInstance,
    "schedule": ScheduleInstance,
    "shared": SharedInstance,
}

GENERATORS = {
    "knapsack": knapsack.generate,
    "ddemand": ddemand.generate,
    "flow": flow.generate,
    "schedule": schedule.generate,
    "shared": shared.generate,
}


def generate(kind: str, seed: int = 0, **sizes):
    """Seeded random instance of ``kind``; unknown size keywords are rejected."""
    if kind not in GENERATORS:
        raise ParameterError(f"unsupported kind {kind!r}; choose from {sorted(GENERATORS)}")
    try:
        return GENERATORS[kind](seed=seed, **sizes)
    except TypeError as exc:
        raise ParameterError(f"bad size parameters for {kind}: {exc}") from exc


def _bounds(instance) -> np.ndarray:
    return {
        "knapsack": lambda: instance.capacities,
        "ddemand": lambda: instance.supplies,
        "flow": lambda: instance.capacities,
        "schedule": lambda: instance.capacities.reshape(-1),
        "shared": lambda: np.zeros(instance.k),
    }[instance.kind]()


def to_dict(instance) -> dict:
    return {
        "kind": instance.kind,
        "n": instance.n,
        "k": instance.k,
        "b": _bounds(instance).tolist(),
        "metadata": {key: val for key, val in instance.metadata().as_dict().items()},
        "payload": instance.payload(),
        "seed": instance.seed,
    }


def from_dict(data: dict):
    kind = data.get("kind")
    if kind not in CLASSES:
        raise ParameterError(f"unsupported kind {kind!r}")
    inst = CLASSES[kind].from_payload(data["payload"], data["b"], data.get("seed"))
    if inst.n != data["n"] or inst.k != data["k"]:
        raise ParameterError("instance header does not match its payload")
    return inst


def dumps(instance) -> str:
    # Python's float repr round-trips every double exactly.
    return json.dumps(to_dict(instance), indent=1, sort_keys=True) + "\n"


def loads(text: str):
    return from_dict(json.loads(text))


def save(instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(instance))


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def metadata_of(data: dict) -> ProgramMetadata:
    return ProgramMetadata(**data["metadata"])


__all__ = [
    "KnapsackInstance", "DDemandInstance", "FlowInstance", "ScheduleInstance", "SharedInstance",
    "generate", "to_dict", "from_dict", "dumps", "loads", "save", "load", "metadata_of",
]
