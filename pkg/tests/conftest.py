import numpy as np
import pytest

from privdude.problems import KnapsackInstance


@pytest.fixture
def tiny():
    """Three unit-weight items worth 1, 0.8 and 0.5 with capacity 2."""
    inst = KnapsackInstance([1.0, 0.8, 0.5], [[1.0], [1.0], [1.0]], [2.0])
    return inst.program().with_metadata(width=3.0)


def point_from(program, xs):
    from privdude.model import PrimalPoint
    responses = [o.respond_at(np.array([x], dtype=float)) for o, x in zip(program.oracles, xs)]
    return PrimalPoint.from_responses(responses, program.labels)
