"""Jointly differentially private dual decomposition for linearly separable
convex programs, with mechanism variants, example problems and baselines."""
from .errors import (DimensionError, InfeasibleError, InternalAssertionError, OracleError, ParameterError,
                     PreconditionError, PrivDudeError, ScaleError, StateError)
from .model import (AgentOracle, PrimalPoint, ProgramMetadata, Response, SeparableProgram, VertexOracle,
                    evaluate_coupling, objective, total_violation, validate)
from .solver import DualSchedule, SolveConfig, SolveReport, best_respond_all, derive_schedule, run

__version__ = "0.1.0"
