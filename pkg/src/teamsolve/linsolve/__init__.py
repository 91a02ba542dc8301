"""Linear and binary mixed-integer programming.

The default engine is an in-repo revised simplex; other engines can be
plugged in through :func:`register_backend`.
"""

from __future__ import annotations

from .backends import (Backend, BackendUnavailable, EmbeddedBackend, HighsBackend,
                       available_backends, get_backend, register_backend)
from .bnb import NODE_LIMIT, branch_and_bound
from .model import (DUAL_TOL, EQ, GE, INT_TOL, LE, PRIMAL_TOL, Model, ModelBuilder,
                    Solution, SolutionPool, SolverError, Status)
from .presolve import PresolveInfeasible, Presolved, presolve
from .simplex import Basis, simplex


def solve_lp(model: Model, backend=None, warm=None) -> Solution:
    """Solve the continuous relaxation of ``model``."""
    if model.has_integers:
        model = model.relaxed()
    return get_backend(backend).solve_lp(model, warm)


def solve_mip(model: Model, backend=None, node_limit: int = NODE_LIMIT) -> tuple[Solution, SolutionPool]:
    return get_backend(backend).solve_mip(model, node_limit=node_limit)


def strong_duality_gap(model: Model, solution: Solution) -> float:
    """|primal - dual| objective plus any dual infeasibility of the returned multipliers."""
    bound, infeas = model.dual_objective(solution.duals)
    return abs(bound - solution.objective) + infeas


__all__ = [
    "Backend", "BackendUnavailable", "Basis", "DUAL_TOL", "EQ", "EmbeddedBackend", "GE",
    "HighsBackend", "INT_TOL", "LE", "Model", "ModelBuilder", "NODE_LIMIT", "PRIMAL_TOL",
    "PresolveInfeasible", "Presolved", "Solution", "SolutionPool", "SolverError", "Status", "available_backends",
    "branch_and_bound", "get_backend", "presolve", "register_backend", "simplex", "solve_lp", "solve_mip",
    "strong_duality_gap",
]
