"""Solver backends: the embedded simplex and optional external engines."""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .bnb import NODE_LIMIT, branch_and_bound
from .model import EQ, GE, LE, Model, Solution, SolutionPool, Status
from .simplex import simplex


class BackendUnavailable(RuntimeError):
    pass


class Backend(Protocol):
    name: str

    def available(self) -> bool: ...

    def solve_lp(self, model: Model, warm=None) -> Solution: ...

    def solve_mip(self, model: Model, node_limit: int = NODE_LIMIT) -> tuple[Solution, SolutionPool]: ...


class EmbeddedBackend:
    name = "embedded"

    def __init__(self, max_iter: int = 10**7):
        self.max_iter = max_iter

    def available(self) -> bool:
        return True

    def solve_lp(self, model: Model, warm=None) -> Solution:
        return simplex(model, warm=warm, max_iter=self.max_iter)

    def solve_mip(self, model, node_limit=NODE_LIMIT):
        return branch_and_bound(model, self.solve_lp, node_limit)


class HighsBackend:
    """HiGHS through ``scipy.optimize.linprog``; MIPs reuse the in-repo branch and bound
    so the pool has the same meaning as with the embedded engine."""

    name = "highs"

    def available(self) -> bool:
        try:
            from scipy.optimize import linprog  # noqa: F401
        except ImportError:
            return False
        return True

    def solve_lp(self, model: Model, warm=None) -> Solution:
        from scipy.optimize import linprog

        A = model.A.tocsr()
        sign = -1.0 if model.maximize else 1.0
        le, ge, eq = model.sense == LE, model.sense == GE, model.sense == EQ
        ub_rows = np.flatnonzero(le | ge)
        flip = np.where(ge[ub_rows], -1.0, 1.0)
        A_ub = A[ub_rows].multiply(flip[:, None]).tocsr() if len(ub_rows) else None
        b_ub = model.rhs[ub_rows] * flip if len(ub_rows) else None
        eq_rows = np.flatnonzero(eq)
        A_eq = A[eq_rows] if len(eq_rows) else None
        b_eq = model.rhs[eq_rows] if len(eq_rows) else None
        bounds = np.column_stack([model.lb, model.ub])
        bounds = [(None if np.isneginf(lo) else lo, None if np.isposinf(hi) else hi) for lo, hi in bounds]
        res = linprog(sign * model.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs",
                      options={"primal_feasibility_tolerance": 1e-10,
                               "dual_feasibility_tolerance": 1e-10})
        iters = int(getattr(res, "nit", 0) or 0)
        if res.status == 2:
            return Solution(Status.INFEASIBLE, iterations=iters)
        if res.status == 3:
            return Solution(Status.UNBOUNDED, iterations=iters)
        if res.status != 0:
            return Solution(Status.ITERATION_LIMIT, iterations=iters)
        duals = np.zeros(model.num_rows)
        if len(ub_rows):
            duals[ub_rows] = sign * flip * res.ineqlin.marginals
        if len(eq_rows):
            duals[eq_rows] = sign * res.eqlin.marginals
        x = np.clip(res.x, model.lb, model.ub)
        return Solution(Status.OPTIMAL, float(model.c @ x), x, duals, iters)

    def solve_mip(self, model, node_limit=NODE_LIMIT):
        return branch_and_bound(model, self.solve_lp, node_limit)


_REGISTRY: dict[str, Backend] = {}


def register_backend(backend: Backend) -> None:
    _REGISTRY[backend.name] = backend


def get_backend(name: str | Backend | None = None) -> Backend:
    if name is None:
        name = "embedded"
    if not isinstance(name, str):
        backend = name
    elif name in _REGISTRY:
        backend = _REGISTRY[name]
    else:
        raise BackendUnavailable(f"no solver backend named {name!r}")
    if not backend.available():
        raise BackendUnavailable(f"backend {backend.name!r} is registered but not usable here")
    return backend


def available_backends() -> list[str]:
    return [name for name, b in _REGISTRY.items() if b.available()]


register_backend(EmbeddedBackend())
register_backend(HighsBackend())
