"""Branch and bound over binary variables with an incumbent pool."""

from __future__ import annotations

import heapq
import itertools
from typing import Callable

import numpy as np

from .model import INT_TOL, Model, Solution, SolutionPool, Status, SolverError
from .presolve import PresolveInfeasible, presolve

NODE_LIMIT = 10**6
PRUNE_TOL = 1e-9
BOUND_DIGITS = 9
DIVE_EVERY = 50

LpSolve = Callable[[Model, object], Solution]


def branch_and_bound(model: Model, lp_solve: LpSolve, node_limit: int = NODE_LIMIT,
                     reduce: bool = True) -> tuple[Solution, SolutionPool]:
    """Search a presolved copy of ``model`` and map the answer back.

    The returned solution carries the primal point and objective of the
    original model; duals and basis refer to nothing and are left empty.
    """
    if not reduce or not model.has_integers:
        return _search(model, lp_solve, node_limit)
    try:
        pre = presolve(model)
    except PresolveInfeasible:
        return Solution(Status.INFEASIBLE), SolutionPool(maximize=model.maximize)
    pool = SolutionPool(maximize=model.maximize)
    if pre.model.num_vars == 0:
        x = pre.postsolve(np.zeros(0))
        if model.primal_violation(x) > 1e-7:
            return Solution(Status.INFEASIBLE), pool
        pool.add(model.objective_value(x), x, model.binary)
        return Solution(Status.OPTIMAL, model.objective_value(x), x), pool
    sol, inner = _search(pre.model, lp_solve, node_limit)
    for _, xr in inner:
        x = pre.postsolve(xr)
        pool.add(model.objective_value(x), x, model.binary)
    if sol.status is not Status.OPTIMAL:
        return Solution(sol.status, iterations=sol.iterations, nodes=sol.nodes), pool
    x = pre.postsolve(sol.x)
    return Solution(Status.OPTIMAL, model.objective_value(x), x, iterations=sol.iterations,
                    nodes=sol.nodes), pool


def _search(model: Model, lp_solve: LpSolve, node_limit: int) -> tuple[Solution, SolutionPool]:
    """Best-bound search, branching on the most fractional binary (lowest index on ties).

    Nodes whose bounds agree to BOUND_DIGITS are taken deepest first, so when
    the relaxation is tight the search dives to an integral point instead of
    sweeping level by level. A fractional dive (fix the least fractional
    binary, re-solve, repeat) also runs from the root and then every
    DIVE_EVERY nodes to find incumbents early; its points join the pool.

    ``lp_solve(model, warm)`` solves a continuous model; ``warm`` is the parent's
    basis object (ignored by solvers that cannot use it).
    """
    sign = 1.0 if model.maximize else -1.0
    relaxed = model.relaxed()
    binaries = np.flatnonzero(model.binary)
    pool = SolutionPool(maximize=model.maximize)
    incumbent: Solution | None = None
    best = -np.inf  # incumbent objective, as a maximization
    counter = itertools.count()
    heap = [(-np.inf, 0, next(counter), model.lb.copy(), model.ub.copy(), None)]
    nodes = 0
    iterations = 0

    while heap:
        neg_bound, neg_depth, _, lb, ub, warm = heapq.heappop(heap)
        if -neg_bound <= best + PRUNE_TOL and incumbent is not None:
            continue
        if nodes >= node_limit:
            raise SolverError(Status.NODE_LIMIT, f"branch and bound exceeded {node_limit} nodes")
        nodes += 1
        sol = lp_solve(relaxed.with_bounds(lb, ub), warm)
        iterations += sol.iterations
        if sol.status is Status.INFEASIBLE:
            continue
        if sol.status is Status.UNBOUNDED:
            if nodes == 1:
                return Solution(Status.UNBOUNDED, iterations=iterations), pool
            continue
        if sol.status is not Status.OPTIMAL:
            raise SolverError(sol.status, "node relaxation did not solve")
        val = sign * sol.objective
        if incumbent is not None and val <= best + PRUNE_TOL:
            continue
        xb = sol.x[binaries]
        frac = np.abs(xb - np.round(xb))
        if frac.max(initial=0.0) <= INT_TOL:
            pool.add(sol.objective, sol.x, model.binary)
            if val > best:
                best, incumbent = val, sol
            continue
        if nodes == 1 or nodes % DIVE_EVERY == 0:
            found, its = _dive(relaxed, model.binary, lp_solve, lb, ub, sol, sign, best, pool)
            iterations += its
            if found is not None and sign * found.objective > best:
                best, incumbent = sign * found.objective, found
                if val <= best + PRUNE_TOL:
                    continue
        k = int(np.argmax(frac))  # argmax returns the first (lowest index) maximizer
        j = binaries[k]
        key = -round(val, BOUND_DIGITS)
        for fix in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = fix
            heapq.heappush(heap, (key, neg_depth - 1, next(counter), clb, cub, sol.basis))

    if incumbent is None:
        return Solution(Status.INFEASIBLE, iterations=iterations, nodes=nodes), pool
    result = Solution(Status.OPTIMAL, incumbent.objective, incumbent.x, incumbent.duals,
                      iterations, incumbent.basis, nodes)
    return result, pool


def _dive(relaxed: Model, binary: np.ndarray, lp_solve: LpSolve, lb, ub, sol: Solution, sign: float,
          best: float, pool: SolutionPool) -> tuple[Solution | None, int]:
    """Round one binary at a time toward its nearest integer until integral or hopeless."""
    binaries = np.flatnonzero(binary)
    lb, ub = lb.copy(), ub.copy()
    iterations = 0
    for _ in range(len(binaries)):
        xb = sol.x[binaries]
        dist = np.abs(xb - np.round(xb))
        open_ = np.flatnonzero(dist > INT_TOL)
        if len(open_) == 0:
            pool.add(sol.objective, sol.x, binary)
            return sol, iterations
        k = int(open_[np.argmin(dist[open_])])
        j = binaries[k]
        lb[j] = ub[j] = float(np.round(xb[k]))
        sol = lp_solve(relaxed.with_bounds(lb, ub), sol.basis)
        iterations += sol.iterations
        if sol.status is not Status.OPTIMAL or sign * sol.objective <= best + PRUNE_TOL:
            return None, iterations
    return None, iterations

