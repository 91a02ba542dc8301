"""Bounded revised primal simplex with LU + eta-file basis updates.

Rows are turned into equalities ``A x - r = 0`` by one activity variable ``r_i``
per row whose bounds encode the relation, so every variable is simply boxed.
The all-activity basis ``-I`` is always a valid start; rows it leaves
infeasible are repaired by a composite phase 1 that minimizes the sum of
bound violations of the basic variables (each infeasible basic acts as its
own artificial).

A warm basis that is still dual feasible (branch and bound children differ
from their parent only in bounds) is first repaired by a bounded dual
simplex; anything it cannot finish falls through to the primal loop.  Cold
starts run the same dual phase after boxing the variables whose reduced cost
points at a missing bound; the real bounds are restored before the primal
loop, so the box only affects speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import EQ, GE, LE, DUAL_TOL, PRIMAL_TOL, Model, Solution, Status

PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_LIMIT = 50
BOX_SCALE = 1e4


@dataclass(frozen=True)
class Basis:
    """Warm-start data: basic variable per row and which nonbasics sit at their upper bound."""

    basic: np.ndarray
    at_upper: np.ndarray

    def with_columns(self, at: int, count: int) -> "Basis":
        """The same basis after ``count`` nonbasic structural columns are inserted at ``at``."""
        basic = np.where(self.basic >= at, self.basic + count, self.basic)
        at_upper = np.insert(self.at_upper, at, np.zeros(count, dtype=bool))
        return Basis(basic, at_upper)


class _Factor:
    def __init__(self, M: sp.csc_matrix, basis: np.ndarray):
        self.lu = splu(M[:, basis].tocsc(), permc_spec="COLAMD",
                       options={"SymmetricMode": False})
        self.etas: list[tuple[int, np.ndarray, np.ndarray, float]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = self.lu.solve(a)
        for r, idx, vals, piv in self.etas:
            xr = x[r] / piv
            if xr != 0.0:
                x[idx] -= vals * xr
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = np.array(c, dtype=float)
        for r, idx, vals, piv in reversed(self.etas):
            w[r] = (w[r] - vals @ w[idx]) / piv
        return self.lu.solve(w, trans="T")

    def push(self, r: int, alpha: np.ndarray) -> None:
        idx = np.flatnonzero(alpha)
        idx = idx[idx != r]
        self.etas.append((r, idx, alpha[idx].copy(), float(alpha[r])))


def _row_bounds(sense: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.where(sense == LE, -np.inf, rhs)
    hi = np.where(sense == GE, np.inf, rhs)
    return lo.astype(float), hi.astype(float)


class SimplexSolver:
    """One solve's private working state."""

    def __init__(self, model: Model, max_iter: int = 10**7, ptol: float = PRIMAL_TOL,
                 dtol: float = DUAL_TOL):
        self.model = model
        A = model.A.tocsc()
        m, n = A.shape
        self.m, self.n = m, n
        self.M = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
        self.MT = self.M.T.tocsr()
        self.sign = -1.0 if model.maximize else 1.0
        self.c = np.concatenate([self.sign * model.c, np.zeros(m)])
        rl, ru = _row_bounds(model.sense, model.rhs)
        self.l = np.concatenate([model.lb, rl])
        self.u = np.concatenate([model.ub, ru])
        self.max_iter = max_iter
        self.ptol, self.dtol = ptol, dtol
        self.iterations = 0

    # -- state ---------------------------------------------------------
    def _nonbasic_value(self, at_upper: np.ndarray) -> np.ndarray:
        l, u = self.l, self.u
        return np.where(at_upper & np.isfinite(u), u,
                        np.where(np.isfinite(l), l, np.where(np.isfinite(u), u, 0.0)))

    def _install(self, basis: Basis | None) -> None:
        N = self.n + self.m
        if basis is None or len(basis.basic) != self.m:
            basic = np.arange(self.n, N)
            at_upper = np.zeros(N, dtype=bool)
        else:
            basic = np.asarray(basis.basic, dtype=np.int64).copy()
            at_upper = np.asarray(basis.at_upper, dtype=bool).copy()
        self.basis = basic
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[basic] = True
        self.x = self._nonbasic_value(at_upper)
        self._refactor()

    def _refactor(self) -> None:
        try:
            self.factor = _Factor(self.M, self.basis)
        except RuntimeError:
            # numerically singular basis: fall back to the all-activity basis
            self.basis = np.arange(self.n, self.n + self.m)
            self.is_basic[:] = False
            self.is_basic[self.basis] = True
            nb = ~self.is_basic
            at_upper = nb & np.isfinite(self.u) & (self.x >= self.u - self.ptol)
            self.x = np.where(nb, self._nonbasic_value(at_upper), self.x)
            self.factor = _Factor(self.M, self.basis)
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.factor.ftran(-(self.M @ xn))

    def basis_snapshot(self) -> Basis:
        nb = ~self.is_basic
        at_upper = nb & np.isfinite(self.u) & (self.x >= self.u - self.ptol) & (self.u > self.l)
        return Basis(self.basis.copy(), at_upper)

    # -- main loop -----------------------------------------------------
    def solve(self, warm: Basis | None = None) -> Solution:
        self._install(warm)
        if warm is not None:
            if self._dual_phase() == "infeasible":
                return self._result(Status.INFEASIBLE)
        else:
            self._boxed_dual_start()
        # Devex reference weights for pricing
        self.weights = np.ones(self.n + self.m)
        bland = False
        degenerate = 0
        checked = False
        while True:
            if self.iterations >= self.max_iter:
                return self._result(Status.ITERATION_LIMIT)
            if len(self.factor.etas) >= REFACTOR_EVERY:
                self._refactor()

            xb = self.x[self.basis]
            lb, ub = self.l[self.basis], self.u[self.basis]
            below = xb < lb - self.ptol
            above = xb > ub + self.ptol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = above.astype(float) - below.astype(float)
                cost = np.zeros(len(self.x))
                cost[self.basis] = cb
            else:
                cb = self.c[self.basis]
                cost = self.c
            y = self.factor.btran(cb)
            d = cost - self.MT @ y
            d[self.basis] = 0.0

            nb = ~self.is_basic
            can_inc = nb & (self.x < self.u - self.ptol)
            can_dec = nb & (self.x > self.l + self.ptol)
            score = np.where(can_inc & (d < -self.dtol), -d, 0.0)
            score = np.maximum(score, np.where(can_dec & (d > self.dtol), d, 0.0))
            if bland:
                elig = np.flatnonzero(score > 0)
                q = int(elig[0]) if len(elig) else -1
            else:
                q = int(np.argmax(score * score / self.weights)) if len(score) else -1
                if q >= 0 and score[q] <= 0:
                    q = -1

            if q < 0:
                # verify from a fresh factorization before declaring anything
                if not checked:
                    self._refactor()
                    checked = True
                    continue
                if phase1:
                    return self._result(Status.INFEASIBLE)
                return self._result(Status.OPTIMAL, y)
            checked = False

            direction = 1.0 if d[q] < 0 else -1.0
            col = np.zeros(self.m)
            lo, hi = self.M.indptr[q], self.M.indptr[q + 1]
            col[self.M.indices[lo:hi]] = self.M.data[lo:hi]
            alpha = self.factor.ftran(col)
            delta = -direction * alpha

            dec = delta < -PIVOT_TOL
            inc = delta > PIVOT_TOL
            tgt = np.full(self.m, np.nan)
            tgt[dec] = np.where(above, ub, np.where(below, -np.inf, lb))[dec]
            tgt[inc] = np.where(below, lb, np.where(above, np.inf, ub))[inc]
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = (tgt - xb) / delta
            cand = np.flatnonzero(np.isfinite(ratio))
            flip = self.u[q] - self.l[q]

            if len(cand) == 0:
                if np.isfinite(flip):
                    self._step(q, direction, flip, None, delta)
                    continue
                if phase1:
                    # the phase-1 objective is bounded; treat as numerical trouble
                    self._refactor()
                    bland = True
                    continue
                return self._result(Status.UNBOUNDED)

            rc = ratio[cand]
            if bland:
                tmin = rc.min()
                ties = cand[rc <= tmin + 1e-12]
                r = int(ties[np.argmin(self.basis[ties])])
                theta = max(float(ratio[r]), 0.0)
            else:
                relaxed = rc + self.ptol / np.abs(delta[cand])
                tmax = relaxed.min()
                ok = cand[rc <= tmax]
                r = int(ok[np.argmax(np.abs(delta[ok]))])
                theta = max(float(ratio[r]), 0.0)

            if np.isfinite(flip) and flip <= theta:
                self._step(q, direction, flip, None, delta)
                progress = flip * abs(d[q])
            else:
                if not self._devex(q, r, alpha) and self.factor.etas:
                    # column and row views of the pivot disagree: refactor and retry
                    self._refactor()
                    continue
                self._step(q, direction, theta, r, delta, alpha, float(tgt[r]))
                progress = theta * abs(d[q])

            if progress <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_LIMIT:
                    bland = True
            else:
                degenerate = 0
                bland = False

    def _reduced_costs(self) -> tuple[np.ndarray, np.ndarray]:
        y = self.factor.btran(self.c[self.basis])
        d = self.c - self.MT @ y
        d[self.basis] = 0.0
        return y, d

    def _dual_feasible(self, d: np.ndarray) -> bool:
        nb = ~self.is_basic & (self.u > self.l)
        at_lo = nb & np.isfinite(self.l) & (self.x <= self.l + self.ptol)
        at_up = nb & ~at_lo & np.isfinite(self.u) & (self.x >= self.u - self.ptol)
        free = nb & ~at_lo & ~at_up
        tol = 10 * self.dtol
        return not ((at_lo & (d < -tol)).any() or (at_up & (d > tol)).any()
                    or (free & (np.abs(d) > tol)).any())

    def _boxed_dual_start(self) -> None:
        l0, u0 = self.l, self.u
        finite = np.concatenate([l0[np.isfinite(l0)], u0[np.isfinite(u0)], [1.0]])
        big = BOX_SCALE * float(np.abs(finite).max())
        _, d = self._reduced_costs()
        nb = ~self.is_basic
        up = nb & (d < -self.dtol)
        down = nb & (d > self.dtol)
        self.l, self.u = l0.copy(), u0.copy()
        self.u[up & ~np.isfinite(u0)] = big
        self.l[down & ~np.isfinite(l0)] = -big
        self.x[up] = self.u[up]
        self.x[down] = self.l[down]
        self._refactor()
        try:
            self._dual_phase()
        finally:
            self.l, self.u = l0, u0

    def _dual_phase(self) -> str:
        """Bounded dual simplex from a dual feasible basis.

        Returns "feasible" once no basic variable violates its bounds,
        "infeasible" on a verified dual ray and "abandon" when the basis
        is not dual feasible or the pivots get unreliable.
        """
        _, d = self._reduced_costs()
        if not self._dual_feasible(d):
            return "abandon"
        limit = self.iterations + 20 * self.m + 1000
        checked = False
        while self.iterations < limit:
            if len(self.factor.etas) >= REFACTOR_EVERY:
                self._refactor()
                _, d = self._reduced_costs()
            xb = self.x[self.basis]
            lb, ub = self.l[self.basis], self.u[self.basis]
            infeas = np.maximum(lb - xb, 0.0) + np.maximum(xb - ub, 0.0)
            if infeas.max(initial=0.0) <= self.ptol:
                return "feasible"
            r = int(np.argmax(infeas))
            to_lower = xb[r] < lb[r]
            target = float(lb[r] if to_lower else ub[r])

            e = np.zeros(self.m)
            e[r] = 1.0
            row = self.MT @ self.factor.btran(e)
            nb = ~self.is_basic & (self.u > self.l)
            at_lo = nb & np.isfinite(self.l) & (self.x <= self.l + self.ptol)
            at_up = nb & ~at_lo & np.isfinite(self.u) & (self.x >= self.u - self.ptol)
            free = nb & ~at_lo & ~at_up
            # x_p moves by -row_j per unit increase of x_j
            a = row if to_lower else -row
            elig = (at_lo & (a < -PIVOT_TOL)) | (at_up & (a > PIVOT_TOL)) | (free & (np.abs(a) > PIVOT_TOL))
            cand = np.flatnonzero(elig)
            if len(cand) == 0:
                if not checked:
                    self._refactor()
                    _, d = self._reduced_costs()
                    checked = True
                    continue
                return "infeasible"
            checked = False
            dd = np.where(at_lo[cand], np.maximum(d[cand], 0.0),
                          np.where(at_up[cand], np.maximum(-d[cand], 0.0), np.abs(d[cand])))
            aa = np.abs(a[cand])
            ratio = dd / aa
            tmax = ((dd + self.dtol) / aa).min()
            ok = ratio <= tmax
            q = int(cand[ok][np.argmax(aa[ok])])

            col = np.zeros(self.m)
            lo, hi = self.M.indptr[q], self.M.indptr[q + 1]
            col[self.M.indices[lo:hi]] = self.M.data[lo:hi]
            alpha = self.factor.ftran(col)
            if abs(alpha[r] - row[q]) > 1e-7 * (1.0 + abs(row[q])):
                if self.factor.etas:
                    self._refactor()
                    _, d = self._reduced_costs()
                    continue
                return "abandon"
            step = (xb[r] - target) / alpha[r]  # signed change of x_q
            direction = 1.0 if step >= 0 else -1.0
            self._step(q, direction, abs(step), r, -direction * alpha, alpha, target)
            theta = d[q] / row[q]
            d = d - theta * row
            d[q] = 0.0
            d[self.basis] = 0.0
            d[self._left] = -theta
        return "abandon"

    def _devex(self, q: int, r: int, alpha: np.ndarray) -> bool:
        """Update pricing weights; False if the pivot element looks unreliable."""
        e = np.zeros(self.m)
        e[r] = 1.0
        row = self.MT @ self.factor.btran(e)
        piv = alpha[r]
        if abs(row[q] - piv) > 1e-7 * (1.0 + abs(piv)):
            return False
        wq = self.weights[q]
        ratio = row / piv
        upd = np.maximum(self.weights, ratio * ratio * wq)
        upd[self.is_basic] = 1.0
        p = int(self.basis[r])
        upd[p] = max(wq / (piv * piv), 1.0)
        upd[q] = 1.0
        if upd.max() > 1e8:
            upd[:] = 1.0
        self.weights = upd
        return True

    def _step(self, q, direction, theta, r, delta, alpha=None, target=None) -> None:
        self.iterations += 1
        if theta:
            self.x[self.basis] += theta * delta
        self.x[q] += direction * theta
        if r is None:
            # bound flip: land exactly on the opposite bound
            self.x[q] = self.u[q] if direction > 0 else self.l[q]
            return
        p = int(self.basis[r])
        self._left = p
        self.x[p] = target
        self.is_basic[p] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.factor.push(r, alpha)

    def _result(self, status: Status, y: np.ndarray | None = None) -> Solution:
        n = self.n
        x = self.x[:n].copy()
        if status is not Status.OPTIMAL:
            return Solution(status, iterations=self.iterations, x=x,
                            basis=self.basis_snapshot())
        duals = self.sign * y
        # a tidy primal: clip tolerance-level bound excursions
        x = np.clip(x, self.model.lb, self.model.ub)
        obj = float(self.model.c @ x)
        return Solution(Status.OPTIMAL, obj, x, duals, self.iterations, self.basis_snapshot())


def simplex(model: Model, warm: Basis | None = None, max_iter: int = 10**7) -> Solution:
    if model.has_integers:
        model = model.relaxed()
    return SimplexSolver(model, max_iter=max_iter).solve(warm)
