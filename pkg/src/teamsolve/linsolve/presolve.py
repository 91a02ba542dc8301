"""Primal presolve for branch and bound.

Only reductions whose postsolve needs the primal point alone are applied,
so the reduced model gives back ``x`` but no duals:

- variables tied by an equality row ``a x - a y = 0`` are merged,
- singleton rows become bounds (rounded inward for binaries),
- fixed variables move into the right-hand side,
- empty rows are dropped once checked.

Binaries are never substituted by continuous expressions, so branching on
the reduced model is branching on the original binaries.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .model import EQ, GE, LE, Model

FEAS_TOL = 1e-9
MAX_ROUNDS = 20


class PresolveInfeasible(Exception):
    pass


class Presolved:
    """A reduced model plus the map back to the original variables."""

    def __init__(self, original: Model, reduced: Model, cls: np.ndarray, fixed: np.ndarray,
                 values: np.ndarray):
        self.original = original
        self.model = reduced
        self._cls = cls  # original column -> reduced column, -1 when fixed
        self._fixed = fixed
        self._values = values

    def postsolve(self, x: np.ndarray) -> np.ndarray:
        out = self._values.copy()
        live = ~self._fixed
        out[live] = x[self._cls[live]]
        return out

    def objective(self, x_full: np.ndarray) -> float:
        return self.original.objective_value(x_full)


def _tighten_binary(lb, ub, binary):
    lb[binary] = np.ceil(lb[binary] - FEAS_TOL)
    ub[binary] = np.floor(ub[binary] + FEAS_TOL)


def presolve(model: Model) -> Presolved:
    """Apply the reductions until none fires; raises PresolveInfeasible."""
    n = model.num_vars
    A = model.A.tocsr().astype(float)
    sense, rhs = model.sense.copy(), model.rhs.astype(float).copy()
    c = model.c.astype(float).copy()
    lb, ub = model.lb.astype(float).copy(), model.ub.astype(float).copy()
    binary = model.binary.copy()
    # composition of column maps: original j -> current column, plus fixed values
    cls = np.arange(n)
    fixed = np.zeros(n, bool)
    values = np.zeros(n)

    for _ in range(MAX_ROUNDS):
        changed = False
        A.eliminate_zeros()
        counts = np.diff(A.indptr)

        # empty rows
        empty = counts == 0
        if empty.any():
            bad = ((sense == EQ) & (np.abs(rhs) > FEAS_TOL)) | ((sense == LE) & (rhs < -FEAS_TOL)) \
                | ((sense == GE) & (rhs > FEAS_TOL))
            if (bad & empty).any():
                raise PresolveInfeasible("empty row with unsatisfiable right-hand side")

        # singleton rows -> bounds
        single = np.flatnonzero(counts == 1)
        if len(single):
            cols = A.indices[A.indptr[single]]
            a = A.data[A.indptr[single]]
            t = rhs[single] / a
            s = sense[single] * np.sign(a)  # sense of x_j against t
            up = (s == LE) | (s == EQ)
            dn = (s == GE) | (s == EQ)
            np.minimum.at(ub, cols[up], t[up])
            np.maximum.at(lb, cols[dn], t[dn])
            changed = True
        drop = empty | (counts == 1)

        # x - y = 0 rows -> merge
        dbl = np.flatnonzero((counts == 2) & (sense == EQ) & (np.abs(rhs) <= FEAS_TOL))
        if len(dbl):
            p = A.indptr[dbl]
            d0, d1 = A.data[p], A.data[p + 1]
            tie = np.abs(d0 + d1) <= 1e-12 * np.maximum(np.abs(d0), 1.0)
            if tie.any():
                rows = dbl[tie]
                i0, i1 = A.indices[p[tie]], A.indices[p[tie] + 1]
                k = A.shape[1]
                G = sp.csr_matrix((np.ones(len(rows)), (i0, i1)), shape=(k, k))
                ncls, lab = connected_components(G, directed=False)
                P = sp.csr_matrix((np.ones(k), (np.arange(k), lab)), shape=(k, ncls))
                A = (A @ P).tocsr()
                c = P.T @ c
                nlb = np.full(ncls, -np.inf)
                nub = np.full(ncls, np.inf)
                np.maximum.at(nlb, lab, lb)
                np.minimum.at(nub, lab, ub)
                nbin = np.zeros(ncls, bool)
                np.logical_or.at(nbin, lab, binary)
                lb, ub, binary = nlb, nub, nbin
                cls = np.where(fixed, -1, lab[np.maximum(cls, 0)])
                drop[rows] = True
                changed = True

        if drop.any():
            keep = ~drop
            A, sense, rhs = A[keep], sense[keep], rhs[keep]

        _tighten_binary(lb, ub, binary)
        if np.any(lb > ub + FEAS_TOL):
            raise PresolveInfeasible("crossing bounds")
        ub = np.maximum(ub, lb)

        # fixed columns -> right-hand side
        fix = lb == ub
        if fix.any():
            val = lb[fix]
            Ac = A.tocsc()
            rhs = rhs - Ac[:, fix] @ val
            keep = ~fix
            newpos = np.cumsum(keep) - 1
            live = ~fixed
            hit = live & fix[np.maximum(cls, 0)]
            values[hit] = lb[cls[hit]]
            fixed |= hit
            cls = np.where(fixed, -1, newpos[np.maximum(cls, 0)])
            A = Ac[:, keep].tocsr()
            c, lb, ub, binary = c[keep], lb[keep], ub[keep], binary[keep]
            changed = True

        if not changed:
            break

    reduced = Model(A.tocsr(), sense.astype(model.sense.dtype), rhs, c, lb, ub, binary, model.maximize)
    return Presolved(model, reduced, cls, fixed, values)
