"""LP/MIP model description and solver results."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = -1, 0, 1
_SENSE_TEXT = {LE: "<=", EQ: "=", GE: ">="}

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-8
INT_TOL = 1e-6


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"
    NODE_LIMIT = "NodeLimit"


class SolverError(RuntimeError):
    def __init__(self, status: Status, message: str = ""):
        self.status = status
        super().__init__(message or status.value)


@dataclass(frozen=True, eq=False)
class Model:
    """``maximize/minimize c·x`` s.t. ``A x (<=|=|>=) rhs``, ``lb <= x <= ub``.

    Binary variables must have bounds inside [0, 1].
    """

    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    maximize: bool = True
    var_names: tuple[str, ...] | None = None
    row_names: tuple[str, ...] | None = None

    def __post_init__(self):
        m, n = self.A.shape
        if not (len(self.sense) == len(self.rhs) == m):
            raise ValueError("row data length mismatch")
        if not (len(self.c) == len(self.lb) == len(self.ub) == len(self.binary) == n):
            raise ValueError("column data length mismatch")
        if np.any(self.lb > self.ub):
            raise ValueError("a variable has lower bound above upper bound")
        if np.any(np.isposinf(self.lb) | np.isneginf(self.ub)):
            raise ValueError("a variable has an infinite bound on the wrong side")
        if np.any(self.binary & ((self.lb < 0) | (self.ub > 1))):
            raise ValueError("binary variables must have bounds within [0, 1]")

    @property
    def num_vars(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def has_integers(self) -> bool:
        return bool(self.binary.any())

    def relaxed(self) -> "Model":
        return self.with_bounds(self.lb, self.ub, binary=np.zeros_like(self.binary))

    def with_bounds(self, lb, ub, binary=None) -> "Model":
        return Model(self.A, self.sense, self.rhs, self.c, np.asarray(lb, float), np.asarray(ub, float),
                     self.binary if binary is None else binary, self.maximize,
                     self.var_names, self.row_names)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def primal_violation(self, x: np.ndarray) -> float:
        ax = self.A @ x
        viol = np.zeros(self.num_rows)
        viol[self.sense == LE] = np.maximum(ax - self.rhs, 0)[self.sense == LE]
        viol[self.sense == GE] = np.maximum(self.rhs - ax, 0)[self.sense == GE]
        viol[self.sense == EQ] = np.abs(ax - self.rhs)[self.sense == EQ]
        bounds = np.maximum(np.maximum(self.lb - x, x - self.ub), 0)
        return float(max(viol.max(initial=0.0), bounds.max(initial=0.0)))

    def integrality_violation(self, x: np.ndarray) -> float:
        xb = x[self.binary]
        if len(xb) == 0:
            return 0.0
        return float(np.abs(xb - np.round(xb)).max())

    def dual_objective(self, duals: np.ndarray) -> tuple[float, float]:
        """Lagrangian bound from row duals (shadow prices); returns (bound, dual infeasibility).

        Reduced costs ``c - Aᵀy`` are charged at whichever variable bound the
        objective sense makes binding; an unbounded side makes the bound
        invalid and is reported as infeasibility.
        """
        y = np.asarray(duals, dtype=float)
        sign = 1.0 if self.maximize else -1.0
        d = sign * (self.c - self.A.T @ y)  # as a maximization
        bound = float(self.rhs @ y) * sign
        infeas = 0.0
        # row sign conditions for a maximization: <= rows y >= 0, >= rows y <= 0
        ys = sign * y
        infeas = max(infeas, float(np.maximum(-ys[self.sense == LE], 0).max(initial=0.0)))
        infeas = max(infeas, float(np.maximum(ys[self.sense == GE], 0).max(initial=0.0)))
        pos = d > 0
        neg = d < 0
        with np.errstate(invalid="ignore"):
            up = np.where(pos, d * self.ub, 0.0)
            lo = np.where(neg, d * self.lb, 0.0)
        bad_up = pos & ~np.isfinite(self.ub)
        bad_lo = neg & ~np.isfinite(self.lb)
        if bad_up.any():
            infeas = max(infeas, float(d[bad_up].max()))
        if bad_lo.any():
            infeas = max(infeas, float(-d[bad_lo].min()))
        bound += float(up[np.isfinite(up)].sum() + lo[np.isfinite(lo)].sum())
        return sign * bound, infeas

    def to_lp_text(self) -> str:
        """Human-readable LP-format dump."""
        vn = self.var_names or tuple(f"x{j}" for j in range(self.num_vars))
        rn = self.row_names or tuple(f"r{i}" for i in range(self.num_rows))

        def expr(idx, vals):
            terms = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} {vn[j]}" for j, v in zip(idx, vals) if v != 0]
            return " ".join(terms) if terms else "0"

        out = ["Maximize" if self.maximize else "Minimize"]
        nz = np.flatnonzero(self.c)
        out.append(f" obj: {expr(nz, self.c[nz])}")
        out.append("Subject To")
        A = self.A.tocsr()
        for i in range(self.num_rows):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            out.append(f" {rn[i]}: {expr(A.indices[lo:hi], A.data[lo:hi])} "
                       f"{_SENSE_TEXT[int(self.sense[i])]} {self.rhs[i]:.17g}")
        out.append("Bounds")
        for j in range(self.num_vars):
            lo = "-inf" if np.isneginf(self.lb[j]) else f"{self.lb[j]:.17g}"
            hi = "+inf" if np.isposinf(self.ub[j]) else f"{self.ub[j]:.17g}"
            out.append(f" {lo} <= {vn[j]} <= {hi}")
        bins = np.flatnonzero(self.binary)
        if len(bins):
            out.append("Binary")
            out.extend(f" {vn[j]}" for j in bins)
        out.append("End")
        return "\n".join(out) + "\n"


class ModelBuilder:
    """Collects variables and sparse rows, then freezes them into a :class:`Model`."""

    def __init__(self, maximize: bool = True):
        self.maximize = maximize
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._c: list[np.ndarray] = []
        self._bin: list[np.ndarray] = []
        self._names: list[str] = []
        self.num_vars = 0
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._sense: list[int] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []

    def add_vars(self, count: int, lb=0.0, ub=np.inf, obj=0.0, binary: bool = False,
                 name: str = "x") -> np.ndarray:
        """Add ``count`` variables; returns their indices."""
        start = self.num_vars
        self._lb.append(np.broadcast_to(np.asarray(lb, float), (count,)).copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, float), (count,)).copy())
        self._c.append(np.broadcast_to(np.asarray(obj, float), (count,)).copy())
        self._bin.append(np.full(count, binary))
        self._names.extend(f"{name}{k}" if count > 1 else name for k in range(count))
        self.num_vars += count
        return np.arange(start, start + count)

    def add_var(self, lb=0.0, ub=np.inf, obj=0.0, binary: bool = False, name: str = "x") -> int:
        return int(self.add_vars(1, lb, ub, obj, binary, name)[0])

    @property
    def num_rows(self) -> int:
        return len(self._sense)

    def add_row(self, idx, vals, sense: int, rhs: float, name: str | None = None) -> int:
        r = len(self._sense)
        idx = np.asarray(idx, dtype=np.int64)
        self._rows.append(np.full(len(idx), r, dtype=np.int64))
        self._cols.append(idx)
        self._vals.append(np.broadcast_to(np.asarray(vals, float), idx.shape).copy())
        self._sense.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"r{r}")
        return r

    def add_rows(self, block: sp.spmatrix, col_offset, sense, rhs, name: str = "r") -> np.ndarray:
        """Append every row of ``block``; ``col_offset`` maps block columns to variables
        (an int offset or an index array)."""
        coo = sp.coo_matrix(block)
        start = len(self._sense)
        k = coo.shape[0]
        cols = coo.col + col_offset if np.isscalar(col_offset) else np.asarray(col_offset)[coo.col]
        self._rows.append(coo.row.astype(np.int64) + start)
        self._cols.append(cols.astype(np.int64))
        self._vals.append(coo.data.astype(float))
        self._sense.extend(np.broadcast_to(np.asarray(sense), (k,)).tolist())
        self._rhs.extend(np.broadcast_to(np.asarray(rhs, float), (k,)).tolist())
        self._row_names.extend(f"{name}{i}" for i in range(k))
        return np.arange(start, start + k)

    def build(self) -> Model:
        n = self.num_vars
        m = len(self._sense)
        cat = (lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt))
        A = sp.csr_matrix((cat(self._vals, float), (cat(self._rows, np.int64), cat(self._cols, np.int64))),
                          shape=(m, n))
        A.sum_duplicates()
        return Model(A=A, sense=np.array(self._sense, dtype=np.int8).reshape(m),
                     rhs=np.array(self._rhs, dtype=float).reshape(m),
                     c=cat(self._c, float), lb=cat(self._lb, float), ub=cat(self._ub, float),
                     binary=cat(self._bin, bool), maximize=self.maximize,
                     var_names=tuple(self._names), row_names=tuple(self._row_names))


@dataclass
class Solution:
    status: Status
    objective: float = float("nan")
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    basis: object = None
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class SolutionPool:
    """Integer-feasible points found during branch and bound, best first."""

    maximize: bool = True
    entries: list[tuple[float, np.ndarray]] = field(default_factory=list)
    _keys: set = field(default_factory=set)

    def add(self, objective: float, x: np.ndarray, binary: np.ndarray) -> bool:
        key = np.round(x[binary]).astype(np.int8).tobytes() + np.round(x[~binary], 7).tobytes()
        if key in self._keys:
            return False
        self._keys.add(key)
        self.entries.append((objective, x.copy()))
        self.entries.sort(key=lambda e: -e[0] if self.maximize else e[0])
        return True

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)
