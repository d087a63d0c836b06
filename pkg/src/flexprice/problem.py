"""Sparse MILP container shared by the model builders and the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "==", ">="


@dataclass
class Row:
    coefs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class MilpProblem:
    """Minimize ``c @ x + constant`` subject to sparse rows and finite bounds.

    Variables are added through :meth:`add_var`; a row is a ``{index: coef}``
    mapping with a sense and right-hand side.
    """

    obj: list[float] = field(default_factory=list)
    constant: float = 0.0
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    names: list[str] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    # builder bookkeeping (index maps for decoding); not part of the math
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.obj)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_binary(self) -> int:
        return sum(self.binary)

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf, obj: float = 0.0,
                binary: bool = False) -> int:
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self.obj.append(float(obj))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(binary)
        self.names.append(name)
        return len(self.obj) - 1

    def add_row(self, coefs: dict[int, float], sense: str, rhs: float, name: str = "") -> int:
        if sense not in (LE, EQ, GE):
            raise ValueError(f"bad sense {sense!r}")
        clean = {}
        for j, a in coefs.items():
            if not 0 <= j < self.n_vars:
                raise IndexError(f"row {name!r} references undeclared variable {j}")
            if a != 0.0:
                clean[j] = clean.get(j, 0.0) + float(a)
        self.rows.append(Row(clean, sense, float(rhs), name))
        return len(self.rows) - 1

    def index(self, name: str) -> int:
        return self.names.index(name)

    def copy(self) -> "MilpProblem":
        return MilpProblem(
            obj=list(self.obj), constant=self.constant, lb=list(self.lb), ub=list(self.ub),
            binary=list(self.binary), names=list(self.names),
            rows=[Row(dict(r.coefs), r.sense, r.rhs, r.name) for r in self.rows],
            meta=dict(self.meta),
        )

    # -- array views used by the solvers -------------------------------------

    def matrix(self) -> sp.csr_matrix:
        data, ri, ci = [], [], []
        for i, row in enumerate(self.rows):
            for j, a in row.coefs.items():
                ri.append(i)
                ci.append(j)
                data.append(a)
        return sp.csr_matrix((data, (ri, ci)), shape=(self.n_rows, self.n_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """``lo <= A x <= hi`` form of the rows."""
        lo = np.full(self.n_rows, -np.inf)
        hi = np.full(self.n_rows, np.inf)
        for i, row in enumerate(self.rows):
            if row.sense in (GE, EQ):
                lo[i] = row.rhs
            if row.sense in (LE, EQ):
                hi[i] = row.rhs
        return lo, hi

    def objective_value(self, x) -> float:
        return float(np.dot(self.obj, x) + self.constant)

    def violations(self, x, tol: float = 1e-6) -> list[tuple[str, float]]:
        """``(name, amount)`` for each bound or row violated by more than tol."""
        x = np.asarray(x, dtype=float)
        out = []
        lb, ub = np.array(self.lb), np.array(self.ub)
        for j in np.flatnonzero(x < lb - tol):
            out.append((f"lb:{self.names[j]}", float(lb[j] - x[j])))
        for j in np.flatnonzero(x > ub + tol):
            out.append((f"ub:{self.names[j]}", float(x[j] - ub[j])))
        ax = self.matrix() @ x
        lo, hi = self.row_bounds()
        for i in np.flatnonzero((ax < lo - tol) | (ax > hi + tol)):
            amount = max(lo[i] - ax[i], ax[i] - hi[i])
            out.append((self.rows[i].name or f"row{i}", float(amount)))
        return out

    def integrality_violations(self, x, tol: float = 1e-6) -> list[tuple[str, float]]:
        x = np.asarray(x, dtype=float)
        out = []
        for j, is_bin in enumerate(self.binary):
            if is_bin:
                frac = abs(x[j] - round(x[j]))
                if frac > tol:
                    out.append((self.names[j], float(frac)))
        return out
