"""MPS export/import so external solvers can cross-check a problem.

Layout (one record per line, fields at the classic fixed columns 2, 5, 15,
25, 40, 50; names are at most 8 characters so free-format readers also
accept the file)::

    NAME          FLEXPRICE
    ROWS
     N  OBJ
     E  R0000001
    COLUMNS
        MARKER                 'MARKER'                 'INTORG'
        C0000001  OBJ       1.5
        C0000001  R0000001  1
        MARKER                 'MARKER'                 'INTEND'
    RHS
        RHS       R0000001  40
        RHS       OBJ       -0.5        (negated objective constant)
    BOUNDS
     BV BND       C0000001
     LO BND       C0000002  0
     UP BND       C0000002  120
    ENDATA

Binary columns sit inside INTORG/INTEND markers and carry a ``BV`` bound.
Variable ``j`` is ``C{j+1:07d}`` and row ``i`` is ``R{i+1:07d}``; the
original names are written as ``*`` comment lines after NAME.
"""

from __future__ import annotations

import numpy as np

from ..problem import EQ, GE, LE, MilpProblem

_SENSE_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}


def _num(v: float) -> str:
    return f"{v:.12g}"


def _col(j: int) -> str:
    return f"C{j + 1:07d}"


def _row(i: int) -> str:
    return f"R{i + 1:07d}"


def write_mps(problem: MilpProblem, name: str = "FLEXPRICE") -> str:
    lines = [f"NAME          {name}"]
    for j, nm in enumerate(problem.names):
        lines.append(f"* {_col(j)} {nm}")
    lines.append("ROWS")
    lines.append(" N  OBJ")
    for i, row in enumerate(problem.rows):
        lines.append(f" {_SENSE_CODE[row.sense]}  {_row(i)}")
    lines.append("COLUMNS")
    by_col: list[list[tuple[str, float]]] = [[] for _ in range(problem.n_vars)]
    for i, row in enumerate(problem.rows):
        for j, a in row.coefs.items():
            by_col[j].append((_row(i), a))
    in_int = False
    for j in range(problem.n_vars):
        if problem.binary[j] and not in_int:
            lines.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not problem.binary[j] and in_int:
            lines.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = [("OBJ", problem.obj[j])] if problem.obj[j] else []
        entries += by_col[j]
        if not entries:
            entries = [("OBJ", 0.0)]
        for rname, a in entries:
            lines.append(f"    {_col(j):<8}  {rname:<8}  {_num(a)}")
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")
    lines.append("RHS")
    for i, row in enumerate(problem.rows):
        if row.rhs:
            lines.append(f"    RHS       {_row(i):<8}  {_num(row.rhs)}")
    if problem.constant:
        lines.append(f"    RHS       OBJ       {_num(-problem.constant)}")
    lines.append("BOUNDS")
    for j in range(problem.n_vars):
        c = _col(j)
        if problem.binary[j] and problem.lb[j] == 0 and problem.ub[j] == 1:
            lines.append(f" BV BND       {c}")
            continue
        if problem.lb[j] == problem.ub[j]:
            lines.append(f" FX BND       {c}  {_num(problem.lb[j])}")
            continue
        if problem.lb[j] != 0:
            lines.append(f" LO BND       {c}  {_num(problem.lb[j])}" if np.isfinite(problem.lb[j])
                         else f" MI BND       {c}")
        if np.isfinite(problem.ub[j]):
            lines.append(f" UP BND       {c}  {_num(problem.ub[j])}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def read_mps(text: str) -> MilpProblem:
    """Read back the subset of MPS produced by :func:`write_mps`."""
    prob = MilpProblem()
    names: dict[str, str] = {}
    row_index: dict[str, int] = {}
    senses: list[str] = []
    col_index: dict[str, int] = {}
    coefs: list[dict[int, float]] = []
    rhs: list[float] = []
    section = None
    integer = False
    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("*"):
            parts = raw[1:].split(None, 1)
            if len(parts) == 2:
                names[parts[0]] = parts[1]
            continue
        if not raw[0].isspace():
            section = raw.split()[0]
            continue
        f = raw.split()
        if section == "ROWS":
            if f[0] == "N":
                continue
            row_index[f[1]] = len(senses)
            senses.append(_CODE_SENSE[f[0]])
            coefs.append({})
            rhs.append(0.0)
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                integer = f[2] == "'INTORG'"
                continue
            c = f[0]
            if c not in col_index:
                col_index[c] = prob.add_var(names.get(c, c), 0.0, np.inf, binary=False)
                prob.binary[col_index[c]] = integer
            j = col_index[c]
            for rname, val in zip(f[1::2], f[2::2]):
                if rname == "OBJ":
                    prob.obj[j] = float(val)
                else:
                    coefs[row_index[rname]][j] = float(val)
        elif section == "RHS":
            for rname, val in zip(f[1::2], f[2::2]):
                if rname == "OBJ":
                    prob.constant = -float(val)
                else:
                    rhs[row_index[rname]] = float(val)
        elif section == "BOUNDS":
            kind, c = f[0], f[2]
            j = col_index[c]
            if kind == "BV":
                prob.lb[j], prob.ub[j], prob.binary[j] = 0.0, 1.0, True
            elif kind == "LO":
                prob.lb[j] = float(f[3])
            elif kind == "UP":
                prob.ub[j] = float(f[3])
            elif kind == "FX":
                prob.lb[j] = prob.ub[j] = float(f[3])
            elif kind == "MI":
                prob.lb[j] = -np.inf
    for i, sense in enumerate(senses):
        prob.add_row(coefs[i], sense, rhs[i], f"R{i + 1:07d}")
    return prob
