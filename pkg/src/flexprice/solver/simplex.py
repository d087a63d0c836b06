"""Dense bounded-variable two-phase primal simplex.

Solves ``min c @ z`` s.t. ``M z = b``, ``0 <= z <= U`` (``U`` may be inf).
Nonbasic variables sit at either bound; the ratio test includes bound flips
of the entering column. Dantzig pricing, switching to Bland's rule after a
run of degenerate pivots.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
DEGENERATE_RUN = 50


class NumericalError(RuntimeError):
    pass


class Unbounded(RuntimeError):
    pass


class _Tableau:
    def __init__(self, M: np.ndarray, b: np.ndarray, U: np.ndarray, basis: np.ndarray, x: np.ndarray):
        self.T = M.copy()  # becomes B^-1 M after pivots
        self.U = U
        self.basis = basis
        self.x = x
        self.m, self.n = M.shape
        self.is_basic = np.zeros(self.n, dtype=bool)
        self.is_basic[basis] = True
        self.pivots = 0

    def pivot(self, r: int, j: int):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        T[rows] -= np.outer(col[rows], T[r])
        self.is_basic[self.basis[r]] = False
        self.basis[r] = j
        self.is_basic[j] = True
        self.pivots += 1

    def run(self, c: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
        """Minimize c over the current tableau; returns 'optimal' or raises."""
        d = c - c[self.basis] @ self.T
        degenerate = 0
        for _ in range(max_iter):
            at_upper = (~self.is_basic) & np.isfinite(self.U) & (self.x >= self.U - 1e-12) & (self.U > 0)
            # fixed (U == 0) columns can never move
            cand_inc = (~self.is_basic) & allowed & ~at_upper & (self.U > 0) & (d < -OPT_TOL)
            cand_dec = (~self.is_basic) & allowed & at_upper & (d > OPT_TOL)
            cand = cand_inc | cand_dec
            if not cand.any():
                return "optimal"
            idx = np.flatnonzero(cand)
            if degenerate >= DEGENERATE_RUN:
                j = int(idx[0])  # Bland
            else:
                j = int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if cand_inc[j] else -1.0

            col = self.T[:, j] * direction  # basic x changes by -theta * col
            xb = self.x[self.basis]
            ub = self.U[self.basis]
            theta = float(self.U[j])  # bound flip distance, may be inf
            leave, leave_to_upper = -1, False
            dec = col > PIVOT_TOL
            inc = col < -PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                r_dec = np.where(dec, np.maximum(xb, 0.0) / np.where(dec, col, 1.0), np.inf)
                room = np.where(np.isfinite(ub), np.maximum(ub - xb, 0.0), np.inf)
                r_inc = np.where(inc, room / np.where(inc, -col, 1.0), np.inf)
            ratios = np.minimum(r_dec, r_inc)
            best = ratios.min(initial=np.inf)
            if best < theta:
                ties = np.flatnonzero(ratios <= best + 1e-12)
                if degenerate >= DEGENERATE_RUN:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(col[ties]))])
                theta, leave = float(ratios[r]), r
                leave_to_upper = bool(r_inc[r] <= r_dec[r])
            elif not np.isfinite(theta):
                raise Unbounded("LP is unbounded")

            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            self.x[self.basis] = xb - theta * col
            self.x[j] += direction * theta
            if leave < 0:
                # bound flip of the entering variable
                self.x[j] = self.U[j] if direction > 0 else 0.0
                continue
            out = self.basis[leave]
            if abs(self.T[leave, j]) < PIVOT_TOL:
                raise NumericalError("pivot element vanished")
            self.pivot(leave, j)
            self.x[out] = self.U[out] if leave_to_upper else 0.0
            d = d - d[j] * self.T[leave]
        raise NumericalError(f"simplex iteration limit {max_iter} reached")


def simplex(c: np.ndarray, M: np.ndarray, b: np.ndarray, U: np.ndarray,
            max_iter: int = 50_000, feas_tol: float = 1e-7):
    """Return ``("optimal", z, obj)`` or ``("infeasible", None, nan)``."""
    m, n = M.shape
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float)
    sign = np.where(b < 0, -1.0, 1.0)
    M *= sign[:, None]
    b = b * sign

    # phase 1: a row whose own unit column (usually its slack) can carry b
    # starts with that column basic; the other rows get an artificial.
    # Rows with b = 0 may be negated for free to turn a -1 column into +1.
    basis = np.full(m, -1)
    nnz = np.count_nonzero(M, axis=0)
    for j in np.flatnonzero(nnz == 1):
        r = int(np.flatnonzero(M[:, j])[0])
        if basis[r] >= 0 or abs(M[r, j]) != 1.0:
            continue
        if M[r, j] < 0 and b[r] == 0.0:
            M[r] = -M[r]
        if M[r, j] == 1.0 and U[j] >= b[r]:
            basis[r] = j
    art_rows = np.flatnonzero(basis < 0)
    k = len(art_rows)
    A1 = np.zeros((m, k))
    A1[art_rows, np.arange(k)] = 1.0
    basis[art_rows] = n + np.arange(k)
    M1 = np.hstack([M, A1])
    U1 = np.concatenate([U, np.full(k, np.inf)])
    x = np.zeros(n + k)
    x[basis] = b
    tab = _Tableau(M1, b, U1, basis, x)
    c1 = np.concatenate([np.zeros(n), np.ones(k)])
    allowed = np.ones(n + k, dtype=bool)
    tab.run(c1, allowed, max_iter)
    infeas = float(tab.x[n:].sum())
    if infeas > feas_tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        return "infeasible", None, np.nan

    # drive zero-level artificials out of the basis where possible
    for r in range(m):
        if tab.basis[r] >= n:
            row = np.abs(tab.T[r, :n])
            row[tab.is_basic[:n]] = 0.0
            j = int(np.argmax(row)) if row.size else -1
            if j >= 0 and row[j] > 1e-7:
                tab.pivot(r, j)
    tab.U = np.concatenate([U, np.zeros(k)])
    tab.x[n:] = 0.0
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(k, dtype=bool)])
    c2 = np.concatenate([c, np.zeros(k)])
    tab.run(c2, allowed, max_iter)

    z = _refine(M, b, tab, n)
    return "optimal", z, float(c @ z)


def _refine(M, b, tab: _Tableau, n: int) -> np.ndarray:
    """Recompute basic values from the nonbasic ones to shed pivot drift."""
    x = tab.x.copy()
    basis = tab.basis
    real = basis < n
    z = x[:n].copy()
    nonbasic = ~tab.is_basic[:n]
    rhs = b - M[:, nonbasic] @ z[nonbasic]
    B = M[:, basis[real]]
    try:
        sol, *_ = np.linalg.lstsq(B, rhs, rcond=None)
    except np.linalg.LinAlgError:
        return z
    cand = z.copy()
    cand[basis[real]] = sol
    if np.abs(M @ cand - b).max(initial=0.0) <= np.abs(M @ z - b).max(initial=0.0) + 1e-12:
        z = cand
    return z
