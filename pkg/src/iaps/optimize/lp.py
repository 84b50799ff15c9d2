"""Dense two-phase tableau simplex for small inequality-form LPs.

Solves  max (or min) c^T x  subject to  A x <= b,  x >= 0.  Bland's rule
makes pivoting deterministic and cycle-free.  Duals are recovered from the
final basis, and the relative duality gap serves as the optimality
certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

TOL = 1e-9


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    status: str  # optimal | infeasible | unbounded | iteration_limit
    objective: float
    duals: np.ndarray  # nonnegative multipliers of the <= rows
    slacks: np.ndarray  # b - A x
    gap: float
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _run(T: np.ndarray, basis: list[int], n_cols: int, tol: float, max_iter: int) -> tuple[str, int]:
    """Minimize the cost held in the last row of T over the first n_cols columns."""
    m = T.shape[0] - 1
    it = 0
    while True:
        cost = T[-1, :n_cols]
        entering = np.flatnonzero(cost < -tol)
        if entering.size == 0:
            return "optimal", it
        if it >= max_iter:
            return "iteration_limit", it
        col = int(entering[0])
        column = T[:m, col]
        pos = column > tol
        if not np.any(pos):
            return "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        # Bland: among tied rows leave the variable with the smallest index
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1


def simplex(c, A_ub, b_ub, maximize: bool = True, tol: float = TOL, max_iter: int = 5000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")
    cmin = -c if maximize else c.copy()

    neg = np.flatnonzero(b < 0)
    n_art = neg.size
    width = n + m + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    for a_idx, i in enumerate(neg):
        T[i, :-1] *= -1.0
        T[i, -1] *= -1.0
        T[i, n + m + a_idx] = 1.0
        basis[i] = n + m + a_idx

    iterations = 0
    if n_art:
        # phase I: minimize the sum of artificials
        T[-1, :] = 0.0
        T[-1, n + m:width] = 1.0
        for i in neg:
            T[-1] -= T[i]
        status, it = _run(T, basis, width, tol, max_iter)
        iterations += it
        scale = max(1.0, float(np.abs(b).max()))
        if status != "optimal" or -T[-1, -1] > 1e-7 * scale:
            return _failed("infeasible", n, m, iterations)
        # drive artificials out of the basis; rows that cannot be pivoted are redundant
        keep = []
        for i in range(m):
            if basis[i] >= n + m:
                cand = np.flatnonzero(np.abs(T[i, :n + m]) > tol)
                if cand.size == 0:
                    continue
                _pivot(T, i, int(cand[0]))
                basis[i] = int(cand[0])
            keep.append(i)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.delete(T, np.s_[n + m:width], axis=1)
    else:
        keep = list(range(m))

    # phase II
    T[-1, :] = 0.0
    T[-1, :n] = cmin
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    status, it = _run(T, basis, n + m, tol, max_iter)
    iterations += it
    if status != "optimal":
        return _failed(status, n, m, iterations)

    z = np.zeros(n + m)
    z[basis] = T[:len(basis), -1]
    x = np.maximum(z[:n], 0.0)

    # duals from the original system [A | I] restricted to the kept rows
    full = np.hstack([A, np.eye(m)])[keep]
    cost = np.concatenate([cmin, np.zeros(m)])
    Bm = full[:, basis]
    y_kept = np.linalg.solve(Bm.T, cost[basis])
    y = np.zeros(m)
    y[keep] = y_kept
    primal = float(cmin @ x)
    dual = float(b @ y)
    gap = abs(primal - dual) / max(1.0, abs(primal))
    objective = -primal if maximize else primal
    return LPResult(x, "optimal", objective, -y, b - A @ x, gap, iterations)


def _failed(status: str, n: int, m: int, iterations: int) -> LPResult:
    nan = np.full(n, np.nan)
    return LPResult(nan, status, float("nan"), np.full(m, np.nan), np.full(m, np.nan),
                    float("nan"), iterations)


# plain-text problem format ----------------------------------------------------

HEADER = "# iaps-lp 1"


def write_problem(path: str | Path, c, A_ub, b_ub, maximize: bool = True) -> None:
    """Write an LP as text.

    Layout: a header line, ``sense max|min``, ``shape m n``, a ``c`` line
    with n numbers, then m lines ``a_1 ... a_n | b``.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    lines = [HEADER, f"sense {'max' if maximize else 'min'}", f"shape {A.shape[0]} {A.shape[1]}",
             "c " + " ".join(repr(float(v)) for v in c)]
    for row, rhs in zip(A, b):
        lines.append(" ".join(repr(float(v)) for v in row) + " | " + repr(float(rhs)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_problem(path: str | Path):
    """Inverse of :func:`write_problem`; returns (c, A_ub, b_ub, maximize)."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines or lines[0] != HEADER:
        raise ValueError("not an iaps LP file")
    try:
        sense = lines[1].split()[1]
        m, n = (int(v) for v in lines[2].split()[1:3])
        c = np.array([float(v) for v in lines[3].split()[1:]])
        A = np.zeros((m, n))
        b = np.zeros(m)
        for i in range(m):
            left, right = lines[4 + i].split("|")
            A[i] = [float(v) for v in left.split()]
            b[i] = float(right)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed LP file: {exc}") from exc
    if c.shape != (n,) or sense not in ("max", "min"):
        raise ValueError("malformed LP file")
    return c, A, b, sense == "max"
