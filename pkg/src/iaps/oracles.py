"""Independent reference computations used to validate the main routines.

None of these share code with the implementations they check: the
noncentral chi-square tail is integrated numerically from the density,
voting errors are enumerated over every vote pattern, and LPs are searched
on a refining grid without any pivoting.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.special import i0e


def quad_sf(xi: float, rho: float) -> float:
    """P(X > xi) for noncentral chi-square (2 DoF) by adaptive quadrature.

    Integrates in u = sqrt(x), where the density becomes
    u exp(-(u - a)^2 / 2) i0e(a u) with a = sqrt(rho), smooth at the origin.
    """
    a = math.sqrt(rho)

    def f(u):
        return u * math.exp(-0.5 * (u - a) ** 2) * i0e(a * u)

    lo = math.sqrt(xi)
    peak = a + 1.0
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    if lo >= peak:
        val, _ = quad(f, lo, lo + 40.0, **opts)
        return val
    head, _ = quad(f, 0.0, lo, **opts) if lo > 0 else (0.0, 0.0)
    tail, _ = quad(f, lo, peak + 40.0, points=[peak - 1.0], **opts)
    # the two pieces must sum to one; use the side that avoids cancellation
    return tail if tail < 0.5 else 1.0 - head


def enumerate_error(kappa: int, pd: float, pfa: float, n: int) -> float:
    """Fusion error (equal priors) by summing over all 2^n vote patterns."""
    miss = 0.0
    false_alarm = 0.0
    for bits in itertools.product((0, 1), repeat=n):
        k = sum(bits)
        p1 = pd ** k * (1.0 - pd) ** (n - k)
        p0 = pfa ** k * (1.0 - pfa) ** (n - k)
        if k >= kappa:
            false_alarm += p0
        else:
            miss += p1
    return 0.5 * (miss + false_alarm)


def enumerate_best_kappa(pd: float, pfa: float, n: int) -> tuple[int, float]:
    """Smallest kappa attaining the minimal enumerated error."""
    errs = [enumerate_error(k, pd, pfa, n) for k in range(1, n + 1)]
    best = min(errs)
    return errs.index(best) + 1, best


def grid_lp(c, A, b, lo, hi, maximize: bool = True, points: int = 41, rounds: int = 12):
    """Best feasible grid point of an LP over a box, refined by zooming.

    Returns (x, objective) or (None, nan) when the coarsest grid holds no
    feasible point.  Accuracy improves geometrically with ``rounds``.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    sign = 1.0 if maximize else -1.0
    best_x, best_v = None, -math.inf
    scale = np.maximum(np.abs(b), 1e-300)
    for _ in range(rounds):
        axes = [np.linspace(l, h, points) for l, h in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, c.size)
        slack = (b[None, :] - grid @ A.T) / scale[None, :]
        feas = np.all(slack >= -1e-12, axis=1)
        if np.any(feas):
            vals = sign * (grid[feas] @ c)
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_v, best_x = float(vals[i]), grid[feas][i]
        if best_x is None:
            return None, math.nan
        width = (hi - lo) / (points - 1)
        lo = np.maximum(best_x - 2 * width, 0.0)
        hi = best_x + 2 * width
    return best_x, sign * best_v


def simplex_grid_max(c, A, b, total: float, step: float):
    """Exhaustive search of max c.x over the 2-simplex {x >= 0, x0 + x1 <= total}."""
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    n = int(round(1.0 / step))
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = i + j <= n
    pts = np.column_stack([i[keep], j[keep]]).astype(float) * (total / n)
    scale = np.maximum(np.abs(b), 1e-300)
    feas = np.all((b[None, :] - pts @ A.T) / scale[None, :] >= -1e-12, axis=1)
    if not np.any(feas):
        return None, math.nan
    vals = pts[feas] @ c
    k = int(np.argmax(vals))
    return pts[feas][k], float(vals[k])


# reference tables --------------------------------------------------------------

def sf_table(n: int = 50, top: float = 50.0) -> list[tuple[float, float, float]]:
    grid = np.linspace(0.0, top, n)
    return [(float(x), float(r), quad_sf(float(x), float(r))) for x in grid for r in grid]


def vote_table() -> list[tuple]:
    rows = []
    for n in (3, 5, 11):
        for pd, pfa in vote_grid():
            for kappa in range(1, n + 1):
                rows.append((n, kappa, pd, pfa, enumerate_error(kappa, pd, pfa, n)))
    return rows


def vote_grid() -> list[tuple[float, float]]:
    """20 (P_D, P_FA) pairs with P_D > P_FA, spanning weak to strong nodes."""
    pds = (0.05, 0.2, 0.4, 0.6, 0.75, 0.9, 0.97, 0.995, 0.3, 0.5)
    pfas = (1e-5, 1e-2)
    return [(pd, pfa) for pfa in pfas for pd in pds]


def lp_table(seed: int = 11, count: int = 5) -> list[tuple]:
    """Grid-oracle optima of small random power-allocation LPs."""
    rng = np.random.default_rng(seed)
    rows = []
    for idx in range(count):
        K = 1 + idx % 3
        A, b, c = random_qos_instance(rng, K)
        x, v = grid_lp(c, np.vstack([A, np.ones(K + 1)]), np.append(b, 1.0),
                       np.zeros(K + 1), np.ones(K + 1), maximize=True)
        rows.append((idx, K, v))
    return rows


def random_qos_instance(rng: np.random.Generator, K: int, gamma: float = 2.0):
    """Scaled toy QoS system (budget 1, noise 1) with weak cross couplings."""
    own = rng.uniform(20.0, 60.0, K)
    cross = rng.uniform(0.0, 2.0, (K, K + 1))
    A = cross.copy()
    for k in range(K):
        A[k, k + 1] = -own[k] / gamma
    b = -np.ones(K) * 1.0
    c = rng.uniform(0.1, 1.0, K + 1)
    c[0] = 2.0
    return A, b, c


def write_table(path: Path, header: tuple, rows: list[tuple]) -> str:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_all(out_dir: str | Path) -> dict[str, str]:
    """Write every reference table plus a checksum list; returns name -> sha256."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sums = {
        "sf_quadrature.csv": write_table(out / "sf_quadrature.csv", ("xi", "rho", "sf"), sf_table()),
        "vote_enumeration.csv": write_table(out / "vote_enumeration.csv",
                                            ("n_voters", "kappa", "pd", "pfa", "error"), vote_table()),
        "lp_grid.csv": write_table(out / "lp_grid.csv", ("instance", "K", "objective"), lp_table()),
    }
    (out / "SHA256SUMS").write_text("".join(f"{h}  {n}\n" for n, h in sorted(sums.items())),
                                    encoding="utf-8")
    return sums
