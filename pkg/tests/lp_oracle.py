"""
Brute-force reference for small bounded LPs: enumerate every basic solution of the
active-constraint systems and keep the cheapest feasible one.
"""

from __future__ import annotations

from itertools import combinations
from typing import Optional

import numpy as np

from src.lp_solver import LinearProgram

FEASIBILITY = 1e-7


def _inequalities(lp: LinearProgram):
    """All inequality rows as g v <= h, including finite bounds."""
    n = lp.num_vars
    rows, rhs = [lp.a_ub], [lp.b_ub]
    eye = np.eye(n)
    finite_hi = np.isfinite(lp.hi)
    finite_lo = np.isfinite(lp.lo)
    rows.append(eye[finite_hi])
    rhs.append(lp.hi[finite_hi])
    rows.append(-eye[finite_lo])
    rhs.append(-lp.lo[finite_lo])
    return np.vstack(rows), np.concatenate(rhs)


def vertex_optimum(lp: LinearProgram) -> Optional[float]:
    """Minimum objective over all vertices, or None when no vertex is feasible."""
    n = lp.num_vars
    g, h = _inequalities(lp)
    m_eq = lp.a_eq.shape[0]
    need = n - m_eq
    if need < 0:
        return None
    combos = list(combinations(range(g.shape[0]), need))
    combos = np.array(combos, dtype=int) if need else np.zeros((1, 0), dtype=int)
    systems = np.empty((combos.shape[0], n, n))
    rhs = np.empty((combos.shape[0], n))
    systems[:, :m_eq] = lp.a_eq
    rhs[:, :m_eq] = lp.b_eq
    systems[:, m_eq:] = g[combos]
    rhs[:, m_eq:] = h[combos]

    regular = np.abs(np.linalg.det(systems)) > 1e-9
    if not np.any(regular):
        return None
    points = np.linalg.solve(systems[regular], rhs[regular][..., None])[..., 0]

    ok = np.all(points @ g.T <= h + FEASIBILITY, axis=1)
    if m_eq:
        ok &= np.all(np.abs(points @ lp.a_eq.T - lp.b_eq) <= FEASIBILITY, axis=1)
    if not np.any(ok):
        return None
    return float(np.min(points[ok] @ lp.c) + lp.constant)


def random_bounded_lp(rng: np.random.Generator) -> LinearProgram:
    """
    Feasible LP with 1..6 box-bounded variables and up to 8 rows (at most one equality),
    built around an interior point so feasibility is guaranteed.
    """
    n = int(rng.integers(1, 7))
    m_ub = int(rng.integers(0, 8))
    m_eq = int(rng.integers(0, 2)) if n > 1 else 0
    hi = rng.integers(1, 11, size=n).astype(float)
    anchor = rng.uniform(0.0, 1.0, size=n) * hi
    c = rng.integers(-5, 6, size=n).astype(float)

    a_ub = rng.integers(-5, 6, size=(m_ub, n)).astype(float)
    b_ub = a_ub @ anchor + rng.integers(0, 4, size=m_ub)
    a_eq = rng.integers(1, 6, size=(m_eq, n)).astype(float)
    b_eq = a_eq @ anchor
    return LinearProgram(c, a_eq, b_eq, a_ub, b_ub, np.zeros(n), hi)
