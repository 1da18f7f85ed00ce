"""Independent reference computations (no LP solver involved)."""

import itertools

import numpy as np


def power_iteration_norm(M, iters=2000, seed=0):
    """Largest singular value via power iteration on M^T M."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    for _ in range(iters):
        v = M.T @ (M @ v)
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        v /= nv
    return float(np.sqrt(np.linalg.norm(M.T @ (M @ v))))


def brute_force_observability_index(A, C, rank_tol=1e-9):
    n = A.shape[0]

    def rank(M):
        s = np.linalg.svd(M, compute_uv=False)
        return 0 if s.size == 0 or s[0] == 0 else int(np.sum(s > rank_tol * s[0]))

    ranks = []
    for j in range(n + 1):
        O = np.vstack([C @ np.linalg.matrix_power(A, i) for i in range(j + 1)])
        ranks.append(rank(O))
    for j in range(n):
        if ranks[j] == ranks[j + 1]:
            return j + 1
    return max(n, 1)


def lp2_enumeration(c, A, b):
    """Max of c^T x over a bounded 2-D polygon by enumerating row intersections."""
    best = -np.inf
    for i, j in itertools.combinations(range(A.shape[0]), 2):
        M = A[[i, j]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, b[[i, j]])
        if np.all(A @ x <= b + 1e-9):
            best = max(best, float(c @ x))
    return best


def ellipsoid_support_kkt(H, gamma, b):
    """Support of {z : z^T H z <= gamma^2} from the KKT maximizer, via Cholesky."""
    L = np.linalg.cholesky(H)
    y = np.linalg.solve(L, b)
    Hinv_b = np.linalg.solve(L.T, y)
    q = float(b @ Hinv_b)
    if q == 0:
        return 0.0
    z = gamma * Hinv_b / np.sqrt(q)
    return float(b @ z)


# -- leader-follower LPs by forward simulation on a grid ----------------------

def _lf_step(x, d, dt, h, offset):
    A = np.array([[1.0, dt], [-1.0 / h, -dt / h]])
    B = np.array([[0.0, 0.0], [1.0 / h, dt / h]])
    return A @ x + B @ d + np.array([0.0, -dt * offset])


def lf_grid_theta(kind, margin, g0, dt=0.3, h=2.0, a_lim=9.8, offset=1.0, n=9, span=5.0):
    """Dense-grid lower estimate of the leader-follower programs.

    ``kind``:
      ``"00"``  initial set imposed, objective on the first window;
      ``"21"``  free state at step 1, one guarantee window, objective on the next;
      ``"10"``  free state at step 1, no guarantee window.

    The objective is ``-(headway) - g0`` of the oldest sample of the
    objective window, where ``headway = p_l - p_f - h v_f``. Everything is
    computed by forward recursion; ``span`` sets the grid half-width.
    """
    best = -np.inf
    svals = np.linspace(0.0, span, n)
    vals = np.linspace(-span, span, n)
    avals = np.linspace(-a_lim, a_lim, 5)
    if kind == "00":
        # headway(0) = margin + s, s >= 0; objective window 1 has time 0 oldest
        for s in svals:
            best = max(best, -(margin + s) - g0)
        return best
    if kind == "10":
        # x_1 free, objective reads headway(1)
        for pf, vf, vl in itertools.product(vals, vals, vals):
            pl = 0.0
            hw = pl - pf - h * vf
            best = max(best, -hw - g0)
        return best
    if kind == "21":
        for pf, vf, vl, a in itertools.product(vals, vals, vals, avals):
            pl = 0.0
            x1 = np.array([pf, vf])
            d1 = np.array([pl, vl])
            if -(pl - pf - h * vf) - g0 > 0:  # guarantee at step 1 (robustified bound)
                continue
            d2 = np.array([pl + dt * vl, vl + dt * a])
            x2 = _lf_step(x1, d1, dt, h, offset)
            hw2 = d2[0] - x2[0] - h * x2[1]
            best = max(best, -hw2 - g0)
        return best
    raise ValueError(kind)
