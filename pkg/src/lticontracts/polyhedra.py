"""Polyhedral sets in H- and V-representation and LP-based decision procedures."""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import EngineError, InputError, ProjectionLimitError
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, is_feasible, solve
from .numerics import Tolerances, as_matrix

__all__ = [
    "PolyhedronH",
    "PolyhedronV",
    "ShiftOperators",
    "shift_operators",
    "contains_point",
    "is_empty",
    "inclusion_h",
    "inclusion_v",
    "fm_eliminate",
    "sum_with_column_span",
    "extendability_check",
    "constant_extension_holds",
    "h_to_v",
    "v_to_h",
    "interval_hull",
]


@dataclass(frozen=True)
class PolyhedronH:
    """The set ``{z : A z <= b}``."""

    A: np.ndarray
    b: np.ndarray

    def __init__(self, A, b, dim=None):
        b = np.asarray(b, dtype=float).ravel()
        A = np.asarray(A, dtype=float)
        if A.size == 0 and dim is not None:
            A = A.reshape(b.shape[0], dim)
        A = as_matrix(A, "A", rows=b.shape[0])
        if dim is not None and A.shape[1] != dim:
            raise InputError(f"A: expected {dim} columns, got {A.shape[1]}")
        if A.shape[1] < 1:
            raise InputError("polyhedron must have ambient dimension >= 1")
        if not np.all(np.isfinite(b)):
            raise InputError("b: non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((1, dim)), [-1.0])

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.shape[0]
        return cls(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([hi, -lo]))

    def as_lp(self, c=None) -> LinearProgram:
        c = np.zeros(self.dim) if c is None else c
        return LinearProgram.build(c, self.A, self.b)


@dataclass(frozen=True)
class PolyhedronV:
    """The set ``{F lam + G theta : 1^T lam = 1, lam >= 0, theta >= 0}``.

    ``F`` must have at least one column (nonempty set).
    """

    F: np.ndarray
    G: np.ndarray

    def __init__(self, F, G=None):
        F = as_matrix(F, "F")
        if F.shape[1] < 1:
            raise InputError("PolyhedronV needs at least one vertex generator")
        if G is None:
            G = np.zeros((F.shape[0], 0))
        G = np.asarray(G, dtype=float)
        if G.size == 0:
            G = G.reshape(F.shape[0], 0)
        G = as_matrix(G, "G", rows=F.shape[0])
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)

    @property
    def dim(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True)
class ShiftOperators:
    """Block up-shift ``T_shift`` and last-block injector ``K_embed``."""

    T_shift: np.ndarray
    K_embed: np.ndarray
    block_size: int
    blocks: int


def shift_operators(block_size, blocks) -> ShiftOperators:
    """Shift operators on ``blocks`` stacked vectors of size ``block_size``.

    ``T_shift (u_0, ..., u_m) = (u_1, ..., u_m, 0)`` and
    ``K_embed kappa = (0, ..., 0, kappa)``.
    """
    if block_size < 1 or blocks < 1:
        raise InputError("block_size and blocks must be positive")
    n = block_size * blocks
    T = np.eye(n, k=block_size)
    K = np.zeros((n, block_size))
    K[n - block_size:, :] = np.eye(block_size)
    return ShiftOperators(T, K, block_size, blocks)


def contains_point(P: PolyhedronH, z, tol=1e-9) -> bool:
    """True iff ``A z <= b + tol`` componentwise."""
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != P.dim:
        raise InputError(f"point has dimension {z.shape[0]}, polyhedron has {P.dim}")
    return bool(np.all(P.A @ z <= P.b + tol))


def is_empty(P: PolyhedronH, tol: Tolerances = Tolerances()) -> bool:
    return not is_feasible(P.as_lp(), tol)


def inclusion_h(S1: PolyhedronH, S2: PolyhedronH, tol: Tolerances = Tolerances()) -> bool:
    """Decide ``S1 ⊆ S2`` for H-polyhedra.

    For every row ``j`` of ``S2`` the program
    ``max e_j^T (A2 z - b2)  s.t.  A1 z <= b1`` must have value at most
    ``tol.lp_tol``. An empty ``S1`` is included in anything.
    """
    if S1.dim != S2.dim:
        raise InputError(f"dimension mismatch: {S1.dim} vs {S2.dim}")
    base = S1.as_lp()
    if not is_feasible(base, tol):
        return True
    for j in range(S2.n_rows):
        out = solve(base.with_objective(S2.A[j], -S2.b[j]), tol, known_feasible=True)
        if out.status == UNBOUNDED:
            return False
        if out.status != OPTIMAL:
            raise EngineError(f"inclusion_h: row {j}: {out.status} {out.detail}")
        if out.value > tol.lp_tol:
            return False
    return True


def _in_hull(F2, G2, z, tol):
    p, q = F2.shape[1], G2.shape[1]
    A_eq = np.vstack([np.hstack([F2, G2]), np.concatenate([np.ones(p), np.zeros(q)])[None, :]])
    b_eq = np.concatenate([z, [1.0]])
    lp = LinearProgram.build(np.zeros(p + q), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * (p + q))
    return is_feasible(lp, tol)


def _in_cone(G2, g, tol):
    q = G2.shape[1]
    if q == 0:
        return bool(np.all(np.abs(g) <= tol.lp_tol))
    lp = LinearProgram.build(np.zeros(q), A_eq=G2, b_eq=g, bounds=[(0, None)] * q)
    return is_feasible(lp, tol)


def inclusion_v(S1: PolyhedronV, S2: PolyhedronV, tol: Tolerances = Tolerances()) -> bool:
    """Decide ``S1 ⊆ S2`` for V-polyhedra.

    Every vertex generator of ``S1`` must be a convex-plus-conic combination
    of the generators of ``S2`` and every ray of ``S1`` a conic combination
    of the rays of ``S2``. One feasibility LP per generator column.
    """
    if S1.dim != S2.dim:
        raise InputError(f"dimension mismatch: {S1.dim} vs {S2.dim}")
    for k in range(S1.G.shape[1]):
        if not _in_cone(S2.G, S1.G[:, k], tol):
            return False
    for k in range(S1.F.shape[1]):
        if not _in_hull(S2.F, S2.G, S1.F[:, k], tol):
            return False
    return True


def _normalize_rows(A, b, tol):
    """Scale rows to unit max-coefficient, drop trivial rows and duplicates.

    Returns ``(A, b, empty)`` where ``empty`` flags a row ``0 <= negative``.
    """
    scale = np.max(np.abs(A), axis=1) if A.shape[1] else np.zeros(A.shape[0])
    zero = scale <= 1e-12 * np.maximum(1.0, np.abs(b))
    if np.any(b[zero] < -tol):
        return A[:0], b[:0], True
    A, b, scale = A[~zero], b[~zero], scale[~zero]
    A = A / scale[:, None]
    b = b / scale
    if A.shape[0] > 1:
        key = np.round(np.hstack([A, b[:, None]]), 12)
        _, idx = np.unique(key, axis=0, return_index=True)
        idx = np.sort(idx)
        A, b = A[idx], b[idx]
    return A, b, False


def _prune(A, b, tol: Tolerances):
    """Remove rows implied by the others (one LP per row)."""
    keep = list(range(A.shape[0]))
    i = 0
    while i < len(keep):
        row = keep[i]
        others = [r for r in keep if r != row]
        if not others:
            break
        lp = LinearProgram.build(A[row], A[others], b[others])
        out = solve(lp, tol)
        if out.status == OPTIMAL and out.value <= b[row] + tol.lp_tol:
            keep.pop(i)
        elif out.status in (OPTIMAL, UNBOUNDED):
            i += 1
        elif out.status == INFEASIBLE:
            return None
        else:
            raise EngineError(f"redundancy check failed: {out.detail}")
    return A[keep], b[keep]


def fm_eliminate(P: PolyhedronH, drop, tol: Tolerances = Tolerances(), max_rows=4000, prune=True) -> PolyhedronH:
    """Project ``P`` onto the coordinates not listed in ``drop``.

    Fourier-Motzkin elimination, cheapest variable first, with per-row LP
    redundancy pruning after each step.

    Parameters
    ----------
    P : PolyhedronH
    drop : iterable of int
        Column indices to eliminate.
    max_rows : int
        Budget on intermediate rows, ``ProjectionLimitError`` beyond it.

    Returns
    -------
    PolyhedronH
        Over the kept coordinates in their original order. An empty input
        projects to an empty set.
    """
    drop = sorted(set(int(j) for j in drop))
    if any(j < 0 or j >= P.dim for j in drop):
        raise InputError("drop indices out of range")
    keep_cols = [j for j in range(P.dim) if j not in drop]
    if not keep_cols:
        raise InputError("cannot eliminate every coordinate")
    A, b, empty = _normalize_rows(P.A.copy(), P.b.copy(), tol.lp_tol)
    if empty or (A.shape[0] and is_empty(PolyhedronH(A, b), tol)):
        return PolyhedronH.empty(len(keep_cols))
    remaining = list(drop)
    while remaining:
        costs = []
        for j in remaining:
            npos = int(np.sum(A[:, j] > 0))
            nneg = int(np.sum(A[:, j] < 0))
            costs.append(npos * nneg - npos - nneg)
        j = remaining.pop(int(np.argmin(costs)))
        col = A[:, j]
        pos = np.where(col > 0)[0]
        neg = np.where(col < 0)[0]
        zer = np.where(col == 0)[0]
        if len(pos) * len(neg) + len(zer) > max_rows:
            raise ProjectionLimitError(
                f"eliminating column {j} would create {len(pos) * len(neg) + len(zer)} rows (limit {max_rows})")
        new_A = [A[zer]]
        new_b = [b[zer]]
        if len(pos) and len(neg):
            Ap = A[pos] / col[pos][:, None]
            bp = b[pos] / col[pos]
            An = A[neg] / -col[neg][:, None]
            bn = b[neg] / -col[neg]
            comb = (Ap[:, None, :] + An[None, :, :]).reshape(-1, A.shape[1])
            new_A.append(comb)
            new_b.append((bp[:, None] + bn[None, :]).ravel())
        A = np.vstack(new_A)
        b = np.concatenate(new_b)
        A[:, j] = 0.0
        A, b, empty = _normalize_rows(A, b, tol.lp_tol)
        if empty:
            return PolyhedronH.empty(len(keep_cols))
        if prune and A.shape[0] > 1:
            pr = _prune(A, b, tol)
            if pr is None:
                return PolyhedronH.empty(len(keep_cols))
            A, b = pr
    if not remaining and prune and not drop and A.shape[0] > 1:
        pr = _prune(A, b, tol)
        if pr is None:
            return PolyhedronH.empty(len(keep_cols))
        A, b = pr
    return PolyhedronH(A[:, keep_cols], b, dim=len(keep_cols))


def sum_with_column_span(P: PolyhedronH, K, tol: Tolerances = Tolerances(), max_rows=4000) -> PolyhedronH:
    """H-representation of ``P + Im K``.

    Eliminates ``kappa`` from ``A (z - K kappa) <= b`` over ``(z, kappa)``.
    """
    K = as_matrix(K, "K", rows=P.dim)
    k = K.shape[1]
    if k == 0 or not np.any(K):
        return P
    lifted = PolyhedronH(np.hstack([P.A, -P.A @ K]), P.b)
    return fm_eliminate(lifted, range(P.dim, P.dim + k), tol, max_rows)


def _window_set(assumption_blocks, a0):
    blocks = [as_matrix(B, f"assumption block {r}") for r, B in enumerate(assumption_blocks)]
    a0 = np.asarray(a0, dtype=float).ravel()
    n_a, n_d = blocks[0].shape
    for r, B in enumerate(blocks):
        if B.shape != (n_a, n_d):
            raise InputError(f"assumption block {r}: shape {B.shape}, expected {(n_a, n_d)}")
    if a0.shape[0] != n_a:
        raise InputError(f"a0: length {a0.shape[0]}, expected {n_a}")
    return PolyhedronH(np.hstack(blocks), a0), n_d, len(blocks)


def extendability_check(assumption_blocks, a0, tol: Tolerances = Tolerances(), max_rows=4000) -> bool:
    """Exact extendability test for sliding-window assumptions.

    The window set ``S = {z : [A^0 ... A^m] z <= a^0}`` is extendable iff
    ``T S ⊆ S + Im K`` where ``T`` shifts blocks up and ``K`` injects into
    the last block. The right-hand side comes from :func:`sum_with_column_span`
    and the image is handled through its preimage, so only one projection
    is needed.

    Raises
    ------
    ProjectionLimitError
        If the elimination exceeds ``max_rows``.
    """
    S, n_d, nb = _window_set(assumption_blocks, a0)
    if is_empty(S, tol):
        return True
    ops = shift_operators(n_d, nb)
    S2 = sum_with_column_span(S, ops.K_embed, tol, max_rows)
    return inclusion_h(S, PolyhedronH(S2.A @ ops.T_shift, S2.b), tol)


def constant_extension_holds(assumption_blocks, a0, tol: Tolerances = Tolerances()) -> bool:
    """Sufficient extendability test: repeating the newest sample always works.

    Checks ``S ⊆ {z : sum_{r<m} A^r u_{r+1} + A^m u_m <= a^0}``, a single
    inclusion with no projection.
    """
    S, n_d, nb = _window_set(assumption_blocks, a0)
    m = nb - 1
    blocks = np.split(S.A, nb, axis=1)
    M = np.zeros_like(S.A)
    for r in range(m):
        M[:, (r + 1) * n_d:(r + 2) * n_d] += blocks[r]
    M[:, m * n_d:] += blocks[m]
    return inclusion_h(S, PolyhedronH(M, S.b), tol)


def interval_hull(P: PolyhedronH, tol: Tolerances = Tolerances()):
    """Per-coordinate bounds ``(lo, hi)`` of ``P``; ``inf`` when unbounded."""
    lo = np.empty(P.dim)
    hi = np.empty(P.dim)
    base = P.as_lp()
    if not is_feasible(base, tol):
        raise InputError("interval_hull of an empty polyhedron")
    for j in range(P.dim):
        e = np.zeros(P.dim)
        e[j] = 1.0
        for sign, arr in ((1.0, hi), (-1.0, lo)):
            out = solve(base.with_objective(sign * e), tol, known_feasible=True)
            if out.status == UNBOUNDED:
                arr[j] = sign * np.inf
            elif out.status == OPTIMAL:
                arr[j] = sign * out.value
            else:
                raise EngineError(f"interval_hull: coordinate {j}: {out.detail}")
    return lo, hi


# -- test-scale representation conversion ----------------------------------

def h_to_v(P: PolyhedronH, tol=1e-9) -> PolyhedronV:
    """Vertices of a bounded, nonempty H-polytope by basis enumeration.

    Exponential in the number of rows; meant for small test instances.
    """
    d = P.dim
    verts = []
    for rows in combinations(range(P.n_rows), d):
        M = P.A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        z = np.linalg.solve(M, P.b[list(rows)])
        if np.all(P.A @ z <= P.b + tol):
            if not any(np.allclose(z, v, atol=1e-9) for v in verts):
                verts.append(z)
    if not verts:
        raise InputError("h_to_v: no vertices found (empty or unbounded set)")
    return PolyhedronV(np.column_stack(verts))


def v_to_h(V: PolyhedronV) -> PolyhedronH:
    """Facet description of a bounded, full-dimensional V-polytope (Qhull)."""
    from scipy.spatial import ConvexHull

    if V.G.shape[1]:
        raise InputError("v_to_h supports bounded sets only")
    pts = V.F.T
    if V.dim == 1:
        return PolyhedronH([[1.0], [-1.0]], [pts.max(), -pts.min()])
    hull = ConvexHull(pts)
    eq = hull.equations
    return PolyhedronH(eq[:, :-1], -eq[:, -1])
