"""Dense linear-algebra helpers: norms, spectral radius, ranks, observability."""

from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "Tolerances",
    "as_matrix",
    "operator_norm",
    "spectral_radius",
    "numerical_rank",
    "observability_matrix",
    "observability_index",
    "matrix_power_norms",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package.

    Attributes
    ----------
    rank_tol : float
        Relative singular-value cutoff, a singular value counts when it
        exceeds ``rank_tol * sigma_max``.
    stability_margin : float
        Slack on the spectral radius, ``A`` counts as strictly stable when
        ``rho(A) < 1 - stability_margin``.
    lp_tol : float
        Nonpositivity threshold for LP optima and inclusion tests.
    """

    rank_tol: float = 1e-9
    stability_margin: float = 1e-9
    lp_tol: float = 1e-9

    def __post_init__(self):
        if not self.rank_tol > 0:
            raise InputError("rank_tol must be positive")
        if not self.lp_tol > 0:
            raise InputError("lp_tol must be positive")
        if not self.stability_margin >= 0:
            raise InputError("stability_margin must be nonnegative")


def as_matrix(M, name="matrix", rows=None, cols=None) -> np.ndarray:
    """Convert ``M`` to a finite 2-D float array, checking its shape."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0 if rows is None else rows, 0 if cols is None else cols)
    if arr.ndim != 2:
        raise InputError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: non-finite entries")
    if rows is not None and arr.shape[0] != rows:
        raise InputError(f"{name}: expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise InputError(f"{name}: expected {cols} columns, got {arr.shape[1]}")
    return arr


def _square(A, name="A"):
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise InputError(f"{name}: expected a square matrix, got shape {A.shape}")
    return A


def operator_norm(M) -> float:
    """Spectral norm (largest singular value) of ``M``.

    Empty matrices have norm zero.
    """
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def spectral_radius(A) -> float:
    """Largest eigenvalue modulus of the square matrix ``A``."""
    A = _square(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def numerical_rank(M, rank_tol=1e-9) -> int:
    """Rank of ``M`` counting singular values above ``rank_tol * sigma_max``."""
    M = as_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def observability_matrix(A, C, depth) -> np.ndarray:
    """Stack ``[C; CA; ...; CA^depth]``."""
    A = _square(A)
    C = as_matrix(C, "C", cols=A.shape[0])
    blocks = [C]
    cur = C
    for _ in range(depth):
        cur = cur @ A
        blocks.append(cur)
    return np.vstack(blocks)


def observability_index(A, C, tol: Tolerances = Tolerances()) -> int:
    """Observability index ``nu = 1 + min{j : rank O_j = rank O_{j+1}}``.

    ``O_j`` stacks ``C, CA, ..., CA^j``. The search stops at ``j = n_x``
    (Cayley-Hamilton), so ``1 <= nu <= max(n_x, 1)``.

    Parameters
    ----------
    A : array_like, shape (n_x, n_x)
    C : array_like, shape (n_y, n_x)
    tol : Tolerances
        Only ``rank_tol`` is used.

    Returns
    -------
    int
    """
    A = _square(A)
    n_x = A.shape[0]
    C = as_matrix(C, "C", cols=n_x)
    prev = numerical_rank(C, tol.rank_tol)
    cur_block = C
    stacked = C
    for j in range(n_x):
        cur_block = cur_block @ A
        stacked = np.vstack([stacked, cur_block])
        r = numerical_rank(stacked, tol.rank_tol)
        if r == prev:
            return j + 1
        prev = r
    return max(n_x, 1)


def matrix_power_norms(A, up_to) -> list:
    """Operator norms ``[||A^0||, ||A^1||, ..., ||A^up_to||]``."""
    A = _square(A)
    if up_to < 0:
        raise InputError("up_to must be nonnegative")
    n = A.shape[0]
    if n == 0:
        return [0.0] * (up_to + 1)
    P = np.eye(n)
    out = [1.0]
    for _ in range(up_to):
        P = P @ A
        out.append(operator_norm(P))
    return out
