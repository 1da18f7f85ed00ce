"""Uniform linear-program model backed by the HiGHS solver in scipy.

Programs are stated as maximizations. A feasibility phase with a zero
objective runs first so that an empty feasible set is never confused with
an unbounded objective.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import EngineError, InputError
from .numerics import Tolerances

__all__ = [
    "LinearProgram",
    "LpOutcome",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "NUMERICAL_FAILURE",
    "solve",
    "is_feasible",
    "solve_many",
    "default_threads",
]

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
NUMERICAL_FAILURE = "NumericalFailure"


def _as_constraint(M, n, name):
    if M is None:
        return sparse.csr_matrix((0, n))
    if sparse.issparse(M):
        M = sparse.csr_matrix(M, dtype=float)
    else:
        M = np.asarray(M, dtype=float)
        if M.ndim == 1 and M.size == 0:
            M = M.reshape(0, n)
        M = sparse.csr_matrix(M)
    if M.shape[1] != n:
        raise InputError(f"{name}: expected {n} columns, got {M.shape[1]}")
    return M


def _as_rhs(b, rows, name):
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float).ravel()
    if b.shape[0] != rows:
        raise InputError(f"{name}: expected length {rows}, got {b.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise InputError(f"{name}: non-finite entries")
    return b


@dataclass(frozen=True)
class LinearProgram:
    """``max c^T x + offset`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``.

    Variables are free unless ``bounds`` is given as a list of
    ``(lo, hi)`` pairs (``None`` meaning infinite).
    """

    c: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    bounds: Optional[tuple] = None
    offset: float = 0.0

    @classmethod
    def build(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, offset=0.0):
        c = np.asarray(c, dtype=float).ravel()
        n = c.shape[0]
        A_ub = _as_constraint(A_ub, n, "A_ub")
        A_eq = _as_constraint(A_eq, n, "A_eq")
        b_ub = _as_rhs(b_ub, A_ub.shape[0], "b_ub")
        b_eq = _as_rhs(b_eq, A_eq.shape[0], "b_eq")
        if bounds is not None:
            bounds = tuple(tuple(bd) for bd in bounds)
            if len(bounds) != n:
                raise InputError(f"bounds: expected {n} pairs, got {len(bounds)}")
        return cls(c, A_ub, b_ub, A_eq, b_eq, bounds, float(offset))

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    def with_objective(self, c, offset=0.0) -> "LinearProgram":
        """Same constraints, new objective."""
        c = np.asarray(c, dtype=float).ravel()
        if c.shape[0] != self.num_vars:
            raise InputError("objective length does not match num_vars")
        return LinearProgram(c, self.A_ub, self.b_ub, self.A_eq, self.b_eq, self.bounds, float(offset))

    def max_violation(self, x) -> float:
        """Largest constraint violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        viol = 0.0
        if self.A_ub.shape[0]:
            viol = max(viol, float(np.max(self.A_ub @ x - self.b_ub, initial=0.0)))
        if self.A_eq.shape[0]:
            viol = max(viol, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if self.bounds is not None:
            for xi, (lo, hi) in zip(x, self.bounds):
                if lo is not None:
                    viol = max(viol, lo - xi)
                if hi is not None:
                    viol = max(viol, xi - hi)
        return viol


@dataclass(frozen=True)
class LpOutcome:
    """Result of :func:`solve`.

    ``value`` and ``point`` are set only for ``status == "Optimal"``.
    """

    status: str
    value: Optional[float] = None
    point: Optional[np.ndarray] = field(default=None, repr=False)
    detail: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _options(tol: Tolerances, presolve=True):
    # HiGHS rejects feasibility tolerances below 1e-10
    ftol = min(max(tol.lp_tol, 1e-10), 1e-7)
    return {
        "presolve": presolve,
        "primal_feasibility_tolerance": ftol,
        "dual_feasibility_tolerance": ftol,
    }


def _run(lp: LinearProgram, c_min, tol, presolve=True):
    bounds = lp.bounds if lp.bounds is not None else (None, None)
    kw = {}
    if lp.A_ub.shape[0]:
        kw["A_ub"], kw["b_ub"] = lp.A_ub, lp.b_ub
    if lp.A_eq.shape[0]:
        kw["A_eq"], kw["b_eq"] = lp.A_eq, lp.b_eq
    return linprog(c_min, bounds=bounds, method="highs", options=_options(tol, presolve), **kw)


def _feasibility(lp: LinearProgram, tol):
    """Return ("Infeasible"|"Feasible"|"NumericalFailure", detail)."""
    if lp.num_vars == 0:
        ok = np.all(lp.b_ub >= -tol.lp_tol) and np.all(np.abs(lp.b_eq) <= tol.lp_tol)
        return ("Feasible" if ok else INFEASIBLE), ""
    for presolve in (True, False):
        res = _run(lp, np.zeros(lp.num_vars), tol, presolve)
        if res.status == 0:
            return "Feasible", ""
        if res.status == 2 and presolve is False:
            return INFEASIBLE, res.message
    return NUMERICAL_FAILURE, f"feasibility phase: {res.message}"


def is_feasible(lp: LinearProgram, tol: Tolerances = Tolerances()) -> bool:
    """Feasibility test; raises ``EngineError`` when the solver fails."""
    st, detail = _feasibility(lp, tol)
    if st == NUMERICAL_FAILURE:
        raise EngineError(detail)
    return st == "Feasible"


def solve(lp: LinearProgram, tol: Tolerances = Tolerances(), known_feasible=False) -> LpOutcome:
    """Maximize ``lp`` in two phases.

    Parameters
    ----------
    lp : LinearProgram
    tol : Tolerances
    known_feasible : bool
        Skip the feasibility phase. Callers that solve many objectives over
        one constraint set run the feasibility phase once themselves.

    Returns
    -------
    LpOutcome
        Never raises on solver trouble; returns ``NumericalFailure`` instead.
    """
    if not known_feasible:
        st, detail = _feasibility(lp, tol)
        if st != "Feasible":
            return LpOutcome(st, detail=detail)
    if lp.num_vars == 0:
        return LpOutcome(OPTIMAL, lp.offset, np.zeros(0))
    if not np.any(lp.c):
        res = _run(lp, np.zeros(lp.num_vars), tol)
        if res.status == 0:
            return LpOutcome(OPTIMAL, lp.offset, np.asarray(res.x))
        return LpOutcome(NUMERICAL_FAILURE, detail=res.message)
    res = _run(lp, -lp.c, tol)
    if res.status == 2:
        # presolve may report "infeasible or unbounded"; the set is known
        # nonempty here, so disambiguate without presolve
        res = _run(lp, -lp.c, tol, presolve=False)
        if res.status == 2:
            return LpOutcome(NUMERICAL_FAILURE, detail=f"feasible set reported empty in phase 2: {res.message}")
    if res.status == 0:
        x = np.asarray(res.x)
        return LpOutcome(OPTIMAL, float(lp.c @ x) + lp.offset, x)
    if res.status == 3:
        return LpOutcome(UNBOUNDED, detail=res.message)
    return LpOutcome(NUMERICAL_FAILURE, detail=res.message)


THREADS_ENV = "LTICONTRACTS_THREADS"


def default_threads() -> int:
    """Worker count for independent LPs, read from ``LTICONTRACTS_THREADS``."""
    import os

    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def solve_many(lps, tol: Tolerances = Tolerances(), known_feasible=False, threads=None) -> list:
    """Solve independent programs, results in input order."""
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(lps) <= 1:
        return [solve(lp, tol, known_feasible) for lp in lps]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda lp: solve(lp, tol, known_feasible), lps))
