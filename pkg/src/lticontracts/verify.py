"""k-induction verification of LTI contracts on unperturbed systems.

``theta(n, ell)`` is the worst violation of the guarantee window ending at
step ``n + 1`` over all trajectories that, on the steps ``p = n - ell``
through ``n``, obey the dynamics, the assumptions and the earlier
guarantees. When ``p = 0`` the initial set is imposed, otherwise ``x_p`` is
free. Nonpositive values on the base cases and the induction step prove
satisfaction.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EngineError, InputError, ProjectionLimitError
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, solve, solve_many
from .model import LtiContract, UnperturbedLtiSystem, validate
from .numerics import Tolerances, observability_index
from .polyhedra import constant_extension_holds, extendability_check

__all__ = [
    "VERIFIED",
    "NOT_VERIFIED",
    "UNKNOWN",
    "ThetaRecord",
    "VerificationReport",
    "ThetaLayout",
    "build_theta_lp",
    "theta",
    "theta_records",
    "check_extendability",
    "choose_iota",
    "verify_with_iota",
    "verify",
]

VERIFIED = "Verified"
NOT_VERIFIED = "NotVerified"
UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ThetaRecord:
    n: int
    ell: int
    row: int
    value: float
    lp_status: str


@dataclass
class VerificationReport:
    verdict: str
    iota: int
    nu: int
    theta_records: list
    lp_count: int
    wall_time: float
    diagnostics: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def theta_values(self) -> dict:
        """Group maxima ``{(n, ell): theta}``."""
        out = {}
        for r in self.theta_records:
            key = (r.n, r.ell)
            out[key] = max(out.get(key, -np.inf), r.value)
        return out

    @property
    def verified(self) -> bool:
        return self.verdict == VERIFIED


@dataclass(frozen=True)
class ThetaLayout:
    """Variable indexing for the program over steps ``p..n+1``."""

    p: int
    n: int
    n_d: int
    n_x: int
    n_y: int

    @property
    def steps(self):
        return self.n + 2 - self.p

    @property
    def num_vars(self):
        return self.steps * (self.n_d + self.n_x + self.n_y)

    def d(self, t):
        s = (t - self.p) * self.n_d
        return slice(s, s + self.n_d)

    def x(self, t):
        s = self.steps * self.n_d + (t - self.p) * self.n_x
        return slice(s, s + self.n_x)

    def y(self, t):
        s = self.steps * (self.n_d + self.n_x) + (t - self.p) * self.n_y
        return slice(s, s + self.n_y)


def _check_indices(contract, n, ell):
    m = contract.m
    if not (n >= ell >= m - 1):
        raise InputError(f"need n >= ell >= m - 1, got n={n}, ell={ell}, m={m}")


def _constraints(system: UnperturbedLtiSystem, contract: LtiContract, n, ell):
    _check_indices(contract, n, ell)
    m = contract.m
    p = n - ell
    L = ThetaLayout(p, n, system.n_d, system.n_x, system.n_y)
    N = L.num_vars
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []

    for k in range(m + p, n + 2):
        M = np.zeros((contract.n_a, N))
        for r in range(m + 1):
            M[:, L.d(k - m + r)] += contract.assumption_blocks[r]
        ub_rows.append(M)
        ub_rhs.append(contract.a0)
    for k in range(m + p, n + 1):
        M = np.zeros((contract.n_g, N))
        for r in range(m + 1):
            M[:, L.d(k - m + r)] += contract.G_d(r)
            M[:, L.y(k - m + r)] += contract.G_y(r)
        ub_rows.append(M)
        ub_rhs.append(contract.g0)
    if p == 0:
        X0 = system.X0
        M = np.zeros((X0.n_rows, N))
        M[:, L.x(0)] = X0.A[:, :system.n_x]
        M[:, L.d(0)] = X0.A[:, system.n_x:]
        ub_rows.append(M)
        ub_rhs.append(X0.b)
    I_x, I_y = np.eye(system.n_x), np.eye(system.n_y)
    for k in range(p, n + 1):
        M = np.zeros((system.n_x, N))
        M[:, L.x(k + 1)] = I_x
        M[:, L.x(k)] = -system.A
        M[:, L.d(k)] = -system.B
        eq_rows.append(M)
        eq_rhs.append(system.w)
    for k in range(p, n + 2):
        M = np.zeros((system.n_y, N))
        M[:, L.y(k)] = I_y
        M[:, L.x(k)] = -system.C
        M[:, L.d(k)] -= system.D
        eq_rows.append(M)
        eq_rhs.append(system.v)

    A_ub = np.vstack(ub_rows) if ub_rows else np.zeros((0, N))
    b_ub = np.concatenate(ub_rhs) if ub_rhs else np.zeros(0)
    return L, A_ub, b_ub, np.vstack(eq_rows), np.concatenate(eq_rhs)


def _objective(contract, L: ThetaLayout, row):
    m = contract.m
    c = np.zeros(L.num_vars)
    k = L.n + 1
    for r in range(m + 1):
        c[L.d(k - m + r)] += contract.G_d(r)[row]
        c[L.y(k - m + r)] += contract.G_y(r)[row]
    return c, -contract.g0[row]


def build_theta_lp(system: UnperturbedLtiSystem, contract: LtiContract, n, ell, row) -> LinearProgram:
    """Program whose optimum is the violation of guarantee ``row`` at step ``n + 1``.

    Decision vector stacks ``(d_p..d_{n+1}, x_p..x_{n+1}, y_p..y_{n+1})``
    with ``p = n - ell``.
    """
    if not 0 <= row < contract.n_g:
        raise InputError(f"row {row} out of range for {contract.n_g} guarantees")
    L, A_ub, b_ub, A_eq, b_eq = _constraints(system, contract, n, ell)
    c, off = _objective(contract, L, row)
    return LinearProgram.build(c, A_ub, b_ub, A_eq, b_eq, offset=off)


def theta_records(system, contract, n, ell, tol: Tolerances = Tolerances(), threads=None) -> list:
    """One :class:`ThetaRecord` per guarantee row for ``V_{n, ell}``.

    The constraint set is shared by all rows, so feasibility is decided
    once. Raises ``EngineError`` on any numerical failure.
    """
    L, A_ub, b_ub, A_eq, b_eq = _constraints(system, contract, n, ell)
    base = LinearProgram.build(np.zeros(L.num_vars), A_ub, b_ub, A_eq, b_eq)
    first = solve(base, tol)
    if first.status == INFEASIBLE:
        return [ThetaRecord(n, ell, i, -np.inf, INFEASIBLE) for i in range(contract.n_g)]
    if first.status != OPTIMAL:
        raise EngineError(f"theta({n},{ell}) feasibility phase: {first.status} {first.detail}")
    lps = [base.with_objective(*_objective(contract, L, i)) for i in range(contract.n_g)]
    outs = solve_many(lps, tol, known_feasible=True, threads=threads)
    recs = []
    for i, out in enumerate(outs):
        if out.status == OPTIMAL:
            recs.append(ThetaRecord(n, ell, i, float(out.value), OPTIMAL))
        elif out.status == UNBOUNDED:
            recs.append(ThetaRecord(n, ell, i, np.inf, UNBOUNDED))
        else:
            raise EngineError(f"theta({n},{ell}) row {i}: {out.status} {out.detail}")
    return recs


def theta(system, contract, n, ell, tol: Tolerances = Tolerances(), threads=None) -> float:
    """``max_i`` of the row optima; ``+inf`` if any row is unbounded and
    ``-inf`` if the premises are infeasible."""
    recs = theta_records(system, contract, n, ell, tol, threads)
    return max((r.value for r in recs), default=-np.inf)


def check_extendability(contract: LtiContract, tol: Tolerances = Tolerances(), max_rows=4000):
    """Return ``(status, note)`` with status ``True``, ``False`` or ``None`` (undecided).

    The cheap constant-extension certificate is tried first, then the exact
    projection test.
    """
    if constant_extension_holds(contract.assumption_blocks, contract.a0, tol):
        return True, "extendable (constant-extension certificate)"
    try:
        ok = extendability_check(contract.assumption_blocks, contract.a0, tol, max_rows)
    except ProjectionLimitError as exc:
        return None, f"extendability undecided: {exc}"
    if ok:
        return True, "extendable (exact projection test)"
    return False, "assumptions are not extendable"


def verify_with_iota(system: UnperturbedLtiSystem, contract: LtiContract, iota, tol: Tolerances = Tolerances(),
                     nu=None, threads=None, extendability=True) -> VerificationReport:
    """Solve ``theta(k, k)`` for ``k = m-1..iota`` and ``theta(iota+1, iota)``.

    Parameters
    ----------
    iota : int
        Induction depth, at least ``m - 1``.
    nu : int, optional
        Observability index, only recorded in the report.
    extendability : bool
        Check the extendability hypothesis first. An undecided or failed
        check yields ``Unknown`` without solving any program.
    """
    t0 = time.perf_counter()
    validate(system, contract)
    m = contract.m
    if iota < m - 1:
        raise InputError(f"iota={iota} must be at least m - 1 = {m - 1}")
    if nu is None:
        nu = observability_index(system.A, system.C, tol)
    diags = []
    if extendability:
        ok, note = check_extendability(contract, tol)
        diags.append(note)
        if not ok:
            return VerificationReport(UNKNOWN, iota, nu, [], 0, time.perf_counter() - t0, diags)
    pairs = [(k, k) for k in range(m - 1, iota + 1)] + [(iota + 1, iota)]
    records = []
    groups = 0
    try:
        for n, ell in pairs:
            records.extend(theta_records(system, contract, n, ell, tol, threads))
            groups += 1
    except EngineError as exc:
        diags.append(f"solver failure: {exc}")
        return VerificationReport(UNKNOWN, iota, nu, records, groups, time.perf_counter() - t0, diags)

    values = np.array([r.value for r in records])
    if np.all(values <= tol.lp_tol):
        verdict = VERIFIED
    else:
        verdict = NOT_VERIFIED
        diags.append("not verified (inconclusive by k-induction)")
        if np.any(np.isinf(values) & (values > 0)):
            diags.append(f"unbounded theta: iota={iota} may be below the observability frontier")
    return VerificationReport(verdict, iota, nu, records, groups, time.perf_counter() - t0, diags)


def choose_iota(m, nu) -> int:
    """Induction depth ``max(m, nu - 1)``.

    This is the smallest depth at which every program is guaranteed finite
    on observable systems with bounded assumption and guarantee sets.
    """
    return max(m, nu - 1)


def verify(system: UnperturbedLtiSystem, contract: LtiContract, tol: Tolerances = Tolerances(),
           threads=None) -> VerificationReport:
    """Verification with the induction depth chosen from the observability index."""
    nu = observability_index(system.A, system.C, tol)
    return verify_with_iota(system, contract, choose_iota(contract.m, nu), tol, nu=nu, threads=threads)
