"""Robust verification for systems with bounded process and measurement noise.

The nominal system is checked against a tightened contract whose guarantee
bound is ``g0 - tau_eps``. The tightening absorbs measurement noise
(``tau_R``), the noise entering during the current window (``tau_Pe``) and
the accumulated noise memory (``tau_Pm``) truncated after ``N(eps, i)``
terms so that the neglected tail is at most ``eps``.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EngineError, InputError, PreconditionError
from .lp import OPTIMAL, LinearProgram, solve
from .model import LtiContract, PerturbationSet, PerturbedLtiSystem, nominal, validate
from .numerics import Tolerances, numerical_rank, observability_index, operator_norm, spectral_radius
from .verify import NOT_VERIFIED, UNKNOWN, VerificationReport, choose_iota, verify_with_iota

__all__ = [
    "TauTerms",
    "support",
    "max_norm",
    "t_matrix",
    "tau_R",
    "tau_P_entry",
    "tau_P_memory",
    "n_threshold",
    "optimal_n_threshold",
    "build_tau_eps",
    "tail_bound",
    "robustified_contract",
    "UnstableDiagnostic",
    "unstable_infeasibility_check",
    "verify_perturbed",
]


def support(S: PerturbationSet, b, tol: Tolerances = Tolerances()) -> float:
    """Support value ``max_{z in S} b^T z``.

    Closed forms: ellipsoid ``gamma ||H^{-1/2} b||``, V-polytope
    ``max_i (F^T b)_i``, box per-coordinate corner, singleton ``b^T v``.
    H-polytopes use an LP.
    """
    return S.support(b, tol)


def max_norm(S: PerturbationSet, tol: Tolerances = Tolerances()) -> float:
    """Upper bound on ``max_{z in S} ||z||`` (exact except for H-polytopes)."""
    return S.max_norm(tol)


def t_matrix(system, contract: LtiContract) -> np.ndarray:
    """``T = sum_r G_y^r C A^r``."""
    T = np.zeros((contract.n_g, system.n_x))
    CAr = system.C.copy()
    for r in range(contract.m + 1):
        T += contract.G_y(r) @ CAr
        CAr = CAr @ system.A
    return T


def _rows_support(S, M, tol):
    if M.shape[1] == 0:
        return np.zeros(M.shape[0])
    return np.asarray(S.support_rows(M, tol), dtype=float)


def tau_R(system: PerturbedLtiSystem, contract: LtiContract, tol: Tolerances = Tolerances()) -> np.ndarray:
    """Measurement-noise term, row ``i`` sums ``support(R, (G_y^l F)^T e_i)`` over ``l``."""
    out = np.zeros(contract.n_g)
    for r in range(contract.m + 1):
        out += _rows_support(system.R, contract.G_y(r) @ system.F, tol)
    return out


def tau_P_entry(system: PerturbedLtiSystem, contract: LtiContract, tol: Tolerances = Tolerances()) -> np.ndarray:
    """Noise injected inside the current window.

    Row ``i`` sums, over ``l = 0..m-1``, the support of ``P`` in direction
    ``E^T (sum_{r=l+1}^m G_y^r C A^{r-1-l})^T e_i``.
    """
    m = contract.m
    powers = [np.eye(system.n_x)]
    for _ in range(m):
        powers.append(powers[-1] @ system.A)
    out = np.zeros(contract.n_g)
    for l in range(m):
        M = np.zeros((contract.n_g, system.n_x))
        for r in range(l + 1, m + 1):
            M += contract.G_y(r) @ system.C @ powers[r - 1 - l]
        out += _rows_support(system.P, M @ system.E, tol)
    return out


def tau_P_memory(system: PerturbedLtiSystem, contract: LtiContract, varsigma, tol: Tolerances = Tolerances(),
                 T=None) -> np.ndarray:
    """Memory term ``support(P, E^T (A^varsigma)^T T^T e_i)`` per row."""
    if varsigma < 0:
        raise InputError("varsigma must be nonnegative")
    T = t_matrix(system, contract) if T is None else T
    M = T @ np.linalg.matrix_power(system.A, varsigma) @ system.E
    return _rows_support(system.P, M, tol)


def _threshold(t_norm, e_norm, m_p, a_n0, k_n0, n0, eps):
    if a_n0 >= 1:
        raise PreconditionError(f"||A^{n0}|| = {a_n0} is not below 1")
    if eps <= 0:
        raise InputError("eps must be positive")
    scale = t_norm * e_norm * m_p
    if scale == 0 or a_n0 == 0:
        return n0
    x = scale * k_n0 / ((1.0 - a_n0) * eps)
    val = math.ceil(n0 * math.log(x) / math.log(1.0 / a_n0))
    return max(val, n0)


def n_threshold(system: PerturbedLtiSystem, contract, eps, i, N0, norms=None, tol: Tolerances = Tolerances(),
                T=None) -> int:
    """Truncation depth ``N(eps, i)`` for one choice of ``N0``.

    ``max(ceil(N0 log_{1/||A^N0||}(||T^T e_i|| ||E|| K M_P / ((1 - ||A^N0||) eps))), N0)``
    with ``K = sum_{t<N0} ||A^t||``.

    Parameters
    ----------
    norms : sequence of float, optional
        Precomputed ``||A^k||`` for ``k = 0..N0``.
    """
    if norms is None:
        from .numerics import matrix_power_norms

        norms = matrix_power_norms(system.A, N0)
    T = t_matrix(system, contract) if T is None else T
    return _threshold(float(np.linalg.norm(T[i])), operator_norm(system.E), max_norm(system.P, tol),
                      norms[N0], float(sum(norms[:N0])), N0, eps)


class _PowerNorms:
    """Lazily extended list of ``||A^k||``."""

    def __init__(self, A):
        self.A = A
        self.P = np.eye(A.shape[0])
        self.norms = [1.0 if A.size else 0.0]

    def __getitem__(self, k):
        while len(self.norms) <= k:
            self.P = self.P @ self.A
            self.norms.append(operator_norm(self.P))
        return self.norms[k]


def _gate(system, tol):
    rho = spectral_radius(system.A)
    if not rho < 1.0 - tol.stability_margin:
        raise PreconditionError(
            f"A is not strictly stable: spectral radius {rho:.6g} >= 1 - {tol.stability_margin:g}")
    return rho


def _optimal(t_norm, e_norm, m_p, eps, pn: _PowerNorms, max_iter=10 ** 6):
    """Minimize the threshold over ``N0``; returns ``(N, N0, ||A^N0||, K)``."""
    best = None
    k_sum = 0.0
    n0 = 0
    while True:
        n0 += 1
        if n0 > max_iter:
            raise EngineError("threshold search did not terminate")
        k_sum += pn[n0 - 1]
        a = pn[n0]
        if a < 1.0:
            cand = _threshold(t_norm, e_norm, m_p, a, k_sum, n0, eps)
            if best is None or cand < best[0]:
                best = (cand, n0, a, k_sum)
        if best is not None and n0 >= best[0]:
            return best


def optimal_n_threshold(system: PerturbedLtiSystem, contract, eps, i, tol: Tolerances = Tolerances()) -> int:
    """Smallest ``N(eps, i)`` over all admissible ``N0``.

    Scans ``N0 = 1, 2, ...`` while ``N0`` does not exceed the best value so
    far; larger ``N0`` cannot give a smaller threshold because the result
    is at least ``N0``.
    """
    _gate(system, tol)
    T = t_matrix(system, contract)
    return _optimal(float(np.linalg.norm(T[i])), operator_norm(system.E), max_norm(system.P, tol), eps,
                    _PowerNorms(system.A))[0]


@dataclass
class TauTerms:
    tau_R: np.ndarray
    tau_Pe: np.ndarray
    tau_Pm: list
    N_per_row: np.ndarray
    tau_eps: np.ndarray
    epsilon: float
    T_mat: np.ndarray
    N0_per_row: np.ndarray = None
    q_per_row: np.ndarray = None
    K_per_row: np.ndarray = None
    tail_scale: np.ndarray = None


def build_tau_eps(system: PerturbedLtiSystem, contract: LtiContract, eps, tol: Tolerances = Tolerances()) -> TauTerms:
    """Assemble every tightening term with per-row truncation depths."""
    if not eps > 0:
        raise InputError("eps must be positive")
    _gate(system, tol)
    T = t_matrix(system, contract)
    e_norm = operator_norm(system.E)
    m_p = max_norm(system.P, tol)
    pn = _PowerNorms(system.A)
    n_g = contract.n_g
    Ns = np.zeros(n_g, dtype=int)
    N0s = np.zeros(n_g, dtype=int)
    qs = np.zeros(n_g)
    Ks = np.zeros(n_g)
    scale = np.zeros(n_g)
    for i in range(n_g):
        t_norm = float(np.linalg.norm(T[i]))
        Ns[i], N0s[i], qs[i], Ks[i] = _optimal(t_norm, e_norm, m_p, eps, pn)
        scale[i] = t_norm * e_norm * m_p
    tR = tau_R(system, contract, tol)
    tPe = tau_P_entry(system, contract, tol)
    tPm = []
    TA = T.copy()
    for s in range(int(Ns.max(initial=0))):
        tPm.append(_rows_support(system.P, TA @ system.E, tol))
        TA = TA @ system.A
    mem = np.array([sum(tPm[s][i] for s in range(Ns[i])) for i in range(n_g)])
    tau_eps = tR + tPe + mem + eps
    return TauTerms(tR, tPe, tPm, Ns, tau_eps, float(eps), T, N0s, qs, Ks, scale)


def tail_bound(system: PerturbedLtiSystem, tau: TauTerms, extra=None, tol: Tolerances = Tolerances()) -> np.ndarray:
    """Per-row bound on the neglected tail ``sum_{s >= N(eps,i)} tau_Pm[s][i]``.

    The first ``extra + 1`` neglected terms are computed exactly; the rest
    is bounded through ``tau_Pm[s][i] <= ||A^s|| ||E|| ||T^T e_i|| M_P`` and
    ``sum_{s >= S} ||A^s|| <= K q^{floor(S / N0)} / (1 - q)``. By default
    ``extra = max(200, 2 N0)`` so the geometric part gains at least two
    powers of ``q`` over the truncation point.
    """
    n_g = tau.T_mat.shape[0]
    out = np.zeros(n_g)
    for i in range(n_g):
        N = int(tau.N_per_row[i])
        n_extra = max(200, 2 * int(tau.N0_per_row[i])) if extra is None else int(extra)
        M = tau.T_mat[i:i + 1] @ np.linalg.matrix_power(system.A, N)
        exact = 0.0
        for _ in range(n_extra + 1):
            exact += float(_rows_support(system.P, M @ system.E, tol)[0])
            M = M @ system.A
        S = N + n_extra + 1
        q, K, n0 = tau.q_per_row[i], tau.K_per_row[i], int(tau.N0_per_row[i])
        if tau.tail_scale[i] == 0 or q == 0:
            rest = 0.0
        else:
            rest = tau.tail_scale[i] * K * q ** (S // n0) / (1.0 - q)
        out[i] = exact + rest
    return out


def robustified_contract(contract: LtiContract, tau: TauTerms) -> LtiContract:
    """Same blocks, guarantee bound ``g0 - tau_eps``."""
    t = np.asarray(tau.tau_eps if isinstance(tau, TauTerms) else tau, dtype=float)
    if t.shape[0] != contract.n_g:
        raise InputError(f"tau has length {t.shape[0]}, contract has {contract.n_g} guarantees")
    return contract.with_g0(contract.g0 - t)


@dataclass
class UnstableDiagnostic:
    verdict: str
    checks: dict = field(default_factory=dict)

    @property
    def violated(self):
        return self.verdict == "Violated"


def unstable_infeasibility_check(system: PerturbedLtiSystem, contract: LtiContract,
                                 tol: Tolerances = Tolerances()) -> UnstableDiagnostic:
    """Sufficient test that a non-strictly-stable system violates the contract.

    Returns ``Violated`` when all of the following hold, ``Inconclusive``
    otherwise: ``0 in R``; ``P`` contains a ball around the origin; ``E``
    has full row rank; some row of ``T`` is not orthogonal to an eigenvector
    of ``A`` with modulus at least ``1 - stability_margin``; the guarantee
    window is bounded in ``y`` and jointly feasible with the assumptions.
    """
    validate(system, contract)
    checks = {}
    checks["zero_in_R"] = system.R.contains(np.zeros(system.R.dim))
    checks["P_contains_ball"] = system.P.contains_origin_ball(tol)
    checks["E_full_row_rank"] = numerical_rank(system.E, tol.rank_tol) == system.n_x if system.n_x else True
    T = t_matrix(system, contract)
    vals, vecs = np.linalg.eig(system.A)
    hit = False
    for j in np.where(np.abs(vals) >= 1.0 - tol.stability_margin)[0]:
        vj = vecs[:, j]
        proj = np.abs(T @ vj)
        scale = np.linalg.norm(T, axis=1) * np.linalg.norm(vj)
        if np.any((scale > 0) & (proj > tol.rank_tol * np.maximum(scale, 1e-300))):
            hit = True
            break
    checks["T_excites_unstable_mode"] = hit

    m, n_y, n_d = contract.m, contract.n_y, contract.n_d
    Gy = np.hstack([contract.G_y(r) for r in range(m + 1)])
    ny_win = (m + 1) * n_y
    bounded = True
    cone = LinearProgram.build(np.zeros(ny_win), Gy, np.zeros(contract.n_g), bounds=[(-1, 1)] * ny_win)
    for j in range(ny_win):
        for s in (1.0, -1.0):
            c = np.zeros(ny_win)
            c[j] = s
            out = solve(cone.with_objective(c), tol, known_feasible=True)
            if out.status != OPTIMAL:
                raise EngineError(f"recession-cone LP: {out.detail}")
            if out.value > tol.lp_tol:
                bounded = False
                break
        if not bounded:
            break
    checks["guarantee_window_bounded"] = bounded
    nd_win = (m + 1) * n_d
    Aw = np.hstack([np.hstack(contract.assumption_blocks), np.zeros((contract.n_a, ny_win))])
    Gw = contract.guarantee_matrix()
    feas = solve(LinearProgram.build(np.zeros(nd_win + ny_win), np.vstack([Aw, Gw]),
                                     np.concatenate([contract.a0, contract.g0])), tol)
    checks["guarantee_window_nonempty"] = feas.status == OPTIMAL
    verdict = "Violated" if all(checks.values()) else "Inconclusive"
    return UnstableDiagnostic(verdict, checks)


def verify_perturbed(system: PerturbedLtiSystem, contract: LtiContract, eps=1e-12,
                     tol: Tolerances = Tolerances(), iota=None, threads=None) -> VerificationReport:
    """Robust verification of a perturbed system.

    Steps: strict-stability gate (with the instability diagnostic as the
    fallback), tightening terms, tightened contract, then k-induction on
    the nominal system. ``NotVerified`` results are classified as a robust
    failure when some ``theta > eps`` and as a possible artifact of the
    truncation otherwise.
    """
    t0 = time.perf_counter()
    validate(system, contract)
    if not eps > 0:
        raise InputError("eps must be positive")
    rho = spectral_radius(system.A)
    nu = observability_index(system.A, system.C, tol)
    if not rho < 1.0 - tol.stability_margin:
        diag = unstable_infeasibility_check(system, contract, tol)
        verdict = NOT_VERIFIED if diag.violated else UNKNOWN
        msgs = [f"A is not strictly stable (spectral radius {rho:.6g})"]
        if diag.violated:
            msgs.append("system violates the contract (instability diagnostic)")
        else:
            failed = [k for k, v in diag.checks.items() if not v]
            msgs.append("instability diagnostic inconclusive; failed conditions: " + ", ".join(failed))
        rep = VerificationReport(verdict, -1, nu, [], 0, time.perf_counter() - t0, msgs)
        rep.extras["unstable_checks"] = diag.checks
        rep.extras["spectral_radius"] = rho
        return rep

    tau = build_tau_eps(system, contract, eps, tol)
    robust = robustified_contract(contract, tau)
    nom = nominal(system)
    it = choose_iota(contract.m, nu) if iota is None else iota
    rep = verify_with_iota(nom, robust, it, tol, nu=nu, threads=threads)
    rep.extras.update({"tau": tau, "spectral_radius": rho, "epsilon": float(eps)})
    if rep.verdict == NOT_VERIFIED:
        vals = np.array([r.value for r in rep.theta_records])
        if np.any(vals > eps):
            rep.diagnostics.append("robust failure: some theta exceeds epsilon")
        else:
            rep.diagnostics.append("possibly an epsilon artifact: every positive theta is at most epsilon; "
                                   "retry with a smaller epsilon")
    rep.wall_time = time.perf_counter() - t0
    return rep
