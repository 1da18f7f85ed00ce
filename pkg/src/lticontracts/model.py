"""Systems, perturbation sets and LTI contracts.

A contract of depth ``m`` constrains sliding windows of the input ``d`` and
output ``y``::

    sum_r  A^r d(k-m+r)          <= a0     (assumptions)
    sum_r  G^r [d; y](k-m+r)     <= g0     (guarantees)

for every ``k >= m``. Block ``r = m`` multiplies the newest sample.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import EngineError, InputError, PreconditionError
from .lp import OPTIMAL, UNBOUNDED, LinearProgram, is_feasible, solve
from .numerics import Tolerances, as_matrix, numerical_rank
from .polyhedra import PolyhedronH, inclusion_h

__all__ = [
    "PerturbationSet",
    "Singleton",
    "Box",
    "PolytopeV",
    "PolytopeH",
    "Ellipsoid",
    "Product",
    "PerturbedLtiSystem",
    "UnperturbedLtiSystem",
    "LtiContract",
    "DimensionReport",
    "dimension_violations",
    "validate",
    "nominal",
    "to_unperturbed",
    "lift_contract",
    "refines_stepwise",
]


def _vec(v, name, length=None):
    v = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name}: non-finite entries")
    if length is not None and v.shape[0] != length:
        raise InputError(f"{name}: expected length {length}, got {v.shape[0]}")
    return v


# -- perturbation sets ------------------------------------------------------

class PerturbationSet:
    """Bounded set with closed-form or LP support function.

    Subclasses implement ``dim``, ``support``, ``maximizer``, ``max_norm``,
    ``contains``, ``contains_origin_ball`` and ``sample``.
    """

    kind = "abstract"

    def support_rows(self, Bmat, tol: Tolerances = Tolerances()) -> np.ndarray:
        """Support value for each row of ``Bmat``."""
        Bmat = np.atleast_2d(np.asarray(Bmat, dtype=float))
        return np.array([self.support(b, tol) for b in Bmat])

    def _check(self, b):
        b = np.asarray(b, dtype=float).ravel()
        if b.shape[0] != self.dim:
            raise InputError(f"direction has length {b.shape[0]}, set dimension is {self.dim}")
        return b


@dataclass(frozen=True, eq=False)
class Singleton(PerturbationSet):
    v: np.ndarray
    kind = "singleton"

    def __post_init__(self):
        object.__setattr__(self, "v", _vec(self.v, "singleton.v"))

    @property
    def dim(self):
        return self.v.shape[0]

    def support(self, b, tol=Tolerances()):
        return float(self._check(b) @ self.v)

    def support_rows(self, Bmat, tol=Tolerances()):
        return np.atleast_2d(Bmat) @ self.v if self.dim else np.zeros(np.atleast_2d(Bmat).shape[0])

    def maximizer(self, b, tol=Tolerances()):
        return self.v.copy()

    def max_norm(self, tol=Tolerances()):
        return float(np.linalg.norm(self.v))

    def contains(self, z, tol=1e-9):
        return bool(np.all(np.abs(np.asarray(z, dtype=float) - self.v) <= tol))

    def contains_origin_ball(self, tol=Tolerances()):
        return self.dim == 0

    def sample(self, rng):
        return self.v.copy()


@dataclass(frozen=True, eq=False)
class Box(PerturbationSet):
    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = _vec(self.lo, "box.lo")
        hi = _vec(self.hi, "box.hi", lo.shape[0])
        if np.any(lo > hi):
            raise InputError("box: lo must not exceed hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def support(self, b, tol=Tolerances()):
        b = self._check(b)
        return float(np.sum(np.where(b > 0, b * self.hi, b * self.lo)))

    def support_rows(self, Bmat, tol=Tolerances()):
        B = np.atleast_2d(Bmat)
        return np.sum(np.where(B > 0, B * self.hi, B * self.lo), axis=1)

    def maximizer(self, b, tol=Tolerances()):
        b = self._check(b)
        return np.where(b > 0, self.hi, np.where(b < 0, self.lo, 0.5 * (self.lo + self.hi)))

    def max_norm(self, tol=Tolerances()):
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def contains(self, z, tol=1e-9):
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.lo - tol) and np.all(z <= self.hi + tol))

    def contains_origin_ball(self, tol=Tolerances()):
        return bool(np.all(self.lo < 0) and np.all(self.hi > 0))

    def sample(self, rng):
        return rng.uniform(self.lo, self.hi)


@dataclass(frozen=True, eq=False)
class PolytopeV(PerturbationSet):
    """Convex hull of the columns of ``F``."""

    F: np.ndarray
    kind = "polytope_v"

    def __post_init__(self):
        F = as_matrix(self.F, "polytope_v.F")
        if F.shape[1] < 1:
            raise InputError("polytope_v needs at least one vertex")
        object.__setattr__(self, "F", F)

    @property
    def dim(self):
        return self.F.shape[0]

    def support(self, b, tol=Tolerances()):
        return float(np.max(self.F.T @ self._check(b)))

    def support_rows(self, Bmat, tol=Tolerances()):
        return np.max(np.atleast_2d(Bmat) @ self.F, axis=1)

    def maximizer(self, b, tol=Tolerances()):
        return self.F[:, int(np.argmax(self.F.T @ self._check(b)))].copy()

    def max_norm(self, tol=Tolerances()):
        return float(np.max(np.linalg.norm(self.F, axis=0)))

    def contains(self, z, tol=1e-9):
        n = self.F.shape[1]
        A_eq = np.vstack([self.F, np.ones((1, n))])
        b_eq = np.concatenate([np.asarray(z, dtype=float), [1.0]])
        lp = LinearProgram.build(np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * n)
        return is_feasible(lp)

    def contains_origin_ball(self, tol=Tolerances()):
        d, n = self.F.shape
        if numerical_rank(self.F - self.F[:, :1], tol.rank_tol) < d:
            return False
        # max s  s.t.  F lam = 0, 1^T lam = 1, lam >= s
        c = np.zeros(n + 1)
        c[-1] = 1.0
        A_eq = np.vstack([np.hstack([self.F, np.zeros((d, 1))]), np.concatenate([np.ones(n), [0.0]])[None, :]])
        b_eq = np.concatenate([np.zeros(d), [1.0]])
        A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
        out = solve(LinearProgram.build(c, A_ub, np.zeros(n), A_eq, b_eq), tol)
        return out.status == OPTIMAL and out.value > tol.lp_tol

    def sample(self, rng):
        w = rng.dirichlet(np.ones(self.F.shape[1]))
        return self.F @ w


@dataclass(frozen=True, eq=False)
class PolytopeH(PerturbationSet):
    """Bounded H-polytope; boundedness is checked unless certified."""

    P: PolyhedronH
    certified_bounded: bool = False
    kind = "polytope_h"

    def __post_init__(self):
        if not isinstance(self.P, PolyhedronH):
            raise InputError("polytope_h expects a PolyhedronH")
        if not self.certified_bounded:
            _check_bounded(self.P)
            object.__setattr__(self, "certified_bounded", True)

    @property
    def dim(self):
        return self.P.dim

    def _lp(self, b, tol):
        out = solve(self.P.as_lp(self._check(b)), tol)
        if out.status == UNBOUNDED:
            raise InputError("polytope_h is unbounded")
        if out.status != OPTIMAL:
            raise EngineError(f"polytope_h support LP: {out.status} {out.detail}")
        return out

    def support(self, b, tol=Tolerances()):
        return float(self._lp(b, tol).value)

    def maximizer(self, b, tol=Tolerances()):
        return self._lp(b, tol).point

    def interval_hull(self, tol=Tolerances()):
        from .polyhedra import interval_hull

        return interval_hull(self.P, tol)

    def max_norm(self, tol=Tolerances()):
        lo, hi = self.interval_hull(tol)
        return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))

    def contains(self, z, tol=1e-9):
        return bool(np.all(self.P.A @ np.asarray(z, dtype=float) <= self.P.b + tol))

    def contains_origin_ball(self, tol=Tolerances()):
        norms = np.linalg.norm(self.P.A, axis=1)
        ok = norms > 0
        if np.any(self.P.b[~ok] < 0):
            return False
        return bool(np.all(self.P.b[ok] / norms[ok] > tol.lp_tol))

    def sample(self, rng, max_tries=100000):
        lo, hi = self.interval_hull()
        for _ in range(max_tries):
            z = rng.uniform(lo, hi)
            if self.contains(z, 0.0):
                return z
        raise EngineError("rejection sampling of polytope_h failed")


def _check_bounded(P: PolyhedronH, tol=Tolerances()):
    if not is_feasible(P.as_lp(), tol):
        raise InputError("polytope_h is empty")
    cone = LinearProgram.build(np.zeros(P.dim), P.A, np.zeros(P.n_rows), bounds=[(-1, 1)] * P.dim)
    for j in range(P.dim):
        for s in (1.0, -1.0):
            e = np.zeros(P.dim)
            e[j] = s
            out = solve(cone.with_objective(e), tol, known_feasible=True)
            if out.status != OPTIMAL:
                raise EngineError(f"recession-cone LP failed: {out.detail}")
            if out.value > tol.lp_tol:
                raise InputError("polytope_h is unbounded (nontrivial recession cone)")


@dataclass(frozen=True, eq=False)
class Ellipsoid(PerturbationSet):
    """The set ``{z : z^T H z <= gamma^2}``."""

    H: np.ndarray
    gamma: float
    kind = "ellipsoid"

    def __post_init__(self):
        H = as_matrix(self.H, "ellipsoid.H")
        if H.shape[0] != H.shape[1]:
            raise InputError("ellipsoid.H must be square")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max(initial=0))):
            raise InputError("ellipsoid.H must be symmetric")
        H = 0.5 * (H + H.T)
        lam, U = np.linalg.eigh(H)
        if H.shape[0] and lam[0] <= 0:
            raise InputError("ellipsoid.H must be positive definite")
        if not self.gamma > 0:
            raise InputError("ellipsoid.gamma must be positive")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "_Hmh", (U / np.sqrt(lam)) @ U.T)

    @property
    def dim(self):
        return self.H.shape[0]

    def support(self, b, tol=Tolerances()):
        return float(self.gamma * np.linalg.norm(self._Hmh @ self._check(b)))

    def support_rows(self, Bmat, tol=Tolerances()):
        return self.gamma * np.linalg.norm(np.atleast_2d(Bmat) @ self._Hmh, axis=1)

    def maximizer(self, b, tol=Tolerances()):
        b = self._check(b)
        u = self._Hmh @ b
        nu = np.linalg.norm(u)
        if nu == 0:
            return np.zeros(self.dim)
        return self.gamma * (self._Hmh @ u) / nu

    def max_norm(self, tol=Tolerances()):
        return float(self.gamma * np.linalg.norm(self._Hmh, 2)) if self.dim else 0.0

    def contains(self, z, tol=1e-9):
        z = np.asarray(z, dtype=float)
        return bool(z @ self.H @ z <= self.gamma ** 2 + tol)

    def contains_origin_ball(self, tol=Tolerances()):
        return True

    def sample(self, rng):
        n = self.dim
        g = rng.standard_normal(n)
        g /= np.linalg.norm(g)
        r = rng.uniform() ** (1.0 / n)
        return self.gamma * r * (self._Hmh @ g)


@dataclass(frozen=True, eq=False)
class Product(PerturbationSet):
    """Cartesian product of perturbation sets, one per coordinate block."""

    blocks: Tuple[PerturbationSet, ...]
    kind = "product"

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks or not all(isinstance(s, PerturbationSet) for s in blocks):
            raise InputError("product needs at least one perturbation set")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "_splits", np.cumsum([s.dim for s in blocks])[:-1])

    @property
    def dim(self):
        return int(sum(s.dim for s in self.blocks))

    def _parts(self, b):
        return np.split(np.asarray(b, dtype=float), self._splits, axis=-1)

    def support(self, b, tol=Tolerances()):
        b = self._check(b)
        return float(sum(s.support(p, tol) for s, p in zip(self.blocks, self._parts(b))))

    def support_rows(self, Bmat, tol=Tolerances()):
        B = np.atleast_2d(Bmat)
        return sum(s.support_rows(p, tol) for s, p in zip(self.blocks, self._parts(B)))

    def maximizer(self, b, tol=Tolerances()):
        b = self._check(b)
        return np.concatenate([s.maximizer(p, tol) for s, p in zip(self.blocks, self._parts(b))])

    def max_norm(self, tol=Tolerances()):
        return float(np.sqrt(sum(s.max_norm(tol) ** 2 for s in self.blocks)))

    def contains(self, z, tol=1e-9):
        return all(s.contains(p, tol) for s, p in zip(self.blocks, self._parts(z)))

    def contains_origin_ball(self, tol=Tolerances()):
        return all(s.contains_origin_ball(tol) for s in self.blocks)

    def sample(self, rng):
        return np.concatenate([s.sample(rng) for s in self.blocks])


# -- systems ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UnperturbedLtiSystem:
    """``x+ = A x + B d + w``, ``y = C x + D d + v`` with ``(x0, d0) ∈ X0``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    w: np.ndarray
    v: np.ndarray
    X0: PolyhedronH

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        object.__setattr__(self, "w", _vec(self.w, "w"))
        object.__setattr__(self, "v", _vec(self.v, "v"))

    n_x = property(lambda s: s.A.shape[0])
    n_d = property(lambda s: s.B.shape[1])
    n_y = property(lambda s: s.C.shape[0])


@dataclass(frozen=True, eq=False)
class PerturbedLtiSystem:
    """``x+ = A x + B d + E omega + w``, ``y = C x + D d + F zeta + v``.

    ``omega ∈ P`` and ``zeta ∈ R``. The deterministic offsets ``w`` and ``v``
    default to zero.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    X0: PolyhedronH
    P: PerturbationSet
    R: PerturbationSet
    w: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in "ABCDEF":
            M = np.asarray(getattr(self, name), dtype=float)
            if M.ndim == 1 and M.size == 0:
                M = M.reshape(np.asarray(self.A).shape[0] if name == "E" else np.asarray(self.C).shape[0], 0)
            object.__setattr__(self, name, as_matrix(M, name))
        n_x, n_y = self.A.shape[0], self.C.shape[0]
        object.__setattr__(self, "w", np.zeros(n_x) if self.w is None else _vec(self.w, "w"))
        object.__setattr__(self, "v", np.zeros(n_y) if self.v is None else _vec(self.v, "v"))

    n_x = property(lambda s: s.A.shape[0])
    n_d = property(lambda s: s.B.shape[1])
    n_y = property(lambda s: s.C.shape[0])
    n_p = property(lambda s: s.E.shape[1])
    n_r = property(lambda s: s.F.shape[1])

    def is_singleton(self) -> bool:
        return isinstance(self.P, Singleton) and isinstance(self.R, Singleton)


# -- contracts --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LtiContract:
    """Sliding-window linear contract of depth ``m >= 1``.

    Depth-0 input is lifted to depth 1 by :func:`lift_contract`.
    """

    m: int
    assumption_blocks: Tuple[np.ndarray, ...]
    a0: np.ndarray
    guarantee_blocks: Tuple[np.ndarray, ...]
    g0: np.ndarray

    def __post_init__(self):
        A = tuple(as_matrix(B, f"assumption_blocks[{r}]") for r, B in enumerate(self.assumption_blocks))
        G = tuple(as_matrix(B, f"guarantee_blocks[{r}]") for r, B in enumerate(self.guarantee_blocks))
        m = int(self.m)
        if len(A) != m + 1 or len(G) != m + 1:
            raise InputError(f"depth {m} needs {m + 1} assumption and guarantee blocks, "
                             f"got {len(A)} and {len(G)}")
        a0, g0 = _vec(self.a0, "a0"), _vec(self.g0, "g0")
        if m == 0:
            A, G, m = (np.zeros_like(A[0]),) + A, (np.zeros_like(G[0]),) + G, 1
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "assumption_blocks", A)
        object.__setattr__(self, "guarantee_blocks", G)
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "g0", g0)

    n_a = property(lambda s: s.assumption_blocks[0].shape[0])
    n_d = property(lambda s: s.assumption_blocks[0].shape[1])
    n_g = property(lambda s: s.guarantee_blocks[0].shape[0])

    @property
    def n_y(self):
        return self.guarantee_blocks[0].shape[1] - self.n_d

    def G_d(self, r):
        return self.guarantee_blocks[r][:, :self.n_d]

    def G_y(self, r):
        return self.guarantee_blocks[r][:, self.n_d:]

    def with_g0(self, g0) -> "LtiContract":
        return LtiContract(self.m, self.assumption_blocks, self.a0, self.guarantee_blocks, g0)

    def assumption_window(self) -> PolyhedronH:
        """Window set over stacked ``(d_0, ..., d_m)``."""
        return PolyhedronH(np.hstack(self.assumption_blocks), self.a0)

    def guarantee_matrix(self):
        """``[G_d^0 .. G_d^m | G_y^0 .. G_y^m]`` over stacked ``(d-window, y-window)``."""
        Gd = np.hstack([self.G_d(r) for r in range(self.m + 1)])
        Gy = np.hstack([self.G_y(r) for r in range(self.m + 1)])
        return np.hstack([Gd, Gy])


def lift_contract(contract: LtiContract, m_new: int) -> LtiContract:
    """Raise the depth by prepending zero blocks (oldest slots)."""
    if m_new < contract.m:
        raise InputError("cannot lower the depth of a contract")
    k = m_new - contract.m
    zA = tuple(np.zeros_like(contract.assumption_blocks[0]) for _ in range(k))
    zG = tuple(np.zeros_like(contract.guarantee_blocks[0]) for _ in range(k))
    return LtiContract(m_new, zA + contract.assumption_blocks, contract.a0,
                       zG + contract.guarantee_blocks, contract.g0)


class DimensionReport(NamedTuple):
    n_x: int
    n_d: int
    n_y: int
    n_a: int
    n_g: int
    n_p: int
    n_r: int
    m: int


def dimension_violations(system, contract: Optional[LtiContract] = None) -> list:
    """List every dimension mismatch, naming the offending field."""
    out = []
    n_x = system.A.shape[0]
    if system.A.shape[1] != n_x:
        out.append(f"A: must be square, got {system.A.shape}")
    n_d = system.B.shape[1]
    n_y = system.C.shape[0]

    def need(name, M, shape):
        if M.shape != shape:
            out.append(f"{name}: shape {M.shape}, expected {shape}")

    need("B", system.B, (n_x, n_d))
    need("C", system.C, (n_y, n_x))
    need("D", system.D, (n_y, n_d))
    if system.w.shape[0] != n_x:
        out.append(f"w: length {system.w.shape[0]}, expected {n_x}")
    if system.v.shape[0] != n_y:
        out.append(f"v: length {system.v.shape[0]}, expected {n_y}")
    if system.X0.dim != n_x + n_d:
        out.append(f"x0: ambient dimension {system.X0.dim}, expected n_x + n_d = {n_x + n_d}")
    if isinstance(system, PerturbedLtiSystem):
        if system.E.shape[0] != n_x:
            out.append(f"E: {system.E.shape[0]} rows, expected {n_x}")
        if system.F.shape[0] != n_y:
            out.append(f"F: {system.F.shape[0]} rows, expected {n_y}")
        if system.P.dim != system.E.shape[1]:
            out.append(f"P: dimension {system.P.dim}, E has {system.E.shape[1]} columns")
        if system.R.dim != system.F.shape[1]:
            out.append(f"R: dimension {system.R.dim}, F has {system.F.shape[1]} columns")
    if contract is not None:
        n_a, n_g = contract.n_a, contract.n_g
        for r, B in enumerate(contract.assumption_blocks):
            need(f"assumption_blocks[{r}]", B, (n_a, n_d))
        if contract.a0.shape[0] != n_a:
            out.append(f"a0: length {contract.a0.shape[0]}, expected {n_a}")
        for r, B in enumerate(contract.guarantee_blocks):
            need(f"guarantee_blocks[{r}]", B, (n_g, n_d + n_y))
        if contract.g0.shape[0] != n_g:
            out.append(f"g0: length {contract.g0.shape[0]}, expected {n_g}")
    return out


def validate(system, contract: LtiContract) -> DimensionReport:
    """Check dimensions; raise ``InputError`` listing all violations."""
    bad = dimension_violations(system, contract)
    if bad:
        err = InputError("; ".join(bad))
        err.violations = bad
        raise err
    if isinstance(system, PerturbedLtiSystem):
        n_p, n_r = system.n_p, system.n_r
    else:
        n_p = n_r = 0
    return DimensionReport(system.n_x, system.n_d, system.n_y, contract.n_a, contract.n_g,
                           n_p, n_r, contract.m)


def nominal(system: PerturbedLtiSystem) -> UnperturbedLtiSystem:
    """Drop the perturbation channels ``E omega`` and ``F zeta``.

    Deterministic offsets ``w``, ``v`` are kept (zero unless set).
    """
    return UnperturbedLtiSystem(system.A, system.B, system.C, system.D, system.w.copy(),
                                system.v.copy(), system.X0)


def to_unperturbed(system: PerturbedLtiSystem) -> UnperturbedLtiSystem:
    """Fold singleton perturbations into offsets ``w += E w_bar``, ``v += F z_bar``."""
    if not system.is_singleton():
        raise PreconditionError("to_unperturbed needs singleton P and R")
    w = system.w + (system.E @ system.P.v if system.n_p else 0.0)
    v = system.v + (system.F @ system.R.v if system.n_r else 0.0)
    return UnperturbedLtiSystem(system.A, system.B, system.C, system.D, w, v, system.X0)


def refines_stepwise(C1: LtiContract, C2: LtiContract, tol: Tolerances = Tolerances()) -> bool:
    """Window-wise sufficient check of ``C1 ≼ C2``.

    True when the assumption window set of ``C2`` lies inside that of ``C1``
    and every ``(d, y)`` window meeting the guarantees of ``C1`` and the
    assumptions of ``C2`` meets the guarantees of ``C2``.
    """
    m = max(C1.m, C2.m)
    C1, C2 = lift_contract(C1, m), lift_contract(C2, m)
    if C1.n_d != C2.n_d or C1.n_y != C2.n_y:
        raise InputError("contracts have different signal dimensions")
    if not inclusion_h(C2.assumption_window(), C1.assumption_window(), tol):
        return False
    nd_win = (m + 1) * C1.n_d
    ny_win = (m + 1) * C1.n_y
    A2 = np.hstack([np.hstack(C2.assumption_blocks), np.zeros((C2.n_a, ny_win))])
    S1 = PolyhedronH(np.vstack([C1.guarantee_matrix(), A2]), np.concatenate([C1.g0, C2.a0]))
    S2 = PolyhedronH(C2.guarantee_matrix(), C2.g0, dim=nd_win + ny_win)
    return inclusion_h(S1, S2, tol)
