"""Random instance generators shared by the test modules."""

import numpy as np

from lticontracts.model import Box, LtiContract, PerturbedLtiSystem, UnperturbedLtiSystem
from lticontracts.polyhedra import PolyhedronH


def random_stable_matrix(rng, n, rho=None):
    A = rng.standard_normal((n, n))
    r = np.max(np.abs(np.linalg.eigvals(A)))
    target = rng.uniform(0.2, 0.8) if rho is None else rho
    return A * (target / r)


def box_window_contract(n_d, n_y, m, d_bound=1.0, y_bound=5.0, rate=None):
    """Box assumptions and box guarantees on every slot of the window.

    ``rate`` adds ``|d_m - d_{m-1}| <= rate`` rows (still extendable by the
    constant continuation).
    """
    I = np.eye(n_d)
    blocks = []
    for r in range(m + 1):
        B = np.zeros((2 * n_d * (m + 1), n_d))
        B[2 * n_d * r:2 * n_d * (r + 1)] = np.vstack([I, -I])
        blocks.append(B)
    a0 = np.full(2 * n_d * (m + 1), d_bound)
    if rate is not None and m >= 1:
        extra = [np.zeros((2 * n_d, n_d)) for _ in range(m + 1)]
        extra[m] = np.vstack([I, -I])
        extra[m - 1] = np.vstack([-I, I])
        blocks = [np.vstack([b, e]) for b, e in zip(blocks, extra)]
        a0 = np.concatenate([a0, np.full(2 * n_d, rate)])
    Iy = np.eye(n_y)
    g_rows = 2 * n_y * (m + 1)
    G = [np.zeros((g_rows, n_d + n_y)) for _ in range(m + 1)]
    for r in range(m + 1):
        s = 2 * n_y * r
        G[r][s:s + n_y, n_d:] = Iy
        G[r][s + n_y:s + 2 * n_y, n_d:] = -Iy
    g0 = np.full(g_rows, y_bound)
    return LtiContract(m, tuple(blocks), a0, tuple(G), g0)


def random_unperturbed(rng, n_x=2, n_d=1, n_y=1, x0_bound=0.5, d0_bound=1.0, rho=None):
    A = random_stable_matrix(rng, n_x, rho)
    B = rng.standard_normal((n_x, n_d))
    C = rng.standard_normal((n_y, n_x))
    D = 0.2 * rng.standard_normal((n_y, n_d))
    w = np.zeros(n_x)
    v = np.zeros(n_y)
    X0 = PolyhedronH.box(np.concatenate([-x0_bound * np.ones(n_x), -d0_bound * np.ones(n_d)]),
                         np.concatenate([x0_bound * np.ones(n_x), d0_bound * np.ones(n_d)]))
    return UnperturbedLtiSystem(A, B, C, D, w, v, X0)


def random_instance(rng, m=None, n_x=None, n_d=None, n_y=None, y_bound=None):
    m = int(rng.integers(1, 3)) if m is None else m
    n_x = int(rng.integers(1, 4)) if n_x is None else n_x
    n_d = int(rng.integers(1, 3)) if n_d is None else n_d
    n_y = int(rng.integers(1, 3)) if n_y is None else n_y
    sys_ = random_unperturbed(rng, n_x, n_d, n_y)
    yb = rng.uniform(0.5, 8.0) if y_bound is None else y_bound
    rate = 0.5 if rng.uniform() < 0.5 else None
    return sys_, box_window_contract(n_d, n_y, m, 1.0, yb, rate)


def perturb(system: UnperturbedLtiSystem, rng, p_scale=0.05, r_scale=0.02):
    n_x, n_y = system.n_x, system.n_y
    E = rng.standard_normal((n_x, 1))
    F = rng.standard_normal((n_y, 1))
    P = Box([-p_scale], [p_scale])
    R = Box([-r_scale], [r_scale])
    return PerturbedLtiSystem(system.A, system.B, system.C, system.D, E, F, system.X0, P, R)


def random_hpolytope(rng, d, n_rows, radius=1.0, center=None):
    """Bounded polytope: random tangent half-spaces plus a bounding box."""
    c = np.zeros(d) if center is None else center
    N = rng.standard_normal((n_rows, d))
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    b = radius * rng.uniform(0.5, 1.0, n_rows) + N @ c
    A = np.vstack([N, np.eye(d), -np.eye(d)])
    b = np.concatenate([b, 2 * radius + c, 2 * radius - c])
    return PolyhedronH(A, b)


def box_window_inputs(contract_rate, n_d, horizon, rng, d_bound=1.0):
    """Random inputs for :func:`box_window_contract` (optionally rate-limited)."""
    if contract_rate is None:
        return rng.uniform(-d_bound, d_bound, (horizon + 1, n_d))
    d = np.zeros((horizon + 1, n_d))
    d[0] = rng.uniform(-d_bound, d_bound, n_d)
    for k in range(horizon):
        lo = np.maximum(-d_bound, d[k] - contract_rate)
        hi = np.minimum(d_bound, d[k] + contract_rate)
        d[k + 1] = rng.uniform(lo, hi)
    return d
