"""Builders for the two case studies: a leader-follower platoon and a
multi-agent formation."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .model import Box, Ellipsoid, LtiContract, PerturbedLtiSystem, Product, Singleton
from .polyhedra import PolyhedronH

__all__ = [
    "LeaderFollowerParams",
    "leader_follower",
    "leader_profile",
    "random_formation_inputs",
    "random_leader_inputs",
    "FormationParams",
    "formation",
    "complete_graph",
    "cycle_variant_graph",
    "incidence_matrix",
    "consistency_matrix",
]

KMH = 1.0 / 3.6


# -- leader-follower --------------------------------------------------------

@dataclass(frozen=True)
class LeaderFollowerParams:
    """Parameters of the adaptive-cruise follower.

    Attributes
    ----------
    dt : float
        Sampling period [s].
    h : float
        Desired time headway [s].
    a_max, a_min : float
        Leader acceleration and braking bounds [m/s^2].
    phi : float
        Bound on the velocity disturbance per step [m/s].
    init_margin : float
        Required initial slack ``p_l - p_f - h v_f`` [m].
    brake_offset : float
        Constant braking bias of the controller [m/s^2].
    """

    dt: float = 0.3
    h: float = 2.0
    a_max: float = 9.8
    a_min: float = 9.8
    phi: float = 0.29
    init_margin: float = 0.6
    brake_offset: float = 1.0

    def __post_init__(self):
        for name in ("dt", "h", "a_max", "a_min", "phi", "init_margin"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")


def leader_follower(params: LeaderFollowerParams = LeaderFollowerParams()):
    """Follower state ``x = (p_f, v_f)``, input ``d = (p_l, v_l)``, output ``y = x``.

    The controller cancels the headway error in one step
    (``[1, h] A = 0``) and brakes with a small constant bias, so the
    headway after one step equals ``h * dt * brake_offset - h * omega``.

    Returns
    -------
    (PerturbedLtiSystem, LtiContract)
    """
    dt, h = params.dt, params.h
    A = np.array([[1.0, dt], [-1.0 / h, -dt / h]])
    B = np.array([[0.0, 0.0], [1.0 / h, dt / h]])
    E = np.array([[0.0], [1.0]])
    w = np.array([0.0, -dt * params.brake_offset])
    C = np.eye(2)
    D = np.zeros((2, 2))
    F = np.zeros((2, 0))
    # (x0, d0) = (p_f, v_f, p_l, v_l):  p_l - p_f - h v_f >= init_margin
    X0 = PolyhedronH([[1.0, h, -1.0, 0.0]], [-params.init_margin])
    P = Box([-params.phi], [params.phi])
    R = Singleton(np.zeros(0))
    system = PerturbedLtiSystem(A, B, C, D, E, F, X0, P, R, w=w)

    A1 = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    A0 = np.array([[-1.0, -dt], [1.0, dt], [0.0, -1.0], [0.0, 1.0]])
    a0 = np.array([0.0, 0.0, dt * params.a_max, dt * params.a_min])
    G1 = np.zeros((1, 4))
    G0 = np.array([[-1.0, 0.0, 1.0, h]])
    g0 = np.zeros(1)
    contract = LtiContract(1, (A0, A1), a0, (G0, G1), g0)
    return system, contract


def _leader_states(acc, dt, p0, v0):
    n = len(acc)
    d = np.zeros((n + 1, 2))
    d[0] = (p0, v0)
    for k in range(n):
        d[k + 1, 0] = d[k, 0] + dt * d[k, 1]
        d[k + 1, 1] = d[k, 1] + dt * acc[k]
    return d


def leader_profile(params: LeaderFollowerParams = LeaderFollowerParams(), cruise=110.0, low=25.0,
                   phase=30.0, gap=46.0, follower_speed=80.0):
    """Reconstructed leader drive: cruise, hard sway, cruise.

    ``phase`` seconds of cruise at ``cruise`` km/h, ``phase`` seconds of
    alternating full braking down to ``low`` km/h and full acceleration
    back to ``cruise``, then cruise again (after recovering the speed).
    The follower starts ``gap`` meters behind at ``follower_speed`` km/h.

    Returns
    -------
    inputs : ndarray, shape (steps + 1, 2)
        Leader ``(p_l, v_l)`` per step.
    x0 : ndarray, shape (2,)
        Follower initial state.
    """
    dt = params.dt
    steps = int(round(3 * phase / dt))
    k1, k2 = int(round(phase / dt)), int(round(2 * phase / dt))
    v_hi, v_lo = cruise * KMH, low * KMH
    acc = np.zeros(steps)
    v = v_hi
    braking = True
    for k in range(steps):
        if k1 <= k < k2:
            if braking and v <= v_lo + 1e-12:
                braking = False
            elif not braking and v >= v_hi - 1e-12:
                braking = True
            target = v_lo if braking else v_hi
        else:
            target = v_hi
        a = np.clip((target - v) / dt, -params.a_min, params.a_max)
        acc[k] = a
        v = v + dt * a
    d = _leader_states(acc, dt, gap, v_hi)
    x0 = np.array([0.0, follower_speed * KMH])
    return d, x0


def random_leader_inputs(params: LeaderFollowerParams, horizon, rng, v_range=(0.0, 40.0)):
    """Random admissible leader trajectory and a compatible follower start.

    Accelerations are uniform in ``[-a_min, a_max]``, clipped so the speed
    stays in ``v_range``.
    """
    acc = rng.uniform(-params.a_min, params.a_max, horizon)
    v0 = rng.uniform(*v_range)
    v = v0
    for k in range(horizon):
        lo = max(-params.a_min, (v_range[0] - v) / params.dt)
        hi = min(params.a_max, (v_range[1] - v) / params.dt)
        acc[k] = min(max(acc[k], lo), hi)
        v += params.dt * acc[k]
    d = _leader_states(acc, params.dt, rng.uniform(0.0, 100.0), v0)
    v_f = rng.uniform(*v_range)
    slack = params.init_margin + rng.exponential(2.0)
    p_f = d[0, 0] - params.h * v_f - slack
    return d, np.array([p_f, v_f])


# -- formation --------------------------------------------------------------

def complete_graph(n):
    """Edges ``(i, j)`` for ``i > j``: every agent observes all lower indices."""
    if n < 2:
        raise InputError("need at least two nodes")
    return [(i, j) for i in range(2, n + 1) for j in range(1, i)]


def cycle_variant_graph(n):
    """Two directed paths from node ``n`` ... to node 1 meeting only at the ends.

    Edges ``(i+1, i)`` for ``i <= n // 2``, ``(i, i+1)`` for
    ``n // 2 + 1 <= i <= n - 1``, and ``(n, 1)``.
    """
    if n < 2:
        raise InputError("need at least two nodes")
    half = n // 2
    edges = [(i + 1, i) for i in range(1, half + 1)]
    edges += [(i, i + 1) for i in range(half + 1, n)]
    edges.append((n, 1))
    return edges


def incidence_matrix(n, edges):
    """Node-by-edge matrix with ``+1`` at the tail ``i`` and ``-1`` at the head ``j``."""
    M = np.zeros((n, len(edges)))
    for e, (i, j) in enumerate(edges):
        M[i - 1, e] += 1.0
        M[j - 1, e] -= 1.0
    return M


def consistency_matrix(n, edges, rank_tol=1e-9):
    """Square matrix ``P`` with ``ker P = Im(Inc^T)``.

    From the full SVD ``Inc^T = U S V^T``, ``P = S~ U^T`` where ``S~`` has a
    one exactly where ``S`` has a zero (including rows beyond the rank).
    """
    Inc = incidence_matrix(n, edges)
    U, s, _ = np.linalg.svd(Inc.T)
    n_e = len(edges)
    ind = np.ones(n_e)
    nz = s > rank_tol * (s[0] if s.size else 1.0)
    ind[:nz.size][nz] = 0.0
    return np.diag(ind) @ U.T


def _weakly_connected(n, edges):
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(k) for k in range(1, n + 1)}) == 1


@dataclass(frozen=True)
class FormationParams:
    """Formation of ``n`` double integrators following agent 1.

    ``graph`` lists directed edges ``(i, j)`` meaning agent ``i`` measures
    its displacement to agent ``j``. ``mu_err`` is a scalar or one value per
    edge coordinate.
    """

    n: int
    graph: Sequence
    D: int = 2
    dt: float = 0.1
    a_max: float = 1.0
    a_min: float = 1.0
    mu_diff: float = 0.1
    mu_err: object = 1.0
    omega_max: float = 0.01
    init_err: Optional[float] = None
    init_speed: float = 0.1

    @property
    def n_edges(self):
        return len(self.graph)


def formation(params: FormationParams):
    """Relative-coordinate formation model.

    State ``x = (q_2..q_n, u_2..u_n)`` with ``q_i = p_i - p_1`` and
    ``u_i = v_i - v_1``; input ``d = (a_1, delta)`` with one desired
    displacement per edge; output ``y = q``.

    Assumptions act on the newest sample: the leader acceleration lies in a
    box, every desired displacement changes by at most ``mu_diff`` per step
    (infinity norm), and the displacements are consistent. Guarantees bound
    each edge error by ``mu_err``.

    Returns
    -------
    (PerturbedLtiSystem, LtiContract)
    """
    n, Dm, dt = int(params.n), int(params.D), float(params.dt)
    edges = [tuple(int(v) for v in e) for e in params.graph]
    if n < 2:
        raise InputError("formation needs at least two agents")
    if any(not (1 <= i <= n and 1 <= j <= n) or i == j for i, j in edges):
        raise InputError("edge endpoints must be distinct nodes in 1..n")
    if not _weakly_connected(n, edges):
        raise InputError("formation graph is not weakly connected")
    if any(i == 1 for i, _ in edges):
        raise InputError("the leader (node 1) must not have outgoing edges")
    out_deg = {i: 0 for i in range(2, n + 1)}
    for i, _ in edges:
        out_deg[i] += 1
    if any(v == 0 for v in out_deg.values()):
        raise InputError("every follower needs at least one outgoing edge")
    n_f, n_e = n - 1, len(edges)
    I = np.eye(Dm)
    n_q = Dm * n_f
    n_x = 2 * n_q
    n_d = Dm + Dm * n_e

    def qi(i):  # follower i state slice inside q
        return slice((i - 2) * Dm, (i - 1) * Dm)

    def de(e):  # edge e slice inside d
        return slice(Dm + e * Dm, Dm + (e + 1) * Dm)

    A = np.zeros((n_x, n_x))
    B = np.zeros((n_x, n_d))
    A[:n_q, :n_q] = np.eye(n_q)
    A[:n_q, n_q:] = dt * np.eye(n_q)
    A[n_q:, n_q:] = np.eye(n_q)
    for e, (i, j) in enumerate(edges):
        g = 1.0 / out_deg[i]
        ri = slice(n_q + (i - 2) * Dm, n_q + (i - 1) * Dm)
        # u_i gains dt * a_i, a_i = g * sum(-(q_i - q_j - delta)/dt^2 - 2 (u_i - u_j)/dt)
        A[ri, qi(i)] += -g / dt * I
        A[ri, n_q + (i - 2) * Dm:n_q + (i - 1) * Dm] += -2.0 * g * I
        if j != 1:
            A[ri, qi(j)] += g / dt * I
            A[ri, n_q + (j - 2) * Dm:n_q + (j - 1) * Dm] += 2.0 * g * I
        B[ri, de(e)] += g / dt * I
    for i in range(2, n + 1):
        B[n_q + (i - 2) * Dm:n_q + (i - 1) * Dm, :Dm] = -dt * I
    E = np.vstack([np.zeros((n_q, n_q)), np.eye(n_q)])
    C = np.hstack([np.eye(n_q), np.zeros((n_q, n_q))])
    Dmat = np.zeros((n_q, n_d))
    F = np.zeros((n_q, 0))

    # edge-difference operator on q: (q_i - q_j) for each edge
    Q = np.zeros((Dm * n_e, n_q))
    for e, (i, j) in enumerate(edges):
        Q[e * Dm:(e + 1) * Dm, qi(i)] += I
        if j != 1:
            Q[e * Dm:(e + 1) * Dm, qi(j)] -= I
    Sel = np.zeros((Dm * n_e, n_d))
    Sel[:, Dm:] = np.eye(Dm * n_e)

    mu_err = np.broadcast_to(np.asarray(params.mu_err, dtype=float), (Dm * n_e,)).copy()
    init_err = 0.5 * mu_err if params.init_err is None else np.full(Dm * n_e, float(params.init_err))
    # X0 over (x0, d0)
    rows = np.hstack([Q, np.zeros((Dm * n_e, n_q)), -Sel])
    sp = np.hstack([np.zeros((n_q, n_q)), np.eye(n_q), np.zeros((n_q, n_d))])
    # the static input constraints also hold at k = 0
    Pc = np.kron(consistency_matrix(n, edges), I)
    d0_rows = np.vstack([np.eye(Dm, n_d), -np.eye(Dm, n_d), Pc @ Sel, -Pc @ Sel])
    d0_rhs = np.concatenate([np.full(Dm, params.a_max), np.full(Dm, params.a_min), np.zeros(2 * Dm * n_e)])
    d0_rows = np.hstack([np.zeros((d0_rows.shape[0], n_x)), d0_rows])
    X0 = PolyhedronH(np.vstack([rows, -rows, sp, -sp, d0_rows]),
                     np.concatenate([init_err, init_err, np.full(2 * n_q, params.init_speed), d0_rhs]))

    P = Product(tuple(Ellipsoid(np.eye(Dm), params.omega_max) for _ in range(n_f)))
    R = Singleton(np.zeros(0))
    system = PerturbedLtiSystem(A, B, C, Dmat, E, F, X0, P, R)

    # assumptions
    Ea = np.zeros((Dm, n_d))
    Ea[:, :Dm] = I
    new_rows, old_rows, rhs = [], [], []
    new_rows += [Ea, -Ea]
    old_rows += [np.zeros((Dm, n_d))] * 2
    rhs += [np.full(Dm, params.a_max), np.full(Dm, params.a_min)]
    new_rows += [Sel, -Sel]
    old_rows += [-Sel, Sel]
    rhs += [np.full(Dm * n_e, params.mu_diff)] * 2
    new_rows += [Pc @ Sel, -Pc @ Sel]
    old_rows += [np.zeros((Dm * n_e, n_d))] * 2
    rhs += [np.zeros(Dm * n_e)] * 2
    A1 = np.vstack(new_rows)
    A0 = np.vstack(old_rows)
    a0 = np.concatenate(rhs)

    # guarantees on the newest sample over [d; y]
    Gn = np.vstack([np.hstack([-Sel, Q]), np.hstack([Sel, -Q])])
    G0 = np.zeros_like(Gn)
    g0 = np.concatenate([mu_err, mu_err])
    contract = LtiContract(1, (A0, A1), a0, (G0, Gn), g0)
    return system, contract


def random_formation_inputs(params: FormationParams, horizon, rng, spread=1.0):
    """Random admissible formation input and a zero-error initial state.

    The desired node positions follow a random walk with per-coordinate
    steps of at most ``mu_diff / 2``, so every desired displacement
    ``delta_e = p_i - p_j`` is consistent and changes by at most
    ``mu_diff``. The leader acceleration is uniform in its box.

    Returns
    -------
    inputs : ndarray, shape (horizon + 1, n_d)
    x0 : ndarray, shape (n_x,)
    """
    n, Dm = int(params.n), int(params.D)
    edges = [tuple(int(v) for v in e) for e in params.graph]
    Inc = np.kron(incidence_matrix(n, edges), np.eye(Dm))
    step = 0.5 * params.mu_diff
    p = np.zeros((horizon + 1, n * Dm))
    p[0] = rng.uniform(-spread, spread, n * Dm)
    p[1:] = rng.uniform(-step, step, (horizon, n * Dm))
    p = np.cumsum(p, axis=0)
    acc = rng.uniform(-params.a_min, params.a_max, (horizon + 1, Dm))
    d = np.hstack([acc, p @ Inc])
    q0 = (p[0].reshape(n, Dm)[1:] - p[0, :Dm]).ravel()
    x0 = np.concatenate([q0, np.zeros_like(q0)])
    return d, x0
