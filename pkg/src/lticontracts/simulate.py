"""Trajectory generation and runtime monitoring of contract inequalities."""

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError
from .lp import OPTIMAL, LinearProgram, solve
from .model import LtiContract, PerturbedLtiSystem, Singleton
from .numerics import Tolerances

__all__ = [
    "NOISE_POLICIES",
    "Trajectory",
    "MonitorReport",
    "simulate",
    "monitor",
    "window_margins",
    "sample_admissible_inputs",
    "trace_rows",
    "write_trace_csv",
    "atomic_write_text",
]

NOISE_POLICIES = ("zero", "uniform", "adversarial")


@dataclass
class Trajectory:
    """Samples ``k = 0..horizon``; ``omega[k]`` drives ``x[k+1]``."""

    horizon: int
    d: np.ndarray
    x: np.ndarray
    y: np.ndarray
    omega: np.ndarray
    zeta: np.ndarray

    def dynamics_residual(self, system) -> np.ndarray:
        """``||x(k+1) - A x(k) - B d(k) - E omega(k) - w||`` for ``k < horizon``."""
        E = getattr(system, "E", np.zeros((system.n_x, 0)))
        pred = self.x[:-1] @ system.A.T + self.d[:-1] @ system.B.T + system.w
        if E.shape[1]:
            pred = pred + self.omega[:-1] @ E.T
        return np.linalg.norm(self.x[1:] - pred, axis=1)


@dataclass
class MonitorReport:
    """Per-window checks for ``k = m..horizon`` (index ``k - m``)."""

    m: int
    assumption_ok: np.ndarray
    guarantee_ok: np.ndarray
    margins: np.ndarray
    assumption_margins: np.ndarray
    first_violation: Optional[int]
    first_assumption_violation: Optional[int]

    @property
    def steps(self):
        return np.arange(self.m, self.m + len(self.guarantee_ok))

    @property
    def violations(self) -> int:
        return int(np.sum(~self.guarantee_ok))


def _noise_sets(system):
    if isinstance(system, PerturbedLtiSystem):
        return system.P, system.R, system.E, system.F
    n_x, n_y = system.A.shape[0], system.C.shape[0]
    return Singleton(np.zeros(0)), Singleton(np.zeros(0)), np.zeros((n_x, 0)), np.zeros((n_y, 0))


def _zero(S):
    return np.zeros(S.dim)


def _window(series, k, m):
    return series[k - m:k + 1]


def window_margins(blocks, rhs, window) -> np.ndarray:
    """``rhs - sum_r blocks[r] @ window[r]``."""
    acc = rhs.astype(float).copy()
    for r, B in enumerate(blocks):
        acc -= B @ window[r]
    return acc


def simulate(system, contract: LtiContract, input_policy, noise_policy="zero", x0=None, horizon=None,
             seed=None, tol: Tolerances = Tolerances(), check=True) -> Trajectory:
    """Run the closed loop.

    Parameters
    ----------
    system : PerturbedLtiSystem or UnperturbedLtiSystem
    contract : LtiContract
        Used for the online assumption check and by the adversarial policy.
    input_policy : array of shape (horizon + 1, n_d) or callable
        A callable receives ``(k, d_history, y_history, rng)`` and returns
        ``d(k)``.
    noise_policy : {"zero", "uniform", "adversarial"}
        ``uniform`` samples ``P`` and ``R`` independently per step.
        ``adversarial`` is greedy: each noise sample maximizes the influence
        on the guarantee row with the least remaining margin.
    x0 : array of shape (n_x,)
        Must satisfy ``(x0, d(0)) in X0``.
    horizon : int, optional
        Defaults to ``len(input_policy) - 1`` for arrays.
    seed : int, optional

    Raises
    ------
    InputError
        Infeasible initial state or an input window violating the
        assumptions (the message names the step).
    """
    if noise_policy not in NOISE_POLICIES:
        raise InputError(f"unknown noise policy {noise_policy!r}")
    rng = np.random.default_rng(seed)
    n_x, n_d, n_y = system.n_x, system.n_d, system.n_y
    P, R, E, F = _noise_sets(system)
    if callable(input_policy):
        if horizon is None:
            raise InputError("horizon is required with a callable input policy")
        inputs = None
    else:
        inputs = np.asarray(input_policy, dtype=float)
        if inputs.ndim != 2 or inputs.shape[1] != n_d:
            raise InputError(f"inputs must have shape (steps, {n_d}), got {inputs.shape}")
        if horizon is None:
            horizon = inputs.shape[0] - 1
        if inputs.shape[0] < horizon + 1:
            raise InputError(f"need {horizon + 1} input samples, got {inputs.shape[0]}")
    if x0 is None:
        raise InputError("an initial state x0 is required")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape[0] != n_x:
        raise InputError(f"x0 has length {x0.shape[0]}, expected {n_x}")
    if horizon < 0:
        raise InputError("horizon must be nonnegative")

    m = contract.m
    d = np.zeros((horizon + 1, n_d))
    x = np.zeros((horizon + 1, n_x))
    y = np.zeros((horizon + 1, n_y))
    om = np.zeros((horizon + 1, P.dim))
    ze = np.zeros((horizon + 1, R.dim))
    x[0] = x0
    adv = noise_policy == "adversarial"
    if adv:
        from .robustify import t_matrix

        dir_w = t_matrix(system, contract) @ E
        dir_z = sum(contract.G_y(r) for r in range(m + 1)) @ F
        sup_w = P.support_rows(dir_w, tol) if P.dim else np.zeros(contract.n_g)
        sup_z = R.support_rows(dir_z, tol) if R.dim else np.zeros(contract.n_g)
    last_margin = np.zeros(contract.n_g)

    for k in range(horizon + 1):
        if inputs is None:
            d[k] = np.asarray(input_policy(k, d[:k], y[:k], rng), dtype=float)
        else:
            d[k] = inputs[k]
        if k == 0 and check:
            z = np.concatenate([x0, d[0]])
            if not np.all(system.X0.A @ z <= system.X0.b + 1e-9):
                raise InputError("initial state is not in X0 together with d(0)")
        if check and k >= m:
            am = window_margins(contract.assumption_blocks, contract.a0, _window(d, k, m))
            if np.any(am < -1e-9):
                raise InputError(f"input violates the assumptions at step {k}")
        if noise_policy == "zero" or R.dim == 0:
            ze[k] = _zero(R)
        elif noise_policy == "uniform":
            ze[k] = R.sample(rng)
        else:
            i = int(np.argmax(sup_z - last_margin))
            ze[k] = R.maximizer(dir_z[i], tol)
        y[k] = system.C @ x[k] + system.D @ d[k] + system.v
        if R.dim:
            y[k] += F @ ze[k]
        if k >= m:
            G = contract.guarantee_blocks
            acc = contract.g0.copy()
            for r in range(m + 1):
                t = k - m + r
                acc -= G[r] @ np.concatenate([d[t], y[t]])
            last_margin = acc
        if noise_policy == "zero" or P.dim == 0:
            om[k] = _zero(P)
        elif noise_policy == "uniform":
            om[k] = P.sample(rng)
        else:
            i = int(np.argmax(sup_w - last_margin))
            om[k] = P.maximizer(dir_w[i], tol)
        if k < horizon:
            x[k + 1] = system.A @ x[k] + system.B @ d[k] + system.w
            if P.dim:
                x[k + 1] += E @ om[k]
    return Trajectory(horizon, d, x, y, om, ze)


def monitor(contract: LtiContract, traj: Trajectory, tol: Tolerances = Tolerances()) -> MonitorReport:
    """Evaluate assumptions and guarantees on every window ``k >= m``."""
    m = contract.m
    if traj.horizon < m:
        raise InputError(f"trajectory horizon {traj.horizon} is shorter than the depth {m}")
    if traj.d.shape[1] != contract.n_d or traj.y.shape[1] != contract.n_y:
        raise InputError("trajectory dimensions do not match the contract")
    K = traj.horizon + 1 - m
    dy = np.hstack([traj.d, traj.y])
    margins = np.tile(contract.g0, (K, 1)).astype(float)
    am = np.tile(contract.a0, (K, 1)).astype(float)
    for r in range(m + 1):
        margins -= dy[r:r + K] @ contract.guarantee_blocks[r].T
        am -= traj.d[r:r + K] @ contract.assumption_blocks[r].T
    g_ok = np.all(margins >= -tol.lp_tol, axis=1)
    a_ok = np.all(am >= -tol.lp_tol, axis=1)
    fv = int(np.argmax(~g_ok)) + m if not np.all(g_ok) else None
    fa = int(np.argmax(~a_ok)) + m if not np.all(a_ok) else None
    return MonitorReport(m, a_ok, g_ok, margins, am, fv, fa)


def sample_admissible_inputs(contract: LtiContract, horizon, rng, radius=10.0, tol: Tolerances = Tolerances()):
    """Random input sequence satisfying every assumption window.

    Each new sample (the first window jointly) is a random convex
    combination of two LP maximizers of random objectives over the feasible
    slice, intersected with a box of half-width ``radius`` when possible.
    Requires extendable assumptions.
    """
    m, n_d = contract.m, contract.n_d
    blocks = contract.assumption_blocks

    def pick(A_ub, b_ub, nv):
        pts = []
        for bounded in (True, False):
            bnds = [(-radius, radius)] * nv if bounded else None
            for _ in range(2):
                lp = LinearProgram.build(rng.standard_normal(nv), A_ub, b_ub, bounds=bnds)
                out = solve(lp, tol)
                if out.status == OPTIMAL:
                    pts.append(out.point)
            if len(pts) == 2:
                break
            pts = []
        if len(pts) != 2:
            lp = LinearProgram.build(np.zeros(nv), A_ub, b_ub)
            out = solve(lp, tol)
            if out.status != OPTIMAL:
                raise InputError("assumption slice is empty (assumptions not extendable?)")
            return out.point
        t = rng.uniform()
        return t * pts[0] + (1 - t) * pts[1]

    d = np.zeros((horizon + 1, n_d))
    first = pick(np.hstack(blocks), contract.a0, (m + 1) * n_d).reshape(m + 1, n_d)
    d[:min(m + 1, horizon + 1)] = first[:horizon + 1]
    for k in range(m + 1, horizon + 1):
        rhs = contract.a0 - sum(blocks[r] @ d[k - m + r] for r in range(m))
        d[k] = pick(blocks[m], rhs, n_d)
    return d


def trace_rows(traj: Trajectory, report: Optional[MonitorReport] = None):
    """Header and rows for the CSV trace."""

    def names(prefix, n):
        return [f"{prefix}[{j}]" for j in range(n)]

    n_g = report.margins.shape[1] if report is not None else 0
    header = (["k"] + names("d", traj.d.shape[1]) + names("x", traj.x.shape[1]) + names("y", traj.y.shape[1])
              + names("omega", traj.omega.shape[1]) + names("zeta", traj.zeta.shape[1]) + names("margin", n_g))
    rows = []
    for k in range(traj.horizon + 1):
        vals = [str(k)]
        for arr in (traj.d, traj.x, traj.y, traj.omega, traj.zeta):
            vals += [repr(float(v)) for v in arr[k]]
        if n_g:
            if k >= report.m:
                vals += [repr(float(v)) for v in report.margins[k - report.m]]
            else:
                vals += [""] * n_g
        rows.append(vals)
    return header, rows


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_csv(path, traj: Trajectory, report: Optional[MonitorReport] = None):
    header, rows = trace_rows(traj, report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())
