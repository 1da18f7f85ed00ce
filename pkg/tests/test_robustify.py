import itertools
import math

import numpy as np
import pytest

from lticontracts.errors import InputError, PreconditionError
from lticontracts.fixtures import leader_follower
from lticontracts.model import Box, Ellipsoid, LtiContract, PerturbedLtiSystem, PolytopeV, Singleton
from lticontracts.polyhedra import PolyhedronH
from lticontracts.robustify import (build_tau_eps, max_norm, n_threshold, optimal_n_threshold, support,
                                    t_matrix, tail_bound, tau_P_entry, tau_P_memory, tau_R,
                                    unstable_infeasibility_check, verify_perturbed)
from lticontracts.verify import NOT_VERIFIED, UNKNOWN, VERIFIED

from helpers import box_window_contract, perturb, random_unperturbed


def test_support_and_max_norm_examples():
    assert support(Box([-1, 0], [2, 3]), [1, -1]) == pytest.approx(2.0)
    assert support(Ellipsoid(np.eye(2), 2.0), [3, 4]) == pytest.approx(10.0)
    assert support(PolytopeV([[1, -2, 0]]), [-1]) == pytest.approx(2.0)
    assert support(Singleton([1.0, 2.0]), [1, 1]) == pytest.approx(3.0)
    assert max_norm(Box([-3], [1])) == pytest.approx(3.0)
    assert max_norm(Ellipsoid(np.diag([0.25, 4.0]), 1.0)) == pytest.approx(2.0)


def test_leader_follower_t_matrix_and_terms():
    s, c = leader_follower()
    np.testing.assert_allclose(t_matrix(s, c), [[1.0, 2.0]])
    np.testing.assert_allclose(tau_R(s, c), [0.0])
    np.testing.assert_allclose(tau_P_entry(s, c), [0.0])  # G_y^1 = 0
    np.testing.assert_allclose(tau_P_memory(s, c, 0), [0.58])
    # [1, h] A = 0 kills every older noise sample
    np.testing.assert_allclose(tau_P_memory(s, c, 1), [0.0], atol=1e-15)


def test_leader_follower_threshold():
    s, c = leader_follower()
    assert optimal_n_threshold(s, c, 1e-12, 0) == 183
    tau = build_tau_eps(s, c, 1e-12)
    assert tau.N_per_row[0] == 183
    assert tau.tau_eps[0] == pytest.approx(0.58, abs=1e-9)


def _scan_oracle(A, t_norm, e_norm, m_p, eps, max_n0=50):
    best = None
    for n0 in range(1, max_n0 + 1):
        a = np.linalg.norm(np.linalg.matrix_power(A, n0), 2)
        if a >= 1:
            continue
        K = sum(np.linalg.norm(np.linalg.matrix_power(A, t), 2) for t in range(n0))
        scale = t_norm * e_norm * m_p
        if a == 0 or scale == 0:
            cand = n0
        else:
            cand = max(n0, math.ceil(n0 * math.log(scale * K / ((1 - a) * eps)) / math.log(1 / a)))
        best = cand if best is None else min(best, cand)
    return best


@pytest.mark.parametrize("seed", range(8))
def test_threshold_matches_scan(seed):
    rng = np.random.default_rng(seed)
    s = perturb(random_unperturbed(rng, n_x=3, rho=rng.uniform(0.3, 0.7)), rng)
    c = box_window_contract(1, 1, 1)
    T = t_matrix(s, c)
    for i in range(c.n_g):
        ref = _scan_oracle(s.A, np.linalg.norm(T[i]), np.linalg.norm(s.E, 2), max_norm(s.P), 1e-9)
        got = optimal_n_threshold(s, c, 1e-9, i)
        if got <= 50:
            assert got == ref


def test_threshold_zero_matrix_and_fixed_n0():
    s, c = leader_follower()
    z = PerturbedLtiSystem(np.zeros((2, 2)), s.B, s.C, s.D, s.E, s.F, s.X0, s.P, s.R, w=s.w)
    assert optimal_n_threshold(z, c, 1e-12, 0) == 1
    assert n_threshold(s, c, 1e-12, 0, 10) >= 183
    with pytest.raises(PreconditionError):
        n_threshold(s, c, 1e-12, 0, 1)  # ||A|| > 1
    with pytest.raises(PreconditionError):
        unstable = PerturbedLtiSystem(np.eye(2), s.B, s.C, s.D, s.E, s.F, s.X0, s.P, s.R)
        optimal_n_threshold(unstable, c, 1e-12, 0)
    with pytest.raises(InputError):
        build_tau_eps(s, c, 0.0)


def test_threshold_monotone_in_eps():
    rng = np.random.default_rng(3)
    s = perturb(random_unperturbed(rng, n_x=3, rho=0.8), rng)
    c = box_window_contract(1, 1, 1)
    Ns = [optimal_n_threshold(s, c, eps, 0) for eps in (1e-12, 1e-9, 1e-6, 1e-3)]
    assert all(a >= b for a, b in zip(Ns, Ns[1:]))


def _window_effect(s, c, omegas, start):
    """Guarantee functional sum_r G_y^r y(r) from noise alone, by a forward run.

    ``omegas[j]`` enters at window-relative time ``start + j``; the window
    is slots ``0..m``.
    """
    m = c.m
    x = np.zeros(s.n_x)
    val = np.zeros(c.n_g)
    t0 = min(start, 0)
    k = t0
    ys = {}
    while k <= m:
        if k >= 0:
            ys[k] = s.C @ x
        j = k - start
        om = omegas[j] if 0 <= j < len(omegas) else np.zeros(s.n_p)
        x = s.A @ x + s.E @ om
        k += 1
    for r in range(m + 1):
        val += c.G_y(r) @ ys[r]
    return val


@pytest.mark.parametrize("seed", range(4))
def test_entry_term_brute_force_depth2(seed):
    rng = np.random.default_rng(seed)
    s = perturb(random_unperturbed(rng, n_x=2), rng, p_scale=0.1)
    c = box_window_contract(1, 1, 2)
    lo, hi = s.P.lo, s.P.hi
    verts = [np.array(v) for v in itertools.product(*zip(lo, hi))]
    best = np.full(c.n_g, -np.inf)
    for w0, w1 in itertools.product(verts, verts):
        best = np.maximum(best, _window_effect(s, c, [w0, w1], 0))
    np.testing.assert_allclose(tau_P_entry(s, c), best, atol=1e-12)


@pytest.mark.parametrize("varsigma", [0, 1, 4])
def test_memory_term_brute_force(varsigma):
    rng = np.random.default_rng(10 + varsigma)
    s = perturb(random_unperturbed(rng, n_x=3), rng, p_scale=0.2)
    c = box_window_contract(1, 1, 1)
    best = np.full(c.n_g, -np.inf)
    for v in (s.P.lo, s.P.hi):
        best = np.maximum(best, _window_effect(s, c, [v], -1 - varsigma))
    np.testing.assert_allclose(tau_P_memory(s, c, varsigma), best, atol=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_tail_bound_below_eps(seed):
    rng = np.random.default_rng(seed)
    s = perturb(random_unperturbed(rng, n_x=3, rho=rng.uniform(0.5, 0.95)), rng)
    c = box_window_contract(1, 1, 1)
    for eps in (1e-6, 1e-10):
        tau = build_tau_eps(s, c, eps)
        assert np.all(tail_bound(s, tau) <= eps)


def _integrator(guard_y=True):
    X0 = PolyhedronH.box([-0.1, -1], [0.1, 1])
    s = PerturbedLtiSystem([[1.0]], [[0.0]], [[1.0]], [[0.0]], [[1.0]], np.zeros((1, 0)), X0,
                           Box([-0.1], [0.1]), Singleton(np.zeros(0)))
    if guard_y:
        G = np.array([[0.0, 1.0], [0.0, -1.0]])
        gb = (np.vstack([G, np.zeros((2, 2))]), np.vstack([np.zeros((2, 2)), G]))
    else:
        G = np.array([[1.0, 0.0], [-1.0, 0.0]])
        gb = (np.zeros((2, 2)), G)
    c = LtiContract(1, (np.zeros((2, 1)), np.array([[1.0], [-1.0]])), [1.0, 1.0], gb,
                    np.ones(4) if guard_y else np.ones(2))
    return s, c


def test_unstable_band_is_violated():
    s, c = _integrator()
    diag = unstable_infeasibility_check(s, c)
    assert diag.violated, diag.checks
    rep = verify_perturbed(s, c)
    assert rep.verdict == NOT_VERIFIED and rep.iota == -1


def test_unstable_without_output_coupling_inconclusive():
    s, c = _integrator(guard_y=False)
    diag = unstable_infeasibility_check(s, c)
    assert not diag.violated
    assert not diag.checks["T_excites_unstable_mode"]
    assert verify_perturbed(s, c).verdict == UNKNOWN


def test_verify_perturbed_leader_follower():
    s, c = leader_follower()
    rep = verify_perturbed(s, c, 1e-12)
    assert rep.verdict == VERIFIED
    assert rep.extras["tau"].N_per_row[0] == 183


def test_robust_failure_classified():
    s, c = leader_follower()
    rep = verify_perturbed(s, c.with_g0([-1.0]), 1e-12)
    assert rep.verdict == NOT_VERIFIED
    assert any("robust failure" in d for d in rep.diagnostics)
