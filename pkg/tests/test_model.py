import numpy as np
import pytest

from lticontracts.errors import InputError, PreconditionError
from lticontracts.fixtures import leader_follower
from lticontracts.model import (Box, Ellipsoid, LtiContract, PerturbedLtiSystem, PolytopeH, PolytopeV, Product,
                                Singleton, lift_contract, nominal, refines_stepwise, to_unperturbed, validate)
from lticontracts.polyhedra import PolyhedronH
from lticontracts.robustify import build_tau_eps, robustified_contract

from helpers import box_window_contract


def test_validate_reports_every_violation():
    s, c = leader_follower()
    good = validate(s, c)
    assert (good.n_x, good.n_d, good.n_y, good.n_a, good.n_g, good.m) == (2, 2, 2, 4, 1, 1)
    bad = PerturbedLtiSystem(s.A, s.B[:, :1], s.C, s.D, s.E, s.F, s.X0, s.P, s.R, w=s.w)
    with pytest.raises(InputError) as err:
        validate(bad, c)
    joined = " ".join(err.value.violations)
    assert "D" in joined and "x0" in joined and "assumption_blocks" in joined


def test_contract_block_count_checked():
    with pytest.raises(InputError):
        LtiContract(2, (np.eye(1), np.eye(1)), [1.0], (np.eye(1, 2), np.eye(1, 2)), [1.0])


def test_depth_zero_is_lifted_onto_newest_slot():
    c = LtiContract(0, (np.array([[1.0]]),), [1.0], (np.array([[0.0, 1.0]]),), [2.0])
    assert c.m == 1
    np.testing.assert_array_equal(c.assumption_blocks[0], [[0.0]])
    np.testing.assert_array_equal(c.assumption_blocks[1], [[1.0]])
    np.testing.assert_array_equal(c.G_y(1), [[1.0]])


def test_lift_contract_prepends():
    _, c = leader_follower()
    L = lift_contract(c, 3)
    assert L.m == 3 and len(L.assumption_blocks) == 4
    assert not np.any(L.assumption_blocks[0]) and not np.any(L.assumption_blocks[1])
    np.testing.assert_array_equal(L.assumption_blocks[3], c.assumption_blocks[1])
    with pytest.raises(InputError):
        lift_contract(L, 1)


def test_nominal_and_to_unperturbed():
    s, _ = leader_follower()
    n = nominal(s)
    np.testing.assert_array_equal(n.w, s.w)
    with pytest.raises(PreconditionError):
        to_unperturbed(s)
    single = PerturbedLtiSystem(s.A, s.B, s.C, s.D, s.E, s.F, s.X0, Singleton([0.5]), Singleton(np.zeros(0)),
                                w=s.w)
    u = to_unperturbed(single)
    np.testing.assert_allclose(u.w, s.w + s.E @ [0.5])


def test_refinement_reflexive_and_transitive():
    c1 = box_window_contract(1, 1, 1, d_bound=2.0, y_bound=1.0)
    c2 = box_window_contract(1, 1, 1, d_bound=1.0, y_bound=2.0)
    c3 = box_window_contract(1, 1, 1, d_bound=0.5, y_bound=3.0)
    assert refines_stepwise(c1, c1)
    assert refines_stepwise(c1, c2) and refines_stepwise(c2, c3) and refines_stepwise(c1, c3)
    assert not refines_stepwise(c3, c1)


def test_robustified_refines_original():
    s, c = leader_follower()
    tau = build_tau_eps(s, c, 1e-12)
    assert refines_stepwise(robustified_contract(c, tau), c)


def test_perturbation_sets_basic():
    B = Box([-1, -2], [1, 2])
    assert B.support([1, -1]) == pytest.approx(3.0)
    assert B.max_norm() == pytest.approx(np.sqrt(5))
    with pytest.raises(InputError):
        Box([1], [0])
    V = PolytopeV([[0, 1, 0], [0, 0, 1]])
    assert V.support([1, 1]) == pytest.approx(1.0)
    assert not V.contains_origin_ball()
    H = PolytopeH(PolyhedronH.box([-1], [3]))
    assert H.support([1]) == pytest.approx(3.0)
    with pytest.raises(InputError):
        PolytopeH(PolyhedronH([[1.0, 0.0]], [1.0]))  # unbounded
    Ev = Ellipsoid(np.diag([4.0, 1.0]), 2.0)
    assert Ev.support([1, 0]) == pytest.approx(1.0)
    assert Ev.max_norm() == pytest.approx(2.0)
    with pytest.raises(InputError):
        Ellipsoid(np.diag([1.0, -1.0]), 1.0)
    prod = Product((B, Ev))
    assert prod.dim == 4
    assert prod.support([1, 0, 1, 0]) == pytest.approx(2.0)


@pytest.mark.parametrize("S", [Box([-1, -1], [1, 2]), PolytopeV([[0, 1, 0], [0, 0, 1]]),
                               Ellipsoid(np.diag([2.0, 0.5]), 0.7), Singleton([0.3, -0.2])])
def test_samples_and_maximizers_inside(S):
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert S.contains(S.sample(rng))
    b = np.array([0.4, -1.0])
    z = S.maximizer(b)
    assert S.contains(z, 1e-8)
    assert float(b @ z) == pytest.approx(S.support(b), abs=1e-9)
