import numpy as np
import pytest

from lticontracts.errors import InputError
from lticontracts.fixtures import leader_follower, leader_profile
from lticontracts.simulate import monitor, sample_admissible_inputs, simulate, trace_rows, write_trace_csv

from test_verify import pass_through


def test_first_violation_step():
    s, c = pass_through(0.5)
    d = np.zeros((12, 1))
    d[7] = 0.8
    d[9] = 0.9
    traj = simulate(s, c, d, x0=[0.0])
    rep = monitor(c, traj)
    assert rep.first_violation == 7
    assert rep.violations == 2
    assert rep.first_assumption_violation is None


def test_assumption_violation_rejected():
    s, c = pass_through(0.5)
    d = np.zeros((5, 1))
    d[3] = 2.0
    with pytest.raises(InputError, match="step 3"):
        simulate(s, c, d, x0=[0.0])
    with pytest.raises(InputError):
        simulate(s, c, np.zeros((5, 1)), x0=[5.0])  # outside X0


def test_dynamics_and_determinism():
    s, c = leader_follower()
    d, x0 = leader_profile()
    a = simulate(s, c, d, "uniform", x0=x0, seed=3)
    b = simulate(s, c, d, "uniform", x0=x0, seed=3)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.dynamics_residual(s).max() < 1e-9
    other = simulate(s, c, d, "uniform", x0=x0, seed=4)
    assert not np.array_equal(a.omega, other.omega)


def test_callable_policy():
    s, c = pass_through(1.5)
    traj = simulate(s, c, lambda k, dh, yh, rng: [0.1 * (k % 3)], x0=[0.0], horizon=6)
    np.testing.assert_allclose(traj.y[:, 0], [0.1 * (k % 3) for k in range(7)])
    with pytest.raises(InputError):
        simulate(s, c, lambda *a: [0.0], x0=[0.0])


@pytest.mark.parametrize("noise", ["uniform", "adversarial"])
def test_leader_profile_headway_kept(noise):
    s, c = leader_follower()
    d, x0 = leader_profile()
    traj = simulate(s, c, d, noise, x0=x0, seed=0)
    rep = monitor(c, traj)
    assert rep.violations == 0
    headway = traj.d[1:, 0] - traj.x[1:, 0] - 2.0 * traj.x[1:, 1]
    assert headway.min() >= -1e-9


def test_adversarial_dominates_uniform():
    s, c = leader_follower()
    d, x0 = leader_profile()
    adv = monitor(c, simulate(s, c, d, "adversarial", x0=x0)).margins.min()
    for seed in range(5):
        uni = monitor(c, simulate(s, c, d, "uniform", x0=x0, seed=seed)).margins.min()
        assert adv <= uni + 1e-12
    assert adv == pytest.approx(0.02, abs=1e-9)


def test_sample_admissible_inputs():
    s, c = leader_follower()
    rng = np.random.default_rng(0)
    d = sample_admissible_inputs(c, 30, rng)
    assert d.shape == (31, 2)
    traj = simulate(s, c, d, x0=[d[0, 0] - 10.0, 0.0], check=False)
    assert monitor(c, traj).assumption_ok.all()


def test_trace_csv_layout(tmp_path):
    s, c = pass_through(0.5)
    traj = simulate(s, c, np.zeros((3, 1)), x0=[0.0])
    rep = monitor(c, traj)
    header, rows = trace_rows(traj, rep)
    assert header == ["k", "d[0]", "x[0]", "y[0]", "margin[0]"]
    assert rows[0][-1] == "" and rows[1][-1] == "0.5"
    p = tmp_path / "t.csv"
    write_trace_csv(p, traj, rep)
    assert p.read_text().splitlines()[0] == "k,d[0],x[0],y[0],margin[0]"
