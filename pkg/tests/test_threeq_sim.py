import numpy as np
import pytest

from heavytraffic.ensemble import batch_means_se
from heavytraffic.geometry import project_subspace
from heavytraffic.stochastics import ArrivalFamily, ArrivalKind, RngStream, threeq_spec
from heavytraffic.threeq_sim import ThreeQState, check_capacity_3q, run_stationary_3q, step_3q, threeq_maxweight


@pytest.mark.parametrize(
    "q, s",
    [((5, 1, 1), (1, 0, 0)), ((2, 1, 1), (0, 1, 1)), ((1, 0, 0), (1, 0, 0)), ((0, 0, 0), (0, 1, 1))],
)
def test_schedule_rule(q, s):
    assert threeq_maxweight(q) == s


def test_schedule_is_maxweight():
    rng = np.random.default_rng(0)
    for q in rng.integers(0, 10, size=(2000, 3)):
        s = np.array(threeq_maxweight(q))
        assert s @ q == max(q[0], q[1] + q[2])


def test_step_keeps_u1_zero():
    rng = np.random.default_rng(1)
    for _ in range(5000):
        q = rng.integers(0, 3, 3)
        a = rng.integers(0, 2, 3)
        nxt, u = step_3q(ThreeQState(q), a)
        assert u[0] == 0
        assert nxt.q @ u == 0
        np.testing.assert_array_equal(nxt.q, q + a - np.array(threeq_maxweight(q)) + u)


def test_capacity():
    with pytest.raises(ValueError):
        check_capacity_3q([0.5, 0.5, 0.4])


def test_zero_arrivals():
    fam = ArrivalFamily(ArrivalKind.DETERMINISTIC, [0, 0, 0])
    e = run_stationary_3q(threeq_spec(0.5), 0, n_samples=20, burn_in=5, thin=1, family=fam)
    assert not e.q.any()


def test_unused_service_identities():
    eps = 0.1
    e = run_stationary_3q(threeq_spec(eps), RngStream(3), n_samples=300_000, thin=1)
    assert not e.u[:, 0].any()
    assert np.all(np.sum(e.q * e.u, axis=1) == 0)
    for k in (1, 2):
        x = e.u[:, k].astype(float)
        assert abs(x.mean() - eps) <= 4 * batch_means_se(x)


def test_perp_formula_on_ensemble():
    e = run_stationary_3q(threeq_spec(0.2), RngStream(4), n_samples=1000)
    q = e.q.astype(float)
    expected = ((q[:, 1] + q[:, 2] - q[:, 0]) / 3)[:, None] * np.array([-1.0, 1.0, 1.0])
    np.testing.assert_allclose(project_subspace(q).x_perp, expected, atol=1e-10)


def test_asymmetric_nu():
    e = run_stationary_3q(threeq_spec(0.2, nu=(0.3, 0.7, 0.7)), RngStream(5), n_samples=2000)
    assert e.metadata["nu"] == [0.3, 0.7, 0.7]
