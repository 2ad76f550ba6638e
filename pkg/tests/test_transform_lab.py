import math

import numpy as np
import pytest
from scipy import stats

from heavytraffic.ensemble import StationaryEnsemble, batch_means_se, concatenate, iid_se
from heavytraffic.limit_theory import Frequency, LimitLaw, random_frequencies
from heavytraffic.nsys_sim import run_stationary_nsys
from heavytraffic.stochastics import RngStream, nsys_spec, switch_spec, threeq_spec
from heavytraffic.switch_sim import run_stationary
from heavytraffic.threeq_sim import run_stationary_3q
from heavytraffic.transform_lab import (
    EmptyBoundaryError,
    Metric,
    compare_to_limit,
    decreasing_within_band,
    empirical_residual,
    estimate_L,
    estimate_M,
    ks_2samp,
    residual_params,
    ssc_report,
    wasserstein1,
)


@pytest.fixture(scope="module")
def switch_ens():
    return run_stationary(switch_spec(2, 0.2), RngStream(1), n_samples=100_000, thin=1)


@pytest.fixture(scope="module")
def threeq_ens():
    return run_stationary_3q(threeq_spec(0.2), RngStream(2), n_samples=100_000, thin=1)


@pytest.fixture(scope="module")
def nsys_ens():
    return run_stationary_nsys(nsys_spec(0.2), RngStream(3), n_samples=100_000)


def _manual(system, q, u=None, eps=0.1, **meta):
    q = np.atleast_2d(q)
    return StationaryEnsemble(system, q, np.arange(len(q)), u=u, metadata={"eps": eps, **meta})


def test_L_at_zero_is_exactly_one(switch_ens):
    est = estimate_L(switch_ens, np.zeros(4))
    assert est.value == 1 and est.std_error == 0


def test_L_single_sample():
    e = _manual("threeq", [[4, 1, 3]], eps=0.1)
    phi = np.array([-0.5, -0.25])
    theta = np.array([-0.75, -0.5, -0.25])
    est = estimate_L(e, phi)
    assert math.isclose(est.value.real, math.exp(0.1 * theta @ [4, 1, 3]))


def test_L_modulus_bounded(switch_ens):
    for f in random_frequencies("switch", 10, np.random.default_rng(0), n=2):
        assert abs(estimate_L(switch_ens, f).value) <= 1 + 1e-12


def test_switch_M_rows_sum_to_one_at_zero(switch_ens):
    Ms = estimate_M(switch_ens, np.zeros(4), se="batch")
    M = np.array([m.value.real for m in Ms]).reshape(2, 2, order="F")
    se = np.array([abs(m.std_error) for m in Ms]).reshape(2, 2, order="F")
    for i in range(2):
        assert abs(M[i].sum() - 1) <= 4 * np.sqrt((se[i] ** 2).sum()) * 2


def test_threeq_M_at_zero(threeq_ens):
    M2, M3 = estimate_M(threeq_ens, np.zeros(2), se="batch")
    assert abs(M2.value - 1) <= 4 * abs(M2.std_error)
    assert abs(M3.value - 1) <= 4 * abs(M3.std_error)


def test_nsys_M_at_zero_exact(nsys_ens):
    M1, M2 = estimate_M(nsys_ens, np.zeros(2))
    assert M1.value == 1 and M2.value == 1


def test_nsys_M_uses_indicators():
    q = np.array([[3, 0], [1, 2], [0, 0], [5, 1]])
    ind = np.array([[0, 1, 0], [1, 0, 0], [1, 1, 1], [0, 0, 0]])
    e = StationaryEnsemble("nsys", q, np.arange(4), indicators=ind, metadata={"eps": 0.5})
    phi = np.array([-1.0, 0.2])
    M1 = estimate_M(e, phi, k=0).value
    M2 = estimate_M(e, phi, k=1).value
    assert math.isclose(M1.real, np.mean(np.exp(0.5 * -0.8 * np.array([2, 0]))))
    assert math.isclose(M2.real, np.mean(np.exp(0.5 * -1.0 * np.array([3, 0]))))


def test_nsys_M_without_boundary_samples():
    e = StationaryEnsemble("nsys", [[5, 1]], [0], indicators=[[0, 0, 0]], metadata={"eps": 0.1})
    with pytest.raises(EmptyBoundaryError):
        estimate_M(e, [-1.0, 0.0], k=1)


def test_M_needs_u():
    e = _manual("switch", [[1, 0, 0, 1]], n=2)
    with pytest.raises(ValueError):
        estimate_M(e, np.zeros(4))


def test_empty_and_mismatched():
    e = StationaryEnsemble("switch", np.zeros((0, 4)), [], metadata={"eps": 0.1, "n": 2})
    with pytest.raises(ValueError):
        estimate_L(e, np.zeros(4))
    e = _manual("switch", [[1] * 9], n=3)
    with pytest.raises(ValueError):
        estimate_L(e, np.zeros(4))


def test_reduced_form_close_to_full(threeq_ens, switch_ens):
    f = random_frequencies("threeq", 1, np.random.default_rng(1))[0]
    full = estimate_M(threeq_ens, f, k=1)
    red = estimate_M(threeq_ens, f, k=1, form="reduced")
    assert abs(full.value - red.value) < 0.1
    g = random_frequencies("switch", 1, np.random.default_rng(2), n=2)[0]
    full = estimate_M(switch_ens, g, k=0)
    red = estimate_M(switch_ens, g, k=0, form="reduced")
    assert abs(full.value - red.value) < 0.1


def test_residual_at_zero_is_zero(switch_ens, nsys_ens):
    assert empirical_residual(switch_ens, np.zeros(4)).value == 0
    assert empirical_residual(nsys_ens, np.zeros(2)).value == 0


def test_residual_params_from_metadata(switch_ens, nsys_ens):
    p = residual_params(switch_ens)
    np.testing.assert_allclose(p["sigma2"], 0.4 * 0.6)
    np.testing.assert_allclose(residual_params(switch_ens, limiting=True)["sigma2"], 0.25)
    assert residual_params(nsys_ens) == {"mu": (1.0, 1.0), "gamma": 1.0}


def test_residual_with_closed_form_inputs():
    from heavytraffic.limit_theory import functional_residual

    law = LimitLaw.nsys("F3", 1.0)
    for f in random_frequencies("nsys", 10, np.random.default_rng(0)):
        L, M = law.transforms(f)
        assert abs(functional_residual("nsys", L, M, f, law.residual_params())) < 1e-12


def test_residual_band_is_linear_propagation(nsys_ens):
    f = Frequency("nsys", [-0.5 + 0.3j, -0.2])
    r = empirical_residual(nsys_ens, f, se="iid")
    p1, p2 = f.phi
    cL = (-p2 + p2**2) + 0 + (-p1 + p1**2)
    expected = abs(cL) * abs(r.L.std_error) + abs(p1 - p2) * abs(r.M[0].std_error) + abs(2 * p2) * abs(r.M[1].std_error)
    assert math.isclose(r.band, 2 * expected, rel_tol=1e-12)


def test_decreasing_within_band():
    assert decreasing_within_band([0.3, 0.2, 0.1], [0.01] * 3)
    assert decreasing_within_band([0.3, 0.31, 0.1], [0.01] * 3)
    assert not decreasing_within_band([0.1, 0.3], [0.01, 0.01])


def test_ssc_all_zero():
    e = _manual("threeq", np.zeros((5, 3), dtype=int), u=np.zeros((5, 3), dtype=int))
    rep = ssc_report(e)
    assert all(v["mean"] == 0 for m in rep.values() for v in m.values())


def test_ssc_threeq_examples():
    e = _manual("threeq", [[5, 2, 3]])
    assert ssc_report(e)["subspace"][1]["mean"] < 1e-12
    e = _manual("threeq", [[0, 2, 1]])
    assert math.isclose(ssc_report(e)["subspace"][1]["mean"], math.sqrt(3))


def test_ssc_switch_and_nsys_keys(switch_ens, nsys_ens):
    r = ssc_report(switch_ens)
    assert set(r) == {"subspace", "cone", "q"}
    assert r["subspace"][2]["mean"] <= r["cone"][2]["mean"] + 1e-12
    r = ssc_report(nsys_ens)
    assert set(r) == {"K3", "V", "q"}
    np.testing.assert_allclose(r["V"][2]["mean"], 2 * r["K3"][2]["mean"])


def test_ks_and_w1_against_scipy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.exponential(size=rng.integers(5, 400))
        y = rng.exponential(1.3, size=rng.integers(5, 400))
        if rng.random() < 0.3:
            x = np.round(x, 1)
            y = np.round(y, 1)
        assert math.isclose(ks_2samp(x, y), stats.ks_2samp(x, y, method="asymp").statistic, abs_tol=1e-12)
        assert math.isclose(wasserstein1(x, y), stats.wasserstein_distance(x, y), rel_tol=1e-10, abs_tol=1e-12)


def test_ks_self_comparison_below_critical_value():
    law = LimitLaw.nsys("F3", 1.0)
    rng = np.random.default_rng(1)
    X, Y = law.sample(10**5, rng), law.sample(10**5, rng)
    crit = 1.63 * math.sqrt(2 / 10**5)
    assert ks_2samp(X[:, 0], Y[:, 0]) < crit
    assert ks_2samp(X[:, 1], Y[:, 1]) < crit


def test_compare_to_limit_degenerate_marginal():
    law = LimitLaw.nsys("F2", 1.0)
    e = _manual("nsys", np.column_stack([np.arange(100), np.zeros(100, dtype=int)]), eps=0.02)
    rep = compare_to_limit(e, None, law, 1000, np.random.default_rng(0))
    assert rep[Metric.KS].values[1] == 0.0
    assert 0 <= rep[Metric.KS].summary <= 1
    assert np.all(rep[Metric.W1].values >= 0)
    assert rep[Metric.KS].labels == ("q1", "q2", "sum")


def test_compare_dimension_mismatch(switch_ens):
    with pytest.raises(ValueError):
        compare_to_limit(switch_ens, None, LimitLaw.nsys("F3", 1.0), 10, 0)


def test_batch_means_and_iid():
    rng = np.random.default_rng(3)
    x = rng.normal(size=10_000)
    assert math.isclose(iid_se(x), x.std(ddof=1) / 100)
    # i.i.d. data: batch means agrees with the i.i.d. formula roughly
    assert 0.6 < batch_means_se(x) / iid_se(x) < 1.4
    # strongly correlated AR(1) data: batch means is much larger
    y = np.zeros(100_000)
    for t in range(1, y.size):
        y[t] = 0.99 * y[t - 1] + rng.normal()
    assert batch_means_se(y) > 5 * iid_se(y)
    z = batch_means_se(x + 1j * x)
    assert math.isclose(z.real, z.imag)


def test_concatenate_records_seeds():
    parts = [run_stationary_3q(threeq_spec(0.3), RngStream(5, k), n_samples=10) for k in range(3)]
    merged = concatenate(parts)
    assert len(merged) == 30
    assert [r["stream_id"] for r in merged.metadata["replicas"]] == [0, 1, 2]
    with pytest.raises(ValueError):
        concatenate([])


from hypothesis import given, settings
from hypothesis import strategies as st

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=60)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(max_examples=200, deadline=None)
@given(samples, samples, st.floats(-50, 50))
def test_distance_properties(x, y, c):
    x, y = np.array(x), np.array(y)
    d = ks_2samp(x, y)
    assert 0 <= d <= 1 and math.isclose(d, ks_2samp(y, x))
    assert ks_2samp(x, x) == 0
    assert math.isclose(wasserstein1(x, y), wasserstein1(y, x), rel_tol=1e-9, abs_tol=1e-9)
    # a shift by c moves a distribution exactly |c| in W1
    assert math.isclose(wasserstein1(x, x + c), abs(c), rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(ks_2samp(x, y), stats.ks_2samp(x, y, method="asymp").statistic, abs_tol=1e-12)
