import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefmdp.errors import EvaluationError, SchemaError
from beliefmdp.measures import (
    FiniteMeasure,
    GroundMetric,
    integrate,
    lp_distance,
    strassen_coupling,
    sup_set_discrepancy,
    tv_distance,
)
from oracles import lp_exact, subsets


def dirac(x, metric="euclidean"):
    return FiniteMeasure.dirac(x, metric)


class TestFiniteMeasure:
    def test_close_points_merge(self):
        mu = FiniteMeasure([0.0, 1e-14, 1.0], [0.25, 0.25, 0.5])
        assert len(mu) == 2
        assert mu.weights.tolist() == [0.5, 0.5]

    def test_weights_must_sum_to_one(self):
        with pytest.raises(SchemaError):
            FiniteMeasure([0, 1], [0.5, 0.6])

    @pytest.mark.parametrize("w", [[-0.1, 1.1], [math.nan, 1.0], [math.inf, 0.0]])
    def test_bad_weights(self, w):
        with pytest.raises(SchemaError):
            FiniteMeasure([0, 1], w)

    def test_length_mismatch(self):
        with pytest.raises(SchemaError):
            FiniteMeasure([0, 1, 2], [0.5, 0.5])

    def test_unknown_metric(self):
        with pytest.raises(SchemaError):
            FiniteMeasure([0], [1.0], "chebyshev")

    def test_immutable(self):
        mu = dirac(0.0)
        with pytest.raises(AttributeError):
            mu.weights = np.array([1.0])
        with pytest.raises(ValueError):
            mu.weights[0] = 0.5

    def test_record_round_trip(self):
        mu = FiniteMeasure([[0, 1], [2, 3]], [0.3, 0.7], "l1")
        assert FiniteMeasure.from_record(mu.to_record(), "l1") == mu

    def test_bad_record(self):
        with pytest.raises(SchemaError):
            FiniteMeasure.from_record({"support": [0]})

    def test_sample_frequencies(self, rng):
        mu = FiniteMeasure([0.0, 1.0], [0.2, 0.8])
        draws = mu.sample(rng, 20_000)
        assert abs((draws == 1.0).mean() - 0.8) < 4 * math.sqrt(0.16 / 20_000)


class TestIntegrate:
    def test_linear_function(self):
        mu = FiniteMeasure([0.0, 2.0], [0.25, 0.75])
        assert integrate(lambda x: 3 * x + 1, mu) == 5.5

    def test_vector_support(self):
        mu = FiniteMeasure([[1, 2], [3, 4]], [0.5, 0.5])
        assert integrate(lambda x: x.sum(), mu) == 5.0

    def test_non_finite_integrand(self):
        mu = FiniteMeasure([0.0, 1.0], [1.0, 0.0])
        with pytest.raises(EvaluationError):
            integrate(lambda x: 1 / x if x else math.inf, mu)


class TestTotalVariation:
    def test_disjoint_diracs_at_distance_two(self):
        assert tv_distance(dirac(0.0), dirac(1.0)) == 2.0

    def test_identical(self):
        mu = FiniteMeasure([0, 1, 2], [0.2, 0.3, 0.5])
        assert tv_distance(mu, mu) == 0.0

    def test_tv_dominates_test_functions(self, rng):
        # |int f dmu - int f dnu| <= ||f||_inf * rho_TV for |f| <= 1
        xs = np.arange(5.0)
        for _ in range(50):
            p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
            mu, nu = FiniteMeasure(xs, p), FiniteMeasure(xs, q)
            f = rng.uniform(-1, 1, 5)
            lhs = abs(integrate(lambda x: f[int(x)], mu) - integrate(lambda x: f[int(x)], nu))
            assert lhs <= tv_distance(mu, nu) + 1e-15
            sign = np.sign(p - q)
            assert integrate(lambda x: sign[int(x)], mu) - integrate(lambda x: sign[int(x)], nu) == pytest.approx(tv_distance(mu, nu))

    def test_set_discrepancy_is_half_tv_for_probabilities(self, rng):
        for _ in range(20):
            p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
            assert sup_set_discrepancy(p, q) == pytest.approx(0.5 * tv_distance(FiniteMeasure(np.arange(6), p), FiniteMeasure(np.arange(6), q)))

    def test_set_discrepancy_by_enumeration(self, rng):
        for n in range(1, 9):
            d = rng.normal(size=n)
            want = max(abs(math.fsum(d[C])) for C in subsets(n))
            assert sup_set_discrepancy(d, np.zeros(n)) == want


class TestLevyProkhorov:
    def test_far_diracs(self):
        assert lp_distance(dirac(0.0), dirac(5.0)) == pytest.approx(1.0, abs=1e-9)

    def test_near_diracs(self):
        assert lp_distance(dirac(0.0), dirac(0.3)) == pytest.approx(0.3, abs=1e-9)

    def test_identical_is_zero(self):
        mu = FiniteMeasure([0, 1], [0.4, 0.6])
        assert lp_distance(mu, mu) == 0.0

    def test_mass_shift_on_far_points(self):
        mu = FiniteMeasure([0.0, 10.0], [0.5, 0.5])
        nu = FiniteMeasure([0.0, 10.0], [0.6, 0.4])
        assert lp_distance(mu, nu) == pytest.approx(0.1, abs=1e-9)

    def test_metric_mismatch(self):
        with pytest.raises(SchemaError):
            lp_distance(dirac(0.0, "l1"), dirac(0.0))

    def test_bounded_by_tv(self, rng):
        for _ in range(20):
            xs = rng.random(4)
            mu, nu = FiniteMeasure(xs, rng.dirichlet(np.ones(4))), FiniteMeasure(xs, rng.dirichlet(np.ones(4)))
            assert lp_distance(mu, nu) <= 0.5 * tv_distance(mu, nu) + 1e-9

    def test_matches_set_oracle_in_2d(self, rng):
        for _ in range(10):
            xs, ys = rng.random((3, 2)), rng.random((4, 2))
            p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
            got = lp_distance(FiniteMeasure(xs, p), FiniteMeasure(ys, q))
            assert got == pytest.approx(lp_exact(xs, p, ys, q), abs=1e-6)

    def test_triangle_inequality(self, rng):
        for _ in range(20):
            ms = [FiniteMeasure(rng.random(3), rng.dirichlet(np.ones(3))) for _ in range(3)]
            d = lambda i, j: lp_distance(ms[i], ms[j])
            assert d(0, 2) <= d(0, 1) + d(1, 2) + 3e-9

    def test_coupling_plan_respects_marginals(self):
        mu = FiniteMeasure([0.0, 1.0], [0.5, 0.5])
        nu = FiniteMeasure([0.05, 3.0], [0.7, 0.3])
        plan, unmatched = strassen_coupling(mu, nu, 0.1)
        assert np.all(plan.sum(axis=1) <= mu.weights + 1e-15)
        assert np.all(plan.sum(axis=0) <= nu.weights + 1e-15)
        assert unmatched == pytest.approx(0.5)
        assert plan[1].sum() == 0.0

    def test_strict_neighbourhood(self):
        mu, nu = dirac(0.0), dirac(0.5)
        assert strassen_coupling(mu, nu, 0.5)[1] == 1.0
        assert strassen_coupling(mu, nu, 0.5, strict=False)[1] == 0.0


finite_measures = st.integers(1, 4).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-2, 2, allow_nan=False), min_size=n, max_size=n),
        st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n),
    )
)


def _build(spec):
    xs, w = spec
    w = np.asarray(w) / math.fsum(w)
    w[-1] = 1.0 - math.fsum(w[:-1])
    return FiniteMeasure(xs, np.clip(w, 0, None))


@settings(max_examples=40, deadline=None)
@given(finite_measures, finite_measures)
def test_lp_symmetric_and_bounded(a, b):
    mu, nu = _build(a), _build(b)
    d = lp_distance(mu, nu)
    assert 0.0 <= d <= 1.0
    assert abs(d - lp_distance(nu, mu)) <= 2e-9


@settings(max_examples=40, deadline=None)
@given(finite_measures, finite_measures)
def test_tv_symmetric_and_in_range(a, b):
    mu, nu = _build(a), _build(b)
    assert tv_distance(mu, nu) == tv_distance(nu, mu)
    assert 0.0 <= tv_distance(mu, nu) <= 2.0 + 1e-12


def test_ground_metrics():
    assert GroundMetric("l1", 2)([0, 0], [1, 1]) == 2.0
    assert GroundMetric("euclidean", 2)([0, 0], [3, 4]) == 5.0
