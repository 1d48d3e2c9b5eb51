import numpy as np
import pytest

from crddme.stats import (
    convergence_report,
    dkw_epsilon,
    ecdf_survival,
    mean_ci,
    pbound_curve,
)


class TestSurvival:
    def test_small_sample_definition(self):
        s = ecdf_survival([1.0, 2.0, 3.0])
        assert s.evaluate(1.5) == pytest.approx(2 / 3)
        assert s.evaluate(3.0) == 0.0
        assert s.evaluate(0.5) == 1.0

    def test_ties_share_a_step(self):
        s = ecdf_survival([2.0, 2.0, 2.0])
        assert len(s.times) == 1
        assert s.evaluate(1.999) == 1.0
        assert s.evaluate(2.0) == 0.0

    def test_monotone_right_continuous(self):
        rng = np.random.default_rng(0)
        s = ecdf_survival(rng.exponential(1.0, 500))
        t = np.linspace(0, 8, 400)
        vals = s.evaluate(t)
        assert np.all(np.diff(vals) <= 0)
        assert vals[0] == 1.0

    def test_exponential_within_dkw_band(self):
        rng = np.random.default_rng(42)
        mu = 2.5
        n = 100000
        s = ecdf_survival(rng.exponential(1 / mu, n))
        t = np.linspace(0, 3.0, 1000)
        dist = np.abs(s.evaluate(t) - np.exp(-mu * t)).max()
        assert dist < dkw_epsilon(n, alpha=0.01)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ecdf_survival([])


class TestMeanCI:
    def test_constant_samples(self):
        m, h = mean_ci([3.0, 3.0, 3.0])
        assert m == 3.0
        assert h == 0.0

    def test_two_point_formula(self):
        from scipy.stats import norm

        m, h = mean_ci([0.0, 2.0], level=0.95)
        z = norm.ppf(0.975)
        assert m == 1.0
        assert h == pytest.approx(z * np.sqrt(2.0) / np.sqrt(2))

    def test_coverage(self):
        rng = np.random.default_rng(7)
        hits = 0
        reps = 1000
        for _ in range(reps):
            x = rng.standard_normal(10000)
            m, h = mean_ci(x)
            hits += abs(m) <= h
        assert 930 <= hits <= 970

    def test_too_few(self):
        with pytest.raises(ValueError):
            mean_ci([1.0])


class TestPbound:
    def test_all_bound_at_zero(self):
        ind = np.ones((50, 3), dtype=bool)
        p, h = pbound_curve(ind)
        assert np.all(p == 1.0)
        assert np.all(h == 0.0)

    def test_half(self):
        ind = np.zeros((100, 1))
        ind[:50] = 1
        p, h = pbound_curve(ind)
        assert p[0] == 0.5
        assert h[0] == pytest.approx(1.959963984540054 * 0.05)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            pbound_curve(np.zeros((10, 0)))


class TestConvergenceReport:
    def test_synthetic_second_order(self):
        h = np.array([0.4, 0.2, 0.1, 0.05, 0.025])
        v = 1.7 + 3.0 * h**2
        rep = convergence_report(v, h)
        assert np.allclose(rep["orders"], 2.0, atol=1e-6)
        assert not rep["noise_limited"]
        assert np.allclose(rep["ratios"], 4.0, atol=1e-6)

    def test_noise_limited_flagged(self):
        h = np.array([0.4, 0.2, 0.1])
        v = np.array([1.0, 1.001, 1.0011])
        rep = convergence_report(v, h, ci_halfwidths=[0.01, 0.01, 0.01])
        assert rep["noise_limited"]
        assert np.all(np.isnan(rep["orders"]))

    def test_mixed_resolvability(self):
        h = np.array([0.4, 0.2, 0.1, 0.05])
        v = 2.0 + h**2
        rep = convergence_report(v, h, ci_halfwidths=[0.0, 0.0, 0.0, 0.004])
        # last difference (0.0075) barely exceeds its combined CI: resolvable
        assert rep["resolvable"][-1]

    def test_bad_input(self):
        with pytest.raises(ValueError):
            convergence_report([1.0], [0.1])


class TestDKW:
    def test_value(self):
        assert dkw_epsilon(10000, alpha=0.01) == pytest.approx(
            np.sqrt(np.log(200.0) / 20000.0)
        )
