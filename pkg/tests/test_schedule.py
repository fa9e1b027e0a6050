"""Schedule coefficients against quadrature and closed-form oracles."""

import numpy as np
import pytest

from bridgelab.schedule import NoiseSchedule


def quadrature_sigma2(schedule: NoiseSchedule, t: float, n: int = 20000) -> float:
    """Independent oracle: trapezoid integration of g^2(tau) = c k^(2 tau)."""
    taus = np.linspace(0.0, t, n + 1)
    g2 = schedule.c * schedule.k ** (2.0 * taus)
    return float(np.trapezoid(g2, taus))


class TestSigma2:
    def test_zero_at_origin(self):
        assert NoiseSchedule().sigma2(0.0) == 0.0

    def test_total_variance_matches_quadrature_oracle(self):
        sch = NoiseSchedule()
        # frozen from the quadrature oracle at defaults c=0.40, k=2.6
        assert sch.sigma2(1.0) == pytest.approx(1.20564, abs=1e-5)
        assert sch.sigma2(1.0) == pytest.approx(quadrature_sigma2(sch, 1.0), rel=1e-7)

    def test_midpoint_matches_quadrature_oracle(self):
        sch = NoiseSchedule()
        assert sch.sigma2(0.5) == pytest.approx(0.33490, abs=1e-5)
        assert sch.sigma2(0.5) == pytest.approx(quadrature_sigma2(sch, 0.5), rel=1e-7)

    def test_quadrature_equivalence_on_grid(self):
        sch = NoiseSchedule()
        for t in np.linspace(0.01, 1.0, 100):
            closed = sch.sigma2(float(t))
            numeric = quadrature_sigma2(sch, float(t))
            assert abs(closed - numeric) / closed < 1e-6

    def test_strictly_increasing(self):
        sch = NoiseSchedule()
        values = [sch.sigma2(float(t)) for t in np.linspace(0.0, 1.0, 200)]
        assert np.all(np.diff(values) > 0)

    def test_domain_errors(self):
        sch = NoiseSchedule()
        with pytest.raises(ValueError):
            sch.sigma2(-0.1)
        with pytest.raises(ValueError):
            sch.sigma2(1.1)


class TestCoefficients:
    def test_endpoint_t1(self):
        co = NoiseSchedule().coefficients(1.0)
        assert co.w_x0 == 0.0
        assert co.w_x1 == 1.0
        assert co.var_marginal == 0.0

    def test_endpoint_t0(self):
        co = NoiseSchedule().coefficients(0.0)
        assert co.w_x0 == 1.0
        assert co.w_x1 == 0.0
        assert co.var_marginal == 0.0

    def test_midpoint_weights_closed_form(self):
        # w_x0 = (k^2 - k^(2t)) / (k^2 - 1) for the VE schedule
        sch = NoiseSchedule()
        co = sch.coefficients(0.5)
        k = sch.k
        assert co.w_x0 == pytest.approx((k**2 - k) / (k**2 - 1), rel=1e-12)
        assert co.w_x0 == pytest.approx(0.72222, abs=1e-5)
        assert co.w_x1 == pytest.approx(0.27778, abs=1e-5)

    def test_midpoint_variance(self):
        # frozen from the moment-matching oracle (see test_sampler composition)
        co = NoiseSchedule().coefficients(0.5)
        assert co.var_marginal == pytest.approx(0.24187, abs=1e-4)

    def test_variance_splits_exactly(self):
        sch = NoiseSchedule()
        for t in np.linspace(0.0, 1.0, 50):
            co = sch.coefficients(float(t))
            assert co.sigma2_t + co.bar_sigma2_t == co.sigma2_1
            assert co.w_x0 + co.w_x1 == pytest.approx(1.0, abs=1e-15)
            assert co.alpha_t == 1.0 and co.bar_alpha_t == 1.0

    def test_weight_monotonicity(self):
        sch = NoiseSchedule()
        grid = np.linspace(0.0, 1.0, 100)
        w0 = [sch.coefficients(float(t)).w_x0 for t in grid]
        w1 = [sch.coefficients(float(t)).w_x1 for t in grid]
        assert np.all(np.diff(w0) < 0)
        assert np.all(np.diff(w1) > 0)
        assert w0[0] == 1.0 and w0[-1] == 0.0
        assert w1[0] == 0.0 and w1[-1] == 1.0

    def test_variance_positive_interior_zero_at_ends(self):
        sch = NoiseSchedule()
        for t in np.linspace(0.05, 0.95, 30):
            assert sch.coefficients(float(t)).var_marginal > 0
        assert sch.coefficients(0.0).var_marginal == 0.0
        assert sch.coefficients(1.0).var_marginal == 0.0

    def test_domain_error(self):
        with pytest.raises(ValueError):
            NoiseSchedule().coefficients(2.0)


class TestScheduleValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"c": 0.0},
            {"c": -1.0},
            {"k": 1.0},
            {"k": 0.5},
            {"t_eps": 0.0},
            {"t_eps": 1.0},
        ],
    )
    def test_invalid_constants(self, kwargs):
        with pytest.raises(ValueError):
            NoiseSchedule(**kwargs)

    def test_defaults(self):
        sch = NoiseSchedule()
        assert (sch.c, sch.k, sch.t_eps) == (0.40, 2.6, 1e-4)
