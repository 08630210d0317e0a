import math

import numpy as np
import pytest
from scipy.stats import kstest, multivariate_normal

from vriwae.models import (
    DREP,
    REP,
    GaussianModel,
    LinearGaussianModel,
    LinGaussDataset,
    Psi,
    fd_d_psi_log_weight,
    gaussian_offset,
    lingauss_offset,
)
from vriwae.statcore import self_normalize

FD_CASES_GAUSS = [(Psi("theta", 0), REP), (Psi("theta", 3), REP),
                  (Psi("phi", 1), REP), (Psi("phi", 2), DREP)]
FD_CASES_LIN = [(Psi("theta", 0), REP), (Psi("a", 1), REP), (Psi("b", 2), REP),
                (Psi("a", 0), DREP), (Psi("b", 1), DREP)]


def _random_gauss(seed, d=4):
    rng = np.random.default_rng(seed)
    return GaussianModel(d=d, theta=rng.normal(size=d), phi=rng.normal(size=d),
                         log_px=float(rng.normal()))


def _random_lin(seed, d=3):
    rng = np.random.default_rng(seed)
    return LinearGaussianModel(d=d, theta=rng.normal(size=d),
                               a=rng.normal(size=d), b=rng.normal(size=d),
                               x=rng.normal(size=d))


class TestGaussianLogWeight:
    def test_p_equals_q_constant(self):
        m = GaussianModel(d=3, theta=[1., -2., 0.5], phi=[1., -2., 0.5], log_px=0.7)
        eps = np.random.default_rng(0).standard_normal((50, 3))
        np.testing.assert_allclose(m.log_weight(eps), 0.7, atol=1e-12)

    def test_hand_value(self):
        m = GaussianModel(d=1, theta=[0.2], phi=[0.0])
        assert m.log_weight(np.array([0.0])) == pytest.approx(-0.02, abs=1e-15)

    def test_translation_invariance(self):
        rng = np.random.default_rng(1)
        m = _random_gauss(2)
        eps = rng.standard_normal((20, 4))
        shift = rng.normal(size=4)
        m2 = GaussianModel(d=4, theta=m.theta + shift, phi=m.phi + shift,
                           log_px=m.log_px)
        np.testing.assert_allclose(m.log_weight(eps), m2.log_weight(eps),
                                   rtol=1e-12, atol=1e-12)

    def test_example1_closed_form(self):
        m = _random_gauss(3)
        eps = np.random.default_rng(4).standard_normal((30, 4))
        diff = m.phi - m.theta
        expected = m.log_px - 0.5 * diff @ diff - eps @ diff
        np.testing.assert_allclose(m.log_weight(eps), expected, rtol=1e-12,
                                   atol=1e-12)

    def test_dimension_mismatch(self):
        m = _random_gauss(5)
        with pytest.raises(ValueError):
            m.log_weight(np.zeros(3))
        with pytest.raises(ValueError):
            m.log_weight(np.zeros(4), phi_prime=np.zeros(3))


class TestGaussianPartials:
    def test_drep_zero_at_optimum(self):
        m = GaussianModel(d=2, theta=[0.3, -1.0], phi=[0.3, -1.0])
        eps = np.random.default_rng(5).standard_normal((100, 2))
        np.testing.assert_array_equal(
            m.d_psi_log_weight(eps, Psi("phi", 0), DREP), 0.0)

    def test_rep_hand_value(self):
        m = GaussianModel(d=1, theta=[0.2], phi=[0.0])
        got = m.d_psi_log_weight(np.array([0.5]), Psi("phi", 0), REP)
        assert got == pytest.approx(-0.3, abs=1e-15)

    def test_drep_requires_phi(self):
        m = _random_gauss(6)
        with pytest.raises(ValueError, match="variational components"):
            m.d_psi_log_weight(np.zeros(4), Psi("theta", 0), DREP)

    @pytest.mark.parametrize("psi,mode", FD_CASES_GAUSS)
    def test_fd_consistency(self, psi, mode):
        m = _random_gauss(7)
        eps = np.random.default_rng(8).standard_normal((100, 4))
        got = np.asarray(m.d_psi_log_weight(eps, psi, mode))
        ref = fd_d_psi_log_weight(m, eps, psi, mode)
        np.testing.assert_allclose(got, ref, rtol=1e-5, atol=1e-8)


class TestLinGaussLogWeight:
    def test_against_scipy_densities(self):
        m = _random_lin(9)
        eps = np.random.default_rng(10).standard_normal((40, 3))
        z = math.sqrt(2 / 3) * eps + m.a * m.x + m.b
        ref = (multivariate_normal.logpdf(z, mean=m.theta, cov=np.eye(3))
               + multivariate_normal.logpdf(m.x - z, mean=np.zeros(3), cov=np.eye(3))
               - multivariate_normal.logpdf(z, mean=m.a * m.x + m.b,
                                            cov=(2 / 3) * np.eye(3)))
        np.testing.assert_allclose(m.log_weight(eps), ref, rtol=1e-10, atol=1e-10)

    def test_posterior_mode_two_code_paths(self):
        # proposal mean placed at the posterior mean; eps = 0 must reproduce
        # the quadratic-expansion constant exactly
        ds = LinGaussDataset.generate(4, 11)
        m = lingauss_offset(ds, 0, 0.0)
        np.testing.assert_allclose(m.proposal_mean, 0.5 * (m.theta + m.x),
                                   atol=1e-12)
        assert m.log_weight(np.zeros(4)) == pytest.approx(m._log_weight_const(),
                                                          rel=1e-12)

    def test_suffstat_form_matches_density_path(self):
        m = _random_lin(12)
        eps = np.random.default_rng(13).standard_normal((200, 3))
        closed = (m._log_weight_const() - (eps**2).sum(-1) / 6.0
                  - (eps @ m.mu) / math.sqrt(6.0))
        np.testing.assert_allclose(closed, m.log_weight(eps), rtol=1e-10,
                                   atol=1e-10)

    def test_weight_integrates_to_marginal(self):
        m = _random_lin(14)
        eps = np.random.default_rng(15).standard_normal((1_000_000, 3))
        ratio = np.exp(m.log_weight(eps) - m.log_marginal())
        se = ratio.std(ddof=1) / math.sqrt(ratio.size)
        assert abs(ratio.mean() - 1.0) <= 3 * se

    @pytest.mark.parametrize("psi,mode", FD_CASES_LIN)
    def test_fd_consistency(self, psi, mode):
        m = _random_lin(16)
        eps = np.random.default_rng(17).standard_normal((100, 3))
        got = np.asarray(m.d_psi_log_weight(eps, psi, mode))
        ref = fd_d_psi_log_weight(m, eps, psi, mode)
        np.testing.assert_allclose(got, ref, rtol=1e-5, atol=1e-8)


class TestLogWeightDistribution:
    def test_standardized_log_weight_is_normal(self):
        m = gaussian_offset(6, 0.7)
        assert m.b_d == pytest.approx(np.linalg.norm(m.theta - m.phi), abs=0)
        eps = np.random.default_rng(18).standard_normal((100_000, 6))
        lw = m.log_weight(eps)
        standardized = (lw - lw.mean()) / m.b_d
        stat = kstest(standardized, "norm").statistic
        assert stat < 1.63 / math.sqrt(standardized.size)  # 1% critical value

    def test_log_px_invariance_of_normalized_weights(self):
        base = gaussian_offset(3, 0.4, log_px=0.0)
        shifted = gaussian_offset(3, 0.4, log_px=123.0)
        eps = np.random.default_rng(19).standard_normal((64, 3))
        np.testing.assert_allclose(
            self_normalize(base.log_weight(eps)),
            self_normalize(shifted.log_weight(eps)), rtol=1e-12, atol=1e-15)


class TestSufficientStatisticSamplers:
    """The fast batch path must draw from the same joint law as the
    full-noise path; checked via moments of the weights and partials."""

    @pytest.mark.parametrize("mode", [REP, DREP])
    def test_gaussian_batch_distribution(self, mode):
        m = gaussian_offset(5, 0.6)
        psi = Psi("phi", 2)
        lw_f, pa_f = m.grad_batch(np.random.default_rng(20), 400, 250, psi, mode)
        eps = m.sample_noise(np.random.default_rng(21), (400, 250))
        lw_g = m.log_weight(eps)
        pa_g = np.broadcast_to(np.asarray(m.d_psi_log_weight(eps, psi, mode)),
                               lw_g.shape)
        for fast, generic in ((lw_f, lw_g), (pa_f, pa_g)):
            se = generic.std() / math.sqrt(generic.size)
            assert abs(fast.mean() - generic.mean()) <= 5 * max(se, 1e-12)
            assert fast.std() == pytest.approx(generic.std(), rel=0.05, abs=1e-12)

    @pytest.mark.parametrize("psi,mode", [(Psi("b", 1), REP), (Psi("b", 0), DREP),
                                          (Psi("theta", 2), REP)])
    def test_lingauss_batch_distribution(self, psi, mode):
        ds = LinGaussDataset.generate(4, 22)
        m = lingauss_offset(ds, 2, 0.5)
        lw_f, pa_f = m.grad_batch(np.random.default_rng(23), 400, 250, psi, mode)
        eps = m.sample_noise(np.random.default_rng(24), (400, 250))
        lw_g = m.log_weight(eps)
        pa_g = m.d_psi_log_weight(eps, psi, mode)
        for fast, generic in ((lw_f, lw_g), (pa_f, pa_g)):
            se = generic.std() / math.sqrt(generic.size)
            assert abs(fast.mean() - generic.mean()) <= 5 * se
            assert fast.std() == pytest.approx(generic.std(), rel=0.05)
        # correlation between weight and partial must match too
        corr_f = np.corrcoef(lw_f.ravel(), pa_f.ravel())[0, 1]
        corr_g = np.corrcoef(lw_g.ravel(), np.broadcast_to(pa_g, lw_g.shape).ravel())[0, 1]
        assert corr_f == pytest.approx(corr_g, abs=0.02)

    def test_lingauss_d1_and_d2_edge_dimensions(self):
        for d in (1, 2):
            ds = LinGaussDataset.generate(d, 25)
            m = lingauss_offset(ds, 1, 0.3)
            lw, part = m.grad_batch(np.random.default_rng(26), 100, 50,
                                    Psi("b", 0), REP)
            assert np.all(np.isfinite(lw)) and np.all(np.isfinite(part))
            eps = m.sample_noise(np.random.default_rng(27), (5000, 20))
            lw_g = m.log_weight(eps)
            assert abs(lw.mean() - lw_g.mean()) <= 6 * lw_g.std() / math.sqrt(lw_g.size)


class TestDatasetAndOffsets:
    def test_dataset_determinism(self):
        a = LinGaussDataset.generate(3, 99)
        b = LinGaussDataset.generate(3, 99)
        np.testing.assert_array_equal(a.points, b.points)

    def test_dataset_derived_parameters(self):
        ds = LinGaussDataset.generate(2, 100)
        np.testing.assert_allclose(ds.theta_star, ds.points.mean(axis=0))
        np.testing.assert_allclose(ds.b_star, 0.5 * ds.theta_star)

    def test_csv_round_trip_bit_exact(self, tmp_path):
        ds = LinGaussDataset.generate(3, 101, t=64)
        path = tmp_path / "ds.csv"
        ds.save_csv(path)
        back = LinGaussDataset.load_csv(path)
        assert back.seed == ds.seed and back.d == ds.d and back.t == ds.t
        np.testing.assert_array_equal(back.points, ds.points)

    def test_gaussian_offset_convention(self):
        m = gaussian_offset(4, 0.3)
        np.testing.assert_array_equal(m.theta, 0.3)
        np.testing.assert_array_equal(m.phi, 0.0)

    def test_lingauss_offset_convention(self):
        ds = LinGaussDataset.generate(5, 102)
        m = lingauss_offset(ds, 7, 0.4)
        np.testing.assert_allclose(m.proposal_mean,
                                   0.5 * (m.theta + m.x) + 0.4, atol=1e-12)
        np.testing.assert_allclose(m.mu, 4 * 0.4, atol=1e-12)
        assert m.b_d == pytest.approx(
            math.sqrt(5 / 18 + (16 * 5 * 0.4**2) / 6))
