import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homodyne_qrng.optics import (
    FitUnderdeterminedError,
    GaussianState,
    LossChannel,
    apply_loss,
    phase_scan_fit,
    quadrature_mean,
    quadrature_variance,
    sample_quadratures,
)

from .oracles import fock

phases = st.floats(0, 2 * math.pi)
# ranges where the 40-level truncation error stays below 1e-4
small_alpha = st.builds(complex, st.floats(-0.7, 0.7), st.floats(-0.7, 0.7))
small_r = st.floats(0, 0.5)
small_nbar = st.floats(0, 0.3)
etas = st.floats(0, 1)


class TestState:
    def test_vacuum_is_default(self):
        assert GaussianState.vacuum() == GaussianState(0j, 0.0, 0.0, 0.0)

    @pytest.mark.parametrize("kwargs", [{"squeeze_mag": -0.1}, {"thermal_occupation": -1e-9}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            GaussianState(**kwargs)

    @given(st.floats(-50, 50))
    def test_angle_normalized(self, theta):
        s = GaussianState(squeeze_mag=0.1, squeeze_angle=theta)
        assert 0 <= s.squeeze_angle < 2 * math.pi

    @pytest.mark.parametrize("eta", [-0.01, 1.01])
    def test_loss_range(self, eta):
        with pytest.raises(ValueError):
            LossChannel(eta)


class TestMoments:
    @given(phases)
    def test_vacuum(self, phi):
        v = GaussianState.vacuum()
        assert quadrature_mean(v, phi) == 0.0
        assert quadrature_variance(v, phi) == 1.0

    def test_coherent_examples(self):
        assert quadrature_mean(GaussianState(1 + 0j), 0.0) == pytest.approx(2.0)
        assert quadrature_mean(GaussianState(1j), math.pi / 2) == pytest.approx(2.0)
        rho = fock.gaussian_rho(1j, 0.0, 0.0, 0.0)
        assert fock.quadrature_moments(rho, math.pi / 2)[0] == pytest.approx(2.0, abs=1e-8)

    def test_squeezed_and_thermal_examples(self):
        assert quadrature_variance(GaussianState(squeeze_mag=0.5), 0.0) == pytest.approx(math.exp(-1), rel=1e-12)
        assert quadrature_variance(GaussianState(thermal_occupation=1.0), 1.234) == pytest.approx(3.0)
        rho = fock.gaussian_rho(0, 0.5, 0.0, 0.0)
        assert fock.quadrature_moments(rho, 0.0)[1] == pytest.approx(0.36788, abs=1e-5)
        rho = fock.gaussian_rho(0, 0.0, 0.0, 1.0, dim=80, work=80)
        assert fock.quadrature_moments(rho, 0.4)[1] == pytest.approx(3.0, abs=1e-4)

    def test_array_phases(self):
        s = GaussianState(squeeze_mag=0.5)
        np.testing.assert_allclose(
            quadrature_variance(s, np.array([0, math.pi / 4, math.pi / 2])),
            [math.exp(-1), math.cosh(1), math.e],
        )

    @settings(max_examples=25)
    @given(small_alpha, small_r, phases, small_nbar, phases)
    def test_against_fock_oracle(self, alpha, r, theta, nbar, phi):
        state = GaussianState(alpha, r, theta, nbar)
        m, v = fock.quadrature_moments(fock.gaussian_rho(alpha, r, theta, nbar), phi)
        assert quadrature_mean(state, phi) == pytest.approx(m, abs=1e-4)
        assert quadrature_variance(state, phi) == pytest.approx(v, abs=1e-4)

    @given(st.floats(0, 3), phases, st.floats(0, 5), phases)
    def test_uncertainty_bound(self, r, theta, nbar, phi):
        s = GaussianState(0j, r, theta, nbar)
        v1 = quadrature_variance(s, phi)
        v2 = quadrature_variance(s, phi + math.pi / 2)
        assert v1 * v2 >= 1 - 1e-9


class TestLoss:
    def test_examples(self):
        assert quadrature_variance(apply_loss(GaussianState.vacuum(), LossChannel(0.58)), 0.3) == pytest.approx(1.0)
        lossy = apply_loss(GaussianState(squeeze_mag=0.5), LossChannel(0.58))
        assert quadrature_variance(lossy, 0.0) == pytest.approx(0.58 * math.exp(-1) + 0.42, rel=1e-12)
        assert quadrature_variance(lossy, 0.0) == pytest.approx(0.63337, abs=1e-5)

    @given(st.builds(complex, st.floats(-5, 5), st.floats(-5, 5)), st.floats(0, 2), phases, st.floats(0, 3), phases)
    def test_full_loss_is_vacuum(self, alpha, r, theta, nbar, phi):
        out = apply_loss(GaussianState(alpha, r, theta, nbar), LossChannel(0.0))
        assert quadrature_mean(out, phi) == 0.0
        assert quadrature_variance(out, phi) == pytest.approx(1.0)

    @given(st.floats(0, 2), phases, st.floats(0, 3), etas, phases)
    def test_variance_map(self, r, theta, nbar, eta, phi):
        s = GaussianState(0j, r, theta, nbar)
        out = apply_loss(s, LossChannel(eta))
        assert quadrature_variance(out, phi) == pytest.approx(eta * quadrature_variance(s, phi) + 1 - eta, rel=1e-9)

    @given(st.floats(0, 1.5), phases, st.floats(0, 2), etas, etas, phases)
    def test_composition(self, r, theta, nbar, e1, e2, phi):
        s = GaussianState(0.3 + 0.2j, r, theta, nbar)
        twice = apply_loss(apply_loss(s, LossChannel(e1)), LossChannel(e2))
        once = apply_loss(s, LossChannel(e1 * e2))
        assert quadrature_variance(twice, phi) == pytest.approx(quadrature_variance(once, phi), rel=1e-9)
        assert quadrature_mean(twice, phi) == pytest.approx(quadrature_mean(once, phi), abs=1e-12)

    @settings(max_examples=15)
    @given(small_alpha, small_r, phases, small_nbar, st.floats(0.05, 1), phases)
    def test_against_kraus_oracle(self, alpha, r, theta, nbar, eta, phi):
        out = apply_loss(GaussianState(alpha, r, theta, nbar), LossChannel(eta))
        m, v = fock.quadrature_moments(fock.pure_loss(fock.gaussian_rho(alpha, r, theta, nbar), eta), phi)
        assert quadrature_mean(out, phi) == pytest.approx(m, abs=1e-4)
        assert quadrature_variance(out, phi) == pytest.approx(v, abs=1e-4)


class TestSampling:
    def test_vacuum_and_coherent(self):
        v = sample_quadratures(GaussianState.vacuum(), 0.7, LossChannel(1.0), 1_000_000, seed=1)
        assert v.var() == pytest.approx(1.0, abs=0.005)
        c = sample_quadratures(GaussianState(1 + 0j), 0.0, LossChannel(1.0), 1_000_000, seed=2)
        assert c.mean() == pytest.approx(2.0, abs=0.004)

    def test_squeezed_scan(self):
        s = GaussianState(squeeze_mag=0.5)
        for i, (phi, want) in enumerate(zip((0, math.pi / 4, math.pi / 2), (0.368, 1.543, 2.718))):
            x = sample_quadratures(s, phi, LossChannel(1.0), 1_000_000, seed=10 + i)
            assert x.var() == pytest.approx(want, rel=0.01)

    def test_deterministic_and_empty(self):
        s = GaussianState(0.5, 0.2, 0.1, 0.1)
        a = sample_quadratures(s, 0.3, LossChannel(0.8), 1000, seed=9)
        np.testing.assert_array_equal(a, sample_quadratures(s, 0.3, LossChannel(0.8), 1000, seed=9))
        assert len(sample_quadratures(s, 0.3, LossChannel(0.8), 0, seed=9)) == 0


class TestPhaseFit:
    def test_exact_points(self):
        s = GaussianState(0j, 0.3, 0.7, 0.0)
        phi = np.linspace(0, math.pi, 9, endpoint=False)
        fit = phase_scan_fit(list(zip(phi, quadrature_variance(s, phi))))
        assert fit.squeeze_mag == pytest.approx(0.3, abs=1e-6)
        assert fit.squeeze_angle == pytest.approx(0.7, abs=1e-6)
        assert fit.thermal_occupation == pytest.approx(0.0, abs=1e-6)

    def test_vacuum(self):
        fit = phase_scan_fit([(p, 1.0) for p in np.linspace(0, 3, 6)])
        assert fit.squeeze_mag == 0.0 and fit.thermal_occupation == pytest.approx(0.0, abs=1e-9)
        assert 0 <= fit.squeeze_angle < math.pi

    def test_sampled(self):
        s = GaussianState(squeeze_mag=0.5)
        phi = np.linspace(0, math.pi, 12, endpoint=False)
        pts = [(p, sample_quadratures(s, p, LossChannel(1.0), 1_000_000, seed=100 + i).var()) for i, p in enumerate(phi)]
        assert phase_scan_fit(pts).squeeze_mag == pytest.approx(0.5, abs=0.01)

    @pytest.mark.parametrize("pts", [[(0, 1), (1, 1)], [(0, 1), (math.pi, 1.1), (2 * math.pi, 1.2), (0, 1.3)]])
    def test_underdetermined(self, pts):
        with pytest.raises(FitUnderdeterminedError):
            phase_scan_fit(pts)

    @given(st.floats(0.01, 1.2), st.floats(0, math.pi - 1e-3), st.floats(0, 2))
    def test_roundtrip(self, r, theta, nbar):
        s = GaussianState(0j, r, theta, nbar)
        phi = np.linspace(0, math.pi, 7, endpoint=False)
        fit = phase_scan_fit(list(zip(phi, quadrature_variance(s, phi))))
        assert fit.squeeze_mag == pytest.approx(r, abs=1e-6)
        assert fit.thermal_occupation == pytest.approx(nbar, abs=1e-6)
        d = abs(fit.squeeze_angle - theta) % math.pi
        assert min(d, math.pi - d) < 1e-5
