import math

import numpy as np
import pytest

from cavimag import (
    AntiresonanceBranch,
    CouplingBehavior,
    FitConvergenceError,
    FitSelection,
    FrequencyGrid,
    IdentifiabilityError,
    MagnonMode,
    PhotonMode,
    PortCoupling,
    SystemSpec,
    antires_branches,
    damped_gauss_newton,
    fit_effective_model,
    fit_spectrum,
    sweep,
    table3_cavity,
)
from cavimag.fitting import _branch_model, _collect_params, _spectrum_model
from conftest import single_mode_spec


def synthetic_branch(w_ar, g, phi, wm, noise=0.0, rng=None):
    """AntiresonanceBranch built directly from the two-level branch model."""
    lo_c, hi_c = antires_branches(w_ar, wm, g, phi)
    merged = np.abs(lo_c.imag) > 1e-12
    lo = lo_c.real.copy()
    hi = hi_c.real.copy()
    if noise and rng is not None:
        lo = lo + rng.normal(0.0, noise, size=lo.shape)
        hi = hi + rng.normal(0.0, noise, size=hi.shape)
        mid = 0.5 * (lo + hi)
        lo[merged] = mid[merged]
        hi[merged] = mid[merged]
    return AntiresonanceBranch(
        magnon_frequencies=wm.copy(), lower=lo, upper=hi, merged_mask=merged
    )


class TestDampedGaussNewton:
    def test_linear_problem_converges_immediately(self):
        t = np.linspace(0.0, 1.0, 20)
        y = 2.0 + 3.0 * t

        def residual(x):
            return x[0] + x[1] * t - y

        def jacobian(x):
            return np.column_stack([np.ones_like(t), t])

        result = damped_gauss_newton(residual, jacobian, np.array([0.0, 0.0]))
        assert result.converged
        assert result.x == pytest.approx([2.0, 3.0], abs=1e-12)
        assert result.rms < 1e-12

    def test_accepted_steps_never_increase_residual(self):
        t = np.linspace(0.0, 4.0, 50)
        y = np.exp(-1.3 * t) + 0.5 * t

        def residual(x):
            return np.exp(x[0] * t) + x[1] * t - y

        def jacobian(x):
            return np.column_stack([t * np.exp(x[0] * t), t])

        result = damped_gauss_newton(residual, jacobian, np.array([-0.2, 0.0]))
        hist = np.array(result.rms_history)
        assert np.all(np.diff(hist) <= 1e-15)
        assert result.x == pytest.approx([-1.3, 0.5], abs=1e-8)

    def test_iteration_cap_raises_with_best_attached(self):
        def residual(x):
            return np.exp(np.minimum(x, 700.0)) - 100.0

        def jacobian(x):
            return np.diag(np.exp(np.minimum(x, 700.0)))

        with pytest.raises(FitConvergenceError) as info:
            damped_gauss_newton(residual, jacobian, np.array([-5.0]), max_iter=2)
        best = info.value.best
        assert np.isfinite(best.rms)
        assert best.rms <= 100.0 - math.exp(-5.0) + 1e-9


class TestEffectiveModelFit:
    def test_repulsive_round_trip_with_noise(self, rng):
        wm = np.linspace(13.3, 13.7, 201)
        branch = synthetic_branch(13.5, 0.020, 0.0, wm, noise=1e-3, rng=rng)
        fit = fit_effective_model(branch)
        assert fit.verdict is CouplingBehavior.REPULSION
        assert fit.phi_ar == 0.0
        assert abs(fit.g_ar_magnitude - 0.020) / 0.020 < 0.01
        assert abs(fit.omega_ar - 13.5) < 1e-3
        assert not fit.ambiguous

    def test_attractive_round_trip_with_noise(self, rng):
        wm = np.linspace(13.3, 13.7, 201)
        branch = synthetic_branch(13.5, 0.020, math.pi, wm, noise=1e-3, rng=rng)
        fit = fit_effective_model(branch)
        assert fit.verdict is CouplingBehavior.ATTRACTION
        assert fit.phi_ar == pytest.approx(math.pi)
        assert abs(fit.g_ar_magnitude - 0.020) / 0.020 < 0.03
        assert abs(fit.omega_ar - 13.5) < 1e-3

    def test_noise_free_round_trip_is_exact(self):
        wm = np.linspace(13.2, 13.8, 121)
        branch = synthetic_branch(13.52, 0.033, 0.0, wm)
        fit = fit_effective_model(branch)
        assert fit.g_ar_magnitude == pytest.approx(0.033, abs=1e-9)
        assert fit.omega_ar == pytest.approx(13.52, abs=1e-9)
        assert fit.rms_residual < 1e-9

    def test_shift_consistency(self):
        wm = np.linspace(13.3, 13.7, 101)
        branch = synthetic_branch(13.5, 0.02, 0.0, wm)
        shift = 3.7
        shifted = AntiresonanceBranch(
            magnon_frequencies=branch.magnon_frequencies + shift,
            lower=branch.lower + shift,
            upper=branch.upper + shift,
            merged_mask=branch.merged_mask,
        )
        a = fit_effective_model(branch)
        b = fit_effective_model(shifted)
        assert b.omega_ar - a.omega_ar == pytest.approx(shift, abs=1e-9)
        assert b.g_ar_magnitude == pytest.approx(a.g_ar_magnitude, abs=1e-9)

    def test_needs_ten_samples(self):
        wm = np.linspace(13.4, 13.6, 4)
        branch = synthetic_branch(13.5, 0.02, 0.0, wm)
        with pytest.raises(ValueError, match="10"):
            fit_effective_model(branch)

    def test_branch_jacobian_matches_central_differences(self, rng):
        for _ in range(100):
            phi = float(rng.choice([0.0, math.pi]))
            x = np.array([rng.uniform(12.0, 15.0), rng.uniform(0.005, 0.05)])
            wm = np.linspace(x[0] - 0.3, x[0] + 0.3, 41)
            if phi == math.pi:
                # stay out of the coalescence kink where the model is not smooth
                wm = wm[np.abs(x[0] - wm) > 2.2 * x[1]]
            lo, hi, dlo, dhi = _branch_model(x, wm, phi)
            for j, scale in enumerate(np.maximum(np.abs(x), 1.0)):
                h = 1e-6 * scale
                xp = x.copy()
                xp[j] += h
                xm = x.copy()
                xm[j] -= h
                lo_p, hi_p, _, _ = _branch_model(xp, wm, phi)
                lo_m, hi_m, _, _ = _branch_model(xm, wm, phi)
                fd_lo = (lo_p - lo_m) / (2 * h)
                fd_hi = (hi_p - hi_m) / (2 * h)
                assert np.allclose(dlo[:, j], fd_lo, rtol=1e-4, atol=1e-9)
                assert np.allclose(dhi[:, j], fd_hi, rtol=1e-4, atol=1e-9)


class TestSpectrumFit:
    def test_recovers_perturbed_frequency(self):
        true = single_mode_spec(freq=14.0, gamma0=2e-3, gamma1=2e-3)
        data = sweep(true, FrequencyGrid(13.9, 14.1, 801))
        start = single_mode_spec(freq=14.05, gamma0=2e-3, gamma1=2e-3)
        fitted, report = fit_spectrum(data, start, FitSelection(frequencies=True))
        linewidth = 4e-3
        assert abs(fitted.photon_modes[0].frequency - 14.0) < 0.1 * linewidth
        assert report.rms_residual < 1e-6

    def test_frozen_fit_returns_input_and_direct_residual(self):
        true = single_mode_spec(freq=14.0)
        data = sweep(true, FrequencyGrid(13.9, 14.1, 401))
        start = single_mode_spec(freq=14.02)
        fitted, report = fit_spectrum(data, start, FitSelection())
        assert fitted == start
        model = sweep(start, FrequencyGrid(13.9, 14.1, 401))
        expected = float(
            np.sqrt(np.mean((np.log(np.abs(model.s21)) - np.log(np.abs(data.s21))) ** 2))
        )
        assert report.rms_residual == pytest.approx(expected, rel=1e-12)
        assert report.names == []

    def test_seven_mode_frequency_round_trip(self, rng):
        true = table3_cavity("A").without_magnons()
        data = sweep(true, FrequencyGrid(12.0, 17.0, 4001))
        perturbed = tuple(
            PhotonMode(
                m.label,
                m.frequency + float(rng.uniform(-2e-3, 2e-3)),
                m.ports,
                m.magnon_couplings,
            )
            for m in true.photon_modes
        )
        start = SystemSpec(photon_modes=perturbed, n_ports=2)
        fitted, report = fit_spectrum(data, start, FitSelection(frequencies=True))
        for fit_mode, true_mode in zip(fitted.photon_modes, true.photon_modes):
            assert abs(fit_mode.frequency - true_mode.frequency) < 1e-3

    def test_gamma_and_coupling_recovery(self):
        def build(g0, g1, coupling):
            return SystemSpec(
                photon_modes=(
                    PhotonMode(
                        "c0", 14.0, (PortCoupling(g0, 0.0), PortCoupling(g1, 0.0)), (coupling,)
                    ),
                ),
                magnon_modes=(MagnonMode("m", 13.97, 1e-4),),
                n_ports=2,
            )

        data = sweep(build(2e-3, 3e-3, 0.02), FrequencyGrid(13.85, 14.15, 1501))
        start = build(2.2e-3, 2.8e-3, 0.017)
        fitted, report = fit_spectrum(data, start, FitSelection(gammas=True, couplings=True))
        mode = fitted.photon_modes[0]
        # |S21| is reciprocal, so only the unordered pair of port rates is
        # identifiable; the starting point decides the assignment
        assert sorted(p.gamma for p in mode.ports) == pytest.approx([2e-3, 3e-3], rel=1e-4)
        assert mode.magnon_couplings[0] == pytest.approx(0.02, rel=1e-4)
        assert report.rms_residual < 1e-8

    def test_unidentifiable_parameters_named(self):
        # two degenerate magnons coupled identically: only the quadrature sum
        # of the two couplings can ever be inferred from the spectrum
        spec = SystemSpec(
            photon_modes=(
                PhotonMode(
                    "c0", 14.0, (PortCoupling(2e-3, 0.0), PortCoupling(2e-3, 0.0)), (0.02, 0.02)
                ),
            ),
            magnon_modes=(MagnonMode("m1", 13.9, 1e-4), MagnonMode("m2", 13.9, 1e-4)),
            n_ports=2,
        )
        data = sweep(spec, FrequencyGrid(13.8, 14.2, 801))
        with pytest.raises(IdentifiabilityError) as info:
            fit_spectrum(data, spec, FitSelection(couplings=True))
        assert any("g[c0,m1]" in name or "g[c0,m2]" in name for name in info.value.parameters)

    def test_spectrum_jacobian_matches_central_differences(self, rng):
        spec = SystemSpec(
            photon_modes=(
                PhotonMode(
                    "c0", 13.0, (PortCoupling(2e-3, 0.0), PortCoupling(1e-3, 0.0)), (0.02,)
                ),
                PhotonMode(
                    "c1", 14.0, (PortCoupling(3e-3, 0.0), PortCoupling(2e-3, math.pi)), (0.01,)
                ),
            ),
            magnon_modes=(MagnonMode("m", 13.5),),
            n_ports=2,
        )
        freqs = np.linspace(12.5, 14.5, 101)
        refs = _collect_params(spec, FitSelection(frequencies=True, gammas=True, couplings=True))
        log_mag, dlog = _spectrum_model(spec, freqs, refs)
        from cavimag.fitting import _apply, _pack

        # keep clear of transmission zeros (the dips), where the
        # log-magnitude curvature makes the finite difference meaningless
        bad = np.zeros(log_mag.size, dtype=bool)
        for i in range(1, log_mag.size - 1):
            if log_mag[i] <= log_mag[i - 1] and log_mag[i] <= log_mag[i + 1]:
                bad[max(i - 2, 0) : i + 3] = True
        smooth = ~bad
        assert smooth.sum() > 60
        x0 = _pack(spec, refs)
        for j, ref in enumerate(refs):
            h = 1e-6 * max(abs(x0[j]), 1e-3)
            xp = x0.copy()
            xp[j] += h
            xm = x0.copy()
            xm[j] -= h
            lp, _ = _spectrum_model(_apply(spec, refs, xp), freqs, refs)
            lm, _ = _spectrum_model(_apply(spec, refs, xm), freqs, refs)
            fd = ((lp - lm) / (2 * h))[smooth]
            scale = np.maximum(np.abs(fd), np.max(np.abs(fd)) * 1e-3 + 1e-12)
            assert np.max(np.abs(dlog[smooth, j] - fd) / scale) < 1e-4, ref.name
