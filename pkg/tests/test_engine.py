import numpy as np
import pytest

from cavimag import (
    FrequencyGrid,
    MagnonMode,
    PhotonMode,
    PortCoupling,
    SingularFrequencyError,
    SystemSpec,
    build_omega,
    magnon_map,
    s_matrix,
    sweep,
    table3_cavity,
)
from conftest import photon_magnon_spec, single_mode_spec


def random_lossless_spec(rng, max_modes=8):
    """Ports-only damping, phases restricted to the canonical {0, pi}."""
    n_modes = int(rng.integers(1, max_modes + 1))
    n_magnons = int(rng.integers(0, min(2, n_modes))) if n_modes > 1 else 0
    n_photons = n_modes - n_magnons
    photons = []
    for p in range(n_photons):
        ports = tuple(
            PortCoupling(float(10 ** rng.uniform(-4, -2)), float(rng.choice([0.0, np.pi])))
            for _ in range(2)
        )
        couplings = tuple(float(rng.uniform(0, 0.05)) for _ in range(n_magnons))
        photons.append(PhotonMode(f"c{p}", float(rng.uniform(10, 20)), ports, couplings))
    magnons = tuple(MagnonMode(f"m{i}", float(rng.uniform(10, 20))) for i in range(n_magnons))
    return SystemSpec(photon_modes=tuple(photons), magnon_modes=magnons, n_ports=2)


class TestBuildOmega:
    def test_single_mode_single_port_at_resonance(self):
        spec = SystemSpec(
            photon_modes=(PhotonMode("c0", 14.0, (PortCoupling(0.1, 0.0),)),), n_ports=1
        )
        om = build_omega(spec, 14.0)
        assert om.matrix.shape == (1, 1)
        assert om.matrix[0, 0] == pytest.approx(0.05j)

    def test_photon_magnon_off_diagonals(self):
        spec = photon_magnon_spec(g=0.02)
        om = build_omega(spec, 13.0).matrix
        assert om[0, 1] == pytest.approx(-0.02)
        assert om[1, 0] == pytest.approx(-0.02)

    def test_opposed_phases_cancel_offdiagonal_damping(self):
        # equal gammas with phase patterns (0,0) and (0,pi): the port-induced
        # cross-damping sums to gamma * (1 - 1) = 0
        spec = SystemSpec(
            photon_modes=(
                PhotonMode("c0", 12.0, (PortCoupling(2e-3, 0.0), PortCoupling(2e-3, 0.0))),
                PhotonMode("c1", 14.0, (PortCoupling(2e-3, 0.0), PortCoupling(2e-3, np.pi))),
            ),
            n_ports=2,
        )
        om = build_omega(spec, 13.0).matrix
        assert abs(om[0, 1]) < 1e-18
        assert abs(om[1, 0]) < 1e-18

    def test_anti_hermitian_part_is_psd(self, rng):
        for _ in range(20):
            spec = random_lossless_spec(rng)
            om = build_omega(spec, float(rng.uniform(10, 20))).matrix
            damping = (om - om.conj().T) / 2j
            eigs = np.linalg.eigvalsh(damping)
            assert eigs.min() > -1e-15


class TestSMatrix:
    def test_single_mode_single_port_full_reflection(self):
        spec = SystemSpec(
            photon_modes=(PhotonMode("c0", 14.0, (PortCoupling(0.002, 0.0),)),), n_ports=1
        )
        s = s_matrix(spec, 14.0)
        assert s[0, 0] == pytest.approx(-1.0)

    def test_single_mode_two_equal_ports_full_transmission(self):
        # S21 = -i gamma / (i gamma) = -1 at resonance
        spec = single_mode_spec(gamma0=0.002, gamma1=0.002)
        s = s_matrix(spec, 14.0)
        assert s[1, 0] == pytest.approx(-1.0)
        assert abs(s[1, 0]) == pytest.approx(1.0)

    def test_transmission_zero_at_magnon_frequency(self):
        spec = photon_magnon_spec(freq=14.0, g=0.03, omega_m=13.95)
        s = s_matrix(spec, 13.95)
        assert abs(s[1, 0]) < 1e-12

    def test_singular_at_lossless_eigenfrequency(self):
        spec = SystemSpec(
            photon_modes=(PhotonMode("c0", 14.0, (PortCoupling(0.0, 0.0),)),), n_ports=1
        )
        with pytest.raises(SingularFrequencyError, match="14"):
            s_matrix(spec, 14.0)

    def test_unitary_for_lossless_systems(self, rng):
        for _ in range(10):
            spec = random_lossless_spec(rng)
            for f in rng.uniform(10, 20, size=5):
                s = s_matrix(spec, float(f))
                defect = np.abs(s.conj().T @ s - np.eye(2)).max()
                assert defect < 1e-9

    def test_port_permutation_permutes_s(self, rng):
        spec = random_lossless_spec(rng)
        swapped = SystemSpec(
            photon_modes=tuple(
                PhotonMode(m.label, m.frequency, (m.ports[1], m.ports[0]), m.magnon_couplings)
                for m in spec.photon_modes
            ),
            magnon_modes=spec.magnon_modes,
            n_ports=2,
        )
        f = 14.321
        s = s_matrix(spec, f)
        s_sw = s_matrix(swapped, f)
        perm = np.array([[0, 1], [1, 0]])
        assert np.allclose(s_sw, perm @ s @ perm, atol=1e-14)


class TestSweep:
    def test_table3_empty_cavity_has_seven_peaks(self):
        spec = table3_cavity("A").without_magnons()
        grid = FrequencyGrid(12.0, 17.0, 20001)
        spectrum = sweep(spec, grid)
        mag = spectrum.magnitude()
        # local maxima above half the global max, tolerant to grid resolution
        expected = [12.4, 12.5, 14.4, 14.6, 15.2, 15.8, 16.6]
        for f0 in expected:
            i = np.argmin(np.abs(spectrum.freqs - f0))
            window = mag[max(i - 40, 0) : i + 40]
            assert window.max() > 0.5, f"no peak near {f0}"
            peak_f = spectrum.freqs[max(i - 40, 0) + np.argmax(window)]
            assert abs(peak_f - f0) < 0.01

    def test_two_point_grid(self):
        spectrum = sweep(single_mode_spec(), FrequencyGrid(13.0, 15.0, 2))
        assert spectrum.freqs.shape == (2,)
        assert spectrum.s.shape == (2, 2, 2)

    def test_deterministic(self):
        spec = table3_cavity("B")
        grid = FrequencyGrid(13.0, 14.0, 501)
        a = sweep(spec, grid)
        b = sweep(spec, grid)
        assert np.array_equal(a.s, b.s)

    def test_spectrum_accessors(self):
        spectrum = sweep(single_mode_spec(), FrequencyGrid(13.9, 14.1, 401))
        assert np.argmax(spectrum.magnitude_db()) == np.argmax(np.abs(spectrum.s21))
        phase = spectrum.phase()
        assert np.all(np.abs(np.diff(phase)) < np.pi)


class TestMagnonMap:
    def test_anticrossing_gap_two_level(self):
        # lossless-degenerate polariton gap is 2 g up to damping corrections
        g = 0.02
        spec = photon_magnon_spec(freq=14.0, gamma=5e-4, g=g)
        drive = FrequencyGrid(14.0 - 3 * g, 14.0 + 3 * g, 1201)
        m = magnon_map(spec, 0, FrequencyGrid(13.99, 14.01, 3), drive)
        row = np.abs(m.s21[1])  # magnon exactly on resonance
        peaks = [
            drive.values()[i]
            for i in range(1, row.size - 1)
            if row[i] > row[i - 1] and row[i] > row[i + 1]
        ]
        assert len(peaks) == 2
        assert abs((peaks[1] - peaks[0]) - 2 * g) < 2 * drive.spacing

    def test_decoupled_map_is_flat_along_magnon_axis(self):
        # a decoupled lossless magnon would make the system matrix exactly
        # singular whenever the drive hits its frequency; a tiny linewidth
        # keeps the sweep well posed without affecting flatness
        spec = photon_magnon_spec(g=0.0, magnon_loss=1e-6)
        m = magnon_map(spec, 0, FrequencyGrid(13.5, 14.5, 5), FrequencyGrid(13.8, 14.2, 101))
        assert np.allclose(m.s21, m.s21[0][None, :], atol=1e-14)

    def test_rows_match_direct_sweep(self):
        spec = table3_cavity("B")
        drive = FrequencyGrid(13.4, 13.8, 301)
        m = magnon_map(spec, 0, FrequencyGrid(13.5, 13.7, 3), drive)
        direct = sweep(spec.with_magnon_frequency(0, 13.6), drive)
        assert np.allclose(m.s21[1], direct.s21, atol=1e-15)

    def test_workers_do_not_change_results(self):
        spec = table3_cavity("A")
        drive = FrequencyGrid(13.4, 13.8, 201)
        grid = FrequencyGrid(13.5, 13.7, 7)
        serial = magnon_map(spec, 0, grid, drive, workers=1)
        threaded = magnon_map(spec, 0, grid, drive, workers=4)
        assert np.array_equal(serial.s21, threaded.s21)

    def test_bad_magnon_index(self):
        with pytest.raises(IndexError):
            magnon_map(
                single_mode_spec(), 0, FrequencyGrid(13, 14, 3), FrequencyGrid(13, 14, 3)
            )
