"""Exact S-matrix evaluation for arbitrary mode/port networks.

Solves the frequency-domain coupled-mode system Omega(w) a = -i K* b_in
and returns S(w) = 1 - i K^T Omega^{-1} K*, where K is the (modes x ports)
complex coupling matrix and Omega collects detunings, port-induced damping
and internal couplings. This is the numerical ground truth against which
all closed-form expressions are checked.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import FrequencyGrid, SystemSpec

# Omega is reported singular above this condition-number estimate; such
# points are physically meaningful (lossless real eigenfrequencies) and are
# reported rather than regularized.
COND_LIMIT = 1e12

THREADS_ENV = "CAVIMAG_THREADS"


class SingularFrequencyError(ArithmeticError):
    """The coupled-mode matrix is numerically singular at a drive frequency."""

    def __init__(self, freq: float, cond: float):
        self.freq = freq
        self.cond = cond
        super().__init__(
            f"coupled-mode matrix is singular at {freq:.9g} GHz "
            f"(condition estimate {cond:.3g})"
        )


@dataclass(frozen=True)
class OmegaMatrix:
    """Coupled-mode system matrix at one drive frequency."""

    matrix: np.ndarray  # (n_modes, n_modes) complex
    frequency: float  # GHz


@dataclass(frozen=True)
class Spectrum:
    """S-matrix samples over a frequency grid.

    ``s`` has shape (n_points, n_ports, n_ports) with 0-based port indices;
    the conventional S_21 (transmission from port 1 into port 2) is
    ``s[:, 1, 0]``.
    """

    freqs: np.ndarray  # (n_points,) GHz
    s: np.ndarray  # (n_points, n_ports, n_ports) complex

    @property
    def n_ports(self) -> int:
        return self.s.shape[1]

    def element(self, out_port: int, in_port: int) -> np.ndarray:
        """Complex S_{out,in} trace; ports are 1-based as in S21."""
        return self.s[:, out_port - 1, in_port - 1]

    @property
    def s21(self) -> np.ndarray:
        return self.element(2, 1) if self.n_ports >= 2 else self.element(1, 1)

    def magnitude(self, out_port: int = 2, in_port: int = 1) -> np.ndarray:
        return np.abs(self.element(out_port, in_port))

    def magnitude_db(self, out_port: int = 2, in_port: int = 1) -> np.ndarray:
        mag = np.maximum(self.magnitude(out_port, in_port), 1e-300)
        return 20.0 * np.log10(mag)

    def phase(self, out_port: int = 2, in_port: int = 1, unwrap: bool = True) -> np.ndarray:
        """Phase of S_{out,in} in radians, unwrapped by default."""
        ph = np.angle(self.element(out_port, in_port))
        return np.unwrap(ph) if unwrap else ph


@dataclass(frozen=True)
class SweepMap:
    """Complex S21 over a (magnon frequency x drive frequency) grid."""

    magnon_freqs: np.ndarray  # (n_magnon,) GHz
    drive_freqs: np.ndarray  # (n_drive,) GHz
    s21: np.ndarray  # (n_magnon, n_drive) complex

    def magnitude_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.maximum(np.abs(self.s21), 1e-300))


def _base_matrix(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Frequency-independent part of Omega, and K.

    Omega(w) = w * I + base with
    base = -diag(w_p - i/2 loss_p) + (i/2) K K^dagger - G.
    """
    k = spec.coupling_matrix()
    g = spec.internal_coupling_matrix()
    base = -np.diag(spec.mode_frequencies()) + 0.5j * (k @ k.conj().T) - g
    return base, k


def build_omega(spec: SystemSpec, freq: float) -> OmegaMatrix:
    """Coupled-mode matrix Omega at one drive frequency (GHz)."""
    base, _ = _base_matrix(spec)
    return OmegaMatrix(matrix=freq * np.eye(spec.n_modes) + base, frequency=freq)


def _solve_batch(omegas: np.ndarray, k: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """S matrices for a stack of Omega matrices; raises on singular points."""
    cond = np.linalg.cond(omegas)
    bad = np.nonzero(~(cond < COND_LIMIT))[0]
    if bad.size:
        i = int(bad[0])
        raise SingularFrequencyError(float(freqs[i]), float(cond[i]))
    x = np.linalg.solve(omegas, np.broadcast_to(k.conj(), omegas.shape[:-2] + k.shape))
    n = k.shape[1]
    return np.eye(n) - 1j * np.einsum("pn,...pm->...nm", k, x)


def s_matrix(spec: SystemSpec, freq: float) -> np.ndarray:
    """Full scattering matrix at one drive frequency.

    Returns the (n_ports, n_ports) complex matrix; entry [1, 0] is the
    conventional S_21 transmission from port 1 into port 2.
    """
    base, k = _base_matrix(spec)
    omega = freq * np.eye(spec.n_modes) + base
    return _solve_batch(omega[None], k, np.asarray([freq]))[0]


def sweep(spec: SystemSpec, grid: FrequencyGrid) -> Spectrum:
    """Evaluate the S-matrix on every grid point.

    Output ordering always matches the grid. Propagates
    SingularFrequencyError naming the offending frequency.
    """
    freqs = grid.values()
    base, k = _base_matrix(spec)
    eye = np.eye(spec.n_modes)
    omegas = freqs[:, None, None] * eye + base
    return Spectrum(freqs=freqs, s=_solve_batch(omegas, k, freqs))


def _sweep_s21_with_magnon(
    spec: SystemSpec, magnon_index: int, magnon_freq: float, freqs: np.ndarray
) -> np.ndarray:
    retuned = spec.with_magnon_frequency(magnon_index, magnon_freq)
    base, k = _base_matrix(retuned)
    eye = np.eye(retuned.n_modes)
    omegas = freqs[:, None, None] * eye + base
    s = _solve_batch(omegas, k, freqs)
    return s[:, 1, 0]


def magnon_map(
    spec: SystemSpec,
    magnon_index: int,
    magnon_grid: FrequencyGrid,
    drive_grid: FrequencyGrid,
    workers: int | None = None,
) -> SweepMap:
    """Complex S21 over a 2D (magnon frequency x drive frequency) grid.

    Columns are independent and may run on a thread pool; ``workers``
    defaults to the CAVIMAG_THREADS environment variable (1 = serial).
    Results are assembled in grid order regardless of execution order.
    """
    if not 0 <= magnon_index < spec.n_magnons:
        raise IndexError(f"magnon index {magnon_index} out of range (n={spec.n_magnons})")
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1"))
    m_freqs = magnon_grid.values()
    d_freqs = drive_grid.values()
    out = np.empty((m_freqs.size, d_freqs.size), dtype=complex)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = pool.map(
                lambda wm: _sweep_s21_with_magnon(spec, magnon_index, wm, d_freqs), m_freqs
            )
            for i, row in enumerate(rows):
                out[i] = row
    else:
        for i, wm in enumerate(m_freqs):
            out[i] = _sweep_s21_with_magnon(spec, magnon_index, wm, d_freqs)
    return SweepMap(magnon_freqs=m_freqs, drive_freqs=d_freqs, s21=out)
