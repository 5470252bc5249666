"""Closed-form transmissions and antiresonance algebra for one- and two-mode cavities.

Covers the three tractable networks probed through two ports: a photon
coupled to a magnon, two photons, and two photons sharing one magnon.
Every expression is validated against the exact matrix engine; where the
printed forms of the cross (port-interference) terms are ambiguous, the
engine algebra is authoritative and the resolved forms are used here.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import MagnonMode, PhotonMode, PortCoupling, SystemSpec

# Polariton / branch pairs closer than this (GHz) count as degenerate.
DEGENERACY_TOL = 1e-9


class NoFiniteAntiresonanceError(ArithmeticError):
    """Equal port dissipation with opposed phase factors: the antiresonance diverges."""


class DegenerateModesError(ArithmeticError):
    """Requested decomposition is singular because two branches coincide."""


class AntiresRegime(enum.Enum):
    BETWEEN = "between"  # antiresonance inside [w0, w1]
    BELOW_LOWER = "below_lower"  # below w0
    ABOVE_UPPER = "above_upper"  # above w1


class CouplingBehavior(enum.Enum):
    REPULSION = "repulsion"
    ATTRACTION = "attraction"


@dataclass(frozen=True)
class TwoModeParams:
    """Parameters of up to two photon modes, two ports and one magnon.

    gamma_pn / phi_pn index mode p and port n. Mode 1 may be left at its
    zeroed defaults for single-photon expressions.
    """

    omega0: float  # GHz
    gamma00: float
    gamma01: float
    phi00: float = 0.0
    phi01: float = 0.0
    omega1: float = 0.0
    gamma10: float = 0.0
    gamma11: float = 0.0
    phi10: float = 0.0
    phi11: float = 0.0
    g0: float = 0.0
    g1: float = 0.0
    omega_m: float = 0.0
    magnon_loss: float = 0.0

    def kappa(self, p: int, n: int) -> complex:
        gamma = (self.gamma00, self.gamma01, self.gamma10, self.gamma11)[2 * p + n]
        phi = (self.phi00, self.phi01, self.phi10, self.phi11)[2 * p + n]
        return math.sqrt(gamma) * cmath.exp(1j * phi)

    # -- phase factors and dissipation ratio ------------------------------

    @property
    def phi0(self) -> float:
        return self.phi01 - self.phi00

    @property
    def phi1(self) -> float:
        return self.phi11 - self.phi10

    @property
    def phi(self) -> float:
        """Phase-factor difference between the two photon modes."""
        return self.phi1 - self.phi0

    @property
    def delta(self) -> float:
        """External dissipation ratio sqrt(g10*g11 / (g00*g01)) of mode 1 to mode 0."""
        return math.sqrt(self.gamma10 * self.gamma11 / (self.gamma00 * self.gamma01))

    # -- damped frequencies ------------------------------------------------

    @property
    def omega0_tilde(self) -> complex:
        return self.omega0 - 0.5j * (self.gamma00 + self.gamma01)

    @property
    def omega1_tilde(self) -> complex:
        return self.omega1 - 0.5j * (self.gamma10 + self.gamma11)

    @property
    def omega_m_tilde(self) -> complex:
        return self.omega_m - 0.5j * self.magnon_loss

    # -- port-interference combinations ------------------------------------

    @property
    def through0(self) -> complex:
        """Port 0 -> port 1 amplitude of mode 0: kappa_01 * conj(kappa_00)."""
        return self.kappa(0, 1) * np.conj(self.kappa(0, 0))

    @property
    def through1(self) -> complex:
        return self.kappa(1, 1) * np.conj(self.kappa(1, 0))

    @property
    def crosstalk(self) -> complex:
        """Inter-mode damping amplitude via the shared ports."""
        return np.conj(self.kappa(0, 0)) * self.kappa(1, 0) + np.conj(
            self.kappa(0, 1)
        ) * self.kappa(1, 1)

    @property
    def crosstalk_numerator(self) -> complex:
        """Cross term entering the transmission numerator with the crosstalk."""
        gam = self.crosstalk
        return self.kappa(0, 1) * np.conj(self.kappa(1, 0)) * np.conj(gam) + self.kappa(
            1, 1
        ) * np.conj(self.kappa(0, 0)) * gam

    @property
    def mixing_amplitude(self) -> complex:
        """Coefficient of g0*g1 in the transmission numerator."""
        return self.kappa(0, 1) * np.conj(self.kappa(1, 0)) + self.kappa(1, 1) * np.conj(
            self.kappa(0, 0)
        )

    @property
    def c_factor(self) -> complex:
        """Magnon-path interference weight C = mixing_amplitude / through0."""
        return self.mixing_amplitude / self.through0

    # -- conversions --------------------------------------------------------

    def to_system(self, photons: int = 2, magnon: bool = True) -> SystemSpec:
        """Equivalent SystemSpec (for cross-checks against the matrix engine)."""
        modes = []
        couplings = ((self.g0,), (self.g1,)) if magnon else ((), ())
        mode0 = PhotonMode(
            "c0",
            self.omega0,
            (PortCoupling(self.gamma00, self.phi00), PortCoupling(self.gamma01, self.phi01)),
            couplings[0],
        )
        modes.append(mode0)
        if photons == 2:
            modes.append(
                PhotonMode(
                    "c1",
                    self.omega1,
                    (PortCoupling(self.gamma10, self.phi10), PortCoupling(self.gamma11, self.phi11)),
                    couplings[1],
                )
            )
        magnons = (MagnonMode("m", self.omega_m, self.magnon_loss),) if magnon else ()
        return SystemSpec(photon_modes=tuple(modes), magnon_modes=magnons, n_ports=2)


@dataclass(frozen=True)
class LorentzianTerm:
    """One pole term of a transmission: evaluates to -i * residue / (w - pole)."""

    pole: complex
    residue: complex

    def evaluate(self, freq):
        return -1j * self.residue / (np.asarray(freq, dtype=complex) - self.pole)


@dataclass(frozen=True)
class EffectiveAntiresonance:
    """Effective two-level description of a pair of interacting antiresonances."""

    omega_ar: complex  # bare antiresonance frequency, GHz
    g_ar_magnitude: float  # |g_ar|, GHz
    phi_ar: float  # radians: 0 -> repulsion, pi -> attraction
    g_ar_squared: complex  # signed squared coupling, GHz^2
    verdict: CouplingBehavior

    def branches(self, omega_m):
        return antires_branches(self.omega_ar, omega_m, self.g_ar_magnitude, self.phi_ar)


# ---------------------------------------------------------------------------
# One photon + one magnon
# ---------------------------------------------------------------------------


def s21_photon_magnon(params: TwoModeParams, freq):
    """Transmission of a single cavity mode coupled to a magnon.

    S21 = -i * sqrt(g00*g01) * Dm * e^{i phi0} / (D0~ * Dm - g0^2), with
    Dm = w - w_m and D0~ = w - w0~ the (damped) detunings. Vectorized
    over ``freq``.
    """
    w = np.asarray(freq, dtype=complex)
    dm = w - params.omega_m_tilde
    d0 = w - params.omega0_tilde
    return -1j * params.through0 * dm / (d0 * dm - params.g0**2)


def polariton_frequencies(params: TwoModeParams, omega_m=None):
    """Polariton pair of the photon-magnon system, ordered by real part.

    Supports an array of magnon frequencies; branches are then matched
    between adjacent sweep points by minimum-distance pairing.
    """
    wm = params.omega_m_tilde if omega_m is None else omega_m
    lo, hi = _level_pair(params.omega0_tilde, wm, params.g0**2)
    if np.ndim(wm) > 0:
        lo, hi = _track_pair(lo, hi)
    return lo, hi


def _level_pair(wa, wb, g_squared):
    """Roots of (w - wa)(w - wb) - g^2, split by the principal square root."""
    wa = np.asarray(wa, dtype=complex)
    wb = np.asarray(wb, dtype=complex)
    s = wa + wb
    root = np.sqrt((wb - wa) ** 2 + 4.0 * np.asarray(g_squared, dtype=complex))
    return 0.5 * (s - root), 0.5 * (s + root)


def _track_pair(lo, hi):
    """Re-pair two branch arrays so adjacent samples stay continuous."""
    lo = np.array(lo, dtype=complex)
    hi = np.array(hi, dtype=complex)
    for k in range(1, lo.size):
        keep = abs(lo[k] - lo[k - 1]) + abs(hi[k] - hi[k - 1])
        swap = abs(hi[k] - lo[k - 1]) + abs(lo[k] - hi[k - 1])
        if swap < keep:
            lo[k:], hi[k:] = hi[k:].copy(), lo[k:].copy()
    return lo, hi


def lorentzian_decomposition_photon_magnon(
    params: TwoModeParams,
) -> tuple[LorentzianTerm, LorentzianTerm]:
    """Exact two-pole decomposition of the photon-magnon transmission.

    The two residues share the phase factor e^{i phi0}; their remaining
    numerators are positive for a lossless system, which is what makes
    both polaritons carry the same phase jump.
    """
    lo, hi = polariton_frequencies(params)
    if abs(hi - lo) < DEGENERACY_TOL:
        raise DegenerateModesError(f"polaritons coincide at {lo:.9g} GHz")
    wm = params.omega_m_tilde
    amp = params.through0 / (hi - lo)
    return (
        LorentzianTerm(pole=lo, residue=amp * (wm - lo)),
        LorentzianTerm(pole=hi, residue=amp * (hi - wm)),
    )


def antires_phase_factor_photon_magnon(params: TwoModeParams) -> float:
    """Phase factor of the magnon antiresonance: phi0 + pi (mod 2 pi)."""
    return (params.phi0 + math.pi) % (2.0 * math.pi)


# ---------------------------------------------------------------------------
# Two photon modes
# ---------------------------------------------------------------------------


def s21_two_photons(params: TwoModeParams, freq, gamma_power: int = 2):
    """Transmission of two photon modes probed through two shared ports.

    ``gamma_power`` selects the power of |crosstalk| in the denominator
    correction; the default 2 is the choice that matches the exact engine
    (the regression suite documents this).
    """
    w = np.asarray(freq, dtype=complex)
    d0 = w - params.omega0_tilde
    d1 = w - params.omega1_tilde
    num = (
        params.through0 * d1
        + params.through1 * d0
        - 0.5j * params.crosstalk_numerator
    )
    den = d0 * d1 + 0.25 * abs(params.crosstalk) ** gamma_power
    return -1j * num / den


def two_photon_resonances(params: TwoModeParams, gamma_power: int = 2):
    """Resonance pair of the two-photon system (poles of the transmission)."""
    wa, wb = params.omega0_tilde, params.omega1_tilde
    s = wa + wb
    root = np.sqrt(complex((wb - wa) ** 2 - abs(params.crosstalk) ** gamma_power))
    return 0.5 * (s - root), 0.5 * (s + root)


def lorentzian_decomposition_two_photons(
    params: TwoModeParams, exact: bool = True, gamma_power: int = 2
) -> tuple[LorentzianTerm, LorentzianTerm]:
    """Two-pole decomposition of the two-photon transmission.

    With ``exact=True`` the poles and residues come from the full rational
    form (pointwise identical to s21_two_photons). With ``exact=False``
    the poles sit at the damped mode frequencies and each residue carries
    the crosstalk correction split evenly, which is accurate when the mode
    separation dwarfs the crosstalk.
    """
    if exact:
        lo, hi = two_photon_resonances(params, gamma_power)
        if abs(hi - lo) < DEGENERACY_TOL:
            raise DegenerateModesError(f"transmission poles coincide at {lo:.9g} GHz")

        def num(w):
            return (
                params.through0 * (w - params.omega1_tilde)
                + params.through1 * (w - params.omega0_tilde)
                - 0.5j * params.crosstalk_numerator
            )

        return (
            LorentzianTerm(pole=lo, residue=num(lo) / (lo - hi)),
            LorentzianTerm(pole=hi, residue=num(hi) / (hi - lo)),
        )
    w0, w1 = params.omega0_tilde, params.omega1_tilde
    if abs(w1 - w0) < DEGENERACY_TOL:
        raise DegenerateModesError("mode frequencies coincide; no isolated-mode split")
    corr = 0.5j * params.crosstalk_numerator / (w1 - w0)
    return (
        LorentzianTerm(pole=w0, residue=params.through0 + corr),
        LorentzianTerm(pole=w1, residue=params.through1 - corr),
    )


def _one_plus_delta_phase(params: TwoModeParams) -> complex:
    z = 1.0 + params.delta * cmath.exp(1j * params.phi)
    if abs(z) < 1e-12:
        raise NoFiniteAntiresonanceError(
            "equal dissipation ratio with opposed phase factors: antiresonance "
            "frequency diverges"
        )
    return z


def antires_freq_two_photons(params: TwoModeParams) -> complex:
    """Bare antiresonance frequency (w1 + delta e^{i Phi} w0) / (1 + delta e^{i Phi})."""
    z = params.delta * cmath.exp(1j * params.phi)
    return (params.omega1 + z * params.omega0) / _one_plus_delta_phase(params)


def classify_antires_regime(delta: float, phi: float) -> AntiresRegime:
    """Which side of the two mode frequencies the antiresonance falls on.

    Requires delta > 0 and phi in {0, pi}. In-phase modes interfere
    destructively between their frequencies; opposed modes push the
    antiresonance below the lower mode (delta > 1) or above the upper one
    (delta < 1).
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    phi_mod = phi % (2.0 * math.pi)
    if math.isclose(phi_mod, 0.0, abs_tol=1e-9) or math.isclose(
        phi_mod, 2.0 * math.pi, abs_tol=1e-9
    ):
        return AntiresRegime.BETWEEN
    if not math.isclose(phi_mod, math.pi, abs_tol=1e-9):
        raise ValueError(f"phi must be 0 or pi, got {phi}")
    if math.isclose(delta, 1.0, rel_tol=0.0, abs_tol=1e-12):
        raise NoFiniteAntiresonanceError(
            "delta = 1 with opposed phase factors: no finite antiresonance"
        )
    return AntiresRegime.BELOW_LOWER if delta > 1.0 else AntiresRegime.ABOVE_UPPER


def antires_phase_factor_two_photons(params: TwoModeParams) -> float:
    """Phase factor of the two-photon antiresonance (mod 2 pi).

    arg(1 + delta e^{i Phi}), advanced by pi when the antiresonance sits
    between the two mode frequencies (in-phase modes).
    """
    base = cmath.phase(_one_plus_delta_phase(params))
    regime = classify_antires_regime(params.delta, params.phi)
    if regime is AntiresRegime.BETWEEN:
        base += math.pi
    return base % (2.0 * math.pi)


# ---------------------------------------------------------------------------
# Two photons + one magnon
# ---------------------------------------------------------------------------


def s21_two_photons_magnon(params: TwoModeParams, freq, gamma_power: int = 2):
    """Transmission of two photon modes sharing one magnon.

    Reduces pointwise to s21_two_photons when both magnon couplings vanish.
    """
    w = np.asarray(freq, dtype=complex)
    d0 = w - params.omega0_tilde
    d1 = w - params.omega1_tilde
    dm = w - params.omega_m_tilde
    g0, g1 = params.g0, params.g1
    gam = params.crosstalk
    num = (
        params.through0 * (d1 * dm - g1**2)
        + params.through1 * (d0 * dm - g0**2)
        + params.mixing_amplitude * g0 * g1
        - 0.5j * params.crosstalk_numerator * dm
    )
    den = (
        d0 * d1 * dm
        - g0**2 * d1
        - g1**2 * d0
        + 0.25 * abs(gam) ** gamma_power * dm
        + 0.5j * (gam + np.conj(gam)) * g0 * g1
    )
    return -1j * num / den


def three_resonances(params: TwoModeParams) -> tuple[complex, complex, complex]:
    """The three transmission poles when both photons couple to the magnon.

    Built from the polariton pair of each photon mode (ordered by real
    part): the outer entries are the lower polariton of the lower pair and
    the upper polariton of the upper pair; the middle one combines the two
    inner polaritons. When both couplings vanish the middle entry is a
    spurious artifact of the construction and carries no resonance.
    """
    wm = params.omega_m_tilde
    lo0, hi0 = _level_pair(params.omega0_tilde, wm, params.g0**2)
    lo1, hi1 = _level_pair(params.omega1_tilde, wm, params.g1**2)
    return complex(lo0), complex(hi0 + lo1 - wm), complex(hi1)


# Sign of the C * g0 * g1 interference contribution in the squared
# effective coupling, as fixed by the zeros of the exact engine numerator.
_GAR_CROSS_SIGN = -1.0


def effective_coupling(params: TwoModeParams) -> EffectiveAntiresonance:
    """Effective coupling between the magnon-like and bare antiresonances.

    g_ar^2 = (g1^2 + delta e^{i Phi} g0^2 - C g0 g1) / (1 + delta e^{i Phi});
    a positive real square means level repulsion, a negative one level
    attraction, and the general complex case is reported through the
    argument of g_ar^2 with the verdict set by the sign of its real part.
    """
    z = _one_plus_delta_phase(params)
    zphase = params.delta * cmath.exp(1j * params.phi)
    g_squared = (
        params.g1**2
        + zphase * params.g0**2
        + _GAR_CROSS_SIGN * params.c_factor * params.g0 * params.g1
    ) / z
    magnitude = math.sqrt(abs(g_squared))
    if magnitude == 0.0:
        phi_ar = 0.0
    else:
        phi_ar = cmath.phase(g_squared) % (2.0 * math.pi)
        if math.isclose(phi_ar, 2.0 * math.pi, abs_tol=1e-12):
            phi_ar = 0.0
    verdict = (
        CouplingBehavior.REPULSION if g_squared.real >= 0.0 else CouplingBehavior.ATTRACTION
    )
    return EffectiveAntiresonance(
        omega_ar=antires_freq_two_photons(params),
        g_ar_magnitude=magnitude,
        phi_ar=phi_ar,
        g_ar_squared=complex(g_squared),
        verdict=verdict,
    )


def antires_branches(omega_ar, omega_m, g_ar_magnitude: float, phi_ar: float):
    """Hybridized antiresonance branch pair over magnon frequency.

    w_ar(+/-) = [w_ar + w_m +/- sqrt((w_ar - w_m)^2 + 4 |g|^2 e^{i phi})]/2
    with the principal square root; for arrays of magnon frequencies the
    two branches are kept continuous by minimum-distance pairing.
    """
    g_squared = g_ar_magnitude**2 * cmath.exp(1j * phi_ar)
    lo, hi = _level_pair(np.asarray(omega_ar, dtype=complex), omega_m, g_squared)
    if np.ndim(omega_m) > 0:
        lo, hi = _track_pair(lo, hi)
        return lo, hi
    return complex(lo), complex(hi)


def effective_hamiltonian_eigenvalues(omega_ar, omega_m, g_ar_magnitude: float, phi_ar: float):
    """Eigenvalues of the effective 2x2 antiresonance Hamiltonian.

    The matrix is [[w_ar, g], [g e^{i phi}, w_m]] with g = |g_ar| real and
    the coupling phase on the conjugate element; eigenvalues are returned
    sorted by (real, imag). Independent code path from antires_branches,
    with which it agrees identically.
    """
    w_ar = np.asarray(omega_ar, dtype=complex)
    w_m = np.asarray(omega_m, dtype=complex)
    w_ar, w_m = np.broadcast_arrays(w_ar, w_m)
    shape = w_ar.shape
    h = np.empty(shape + (2, 2), dtype=complex)
    h[..., 0, 0] = w_ar
    h[..., 0, 1] = g_ar_magnitude
    h[..., 1, 0] = g_ar_magnitude * cmath.exp(1j * phi_ar)
    h[..., 1, 1] = w_m
    vals = np.linalg.eigvals(h)
    order = np.lexsort((vals.imag, vals.real), axis=-1)
    vals = np.take_along_axis(vals, order, axis=-1)
    if shape == ():
        return complex(vals[..., 0]), complex(vals[..., 1])
    return vals[..., 0], vals[..., 1]
