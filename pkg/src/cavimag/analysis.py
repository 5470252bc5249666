"""Spectral feature extraction: resonances, antiresonances, phase jumps, branches.

The phase-jump sign of a feature is read the way it appears on a wrapped
phase trace: positive when the phase rises from about -pi/2 to about +pi/2
across the feature, negative for the reverse. Opposed jumps between a mode
and an antiresonance signal level repulsion of their hybridized branches;
equal jumps signal level attraction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .closedform import CouplingBehavior
from .engine import Spectrum, SweepMap, sweep
from .model import FrequencyGrid, SystemSpec


class FeatureKind(enum.Enum):
    RESONANCE = "resonance"
    ANTIRESONANCE = "antiresonance"


class PhaseJump(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SpectralFeature:
    kind: FeatureKind
    frequency: float  # GHz
    prominence: float  # dB
    phase_jump: PhaseJump
    linewidth_estimate: float  # GHz, half-prominence width


@dataclass(frozen=True)
class AntiresonanceBranch:
    """Extracted antiresonance branch pair over a magnon sweep.

    ``lower``/``upper`` hold the per-column branch frequencies (NaN where a
    branch dip was undetectable); inside a merged (level-attraction) region
    both hold the common coalesced position and ``merged_mask`` is True.
    """

    magnon_frequencies: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    merged_mask: np.ndarray


@dataclass(frozen=True)
class ConvergenceReport:
    mode_counts: np.ndarray
    antires_freq: np.ndarray  # GHz, NaN where absent
    reference_freq: float
    mismatch: np.ndarray  # |antires_freq - reference|, GHz


def _fold(phi):
    """Wrap phase to (-pi, pi]."""
    return np.pi - (np.pi - np.asarray(phi)) % (2.0 * np.pi)


def _parabolic_refine(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vertex of the parabola through three samples around index i."""
    if i <= 0 or i >= x.size - 1:
        return float(x[i])
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if denom == 0.0:
        return float(x[i])
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    shift = float(np.clip(shift, -0.5, 0.5))
    return float(x[i] + shift * (x[i + 1] - x[i]))


def find_extrema(
    freqs: np.ndarray, mag_db: np.ndarray, min_prominence_db: float = 3.0
) -> tuple[list[tuple[float, float, float, int]], list[tuple[float, float, float, int]]]:
    """Local maxima and minima of a dB trace above a prominence threshold.

    Returns (peaks, dips) as lists of (frequency, prominence_db,
    width_ghz, width_samples); positions are refined by 3-point parabolic
    interpolation and sorted by frequency.
    """
    spacing = float(np.mean(np.diff(freqs)))

    def scan(trace):
        idx, props = find_peaks(trace, prominence=min_prominence_db)
        if idx.size == 0:
            return []
        widths = peak_widths(trace, idx, rel_height=0.5)[0]
        out = []
        for k, i in enumerate(idx):
            f0 = _parabolic_refine(freqs, trace, int(i))
            out.append((f0, float(props["prominences"][k]), float(widths[k] * spacing), float(widths[k])))
        return sorted(out)

    return scan(mag_db), scan(-mag_db)


def find_features(
    spectrum: Spectrum,
    min_prominence_db: float = 3.0,
    out_port: int = 2,
    in_port: int = 1,
) -> list[SpectralFeature]:
    """All |S| extrema of one S-parameter trace, classified and phase-tagged.

    Resonances are local maxima of |S| in dB, antiresonances local minima;
    features narrower than 3 grid samples keep an indeterminate phase jump
    instead of being dropped.
    """
    if spectrum.freqs.size < 5:
        raise ValueError(f"need at least 5 spectrum points, got {spectrum.freqs.size}")
    db = spectrum.magnitude_db(out_port, in_port)
    peaks, dips = find_extrema(spectrum.freqs, db, min_prominence_db)
    features = []
    for kind, found in ((FeatureKind.RESONANCE, peaks), (FeatureKind.ANTIRESONANCE, dips)):
        for f0, prom, width, width_samples in found:
            features.append(
                SpectralFeature(
                    kind=kind,
                    frequency=f0,
                    prominence=prom,
                    phase_jump=PhaseJump.INDETERMINATE,
                    linewidth_estimate=width,
                )
            )
    features.sort(key=lambda f: f.frequency)
    widths_ok = {}
    for kind, found in ((FeatureKind.RESONANCE, peaks), (FeatureKind.ANTIRESONANCE, dips)):
        for f0, _, _, width_samples in found:
            widths_ok[(kind, f0)] = width_samples >= 3.0
    tagged = []
    for feat in features:
        if widths_ok.get((feat.kind, feat.frequency), True):
            jump = phase_jump(spectrum, feat, neighbors=features, out_port=out_port, in_port=in_port)
            feat = replace(feat, phase_jump=jump)
        tagged.append(feat)
    return tagged


def phase_jump(
    spectrum: Spectrum,
    feature: SpectralFeature,
    neighbors: list[SpectralFeature] | None = None,
    out_port: int = 2,
    in_port: int = 1,
) -> PhaseJump:
    """Sign of the phase jump across a feature.

    The phase is sampled 5 linewidths on either side (clipped to the
    midpoints toward neighboring features when they crowd, and to the grid),
    wrapped to (-pi, pi], and differenced. The magnitude of the difference
    must exceed pi/2, and stay below 3 pi/2, for a determinate verdict.
    """
    freqs = spectrum.freqs
    phase_u = spectrum.phase(out_port, in_port, unwrap=True)
    f0 = feature.frequency
    offset = 5.0 * max(feature.linewidth_estimate, float(np.mean(np.diff(freqs))))
    lo = f0 - offset
    hi = f0 + offset
    if neighbors:
        below = [n.frequency for n in neighbors if n.frequency < f0 - 1e-15]
        above = [n.frequency for n in neighbors if n.frequency > f0 + 1e-15]
        if below:
            lo = max(lo, 0.5 * (f0 + max(below)))
        if above:
            hi = min(hi, 0.5 * (f0 + min(above)))
    lo = float(np.clip(lo, freqs[0], freqs[-1]))
    hi = float(np.clip(hi, freqs[0], freqs[-1]))
    if not lo < f0 < hi:
        return PhaseJump.INDETERMINATE
    phi_lo = _fold(np.interp(lo, freqs, phase_u))
    phi_hi = _fold(np.interp(hi, freqs, phase_u))
    diff = float(phi_hi - phi_lo)
    if not 0.5 * math.pi < abs(diff) < 1.5 * math.pi:
        return PhaseJump.INDETERMINATE
    return PhaseJump.POSITIVE if diff > 0 else PhaseJump.NEGATIVE


def phase_factor_to_jump(phase_factor: float) -> PhaseJump:
    """Map a feature's phase factor (0 or pi, mod 2 pi) to its jump sign."""
    folded = abs(float(_fold(phase_factor)))
    if folded < 0.25 * math.pi:
        return PhaseJump.NEGATIVE
    if abs(folded - math.pi) < 0.25 * math.pi:
        return PhaseJump.POSITIVE
    return PhaseJump.INDETERMINATE


def predict_coupling_behavior(antires_jump: PhaseJump, mode_jump: PhaseJump) -> CouplingBehavior:
    """Opposed phase jumps give level repulsion, equal jumps level attraction."""
    if PhaseJump.INDETERMINATE in (antires_jump, mode_jump):
        raise ValueError("cannot predict coupling behavior from an indeterminate phase jump")
    if antires_jump is mode_jump:
        return CouplingBehavior.ATTRACTION
    return CouplingBehavior.REPULSION


# ---------------------------------------------------------------------------
# Branch extraction from 2D maps
# ---------------------------------------------------------------------------


def _column_minima(
    freqs: np.ndarray,
    db: np.ndarray,
    s21: np.ndarray,
    window: tuple[float, float],
    min_prominence_db: float,
    phase_probe: float = 0.002,
) -> list[tuple[float, float, bool | None]]:
    """Dips of one map column inside the window.

    Returns (frequency, prominence, zero_like) per dip. A true
    transmission zero steps the phase by about pi across a short probe
    interval; a shallow valley between features does not. The probe is
    kept clear of neighboring poles (trace maxima); when a pole sits too
    close to resolve the step, zero_like is None (undecidable) rather
    than False, since tightly bound zero-pole pairs occur for
    weakly coupled, far-detuned magnon branches.
    """
    sel = (freqs >= window[0]) & (freqs <= window[1])
    f = freqs[sel]
    trace = -db[sel]
    if f.size < 5:
        return []
    idx, props = find_peaks(trace, prominence=min_prominence_db)
    if idx.size == 0:
        return []
    phase_u = np.unwrap(np.angle(s21[sel]))
    spacing = float(np.mean(np.diff(f)))
    peak_idx, _ = find_peaks(-trace, prominence=1.0)
    peak_pos = f[peak_idx] if peak_idx.size else np.array([])
    out = []
    positions = [_parabolic_refine(f, trace, int(i)) for i in idx]
    for k, f0 in enumerate(positions):
        clearances = [abs(p - f0) for p in peak_pos] + [
            0.5 * abs(p - f0) for p in positions if abs(p - f0) > 1e-15
        ]
        clearance = min(clearances) if clearances else math.inf
        offset = max(3.0 * spacing, min(phase_probe, 0.5 * clearance))
        zero_like: bool | None
        if clearance < 2.0 * offset:
            zero_like = None
        else:
            lo = float(np.clip(f0 - offset, f[0], f[-1]))
            hi = float(np.clip(f0 + offset, f[0], f[-1]))
            step = float(_fold(np.interp(hi, f, phase_u)) - _fold(np.interp(lo, f, phase_u)))
            zero_like = 0.5 * math.pi < abs(step) < 1.5 * math.pi
        out.append((f0, float(props["prominences"][k]), zero_like))
    return out


def _assign_pair(
    cands: list[tuple[float, float]], prev: tuple[float, float], jump_tol: float
) -> tuple[float, float]:
    """Pick the candidate pair closest to the previous (lower, upper) branches.

    A component farther than ``jump_tol`` from its predecessor is treated
    as undetected (NaN) rather than snapped to a spurious dip.
    """
    freqs = [c[0] for c in cands]
    if len(freqs) == 1:
        x = freqs[0]
        if abs(x - prev[0]) <= abs(x - prev[1]):
            lo, hi = x, math.nan
        else:
            lo, hi = math.nan, x
    else:
        best = None
        for i in range(len(freqs)):
            for j in range(len(freqs)):
                if i == j or freqs[i] > freqs[j]:
                    continue
                cost = abs(freqs[i] - prev[0]) + abs(freqs[j] - prev[1])
                if best is None or cost < best[0]:
                    best = (cost, freqs[i], freqs[j])
        assert best is not None
        lo, hi = best[1], best[2]
    if math.isfinite(lo) and abs(lo - prev[0]) > jump_tol:
        lo = math.nan
    if math.isfinite(hi) and abs(hi - prev[1]) > jump_tol:
        hi = math.nan
    return lo, hi


def extract_branches(
    sweep_map: SweepMap,
    window: tuple[float, float] | None = None,
    min_prominence_db: float = 1.0,
    merge_depth_fraction: float = 0.4,
) -> AntiresonanceBranch:
    """Follow the two antiresonance branches across a magnon sweep.

    Per magnon column, |S21| dips inside ``window`` are located and
    associated to the lower/upper branch by continuity, starting from an
    anchor column that shows both dips unambiguously and propagating in
    both directions. A column counts as merged (level-attraction
    coalescence) when it has lost its deep dips: real transmission zeros
    produce dips tens of dB deep, while a coalesced (complex-zero) region
    only shows a shallow bowl, so a column whose best dip prominence falls
    below ``merge_depth_fraction`` times the map-wide maximum is flagged
    merged and both branches take the bowl position. Columns with no
    usable dip are recorded as gaps (NaN), never interpolated into fits.
    """
    freqs = sweep_map.drive_freqs
    if window is None:
        window = (float(freqs[0]), float(freqs[-1]))
    db = sweep_map.magnitude_db()
    wm = sweep_map.magnon_freqs
    n_cols = wm.size
    columns = [
        _column_minima(freqs, db[i], sweep_map.s21[i], window, min_prominence_db)
        for i in range(n_cols)
    ]
    # keep confirmed zeros and undecidable dips; drop confirmed valleys
    zero_cols = [[(f, p) for f, p, z in col if z is not False] for col in columns]

    # depth statistics saturate at 80 dB: a grid sample landing arbitrarily
    # close to an exact zero must not skew the merge threshold
    prom_cap = 80.0
    col_depth = [min(max(c[1] for c in col), prom_cap) if col else 0.0 for col in columns]
    max_prom = max(col_depth, default=0.0)
    deep = max(20.0, merge_depth_fraction * max_prom)
    merged = np.array(
        [bool(col) and depth < deep for col, depth in zip(columns, col_depth)], dtype=bool
    )

    drive_step = float(np.mean(np.diff(freqs)))
    magnon_step = float(np.mean(np.diff(wm))) if n_cols > 1 else drive_step
    jump_tol = max(5.0 * drive_step, 4.0 * magnon_step)

    lower = np.full(n_cols, np.nan)
    upper = np.full(n_cols, np.nan)

    def bowl_position(col):
        top = sorted(col, key=lambda c: -c[1])[:2]
        return float(np.mean([c[0] for c in top]))

    anchor = None
    for i in range(n_cols):
        if not merged[i] and len(zero_cols[i]) >= 2:
            anchor = i
            break
    if anchor is None:
        # no column shows a resolved zero pair; report bowl/single positions only
        for i, col in enumerate(columns):
            if col:
                lower[i] = upper[i] = bowl_position(col)
        return AntiresonanceBranch(wm.copy(), lower, upper, merged)

    top = sorted(zero_cols[anchor], key=lambda c: -c[1])[:2]
    pair = sorted(c[0] for c in top)
    lower[anchor], upper[anchor] = pair[0], pair[1]

    for direction in (1, -1):
        prev = (lower[anchor], upper[anchor])
        rng = range(anchor + 1, n_cols) if direction == 1 else range(anchor - 1, -1, -1)
        for i in rng:
            if merged[i]:
                if columns[i]:
                    pos = bowl_position(columns[i])
                    lower[i] = upper[i] = pos
                    prev = (pos, pos)
                continue
            if not zero_cols[i]:
                continue
            # crossing a merge boundary relaxes the continuity guard
            tol = jump_tol if prev[0] != prev[1] else 4.0 * jump_tol
            lo, hi = _assign_pair(zero_cols[i], prev, tol)
            lower[i], upper[i] = lo, hi
            prev = (
                lo if math.isfinite(lo) else prev[0],
                hi if math.isfinite(hi) else prev[1],
            )
    return AntiresonanceBranch(
        magnon_frequencies=wm.copy(),
        lower=lower,
        upper=upper,
        merged_mask=merged,
    )


# ---------------------------------------------------------------------------
# Mode-count convergence study
# ---------------------------------------------------------------------------


def convergence_study(
    full_spec: SystemSpec,
    ordering: list[int] | None,
    reference_freq: float,
    grid: FrequencyGrid | None = None,
    min_prominence_db: float = 3.0,
) -> ConvergenceReport:
    """Antiresonance position of the k-mode sub-cavity versus a fixed reference.

    For every prefix of ``ordering`` (default: declared mode order) the
    photon-only sub-system is swept and the antiresonance nearest the
    reference is recorded; entries with no detectable antiresonance are NaN.
    The reference is an externally supplied constant, never computed here.
    """
    n = full_spec.n_photons
    order = list(range(n)) if ordering is None else list(ordering)
    if sorted(order) != list(range(n)):
        raise ValueError("ordering must be a permutation of all photon-mode indices")
    if grid is None:
        freqs = [m.frequency for m in full_spec.photon_modes]
        grid = FrequencyGrid(min(freqs) - 0.5, max(freqs) + 0.5, 20001)
    counts = np.arange(1, n + 1)
    found = np.full(n, np.nan)
    for k in counts:
        sub = full_spec.subsystem(order[:k]).without_magnons()
        spectrum = sweep(sub, grid)
        try:
            features = find_features(spectrum, min_prominence_db)
        except ValueError:
            continue
        dips = [f.frequency for f in features if f.kind is FeatureKind.ANTIRESONANCE]
        if dips:
            found[k - 1] = min(dips, key=lambda f: abs(f - reference_freq))
    return ConvergenceReport(
        mode_counts=counts,
        antires_freq=found,
        reference_freq=reference_freq,
        mismatch=np.abs(found - reference_freq),
    )
