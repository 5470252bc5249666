"""Domain types for cavity-magnon networks: modes, ports, couplings, systems.

All frequencies and rates are ordinary frequencies in GHz (not angular);
the coupled-mode equations are form-invariant under that choice because
every symbol (mode frequency, damping rate, coupling strength) scales by
the same factor. All phases are in radians.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

# RWA validity thresholds: internal coupling g / sqrt(w_q * w_p) and
# port coupling sqrt(gamma) / sqrt(w_p) must stay below this ratio.
RWA_RATIO = 0.1


class ConfigError(ValueError):
    """Raised when a configuration file or system definition is invalid."""


@dataclass(frozen=True)
class PortCoupling:
    """External coupling of one mode to one port.

    The complex coupling amplitude is sqrt(gamma) * exp(i * phase); it is
    reconstructed on demand and never stored redundantly.
    """

    gamma: float  # external damping rate, GHz
    phase: float = 0.0  # coupling phase, radians (canonically 0 or pi)

    @property
    def kappa(self) -> complex:
        """Complex coupling amplitude sqrt(gamma) * e^{i phase}."""
        return math.sqrt(self.gamma) * cmath.exp(1j * self.phase)


@dataclass(frozen=True)
class PhotonMode:
    """A photonic cavity mode with its port and magnon couplings."""

    label: str
    frequency: float  # GHz
    ports: tuple[PortCoupling, ...]  # exactly one entry per declared port
    magnon_couplings: tuple[float, ...] = ()  # g to each magnon, GHz
    intrinsic_loss: float = 0.0  # non-port damping, GHz

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "magnon_couplings", tuple(self.magnon_couplings))

    @property
    def total_external_damping(self) -> float:
        return sum(p.gamma for p in self.ports)


@dataclass(frozen=True)
class MagnonMode:
    """A magnon mode; couples only through photon modes, never to ports."""

    label: str
    frequency: float  # GHz
    intrinsic_loss: float = 0.0  # linewidth, GHz


@dataclass(frozen=True)
class SystemSpec:
    """Complete mode/port network.

    Mode ordering is photons first, then magnons; the port-coupling matrix
    K has one row per mode (identically zero for magnons) and one column
    per port.
    """

    photon_modes: tuple[PhotonMode, ...]
    magnon_modes: tuple[MagnonMode, ...] = ()
    n_ports: int = 2
    photon_photon_couplings: tuple[tuple[int, int, complex], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "photon_modes", tuple(self.photon_modes))
        object.__setattr__(self, "magnon_modes", tuple(self.magnon_modes))
        object.__setattr__(
            self,
            "photon_photon_couplings",
            tuple((int(p), int(q), complex(g)) for p, q, g in self.photon_photon_couplings),
        )

    @property
    def n_photons(self) -> int:
        return len(self.photon_modes)

    @property
    def n_magnons(self) -> int:
        return len(self.magnon_modes)

    @property
    def n_modes(self) -> int:
        return self.n_photons + self.n_magnons

    @property
    def mode_labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.photon_modes) + tuple(m.label for m in self.magnon_modes)

    def coupling_matrix(self) -> np.ndarray:
        """Port-coupling matrix K, shape (n_modes, n_ports); magnon rows are zero."""
        k = np.zeros((self.n_modes, self.n_ports), dtype=complex)
        for p, mode in enumerate(self.photon_modes):
            for n, pc in enumerate(mode.ports[: self.n_ports]):
                k[p, n] = pc.kappa
        return k

    def internal_coupling_matrix(self) -> np.ndarray:
        """Hermitian internal-coupling matrix G, shape (n_modes, n_modes)."""
        g = np.zeros((self.n_modes, self.n_modes), dtype=complex)
        np_ = self.n_photons
        for p, mode in enumerate(self.photon_modes):
            for m, gm in enumerate(mode.magnon_couplings):
                g[p, np_ + m] = gm
                g[np_ + m, p] = gm
        for p, q, gpq in self.photon_photon_couplings:
            g[q, p] = gpq
            g[p, q] = np.conj(gpq)
        return g

    def mode_frequencies(self) -> np.ndarray:
        """Complex mode frequencies w_p - (i/2) * intrinsic_loss, shape (n_modes,)."""
        freqs = [m.frequency - 0.5j * m.intrinsic_loss for m in self.photon_modes]
        freqs += [m.frequency - 0.5j * m.intrinsic_loss for m in self.magnon_modes]
        return np.asarray(freqs, dtype=complex)

    def with_magnon_frequency(self, index: int, frequency: float) -> "SystemSpec":
        """Copy of this system with magnon ``index`` retuned to ``frequency`` (GHz)."""
        magnons = list(self.magnon_modes)
        magnons[index] = replace(magnons[index], frequency=frequency)
        return replace(self, magnon_modes=tuple(magnons))

    def without_magnons(self) -> "SystemSpec":
        """Photon-only copy of this system (magnon couplings dropped)."""
        photons = tuple(replace(m, magnon_couplings=()) for m in self.photon_modes)
        return replace(self, photon_modes=photons, magnon_modes=())

    def subsystem(self, photon_indices: Iterable[int]) -> "SystemSpec":
        """Sub-network keeping only the selected photon modes (magnons retained)."""
        idx = list(photon_indices)
        photons = tuple(self.photon_modes[i] for i in idx)
        return replace(self, photon_modes=photons)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform (linear) frequency grid in GHz."""

    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.points < 2:
            raise ConfigError(f"grid needs at least 2 points, got {self.points}")
        if not self.start < self.stop:
            raise ConfigError(f"grid start must be below stop, got [{self.start}, {self.stop}]")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / (self.points - 1)


@dataclass(frozen=True)
class Diagnostic:
    severity: Literal["error", "warning"]
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"


def validate_system(spec: SystemSpec) -> list[Diagnostic]:
    """Check a system definition; returns an empty list when fully valid.

    Errors are produced for structural problems (negative damping rates,
    port-count mismatches, non-Hermitian internal couplings, nonpositive
    frequencies); warnings for couplings strong enough that the
    rotating-wave model itself stops being trustworthy.
    """
    out: list[Diagnostic] = []

    def err(msg: str) -> None:
        out.append(Diagnostic("error", msg))

    def warn(msg: str) -> None:
        out.append(Diagnostic("warning", msg))

    if spec.n_ports < 1:
        err(f"system must declare at least one port, got {spec.n_ports}")

    for mode in spec.photon_modes:
        if mode.frequency <= 0:
            err(f"photon mode {mode.label!r} has nonpositive frequency {mode.frequency}")
        if mode.intrinsic_loss < 0:
            err(f"photon mode {mode.label!r} has negative intrinsic loss")
        if len(mode.ports) != spec.n_ports:
            err(
                f"photon mode {mode.label!r} declares {len(mode.ports)} port couplings, "
                f"expected {spec.n_ports}"
            )
        for n, pc in enumerate(mode.ports):
            if pc.gamma < 0:
                err(f"photon mode {mode.label!r}, port {n}: negative gamma {pc.gamma}")
        if len(mode.magnon_couplings) not in (0, spec.n_magnons):
            err(
                f"photon mode {mode.label!r} lists {len(mode.magnon_couplings)} magnon "
                f"couplings, expected {spec.n_magnons}"
            )
        for g in mode.magnon_couplings:
            if g < 0:
                err(f"photon mode {mode.label!r} has negative magnon coupling {g}")

    for mode in spec.magnon_modes:
        if mode.frequency <= 0:
            err(f"magnon mode {mode.label!r} has nonpositive frequency {mode.frequency}")
        if mode.intrinsic_loss < 0:
            err(f"magnon mode {mode.label!r} has negative linewidth")

    seen: dict[tuple[int, int], complex] = {}
    for p, q, g in spec.photon_photon_couplings:
        if not (0 <= p < spec.n_photons and 0 <= q < spec.n_photons):
            err(f"photon-photon coupling references invalid mode pair ({p}, {q})")
            continue
        seen[(p, q)] = g
    for (p, q), g in seen.items():
        other = seen.get((q, p))
        if other is not None and not cmath.isclose(other, g.conjugate(), abs_tol=1e-15):
            err(
                f"internal coupling matrix is not Hermitian: g[{q},{p}]={other} "
                f"but conj(g[{p},{q}])={g.conjugate()}"
            )

    # RWA regime warnings (never errors): the rotating-wave model needs
    # g / sqrt(w_q w_p) < 0.1 and sqrt(gamma) / sqrt(w_p) < 0.1.
    if not any(d.severity == "error" for d in out):
        freqs = [m.frequency for m in spec.photon_modes] + [m.frequency for m in spec.magnon_modes]
        for p, mode in enumerate(spec.photon_modes):
            for n, pc in enumerate(mode.ports):
                if pc.gamma > 0 and math.sqrt(pc.gamma / mode.frequency) >= RWA_RATIO:
                    warn(
                        f"photon mode {mode.label!r}, port {n}: external coupling "
                        f"sqrt(gamma/w) = {math.sqrt(pc.gamma / mode.frequency):.3f} "
                        f">= {RWA_RATIO}; beyond the rotating-wave regime"
                    )
            for m, g in enumerate(mode.magnon_couplings):
                wm = spec.magnon_modes[m].frequency
                ratio = g / math.sqrt(mode.frequency * wm)
                if ratio >= RWA_RATIO:
                    warn(
                        f"coupling {mode.label!r}-{spec.magnon_modes[m].label!r}: "
                        f"g/sqrt(w_q w_p) = {ratio:.3f} >= {RWA_RATIO}; beyond the "
                        f"rotating-wave regime"
                    )
        for p, q, g in spec.photon_photon_couplings:
            ratio = abs(g) / math.sqrt(freqs[p] * freqs[q])
            if ratio >= RWA_RATIO:
                warn(
                    f"photon-photon coupling ({p},{q}): g/sqrt(w_q w_p) = {ratio:.3f} "
                    f">= {RWA_RATIO}; beyond the rotating-wave regime"
                )
    return out


# ---------------------------------------------------------------------------
# Reference cavity: seven Ku-band modes of a cylindrical two-probe cavity
# plus one tunable magnon (a YIG sphere at position A or B).
# ---------------------------------------------------------------------------

# label, frequency (GHz), quality factor, phase-jump sign of the mode
_CAVITY_MODES = (
    ("TE211", 12.4, 1525.0, "-"),
    ("TM012", 12.5, 4441.0, "-"),
    ("TE212", 14.4, 912.0, "-"),
    ("TM013", 15.8, 9228.0, "-"),
    ("TE113", 14.6, 7501.0, "+"),
    ("TM111", 15.2, 12023.0, "+"),
    ("TE311", 16.6, 739.0, "+"),
)

# magnon coupling strengths in GHz for the two sphere positions
_COUPLINGS_A = (0.0135, 0.0393, 0.0301, 0.0433, 0.0036, 0.0032, 0.0025)
_COUPLINGS_B = (0.0, 0.0, 0.0, 0.0, 0.0500, 0.0722, 0.0045)


def table3_cavity(
    position: Literal["A", "B"],
    magnon_freq_ghz: float = 13.59,
    magnon_linewidth_ghz: float = 0.001,
) -> SystemSpec:
    """Seven-mode cylindrical cavity with one magnon at sphere position A or B.

    Total external damping of each mode is w/Q, split equally between the
    two probes (gamma per port = w/(2Q)). Negative-phase-jump modes couple
    to the probes in phase (0, 0); positive-jump modes with a pi offset
    (0, pi). Only the relative phase between the two groups is observable:
    swapping the groups flips the overall sign of S21 and leaves |S21|
    unchanged.

    Args:
        position: "A" (repulsive placement) or "B" (attractive placement).
        magnon_freq_ghz: initial magnon frequency; sweeps retune it.
        magnon_linewidth_ghz: small default linewidth smooths extrema detection.

    Returns:
        The assembled SystemSpec (two ports, 7 photon modes, 1 magnon).
    """
    if position not in ("A", "B"):
        raise ConfigError(f"position must be 'A' or 'B', got {position!r}")
    couplings = _COUPLINGS_A if position == "A" else _COUPLINGS_B
    photons = []
    for (label, freq, q, jump), g in zip(_CAVITY_MODES, couplings):
        gamma_port = freq / (2.0 * q)
        phase1 = 0.0 if jump == "-" else math.pi
        photons.append(
            PhotonMode(
                label=label,
                frequency=freq,
                ports=(PortCoupling(gamma_port, 0.0), PortCoupling(gamma_port, phase1)),
                magnon_couplings=(g,),
            )
        )
    magnon = MagnonMode("YIG", magnon_freq_ghz, magnon_linewidth_ghz)
    return SystemSpec(photon_modes=tuple(photons), magnon_modes=(magnon,), n_ports=2)


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------


def _photon_to_json(mode: PhotonMode) -> dict:
    return {
        "label": mode.label,
        "freq_ghz": mode.frequency,
        "gamma_per_port_ghz": [p.gamma for p in mode.ports],
        "port_phases_rad": [p.phase for p in mode.ports],
        "magnon_couplings_ghz": list(mode.magnon_couplings),
        "intrinsic_loss_ghz": mode.intrinsic_loss,
    }


def dumps_config(spec: SystemSpec, indent: int = 2) -> str:
    """Serialize a system to its JSON configuration text."""
    doc = {
        "ports": spec.n_ports,
        "photon_modes": [_photon_to_json(m) for m in spec.photon_modes],
        "magnon_modes": [
            {"label": m.label, "freq_ghz": m.frequency, "linewidth_ghz": m.intrinsic_loss}
            for m in spec.magnon_modes
        ],
        "photon_photon_couplings": [
            {"p": p, "q": q, "re": g.real, "im": g.imag}
            for p, q, g in spec.photon_photon_couplings
        ],
    }
    return json.dumps(doc, indent=indent)


def dump_config(spec: SystemSpec, path: str | Path) -> None:
    Path(path).write_text(dumps_config(spec) + "\n")


def _parse_photon(entry: dict, n_ports: int, where: str) -> PhotonMode:
    try:
        label = str(entry["label"])
        freq = float(entry["freq_ghz"])
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from None
    phases = [float(x) for x in entry.get("port_phases_rad", [0.0] * n_ports)]
    if "q_factor" in entry and "gamma_per_port_ghz" in entry:
        raise ConfigError(f"{where}: give either q_factor or gamma_per_port_ghz, not both")
    if "q_factor" in entry:
        q = float(entry["q_factor"])
        if q <= 0:
            raise ConfigError(f"{where}: q_factor must be positive, got {q}")
        gammas = [freq / (n_ports * q)] * n_ports
    elif "gamma_per_port_ghz" in entry:
        gammas = [float(x) for x in entry["gamma_per_port_ghz"]]
    else:
        raise ConfigError(f"{where}: needs q_factor or gamma_per_port_ghz")
    if len(gammas) != n_ports or len(phases) != n_ports:
        raise ConfigError(
            f"{where}: expected {n_ports} per-port entries, got "
            f"{len(gammas)} gammas / {len(phases)} phases"
        )
    return PhotonMode(
        label=label,
        frequency=freq,
        ports=tuple(PortCoupling(g, ph) for g, ph in zip(gammas, phases)),
        magnon_couplings=tuple(float(x) for x in entry.get("magnon_couplings_ghz", [])),
        intrinsic_loss=float(entry.get("intrinsic_loss_ghz", 0.0)),
    )


def loads_config(text: str) -> SystemSpec:
    """Parse a JSON configuration; raises ConfigError naming the offending field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level of the configuration must be an object")
    try:
        n_ports = int(doc["ports"])
    except KeyError:
        raise ConfigError("missing top-level field 'ports'") from None
    photons = [
        _parse_photon(entry, n_ports, f"photon_modes[{i}]")
        for i, entry in enumerate(doc.get("photon_modes", []))
    ]
    magnons = []
    for i, entry in enumerate(doc.get("magnon_modes", [])):
        try:
            magnons.append(
                MagnonMode(
                    label=str(entry["label"]),
                    frequency=float(entry["freq_ghz"]),
                    intrinsic_loss=float(entry.get("linewidth_ghz", 0.0)),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"magnon_modes[{i}]: missing field {exc.args[0]!r}") from None
    pp = []
    for i, entry in enumerate(doc.get("photon_photon_couplings", [])):
        try:
            pp.append(
                (int(entry["p"]), int(entry["q"]), complex(float(entry["re"]), float(entry.get("im", 0.0))))
            )
        except KeyError as exc:
            raise ConfigError(
                f"photon_photon_couplings[{i}]: missing field {exc.args[0]!r}"
            ) from None
    spec = SystemSpec(
        photon_modes=tuple(photons),
        magnon_modes=tuple(magnons),
        n_ports=n_ports,
        photon_photon_couplings=tuple(pp),
    )
    errors = [d for d in validate_system(spec) if d.severity == "error"]
    if errors:
        raise ConfigError("; ".join(d.message for d in errors))
    return spec


def load_config(path: str | Path) -> SystemSpec:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"configuration file not found: {p}")
    return loads_config(p.read_text())
