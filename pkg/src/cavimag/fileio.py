"""CSV / Touchstone readers and writers plus the reproducibility manifest.

All floats are written with 12 significant digits so identical invocations
produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np

from .analysis import AntiresonanceBranch, ConvergenceReport
from .engine import Spectrum, SweepMap


class CsvFormatError(ValueError):
    """Malformed tabular input; ``row`` is the 1-based offending line."""

    def __init__(self, path, row: int, message: str):
        self.path = str(path)
        self.row = row
        super().__init__(f"{path}:{row}: {message}")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_spectrum_csv(path, spectrum: Spectrum, extra_elements: list[tuple[int, int]] = ()) -> None:
    """Spectrum CSV: freq_ghz,re_s21,im_s21,mag_db,phase_rad (+ per extra S_ij a re/im pair)."""
    header = ["freq_ghz", "re_s21", "im_s21", "mag_db", "phase_rad"]
    for i, j in extra_elements:
        header += [f"re_s{i}{j}", f"im_s{i}{j}"]
    s21 = spectrum.s21
    db = spectrum.magnitude_db()
    phase = spectrum.phase()
    lines = [",".join(header)]
    extras = [spectrum.element(i, j) for i, j in extra_elements]
    for k, f in enumerate(spectrum.freqs):
        row = [_fmt(f), _fmt(s21[k].real), _fmt(s21[k].imag), _fmt(db[k]), _fmt(phase[k])]
        for tr in extras:
            row += [_fmt(tr[k].real), _fmt(tr[k].imag)]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read (freqs, complex S21) from a spectrum CSV."""
    p = Path(path)
    lines = p.read_text().splitlines()
    if not lines:
        raise CsvFormatError(p, 1, "empty file")
    header = [h.strip() for h in lines[0].split(",")]
    try:
        i_f = header.index("freq_ghz")
        i_re = header.index("re_s21")
        i_im = header.index("im_s21")
    except ValueError:
        raise CsvFormatError(p, 1, "expected columns freq_ghz, re_s21, im_s21") from None
    freqs = []
    s21 = []
    for row_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            freqs.append(float(cells[i_f]))
            s21.append(complex(float(cells[i_re]), float(cells[i_im])))
        except (ValueError, IndexError):
            raise CsvFormatError(p, row_no, f"cannot parse row: {line!r}") from None
    return np.asarray(freqs), np.asarray(s21)


def write_touchstone(path, spectrum: Spectrum) -> None:
    """Two-port Touchstone v1 (.s2p), real/imaginary format, GHz, 50 ohm reference."""
    if spectrum.n_ports != 2:
        raise ValueError(f"touchstone export needs a 2-port spectrum, got {spectrum.n_ports} ports")
    lines = ["! 2-port S-parameters", "# GHz S RI R 50"]
    s = spectrum.s
    for k, f in enumerate(spectrum.freqs):
        cells = [_fmt(f)]
        # touchstone column order: S11 S21 S12 S22
        for i, j in ((0, 0), (1, 0), (0, 1), (1, 1)):
            cells += [_fmt(s[k, i, j].real), _fmt(s[k, i, j].imag)]
        lines.append(" ".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_map_csv(path, sweep_map: SweepMap) -> None:
    """Long-format map CSV: f_magnon_ghz,f_drive_ghz,re_s21,im_s21,mag_db,phase_rad."""
    lines = ["f_magnon_ghz,f_drive_ghz,re_s21,im_s21,mag_db,phase_rad"]
    db = sweep_map.magnitude_db()
    for i, wm in enumerate(sweep_map.magnon_freqs):
        phase = np.unwrap(np.angle(sweep_map.s21[i]))
        for j, fd in enumerate(sweep_map.drive_freqs):
            z = sweep_map.s21[i, j]
            lines.append(
                ",".join(
                    [_fmt(wm), _fmt(fd), _fmt(z.real), _fmt(z.imag), _fmt(db[i, j]), _fmt(phase[j])]
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")


def read_map_csv(path) -> SweepMap:
    p = Path(path)
    lines = p.read_text().splitlines()
    if not lines:
        raise CsvFormatError(p, 1, "empty file")
    header = [h.strip() for h in lines[0].split(",")]
    try:
        i_m = header.index("f_magnon_ghz")
        i_d = header.index("f_drive_ghz")
        i_re = header.index("re_s21")
        i_im = header.index("im_s21")
    except ValueError:
        raise CsvFormatError(p, 1, "expected columns f_magnon_ghz, f_drive_ghz, re_s21, im_s21") from None
    rows = []
    for row_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            rows.append(
                (
                    float(cells[i_m]),
                    float(cells[i_d]),
                    complex(float(cells[i_re]), float(cells[i_im])),
                )
            )
        except (ValueError, IndexError):
            raise CsvFormatError(p, row_no, f"cannot parse row: {line!r}") from None
    m_freqs = np.unique([r[0] for r in rows])
    d_freqs = np.unique([r[1] for r in rows])
    s21 = np.full((m_freqs.size, d_freqs.size), np.nan + 0j)
    mi = {f: i for i, f in enumerate(m_freqs)}
    di = {f: i for i, f in enumerate(d_freqs)}
    for wm, fd, z in rows:
        s21[mi[wm], di[fd]] = z
    if np.any(np.isnan(s21)):
        raise CsvFormatError(p, 1, "map grid is not complete (missing magnon/drive samples)")
    return SweepMap(magnon_freqs=m_freqs, drive_freqs=d_freqs, s21=s21)


def write_branches_csv(path, branch: AntiresonanceBranch) -> None:
    """Branch CSV: f_magnon_ghz,branch_lo_ghz,branch_hi_ghz,merged (gaps left empty)."""
    lines = ["f_magnon_ghz,branch_lo_ghz,branch_hi_ghz,merged"]
    for i, wm in enumerate(branch.magnon_frequencies):
        lo = branch.lower[i]
        hi = branch.upper[i]
        lines.append(
            ",".join(
                [
                    _fmt(wm),
                    _fmt(lo) if math.isfinite(lo) else "",
                    _fmt(hi) if math.isfinite(hi) else "",
                    "1" if branch.merged_mask[i] else "0",
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_branches_csv(path) -> AntiresonanceBranch:
    p = Path(path)
    lines = p.read_text().splitlines()
    if not lines or lines[0].split(",")[0].strip() != "f_magnon_ghz":
        raise CsvFormatError(p, 1, "expected branch CSV header starting with f_magnon_ghz")
    wm, lo, hi, merged = [], [], [], []
    for row_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            wm.append(float(cells[0]))
            lo.append(float(cells[1]) if cells[1].strip() else math.nan)
            hi.append(float(cells[2]) if cells[2].strip() else math.nan)
            merged.append(bool(int(cells[3])))
        except (ValueError, IndexError):
            raise CsvFormatError(p, row_no, f"cannot parse row: {line!r}") from None
    return AntiresonanceBranch(
        magnon_frequencies=np.asarray(wm),
        lower=np.asarray(lo),
        upper=np.asarray(hi),
        merged_mask=np.asarray(merged, dtype=bool),
    )


def write_convergence_csv(path, report: ConvergenceReport) -> None:
    lines = ["k,antires_ghz,mismatch_ghz,found"]
    for k, f, d in zip(report.mode_counts, report.antires_freq, report.mismatch):
        if math.isfinite(f):
            lines.append(f"{k},{_fmt(f)},{_fmt(d)},1")
        else:
            lines.append(f"{k},,,0")
    Path(path).write_text("\n".join(lines) + "\n")


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    out_dir,
    subcommand: str,
    parameters: dict,
    outputs: list[str],
    config_path: str | None,
    started: float,
    version: str,
) -> Path:
    """Record everything needed to reproduce an output set bit-identically."""
    manifest = {
        "tool": "cavimag",
        "version": version,
        "subcommand": subcommand,
        "config_path": config_path,
        "config_sha256": sha256_of(config_path) if config_path else None,
        "parameters": parameters,
        "outputs": sorted(outputs),
        "wall_clock_s": round(time.monotonic() - started, 3),
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
