"""CSV and JSON artifacts: histograms, tomography counts, density-matrix grids, reports.

Floats are written with ``repr``, which is the shortest string that parses back
to the identical double.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .correlation import G2Curve, Histogram, normalize_g2
from .errors import ValidationError
from .states import ALL_SETTINGS, MeasurementMode
from .tomography import TomographyInput

SCHEMA_VERSION = 1
BASIS_LABELS = ("GG", "GR", "RG", "RR")


def _f(x: float) -> str:
    return repr(float(x))


# --- histogram ---------------------------------------------------------------

def write_histogram_csv(h: Histogram, path, curve: G2Curve | None = None) -> None:
    """``# key=value`` metadata lines, then ``tau_ps,counts,g2`` rows.

    g2 is left empty when the singles counts do not allow normalization.
    """
    if curve is None:
        try:
            curve = normalize_g2(h)
        except ValidationError:
            curve = None
    with open(path, "w", newline="") as fh:
        for key in ("bin_width_ps", "t_min_ps", "n_s", "n_as", "duration_ps"):
            fh.write(f"# {key}={getattr(h, key)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_ps", "counts", "g2"])
        for k, (tau, c) in enumerate(zip(h.centers_ps, h.counts)):
            w.writerow([_f(tau), int(c), _f(curve.g2[k]) if curve is not None else ""])


def read_histogram_csv(path) -> Histogram:
    meta, rows = {}, []
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            elif line.strip():
                lines.append(line)
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or reader.fieldnames[:2] != ["tau_ps", "counts"]:
        raise ValidationError(f"{path}: expected header tau_ps,counts,g2")
    for row in reader:
        rows.append((float(row["tau_ps"]), int(row["counts"])))
    if not rows:
        raise ValidationError(f"{path}: no histogram rows")
    taus = np.array([r[0] for r in rows])
    counts = np.array([r[1] for r in rows], dtype=np.int64)
    if "bin_width_ps" in meta:
        width = int(meta["bin_width_ps"])
        t_min = int(meta["t_min_ps"])
    else:
        if len(taus) < 2:
            raise ValidationError(f"{path}: cannot infer the bin width from one row")
        width = int(round(taus[1] - taus[0]))
        t_min = int(round(taus[0] - width / 2))
    return Histogram(width, t_min, counts, int(meta.get("n_s", 0)), int(meta.get("n_as", 0)),
                     int(meta.get("duration_ps", 0)))


def write_fit_curve_csv(h: Histogram, fit, path) -> None:
    """Plot-ready coincidences vs delay with the fitted curve sampled at bin centers."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_ps", "counts", "fit"])
        model = fit.model(h.centers_ps) if fit is not None else None
        for k, (tau, c) in enumerate(zip(h.centers_ps, h.counts)):
            in_range = fit is not None and fit.fit_range[0] <= k < fit.fit_range[1]
            w.writerow([_f(tau), int(c), _f(model[k]) if in_range else ""])


# --- tomography counts -----------------------------------------------------------

def write_counts_csv(data: TomographyInput, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode_s", "mode_as", "counts"])
        for s in ALL_SETTINGS:
            w.writerow([s[0].value, s[1].value, data.counts[s]])


def read_counts_csv(path, accumulation_s: float = 160.0) -> TomographyInput:
    """16 rows of ``mode_s,mode_as,counts`` in any order."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if line.strip() and not line.startswith("#"))
        if reader.fieldnames != ["mode_s", "mode_as", "counts"]:
            raise ValidationError(f"{path}: expected header mode_s,mode_as,counts")
        counts = {}
        for row in reader:
            key = (MeasurementMode.parse(row["mode_s"]), MeasurementMode.parse(row["mode_as"]))
            if key in counts:
                raise ValidationError(f"{path}: duplicate setting {row['mode_s']},{row['mode_as']}")
            try:
                counts[key] = int(row["counts"])
            except ValueError:
                raise ValidationError(f"{path}: bad count {row['counts']!r}") from None
    return TomographyInput(counts, accumulation_s)


# --- density matrix grids --------------------------------------------------------

def write_matrix_csv(m, path) -> None:
    m = np.asarray(m, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *BASIS_LABELS])
        for label, row in zip(BASIS_LABELS, m):
            w.writerow([label, *(_f(v) for v in row)])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]])


# --- report ---------------------------------------------------------------------

def _check_finite(obj, where="report"):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValidationError(f"non-finite number at {where}")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")


def dumps_report(report: dict) -> str:
    _check_finite(report)
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps_report(report))


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())
