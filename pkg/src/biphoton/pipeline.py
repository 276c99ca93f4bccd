"""The analysis chain from simulated time tags to the JSON report.

Each ``cmd_*`` function returns a report fragment (a plain dict) and, when
given an output directory, writes its artifacts there. :func:`cmd_pipeline`
chains them into one report.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PAPER_ASSUMPTIONS, RunConfig
from .correlation import (
    Histogram,
    cauchy_schwarz_factor,
    coincidence_histogram,
    fit_exponential,
    g2_max,
    histogram_delays,
    normalize_g2,
)
from .errors import ConvergenceError, ValidationError
from .io import (
    SCHEMA_VERSION,
    read_counts_csv,
    read_histogram_csv,
    write_counts_csv,
    write_fit_curve_csv,
    write_histogram_csv,
    write_matrix_csv,
    write_report,
)
from .metrics import metric_report
from .source import RNG_ALGORITHM, derive_seed, simulate
from .states import ALL_SETTINGS, TARGETS, format_setting, target_state
from .timetag import Channel, TimeTagStream, read_stream, write_binary, write_text
from .tomography import TomographyInput, mle_reconstruct

log = logging.getLogger(__name__)

ASSUMED_G2_AUTO = 2.0


def _provenance(cfg: RunConfig) -> dict:
    return {"tool": "biphoton", "version": __version__, "rng": RNG_ALGORITHM,
            "seed": int(cfg.source.seed)}


def _out(out_dir, name):
    if out_dir is None:
        return None
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


# --- simulate ------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out_dir=None) -> tuple[dict, TimeTagStream, TimeTagStream]:
    stokes, anti = simulate(cfg.source)
    frag = {
        "duration_ps": cfg.source.duration_ps,
        "setting": format_setting(cfg.source.setting),
        "singles_s": len(stokes),
        "singles_as": len(anti),
        "config_hash": cfg.source.config_hash(),
    }
    if out_dir is not None:
        binary = cfg.paths.tag_format == "binary"
        ext = "bin" if binary else "txt"
        writer = write_binary if binary else write_text
        paths = {}
        for name, stream in (("stokes", stokes), ("anti_stokes", anti)):
            p = _out(out_dir, f"{name}.{ext}")
            writer(stream, p)
            paths[name] = p.name
        frag["files"] = paths
    return frag, stokes, anti


# --- correlate / fit --------------------------------------------------------------

def _fit_fragment(h: Histogram, cfg: RunConfig):
    a = cfg.analysis
    try:
        fit = fit_exponential(h, fit_start=a.fit_start, weighting=a.fit_weighting,
                              tail_fraction=a.tail_fraction)
    except ConvergenceError as exc:
        y0, A, tau = exc.best
        return {"converged": False, "error": str(exc), "y0": y0, "A": A, "tau_co_ps": tau,
                "residual_rms": exc.residual}, None
    except ValidationError as exc:
        return {"converged": False, "error": str(exc)}, None
    return {
        "converged": fit.converged,
        "y0": fit.y0,
        "A": fit.A,
        "tau_co_ps": fit.tau_co_ps,
        "linewidth_hz": fit.linewidth_hz,
        "residual_rms": fit.residual_rms,
        "fit_range": list(fit.fit_range),
        "weighting": fit.weighting,
        "iterations": fit.iterations,
    }, fit


def cmd_fit(cfg: RunConfig, h: Histogram | None = None, out_dir=None) -> dict:
    if h is None:
        h = read_histogram_csv(cfg.paths.histogram_path)
    frag, fit = _fit_fragment(h, cfg)
    if out_dir is not None:
        write_fit_curve_csv(h, fit, _out(out_dir, "fig5_coincidences.csv"))
    return frag


def cmd_correlate_fit(cfg: RunConfig, streams=None, out_dir=None) -> dict:
    """Histogram -> g2 -> peak -> Cauchy-Schwarz factor -> exponential fit -> linewidth."""
    if streams is None:
        streams = (read_stream(cfg.paths.stokes_path), read_stream(cfg.paths.anti_stokes_path))
    stokes, anti = streams
    a = cfg.analysis
    h = coincidence_histogram(stokes, anti, a.bin_width_ps, a.t_min_ps, a.n_bins)
    curve = normalize_g2(h)
    peak, tau_peak = g2_max(curve)
    frag = {
        "bin_width_ps": h.bin_width_ps,
        "t_min_ps": h.t_min_ps,
        "n_bins": h.n_bins,
        "delay_convention": "t_as - t_s",
        "n_s": h.n_s,
        "n_as": h.n_as,
        "duration_ps": h.duration_ps,
        "coincidences": h.total,
        "accidentals_per_bin": curve.normalization,
        "g2_max": peak,
        "tau_at_max_ps": tau_peak,
        "g2_ss0": ASSUMED_G2_AUTO,
        "g2_asas0": ASSUMED_G2_AUTO,
        "cs_factor": cauchy_schwarz_factor(peak, ASSUMED_G2_AUTO, ASSUMED_G2_AUTO),
        "nonclassical": bool(cauchy_schwarz_factor(peak) > 1),
    }
    fit_frag, fit = _fit_fragment(h, cfg)
    frag["fit"] = fit_frag
    if out_dir is not None:
        write_histogram_csv(h, _out(out_dir, "histogram.csv"), curve)
        write_fit_curve_csv(h, fit, _out(out_dir, "fig5_coincidences.csv"))
    return frag


# --- tomography -------------------------------------------------------------------

def setting_coincidences(stokes: TimeTagStream, anti: TimeTagStream, cfg: RunConfig
                         ) -> tuple[int, float, int]:
    """(raw, accidental estimate, net) coincidences in the tomography window."""
    a = cfg.analysis
    ts = stokes.channel_times(Channel.STOKES)
    tas = anti.channel_times(Channel.ANTI_STOKES)
    raw = int(histogram_delays(ts, tas, a.coincidence_window_ps, a.t_min_ps, 1)[0])
    acc = ts.size * tas.size * a.coincidence_window_ps / stokes.duration_ps
    net = max(0, int(round(raw - acc))) if a.accidental_subtraction else raw
    return raw, float(acc), net


def simulate_tomography_counts(cfg: RunConfig) -> tuple[TomographyInput, dict]:
    """Run the source once per setting (seeds derived from the master seed)."""
    counts, raw, acc = {}, {}, {}
    for i, setting in enumerate(ALL_SETTINGS):
        src = replace(cfg.source, setting=setting, duration_ps=cfg.tomo.duration_ps,
                      seed=derive_seed(cfg.source.seed, i + 1))
        stokes, anti = simulate(src)
        r, b, n = setting_coincidences(stokes, anti, cfg)
        key = format_setting(setting)
        counts[setting], raw[key], acc[key] = n, r, b
    data = TomographyInput(counts, cfg.tomo.duration_ps * 1e-12)
    # no excess over accidentals at all means there is nothing to reconstruct
    excess = sum(raw.values()) - sum(acc.values())
    if cfg.analysis.accidental_subtraction and excess <= 3 * np.sqrt(max(sum(acc.values()), 1.0)):
        raise ValidationError("no coincidences above the accidental background "
                              "(zero net tomography counts)")
    return data, {"raw_counts": raw, "accidentals": acc}


def tomography_fragment(data: TomographyInput, cfg: RunConfig, out_dir=None) -> dict:
    res = mle_reconstruct(data, likelihood=cfg.tomo.likelihood, n_starts=cfg.tomo.n_starts,
                          seed=cfg.source.seed)
    target = cfg.tomo.target
    m = metric_report(res.rho, target_state(target), target)
    frag = {
        "counts": {format_setting(s): data.counts[s] for s in ALL_SETTINGS},
        "accumulation_s": data.accumulation_s,
        "target": target,
        "frame": TARGETS[target][0],
        "target_state": TARGETS[target][1],
        "rho_real": res.rho.real.tolist(),
        "rho_imag": res.rho.imag.tolist(),
        **m.to_dict(),
        "converged": res.converged,
        "log_likelihood": res.log_likelihood,
        "iterations": res.iterations,
        "flux": res.flux,
        "likelihood": res.likelihood,
        "linear_inversion_min_eigenvalue": res.diagnostics["min_eig_linear"],
    }
    if out_dir is not None:
        write_counts_csv(data, _out(out_dir, "counts.csv"))
        write_matrix_csv(res.rho.real, _out(out_dir, "rho_real.csv"))
        write_matrix_csv(res.rho.imag, _out(out_dir, "rho_imag.csv"))
    return frag


def cmd_tomo(cfg: RunConfig, out_dir=None) -> dict:
    if cfg.paths.counts_path:
        data = read_counts_csv(cfg.paths.counts_path, cfg.tomo.duration_ps * 1e-12)
        extra = {"source": "file"}
    else:
        data, extra = simulate_tomography_counts(cfg)
        extra["source"] = "simulation"
    frag = tomography_fragment(data, cfg, out_dir)
    frag.update(extra)
    return frag


# --- full run -----------------------------------------------------------------------

def _base_report(cfg: RunConfig) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "config_hash": cfg.source.config_hash(),
        "provenance": _provenance(cfg),
    }
    if cfg.preset == "paper":
        report["assumptions"] = list(PAPER_ASSUMPTIONS)
    report["limitations"] = [
        "rising edge of the biphoton wave packet near zero delay is not modeled",
        "dead time, afterpulsing and timing jitter are not modeled",
    ]
    return report


def cmd_pipeline(cfg: RunConfig, out_dir=None) -> dict:
    """simulate -> correlate/fit -> tomography. The first failing stage stops the run.

    A failure is recorded under ``report["error"]`` as ``{"stage", "message", "kind"}``.
    """
    report = _base_report(cfg)
    stage = "simulate"
    try:
        cfg.source.validate()
        sim, stokes, anti = cmd_simulate(cfg, out_dir)
        report["simulation"] = sim
        stage = "correlate"
        report["correlation"] = cmd_correlate_fit(cfg, (stokes, anti), out_dir)
        stage = "tomography"
        report["tomography"] = cmd_tomo(replace(cfg, paths=replace(cfg.paths, counts_path=None)),
                                        out_dir)
    except (ValidationError, ConvergenceError) as exc:
        kind = "validation" if isinstance(exc, ValidationError) else "convergence"
        log.warning("pipeline stage %s failed: %s", stage, exc)
        report["error"] = {"stage": stage, "kind": kind, "message": str(exc)}
    if out_dir is not None:
        write_report(report, _out(out_dir, "report.json"))
    return report


def report_for(cfg: RunConfig, out_dir=None) -> dict:
    """Fragment for a single-mode run wrapped with config echo and provenance."""
    report = _base_report(cfg)
    if cfg.mode == "simulate":
        report["simulation"] = cmd_simulate(cfg, out_dir)[0]
    elif cfg.mode == "correlate":
        report["correlation"] = cmd_correlate_fit(cfg, out_dir=out_dir)
    elif cfg.mode == "fit":
        report["fit"] = cmd_fit(cfg, out_dir=out_dir)
    elif cfg.mode == "tomo":
        report["tomography"] = cmd_tomo(cfg, out_dir)
    else:
        return cmd_pipeline(cfg, out_dir)
    if out_dir is not None:
        write_report(report, _out(out_dir, "report.json"))
    return report

