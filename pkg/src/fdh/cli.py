"""``fdh`` command line tool: design, analyze, simulate and sweep.

Stages talk through files in the output directory, so each one can be
re-run on its own::

    fdh design   --config job.toml            # filter_<method>.json/.txt, design_summary.json
    fdh analyze  --config job.toml            # response/error_gain/report CSVs, weighting.csv
    fdh simulate --config job.toml            # simulation_<method>.csv, simulation_summary.json
    fdh sweep    --config job.toml --d 0.1 0.2

Exit codes: 0 success, 2 config/validation, 3 design failure,
4 artifact mismatch, 5 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from fdh.analysis import (
    FrequencyGrid,
    filter_frequency_response,
    fmt,
    hinf_norm,
    make_test_signal,
    pointwise_error_gain,
    rounded,
    simulate,
)
from fdh.config import ConfigError, JobConfig, load_config
from fdh.design import (
    FirFilter,
    closed_form_hinf,
    closed_form_optimal_norm,
    closed_form_taps,
    h2_fir_design,
    minimax_fir_design,
)
from fdh.errors import DesignError, InvalidInputError, NumericalError
from fdh.lifting import DelaySpec, lift_error_system
from fdh.statespace import frequency_response, impulse_invariant_discretize

log = logging.getLogger("fdh")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DESIGN = 3
EXIT_MISMATCH = 4
EXIT_NUMERIC = 5


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json(obj, exact=False) -> str:
    # filter files keep full precision so taps round-trip bit for bit
    return json.dumps(obj if exact else rounded(obj), indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()


def design_filter(cfg: JobConfig, method: str, lifted) -> FirFilter:
    delay = cfg.delay
    try:
        if method == "closed_form":
            return closed_form_hinf(cfg.omega_c, delay)
        if method == "h2":
            Wd = impulse_invariant_discretize(cfg.model, cfg.T)
            return h2_fir_design(Wd, cfg.D, cfg.taps, cfg.grid_points)
        if method == "minimax":
            return minimax_fir_design(lifted, cfg.taps, cfg.grid_points)
    except (DesignError, InvalidInputError) as exc:
        raise CliError(f"design method '{method}' failed: {exc}", EXIT_DESIGN) from exc
    raise CliError(f"unknown method {method!r}", EXIT_CONFIG)


def cmd_design(cfg: JobConfig, out: Path, dump_lifted: bool = False) -> int:
    lifted = lift_error_system(cfg.model, cfg.delay)
    if dump_lifted:
        _write(out / "lifted.json", _json(lifted.to_dict()))
    summary = {"T": cfg.T, "D": cfg.D, "m": cfg.delay.m, "d": cfg.delay.d, "filters": {}}
    for method in cfg.methods:
        filt = design_filter(cfg, method, lifted)
        _write(out / f"filter_{method}.json", _json(filt.to_dict(), exact=True))
        _write(out / f"filter_{method}.txt", filt.to_text())
        report = hinf_norm(lifted, filt, cfg.grid_points)
        entry = {"taps": len(filt), "hinf_norm": report.hinf_norm,
                 "peak_frequency": report.peak_frequency}
        if method == "closed_form":
            entry["predicted_norm"] = closed_form_optimal_norm(cfg.omega_c, cfg.delay)
        summary["filters"][method] = entry
        log.info("%s: hinf_norm=%s", method, fmt(report.hinf_norm))
    _write(out / "design_summary.json", _json(summary))
    return EXIT_OK


def _load_filters(cfg: JobConfig, out: Path, paths) -> dict:
    if paths:
        files = [Path(p) for p in paths]
    else:
        files = [out / f"filter_{m}.json" for m in cfg.methods]
    filters = {}
    for path in files:
        try:
            filt = FirFilter.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read filter file {path}: {exc}", EXIT_CONFIG) from exc
        if not math.isclose(filt.sample_period, cfg.T, rel_tol=1e-12):
            raise CliError(f"filter {path} has sample period {filt.sample_period}, "
                           f"config has T = {cfg.T}", EXIT_MISMATCH)
        name = path.stem[len("filter_"):] if path.stem.startswith("filter_") else path.stem
        filters[name] = filt
    return filters


def cmd_analyze(cfg: JobConfig, out: Path, filter_paths=None) -> int:
    filters = _load_filters(cfg, out, filter_paths)
    lifted = lift_error_system(cfg.model, cfg.delay)
    baseband = FrequencyGrid.uniform(cfg.nyquist, cfg.analysis_points)
    omega_max = cfg.omega_max if cfg.omega_max is not None else 10 * cfg.nyquist
    wide = FrequencyGrid.uniform(omega_max, cfg.analysis_points)

    Wd = impulse_invariant_discretize(cfg.model, cfg.T)
    w = wide.omegas
    with np.errstate(divide="ignore"):
        w_db = 20 * np.log10(np.abs(cfg.model.transfer(1j * w)))
        wd_db = 20 * np.log10(np.abs(frequency_response(Wd, np.exp(1j * w * cfg.T))[:, 0, 0]))
    _write(out / "weighting.csv", _csv(["omega_rad_s", "w_mag_db", "wd_mag_db"],
                                       zip(w, w_db, wd_db)))

    reports = {}
    for name, filt in filters.items():
        resp = filter_frequency_response(filt, baseband)
        with np.errstate(divide="ignore"):
            mag_db = 20 * np.log10(np.abs(resp))
        phase = np.unwrap(np.angle(resp))
        ideal_phase = -baseband.omegas * cfg.D
        _write(out / f"response_{name}.csv",
               _csv(["omega_rad_s", "magnitude", "magnitude_db", "phase_rad", "ideal_phase_rad"],
                    zip(baseband.omegas, np.abs(resp), mag_db, phase, ideal_phase)))
        gains = pointwise_error_gain(cfg.model, filt, cfg.delay, wide.omegas)
        with np.errstate(divide="ignore"):
            gains_db = 20 * np.log10(gains)
        _write(out / f"error_gain_{name}.csv",
               _csv(["omega_rad_s", "gain", "gain_db"], zip(wide.omegas, gains, gains_db)))
        report = hinf_norm(lifted, filt, cfg.grid_points,
                           metadata={"filter_name": name, "gain_kind": "lifted_induced"})
        _write(out / f"report_{name}.csv", report.to_csv())
        _write(out / f"report_{name}.json", report.to_json())
        reports[name] = {"hinf_norm": report.hinf_norm, "peak_frequency": report.peak_frequency}
    _write(out / "analysis_summary.json",
           _json({"filters": reports, "pointwise_gain": "single_sinusoid_steady_state",
                  "omega_max": omega_max}))
    return EXIT_OK


def cmd_simulate(cfg: JobConfig, out: Path, filter_paths=None) -> int:
    if cfg.simulation is None:
        raise CliError("config has no [simulation] table", EXIT_CONFIG)
    sim = cfg.simulation
    if sim.duration < cfg.D:
        raise CliError(f"simulation duration {sim.duration} is shorter than D = {cfg.D}",
                       EXIT_CONFIG)
    filters = _load_filters(cfg, out, filter_paths)
    signal = make_test_signal(sim.signal, sim.duration, cfg.T / sim.oversample,
                              omega=sim.omega, seed=sim.seed)
    summary = {"signal": sim.signal, "duration": sim.duration, "oversample": sim.oversample,
               "seed": sim.seed, "filters": {}}
    for name, filt in filters.items():
        res = simulate(cfg.model, filt, cfg.delay, signal, sim.oversample)
        _write(out / f"simulation_{name}.csv", res.to_csv())
        summary["filters"][name] = res.summary()
        log.info("%s: l2_error=%s", name, fmt(res.l2_error))
    _write(out / "simulation_summary.json", _json(summary))
    return EXIT_OK


def cmd_sweep(cfg: JobConfig, out: Path, d_values=None) -> int:
    if cfg.omega_c is None:
        raise CliError("sweep needs a first_order model", EXIT_CONFIG)
    ds = list(d_values) if d_values else list(cfg.d_values)
    if not ds:
        ds = list(np.arange(0, 16) * cfg.T / 16)
    rows = []
    for d in ds:
        if not 0 <= d < cfg.T:
            raise CliError(f"fractional delay d = {d} outside [0, T) with T = {cfg.T}",
                           EXIT_CONFIG)
        a0, a1 = closed_form_taps(cfg.omega_c, cfg.T, d)
        norm = closed_form_optimal_norm(cfg.omega_c, DelaySpec(cfg.T, d, 0, d))
        rows.append((d, a0, a1, norm))
    _write(out / "sweep.csv", _csv(["d", "a0", "a1", "norm"], rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdh", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("design", "analyze", "simulate", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="job file (.toml or .json)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--dump-lifted", action="store_true",
                       help="also write the lifted system matrices as lifted.json")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("analyze", "simulate"):
            p.add_argument("--filter", action="append", dest="filters", metavar="PATH",
                           help="filter JSON file (repeatable); default: filters from design")
        if name == "sweep":
            p.add_argument("--d", nargs="+", type=float, dest="d_values",
                           help="fractional delays to tabulate")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg.output_dir
        if args.dump_lifted and args.command != "design":
            lifted = lift_error_system(cfg.model, cfg.delay)
            _write(out / "lifted.json", _json(lifted.to_dict()))
        if args.command == "design":
            return cmd_design(cfg, out, args.dump_lifted)
        if args.command == "analyze":
            return cmd_analyze(cfg, out, args.filters)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.filters)
        return cmd_sweep(cfg, out, args.d_values)
    except ConfigError as exc:
        print(f"fdh: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"fdh: {exc}", file=sys.stderr)
        return exc.code
    except InvalidInputError as exc:
        print(f"fdh: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"fdh: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
