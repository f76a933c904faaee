"""Command-line front end: simulate | correlate | fit | report.

Exit codes: 0 success, 2 usage, 3 data format or validation, 4 fit did
not converge. Units are part of every flag name.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import (
    FormatError,
    Histogram,
    Transition,
    fit_to_json,
    read_fit,
    read_histogram,
    read_tags,
    write_histogram,
    write_tags,
)
from .fitting.lm import DegenerateFitError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_NONCONVERGED = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FORMAT):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# provenance
# --------------------------------------------------------------------------


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def provenance(command: str, params: dict, seed: Optional[int] = None, inputs: Sequence = ()) -> dict:
    """Reproducibility block: command, config hash, seed, version, input
    hashes. Deliberately free of timestamps and absolute paths."""
    canon = json.dumps(params, sort_keys=True, default=str)
    return {
        "tool": "qdcoherence",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "inputs": {Path(p).name: _sha256_file(p) for p in inputs},
    }


def _write_sidecar(out, block: dict):
    Path(str(out) + ".prov.json").write_text(json.dumps(block, indent=2, sort_keys=True) + "\n")


_PATH_ARGS = ("data", "co", "cross", "tags", "config")


def _params(args, skip=("func", "plot", "out")) -> dict:
    # paths enter by file name only so that outputs do not depend on the cwd
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = Path(v).name if k in _PATH_ARGS and v else v
    return out


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def _load_sim_config(path):
    from .sim import DetectionConfig, EmitterConfig, load_config

    if path is None:
        return EmitterConfig(), DetectionConfig(), {}
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    for section in ("emitter", "detection"):
        try:
            if section == "emitter":
                load_config({"emitter": doc.get("emitter", {})})
            else:
                load_config({"emitter": {}, "detection": doc.get("detection", {})})
        except (ValueError, TypeError) as exc:
            raise CliError(f"{path}: {section}: {exc}") from None
    return load_config(doc)


def cmd_simulate(args) -> int:
    from .sim import apply_detection, config_to_dict, simulate_hom, simulate_stream

    cfg, det, _ = _load_sim_config(args.config)
    photons = simulate_stream(cfg, args.duration_ns, seed=args.seed)
    if args.hom:
        sim = simulate_hom(photons, args.delta_t_ns, args.hom, det, seed=args.seed + 1)
        tags, extra = sim.tags, {"hom_pairs": sim.n_pairs, "hom_mean_overlap": sim.mean_overlap,
                                 "flags": list(sim.flags)}
    else:
        tags = apply_detection(photons, det, args.routing, seed=args.seed + 1)
        extra = {}
    write_tags(tags, args.out)
    block = provenance("simulate", {"args": _params(args, ("func", "out", "config")),
                                    "config": config_to_dict(cfg, det)}, args.seed,
                       [args.config] if args.config else [])
    block["photons"] = {t.name: photons.count(t) for t in (Transition.X, Transition.XX)}
    block["tags_per_channel"] = {str(k): v for k, v in tags.counts().items()}
    block.update(extra)
    _write_sidecar(args.out, block)
    return EXIT_OK


# --------------------------------------------------------------------------
# correlate
# --------------------------------------------------------------------------


def cmd_correlate(args) -> int:
    from .correlator import CorrelationRequest, cross_correlate, normalize

    if args.mode == "hom" and args.pol is None:
        raise CliError("correlate hom requires --pol co|cross", EXIT_USAGE)
    tags = read_tags(args.tags)
    req = CorrelationRequest(args.channels[0], args.channels[1], args.bin_ps, args.window_ps,
                             tuple(args.norm_window_ps))
    hist = cross_correlate(tags, req, workers=args.workers)
    if args.norm != "none":
        hist = normalize(hist, args.norm)
    write_histogram(hist, args.out)
    block = provenance("correlate", _params(args, ("func", "plot", "out", "workers")), None, [args.tags])
    block.update({"mode": args.mode, "pol": args.pol, "n_bins": int(hist.counts.size),
                  "n_a": hist.meta["n_a"], "n_b": hist.meta["n_b"]})
    _write_sidecar(args.out, block)
    if args.plot:
        from .plotting import plot_histogram

        plot_histogram(hist, args.plot)
    return EXIT_OK


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------


def _load_columns(path, n=2):
    try:
        with open(path) as fh:
            data = np.loadtxt(fh, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None
    if data.shape[1] < n:
        raise CliError(f"{path}: expected {n} comma-separated columns, got {data.shape[1]}")
    return [data[:, i] for i in range(n)]


def _emit(fit, args, extra: dict, inputs) -> int:
    extra = dict(extra)
    extra["provenance"] = provenance("fit", _params(args), None, inputs)
    text = fit_to_json(fit, extra)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    if not fit.converged:
        sys.stderr.write(f"fit did not converge ({', '.join(fit.flags) or 'iteration limit'})\n")
        return EXIT_NONCONVERGED
    return EXIT_OK


def _require_histogram(path) -> Histogram:
    h = read_histogram(path)
    if h.norm is None:
        raise CliError(f"{path}: histogram is not normalized")
    return h


def cmd_fit(args) -> int:
    from . import fitting

    m = args.model
    if m == "hom":
        if not (args.co and args.cross):
            raise CliError("fit hom requires --co and --cross histograms", EXIT_USAGE)
    elif not args.data:
        raise CliError(f"fit {m} requires --data", EXIT_USAGE)

    if m == "hbt":
        hist = _require_histogram(args.data)
        fit = fitting.fit_hbt(hist, args.irf_fwhm_ps, n_bunching=args.n_bunching)
        if args.plot:
            from .plotting import plot_histogram

            plot_histogram(hist, args.plot, fit)
        return _emit(fit, args, {}, [args.data])
    if m == "hom":
        co, cross = _require_histogram(args.co), _require_histogram(args.cross)
        hf = fitting.fit_hom(co, cross, args.irf_fwhm_ps, args.delta_t_ns, args.tie_dip, args.n_bunching)
        if args.plot:
            from .plotting import plot_hom

            plot_hom(co, cross, args.plot)
        return _emit(hf.to_fit_result(), args, {}, [args.co, args.cross])

    x, y = _load_columns(args.data)
    if m == "tcspc":
        fit, summary = fitting.fit_tcspc(x, y, rise_on=args.rise_on)
        plot = "plot_decay"
    elif m == "scan":
        fit, summary = fitting.fit_scan(x, y)
        plot = "plot_scan"
    elif m == "mi":
        fit, summary = fitting.fit_mi(x, y)
        plot = "plot_mi"
    else:
        from .bloch import PulseConfig, fit_rabi

        pulse = PulseConfig(envelope=args.envelope, duration_fwhm=args.pulse_fwhm_ps)
        fit = fit_rabi(x, y, pulse, gamma_rad=1.0 / args.t1_ns, fit_deph=args.fit_deph)
        summary = None
        plot = "plot_rabi"
    if args.plot:
        from . import plotting

        getattr(plotting, plot)(x, y, args.plot, fit)
    extra = {"summary": summary.as_dict()} if summary is not None else {}
    return _emit(fit, args, extra, [args.data])


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


def cmd_report(args) -> int:
    from .report import AggregationError, build_table, format_table

    fits = [read_fit(p) for p in args.fits]
    try:
        table = build_table(fits)
    except AggregationError as exc:
        raise CliError(str(exc)) from None
    delim = {"tab": "\t", "comma": ","}[args.delimiter]
    sys.stdout.write(format_table(table, delim))
    doc = table.as_dict()
    doc["provenance"] = provenance("report", {"fits": [Path(p).name for p in args.fits]}, None, args.fits)
    if args.out_json:
        Path(args.out_json).write_text(json.dumps(doc, indent=2) + "\n")
    if args.out_text:
        Path(args.out_text).write_text(format_table(table, delim))
    if args.plot:
        from .plotting import plot_report

        plot_report(fits, args.plot)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdcoherence", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate an emitter and write detector tags")
    s.add_argument("--config", help="JSON with 'emitter' and 'detection' sections")
    s.add_argument("--duration-ns", type=float, default=1e6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--routing", choices=["split", "by_transition"], default="split")
    s.add_argument("--hom", choices=["co", "cross"], help="send photons through the HOM interferometer")
    s.add_argument("--delta-t-ns", type=float, default=14.3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("correlate", help="start-multi-stop histogram of a tag file")
    c.add_argument("mode", choices=["hbt", "hom"])
    c.add_argument("--tags", required=True)
    c.add_argument("--pol", choices=["co", "cross"])
    c.add_argument("--channels", type=int, nargs=2, default=[0, 1], metavar=("A", "B"))
    c.add_argument("--bin-ps", type=int, default=50)
    c.add_argument("--window-ps", type=int, default=500_000)
    c.add_argument("--norm", choices=["far_wing", "poisson_rate", "none"], default="far_wing")
    c.add_argument("--norm-window-ps", type=int, nargs=2, default=[400_000, 500_000], metavar=("LO", "HI"))
    c.add_argument("--workers", type=int, default=None)
    c.add_argument("--out", required=True)
    c.add_argument("--plot", help="write a PNG of the histogram")
    c.set_defaults(func=cmd_correlate)

    f = sub.add_parser("fit", help="fit a model to data")
    f.add_argument("model", choices=["tcspc", "scan", "mi", "hbt", "hom", "rabi"])
    f.add_argument("--data", help="CSV (two columns) or histogram file")
    f.add_argument("--co", help="co-polarized histogram (hom)")
    f.add_argument("--cross", help="cross-polarized histogram (hom)")
    f.add_argument("--irf-fwhm-ps", type=float, default=0.0)
    f.add_argument("--delta-t-ns", type=float, default=14.3)
    f.add_argument("--tie-dip", action="store_true", help="hom: dip timescale equals t_b")
    f.add_argument("--n-bunching", type=int, default=3, choices=[0, 1, 2, 3])
    f.add_argument("--rise-on", choices=["both", "fast"], default="both")
    f.add_argument("--t1-ns", type=float, default=1.71, help="rabi: radiative lifetime")
    f.add_argument("--pulse-fwhm-ps", type=float, default=10.0)
    f.add_argument("--envelope", choices=["gaussian", "square"], default="gaussian")
    f.add_argument("--fit-deph", action="store_true", help="rabi: free pure-dephasing rate")
    f.add_argument("--out", help="fit JSON (stdout if omitted)")
    f.add_argument("--plot", help="write a PNG of data and fit")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="coherence table from per-emitter fits")
    r.add_argument("fits", nargs="+")
    r.add_argument("--delimiter", choices=["tab", "comma"], default="tab")
    r.add_argument("--out-json")
    r.add_argument("--out-text")
    r.add_argument("--plot", help="write a PNG of the homogeneous vs inhomogeneous widths")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except DegenerateFitError as exc:
        sys.stderr.write(f"error: degenerate fit: {exc}\n")
        return EXIT_NONCONVERGED
    except FormatError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FORMAT
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FORMAT
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
