"""Command-line interface for the stroke analysis pipeline.

Subcommands: ingest, envelope, spectrum, kinematics, simulate, fit. Exit
codes: 0 success, 2 malformed input, 3 fit stopped by budget (result still
written). All numeric defaults match the library defaults (200 ms envelope
window, 128-sample Kaiser beta 8 frames, unit hop, bins to 500 Hz), so bare
commands reproduce the standard analysis.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import daq, dsp, fitting, kinematics as kin, propagation, reports
from .errors import StrokekitError
from .model import ChannelLayout, PropagationParams, validate_recording

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUDGET = 3


def _positions(text: str | None) -> ChannelLayout | None:
    if text is None:
        return None
    return ChannelLayout(positions=tuple(float(p) for p in text.split(",")))


def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _frame_spec(args) -> dsp.FrameSpec:
    return dsp.FrameSpec(n_fft=args.nfft, beta=args.beta, hop=args.hop)


def _read_recordings(paths):
    recs = []
    for p in paths:
        rec = daq.read_recording_file(p)
        violations = validate_recording(rec)
        if violations:
            raise StrokekitError(f"{p}: " + "; ".join(violations))
        recs.append(rec)
    return recs


def _out_paths(out: str, rec_paths, suffix: str):
    """One output per input: a file when single, a directory when several."""
    if len(rec_paths) == 1:
        return [Path(out)]
    base = Path(out)
    base.mkdir(parents=True, exist_ok=True)
    return [base / f"{Path(p).stem}{suffix}" for p in rec_paths]


# --- subcommand handlers -------------------------------------------------------

def _cmd_ingest(args) -> int:
    data = Path(args.infile).read_bytes()
    if not data.strip():
        raise StrokekitError(f"{args.infile}: empty input")
    cal = (
        daq.CalibrationParams.from_dict(_load_json(args.cal))
        if args.cal
        else daq.CalibrationParams()
    )
    layout = _positions(args.positions)

    fmt = args.format
    if fmt == "auto":
        fmt = "csv" if data[:6].lstrip().startswith(b"time_s") else "stream"
    if fmt == "stream":
        frames, stats = daq.read_frame_stream(data)
        if not frames:
            raise StrokekitError(f"{args.infile}: no valid frames found")
        rec = daq.frames_to_recording(
            frames, cal, layout, sample_rate=args.rate or 2000.0
        )
        print(
            f"decoded {stats.frames} frames, skipped {stats.skipped_bytes} bytes "
            f"in {stats.resync_events} resync(s); "
            f"filled {rec.meta['gap_samples']} missing frame(s) "
            f"in {rec.meta['gap_events']} gap(s)"
        )
        if stats.resync_events:
            print(f"warning: {stats.resync_events} corrupt region(s) skipped", file=sys.stderr)
    else:
        rec = _csv_to_recording(data.decode("utf-8"), layout, args.rate)
        print(f"converted {rec.n_samples} samples from CSV")
    daq.write_recording_file(rec, args.out, body=args.body)
    print(f"wrote {args.out}")
    return EXIT_OK


def _csv_to_recording(text: str, layout, rate):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("time_s"):
        raise StrokekitError("CSV input must start with a time_s,ch0_x,... header")
    n_cols = len(lines[0].split(",")) - 1
    if n_cols % 3:
        raise StrokekitError("CSV needs 3 axis columns per channel")
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if rows.ndim != 2 or rows.shape[1] != n_cols + 1:
        raise StrokekitError("CSV rows have inconsistent column counts")
    if rate is None:
        dt = np.diff(rows[:, 0])
        if dt.size == 0 or not (dt > 0).all():
            raise StrokekitError("cannot infer sample rate from the time column")
        rate = 1.0 / float(np.median(dt))
    channels = rows[:, 1:].T.reshape(n_cols // 3, 3, -1)
    from .model import Recording

    return Recording(
        channels=channels,
        sample_rate=rate,
        layout=layout or ChannelLayout(),
        meta={"source": "csv-import"},
    )


def _cmd_envelope(args) -> int:
    recs = _read_recordings(args.rec)
    outs = _out_paths(args.out, args.rec, "_envelope.csv")
    svgs = _out_paths(args.svg, args.rec, "_envelope.svg") if args.svg else [None] * len(recs)
    for rec, out, svg in zip(recs, outs, svgs):
        env = dsp.envelope_of_recording(rec, window_len=args.window, hop=args.hop)
        reports.write_envelope_csv(env, out)
        print(f"wrote {out}")
        if svg:
            reports.svg_envelope_plot(env, svg)
            print(f"wrote {svg}")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    recs = _read_recordings(args.rec)
    stats = dsp.aggregate_spectra(recs, _frame_spec(args), max_freq=args.max_freq)
    reports.write_spectrum_csv(stats, args.out)
    print(f"wrote {args.out} ({stats.frame_count} frames aggregated)")
    if args.svg:
        reports.svg_spectrum_plot(stats, args.svg)
        print(f"wrote {args.svg}")
    return EXIT_OK


def _cmd_kinematics(args) -> int:
    recs = _read_recordings(args.rec)
    entries = []
    for path, rec in zip(args.rec, recs):
        env = dsp.envelope_of_recording(rec, window_len=args.window, hop=args.hop)
        peaks = kin.detect_peaks(env)
        entries.append((str(path), kin.estimate_kinematics(peaks, rec.layout)))
    reports.write_kinematics_json(entries, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = _load_json(args.model)
    model = propagation.StrokeModel.from_dict(config)
    if args.seed is not None:
        model = propagation.StrokeModel.from_dict({**config, "seed": args.seed})
    params = PropagationParams.from_dict(config.get("propagation", {}))
    layout = (
        ChannelLayout(positions=tuple(config["layout"]["positions"]))
        if "layout" in config
        else None
    )
    rec = propagation.simulate_stroke(
        model,
        params,
        layout,
        sample_rate=float(config.get("sample_rate", 2000.0)),
        axes_split=config.get("axes_split"),
        duration=config.get("duration"),
        stroke_onset=float(config.get("stroke_onset", 0.25)),
    )
    daq.write_recording_file(rec, args.out, body=args.body)
    print(f"wrote {args.out} ({rec.n_samples} samples, seed {model.seed})")
    return EXIT_OK


def _cmd_fit(args) -> int:
    target = daq.read_recording_file(args.target)
    config = _load_json(args.config) if args.config else {}
    params = PropagationParams.from_dict(config.pop("propagation", {}))
    actuators = config.pop("actuator_positions", None)
    cfg = fitting.FitConfig.from_dict(config)
    result = fitting.fit(
        target, cfg, params, actuator_positions=tuple(actuators) if actuators else None
    )
    reports.write_fit_json(result, args.out)
    print(
        f"wrote {args.out}: objective {result.objective:.6g} "
        f"after {result.evaluations} evaluations "
        f"({'converged' if result.converged else 'budget exhausted'})"
    )
    if args.render:
        rec = propagation.render_sequence(
            result.sequence,
            params,
            target.layout,
            target.sample_rate,
            duration=target.duration,
            seed=cfg.render_seed,
        )
        daq.write_recording_file(rec, args.render)
        print(f"wrote {args.render}")
    return EXIT_OK if result.converged else EXIT_BUDGET


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strokekit",
        description="Analyze skin-stroke accelerometer recordings and fit "
        "vibrotactile actuation sequences to them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "ingest",
        help="decode a raw frame stream or sample CSV into a .htrec recording",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--in", dest="infile", required=True, help="input stream or CSV file")
    p.add_argument(
        "--format", choices=("auto", "stream", "csv"), default="auto",
        help="input kind; auto sniffs a CSV header",
    )
    p.add_argument("--cal", default=None, help="JSON calibration file (v_ref, v_zero_g, sensitivity)")
    p.add_argument("--rate", type=float, default=None, help="sample rate in Hz (default 2000; inferred for CSV)")
    p.add_argument("--positions", default=None, help="comma-separated channel positions in meters")
    p.add_argument("--body", choices=("csv", "binary"), default="csv", help="container body kind")
    p.add_argument("--out", required=True, help="output .htrec path")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser(
        "envelope",
        help="per-channel RMS envelopes to CSV (and optional SVG plot)",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--rec", nargs="+", required=True, help="input .htrec recording(s)")
    p.add_argument("--window", type=float, default=0.2, help="RMS window length in seconds")
    p.add_argument("--hop", type=int, default=1, help="hop between windows in samples")
    p.add_argument("--out", required=True, help="output CSV (directory when several inputs)")
    p.add_argument("--svg", default=None, help="optional SVG line plot path")
    p.set_defaults(func=_cmd_envelope)

    p = sub.add_parser(
        "spectrum",
        help="aggregate power spectrum over recordings to CSV (and optional SVG)",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--rec", nargs="+", required=True, help="input .htrec recording(s)")
    p.add_argument("--nfft", type=int, default=128, help="transform size in samples")
    p.add_argument("--beta", type=float, default=8.0, help="Kaiser window shape parameter")
    p.add_argument("--hop", type=int, default=1, help="hop between frames in samples")
    p.add_argument("--max-freq", type=float, default=500.0, help="highest retained bin in Hz")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--svg", default=None, help="optional SVG plot (mean line, +/- std band)")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser(
        "kinematics",
        help="stroke velocity/duration/uniformity per recording to JSON",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--rec", nargs="+", required=True, help="input .htrec recording(s)")
    p.add_argument("--window", type=float, default=0.2, help="RMS window length in seconds")
    p.add_argument("--hop", type=int, default=1, help="hop between windows in samples")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_kinematics)

    p = sub.add_parser(
        "simulate",
        help="render a synthetic caress recording from a stroke model config",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--model", required=True, help="JSON stroke model config")
    p.add_argument("--seed", type=int, default=None, help="override the config's RNG seed")
    p.add_argument("--body", choices=("csv", "binary"), default="csv", help="container body kind")
    p.add_argument("--out", required=True, help="output .htrec path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "fit",
        help="fit an actuation sequence to a target recording",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--target", required=True, help="target .htrec recording")
    p.add_argument("--config", default=None, help="JSON fit config (weights, flags, budget, ...)")
    p.add_argument("--out", required=True, help="output fit-result JSON path")
    p.add_argument("--render", default=None, help="optionally render the fitted sequence to .htrec")
    p.set_defaults(func=_cmd_fit)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (StrokekitError, OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
