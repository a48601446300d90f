"""Batch command-line interface.

Subcommands: synth, tfr, tetris, extract, baseline, verify.  Exit codes:
1 configuration problem, 2 ingestion problem, 3 signal-model violation,
4 numerical or stage failure.  Every command that writes multiple artifacts
finishes by writing manifest.json, so the manifest's presence marks a
complete run.
"""

import argparse
import dataclasses
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as tio
from .errors import ConfigError, IngestionError, ModelViolationError, ToolkitError
from .model import (
    LocalizedNoiseSpec,
    SampledSignal,
    expand_ganhm,
    gen_localized_noise,
    make_preset,
    preset_names,
    synthesize_ganhm,
)
from .pipeline import detect_cycles, extract_respiration, ihr_from_cycles, preprocess, \
    traditional_riav, traditional_riiv
from .tetris import build_tetris, verify_noise_decorrelation
from .tf import Tfr, default_freq_axis, gaussian_window, sst, stft

EXIT_CONFIG = 1
EXIT_INGEST = 2
EXIT_MODEL = 3
EXIT_NUMERIC = 4


def _parse_noise(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) not in (5, 6):
        raise ConfigError(
            "noise spec must be center_time,time_spread,center_freq,bandwidth,"
            "amplitude[,seed]"
        )
    seed = int(parts[5]) if len(parts) == 6 else 0
    return LocalizedNoiseSpec(*parts[:5], seed=seed)


def _ingest(args):
    return tio.read_signal_csv(args.input, fs=args.fs)


def _resolve_out(value, command, is_dir=True):
    """Apply the output-root environment variable when --out is omitted."""
    if value is not None:
        return Path(value)
    root = os.environ.get("TFTETRIS_OUT_ROOT")
    if root is None:
        raise ConfigError("--out is required (or set TFTETRIS_OUT_ROOT)")
    base = Path(root)
    return base / command if is_dir else base / f"{command}.out"


def cmd_synth(args):
    out = _resolve_out(args.out, "synth")
    out.mkdir(parents=True, exist_ok=True)
    _, synth = tio.load_run_config(args.config)
    for key in ("preset", "duration", "fs", "seed", "riav_depth", "fm_depth"):
        val = getattr(args, key)
        if val is not None:
            synth[key] = val
    spec = tio.spec_from_synth_params(synth)
    n = spec.n
    fs = spec.fs
    sig = synthesize_ganhm(spec, n)
    samples = sig.samples.copy()
    noise_specs = [_parse_noise(text) for text in (args.noise or [])]
    for ns in noise_specs:
        samples = samples + gen_localized_noise(ns, n, fs).samples
    noisy = SampledSignal(samples, fs, sig.t0)

    t = sig.times
    phi1 = spec.phi1()
    artifacts = []

    def _write(name, writer):
        path = out / name
        writer(path)
        artifacts.append(name)

    _write("signal.csv", lambda p: tio.write_signal_csv(p, noisy))
    _write("clean.csv", lambda p: tio.write_signal_csv(p, sig))
    _write(
        "truth_phi0.csv",
        lambda p: tio.write_columns_csv(
            p, "t,phase_cycles,rate_hz", [t, spec.phi0.phase, spec.phi0.derivative]
        ),
    )
    _write(
        "truth_phi1.csv",
        lambda p: tio.write_columns_csv(
            p, "t,phase_cycles,rate_hz", [t, phi1.phase, phi1.derivative]
        ),
    )
    am = spec.cardiac_am()
    _write(
        "truth_cardiac_am.csv",
        lambda p: tio.write_columns_csv(
            p,
            "t," + ",".join(f"A_{l}" for l in range(1, spec.d1 + 1)),
            [t] + [am[i] for i in range(spec.d1)],
        ),
    )
    _write(
        "truth_fm_depth.csv",
        lambda p: tio.write_series_csv(p, t, spec.fm_depth, header="t,fm_depth"),
    )
    resp_target = np.cos(2 * np.pi * spec.phi0.phase + spec.riav_beta[0])
    _write(
        "truth_resp.csv",
        lambda p: tio.write_series_csv(p, t, resp_target, header="t,resp"),
    )
    _write("synth_config.ini", lambda p: tio.save_synth_config(p, synth))
    params = {
        "preset": synth["preset"],
        "duration": synth["duration"],
        "fs": synth["fs"],
        "seed": synth["seed"],
        "noise": [dataclasses.asdict(ns) for ns in noise_specs],
        "fm_depth_series": "truth_fm_depth.csv",
    }
    tio.write_manifest(out, "synth", params, artifacts)
    print(f"wrote {len(artifacts) + 1} files to {out}")
    return 0


def cmd_tfr(args):
    out = _resolve_out(args.out, "tfr", is_dir=False)
    sig = _ingest(args)
    w = gaussian_window(args.window, sig.fs)
    axis = default_freq_axis(w, sig.fs, args.fmin, args.fmax)
    tfr = stft(sig, w, axis) if args.kind == "stft" else sst(sig, w, axis)
    tio.write_tfr(out, tfr, magnitude_only=args.mag)
    if args.csv:
        tio.write_tfr_csv(args.csv, tfr, magnitude_only=args.mag)
    if args.pgm:
        tio.write_pgm(args.pgm, np.abs(tfr.values))
    print(f"{args.kind} {tfr.values.shape[0]}x{tfr.values.shape[1]} -> {out}")
    return 0


def _seed_ridge(sig):
    peaks = detect_cycles(sig)
    return ihr_from_cycles(peaks, sig.times)


def cmd_tetris(args):
    pipeline_cfg, _ = tio.load_run_config(
        args.config,
        overrides={
            ("tetris", "Q"): args.Q,
            ("tetris", "window_short_L"): args.window_short,
            ("tetris", "window_long_L"): args.window_long,
        },
    )
    cfg = pipeline_cfg.tetris
    sig = _ingest(args)
    out = _resolve_out(args.out, "tetris")
    out.mkdir(parents=True, exist_ok=True)
    tet = build_tetris(sig, _seed_ridge(sig), cfg)
    artifacts = []

    def save_matrix(name, values, axis, kind):
        tfr = Tfr(values.astype(complex), axis, tet.time_axis,
                  gaussian_window(cfg.window_long_L, sig.fs), kind)
        tio.write_tfr(out / name, tfr, magnitude_only=True)
        artifacts.append(name)

    save_matrix("ensemble_long.tfr", tet.T_long, tet.long_freq_axis, "sst")
    save_matrix("ensemble_short.tfr", tet.T_short, tet.short_freq_axis, "sst")
    if args.export_intermediates:
        for k, tfr in enumerate(tet.shifted_tfrs_long):
            tio.write_tfr(out / f"shift{k}_long.tfr", tfr)
            artifacts.append(f"shift{k}_long.tfr")
        for k, tfr in enumerate(tet.shifted_tfrs_short):
            tio.write_tfr(out / f"shift{k}_short.tfr", tfr)
            artifacts.append(f"shift{k}_short.tfr")
    for k, psi in enumerate(tet.phase_estimates):
        name = f"phase{k}.csv"
        tio.write_series_csv(out / name, tet.time_axis, psi.phase, header="t,phase_cycles")
        artifacts.append(name)
    params = {"Q": cfg.Q, "p": cfg.p, "window_short_L": cfg.window_short_L,
              "window_long_L": cfg.window_long_L, "weights": list(cfg.weights)}
    tio.write_manifest(out, "tetris", params, artifacts)
    print(f"ensemble {tet.T_long.shape[0]}x{tet.T_long.shape[1]} -> {out}")
    return 0


def cmd_extract(args):
    cfg, _ = tio.load_run_config(args.config)
    sig = _ingest(args)
    out = _resolve_out(args.out, "extract")
    out.mkdir(parents=True, exist_ok=True)
    res = extract_respiration(sig, cfg)
    t = res.time_axis
    artifacts = []

    def series(name, values):
        tio.write_series_csv(out / name, t, values)
        artifacts.append(name)

    series("ihr.csv", res.ihr)
    series("irr.csv", res.irr)
    series("riiv.csv", res.riiv.samples)
    for l, comp in enumerate(res.riav_per_harmonic, start=1):
        series(f"riav_{l}.csv", comp.samples)
    series("triiv.csv", res.triiv.samples)
    series("triav.csv", res.triav.samples)
    for l, fit in enumerate(res.fits):
        if fit is None:
            continue
        name = f"coeffs_{l}.csv"
        tio.write_columns_csv(
            out / name,
            "l,j,cos,sin",
            [fit.coeffs[:, 0], fit.coeffs[:, 1], fit.coeffs[:, 2], fit.coeffs[:, 3]],
        )
        artifacts.append(name)
    tet = res.tetris
    ens = Tfr(tet.T_long.astype(complex), tet.long_freq_axis, tet.time_axis,
              gaussian_window(cfg.tetris.window_long_L, res.riiv.fs), "sst")
    tio.write_tfr(out / "ensemble_long.tfr", ens, magnitude_only=True)
    artifacts.append("ensemble_long.tfr")
    if args.export_intermediates:
        for k, tfr in enumerate(tet.shifted_tfrs_long):
            tio.write_tfr(out / f"shift{k}_long.tfr", tfr)
            artifacts.append(f"shift{k}_long.tfr")

    extra = {"low_confidence": res.low_confidence, "irr_confidence": res.irr_confidence}
    if args.truth:
        score = _score_against_truth(res, Path(args.truth))
        extra["score"] = score
        print("scores: " + json.dumps(score, sort_keys=True))
    params = {"fs_target": cfg.fs_target, "Q": cfg.tetris.Q,
              "window_long_L": cfg.tetris.window_long_L,
              "window_short_L": cfg.tetris.window_short_L}
    tio.write_manifest(out, "extract", params, artifacts, extra=extra)
    print(f"wrote {len(artifacts) + 1} files to {out}")
    return 0


def _circular_corr(a, b):
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    cc = np.fft.irfft(np.fft.rfft(a) * np.conj(np.fft.rfft(b)), len(a))
    return float(np.max(cc) / (na * nb))


def _score_against_truth(res, truth_dir):
    """Correlate the first surrogate component's fundamental with the target."""
    rows = np.loadtxt(truth_dir / "truth_resp.csv", delimiter=",", skiprows=1)
    t_truth, target = rows[:, 0], rows[:, 1]
    target = np.interp(res.time_axis, t_truth, target)
    n = len(res.time_axis)
    interior = slice(int(0.1 * n), int(0.9 * n))
    fit = res.fits[1] if len(res.fits) > 1 else None
    fund = fit.harmonic(1) if fit is not None else np.zeros(n)
    return {
        "riav1_fundamental_r": _circular_corr(fund[interior], target[interior]),
        "interior_fraction": 0.8,
    }


def cmd_baseline(args):
    cfg, _ = tio.load_run_config(args.config)
    sig = _ingest(args)
    out = _resolve_out(args.out, "baseline")
    out.mkdir(parents=True, exist_ok=True)
    pre = preprocess(sig, cfg)
    triiv = traditional_riiv(pre, cfg.baseline_band)
    triav = traditional_riav(pre, cfg.baseline_band)
    tio.write_series_csv(out / "triiv.csv", pre.times, triiv.samples)
    tio.write_series_csv(out / "triav.csv", pre.times, triav.samples)
    tio.write_manifest(out, "baseline", {"band": list(cfg.baseline_band)},
                       ["triiv.csv", "triav.csv"])
    print(f"wrote 3 files to {out}")
    return 0


def cmd_verify(args):
    out = _resolve_out(args.out, "verify")
    out.mkdir(parents=True, exist_ok=True)
    if args.suite == "noise-decorrelation":
        report = verify_noise_decorrelation(
            noise_fs=args.fs or 50.0,
            f0=args.f0,
            L=args.window,
            n_realizations=args.realizations,
            seed=args.seed,
        )
        print(report.table())
        rows = [
            [p.t, p.xi, abs(p.covariance), abs(p.pseudocovariance), p.bound,
             1.0 if p.passed else 0.0]
            for p in report.points
        ]
        tio.write_columns_csv(out / "decorrelation.csv",
                              "t,xi,abs_cov,abs_pseudo,bound,passed",
                              list(map(np.asarray, zip(*rows))))
        tio.write_manifest(out, "verify", {"suite": args.suite, "f0": args.f0,
                                           "window": args.window,
                                           "realizations": args.realizations},
                           ["decorrelation.csv"],
                           extra={"all_pass": report.all_pass})
        if not report.all_pass:
            print("FAIL: some grid points exceeded the decorrelation bound", file=sys.stderr)
            return EXIT_NUMERIC
        print("pass: all grid points within the decorrelation bound")
        return 0
    if args.suite == "expansion-scaling":
        duration, fs = 40.0, 50.0
        n = int(duration * fs)
        spec = make_preset("semireal-b", duration, fs, seed=args.seed)
        ref = synthesize_ganhm(spec, n)
        res1 = float(np.max(np.abs(expand_ganhm(spec, n).total().samples - ref.samples)))
        half = dataclasses.replace(spec, fm_depth=spec.fm_depth * 0.5)
        res2 = float(np.max(np.abs(
            expand_ganhm(half, n).total().samples - synthesize_ganhm(half, n).samples)))
        ratio = res1 / res2
        tio.write_manifest(out, "verify", {"suite": args.suite},
                           [], extra={"residual": res1, "residual_half": res2,
                                      "ratio": ratio})
        print(f"residual {res1:.3e} -> {res2:.3e}, ratio {ratio:.2f} (expect ~8)")
        if not 6.0 <= ratio <= 10.0:
            print("FAIL: cubic scaling violated", file=sys.stderr)
            return EXIT_NUMERIC
        print("pass: residual scales cubically")
        return 0
    raise ConfigError(f"unknown verify suite {args.suite!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tftetris",
        description="Ensembled time-frequency analysis and respiratory extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a preset signal plus ground truth")
    p.add_argument("--preset", default=None,
                   help="preset name (%s) or 'custom' with a --config spec" %
                        ", ".join(preset_names()))
    p.add_argument("--config", default=None, help="INI file with a [synth] section")
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--riav-depth", type=float, default=None,
                   help="override the preset amplitude-modulation depth")
    p.add_argument("--fm-depth", type=float, default=None,
                   help="override the preset frequency-modulation depth")
    p.add_argument("--noise", action="append",
                   help="center_time,time_spread,center_freq,bandwidth,amplitude[,seed]")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tfr", help="transform a signal file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--kind", choices=("stft", "sst"), default="stft")
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--fmin", type=float, default=0.05)
    p.add_argument("--fmax", type=float, default=8.0)
    p.add_argument("--mag", action="store_true", help="write magnitude only")
    p.add_argument("--pgm", default=None, help="also write a PGM heatmap here")
    p.add_argument("--csv", default=None, help="also write a CSV copy here")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tfr)

    p = sub.add_parser("tetris", help="build the ensembled representation")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--Q", type=int, default=None)
    p.add_argument("--window-short", type=float, default=None)
    p.add_argument("--window-long", type=float, default=None)
    p.add_argument("--export-intermediates", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tetris)

    p = sub.add_parser("extract", help="full respiratory extraction")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--truth", default=None, help="directory of synth ground truth")
    p.add_argument("--export-intermediates", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("baseline", help="traditional envelope baselines")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=("noise-decorrelation", "expansion-scaling"))
    p.add_argument("--f0", type=float, default=1.3)
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--fs", type=float, default=50.0)
    p.add_argument("--realizations", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except ModelViolationError as exc:
        print(f"model violation: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
