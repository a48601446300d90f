"""File formats and configuration.

Formats:
  signal CSV      two columns (t_seconds, value) or one column plus an
                  explicit sample rate; optional header line.
  series CSV      (t_seconds, value) pairs written with 12 significant
                  digits (round-trips within 1e-9).
  TFR binary      magic "TFR1", one ASCII header line
                  "kind fs L t0 n_freq n_time f_lo f_hi payload", then
                  row-major little-endian float32 data: (re, im) pairs for
                  payload=complex, single values for payload=magnitude.
  PGM heatmap     plain (P2) PGM of the log-scaled magnitude, with the
                  scaling recorded in a JSON sidecar next to it.
  config file     INI sections per module ([pipeline], [tetris], [samd],
                  [synth]); unknown keys are rejected.
  manifest        JSON file listing every artifact a command wrote along
                  with its parameters; written last as a completion marker.
"""

import configparser
import dataclasses
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, IngestionError
from .model import PresetSpec, SampledSignal, build_spec, _PRESETS
from .pipeline import PipelineConfig
from .samd import SamdConfig
from .tetris import TetrisConfig
from .tf import Tfr, gaussian_window

_FLOAT_FMT = "%.12g"


# ---------------------------------------------------------------------------
# signal / series CSV
# ---------------------------------------------------------------------------

def read_signal_csv(path, fs=None) -> SampledSignal:
    """Ingest a one- or two-column CSV; two columns carry their own clock."""
    rows = []
    n_cols = None
    try:
        fh = open(path, "r")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                if lineno == 1:  # header line
                    continue
                raise IngestionError(f"cannot parse {path}", line=lineno) from None
            if n_cols is None:
                n_cols = len(vals)
                if n_cols not in (1, 2):
                    raise IngestionError(f"expected 1 or 2 columns, got {n_cols}", line=lineno)
            elif len(vals) != n_cols:
                raise IngestionError("inconsistent column count", line=lineno)
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path} holds no samples")
    data = np.asarray(rows, dtype=float)
    if n_cols == 1:
        if fs is None:
            raise IngestionError("single-column input requires an explicit sample rate")
        return SampledSignal(data[:, 0], float(fs))
    t, v = data[:, 0], data[:, 1]
    if len(t) < 2:
        raise IngestionError("need at least two samples to infer the sample rate")
    dt = np.diff(t)
    if np.any(np.abs(dt - dt[0]) > 1e-6 * max(dt[0], 1e-12)):
        raise IngestionError("time column is not uniformly spaced")
    return SampledSignal(v, 1.0 / dt[0], t0=float(t[0]))


def write_series_csv(path, times, values, header="t,value"):
    with open(path, "w") as fh:
        if header:
            fh.write(header + "\n")
        for t, v in zip(times, values):
            fh.write((_FLOAT_FMT + "," + _FLOAT_FMT + "\n") % (t, v))


def write_columns_csv(path, header, columns):
    """CSV with an arbitrary number of aligned columns."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(_FLOAT_FMT % v for v in row) + "\n")


def write_signal_csv(path, sig: SampledSignal):
    write_series_csv(path, sig.times, np.real(sig.samples))


# ---------------------------------------------------------------------------
# TFR binary format
# ---------------------------------------------------------------------------

_TFR_MAGIC = b"TFR1"


def write_tfr(path, tfr: Tfr, magnitude_only=False):
    payload = "magnitude" if magnitude_only else "complex"
    header = "%s %.12g %.12g %.12g %d %d %.12g %.12g %s\n" % (
        tfr.kind,
        tfr.window.fs,
        tfr.window.span,
        tfr.time_axis[0],
        len(tfr.freq_axis),
        len(tfr.time_axis),
        tfr.freq_axis[0],
        tfr.freq_axis[-1],
        payload,
    )
    with open(path, "wb") as fh:
        fh.write(_TFR_MAGIC)
        fh.write(header.encode("ascii"))
        if magnitude_only:
            data = np.abs(tfr.values).astype("<f4")
        else:
            data = np.empty((tfr.values.shape[0], tfr.values.shape[1], 2), dtype="<f4")
            data[:, :, 0] = tfr.values.real
            data[:, :, 1] = tfr.values.imag
        fh.write(data.tobytes())


def read_tfr(path) -> Tfr:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _TFR_MAGIC:
            raise IngestionError(f"{path} is not a TFR file (bad magic {magic!r})")
        header = fh.readline().decode("ascii").split()
        if len(header) != 9:
            raise IngestionError(f"{path} has a malformed TFR header")
        kind, payload = header[0], header[8]
        fs, L, t0, f_lo, f_hi = (float(header[i]) for i in (1, 2, 3, 6, 7))
        n_freq, n_time = int(header[4]), int(header[5])
        raw = fh.read()
    per = 1 if payload == "magnitude" else 2
    expected = n_freq * n_time * per * 4
    if len(raw) != expected:
        raise IngestionError(f"{path} holds {len(raw)} data bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f4")
    if payload == "magnitude":
        values = flat.reshape(n_freq, n_time).astype(complex)
    else:
        pairs = flat.reshape(n_freq, n_time, 2)
        values = pairs[:, :, 0].astype(np.float64) + 1j * pairs[:, :, 1].astype(np.float64)
    freq_axis = np.linspace(f_lo, f_hi, n_freq)
    time_axis = t0 + np.arange(n_time) / fs
    return Tfr(values, freq_axis, time_axis, gaussian_window(L, fs), kind)


def write_tfr_csv(path, tfr: Tfr, magnitude_only=False):
    """Readable CSV for small matrices: one row per frequency bin.

    Line 1 is a metadata comment, line 2 the time axis; each following row
    starts with its frequency and carries either magnitude cells or
    alternating (re, im) cells.
    """
    payload = "magnitude" if magnitude_only else "complex"
    with open(path, "w") as fh:
        fh.write(
            "# tfr,%s,%.12g,%.12g,%.12g,%s\n"
            % (tfr.kind, tfr.window.fs, tfr.window.span, tfr.time_axis[0], payload)
        )
        fh.write("freq_hz," + ",".join(_FLOAT_FMT % t for t in tfr.time_axis) + "\n")
        for f, row in zip(tfr.freq_axis, tfr.values):
            if magnitude_only:
                cells = ",".join(_FLOAT_FMT % v for v in np.abs(row))
            else:
                cells = ",".join(
                    (_FLOAT_FMT + "," + _FLOAT_FMT) % (v.real, v.imag) for v in row
                )
            fh.write((_FLOAT_FMT % f) + "," + cells + "\n")


def read_tfr_csv(path) -> Tfr:
    with open(path, "r") as fh:
        meta = fh.readline().strip()
        if not meta.startswith("# tfr,"):
            raise IngestionError(f"{path} is not a TFR CSV", line=1)
        _, kind, fs, L, t0, payload = meta[2:].split(",")
        fs, L, t0 = float(fs), float(L), float(t0)
        time_axis = np.array([float(v) for v in fh.readline().split(",")[1:]])
        freqs, rows = [], []
        for lineno, line in enumerate(fh, start=3):
            parts = line.strip().split(",")
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise IngestionError(f"cannot parse {path}", line=lineno) from None
            freqs.append(vals[0])
            if payload == "magnitude":
                rows.append(np.asarray(vals[1:], dtype=complex))
            else:
                pairs = np.asarray(vals[1:]).reshape(-1, 2)
                rows.append(pairs[:, 0] + 1j * pairs[:, 1])
    return Tfr(np.vstack(rows), np.asarray(freqs), time_axis, gaussian_window(L, fs), kind)


# ---------------------------------------------------------------------------
# PGM heatmap
# ---------------------------------------------------------------------------

def write_pgm(path, magnitude, floor_db=-80.0):
    """Plain PGM of a log-scaled magnitude matrix, brightest row last.

    The dB range mapped onto 0..255 is recorded in ``<path>.json``.
    """
    mag = np.asarray(magnitude, dtype=float)
    peak = float(mag.max())
    if peak <= 0:
        db = np.full_like(mag, floor_db)
        vmax = 0.0
    else:
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(mag / peak)
        db = np.maximum(db, floor_db)
        vmax = 0.0
    scaled = np.round((db - floor_db) / (vmax - floor_db) * 255).astype(int)
    flipped = scaled[::-1]  # low frequencies at the bottom of the image
    h, w = flipped.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n255\n")
        for row in flipped:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
    sidecar = {"db_floor": floor_db, "db_ceiling": vmax, "peak_magnitude": peak}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=1))


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def write_manifest(out_dir, command, params, artifacts, extra=None):
    """JSON completion marker; every listed artifact already exists."""
    out_dir = Path(out_dir)
    body = {
        "command": command,
        "parameters": params,
        "artifacts": sorted(str(a) for a in artifacts),
    }
    if extra:
        body.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(body, sort_keys=True, indent=1))
    return path


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_TUPLE_KEYS = {"irr_band", "baseline_band", "short_band", "long_band", "weights"}


def _coerce(cls, key, text):
    if key in _TUPLE_KEYS:
        return tuple(float(p) for p in text.replace("(", "").replace(")", "").split(","))
    hints = {f.name: f.type for f in dataclasses.fields(cls)}
    hint = hints.get(key)
    if hint is int or hint == "int":
        return int(text)
    return float(text)


def _section(parser, name, cls, defaults):
    if name not in parser:
        return defaults
    known = {f.name for f in dataclasses.fields(cls)}
    updates = {}
    for key, text in parser[name].items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        updates[key] = _coerce(cls, key, text)
    if name == "tetris" and "Q" in updates and "weights" not in updates:
        updates["weights"] = None  # regenerate the per-term weights for the new Q
    try:
        return dataclasses.replace(defaults, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in section [{name}]: {exc}") from exc


def load_run_config(path=None, overrides=None):
    """Build a PipelineConfig (and synth options) from an INI file.

    ``overrides`` maps (section, key) -> value and wins over the file, so
    command-line flags can take precedence.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive field names
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file {path} not found")
        for section in parser.sections():
            if section not in ("pipeline", "tetris", "samd", "synth"):
                raise ConfigError(f"unknown config section [{section}]")
    if overrides:
        for (section, key), value in overrides.items():
            if value is None:
                continue
            if not parser.has_section(section):
                parser.add_section(section)
            parser[section][key] = str(value)

    tetris_cfg = _section(parser, "tetris", TetrisConfig, TetrisConfig())
    samd_cfg = _section(parser, "samd", SamdConfig, SamdConfig())
    pipe_defaults = PipelineConfig(tetris=tetris_cfg, samd=samd_cfg)
    pipeline_cfg = _section(parser, "pipeline", PipelineConfig, pipe_defaults)

    synth = dict(_SYNTH_DEFAULTS)
    if "synth" in parser:
        for key, text in parser["synth"].items():
            if key not in synth:
                raise ConfigError(f"unknown key {key!r} in section [synth]")
            if key == "preset":
                synth[key] = text
            elif key in ("harmonic_amps", "harmonic_phases"):
                synth[key] = tuple(float(p) for p in text.split(","))
            else:
                synth[key] = float(text)
    synth["seed"] = int(synth["seed"])
    return pipeline_cfg, synth


# ---------------------------------------------------------------------------
# model-spec serialization (the preset-family parameterization)
# ---------------------------------------------------------------------------

_SYNTH_DEFAULTS = {
    "preset": "semireal-a",
    "duration": 110.0,
    "fs": 50.0,
    "seed": 0,
    "harmonic_amps": None,
    "harmonic_phases": None,
    "cardiac_rate": None,
    "resp_rate": None,
    "riav_depth": None,
    "riav_phase": None,
    "fm_depth": None,
    "riiv_depth": 0.0,
    "cardiac_wander": 0.1,
    "resp_wander": None,
}


def synth_params_to_preset(synth):
    """Resolve a [synth] parameter dict into a concrete parameterization."""
    base = _PRESETS.get(synth["preset"])
    if base is None and any(
        synth[k] is None for k in ("harmonic_amps", "harmonic_phases", "cardiac_rate",
                                   "resp_rate", "riav_depth", "riav_phase", "fm_depth")
    ):
        raise ConfigError(
            f"unknown preset {synth['preset']!r}; a fully custom spec must set "
            "harmonic_amps, harmonic_phases, cardiac_rate, resp_rate, riav_depth, "
            "riav_phase, and fm_depth"
        )

    def pick(key, attr):
        return synth[key] if synth[key] is not None else getattr(base, attr)

    return PresetSpec(
        name=synth["preset"],
        harmonic_amps=tuple(pick("harmonic_amps", "harmonic_amps")),
        harmonic_phases=tuple(pick("harmonic_phases", "harmonic_phases")),
        cardiac_rate=float(pick("cardiac_rate", "cardiac_rate")),
        resp_rate=float(pick("resp_rate", "resp_rate")),
        riav_depth=float(pick("riav_depth", "riav_depth")),
        riav_phase=float(pick("riav_phase", "riav_phase")),
        fm_depth=float(pick("fm_depth", "fm_depth")),
    )


def spec_from_synth_params(synth):
    """Build the model spec a [synth] section describes."""
    p = synth_params_to_preset(synth)
    return build_spec(
        p,
        duration=synth["duration"],
        fs=synth["fs"],
        seed=synth["seed"],
        cardiac_wander=synth["cardiac_wander"],
        resp_wander=synth["resp_wander"],
        riiv_depth=synth["riiv_depth"],
    )


def save_synth_config(path, synth):
    """Write a [synth] section that regenerates the same signal bit for bit."""
    p = synth_params_to_preset(synth)
    lines = ["[synth]"]
    lines.append(f"preset = {synth['preset']}")
    lines.append(f"duration = {synth['duration']:.12g}")
    lines.append(f"fs = {synth['fs']:.12g}")
    lines.append(f"seed = {synth['seed']}")
    lines.append("harmonic_amps = " + ",".join("%.12g" % v for v in p.harmonic_amps))
    lines.append("harmonic_phases = " + ",".join("%.12g" % v for v in p.harmonic_phases))
    for key, val in (
        ("cardiac_rate", p.cardiac_rate),
        ("resp_rate", p.resp_rate),
        ("riav_depth", p.riav_depth),
        ("riav_phase", p.riav_phase),
        ("fm_depth", p.fm_depth),
        ("riiv_depth", synth["riiv_depth"]),
        ("cardiac_wander", synth["cardiac_wander"]),
    ):
        lines.append(f"{key} = {val:.12g}")
    if synth["resp_wander"] is not None:
        lines.append(f"resp_wander = {synth['resp_wander']:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")
