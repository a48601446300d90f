"""End-to-end respiratory extraction from a pulse-wave signal.

Stages: resample + zero-phase high-pass, cardiac peak detection, rate seeding
by spline interpolation of beat intervals, ensemble construction, respiratory
ridge on the long-window ensemble, per-shift mode reconstruction, and
harmonic least-squares reconstruction of each surrogate respiratory signal.
Also carries the traditional envelope baselines.
"""

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import butter, find_peaks, resample_poly, sosfiltfilt
from scipy.ndimage import uniform_filter1d

from .errors import ConfigError, StageError
from .model import SampledSignal
from .samd import SamdConfig, samd_fit
from .tetris import TetrisConfig, TetrisOutput, build_tetris
from .tf import Ridge, am_phase, extract_ridge, reconstruct_mode

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PipelineConfig:
    fs_target: float = 50.0
    hp_cutoff: float = 0.1
    hp_order: int = 4
    irr_band: tuple = (0.1, 0.5)
    baseline_band: tuple = (0.1, 1.0)
    tetris: TetrisConfig = field(default_factory=TetrisConfig)
    samd: SamdConfig = field(default_factory=SamdConfig)
    # step-2 tuning
    irr_ridge_penalty: float = 200.0
    step2_halfwidth: float = 0.08   # Hz around the respiratory reference
    step2_ref_weight: float = 50.0
    recon_halfwidth_resp: float = 0.06
    irr_confidence_floor: float = 10.0
    shift_gate: float = 0.05        # drop shifts this much weaker than the strongest

    def __post_init__(self):
        nyq = self.fs_target / 2
        for name in ("irr_band", "baseline_band"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi < nyq):
                raise ConfigError(f"{name} must lie inside (0, {nyq})")


@dataclass
class RespiratoryOutputs:
    """Every series the pipeline produces, on the analysis grid."""

    time_axis: np.ndarray
    ihr: np.ndarray                  # cardiac-rate estimate (the FM readout)
    irr: np.ndarray                  # respiratory-rate ridge on the ensemble
    riiv: SampledSignal              # reconstructed additive component (l = 0)
    riav_per_harmonic: list          # reconstructed components for l = 1..Q
    triiv: SampledSignal
    triav: SampledSignal
    resp_am: list                    # per-l fundamental amplitude estimates
    resp_phase: list                 # per-l fundamental phase estimates
    fits: list                       # per-l SamdFit (None where the shift was gated)
    shift_strengths: list            # per-l median on-ridge magnitude
    peaks: np.ndarray
    tetris: TetrisOutput
    low_confidence: bool
    irr_confidence: float


def preprocess(raw: SampledSignal, cfg: PipelineConfig) -> SampledSignal:
    """Resample to the target rate and remove the baseline.

    Band-limited polyphase resampling when the rate ratio is rational (always,
    up to the tolerance of ``Fraction``), then a zero-phase 4th-order
    Butterworth high-pass at ``hp_cutoff``.
    """
    if raw.duration <= 60.0:
        raise ConfigError(f"signal must exceed 60 s, got {raw.duration:.1f} s")
    x = np.asarray(raw.samples, dtype=float)
    if abs(raw.fs - cfg.fs_target) > 1e-9:
        frac = Fraction(cfg.fs_target / raw.fs).limit_denominator(1000)
        x = resample_poly(x, frac.numerator, frac.denominator)
    sos = butter(cfg.hp_order, cfg.hp_cutoff, btype="highpass", fs=cfg.fs_target, output="sos")
    x = sosfiltfilt(sos, x)
    return SampledSignal(x, cfg.fs_target, raw.t0)


def detect_cycles(sig: SampledSignal) -> np.ndarray:
    """Cardiac peak times: local maxima over an adaptive rolling threshold.

    Threshold is half the rolling standard deviation over a 2 s window;
    minimum separation 0.33 s (180 bpm).  Peak times are refined to
    sub-sample resolution with a parabolic fit through the three samples
    around each maximum, which takes the beat-interval quantization error
    out of the rate estimates.
    """
    x = np.asarray(sig.samples, dtype=float)
    if np.iscomplexobj(sig.samples):
        raise ConfigError("peak detection expects a real signal")
    win = max(3, int(round(2.0 * sig.fs)))
    mean = uniform_filter1d(x, win, mode="reflect")
    var = uniform_filter1d(x**2, win, mode="reflect") - mean**2
    thresh = 0.5 * np.sqrt(np.maximum(var, 0.0))
    idx, _ = find_peaks(x, distance=max(1, int(round(0.33 * sig.fs))))
    idx = idx[x[idx] > thresh[idx]]
    if len(idx) < 10:
        raise StageError("detect-cycles", f"found only {len(idx)} peaks (need 10)")
    times = idx.astype(float)
    ok = (idx > 0) & (idx < len(x) - 1)
    i = idx[ok]
    denom = x[i - 1] - 2 * x[i] + x[i + 1]
    shift = np.zeros(len(i))
    nz = denom < 0  # proper maxima only
    shift[nz] = 0.5 * (x[i - 1] - x[i + 1])[nz] / denom[nz]
    times[ok] += np.clip(shift, -0.5, 0.5)
    return sig.t0 + times / sig.fs


def ihr_from_cycles(peak_times, time_axis) -> Ridge:
    """Cardiac-rate seed: natural cubic spline through (t_k, 1/(t_k - t_{k-1})).

    Evaluated on ``time_axis`` with constant extrapolation outside the knot
    range and clamped to the observed rate range (no spline overshoot).
    """
    t = np.asarray(peak_times, dtype=float)
    if len(t) < 3:
        raise ConfigError("need at least 3 peaks to seed the cardiac rate")
    if np.any(np.diff(t) <= 0):
        raise ConfigError("peak times must be strictly increasing (duplicates?)")
    knots = t[1:]
    rates = 1.0 / np.diff(t)
    spline = CubicSpline(knots, rates, bc_type="natural")
    grid = np.clip(np.asarray(time_axis, dtype=float), knots[0], knots[-1])
    vals = spline(grid)
    vals = np.clip(vals, rates.min(), rates.max())
    return Ridge(
        freqs=vals,
        band=(float(rates.min()), float(rates.max())),
        score=0.0,
        confidence=np.ones_like(vals),
    )


def _envelope(sig: SampledSignal, anchor_times) -> np.ndarray:
    """Cubic-spline envelope through (t_k, sig(t_k)), clamped at the ends."""
    t = np.asarray(anchor_times, dtype=float)
    idx = np.clip(np.round((t - sig.t0) * sig.fs).astype(int), 0, len(sig) - 1)
    spline = CubicSpline(t, np.asarray(sig.samples, float)[idx], bc_type="natural")
    grid = np.clip(sig.times, t[0], t[-1])
    return spline(grid)


def _bandpass(x, band, fs, order=4):
    sos = butter(order, band, btype="bandpass", fs=fs, output="sos")
    return sosfiltfilt(sos, x)


def traditional_riiv(sig: SampledSignal, band=(0.1, 1.0)) -> SampledSignal:
    """Band-passed upper envelope through the systolic peaks."""
    peaks = detect_cycles(sig)
    env = _envelope(sig, peaks)
    return SampledSignal(_bandpass(env, band, sig.fs), sig.fs, sig.t0)


def traditional_riav(sig: SampledSignal, band=(0.1, 1.0)) -> SampledSignal:
    """Band-passed peak-minus-trough envelope difference."""
    peaks = detect_cycles(sig)
    flipped = SampledSignal(-np.asarray(sig.samples, float), sig.fs, sig.t0)
    troughs = detect_cycles(flipped)
    upper = _envelope(sig, peaks)
    lower = -_envelope(flipped, troughs)
    return SampledSignal(_bandpass(upper - lower, band, sig.fs), sig.fs, sig.t0)


def _lowpass(x, cutoff, fs, order=4):
    sos = butter(order, cutoff, btype="lowpass", fs=fs, output="sos")
    return sosfiltfilt(sos, x)


def extract_respiration(sig: SampledSignal, cfg: PipelineConfig = PipelineConfig()):
    """Run the full chain and return every intermediate worth keeping.

    The per-shift loop reconstructs, for each k, the fundamental of the
    respiratory modulation visible in that shifted signal's long-window SST
    (tracked within ``step2_halfwidth`` of the ensemble respiratory ridge),
    then refits it with the harmonic least-squares model on the low-passed
    real part of the shifted signal.  A weak respiratory ridge flags the
    outputs as low confidence instead of failing.
    """
    pre = preprocess(sig, cfg)
    peaks = detect_cycles(pre)
    seed = ihr_from_cycles(peaks, pre.times)
    tet = build_tetris(pre, seed, cfg.tetris)

    irr_ridge = extract_ridge(
        tet.T_long, tet.long_freq_axis, cfg.irr_band, cfg.irr_ridge_penalty
    )
    irr_conf = _band_contrast(tet.T_long, tet.long_freq_axis, irr_ridge, cfg.irr_band)
    low_confidence = irr_conf < cfg.irr_confidence_floor
    if low_confidence:
        warnings.warn(
            f"respiratory ridge contrast {irr_conf:.2f} below floor "
            f"{cfg.irr_confidence_floor}; outputs flagged low confidence",
            stacklevel=2,
        )

    # first pass: per-shift respiratory ridge and mode reconstruction
    modes = []
    strengths = []
    for S in tet.shifted_tfrs_long:
        ridge_k = extract_ridge(
            np.abs(S.values),
            tet.long_freq_axis,
            cfg.irr_band,
            cfg.irr_ridge_penalty,
            reference=irr_ridge,
            ref_weight=cfg.step2_ref_weight,
            ref_halfwidth=cfg.step2_halfwidth,
        )
        mode = reconstruct_mode(S, ridge_k, cfg.recon_halfwidth_resp)
        am_k, phase_k = am_phase(mode)
        modes.append((am_k, phase_k))
        strengths.append(float(np.median(ridge_k.confidence)))
    top = max(strengths) if strengths else 0.0

    # second pass: fit each shift whose ridge carries real mass; a shift more
    # than 20x weaker than the strongest holds no usable modulation and its
    # junk phase estimate would let the fit absorb unrelated content
    resp_am, resp_phase, fits, components = [], [], [], []
    for k, (am_k, phase_k) in enumerate(modes):
        x_k = np.real(tet.shifted_signals[k].samples)
        x_k = _lowpass(x_k, cfg.baseline_band[1], pre.fs)
        resp_am.append(am_k)
        resp_phase.append(phase_k)
        if strengths[k] <= cfg.shift_gate * top or float(np.max(am_k)) <= 0:
            fits.append(None)
            components.append(SampledSignal(np.zeros_like(x_k), pre.fs, pre.t0))
            continue
        am_fit = np.maximum(am_k, 1e-6 * float(np.max(am_k)))
        phase_fit = _strictly_increasing(phase_k.phase)
        try:
            fit = samd_fit(SampledSignal(x_k, pre.fs, pre.t0), am_fit, phase_fit, cfg.samd)
        except ConfigError as exc:
            raise StageError("samd", str(exc)) from exc
        fits.append(fit)
        components.append(fit.component)

    triiv = traditional_riiv(pre, cfg.baseline_band)
    triav = traditional_riav(pre, cfg.baseline_band)

    return RespiratoryOutputs(
        time_axis=pre.times,
        ihr=tet.phase_estimates[0].derivative.copy(),
        irr=irr_ridge.freqs,
        riiv=components[0],
        riav_per_harmonic=components[1:],
        triiv=triiv,
        triav=triav,
        resp_am=resp_am,
        resp_phase=resp_phase,
        fits=fits,
        shift_strengths=strengths,
        peaks=peaks,
        tetris=tet,
        low_confidence=bool(low_confidence),
        irr_confidence=float(irr_conf),
    )


def _strictly_increasing(phase):
    """Repair a noisy phase estimate so downstream fits accept it."""
    out = np.maximum.accumulate(np.asarray(phase, dtype=float))
    return out + 1e-9 * np.arange(len(out))


def _band_contrast(mag, freq_axis, ridge, band):
    """On-ridge/off-ridge contrast; zero when the ridge carries no mass at all."""
    sel = (freq_axis >= band[0]) & (freq_axis <= band[1])
    sub = mag[sel]
    f = freq_axis[sel]
    df = f[1] - f[0] if len(f) > 1 else 1.0
    on = np.median(ridge.confidence)
    if on <= 0:
        return 0.0
    off_mask = np.abs(f[:, None] - ridge.freqs[None, :]) > 3 * df
    off_vals = sub[off_mask]
    off = np.median(off_vals) if off_vals.size else 0.0
    return float(on / off) if off > 0 else np.inf
