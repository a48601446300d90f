"""Phase shift-down iteration, TF-plane tessellation, and the ensembled TFR.

The ensemble is a weighted power mean of the synchrosqueezed magnitudes of
successively shifted copies of the signal: each shift multiplies by
exp(-i*2*pi*psi(t)) where psi is the current estimate of the dominant cardiac
phase, moving every harmonic's structure down one band.  Averaging the
magnitudes decorrelates localized noise (which lands in a different band at
every shift) while the oscillatory structure stays aligned.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import medfilt

from .errors import ConfigError, RidgeConfidenceError
from .model import PhaseFunction, SampledSignal
from .tf import Ridge, am_phase, default_freq_axis, extract_ridge, gaussian_window, \
    reconstruct_mode, sst

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TetrisConfig:
    """Knobs for the ensemble construction.

    ``Q`` shifts (Q+1 terms), per-term ``weights`` (summing to Q+1 keeps the
    power-mean sandwich property), exponent ``p >= 1``, and the two window
    spans.  The remaining fields tune ridge tracking and reconstruction and
    carry the stated defaults.
    """

    Q: int = 5
    weights: tuple = None
    p: float = 1.0
    window_short_L: float = 10.0
    window_long_L: float = 90.0
    # ridge / reconstruction tuning
    search_halfwidth: float = 0.3     # Hz around the previous cardiac estimate
    ridge_penalty: float = np.log(10.0) / 0.01  # 0.1 Hz jump ~ a 10x magnitude ratio
    ref_weight: float = 30.0
    recon_halfwidth: float = 0.2      # Hz, integration half-width for the phase mode
    confidence_floor: float = 3.0     # median on-ridge / median off-ridge abort ratio
    gamma: float = None
    short_band: tuple = (0.1, 8.0)
    long_band: tuple = (0.05, 3.5)

    def __post_init__(self):
        if self.Q < 0:
            raise ConfigError("Q must be non-negative")
        if self.p < 1:
            raise ConfigError("p must be at least 1")
        w = np.ones(self.Q + 1) if self.weights is None else np.asarray(self.weights, float)
        if len(w) != self.Q + 1:
            raise ConfigError(f"need {self.Q + 1} weights, got {len(w)}")
        if np.any(w <= 0):
            raise ConfigError("weights must be positive")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))


@dataclass
class Tessellation:
    """Partition of the TF plane along multiples of the cardiac rate."""

    ihr: np.ndarray
    d1: int
    time_axis: np.ndarray
    boundaries: np.ndarray  # (d1+1, n): rows j*ihr for j=0..d1

    def region_of(self, t, xi):
        """Band index j with xi in ((j-1)*ihr(t), j*ihr(t)]; d1+1 above the top.

        ``t`` in seconds (snapped to the nearest frame), ``xi`` in Hz; both
        broadcast.
        """
        t = np.asarray(t, dtype=float)
        xi = np.asarray(xi, dtype=float)
        dt = self.time_axis[1] - self.time_axis[0] if len(self.time_axis) > 1 else 1.0
        idx = np.clip(np.rint((t - self.time_axis[0]) / dt).astype(int), 0, len(self.ihr) - 1)
        ratio = xi / self.ihr[idx]
        region = np.ceil(ratio - 1e-9).astype(int)
        return np.minimum(np.maximum(region, 1), self.d1 + 1)


def tessellate(ihr, d1: int) -> Tessellation:
    """Build the band partition from a cardiac-rate curve (Ridge or vector)."""
    if isinstance(ihr, Ridge):
        vals = np.asarray(ihr.freqs, dtype=float)
        time_axis = np.arange(len(vals), dtype=float)
    else:
        vals = np.asarray(ihr, dtype=float)
        time_axis = np.arange(len(vals), dtype=float)
    if np.any(vals <= 0):
        raise ConfigError("cardiac rate must be strictly positive")
    boundaries = np.arange(d1 + 1)[:, None] * vals[None, :]
    return Tessellation(ihr=vals, d1=d1, time_axis=time_axis, boundaries=boundaries)


def tessellate_on(ihr_vals, d1, time_axis) -> Tessellation:
    """Like ``tessellate`` but with an explicit time axis."""
    tess = tessellate(ihr_vals, d1)
    tess.time_axis = np.asarray(time_axis, dtype=float)
    return tess


def shift_down(sig: SampledSignal, psi: PhaseFunction) -> SampledSignal:
    """Multiply pointwise by exp(-i*2*pi*psi(t)); real input promotes to complex."""
    if len(psi) != len(sig):
        raise ConfigError(f"phase length {len(psi)} does not match signal length {len(sig)}")
    rotated = np.asarray(sig.samples, dtype=complex) * np.exp(-1j * TWO_PI * psi.phase)
    return SampledSignal(rotated, sig.fs, sig.t0)


@dataclass
class TetrisOutput:
    """Ensemble matrices plus every intermediate the iteration produced."""

    T_long: np.ndarray
    T_short: np.ndarray
    long_freq_axis: np.ndarray
    short_freq_axis: np.ndarray
    time_axis: np.ndarray
    shifted_tfrs_long: list
    shifted_tfrs_short: list
    shifted_signals: list
    phase_estimates: list
    cardiac_ridges: list
    config: TetrisConfig


def power_mean(stack, weights, p):
    """Weighted power mean ((1/K) * sum w_k x_k^p)^(1/p) over the first axis."""
    stack = np.asarray(stack)
    w = np.asarray(weights, dtype=float).reshape(-1, *([1] * (stack.ndim - 1)))
    acc = (w * stack**p).sum(axis=0) / stack.shape[0]
    return acc ** (1.0 / p)


def _ridge_confidence(mag, freq_axis, ridge, band):
    """Median on-ridge magnitude over median in-band off-ridge magnitude.

    A band whose off-ridge cells are all zero (synchrosqueezing leaves clean
    bands exactly sparse) is benign, not degraded, and passes vacuously; the
    abort is meant for records where noise floods the search band.
    """
    sel = (freq_axis >= band[0]) & (freq_axis <= band[1])
    sub = mag[sel]
    f = freq_axis[sel]
    on = np.median(ridge.confidence)
    off_mask = np.abs(f[:, None] - ridge.freqs[None, :]) > 3 * (f[1] - f[0])
    off_vals = sub[off_mask]
    off = np.median(off_vals) if off_vals.size else 0.0
    return on / off if off > 0 else np.inf


def build_tetris(sig: SampledSignal, ihr_seed: Ridge, cfg: TetrisConfig) -> TetrisOutput:
    """Run the shift-down iteration and assemble the ensembled TFR.

    Iteration k estimates the dominant cardiac phase of the current shifted
    signal from its short-window SST (ridge tracked within
    ``search_halfwidth`` of the previous estimate), applies the shift, and
    recomputes both SSTs.  Aborts with the iteration index when the tracked
    ridge falls below the confidence floor.
    """
    if sig.duration <= cfg.window_long_L:
        raise ConfigError(
            f"signal duration {sig.duration:.1f}s must exceed the long window "
            f"{cfg.window_long_L}s"
        )
    fs = sig.fs
    w_short = gaussian_window(cfg.window_short_L, fs)
    w_long = gaussian_window(cfg.window_long_L, fs)
    axis_short = default_freq_axis(w_short, fs, *cfg.short_band)
    axis_long = default_freq_axis(w_long, fs, *cfg.long_band)

    current = SampledSignal(np.asarray(sig.samples, dtype=complex), fs, sig.t0)
    # beat-interval seeds carry outlier spikes (secondary in-cycle peaks);
    # a short median filter keeps the hard search band from locking onto them
    med_w = int(round(2.5 * fs)) | 1
    reference = medfilt(np.asarray(ihr_seed.freqs, dtype=float), min(med_w, 2 * (len(ihr_seed) // 2) - 1))

    tfrs_short, tfrs_long, signals, phases, ridges = [], [], [], [], []
    for k in range(cfg.Q + 1):
        S_short = sst(current, w_short, axis_short, cfg.gamma)
        S_long = sst(current, w_long, axis_long, cfg.gamma)
        band = (
            max(cfg.short_band[0], reference.min() - cfg.search_halfwidth),
            min(cfg.short_band[1], reference.max() + cfg.search_halfwidth),
        )
        ridge = extract_ridge(
            S_short.values,
            axis_short,
            band,
            cfg.ridge_penalty,
            reference=reference,
            ref_weight=cfg.ref_weight,
            ref_halfwidth=cfg.search_halfwidth,
        )
        conf = _ridge_confidence(np.abs(S_short.values), axis_short, ridge, band)
        if conf < cfg.confidence_floor:
            raise RidgeConfidenceError(
                "tetris",
                f"cardiac ridge confidence {conf:.2f} fell below {cfg.confidence_floor}",
                iteration=k,
            )
        mode = reconstruct_mode(S_short, ridge, cfg.recon_halfwidth)
        _, psi = am_phase(mode)

        tfrs_short.append(S_short)
        tfrs_long.append(S_long)
        signals.append(current)
        phases.append(psi)
        ridges.append(ridge)

        if k < cfg.Q:
            current = shift_down(current, psi)
            reference = ridge.freqs

    T_long = power_mean([np.abs(t.values) for t in tfrs_long], cfg.weights, cfg.p)
    T_short = power_mean([np.abs(t.values) for t in tfrs_short], cfg.weights, cfg.p)
    return TetrisOutput(
        T_long=T_long,
        T_short=T_short,
        long_freq_axis=axis_long,
        short_freq_axis=axis_short,
        time_axis=sig.times,
        shifted_tfrs_long=tfrs_long,
        shifted_tfrs_short=tfrs_short,
        shifted_signals=signals,
        phase_estimates=phases,
        cardiac_ridges=ridges,
        config=cfg,
    )


@dataclass
class DecorrelationPoint:
    t: float
    xi: float
    covariance: complex
    pseudocovariance: complex
    bound: float
    passed: bool
    var_orig: float
    var_shift: float


@dataclass
class NoiseDecorrelationReport:
    points: list
    n_realizations: int
    f0: float
    support: float

    @property
    def all_pass(self):
        return all(p.passed for p in self.points)

    def table(self):
        lines = ["t(s)    xi(Hz)  |cov|      |pseudo|   bound      result"]
        for p in self.points:
            lines.append(
                f"{p.t:<7.2f} {p.xi:<7.3f} {abs(p.covariance):<10.3e} "
                f"{abs(p.pseudocovariance):<10.3e} {p.bound:<10.3e} "
                f"{'pass' if p.passed else 'FAIL'}"
            )
        return "\n".join(lines)


def verify_noise_decorrelation(
    noise_fs,
    f0,
    L,
    n_realizations,
    seed=0,
    grid_times=None,
    grid_freqs=None,
    duration=None,
    require_support=True,
) -> NoiseDecorrelationReport:
    """Monte Carlo check that a frequency shift decorrelates STFT noise.

    Draws white Gaussian realizations, evaluates the STFT of each and of its
    copy shifted down by ``f0`` at a grid of (t, xi) points, and tests that
    sample covariance and pseudocovariance stay under 3/sqrt(n) times the
    product of the marginal standard deviations.  With ``require_support``
    the call refuses when the window's effective spectral support reaches
    ``f0`` (the decorrelation hypothesis fails); pass False to run the
    negative control anyway.
    """
    w = gaussian_window(L, noise_fs)
    support = w.effective_support()
    if require_support and support >= f0:
        raise ConfigError(
            f"window spectral support {support:.3f} Hz is not narrower than the "
            f"shift {f0} Hz; decorrelation is not guaranteed"
        )
    if duration is None:
        duration = L + 8.0
    n = int(round(duration * noise_fs))
    t_all = np.arange(n) / noise_fs
    if grid_times is None:
        mid = duration / 2
        grid_times = [mid - L / 8, mid, mid + L / 8]
    if grid_freqs is None:
        grid_freqs = [0.6, 1.0, 1.4, 2.0]

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n_realizations, n))
    shift = np.exp(-1j * TWO_PI * f0 * t_all)

    half = w.half
    points = []
    for t_c in grid_times:
        c = int(round(t_c * noise_fs))
        if c - half < 0 or c + half + 1 > n:
            raise ConfigError(f"grid time {t_c}s does not fit the window inside the signal")
        sl = slice(c - half, c + half + 1)
        for xi in grid_freqs:
            kernel = w.taps * np.exp(-1j * TWO_PI * xi * (t_all[sl] - t_all[c])) / noise_fs
            v_orig = noise[:, sl] @ kernel
            v_shift = (noise[:, sl] * shift[sl][None, :]) @ kernel
            mo, ms = v_orig.mean(), v_shift.mean()
            cov = np.mean(v_orig * np.conj(v_shift)) - mo * np.conj(ms)
            pseudo = np.mean(v_orig * v_shift) - mo * ms
            s_o = np.sqrt(np.mean(np.abs(v_orig - mo) ** 2))
            s_s = np.sqrt(np.mean(np.abs(v_shift - ms) ** 2))
            bound = 3.0 / np.sqrt(n_realizations) * s_o * s_s
            points.append(
                DecorrelationPoint(
                    t=float(t_c),
                    xi=float(xi),
                    covariance=complex(cov),
                    pseudocovariance=complex(pseudo),
                    bound=float(bound),
                    passed=bool(abs(cov) <= bound and abs(pseudo) <= bound),
                    var_orig=float(s_o**2),
                    var_shift=float(s_s**2),
                )
            )
    return NoiseDecorrelationReport(
        points=points,
        n_realizations=n_realizations,
        f0=float(f0),
        support=float(support),
    )
