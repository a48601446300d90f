"""Transform engine: Gaussian windows, STFT, synchrosqueezing, ridges, modes.

Conventions fixed here and relied on everywhere else:

  V(t, xi) = dt * sum_x sig(x) * h(x - t) * exp(-i * 2*pi * xi * (x - t))

so a tone cos(2*pi*f*t) produces a positive-frequency ridge at xi = f with
value (1/2) * hhat(xi - f) * exp(i*2*pi*f*t), and the reassignment frequency is

  omega(t, xi) = xi - Im[ V_h'(t, xi) / V(t, xi) ] / (2*pi)

with V_h' the STFT taken with the sampled analytic derivative of the window.
Frames are computed at every sample; windows are truncated at the signal
edges and renormalized per frame.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError
from .model import PhaseFunction, SampledSignal

TWO_PI = 2.0 * np.pi
_FFT_WORKERS = 2
_MAX_NFFT = 8192  # keeps the long-window grid tractable; still ~0.006 Hz at 50 Hz
_NEG_INF = -1e30


@dataclass
class GaussianWindow:
    """Truncated Gaussian window with unit discrete l2 norm.

    ``sigma = span / (2 * half_support_sigmas)`` so the half time support
    span/2 covers ``half_support_sigmas`` standard deviations (default 6).
    ``dtaps`` is the sampled analytic derivative of the normalized window.
    """

    span: float
    sigma: float
    fs: float
    half_support_sigmas: float
    taps: np.ndarray
    dtaps: np.ndarray
    times: np.ndarray
    peak: float

    @property
    def half(self):
        return (len(self.taps) - 1) // 2

    def ft(self, eta):
        """Analytic Fourier transform consistent with dt-weighted summation."""
        eta = np.asarray(eta, dtype=float)
        return self.peak * self.sigma * np.sqrt(TWO_PI) * np.exp(
            -2.0 * np.pi**2 * self.sigma**2 * eta**2
        )

    def effective_support(self, rel=1e-6):
        """Half-width (Hz) where the transform stays above ``rel`` of its peak."""
        return np.sqrt(np.log(1.0 / rel) / 2.0) / (np.pi * self.sigma)


def gaussian_window(L, fs, half_support_sigmas=6.0) -> GaussianWindow:
    """Gaussian window spanning ``L`` seconds, sampled at ``fs``."""
    if L <= 0:
        raise ConfigError(f"window span must be positive, got {L}")
    if L * fs < 8:
        raise ConfigError(f"window span {L}s at {fs} Hz yields fewer than 8 taps")
    half = int(round(L * fs / 2))
    times = np.arange(-half, half + 1) / fs
    sigma = L / (2.0 * half_support_sigmas)
    raw = np.exp(-(times**2) / (2.0 * sigma**2))
    scale = 1.0 / np.linalg.norm(raw)
    taps = raw * scale
    dtaps = -(times / sigma**2) * taps
    return GaussianWindow(
        span=float(L),
        sigma=sigma,
        fs=float(fs),
        half_support_sigmas=float(half_support_sigmas),
        taps=taps,
        dtaps=dtaps,
        times=times,
        peak=float(scale),
    )


@dataclass
class Tfr:
    """Complex time-frequency matrix with explicit axes."""

    values: np.ndarray  # (n_freq, n_time)
    freq_axis: np.ndarray
    time_axis: np.ndarray
    window: GaussianWindow
    kind: str  # "stft" | "sst"

    def __post_init__(self):
        if self.values.shape != (len(self.freq_axis), len(self.time_axis)):
            raise ConfigError(
                f"values shape {self.values.shape} does not match axes "
                f"({len(self.freq_axis)}, {len(self.time_axis)})"
            )
        if len(self.freq_axis) > 1 and np.any(np.diff(self.freq_axis) <= 0):
            raise ConfigError("frequency axis must be strictly increasing")
        if len(self.time_axis) > 1 and np.any(np.diff(self.time_axis) <= 0):
            raise ConfigError("time axis must be strictly increasing")

    @property
    def df(self):
        return float(self.freq_axis[1] - self.freq_axis[0])

    @property
    def magnitude(self):
        return np.abs(self.values)


@dataclass
class Ridge:
    """Frequency curve over the frames of a TFR."""

    freqs: np.ndarray
    band: tuple
    score: float
    confidence: np.ndarray = None  # on-ridge magnitude per frame

    def __len__(self):
        return len(self.freqs)


def default_freq_axis(w: GaussianWindow, fs, f_lo=None, f_hi=None):
    """Uniform grid at fs/n_fft spacing, n_fft the padded power of two.

    n_fft targets a zero-padding factor of four, capped at 8192 samples so
    long windows stay tractable; the cap never raises the grid spacing above
    what is needed to separate respiratory sidebands.
    """
    n_fft = _default_nfft(w, fs)
    df = fs / n_fft
    if f_lo is None:
        f_lo = df
    if f_hi is None:
        f_hi = fs / 2
    j0 = max(1, int(np.ceil(f_lo / df - 1e-9)))
    j1 = int(np.floor(f_hi / df + 1e-9))
    if j1 < j0:
        raise ConfigError(f"empty frequency band ({f_lo}, {f_hi})")
    return df * np.arange(j0, j1 + 1)


def _default_nfft(w, fs):
    target = 4 * len(w.taps)
    n = 1
    while n < target:
        n *= 2
    n = min(n, _MAX_NFFT)
    while n < len(w.taps):  # the cap must never truncate the window itself
        n *= 2
    return n


def _check_axis(freq_axis, fs):
    freq_axis = np.asarray(freq_axis, dtype=float)
    if freq_axis.ndim != 1 or len(freq_axis) < 1:
        raise ConfigError("frequency axis must be a non-empty 1-D vector")
    if freq_axis[0] <= 0:
        raise ConfigError("frequency axis must be strictly positive")
    if freq_axis[-1] > fs / 2 + 1e-9:
        raise ConfigError(f"frequency axis exceeds Nyquist ({fs / 2} Hz)")
    if len(freq_axis) > 1:
        steps = np.diff(freq_axis)
        df = steps[0]
        if np.any(np.abs(steps - df) > 1e-9 * df):
            raise ConfigError("frequency axis must be uniform")
    else:
        df = freq_axis[0]
    n_fft = int(round(fs / df))
    if abs(fs / n_fft - df) > 1e-9 * df:
        raise ConfigError("frequency spacing must divide the sample rate")
    bins = np.round(freq_axis / df).astype(int)
    if np.any(np.abs(freq_axis - bins * df) > 1e-6 * df):
        raise ConfigError("frequency axis must sit on multiples of its spacing")
    return freq_axis, df, n_fft, bins


def _frame_norms(n, taps):
    """Per-frame l2 norm of the window restricted to in-signal samples."""
    power = np.convolve(np.ones(n), taps**2, mode="same")
    return np.sqrt(power)


def _stft_pair(sig: SampledSignal, w: GaussianWindow, freq_axis, with_derivative):
    x = sig.samples
    n = len(x)
    fs = sig.fs
    if abs(fs - w.fs) > 1e-9:
        raise ConfigError("window and signal sample rates differ")
    if n < len(w.taps):
        raise ConfigError(
            f"signal ({n} samples) is shorter than the window span ({len(w.taps)})"
        )
    freq_axis, df, n_fft, bins = _check_axis(freq_axis, fs)
    if n_fft < len(w.taps):
        raise ConfigError("frequency spacing too coarse for this window length")
    half = w.half
    complex_input = np.iscomplexobj(x)
    xp = np.concatenate([np.zeros(half, dtype=x.dtype), x, np.zeros(half, dtype=x.dtype)])

    V = np.empty((len(bins), n), dtype=complex)
    Vd = np.empty_like(V) if with_derivative else None
    fft = sfft.fft if complex_input else sfft.rfft
    dtype = complex if complex_input else float

    chunk = max(1, int(2**22 // max(n_fft, 1)))  # ~64 MB working buffers
    buf = np.zeros((chunk, n_fft), dtype=dtype)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        m = stop - start
        frames = np.lib.stride_tricks.sliding_window_view(xp, 2 * half + 1)[start:stop]
        if m != buf.shape[0]:
            buf = np.zeros((m, n_fft), dtype=dtype)
        # place the frame with its center at index 0 so the DFT phase is
        # referenced to the frame center (u = 0)
        buf[:, : half + 1] = frames[:, half:] * w.taps[half:]
        buf[:, n_fft - half :] = frames[:, :half] * w.taps[:half]
        V[:, start:stop] = fft(buf, n=n_fft, axis=1, workers=_FFT_WORKERS)[:, bins].T
        if with_derivative:
            buf[:, : half + 1] = frames[:, half:] * w.dtaps[half:]
            buf[:, n_fft - half :] = frames[:, :half] * w.dtaps[:half]
            Vd[:, start:stop] = fft(buf, n=n_fft, axis=1, workers=_FFT_WORKERS)[:, bins].T

    norms = _frame_norms(n, w.taps)
    V *= 1.0 / (fs * norms)
    if with_derivative:
        Vd *= 1.0 / (fs * norms)
    return V, Vd, freq_axis, df


def stft(sig: SampledSignal, w: GaussianWindow, freq_axis=None) -> Tfr:
    """Short-time Fourier transform on an explicit positive frequency grid."""
    if freq_axis is None:
        freq_axis = default_freq_axis(w, sig.fs)
    V, _, freq_axis, _ = _stft_pair(sig, w, freq_axis, with_derivative=False)
    return Tfr(V, freq_axis, sig.times, w, "stft")


def sst(sig: SampledSignal, w: GaussianWindow, freq_axis=None, gamma=None) -> Tfr:
    """Synchrosqueezed STFT.

    STFT mass with |V| > gamma moves to the axis bin nearest the reassignment
    frequency (clipped to the axis, so per-frame complex mass is conserved);
    mass at or below gamma is discarded.  ``gamma=None`` uses 1e-4 times the
    median frame maximum of |V|.
    """
    if gamma is not None and gamma < 0:
        raise ConfigError("gamma must be non-negative")
    if freq_axis is None:
        freq_axis = default_freq_axis(w, sig.fs)
    V, Vd, freq_axis, df = _stft_pair(sig, w, freq_axis, with_derivative=True)
    mag = np.abs(V)
    if gamma is None:
        gamma = 1e-4 * float(np.median(mag.max(axis=0))) if mag.size else 0.0

    out = np.zeros_like(V)
    n_bins, n_frames = V.shape
    keep = mag > gamma
    if np.any(keep):
        rows, cols = np.nonzero(keep)
        vals = V[rows, cols]
        omega = freq_axis[rows] - (Vd[rows, cols] / vals).imag / TWO_PI
        k = np.rint((omega - freq_axis[0]) / df).astype(np.int64)
        np.clip(k, 0, n_bins - 1, out=k)
        np.add.at(out, (k, cols), vals)
    return Tfr(out, freq_axis, sig.times, w, "sst")


def extract_ridge(
    values,
    freq_axis,
    band,
    smooth_penalty,
    reference=None,
    ref_weight=0.0,
    ref_halfwidth=None,
) -> Ridge:
    """Maximum-energy curve through a TFR magnitude by exact dynamic programming.

    Maximizes sum_t log(mag[c_t, t] + 1e-12) - smooth_penalty * sum (c_{t+1}-c_t)^2
    - ref_weight * sum (c_t - ref_t)^2 over all in-band bin curves.  ``reference``
    may be a Ridge or a plain frequency vector; ``ref_halfwidth`` additionally
    restricts the search to |c_t - ref_t| <= ref_halfwidth per frame.
    """
    mag = np.abs(np.asarray(values))
    freq_axis = np.asarray(freq_axis, dtype=float)
    lo, hi = band
    sel = (freq_axis >= lo) & (freq_axis <= hi)
    if not np.any(sel):
        raise ConfigError(f"band ({lo}, {hi}) contains no frequency bins")
    f = freq_axis[sel]
    sub = mag[sel]
    n_bins, n_frames = sub.shape

    node = np.log(sub + 1e-12)
    ref = None
    if reference is not None:
        ref = reference.freqs if isinstance(reference, Ridge) else np.asarray(reference, float)
        if len(ref) != n_frames:
            raise ConfigError("reference length does not match frame count")
        dev = f[:, None] - ref[None, :]
        if ref_weight:
            node = node - ref_weight * dev**2
        if ref_halfwidth is not None:
            allowed = np.abs(dev) <= ref_halfwidth
            if not allowed.any(axis=0).all():
                raise ConfigError("reference half-width leaves some frame with no bins")
            node = np.where(allowed, node, _NEG_INF)

    penalty = smooth_penalty * (f[:, None] - f[None, :]) ** 2  # jump cost, Hz^2 scale

    best = node[:, 0].copy()
    back = np.empty((n_bins, n_frames), dtype=np.int32)
    back[:, 0] = 0
    for t in range(1, n_frames):
        # candidate[b, b'] = best[b'] - penalty[b, b']
        cand = best[None, :] - penalty
        arg = np.argmax(cand, axis=1)
        back[:, t] = arg
        best = cand[np.arange(n_bins), arg] + node[:, t]

    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = int(np.argmax(best))
    score = float(best[path[-1]])
    for t in range(n_frames - 1, 0, -1):
        path[t - 1] = back[path[t], t]

    freqs = f[path]
    confidence = sub[path, np.arange(n_frames)]
    return Ridge(freqs=freqs, band=(float(lo), float(hi)), score=score, confidence=confidence)


# cache for the reconstruction normalization, keyed by window/grid geometry
_RECON_CAL = {}


def _reconstruction_constant(w: GaussianWindow, fs, df, nu):
    key = (round(w.span, 9), round(w.sigma, 12), round(fs, 9), round(df, 12), round(nu, 9))
    if key in _RECON_CAL:
        return _RECON_CAL[key]
    # unit tone placed on the grid; its calibrated mode must have amplitude 1
    f0 = df * max(8, int(round(max(1.0, 3 * nu, 2 * w.effective_support()) / df)))
    n = int(round((w.span + 30.0) * fs))
    t = np.arange(n) / fs
    tone = SampledSignal(np.cos(TWO_PI * f0 * t), fs)
    margin = max(2 * nu, 4 * w.effective_support(), 10 * df)
    axis = default_freq_axis(w, fs, max(df, f0 - margin), min(fs / 2, f0 + margin))
    tfr = sst(tone, w, axis)
    sel = np.abs(tfr.freq_axis - f0) <= nu
    interior = slice(int(w.span * fs / 2), n - int(w.span * fs / 2))
    raw = np.abs(tfr.values[sel].sum(axis=0) * df)[interior]
    const = float(np.median(raw))
    _RECON_CAL[key] = const
    return const


def reconstruct_mode(tfr: Tfr, ridge: Ridge, half_bandwidth) -> SampledSignal:
    """Integrate SST mass within ``half_bandwidth`` of the ridge into one mode.

    The normalization constant is calibrated numerically (once per window and
    grid geometry) so a unit-amplitude tone reconstructs with amplitude 1.
    Amplitude is |mode|; phase in cycles is unwrap(angle(mode)) / 2*pi.
    """
    if half_bandwidth <= 0:
        raise ConfigError("half_bandwidth must be positive")
    if len(ridge) != len(tfr.time_axis):
        raise ConfigError("ridge length does not match TFR frames")
    fa = tfr.freq_axis
    if np.any(ridge.freqs - half_bandwidth < fa[0]) or np.any(
        ridge.freqs + half_bandwidth > fa[-1]
    ):
        warnings.warn("reconstruction band clipped at the frequency-axis edge", stacklevel=2)
    fs = 1.0 / float(tfr.time_axis[1] - tfr.time_axis[0])
    df = tfr.df if len(fa) > 1 else float(fa[0])
    const = _reconstruction_constant(tfr.window, fs, df, half_bandwidth)
    mask = np.abs(fa[:, None] - ridge.freqs[None, :]) <= half_bandwidth
    mode = (tfr.values * mask).sum(axis=0) * df / const
    return SampledSignal(mode, fs, float(tfr.time_axis[0]))


def am_phase(mode: SampledSignal, gap_floor=1e-3):
    """Amplitude and unwrapped phase (cycles) of a reconstructed mode.

    Samples where |mode| drops below ``gap_floor`` times its median are
    treated as dropouts: the phase there is bridged by linear interpolation
    (linear extrapolation at the ends).
    """
    am = np.abs(mode.samples)
    phase = np.unwrap(np.angle(mode.samples)) / TWO_PI
    floor = gap_floor * float(np.median(am))
    good = am > floor
    if not good.all() and good.sum() >= 2:
        idx = np.arange(len(phase))
        gi = idx[good]
        phase = np.interp(idx, gi, phase[gi])
        # np.interp holds edges constant; extend the end slopes instead
        if gi[0] > 0:
            slope = (phase[gi[1]] - phase[gi[0]]) / (gi[1] - gi[0])
            phase[: gi[0]] = phase[gi[0]] - slope * (gi[0] - idx[: gi[0]])
        if gi[-1] < len(phase) - 1:
            slope = (phase[gi[-1]] - phase[gi[-2]]) / (gi[-1] - gi[-2])
            phase[gi[-1] + 1 :] = phase[gi[-1]] + slope * (idx[gi[-1] + 1 :] - gi[-1])
    pf = PhaseFunction(phase, np.gradient(phase) * mode.fs, mode.fs, mode.t0)
    return am, pf
