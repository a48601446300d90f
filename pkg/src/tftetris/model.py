"""Oscillatory signal model: synthesis, harmonic expansion, noise, presets.

The model is a sum of cardiac harmonics whose amplitudes carry a slow
respiratory amplitude modulation (per-harmonic), whose common phase carries a
slow respiratory frequency modulation, and an additive low-frequency
respiratory component riding on a trend:

    y(t) = R0(t) + sum_l A_l(t) * cos(2*pi*l*phi1(t) + beta_l) + T0(t)

with A_l(t) = T_l(t) + sum_k a_{l,k}(t) * cos(2*pi*k*phi0(t) + beta_a_k) and
phi1(t) = phi(t) + b(t)/(2*pi*phi0'(t)) * sin(2*pi*phi0(t)).

``expand_ganhm`` re-expresses the same signal as a grid of nearly sinusoidal
components at frequencies l*phi' + k*phi0', accurate to third order in the
frequency-modulation depth; it is the independent oracle used throughout the
test suite.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import ConfigError, ModelViolationError, UnsupportedOrderError

TWO_PI = 2.0 * np.pi


@dataclass
class SampledSignal:
    """Uniformly sampled series (real or complex)."""

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.fs <= 0:
            raise ConfigError(f"sample rate must be positive, got {self.fs}")
        if self.samples.size == 0:
            raise ConfigError("signal must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigError("signal contains non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.fs

    @property
    def times(self):
        return self.t0 + np.arange(len(self.samples)) / self.fs

    def is_complex(self):
        return np.iscomplexobj(self.samples)


@dataclass
class PhaseFunction:
    """Phase (cycles) and its derivative (Hz) on a uniform grid.

    ``phase`` must be strictly increasing with positive ``derivative`` for
    model inputs; estimated phases coming out of reconstruction skip
    validation (``validate()`` is explicit).
    """

    phase: np.ndarray
    derivative: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=float)
        self.derivative = np.asarray(self.derivative, dtype=float)
        if self.phase.shape != self.derivative.shape:
            raise ConfigError("phase and derivative must have the same length")

    def __len__(self):
        return len(self.phase)

    @property
    def times(self):
        return self.t0 + np.arange(len(self.phase)) / self.fs

    def validate(self, tol=None):
        """Check monotonicity, positivity, and phase/derivative consistency."""
        if np.any(np.diff(self.phase) <= 0):
            raise ModelViolationError("phase is not strictly increasing")
        if np.any(self.derivative <= 0):
            raise ModelViolationError("phase derivative is not strictly positive")
        if tol is None:
            tol = 1e-3 * float(np.max(self.derivative))
        numeric = np.gradient(self.phase) * self.fs
        err = np.max(np.abs(numeric - self.derivative))
        if err > tol:
            raise ModelViolationError(
                f"phase/derivative mismatch {err:.3e} exceeds tolerance {tol:.3e}"
            )
        return self

    @classmethod
    def from_derivative(cls, derivative, fs, t0=0.0, phase0=0.0):
        """Integrate a rate (Hz) into phase (cycles) with the trapezoid rule."""
        d = np.asarray(derivative, dtype=float)
        phase = np.empty_like(d)
        phase[0] = phase0
        np.cumsum((d[1:] + d[:-1]) * (0.5 / fs), out=phase[1:])
        phase[1:] += phase0
        return cls(phase, d, fs, t0)

    @classmethod
    def from_phase(cls, phase, fs, t0=0.0):
        phase = np.asarray(phase, dtype=float)
        return cls(phase, np.gradient(phase) * fs, fs, t0)

    @classmethod
    def linear(cls, freq, n, fs, t0=0.0):
        t = np.arange(n) / fs
        return cls(freq * t, np.full(n, float(freq)), fs, t0)


@dataclass(frozen=True)
class LocalizedNoiseSpec:
    """Band-limited noise burst under a Gaussian time envelope."""

    center_time: float
    time_spread: float
    center_freq: float
    bandwidth: float
    amplitude: float
    seed: int = 0

    def __post_init__(self):
        if self.time_spread <= 0:
            raise ConfigError("time_spread must be positive")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be non-negative")
        if self.center_freq - self.bandwidth / 2 <= 0:
            raise ConfigError("noise band must stay above 0 Hz")


@dataclass
class GanhmSpec:
    """Full parameterization of the generalized oscillatory model.

    Time-varying quantities (trends, per-harmonic modulation depths, the
    additive low-frequency amplitude, the FM depth) are stored pre-sampled on
    the signal grid; scalars broadcast at construction time.

    Shapes, with ``n`` samples:
      trend            (d1+1, n)   rows T_0 .. T_{d1}
      riiv_alpha/beta  (d0,)       Fourier coefficients / phases of the
                                   additive low-frequency component
      riiv_am          (n,)        its slow amplitude A_0(t)
      riav             (d1, d0, n) a_{l,k}(t) for cardiac harmonics l=1..d1
      riav_beta        (d0,)       global phases of the amplitude modulation
      cardiac_beta     (d1+1,)     beta_l for l=0..d1 (index 0 conventionally 0)
      fm_depth         (n,)        b(t), 0 <= b < 1
    """

    d0: int
    d1: int
    phi: PhaseFunction
    phi0: PhaseFunction
    trend: np.ndarray
    riiv_alpha: np.ndarray
    riiv_beta: np.ndarray
    riiv_am: np.ndarray
    riav: np.ndarray
    riav_beta: np.ndarray
    cardiac_beta: np.ndarray
    fm_depth: np.ndarray
    min_separation: float = 0.05

    def __post_init__(self):
        n = len(self.phi)
        self.trend = _as_rows(self.trend, self.d1 + 1, n, "trend")
        self.riiv_alpha = np.atleast_1d(np.asarray(self.riiv_alpha, dtype=float))
        self.riiv_beta = np.atleast_1d(np.asarray(self.riiv_beta, dtype=float))
        self.riiv_am = _as_series(self.riiv_am, n)
        self.riav = _as_riav(self.riav, self.d1, self.d0, n)
        self.riav_beta = np.atleast_1d(np.asarray(self.riav_beta, dtype=float))
        self.cardiac_beta = np.atleast_1d(np.asarray(self.cardiac_beta, dtype=float))
        self.fm_depth = _as_series(self.fm_depth, n)

    @property
    def n(self):
        return len(self.phi)

    @property
    def fs(self):
        return self.phi.fs

    def phi1(self):
        """Cardiac phase including the respiratory frequency modulation."""
        p0 = self.phi0
        shift = self.fm_depth / (TWO_PI * p0.derivative) * np.sin(TWO_PI * p0.phase)
        phase = self.phi.phase + shift
        deriv = self.phi.derivative + self.fm_depth * np.cos(TWO_PI * p0.phase)
        return PhaseFunction(phase, deriv, self.fs, self.phi.t0)

    def cardiac_am(self):
        """A_l(t) for l=1..d1, shape (d1, n)."""
        mod = _cos_bank(self.phi0.phase, self.riav_beta, self.d0)  # (d0, n)
        return self.trend[1:] + np.einsum("lkn,kn->ln", self.riav, mod)

    def riiv_component(self):
        mod = _cos_bank(self.phi0.phase, self.riiv_beta, self.d0)
        return self.riiv_am * (self.riiv_alpha @ mod)

    def validate(self):
        if self.d0 < 1 or self.d1 < 1:
            raise ConfigError("harmonic orders must be at least 1")
        for name in ("riiv_alpha", "riiv_beta", "riav_beta"):
            if len(getattr(self, name)) != self.d0:
                raise ConfigError(f"{name} must have length d0={self.d0}")
        if len(self.cardiac_beta) != self.d1 + 1:
            raise ConfigError(f"cardiac_beta must have length d1+1={self.d1 + 1}")
        if np.any(self.fm_depth < 0) or np.any(self.fm_depth >= 1):
            raise ModelViolationError("fm_depth must satisfy 0 <= b(t) < 1")
        self.phi.validate()
        self.phi0.validate()
        phi1 = self.phi1()
        if np.any(phi1.derivative <= 0):
            t = float(self.phi.times[int(np.argmax(phi1.derivative <= 0))])
            raise ModelViolationError(f"modulated cardiac rate dips below zero at t={t:.3f}s", t=t)
        gap = phi1.derivative - self.d0 * self.phi0.derivative
        if np.any(gap <= self.min_separation):
            t = float(self.phi.times[int(np.argmax(gap <= self.min_separation))])
            raise ModelViolationError(
                f"cardiac/respiratory rate separation below {self.min_separation} Hz at t={t:.3f}s",
                t=t,
            )
        am = self.cardiac_am()
        bad = am <= 0
        if np.any(bad):
            l_idx, t_idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
            t = float(self.phi.times[t_idx])
            raise ModelViolationError(
                f"cardiac harmonic amplitude A_{l_idx + 1} is non-positive at t={t:.3f}s",
                t=t,
                harmonic=int(l_idx) + 1,
            )
        return self


def _as_series(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.full(n, float(x))
    if x.shape != (n,):
        raise ConfigError(f"expected a scalar or length-{n} series, got shape {x.shape}")
    return x


def _as_rows(x, rows, n, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and x.shape == (rows,):
        return np.repeat(x[:, None], n, axis=1)
    if x.ndim == 2 and x.shape == (rows, n):
        return x
    raise ConfigError(f"{name} must have shape ({rows},) or ({rows}, {n}), got {x.shape}")


def _as_riav(x, d1, d0, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2 and x.shape == (d1, d0):
        return np.repeat(x[:, :, None], n, axis=2)
    if x.ndim == 3 and x.shape == (d1, d0, n):
        return x
    raise ConfigError(f"riav must have shape ({d1}, {d0}) or ({d1}, {d0}, {n}), got {x.shape}")


def _cos_bank(phase, betas, d0):
    """cos(2*pi*k*phase + beta_k) stacked over k=1..d0, shape (d0, n)."""
    k = np.arange(1, d0 + 1)
    return np.cos(TWO_PI * k[:, None] * phase[None, :] + np.asarray(betas)[:, None])


def synthesize_ganhm(spec: GanhmSpec, n: int) -> SampledSignal:
    """Evaluate the model pointwise on its grid. Deterministic; noise is separate."""
    spec.validate()
    if n != spec.n:
        raise ConfigError(f"requested {n} samples but spec holds {spec.n}")
    phi1 = spec.phi1()
    out = spec.trend[0] + spec.riiv_component()
    am = spec.cardiac_am()
    for l in range(1, spec.d1 + 1):
        out = out + am[l - 1] * np.cos(TWO_PI * l * phi1.phase + spec.cardiac_beta[l])
    return SampledSignal(out, spec.fs, spec.phi.t0)


@dataclass
class GanhmExpansion:
    """Result of ``expand_ganhm``: one near-sinusoidal component per (l, k).

    Each component is |z_{l,k}(t)| * cos(2*pi*(l*phi + k*phi0) + arg z_{l,k}(t))
    where ``z`` is the complex envelope produced by aggregating the amplitude
    modulation sidebands with the second-order frequency-modulation kernel.
    """

    envelopes: dict  # (l, k) -> complex ndarray (n,)
    phi: PhaseFunction
    phi0: PhaseFunction
    fs: float
    t0: float

    def component(self, l, k) -> SampledSignal:
        z = self.envelopes[(l, k)]
        carrier = TWO_PI * (l * self.phi.phase + k * self.phi0.phase)
        return SampledSignal(np.abs(z) * np.cos(carrier + np.angle(z)), self.fs, self.t0)

    def amplitude(self, l, k):
        return np.abs(self.envelopes[(l, k)])

    def keys(self):
        return self.envelopes.keys()

    def total(self) -> SampledSignal:
        acc = np.zeros(len(self.phi))
        for (l, k) in self.envelopes:
            acc += self.component(l, k).samples
        return SampledSignal(acc, self.fs, self.t0)


def expand_ganhm(spec: GanhmSpec, n: int) -> GanhmExpansion:
    """Expand the model into components indexed by (l, k), l=0..d1, k=-d0-2..d0+2.

    The amplitude modulation of harmonic l splits it into sidebands at
    l*phi' + k*phi0' (exact product-to-sum step); the frequency modulation then
    leaks each sideband into its neighbours k-2..k+2 with weights
    (theta_l^2/2, -theta_l, 1-theta_l^2, +theta_l, theta_l^2/2), where
    theta_l = l*b / (2*phi0').  Terms landing on the same (l, k) are summed as
    complex envelopes, so amplitude and phase of every component come out of
    one aggregation.  The dropped remainder is O(b^3).
    """
    spec.validate()
    if n != spec.n:
        raise ConfigError(f"requested {n} samples but spec holds {spec.n}")
    if spec.d0 > 2:
        raise UnsupportedOrderError(
            f"expansion supports d0 <= 2 sideband orders, got d0={spec.d0}"
        )

    d0, d1 = spec.d0, spec.d1
    theta_base = spec.fm_depth / (2.0 * spec.phi0.derivative)  # theta_l / l
    am = spec.riav  # (d1, d0, n)

    envelopes = {}
    for l in range(d1 + 1):
        # sideband envelopes before FM leakage: w[k], k=-d0..d0
        w = {0: spec.trend[l].astype(complex)}
        for k in range(1, d0 + 1):
            if l == 0:
                base = 0.5 * spec.riiv_am * spec.riiv_alpha[k - 1]
                beta = spec.riiv_beta[k - 1]
            else:
                base = 0.5 * am[l - 1, k - 1]
                beta = spec.riav_beta[k - 1]
            w[k] = base * np.exp(1j * beta)
            w[-k] = base * np.exp(-1j * beta)

        theta = l * theta_base
        kernel = {
            -2: 0.5 * theta**2,
            -1: -theta,
            0: 1.0 - theta**2,
            1: theta,
            2: 0.5 * theta**2,
        }
        phase_rot = np.exp(1j * spec.cardiac_beta[l])
        for k_out in range(-(d0 + 2), d0 + 3):
            z = np.zeros(n, dtype=complex)
            for shift, coef in kernel.items():
                k_src = k_out - shift
                if -d0 <= k_src <= d0:
                    z += coef * w[k_src]
            envelopes[(l, k_out)] = z * phase_rot

    return GanhmExpansion(envelopes, spec.phi, spec.phi0, spec.fs, spec.phi.t0)


def gen_localized_noise(spec: LocalizedNoiseSpec, n: int, fs: float) -> SampledSignal:
    """Band-passed white noise under a Gaussian time envelope.

    Zero-phase 4th-order Butterworth confines the spectrum to
    center_freq +- bandwidth/2; the envelope concentrates the energy around
    center_time.  The output is scaled so the RMS over |t - center| <=
    time_spread equals ``amplitude``.  Reproducible from ``seed``.
    """
    hi = spec.center_freq + spec.bandwidth / 2
    if fs <= 2 * hi:
        raise ConfigError(f"sample rate {fs} violates Nyquist for band edge {hi} Hz")
    if spec.amplitude == 0:
        return SampledSignal(np.zeros(n), fs)
    rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal(n)
    lo = spec.center_freq - spec.bandwidth / 2
    sos = butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
    x = sosfiltfilt(sos, x)
    t = np.arange(n) / fs
    x = x * np.exp(-((t - spec.center_time) ** 2) / (2 * spec.time_spread**2))
    core = x[np.abs(t - spec.center_time) <= spec.time_spread]
    rms = np.sqrt(np.mean(core**2)) if core.size else 0.0
    if rms > 0:
        x = x * (spec.amplitude / rms)
    return SampledSignal(x, fs)


def slow_phase(mean_freq, wander_depth, smooth_span, n, fs, seed=0) -> PhaseFunction:
    """Slowly wandering rate around ``mean_freq``, integrated into a phase.

    The perturbation is a uniform random walk smoothed by a moving average
    over ``smooth_span`` seconds, centered, and rescaled so its peak magnitude
    equals ``wander_depth``.
    """
    if wander_depth >= mean_freq:
        raise ConfigError("wander_depth must be smaller than mean_freq")
    if wander_depth == 0:
        deriv = np.full(n, float(mean_freq))
    else:
        rng = np.random.default_rng(seed)
        walk = np.cumsum(rng.uniform(-1.0, 1.0, n))
        win = max(1, int(round(smooth_span * fs)))
        # reflect-pad so the moving average has no edge bias
        padded = np.concatenate([walk[win - 1 :: -1], walk, walk[: -win - 1 : -1]])
        sm = np.convolve(padded, np.ones(win) / win, mode="same")[win : win + n]
        sm = sm - sm.mean()
        peak = np.max(np.abs(sm))
        deriv = mean_freq + (wander_depth / peak) * sm if peak > 0 else np.full(n, mean_freq)
    return PhaseFunction.from_derivative(deriv, fs)


# ---------------------------------------------------------------------------
# Presets: two semi-real pulse-wave configurations used across the test suite.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PresetSpec:
    name: str
    harmonic_amps: tuple
    harmonic_phases: tuple
    cardiac_rate: float
    resp_rate: float
    riav_depth: float
    riav_phase: float
    fm_depth: float


_PRESETS = {
    # amplitude-modulated pulse: four harmonics, 20% respiratory AM, no FM
    "semireal-a": PresetSpec(
        name="semireal-a",
        harmonic_amps=(1.0, 0.5, 0.3, 0.1),
        harmonic_phases=(0.0, 1.0, 1.3, 0.3),
        cardiac_rate=1.3,
        resp_rate=0.3,
        riav_depth=0.2,
        riav_phase=0.0,
        fm_depth=0.0,
    ),
    # adds respiratory FM (depth 0.1) and a phase-offset AM
    "semireal-b": PresetSpec(
        name="semireal-b",
        harmonic_amps=(1.0, 0.5, 0.2, 0.05),
        harmonic_phases=(0.0, 1.0, 1.3, 0.3),
        cardiac_rate=1.2,
        resp_rate=0.4,
        riav_depth=0.2,
        riav_phase=0.5,
        fm_depth=0.1,
    ),
}


def preset_names():
    return sorted(_PRESETS)


def make_preset(name, duration, fs=50.0, seed=0, cardiac_wander=0.1, resp_wander=None) -> GanhmSpec:
    """Build a preset model spec by name ("semireal-a" or "semireal-b")."""
    try:
        p = _PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {preset_names()}") from None
    return build_spec(p, duration, fs, seed, cardiac_wander, resp_wander)


def build_spec(p: PresetSpec, duration, fs=50.0, seed=0, cardiac_wander=0.1,
               resp_wander=None, riiv_depth=0.0) -> GanhmSpec:
    """Realize a preset-style parameterization as a full model spec.

    ``riiv_depth`` adds an additive low-frequency component of the given
    amplitude (the presets themselves carry none).
    """
    n = int(round(duration * fs))
    if resp_wander is None:
        resp_wander = 0.1 * p.resp_rate
    phi = slow_phase(p.cardiac_rate, cardiac_wander, 10.0, n, fs, seed=seed)
    phi0 = slow_phase(p.resp_rate, resp_wander, 12.0, n, fs, seed=seed + 1)
    d1 = len(p.harmonic_amps)
    amps = np.asarray(p.harmonic_amps, dtype=float)
    spec = GanhmSpec(
        d0=1,
        d1=d1,
        phi=phi,
        phi0=phi0,
        trend=np.concatenate([[0.0], amps]),
        riiv_alpha=np.array([1.0]) if riiv_depth else np.zeros(1),
        riiv_beta=np.zeros(1),
        riiv_am=float(riiv_depth),
        riav=(p.riav_depth * amps)[:, None],
        riav_beta=np.array([p.riav_phase]),
        cardiac_beta=np.concatenate([[0.0], np.asarray(p.harmonic_phases, dtype=float)]),
        fm_depth=p.fm_depth,
    )
    return spec.validate()
