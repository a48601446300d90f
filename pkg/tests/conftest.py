"""Shared fixtures.

The full-scale pipeline runs are expensive (tens of seconds), so they are
built once per session and shared between the pipeline tests and the
acceptance suite.  Each fixture records its wall-clock build time so the
acceptance tests can check runtime budgets.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np
import pytest

import tftetris as tk

FS = 50.0


@dataclass
class PresetRun:
    spec: object
    signal: object
    result: object
    elapsed: float
    duration: float


def _run_preset(name, seed, duration=110.0):
    n = int(duration * FS)
    spec = tk.make_preset(name, duration, FS, seed=seed)
    sig = tk.synthesize_ganhm(spec, n)
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = tk.extract_respiration(sig, tk.PipelineConfig())
    return PresetRun(spec, sig, result, time.perf_counter() - start, duration)


@pytest.fixture(scope="session")
def preset_b_run():
    return _run_preset("semireal-b", seed=21)


@pytest.fixture(scope="session")
def preset_a_run():
    return _run_preset("semireal-a", seed=33)


@dataclass
class DenoiseRun:
    spec: object
    clean: object
    noisy: object
    tetris: object
    elapsed: float
    duration: float
    noise_centers: tuple
    noise_freqs: tuple


@pytest.fixture(scope="session")
def denoise_run():
    """Amplitude-modulated preset plus two localized bursts, minute-long signal."""
    duration = 64.0
    n = int(duration * FS)
    spec = tk.make_preset("semireal-a", duration, FS, seed=11)
    clean = tk.synthesize_ganhm(spec, n)
    bursts = [
        tk.LocalizedNoiseSpec(25.0, 2.0, 2.0, 0.6, 0.5, seed=7),
        tk.LocalizedNoiseSpec(40.0, 2.0, 3.0, 0.6, 0.5, seed=8),
    ]
    samples = clean.samples.copy()
    for b in bursts:
        samples = samples + tk.gen_localized_noise(b, n, FS).samples
    noisy = tk.SampledSignal(samples, FS)
    cfg = tk.TetrisConfig(Q=5, window_long_L=30.0)
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pre = tk.preprocess(noisy, tk.PipelineConfig(tetris=cfg))
        seed_ridge = tk.ihr_from_cycles(tk.detect_cycles(pre), pre.times)
        tet = tk.build_tetris(pre, seed_ridge, cfg)
    elapsed = time.perf_counter() - start
    return DenoiseRun(spec, clean, noisy, tet, elapsed, duration, (25.0, 40.0), (2.0, 3.0))


def interior_mask(times, duration, frac=0.8):
    lo = (1 - frac) / 2 * duration
    return (times >= lo) & (times <= duration - lo)


def circular_corr(a, b):
    """Peak normalized circular cross-correlation (alignment-free)."""
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    cc = np.fft.irfft(np.fft.rfft(a) * np.conj(np.fft.rfft(b)), len(a))
    return float(np.max(cc) / (na * nb))
