"""Shape-adaptive mode decomposition.

Given an estimated fundamental amplitude a(t) and phase p(t) (cycles), fit

    x(t) ~ sum_{l=1..D} sum_{j=0..P} tau^j * a(t) * [c_{l,j} cos(2*pi*l*p(t))
                                                     + s_{l,j} sin(2*pi*l*p(t))]
           + sum_{j=0..P} d_j * tau^j

by linear least squares, where tau rescales time to [-1, 1] for conditioning.
The returned component is the oscillatory part only (trend columns excluded).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, RankDeficiencyError
from .model import SampledSignal

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SamdConfig:
    harmonic_order: int = 2
    poly_order: int = 2
    ridge_reg: float = 1e-8

    def __post_init__(self):
        if self.harmonic_order < 1:
            raise ConfigError("harmonic_order must be at least 1")
        if self.poly_order < 0:
            raise ConfigError("poly_order must be non-negative")
        if self.ridge_reg < 0:
            raise ConfigError("ridge_reg must be non-negative")

    @property
    def n_columns(self):
        return 2 * self.harmonic_order * (self.poly_order + 1) + (self.poly_order + 1)


@dataclass
class SamdFit:
    """Fit result: oscillatory component plus the coefficient table.

    ``coeffs`` rows are (l, j, cos_coeff, sin_coeff); ``trend_coeffs[j]`` is
    the coefficient of tau^j.
    """

    component: SampledSignal
    coeffs: np.ndarray
    trend_coeffs: np.ndarray
    config: SamdConfig
    _tau: np.ndarray = None
    _am: np.ndarray = None
    _phase: np.ndarray = None

    def harmonic(self, l):
        """Samples of the fitted l-th harmonic alone."""
        D, P = self.config.harmonic_order, self.config.poly_order
        if not 1 <= l <= D:
            raise ConfigError(f"harmonic index must be in 1..{D}")
        out = np.zeros_like(self._tau)
        ang = TWO_PI * l * self._phase
        c, s = np.cos(ang), np.sin(ang)
        for row in self.coeffs:
            if int(row[0]) != l:
                continue
            j = int(row[1])
            out += self._tau**j * self._am * (row[2] * c + row[3] * s)
        return out

    def coeff_rows(self):
        """Rows (l, j, cos, sin) for CSV export."""
        return [tuple(row) for row in self.coeffs]


def _design(am, phase, tau, D, P):
    cols = []
    meta = []
    for l in range(1, D + 1):
        ang = TWO_PI * l * phase
        base_c = am * np.cos(ang)
        base_s = am * np.sin(ang)
        for j in range(P + 1):
            tj = tau**j
            cols.append(tj * base_c)
            cols.append(tj * base_s)
            meta.append((l, j))
    n_osc = len(cols)
    for j in range(P + 1):
        cols.append(tau**j)
    return np.column_stack(cols), meta, n_osc


def samd_fit(x: SampledSignal, am, phase, cfg: SamdConfig = SamdConfig()):
    """Least-squares harmonic fit anchored to an estimated fundamental.

    ``am`` must be positive and ``phase`` strictly increasing (cycles), both
    on the grid of ``x``.  With ``ridge_reg`` zero the solve is a plain
    projection and raises ``RankDeficiencyError`` when the design matrix is
    numerically singular; otherwise the normal equations carry a trace-scaled
    ridge term.
    """
    am = np.asarray(am, dtype=float)
    phase = np.asarray(phase, dtype=float)
    data = np.asarray(x.samples, dtype=float)
    n = len(data)
    if len(am) != n or len(phase) != n:
        raise ConfigError("am/phase length must match the signal")
    if np.any(am <= 0):
        raise ConfigError("amplitude estimate must be strictly positive")
    if np.any(np.diff(phase) <= 0):
        raise ConfigError("phase estimate must be strictly increasing")
    if cfg.n_columns > n / 10:
        raise ConfigError(
            f"{cfg.n_columns} design columns exceed one tenth of {n} samples"
        )

    tau = np.linspace(-1.0, 1.0, n)
    G, meta, n_osc = _design(am, phase, tau, cfg.harmonic_order, cfg.poly_order)

    if cfg.ridge_reg == 0:
        coef, _, rank, sv = scipy.linalg.lstsq(G, data)
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        if rank < G.shape[1] or cond > 1e12:
            raise RankDeficiencyError(cond)
    else:
        gram = G.T @ G
        # scale by the mean per-sample column power so the bias stays
        # proportional to ridge_reg regardless of record length
        lam = cfg.ridge_reg * np.trace(gram) / (G.shape[1] * n)
        coef = scipy.linalg.solve(
            gram + lam * np.eye(G.shape[1]), G.T @ data, assume_a="pos"
        )

    component = G[:, :n_osc] @ coef[:n_osc]
    rows = np.array(
        [(l, j, coef[2 * i], coef[2 * i + 1]) for i, (l, j) in enumerate(meta)]
    )
    return SamdFit(
        component=SampledSignal(component, x.fs, x.t0),
        coeffs=rows,
        trend_coeffs=coef[n_osc:].copy(),
        config=cfg,
        _tau=tau,
        _am=am,
        _phase=phase,
    )
