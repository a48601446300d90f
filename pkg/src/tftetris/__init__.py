"""Time-frequency tessellation toolkit.

A numpy/scipy library for signals whose oscillatory components carry
second-order (respiratory-style) amplitude and frequency modulation:
synthesis of such signals, short-time Fourier and synchrosqueezing
transforms, ridge extraction, a shift-down ensembled time-frequency
representation, and the full pulse-wave-to-respiration pipeline.
"""

from .errors import (
    ConfigError,
    IngestionError,
    ModelViolationError,
    RankDeficiencyError,
    RidgeConfidenceError,
    StageError,
    ToolkitError,
    UnsupportedOrderError,
)
from .model import (
    GanhmExpansion,
    GanhmSpec,
    LocalizedNoiseSpec,
    PhaseFunction,
    SampledSignal,
    expand_ganhm,
    gen_localized_noise,
    make_preset,
    preset_names,
    slow_phase,
    synthesize_ganhm,
)
from .tf import (
    GaussianWindow,
    Ridge,
    Tfr,
    am_phase,
    default_freq_axis,
    extract_ridge,
    gaussian_window,
    reconstruct_mode,
    sst,
    stft,
)
from .tetris import (
    NoiseDecorrelationReport,
    Tessellation,
    TetrisConfig,
    TetrisOutput,
    build_tetris,
    power_mean,
    shift_down,
    tessellate,
    tessellate_on,
    verify_noise_decorrelation,
)
from .samd import SamdConfig, SamdFit, samd_fit
from .pipeline import (
    PipelineConfig,
    RespiratoryOutputs,
    detect_cycles,
    extract_respiration,
    ihr_from_cycles,
    preprocess,
    traditional_riav,
    traditional_riiv,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "IngestionError",
    "ModelViolationError",
    "RankDeficiencyError",
    "RidgeConfidenceError",
    "StageError",
    "ToolkitError",
    "UnsupportedOrderError",
    "GanhmExpansion",
    "GanhmSpec",
    "LocalizedNoiseSpec",
    "PhaseFunction",
    "SampledSignal",
    "expand_ganhm",
    "gen_localized_noise",
    "make_preset",
    "preset_names",
    "slow_phase",
    "synthesize_ganhm",
    "GaussianWindow",
    "Ridge",
    "Tfr",
    "am_phase",
    "default_freq_axis",
    "extract_ridge",
    "gaussian_window",
    "reconstruct_mode",
    "sst",
    "stft",
    "NoiseDecorrelationReport",
    "Tessellation",
    "TetrisConfig",
    "TetrisOutput",
    "build_tetris",
    "power_mean",
    "shift_down",
    "tessellate",
    "tessellate_on",
    "verify_noise_decorrelation",
    "SamdConfig",
    "SamdFit",
    "samd_fit",
    "PipelineConfig",
    "RespiratoryOutputs",
    "detect_cycles",
    "extract_respiration",
    "ihr_from_cycles",
    "preprocess",
    "traditional_riav",
    "traditional_riiv",
    "__version__",
]
