"""Numerical laboratory for the exponential growth equation h_t = Lap exp(-Lap h)."""

__version__ = "0.1.0"

from .analysis import TimeSeriesLog, estimate_radius, fit_decay, fsp_decrease_monitor, lyapunov_monitor
from .config import InitialData, RunConfig, load_config, parse_config, preset_config, serialize_config
from .field import Grid, NormReport, SpectralField, besov_norm, fsp_norm, norm_report, s_norm
from .nonlinearity import rhs_direct, rhs_taylor
from .series import DissipationConstants, SeriesFunction, eval_f_s, solve_y_star
from .stepping import NormRequest, SchemeConfig, detect_blowup, integrate

__all__ = [
    "__version__",
    "Grid",
    "SpectralField",
    "NormReport",
    "s_norm",
    "besov_norm",
    "fsp_norm",
    "norm_report",
    "SeriesFunction",
    "DissipationConstants",
    "eval_f_s",
    "solve_y_star",
    "rhs_direct",
    "rhs_taylor",
    "SchemeConfig",
    "NormRequest",
    "integrate",
    "detect_blowup",
    "TimeSeriesLog",
    "lyapunov_monitor",
    "fsp_decrease_monitor",
    "fit_decay",
    "estimate_radius",
    "RunConfig",
    "InitialData",
    "load_config",
    "parse_config",
    "serialize_config",
    "preset_config",
]
