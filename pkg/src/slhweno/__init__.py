"""Conservative non-splitting semi-Lagrangian Hermite-WENO transport on 2-D Cartesian grids."""

from .errors import (ChargeNeutralityError, ConfigError, GeometryError, InitializationError,
                     NumericalFailure, PositivityError, SLHwenoError, TracingError)
from .integrator import StepConfig, pp_limit, sl_step
from .mesh import Grid, MomentField, project_initial
from .presets import PRESETS, get_preset
from .reconstruction import ReconConfig, recon_field
from .rkei import (EulerModel, GuidingCenterModel, LinearModel, UniformModel, VlasovPoissonModel,
                   diagnostics, rkei_step, run)
from .tracing import VelocityField

__version__ = "0.1.0"

__all__ = [
    "ChargeNeutralityError", "ConfigError", "EulerModel", "GeometryError", "Grid", "GuidingCenterModel",
    "InitializationError", "LinearModel", "MomentField", "NumericalFailure", "PRESETS", "PositivityError",
    "ReconConfig", "SLHwenoError", "StepConfig", "TracingError", "UniformModel", "VelocityField",
    "VlasovPoissonModel", "diagnostics", "get_preset", "pp_limit", "project_initial", "recon_field",
    "rkei_step", "run", "sl_step",
]
