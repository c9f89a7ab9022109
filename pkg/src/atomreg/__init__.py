"""Translation registration of Gaussian-atom patterns.

Closed-form distance machinery, certified descent-region and error
bounds, coarse-to-fine registration, and seeded experiment sweeps.
"""

from .atoms import (
    Atom,
    Pattern,
    RasterImage,
    atom_inner_product,
    evaluate_pattern,
    pattern_inner_product,
    pattern_norm,
    smooth_pattern,
    translate_pattern,
)
from .bounds import (
    BoundReport,
    gaussian_bound,
    generic_bound,
    second_derivative_constants,
    tbar0,
    uncorrelated_bound,
)
from .distance import pattern_distance
from .errors import ConfigError, NumericalError
from .ingestion import (
    DictionarySpec,
    default_dictionary,
    load_pattern,
    load_raster,
    matching_pursuit,
    save_pattern,
    save_raster,
)
from .noise import NoiseSpec, make_generic_noise, sample_gaussian_field
from .registration import (
    RegistrationResult,
    build_grid,
    descend,
    multiscale_register,
    plan_schedule,
    two_stage_register,
)
from .siden import delta_T, siden_boundary, true_siden_boundary

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Pattern",
    "RasterImage",
    "atom_inner_product",
    "pattern_inner_product",
    "pattern_norm",
    "smooth_pattern",
    "translate_pattern",
    "evaluate_pattern",
    "pattern_distance",
    "BoundReport",
    "gaussian_bound",
    "generic_bound",
    "uncorrelated_bound",
    "second_derivative_constants",
    "tbar0",
    "ConfigError",
    "NumericalError",
    "DictionarySpec",
    "default_dictionary",
    "load_raster",
    "save_raster",
    "load_pattern",
    "save_pattern",
    "matching_pursuit",
    "NoiseSpec",
    "sample_gaussian_field",
    "make_generic_noise",
    "RegistrationResult",
    "descend",
    "build_grid",
    "two_stage_register",
    "plan_schedule",
    "multiscale_register",
    "delta_T",
    "siden_boundary",
    "true_siden_boundary",
    "__version__",
]
