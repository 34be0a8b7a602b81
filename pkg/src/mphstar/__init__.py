"""Kulkarni's bivariate phase-type (MPH*) distribution.

Transform density ``E[exp(-s Z_2); Z_1 in dy]``, its numerical inversion to
``f(y, x)``, marginal phase-type laws, the cross moment and a Monte Carlo
reward-process simulator used as an independent check.
"""

from .analytics import (
    PhDistribution,
    covariance,
    joint_moment,
    joint_moment_oracle,
    marginal_Z1,
    marginal_Z2,
    ph_cdf,
)
from .inversion import (
    DensityGrid,
    InversionParams,
    density_grid,
    invert_atom_density,
    invert_density,
)
from .model import (
    BlockDecomposition,
    InvalidModelError,
    ModelStructureError,
    MphStarModel,
    ValidationReport,
    block_decompose,
    build_from_mph,
    load_model,
    pair_projection,
    validate,
)
from .simulate import EstimateReport, estimate, simulate_one
from .transform import (
    TransformTriple,
    atom_transform,
    density_transform,
    density_transform_grid,
    joint_lt_kulkarni,
    joint_lt_theorem,
    triple_at,
)

__version__ = "0.1.0"
