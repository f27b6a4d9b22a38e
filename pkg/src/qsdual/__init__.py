"""qsdual: normalized sign-changing solutions of a quasilinear Schrodinger
equation, computed through the dual change of variables.

The quasilinear constrained problem (a semilinear equation after the dual
transform) is minimized on the nonlinear mass constraint by projected
gradient descent within a block-symmetric, swap-antisymmetric function class,
and the quantitative estimates the method relies on are certified numerically.
"""

from .certify import (
    CertReport,
    CheckResult,
    ScanResult,
    certify_dual,
    check_equivalence,
    coercivity_report,
    lambda_threshold_scan,
    negativity_probe,
)
from .dualmap import DualMap
from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    NumericError,
    ParameterError,
    ShapeError,
    StagnationError,
)
from .flow import (
    FlowConfig,
    MultisolveResult,
    SolveReport,
    antisymmetric_start,
    multisolve,
    project_mass,
    separated_pair_start,
    solve,
)
from .functionals import (
    Diagnostics,
    compute_diagnostics,
    dual_energy,
    dual_energy_grad,
    lagrange_multiplier,
    mass,
    quasilinear_energy,
    residual,
)
from .grid import (
    Field,
    ModelParams,
    ReducedGrid,
    antisymmetrize,
    build_grid,
    dump_field,
    integrate,
    inner,
    laplacian,
    load_field,
    wnorm,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CertReport",
    "CheckResult",
    "ConfigError",
    "DegenerateInputError",
    "Diagnostics",
    "DomainError",
    "DualMap",
    "Field",
    "FlowConfig",
    "ModelParams",
    "MultisolveResult",
    "NumericError",
    "ParameterError",
    "ReducedGrid",
    "ScanResult",
    "ShapeError",
    "SolveReport",
    "StagnationError",
    "antisymmetric_start",
    "antisymmetrize",
    "build_grid",
    "certify_dual",
    "check_equivalence",
    "coercivity_report",
    "compute_diagnostics",
    "dual_energy",
    "dual_energy_grad",
    "dump_field",
    "inner",
    "integrate",
    "lagrange_multiplier",
    "lambda_threshold_scan",
    "laplacian",
    "load_field",
    "mass",
    "multisolve",
    "negativity_probe",
    "project_mass",
    "quasilinear_energy",
    "residual",
    "separated_pair_start",
    "solve",
    "wnorm",
]
