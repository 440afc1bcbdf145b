"""Sharp convex sub-level sets for weighted sums of Gaussian order statistics.

For X standard Gaussian in R^n the package builds, per parameter point
(n, r, p, t), a norm |.|_sharp and numbers S, R such that |X|_sharp <= S with
probability at least 1 - 2 exp(-t^2/2) and |x|_sharp <= S forces
sum_i i^(-2r) x_[i]^(2(p-1)) <= R.
"""

from .constants import ConstantsTable, FittedConstants, get_constants
from .core import CaseTag, Params, dispatch_case, rearrange
from .lorentz import lorentz_norm, psi, sphere_maximizer, sphere_search, sphere_sup
from .montecarlo import DEFAULT_SEED, coverage_check, sharpness_profile
from .sharp import (
    BoundCertificate,
    SharpNorm,
    build_sharp_norm,
    certificate,
    compute_case_iv_internals,
    holder_factor,
    implication_check,
)

__all__ = [
    "BoundCertificate",
    "CaseTag",
    "ConstantsTable",
    "DEFAULT_SEED",
    "FittedConstants",
    "Params",
    "SharpNorm",
    "build_sharp_norm",
    "certificate",
    "compute_case_iv_internals",
    "coverage_check",
    "dispatch_case",
    "get_constants",
    "holder_factor",
    "implication_check",
    "lorentz_norm",
    "psi",
    "rearrange",
    "sharpness_profile",
    "sphere_maximizer",
    "sphere_search",
    "sphere_sup",
]
__version__ = "0.1.0"
