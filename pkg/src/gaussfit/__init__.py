"""Gaussian fits to uniform measures on convex bodies.

Samplers, free-energy estimators, overlap measures and Cheeger/spectral-gap
bounds for the Gaussian ``exp(-w |x - x0|^2 / 2)`` conditioned on a convex
body, with a verification pipeline that checks the associated inequalities
numerically.
"""
__version__ = "0.1.0"

from .geometry import (Ball, Box, ConvexBody, DegenerateBody, Ellipsoid, GeometryError,
                       HPolytope, MembershipBody, NotInterior, Simplex, Translated,
                       UnboundedBody, body_from_dict, body_to_dict, load_body, triangle)
from .sampler import SampleBatch, SamplerConfig, sample_gibbs, sample_uniform
from .radial import RadialCdf, RadialStats, radial_cdf, radial_stats
from .free_energy import (FreeEnergyCurve, FreeEnergyPoint, build_curve, free_energy_mc,
                          free_energy_oracle, free_energy_thermo)
from .overlap import OverlapReport, choose_w0, corollary_check, relative_entropy, tv_direct, tv_pinsker
from .bounds import (BoundReport, GaussianReference, bobkov_bound, cheeger_1d_exact,
                     halfspace_cheeger_upper, kls_bound, lambda1_1d_solver,
                     payne_weinberger_bound, transfer_cheeger)
from .reports import CheckReport

__all__ = [
    "__version__",
    "Ball", "Box", "ConvexBody", "DegenerateBody", "Ellipsoid", "GeometryError", "HPolytope",
    "MembershipBody", "NotInterior", "Simplex", "Translated", "UnboundedBody",
    "body_from_dict", "body_to_dict", "load_body", "triangle",
    "SampleBatch", "SamplerConfig", "sample_gibbs", "sample_uniform",
    "RadialCdf", "RadialStats", "radial_cdf", "radial_stats",
    "FreeEnergyCurve", "FreeEnergyPoint", "build_curve", "free_energy_mc",
    "free_energy_oracle", "free_energy_thermo",
    "OverlapReport", "choose_w0", "corollary_check", "relative_entropy", "tv_direct", "tv_pinsker",
    "BoundReport", "GaussianReference", "bobkov_bound", "cheeger_1d_exact",
    "halfspace_cheeger_upper", "kls_bound", "lambda1_1d_solver", "payne_weinberger_bound",
    "transfer_cheeger",
    "CheckReport",
]
