"""Eigenfunctions of the hyperbolic Laplacian on the Poincaré ball, their
superposition over fractal boundary sets, and numerical checks."""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = [
    "BallPoint",
    "BoundaryPoint",
    "CantorSpec",
    "GeodesicHyperball",
    "Horoball",
    "HoroballEigenfunction",
    "HyperballEigenfunction",
    "ProductSpec",
    "SuperpositionField",
    "abs_integral",
    "barrier_sum",
    "calibrate_constants",
    "dist_between",
    "dist_to_origin",
    "horoball_signed_distance",
    "hyperball_from_cone",
    "hyperball_signed_distance",
    "lambda1",
    "laplace_beltrami_fd",
    "quadrature",
    "radial_profile",
    "residual_sweep",
    "u_eval",
    "u_z_eval",
    "w_I_eval",
]

from .geometry import (  # noqa: E402
    BallPoint,
    BoundaryPoint,
    GeodesicHyperball,
    Horoball,
    dist_between,
    dist_to_origin,
    horoball_signed_distance,
    hyperball_from_cone,
    hyperball_signed_distance,
)
from .eigenfunctions import (  # noqa: E402
    HoroballEigenfunction,
    HyperballEigenfunction,
    lambda1,
    radial_profile,
    u_z_eval,
    w_I_eval,
)
from .cantor import CantorSpec, ProductSpec, quadrature  # noqa: E402
from .superposition import SuperpositionField, abs_integral, barrier_sum, u_eval  # noqa: E402
from .verify import calibrate_constants, laplace_beltrami_fd, residual_sweep  # noqa: E402
