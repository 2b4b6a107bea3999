"""Current-vortex sheets in ideal incompressible MHD on a flattened two-slab domain.

Pseudo-spectral (Fourier x Chebyshev) discretisation of the fixed-domain
system with the moving interface lifted into both half-slabs, the
total-pressure transmission problem, stability predicates and planar normal
modes, energy diagnostics and a command line driver.

Set ``CVSHEET_THREADS`` before the first import to fix the number of BLAS
and OpenMP threads.
"""
import os as _os

_threads = _os.environ.get("CVSHEET_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .diagnostics import EnergyReport, functional_E, functional_H, functional_K, report  # noqa: E402
from .evolution import (  # noqa: E402
    CurlState,
    PlasmaState,
    curl_fields,
    curl_transport_residual,
    divergence_residuals,
    project_divergence,
    rhs,
    step,
)
from .geometry import GeometryBundle, build_geometry, transformed_divergence  # noqa: E402
from .lifting import CutoffProfile, lift  # noqa: E402
from .pressure import PressureProblem, assemble_F, assemble_G, solve_pressure  # noqa: E402
from .scenarios import SCENARIOS, scenario  # noqa: E402
from .spectral import FieldPair, FrontField, SlabGrid, TorusGrid, VolumeField, half_grids  # noqa: E402
from .stability import (  # noqa: E402
    StabilityConfig,
    planar_normal_modes,
    solve_lambda,
    syrovatskii_predicates,
    theorem_hypotheses,
)

__version__ = "0.1.0"

__all__ = [
    "CurlState", "CutoffProfile", "EnergyReport", "FieldPair", "FrontField", "GeometryBundle",
    "PlasmaState", "PressureProblem", "SCENARIOS", "SlabGrid", "StabilityConfig", "TorusGrid",
    "VolumeField", "assemble_F", "assemble_G", "build_geometry", "curl_fields",
    "curl_transport_residual", "divergence_residuals", "functional_E", "functional_H",
    "functional_K", "half_grids", "lift", "planar_normal_modes", "project_divergence", "report",
    "rhs", "scenario", "solve_lambda", "solve_pressure", "step", "syrovatskii_predicates",
    "theorem_hypotheses", "transformed_divergence",
]
