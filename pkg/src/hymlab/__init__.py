"""Numerical laboratory for Hermitian-Yang-Mills connections on collapsing
elliptic fibrations.

Submodules follow the pipeline: ``base`` and ``semiflat`` (geometry),
``fiber`` (spectral discretization of a fiber torus), ``spectral`` (flat
reference connections from spectral data), ``gauge`` (gauge action and
curvature), ``poincare`` and ``flows``/``gaugefix`` (analysis on one fiber),
``testbed`` (four-dimensional periodic model) and ``lab`` (collapse sweeps).
The command-line entry point is :func:`hymlab.cli.main`.
"""

from .base import make_potential, tau_at
from .errors import HymLabError
from .fiber import FiberGrid, random_hermitian
from .flows import FlowOptions, kempf_ness_flow, ym_heat_flow
from .gauge import apply_complex_gauge, apply_hermitian_gauge, curvature, ym_energy
from .gaugefix import normalize_gauge
from .lab import Scenario, run_collapse_experiment
from .poincare import poincare_constant
from .spectral import FiberConnection, SpectralData, reference_connection

__version__ = "0.1.0"

__all__ = ["make_potential", "tau_at", "HymLabError", "FiberGrid", "random_hermitian", "FlowOptions",
           "kempf_ness_flow", "ym_heat_flow", "apply_complex_gauge", "apply_hermitian_gauge", "curvature",
           "ym_energy", "normalize_gauge", "Scenario", "run_collapse_experiment", "poincare_constant",
           "FiberConnection", "SpectralData", "reference_connection", "__version__"]
