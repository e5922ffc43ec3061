"""Spectral simulations of a rotating capillary fluid and its
quasi-geostrophic limits, with the dyadic-analysis toolbox used to study
them.

Subpackages:

* ``grid``: periodic grids, spectral fields, calculus, parity.
* ``lp``: smooth dyadic (Littlewood-Paley style) frequency decomposition.
* ``zygmund``: moduli of continuity, seminorms, commutator decay checks.
* ``nsk``: the finite-eps Navier-Stokes-Korteweg solver and its ledgers.
* ``qg``: the two limit equations (constant and variable rotation axis).
* ``diagio``: snapshots, series, manifests, trend fits.
* ``config`` / ``runs`` / ``cli``: experiment plumbing.
"""

from .errors import (
    CflError,
    ConfigError,
    GridError,
    MultiplierError,
    ProjectionError,
    RotcapError,
    SeriesError,
    SnapshotError,
    SolverError,
    VacuumError,
)
from .grid import Grid, SpectralField, VecField

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "SpectralField",
    "VecField",
    "RotcapError",
    "GridError",
    "MultiplierError",
    "ProjectionError",
    "VacuumError",
    "CflError",
    "SolverError",
    "SnapshotError",
    "SeriesError",
    "ConfigError",
    "__version__",
]
