"""Real-space simulator for gate-defined silicon quantum dots.

The package solves single- and two-electron eigenproblems on regular 3D
grids with a generalized envelope Hamiltonian whose momentum-space
dispersion carries the full two-valley conduction-band structure of
silicon, and reduces those problems to cheaper 2D charge and 2D
two-valley models through a Born-Oppenheimer factorization of the
vertical motion.  Device potentials come from a finite-difference
Poisson solver over gate stacks or from built-in analytic and
alloy-disorder models.
"""

from __future__ import annotations

from .band import BandModel, ValleyKernel
from .constants import HBAR2_OVER_2ME_MEV_NM2
from .grid import Grid

__all__ = [
    "BandModel",
    "Grid",
    "HBAR2_OVER_2ME_MEV_NM2",
    "ValleyKernel",
]

__version__ = "0.1.0"
