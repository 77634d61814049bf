"""Physical constants in the package's working units (meV, nm).

The two derived scales worth memorizing: hbar^2/(2 m_e) = 38.0998
meV nm^2 and e^2/(4 pi eps0) = 1439.96 meV nm.
"""

from __future__ import annotations

import numpy as np
from scipy import constants as _sc

__all__ = [
    "HBAR2_OVER_2ME_MEV_NM2",
    "COULOMB_MEV_NM",
    "EPS_SI",
    "EPS_SIO2",
]

# hbar^2 / (2 m_e), expressed in meV nm^2.
HBAR2_OVER_2ME_MEV_NM2 = float(
    _sc.hbar**2 / (2.0 * _sc.m_e) / (_sc.e * 1e-3) / 1e-18
)

# e^2 / (4 pi eps0), expressed in meV nm.  Divide by eps_r * distance[nm].
COULOMB_MEV_NM = float(_sc.e / (4.0 * np.pi * _sc.epsilon_0) / 1e-3 / 1e-9)

# Static relative permittivities used by the Poisson solver.
EPS_SI = 11.7
EPS_SIO2 = 3.9
