"""Silicon two-valley dispersion, kinetic operator, and potential dressing.

The band model replaces the usual quadratic kinetic term with a sum of
two inverted anisotropic Gaussians centered on the +-z valley minima,
so a single envelope carries both valleys and their interference.  The
companion kernel C0(q) reweights the Fourier content of external
potentials near the intervalley momentum transfer +-2 k0, standing in
for the Bloch-state overlap integrals an envelope theory drops.

Kinetic application is fully spectral (FFT, multiply, inverse FFT) and
therefore exact for band-limited fields.  Axis meaning follows grid
dimensionality: 3D grids are (x, y, z), 2D grids are in-plane (x, y),
1D grids are vertical columns (z).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import HBAR2_OVER_2ME_MEV_NM2
from .eigen import LinearOperatorHandle
from .grid import Grid

__all__ = [
    "BandModel",
    "ValleyKernel",
    "NumericalConsistencyError",
    "dispersion",
    "dispersion_ema",
    "apply_kinetic",
    "c0_kernel",
    "effective_potential",
    "single_particle_operator",
]


class NumericalConsistencyError(RuntimeError):
    """A quantity that must vanish analytically failed to numerically."""


@dataclass(frozen=True)
class BandModel:
    """Two-valley conduction-band dispersion for silicon.

    eps(k) = -H * (exp(-(k + k0 zhat)^T K (k + k0 zhat))
                   + exp(-(k - k0 zhat)^T K (k - k0 zhat)))

    with diagonal curvature K chosen so each Gaussian reproduces the
    transverse and longitudinal effective masses at its minimum:
    K_xx = K_yy = hbar^2/(2 m_t H), K_zz = hbar^2/(2 m_z H).

    Attributes
    ----------
    depth_mev:
        Gaussian depth H in meV.
    k0_invnm:
        Valley wavenumber in nm^-1.
    m_transverse, m_longitudinal:
        Effective masses in bare-electron-mass units.
    """

    depth_mev: float = 1000.0
    k0_invnm: float = 9.83
    m_transverse: float = 0.19
    m_longitudinal: float = 0.98

    def __post_init__(self) -> None:
        for name in ("depth_mev", "k0_invnm", "m_transverse", "m_longitudinal"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def kappa_xx(self) -> float:
        """In-plane curvature hbar^2/(2 m_t H), nm^2."""
        return HBAR2_OVER_2ME_MEV_NM2 / (self.m_transverse * self.depth_mev)

    @property
    def kappa_zz(self) -> float:
        """Vertical curvature hbar^2/(2 m_z H), nm^2."""
        return HBAR2_OVER_2ME_MEV_NM2 / (self.m_longitudinal * self.depth_mev)


@dataclass(frozen=True)
class ValleyKernel:
    """Momentum-space kernel that dresses external potentials.

    C0(q) = 1 + A exp(-|q - 2 k0 zhat|^2 / (2 sigma^2))
              + A exp(-|q + 2 k0 zhat|^2 / (2 sigma^2))
    """

    amplitude: float = -1.26
    sigma_invnm: float = 2.0
    k0_invnm: float = 9.83

    def __post_init__(self) -> None:
        if not self.sigma_invnm > 0.0:
            raise ValueError("sigma_invnm must be positive")
        if not self.k0_invnm > 0.0:
            raise ValueError("k0_invnm must be positive")

    def evaluate(self, qx, qy, qz) -> np.ndarray:
        """Evaluate C0 on broadcastable momentum component arrays."""
        qx = np.asarray(qx, dtype=float)
        qy = np.asarray(qy, dtype=float)
        qz = np.asarray(qz, dtype=float)
        perp2 = qx * qx + qy * qy
        two_k0 = 2.0 * self.k0_invnm
        s2 = 2.0 * self.sigma_invnm**2
        bump_minus = np.exp(-(perp2 + (qz - two_k0) ** 2) / s2)
        bump_plus = np.exp(-(perp2 + (qz + two_k0) ** 2) / s2)
        return 1.0 + self.amplitude * (bump_minus + bump_plus)

    def evaluate_1d(self, qz) -> np.ndarray:
        """Evaluate C0 on the qz axis (qx = qy = 0)."""
        return self.evaluate(0.0, 0.0, qz)


def _gaussian_pair(model: BandModel, kx, ky, kz) -> np.ndarray:
    kperp = model.kappa_xx * (np.asarray(kx) ** 2 + np.asarray(ky) ** 2)
    kz = np.asarray(kz)
    lower = model.kappa_zz * (kz + model.k0_invnm) ** 2
    upper = model.kappa_zz * (kz - model.k0_invnm) ** 2
    return -model.depth_mev * (
        np.exp(-(kperp + lower)) + np.exp(-(kperp + upper))
    )


def dispersion(model: BandModel, k) -> np.ndarray:
    """Two-valley dispersion at momentum vectors ``k`` of shape (..., 3)."""
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != 3:
        raise ValueError("k must have a trailing axis of length 3")
    return _gaussian_pair(model, k[..., 0], k[..., 1], k[..., 2])


def dispersion_ema(model: BandModel, k) -> np.ndarray:
    """Single-valley quadratic dispersion at vectors ``k`` of shape (..., 3)."""
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != 3:
        raise ValueError("k must have a trailing axis of length 3")
    ct = HBAR2_OVER_2ME_MEV_NM2 / model.m_transverse
    cz = HBAR2_OVER_2ME_MEV_NM2 / model.m_longitudinal
    return ct * (k[..., 0] ** 2 + k[..., 1] ** 2) + cz * k[..., 2] ** 2


def _require_valley_resolution(grid: Grid, model: BandModel) -> None:
    kz = grid.axis_momenta(grid.ndim - 1)
    kmax = float(np.abs(kz).max())
    if kmax < 1.2 * model.k0_invnm:
        raise ValueError(
            f"z momentum range {kmax:.2f}/nm cannot resolve the valley "
            f"at {model.k0_invnm:.2f}/nm; refine the z axis"
        )


@lru_cache(maxsize=64)
def _kinetic_multiplier(grid: Grid, model: BandModel, mode: str) -> np.ndarray:
    ct = HBAR2_OVER_2ME_MEV_NM2 / model.m_transverse
    cz = HBAR2_OVER_2ME_MEV_NM2 / model.m_longitudinal
    if grid.ndim == 3:
        kx, ky, kz = grid.momentum_mesh()
        if mode == "gef":
            _require_valley_resolution(grid, model)
            eps = _gaussian_pair(model, kx, ky, kz)
        else:
            eps = ct * (kx**2 + ky**2) + cz * kz**2
    elif grid.ndim == 2:
        kx, ky = grid.momentum_mesh()
        if mode == "gef":
            raise ValueError("gef mode needs a vertical axis; 2D grids are in-plane")
        eps = ct * (kx**2 + ky**2) + np.zeros(grid.shape)
    elif grid.ndim == 1:
        kz = grid.axis_momenta(0)
        if mode == "gef":
            _require_valley_resolution(grid, model)
            eps = _gaussian_pair(model, 0.0, 0.0, kz)
        else:
            eps = cz * kz**2
    else:  # pragma: no cover - Grid enforces 1..3 axes
        raise ValueError("unsupported grid dimensionality")
    eps = np.ascontiguousarray(np.broadcast_to(eps, grid.shape))
    eps.setflags(write=False)
    return eps


def kinetic_multiplier(grid: Grid, model: BandModel, mode: str = "gef") -> np.ndarray:
    """The dispersion sampled on the grid's momentum lattice (read-only)."""
    if mode not in ("gef", "ema"):
        raise ValueError(f"mode must be 'gef' or 'ema', got {mode!r}")
    return _kinetic_multiplier(grid, model, mode)


def apply_kinetic(
    grid: Grid, model: BandModel, psi: np.ndarray, mode: str = "gef"
) -> np.ndarray:
    """Apply the spectral kinetic operator to a complex field.

    Trailing (spinor) axes ride along untouched; the operator is
    diagonal in momentum space and Hermitian because the dispersion is
    real and even.
    """
    eps = kinetic_multiplier(grid, model, mode)
    psi = np.asarray(psi)
    extra = psi.ndim - grid.ndim
    if extra:
        eps = eps.reshape(eps.shape + (1,) * extra)
    return grid.to_position(eps * grid.to_momentum(psi))


def c0_kernel(kernel: ValleyKernel, q) -> np.ndarray:
    """Evaluate the dressing kernel at momentum vectors of shape (..., 3)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 3:
        raise ValueError("q must have a trailing axis of length 3")
    return kernel.evaluate(q[..., 0], q[..., 1], q[..., 2])


@lru_cache(maxsize=64)
def _kernel_on_grid(grid: Grid, kernel: ValleyKernel) -> np.ndarray:
    if grid.ndim == 3:
        qx, qy, qz = grid.momentum_mesh()
        c0 = kernel.evaluate(qx, qy, qz)
    elif grid.ndim == 2:
        qx, qy = grid.momentum_mesh()
        c0 = kernel.evaluate(qx, qy, 0.0)
    else:
        c0 = kernel.evaluate_1d(grid.axis_momenta(0))
    c0 = np.ascontiguousarray(np.broadcast_to(c0, grid.shape))
    c0.setflags(write=False)
    return c0


def effective_potential(
    kernel: ValleyKernel, grid: Grid, potential: np.ndarray
) -> np.ndarray:
    """Dress a real potential with the valley kernel in momentum space.

    Returns the real field F^-1[C0(q) * F V].  Because C0 is real and
    even and V is real, the result is analytically real; any imaginary
    residue beyond round-off raises
    :class:`NumericalConsistencyError`.
    """
    potential = np.asarray(potential, dtype=float)
    grid.spatial_axes(potential)
    if potential.shape != grid.shape:
        raise ValueError("potential must be a real scalar field on the grid")
    if kernel.amplitude == 0.0:
        return potential.copy()  # identity kernel, bit-exact
    c0 = _kernel_on_grid(grid, kernel)
    dressed = grid.to_position(c0 * grid.to_momentum(potential.astype(complex)))
    scale = max(1.0, float(np.abs(dressed).max()))
    residue = float(np.abs(dressed.imag).max())
    if residue > 1e-10 * scale:
        raise NumericalConsistencyError(
            f"imaginary residue {residue:.3e} exceeds 1e-10 of scale {scale:.3e}"
        )
    return np.ascontiguousarray(dressed.real)


def single_particle_operator(
    grid: Grid,
    model: BandModel,
    potential: np.ndarray,
    mode: str = "gef",
    dtype=np.complex128,
) -> LinearOperatorHandle:
    """Bundle kinetic plus local potential into a flat-vector operator."""
    potential = np.asarray(potential)
    if potential.shape != grid.shape:
        raise ValueError("potential shape must match the grid")
    kinetic_multiplier(grid, model, mode)  # validate resolution up front

    def apply(vec: np.ndarray) -> np.ndarray:
        psi = vec.reshape(grid.shape)
        out = apply_kinetic(grid, model, psi, mode)
        out += potential * psi
        return out.ravel()

    def apply_batch(mat: np.ndarray) -> np.ndarray:
        psi = mat.reshape(grid.shape + (mat.shape[1],))
        out = apply_kinetic(grid, model, psi, mode)
        out += potential[..., None] * psi
        return out.reshape(mat.shape)

    return LinearOperatorHandle(grid.size, apply, np.dtype(dtype), apply_batch)
