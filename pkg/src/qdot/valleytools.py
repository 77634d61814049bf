"""Valley observables from wavefunctions: phase, splitting, decomposition.

Both phase extractors return the angle theta that appears in the
standing-wave form psi(z) ~ F(z) cos(k0 z + theta), reported on the
principal branch (-pi/2, pi/2].  theta is half the argument of the
ratio F+/F- of the traveling-valley components, so it is defined
modulo pi; scan drivers unwrap sequences with :func:`unwrap_phases`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Grid, inner_product

__all__ = [
    "VerticalProfile",
    "PhaseEstimate",
    "UndefinedPhaseError",
    "vertical_profile_from_state",
    "extract_phase_projection",
    "extract_phase_fourier",
    "valley_split_from_levels",
    "two_valley_decompose",
    "unwrap_phases",
]


class UndefinedPhaseError(ValueError):
    """The state carries no usable valley content."""


@dataclass(frozen=True)
class PhaseEstimate:
    """An extracted valley phase and the extraction's self-diagnostic.

    ``residual`` is the relative norm of what the extractor's model
    fails to explain (projection leftover, or the spread of the window
    ratios); small values mean the phase is trustworthy.
    """

    phase_rad: float
    residual: float


@dataclass(frozen=True)
class VerticalProfile:
    """A vertical wavefunction with its slowly varying envelope."""

    grid: Grid
    psi: np.ndarray
    envelope: np.ndarray
    k0_invnm: float

    def __post_init__(self) -> None:
        if self.grid.ndim != 1:
            raise ValueError("vertical profiles live on 1D grids")
        psi = np.asarray(self.psi, dtype=complex)
        env = np.asarray(self.envelope, dtype=float)
        if psi.shape != self.grid.shape or env.shape != self.grid.shape:
            raise ValueError("psi and envelope must match the grid")
        if np.any(env < 0.0):
            raise ValueError("envelope must be non-negative")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "envelope", env)


def _principal_branch(theta: float) -> float:
    """Map an angle to (-pi/2, pi/2] (phases live modulo pi)."""
    m = (theta + np.pi / 2.0) % np.pi
    if m == 0.0:
        m = np.pi
    return m - np.pi / 2.0


def _lowpass_z(grid: Grid, field: np.ndarray, cutoff: float) -> np.ndarray:
    axis = grid.ndim - 1
    kz = grid.axis_momenta(axis)
    keep = np.abs(kz) < cutoff
    shape = [1] * grid.ndim
    shape[axis] = len(kz)
    ft = grid.to_momentum(field)
    ft *= keep.reshape(shape)
    return grid.to_position(ft)


def two_valley_decompose(grid: Grid, psi: np.ndarray, k0: float):
    """Split a state into traveling-valley components by demodulation.

    Returns ``(f_plus, f_minus, residual)`` with
    ``psi ~ f_plus e^{+i k0 z} + f_minus e^{-i k0 z}`` and the relative
    reconstruction error.  Components are recovered by shifting each
    valley to zero momentum and keeping content below k0/2.  A residual
    above 20% warns that the state is not valley-dominated.
    """
    psi = np.asarray(psi, dtype=complex)
    grid.spatial_axes(psi)
    z = grid.axis_positions(grid.ndim - 1)
    shape = [1] * grid.ndim
    shape[-1] = len(z)
    carrier = np.exp(1j * k0 * z).reshape(shape)
    f_plus = _lowpass_z(grid, psi / carrier, k0 / 2.0)
    f_minus = _lowpass_z(grid, psi * carrier, k0 / 2.0)
    recon = f_plus * carrier + f_minus / carrier
    norm = np.linalg.norm(psi)
    residual = float(np.linalg.norm(psi - recon) / norm) if norm > 0 else 0.0
    if residual > 0.20:
        warnings.warn(
            f"valley decomposition residual {residual:.2%}; state is not "
            "valley-dominated",
            stacklevel=2,
        )
    return f_plus, f_minus, residual


def vertical_profile_from_state(grid: Grid, psi: np.ndarray, k0: float) -> VerticalProfile:
    """Build a profile whose envelope comes from valley demodulation."""
    if grid.ndim != 1:
        raise ValueError("vertical profiles live on 1D grids")
    f_plus, f_minus, _ = two_valley_decompose(grid, psi, k0)
    envelope = np.abs(f_plus) + np.abs(f_minus)
    return VerticalProfile(grid, np.asarray(psi, complex), envelope, k0)


def extract_phase_projection(profile: VerticalProfile) -> PhaseEstimate:
    """Valley phase by projecting onto envelope-modulated basis states.

    The basis is {F cos(k0 z), F sin(k0 z)}, normalized; the state is
    first rotated by a global phase that maximizes its real part, since
    the basis is real.
    """
    grid = profile.grid
    z = grid.axis_positions(0)
    psi = profile.psi.copy()
    norm = np.sqrt(inner_product(grid, psi, psi).real)
    if norm == 0.0:
        raise UndefinedPhaseError("zero state")
    psi /= norm

    # global-phase rotation: maximize || Re(e^{i a} psi) ||
    quad = np.sum(psi * psi)
    if abs(quad) > 1e-12 * np.sum(np.abs(psi) ** 2):
        psi = psi * np.exp(-0.5j * np.angle(quad))

    k0z = profile.k0_invnm * z
    chi_cos = profile.envelope * np.cos(k0z)
    chi_sin = profile.envelope * np.sin(k0z)
    ncos = np.sqrt(inner_product(grid, chi_cos, chi_cos).real)
    nsin = np.sqrt(inner_product(grid, chi_sin, chi_sin).real)
    if ncos == 0.0 or nsin == 0.0:
        raise UndefinedPhaseError("degenerate envelope")
    chi_cos /= ncos
    chi_sin /= nsin

    a_full = inner_product(grid, chi_cos, psi)
    b_full = inner_product(grid, chi_sin, psi)
    a, b = a_full.real, b_full.real
    if a * a + b * b <= 1e-12:
        raise UndefinedPhaseError(
            f"valley content {a * a + b * b:.3e} below threshold"
        )
    leftover = psi - a_full * chi_cos - b_full * chi_sin
    residual = float(np.sqrt(inner_product(grid, leftover, leftover).real))
    return PhaseEstimate(_principal_branch(-np.arctan2(b, a)), residual)


def extract_phase_fourier(
    grid: Grid, psi: np.ndarray, k0: float, window_invnm: float = 1.5
) -> PhaseEstimate:
    """Valley phase from the Fourier amplitude ratio around +-k0.

    The amplitudes near each valley center are isolated by demodulating
    with e^{-+i k0 z} (true z coordinate, so the phase is referenced to
    z = 0 and off-lattice k0 needs no bin rounding) and keeping content
    within the window.  The ratio of the two sets of amplitudes is
    averaged with weights |psi~(-k0 + d)|^2, which reduces to a single
    quotient of inner products; half its argument is returned.
    """
    if grid.ndim != 1:
        raise ValueError("the Fourier extractor works on 1D profiles")
    psi = np.asarray(psi, dtype=complex)
    k = grid.axis_momenta(0)
    if np.abs(k).max() < k0:
        raise UndefinedPhaseError("momentum lattice does not reach k0")
    z = grid.axis_positions(0)
    carrier = np.exp(1j * k0 * z)
    near_plus = _lowpass_z(grid, psi / carrier, window_invnm)
    near_minus = _lowpass_z(grid, psi * carrier, window_invnm)
    total = float(np.sum(np.abs(psi) ** 2))
    in_windows = float(
        np.sum(np.abs(near_plus) ** 2) + np.sum(np.abs(near_minus) ** 2)
    )
    if total == 0.0 or in_windows < 1e-6 * total:
        raise UndefinedPhaseError(
            f"spectral weight in valley windows {in_windows:.3e} below threshold"
        )
    mean_ratio = np.vdot(near_minus, near_plus) / np.sum(np.abs(near_minus) ** 2)
    # how much of the + window a single complex ratio fails to explain
    misfit = near_plus - mean_ratio * near_minus
    denom = np.linalg.norm(near_plus)
    residual = float(np.linalg.norm(misfit) / denom) if denom > 0 else 0.0
    return PhaseEstimate(_principal_branch(0.5 * np.angle(mean_ratio)), residual)


def valley_split_from_levels(ground_mev: float, excited_mev: float) -> float:
    """The splitting 2|coupling| as the gap between the valley pair."""
    if excited_mev < ground_mev:
        raise ValueError(
            f"excited level {excited_mev} below ground level {ground_mev}"
        )
    return float(excited_mev - ground_mev)


def unwrap_phases(phases, period: float = np.pi) -> np.ndarray:
    """Unwrap a phase sequence whose values are defined modulo pi."""
    return np.unwrap(np.asarray(phases, dtype=float), period=period)
