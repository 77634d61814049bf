"""Built-in device potentials: dot confinement, interface steps, SiGe alloy.

The alloy sampler uses a counter-based generator (one SplitMix64 mix
per atom draw, keyed by seed and flat cell index) so the field is a
pure function of (spec, grid, seed) no matter how generation is
scheduled or chunked.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Grid

__all__ = [
    "DotPotentialSpec",
    "StepInterfaceSpec",
    "SiGeSpec",
    "dot_potential",
    "step_interface_potential",
    "sample_sige_potential",
    "sige_concentration_profile",
    "write_concentration_csv",
]

SILICON_ATOMS_PER_NM3 = 50.0


@dataclass(frozen=True)
class DotPotentialSpec:
    """Harmonic-in-plane, linear-in-z confinement.

    V = 0.5 * (omega_x^2 (x - x0)^2 + omega_y^2 y^2) - tilt * z

    omega values are the square root of the lateral curvature in
    meV/nm^2; the tilt pulls the electron toward positive z, where a
    barrier term from the interface generators holds it off.
    """

    omega_x: float = 1.0
    omega_y: float = 1.0
    tilt_mev_per_nm: float = 5.0
    x0_nm: float = 0.0

    def __post_init__(self) -> None:
        if not (self.omega_x > 0.0 and self.omega_y > 0.0):
            raise ValueError("omega values must be positive")


@dataclass(frozen=True)
class StepInterfaceSpec:
    """A barrier wall above the interface with a single atomic step.

    The wall height profile z0(x) sits one step height higher for x
    inside ``step_x_range``.  The vertical turn-on is either the
    sharpness-4 sigmoid of width ``smoothing_width_nm`` or an exact
    half-open Heaviside (``profile="sharp"``).
    """

    barrier_mev: float = 3000.0
    step_height_nm: float = 0.135
    step_x_range: tuple[float, float] = (-4.7, 5.7)
    smoothing_width_nm: float = 0.135
    profile: str = "sigmoid"

    def __post_init__(self) -> None:
        if not self.barrier_mev > 0.0:
            raise ValueError("barrier height must be positive")
        if self.profile not in ("sigmoid", "sharp"):
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.profile == "sigmoid" and not self.smoothing_width_nm > 0.0:
            raise ValueError("sigmoid smoothing width must be positive")

    def edge_height(self, x) -> np.ndarray:
        """Interface height z0(x): step height inside the range, else 0."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.step_x_range
        return np.where((x >= lo) & (x <= hi), self.step_height_nm, 0.0)


@dataclass(frozen=True)
class SiGeSpec:
    """Binomially sampled germanium alloy barrier.

    Target concentration rises as a logistic of z; each grid cell draws
    N_Ge ~ Binomial(atoms_per_cell, c(z)) and contributes the potential
    v_max * N_Ge / (atoms_per_cell * c_max).  ``atoms_per_cell=None``
    scales with cell volume at the silicon atomic density.
    """

    c_max: float = 0.30
    z_center_nm: float = 0.0
    width_nm: float = 1.0
    v_max_mev: float = 150.0
    atoms_per_cell: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.c_max <= 1.0:
            raise ValueError("c_max must be in (0, 1]")
        if self.atoms_per_cell is not None and self.atoms_per_cell < 1:
            raise ValueError("atoms_per_cell must be >= 1")
        if not self.width_nm > 0.0:
            raise ValueError("width_nm must be positive")

    def concentration(self, z) -> np.ndarray:
        """Mean Ge fraction at height z (logistic profile)."""
        t = (np.asarray(z, dtype=float) - self.z_center_nm) / self.width_nm
        return self.c_max / (1.0 + np.exp(-t))

    def resolve_atoms_per_cell(self, grid: Grid) -> int:
        if self.atoms_per_cell is not None:
            return self.atoms_per_cell
        return max(1, round(grid.cell_volume * SILICON_ATOMS_PER_NM3))


def _require_3d(grid: Grid) -> None:
    if grid.ndim != 3:
        raise ValueError("device potentials are generated on 3D grids")


def dot_potential(spec: DotPotentialSpec, grid: Grid) -> np.ndarray:
    _require_3d(grid)
    x, y, z = grid.position_mesh()
    lateral = 0.5 * (
        spec.omega_x**2 * (x - spec.x0_nm) ** 2 + spec.omega_y**2 * y**2
    )
    return np.ascontiguousarray(
        np.broadcast_to(lateral - spec.tilt_mev_per_nm * z, grid.shape)
    )


def step_interface_potential(spec: StepInterfaceSpec, grid: Grid) -> np.ndarray:
    _require_3d(grid)
    x, _, z = grid.position_mesh()
    z0 = spec.edge_height(x)
    if spec.profile == "sharp":
        wall = np.where(z > z0, spec.barrier_mev, 0.0)
    else:
        dz = grid.spacing[2]
        if dz > spec.smoothing_width_nm / 2.0:
            raise ValueError(
                f"z spacing {dz:.4f} nm cannot resolve smoothing width "
                f"{spec.smoothing_width_nm} nm (need dz <= w/2)"
            )
        wall = spec.barrier_mev / (
            1.0 + np.exp(-4.0 * (z - z0) / spec.smoothing_width_nm)
        )
    return np.ascontiguousarray(np.broadcast_to(wall, grid.shape))


# -- counter-based alloy sampling -----------------------------------


def _splitmix64(counter: np.ndarray) -> np.ndarray:
    """One SplitMix64 output per uint64 counter value."""
    # stride the counter by the golden gamma (the generator's intended
    # state sequence) before the two avalanche rounds
    z = counter * np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _atom_uniforms(seed: int, flat_cells: np.ndarray, atom: int, natoms: int):
    # distinct counter per (seed, cell, atom); the seed folds in through
    # an odd multiplier (Python ints, reduced mod 2^64, avoid overflow
    # warnings from numpy scalar arithmetic)
    seed_term = (seed * 0xD1342543DE82EF95 + atom) % (1 << 64)
    counter = flat_cells.astype(np.uint64) * np.uint64(natoms) + np.uint64(seed_term)
    bits = _splitmix64(counter)
    return bits.astype(np.float64) / 2.0**64


def sample_ge_counts(spec: SiGeSpec, grid: Grid) -> np.ndarray:
    """Per-cell germanium atom counts N_Ge on a 3D grid."""
    _require_3d(grid)
    natoms = spec.resolve_atoms_per_cell(grid)
    conc = spec.concentration(grid.axis_positions(2))
    if np.any(conc < 0.0) or np.any(conc > 1.0):
        warnings.warn("concentration clamped to [0, 1]", stacklevel=2)
        conc = np.clip(conc, 0.0, 1.0)
    target = np.broadcast_to(conc, grid.shape)
    flat_cells = np.arange(grid.size, dtype=np.uint64).reshape(grid.shape)
    counts = np.zeros(grid.shape, dtype=np.int64)
    for atom in range(natoms):
        u = _atom_uniforms(spec.seed, flat_cells, atom, natoms)
        counts += u < target
    return counts


def sample_sige_potential(spec: SiGeSpec, grid: Grid) -> np.ndarray:
    """Alloy barrier V = v_max * N_Ge / (atoms_per_cell * c_max)."""
    natoms = spec.resolve_atoms_per_cell(grid)
    counts = sample_ge_counts(spec, grid)
    return spec.v_max_mev * counts / (natoms * spec.c_max)


def sige_concentration_profile(spec: SiGeSpec, grid: Grid):
    """Height profile of target and realized Ge fraction.

    Returns (z, mean_c, sampled_c) with the realized fraction averaged
    over the lateral cells at each height.
    """
    z = grid.axis_positions(2)
    mean_c = spec.concentration(z)
    natoms = spec.resolve_atoms_per_cell(grid)
    counts = sample_ge_counts(spec, grid)
    sampled_c = counts.mean(axis=(0, 1)) / natoms
    return z, np.broadcast_to(mean_c, z.shape).copy(), sampled_c


def write_concentration_csv(path, spec: SiGeSpec, grid: Grid) -> None:
    z, mean_c, sampled_c = sige_concentration_profile(spec, grid)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z_nm", "mean_c", "sampled_c"])
        for row in zip(z, mean_c, sampled_c):
            writer.writerow([f"{v:.12g}" for v in row])
