"""Born-Oppenheimer reduction of 3D problems to effective 2D models.

Each lateral position owns an independent vertical eigenproblem; its
ground energy becomes the confinement correction of the 2D charge
model, and its lowest pair becomes the local valley fields (gap and
phase) of the 2D two-valley model.  Naive fixed-plane slicing is kept
alongside as the baseline the reduction is judged against.

Convention for the valley phase map: ``phi`` is the full argument of
the inter-valley coupling, so the excited column state looks like
F(z) cos(k0 z + phi/2) and a global z-shift of the potential by dz
shifts phi by 2 k0 dz (modulo 2 pi).  The 2x2 valley Hamiltonian uses
phi/2 as its trigonometric angle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .band import (
    BandModel,
    ValleyKernel,
    apply_kinetic,
    effective_potential,
    kinetic_multiplier,
)
from .eigen import EigenResult, LinearOperatorHandle, dense_diagonalize_1d, lowest_eigenpairs
from .grid import Grid
from .valleytools import (
    UndefinedPhaseError,
    extract_phase_projection,
    unwrap_phases,
    vertical_profile_from_state,
)

__all__ = [
    "ColumnSolution",
    "ValleyFields",
    "EffectivePotential2D",
    "split_potential",
    "solve_column",
    "bo_charge_potential",
    "slice_potential",
    "valley_fields",
    "assemble_valley_h2d",
    "two_lowest_valley_states",
]


@dataclass(frozen=True)
class ColumnSolution:
    """Lowest vertical eigenpairs of one lateral column."""

    grid: Grid  # the 1D vertical grid
    eigenvalues: np.ndarray  # (m_max,), ascending, meV
    states: np.ndarray  # (n_z, m_max), unit norm under the dz measure
    index: tuple[int, int] | None = None  # lateral cell the column came from

    def __post_init__(self) -> None:
        if np.any(np.diff(self.eigenvalues) < 0):
            raise ValueError("eigenvalues must be ascending")


@dataclass(frozen=True)
class ValleyFields:
    """Local valley quantities on a lateral grid.

    ``delta_abs`` is |coupling| (half the column gap); ``phi`` the
    coupling argument, unwrapped along the scan axis and stored in
    (-pi, pi]; ``phase_defined`` marks columns whose gap was large
    enough for the phase to mean anything.
    """

    grid: Grid  # 2D lateral grid
    epsilon_g: np.ndarray
    delta_abs: np.ndarray
    phi: np.ndarray
    phase_defined: np.ndarray

    def __post_init__(self) -> None:
        for name in ("epsilon_g", "delta_abs", "phi", "phase_defined"):
            arr = getattr(self, name)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} must live on the lateral grid")
        if np.any(self.delta_abs < 0):
            raise ValueError("delta_abs must be non-negative")


@dataclass(frozen=True)
class EffectivePotential2D:
    """A 2D potential map with a record of how it was produced."""

    grid: Grid
    values: np.ndarray
    provenance: str  # bo_charge | slice_interface | slice_maxdensity
    z_plane_nm: float

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise ValueError("values must live on the stated grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("effective potential must be finite")


def _z_index(grid: Grid, z_ref: float, warn: bool = True) -> int:
    z = grid.axis_positions(grid.ndim - 1)
    idx = int(np.argmin(np.abs(z - z_ref)))
    if abs(z[idx] - z_ref) > 1e-9 and warn:
        warnings.warn(
            f"z_ref {z_ref} nm off-grid; snapped to {z[idx]:.6f} nm",
            stacklevel=3,
        )
    return idx


def split_potential(grid: Grid, potential: np.ndarray, z_ref: float):
    """Split V into a lateral slice and the remainder.

    Returns ``(v_xy, v_z)`` with ``v_xy(x,y) = V(x,y,z_ref)`` and
    ``v_z = V - v_xy``; the sum reconstructs V bit-exactly.
    """
    potential = np.asarray(potential)
    if grid.ndim != 3 or potential.shape != grid.shape:
        raise ValueError("split_potential expects a 3D field on its grid")
    idx = _z_index(grid, z_ref)
    v_xy = potential[:, :, idx].copy()
    v_z = potential - v_xy[:, :, None]
    # one float subtraction can leave the re-added sum an ulp off; nudge
    # the remainder until reconstruction really is bit-exact
    base = np.broadcast_to(v_xy[:, :, None], potential.shape)
    for _ in range(4):
        back = base + v_z
        bad = back != potential
        if not bad.any():
            break
        v_z[bad] = np.nextafter(
            v_z[bad], np.where(back[bad] > potential[bad], -np.inf, np.inf)
        )
    return v_xy, v_z


@lru_cache(maxsize=32)
def _column_kinetic_matrix(zgrid: Grid, band: BandModel, mode: str) -> np.ndarray:
    """Dense vertical kinetic matrix (real symmetric) for column solves."""
    if zgrid.ndim != 1:
        raise ValueError("column solves need a 1D vertical grid")
    eps = kinetic_multiplier(zgrid, band, mode)
    n = zgrid.shape[0]
    # unitary DFT matrix; T = F^H diag(eps) F is real because eps is
    # real and even on the lattice
    fmat = np.fft.fftshift(np.fft.fft(np.eye(n), axis=0, norm="ortho"), axes=0)
    tmat = fmat.conj().T @ (eps[:, None] * fmat)
    tmat = 0.5 * (tmat + tmat.conj().T)
    out = np.ascontiguousarray(tmat.real)
    out.setflags(write=False)
    return out


_MODE_MAP = {"ema_z": "ema", "gef_z": "gef"}


def solve_column(
    zgrid: Grid,
    column: np.ndarray,
    mode: str = "gef_z",
    m_max: int = 2,
    band: BandModel | None = None,
) -> ColumnSolution:
    """Lowest vertical eigenpairs of one column potential (dense solve)."""
    if mode not in _MODE_MAP:
        raise ValueError(f"mode must be one of {sorted(_MODE_MAP)}, got {mode!r}")
    band = band if band is not None else BandModel()
    column = np.asarray(column, dtype=float)
    if zgrid.ndim != 1 or column.shape != zgrid.shape:
        raise ValueError("column must be a real 1D field on the vertical grid")
    tmat = _column_kinetic_matrix(zgrid, band, _MODE_MAP[mode])

    def apply(v: np.ndarray) -> np.ndarray:
        return tmat @ v + column * v

    result = dense_diagonalize_1d(
        LinearOperatorHandle(zgrid.shape[0], apply, np.float64)
    )
    dz = zgrid.spacing[0]
    states = result.eigenvectors[:, :m_max] / np.sqrt(dz)
    return ColumnSolution(zgrid, result.eigenvalues[:m_max].copy(), states)


def _column_eigh_map(
    zgrid: Grid,
    band: BandModel,
    mode: str,
    columns: np.ndarray,
    m_max: int,
    want_vectors: bool,
):
    """Subset eigensolves for a stack of columns, shape (ncol, n_z)."""
    tmat = _column_kinetic_matrix(zgrid, band, _MODE_MAP[mode])
    ncol, nz = columns.shape
    values = np.empty((ncol, m_max))
    vectors = np.empty((ncol, nz, m_max)) if want_vectors else None
    if not np.all(np.isfinite(columns)):
        raise ValueError("column potentials must be finite")
    h = np.empty_like(tmat)
    diag = np.arange(nz)
    for i in range(ncol):
        np.copyto(h, tmat)
        h[diag, diag] += columns[i]
        if want_vectors:
            w, v = scipy.linalg.eigh(
                h,
                subset_by_index=(0, m_max - 1),
                overwrite_a=True,
                check_finite=False,
            )
            vectors[i] = v
        else:
            w = scipy.linalg.eigh(
                h,
                subset_by_index=(0, m_max - 1),
                eigvals_only=True,
                overwrite_a=True,
                check_finite=False,
            )
        values[i] = w
    return values, vectors


def bo_charge_potential(
    grid: Grid,
    potential: np.ndarray,
    z_ref: float,
    band: BandModel | None = None,
) -> EffectivePotential2D:
    """Lateral slice plus per-column vertical ground energy.

    The split point z_ref is a gauge choice: moving it shifts a term
    between the slice and the column energies exactly.
    """
    band = band if band is not None else BandModel()
    v_xy, v_z = split_potential(grid, potential, z_ref)
    zgrid = Grid((grid.shape[2],), (grid.lengths[2],), (grid.origin[2],))
    columns = v_z.reshape(-1, grid.shape[2])
    values, _ = _column_eigh_map(zgrid, band, "ema_z", columns, 1, False)
    eps0 = values[:, 0].reshape(grid.shape[:2])
    return EffectivePotential2D(
        grid.drop_axis(2),
        v_xy + eps0,
        "bo_charge",
        float(grid.axis_positions(2)[_z_index(grid, z_ref, warn=False)]),
    )


def slice_potential(
    grid: Grid,
    potential: np.ndarray,
    strategy: str,
    z_plane: float | None = None,
    density_state: np.ndarray | None = None,
) -> EffectivePotential2D:
    """Fixed-plane baseline: V at one height, no confinement correction.

    ``interface`` defaults to z = -0.5 nm; ``max_density`` locates the
    peak of the vertical marginal of ``density_state`` when given,
    otherwise uses z = -2.5 nm.
    """
    potential = np.asarray(potential)
    if grid.ndim != 3 or potential.shape != grid.shape:
        raise ValueError("slice_potential expects a 3D field on its grid")
    if strategy == "interface":
        z_ref = -0.5 if z_plane is None else z_plane
        provenance = "slice_interface"
    elif strategy == "max_density":
        provenance = "slice_maxdensity"
        if z_plane is not None:
            z_ref = z_plane
        elif density_state is not None:
            density_state = np.asarray(density_state)
            if density_state.shape != grid.shape:
                raise ValueError("density state must live on the grid")
            marginal = np.sum(np.abs(density_state) ** 2, axis=(0, 1))
            z_ref = float(grid.axis_positions(2)[int(np.argmax(marginal))])
        else:
            z_ref = -2.5
    else:
        raise ValueError(f"unknown slicing strategy {strategy!r}")
    idx = _z_index(grid, z_ref)
    return EffectivePotential2D(
        grid.drop_axis(2),
        potential[:, :, idx].copy(),
        provenance,
        float(grid.axis_positions(2)[idx]),
    )


def valley_fields(
    grid: Grid,
    potential: np.ndarray,
    kernel: ValleyKernel | None = None,
    band: BandModel | None = None,
    c0_filter: bool = True,
    unwrap_axis: int | None = 0,
    phase_gap_floor_mev: float = 1e-6,
) -> ValleyFields:
    """Local valley ground energy, gap, and phase from column solves.

    Each column is (optionally) dressed by the 1D restriction of the
    valley kernel, then solved with the two-valley vertical kinetic;
    the excited (cosine-like) state feeds the phase extractor, whose
    half-angle is doubled into the stored coupling argument.  Columns
    whose pair gap is below ``phase_gap_floor_mev`` get an undefined
    phase.
    """
    kernel = kernel if kernel is not None else ValleyKernel()
    band = band if band is not None else BandModel()
    potential = np.asarray(potential, dtype=float)
    if grid.ndim != 3 or potential.shape != grid.shape:
        raise ValueError("valley_fields expects a 3D field on its grid")
    zgrid = Grid((grid.shape[2],), (grid.lengths[2],), (grid.origin[2],))
    columns = np.ascontiguousarray(potential.reshape(-1, grid.shape[2]))
    if c0_filter:
        columns = np.stack(
            [effective_potential(kernel, zgrid, col) for col in columns]
        )
    values, vectors = _column_eigh_map(zgrid, band, "gef_z", columns, 2, True)

    lateral = grid.drop_axis(2)
    eps_g = values[:, 0].reshape(lateral.shape)
    gaps = values[:, 1] - values[:, 0]
    delta_abs = (0.5 * gaps).reshape(lateral.shape)
    phases = np.full(len(columns), np.nan)
    defined = gaps >= phase_gap_floor_mev
    n_noisy = 0
    for i in np.nonzero(defined)[0]:
        excited = vectors[i, :, 1].astype(complex)
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                profile = vertical_profile_from_state(zgrid, excited, band.k0_invnm)
                phases[i] = 2.0 * extract_phase_projection(profile).phase_rad
            n_noisy += bool(caught)
        except UndefinedPhaseError:
            defined[i] = False
    if n_noisy:
        warnings.warn(
            f"{n_noisy} of {len(columns)} columns had weak valley modulation",
            stacklevel=2,
        )
    phi = phases.reshape(lateral.shape)
    defined = defined.reshape(lateral.shape)

    if unwrap_axis is not None and np.all(defined):
        phi = np.apply_along_axis(
            unwrap_phases, unwrap_axis, phi, 2.0 * np.pi
        )
        # keep the stored map on a principal interval
        phi = np.mod(phi + np.pi, 2.0 * np.pi) - np.pi
        phi[phi == -np.pi] = np.pi
    return ValleyFields(lateral, eps_g, delta_abs, phi, defined)


def assemble_valley_h2d(
    lateral: Grid,
    fields: ValleyFields,
    v_xy: np.ndarray,
    band: BandModel | None = None,
) -> LinearOperatorHandle:
    """In-plane kinetic plus the pointwise 2x2 valley Hamiltonian.

    With a = phi/2 the 2x2 block at each point is
    eps_g + 2|d| [[cos^2 a, -cos a sin a],
                  [-cos a sin a, sin^2 a]],
    whose eigenvalues are eps_g and eps_g + 2|d| for any angle.
    """
    band = band if band is not None else BandModel()
    if fields.grid != lateral:
        raise ValueError("fields were computed on a different lateral grid")
    v_xy = np.asarray(v_xy, dtype=float)
    if v_xy.shape != lateral.shape:
        raise ValueError("v_xy must live on the lateral grid")
    kinetic_multiplier(lateral, band, "ema")  # validate and warm the cache
    angle = 0.5 * np.where(fields.phase_defined, fields.phi, 0.0)
    two_d = 2.0 * fields.delta_abs
    cos, sin = np.cos(angle), np.sin(angle)
    m00 = fields.epsilon_g + v_xy + two_d * cos * cos
    m11 = fields.epsilon_g + v_xy + two_d * sin * sin
    m01 = -two_d * cos * sin
    shape = lateral.shape + (2,)

    def apply(vec: np.ndarray) -> np.ndarray:
        psi = vec.reshape(shape)
        out = apply_kinetic(lateral, band, psi, "ema")
        out[..., 0] += m00 * psi[..., 0] + m01 * psi[..., 1]
        out[..., 1] += m01 * psi[..., 0] + m11 * psi[..., 1]
        return out.ravel()

    def apply_batch(mat: np.ndarray) -> np.ndarray:
        psi = mat.reshape(shape + (mat.shape[1],))
        out = apply_kinetic(lateral, band, psi, "ema")
        out[..., 0, :] += m00[..., None] * psi[..., 0, :] + m01[..., None] * psi[..., 1, :]
        out[..., 1, :] += m01[..., None] * psi[..., 0, :] + m11[..., None] * psi[..., 1, :]
        return out.reshape(mat.shape)

    return LinearOperatorHandle(lateral.size * 2, apply, np.complex128, apply_batch)


def two_lowest_valley_states(
    handle: LinearOperatorHandle, **solver_kwargs
) -> EigenResult:
    """The valley pair of the assembled 2D spinor problem."""
    return lowest_eigenpairs(handle, k=2, **solver_kwargs)
