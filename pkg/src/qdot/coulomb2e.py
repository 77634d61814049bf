"""Two-electron operators: tensor-product Hamiltonians plus softened Coulomb.

A pair state is a flat vector over (particle-1 index, particle-2 index);
reshaped to a matrix, H (x) I is a batched single-particle apply down
the columns and I (x) H the same through a transpose.  The interaction
is a pointwise diagonal in the position product basis, valley-diagonal
when the single-particle handle carries spinor components.  One apply
holds at most four pair-sized arrays plus FFT scratch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import COULOMB_MEV_NM
from .eigen import EigenResult, LinearOperatorHandle
from .grid import Grid

__all__ = [
    "CoulombKernel",
    "MemoryBudgetError",
    "coulomb_energy",
    "coulomb_diagonal",
    "two_electron_operator",
    "swap_expectation",
    "exchange_coupling",
    "pair_vector_megabytes",
]

_FORMS = ("softened", "quadrature", "thickness")


@dataclass(frozen=True)
class CoulombKernel:
    """Regularized Coulomb interaction between two electrons.

    ``softened`` divides by (d + delta), ``quadrature`` by
    sqrt(d^2 + delta^2), and ``thickness`` (2D only) by
    sqrt(d^2 + thickness^2), standing in for the vertical spread of a
    squeezed column state.  The prefactor e^2/(4 pi eps0 eps_r) is the
    3D one in every mode.
    """

    eps_r: float = 11.9
    delta_nm: float = 0.1
    dimensionality: str = "3d"
    form: str = "softened"
    thickness_nm: float = 0.0

    def __post_init__(self) -> None:
        if not self.delta_nm > 0.0:
            raise ValueError("delta must be positive")
        if not self.eps_r > 0.0:
            raise ValueError("eps_r must be positive")
        if self.dimensionality not in ("2d", "3d"):
            raise ValueError(f"unknown dimensionality {self.dimensionality!r}")
        if self.form not in _FORMS:
            raise ValueError(f"unknown kernel form {self.form!r}")
        if self.form == "thickness":
            if self.dimensionality != "2d" or not self.thickness_nm > 0.0:
                raise ValueError(
                    "thickness form needs a 2d kernel with thickness_nm > 0"
                )

    @property
    def ndim(self) -> int:
        return 3 if self.dimensionality == "3d" else 2

    def of_distance(self, d: np.ndarray) -> np.ndarray:
        """Interaction energy in meV at separation d (nm)."""
        d = np.asarray(d, dtype=float)
        scale = COULOMB_MEV_NM / self.eps_r
        if self.form == "softened":
            return scale / (d + self.delta_nm)
        if self.form == "quadrature":
            return scale / np.sqrt(d * d + self.delta_nm**2)
        return scale / np.sqrt(d * d + self.thickness_nm**2)


class MemoryBudgetError(RuntimeError):
    """Pair problem too large for the configured memory budget."""

    def __init__(self, dof: int, vector_mb: float, budget_mb: float):
        self.dof = dof
        self.vector_mb = vector_mb
        self.budget_mb = budget_mb
        super().__init__(
            f"two-electron problem refused: {dof} DOF, "
            f"{vector_mb:.2f} MB per state vector, working set "
            f"~{8.0 * vector_mb:.0f} MB > budget {budget_mb:.0f} MB"
        )


def pair_vector_megabytes(dof: int) -> float:
    """Size of one complex pair state in MiB."""
    return dof * 16.0 / 2.0**20


def coulomb_energy(kernel: CoulombKernel, r1, r2) -> np.ndarray:
    """V_C between point sets with trailing coordinate axis (nm)."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape[-1] != kernel.ndim or r2.shape[-1] != kernel.ndim:
        raise ValueError(
            f"coordinates must have {kernel.ndim} components for "
            f"a {kernel.dimensionality} kernel"
        )
    d = np.sqrt(np.sum((r1 - r2) ** 2, axis=-1))
    return kernel.of_distance(d)


@lru_cache(maxsize=4)
def coulomb_diagonal(kernel: CoulombKernel, grid: Grid) -> np.ndarray:
    """Pairwise interaction table W[i, j] over flattened grid points."""
    if grid.ndim != kernel.ndim:
        raise ValueError(
            f"{kernel.dimensionality} kernel needs a {kernel.ndim}D grid"
        )
    axes = [grid.axis_positions(a) for a in range(grid.ndim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    n = points.shape[0]
    out = np.empty((n, n))
    step = max(1, 2**22 // max(n, 1))
    for start in range(0, n, step):
        block = points[start : start + step]
        d = np.sqrt(
            np.sum((block[:, None, :] - points[None, :, :]) ** 2, axis=-1)
        )
        out[start : start + step] = kernel.of_distance(d)
    out.setflags(write=False)
    return out


def _batch(single: LinearOperatorHandle, mat: np.ndarray) -> np.ndarray:
    if single.apply_batch is not None:
        return single.apply_batch(mat)
    out = np.empty_like(mat)
    for j in range(mat.shape[1]):
        out[:, j] = single.apply(mat[:, j])
    return out


def two_electron_operator(
    single: LinearOperatorHandle,
    grid: Grid,
    kernel: CoulombKernel | None = None,
    components: int = 1,
    budget_mb: float = 8192.0,
) -> LinearOperatorHandle:
    """H (x) I + I (x) H + diag(V_C) as a matrix-free pair operator.

    ``grid`` is the spatial grid under the single-particle handle;
    ``components`` the spinor components per spatial point (2 for the
    two-valley model), over which the interaction acts as the identity.
    ``kernel=None`` turns the interaction off.  Raises
    MemoryBudgetError before allocating anything when eight pair
    vectors would not fit the budget.
    """
    m = single.dimension
    if components < 1 or m != grid.size * components:
        raise ValueError(
            "single-particle dimension must equal grid.size * components"
        )
    dof = m * m
    vector_mb = pair_vector_megabytes(dof)
    if 8.0 * vector_mb > budget_mb:
        raise MemoryBudgetError(dof, vector_mb, budget_mb)
    w = None if kernel is None else coulomb_diagonal(kernel, grid)
    n = grid.size

    def apply(vec: np.ndarray) -> np.ndarray:
        mat = vec.reshape(m, m)
        out = _batch(single, mat)
        flipped = _batch(single, np.ascontiguousarray(mat.T))
        out += flipped.T
        del flipped
        if w is not None:
            if components == 1:
                out += w * mat
            else:
                pairs = mat.reshape(n, components, n, components)
                view = out.reshape(n, components, n, components)
                view += w[:, None, :, None] * pairs
        return out.ravel()

    return LinearOperatorHandle(dof, apply, np.complex128)


def swap_expectation(vec: np.ndarray) -> float:
    """<psi| SWAP |psi> / <psi|psi> for a flat pair state."""
    vec = np.asarray(vec)
    m = np.sqrt(vec.size)
    if m != int(m):
        raise ValueError("pair state length must be a perfect square")
    mat = vec.reshape(int(m), int(m))
    return float(np.real(np.vdot(mat, mat.T)) / np.real(np.vdot(mat, mat)))


def exchange_coupling(result: EigenResult) -> float:
    """J = |E1 - E0| of a converged two-electron eigenresult, in meV.

    The sign (which spatial symmetry lies lower) is not folded in; read
    it from swap_expectation of the ground vector.
    """
    if result.eigenvalues.size < 2:
        raise ValueError("exchange coupling needs at least two eigenvalues")
    if not result.converged:
        raise ValueError("two-electron eigenpairs did not converge")
    return float(abs(result.eigenvalues[1] - result.eigenvalues[0]))
