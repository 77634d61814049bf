"""Regular periodic grids and unitary Fourier transforms.

Conventions shared by every solver in the package:

* positions along axis i are ``origin_i + n * L_i / N_i`` for
  ``n = 0 .. N_i - 1`` (periodic sampling, right endpoint excluded),
* momenta are ``(2 pi / L_i) * (n - N_i // 2)``, monotonically
  increasing, which matches the output order of an fft followed by
  fftshift,
* transforms are unitary (``norm="ortho"``), so Parseval holds without
  bookkeeping factors,
* arrays are C ordered over ``(x, y, z)``; any internal (spinor) axis
  comes last.

All grid sizes must be even so that -N/2 is an exact grid momentum.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "inner_product",
    "boundary_leakage",
    "save_field",
    "load_field",
]

_MAGIC = b"QDFIELD1"


@dataclass(frozen=True)
class Grid:
    """A regular periodic grid in one, two, or three dimensions.

    Parameters
    ----------
    shape:
        Points per axis, each at least 2.  Odd counts are allowed; an
        even axis carries a single unpaired Nyquist momentum while an
        odd axis has a fully symmetric momentum set.
    lengths:
        Period of each axis in nm.
    origin:
        Coordinate of grid point 0 along each axis, nm.
    """

    shape: tuple[int, ...]
    lengths: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self) -> None:
        shape = tuple(int(n) for n in self.shape)
        lengths = tuple(float(x) for x in self.lengths)
        origin = tuple(float(x) for x in self.origin)
        if not (len(shape) == len(lengths) == len(origin)):
            raise ValueError("shape, lengths, origin must have equal length")
        if len(shape) == 0:
            raise ValueError("grid needs at least one axis")
        for n in shape:
            if n < 2:
                raise ValueError(f"axis size {n} must be >= 2")
        for x in lengths:
            if not x > 0.0:
                raise ValueError("axis lengths must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "origin", origin)

    # -- geometry ---------------------------------------------------

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(l / n for l, n in zip(self.lengths, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_positions(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        step = self.lengths[axis] / n
        return self.origin[axis] + step * np.arange(n)

    def axis_momenta(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return (2.0 * np.pi / self.lengths[axis]) * (np.arange(n) - n // 2)

    def position_mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable position arrays, one per axis (ij indexing)."""
        axes = [self.axis_positions(i) for i in range(self.ndim)]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    def momentum_mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable momentum arrays, one per axis (ij indexing)."""
        axes = [self.axis_momenta(i) for i in range(self.ndim)]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    def drop_axis(self, axis: int) -> "Grid":
        """Grid with one axis removed (used by the 2D reductions)."""
        keep = [i for i in range(self.ndim) if i != axis]
        return Grid(
            shape=tuple(self.shape[i] for i in keep),
            lengths=tuple(self.lengths[i] for i in keep),
            origin=tuple(self.origin[i] for i in keep),
        )

    # -- transforms -------------------------------------------------

    def spatial_axes(self, field: np.ndarray) -> tuple[int, ...]:
        """The leading axes of ``field`` that correspond to this grid."""
        if field.ndim < self.ndim or field.shape[: self.ndim] != self.shape:
            raise ValueError(
                f"field shape {field.shape} does not start with {self.shape}"
            )
        return tuple(range(self.ndim))

    def to_momentum(self, field: np.ndarray) -> np.ndarray:
        """Unitary FFT over the spatial axes, output in monotonic k order."""
        axes = self.spatial_axes(field)
        out = np.fft.fftn(field, axes=axes, norm="ortho")
        return np.fft.fftshift(out, axes=axes)

    def to_position(self, field: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_momentum`."""
        axes = self.spatial_axes(field)
        out = np.fft.ifftshift(field, axes=axes)
        return np.fft.ifftn(out, axes=axes, norm="ortho")


def inner_product(grid: Grid, a: np.ndarray, b: np.ndarray) -> complex:
    """Discrete L2 inner product sum(conj(a) * b) * cell_volume.

    Spinor components, if present, are summed as well.  Conjugate
    symmetric: ``inner_product(grid, a, b) == conj(inner_product(grid,
    b, a))``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    grid.spatial_axes(a)
    grid.spatial_axes(b)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b) * grid.cell_volume)


def boundary_leakage(grid: Grid, field: np.ndarray) -> float:
    """Largest |field| within two cells of any boundary, relative to max.

    Periodic transforms wrap leakage around, so confined states should
    keep this below ~1e-6.  Diagnostic only; nothing enforces it.
    """
    field = np.asarray(field)
    grid.spatial_axes(field)
    mags = np.abs(field)
    peak = float(mags.max())
    if peak == 0.0:
        return 0.0
    worst = 0.0
    for axis in range(grid.ndim):
        shell = np.take(mags, [0, 1, -2, -1], axis=axis)
        worst = max(worst, float(shell.max()))
    return worst / peak


# -- binary field dumps ---------------------------------------------
#
# Layout (little endian):
#   8 bytes   magic "QDFIELD1"
#   u64       number of spatial axes
#   per axis: u64 points, f64 length, f64 origin
#   u64       values per grid point: 1 real, 2 complex, 4 complex spinor
#   f64...    row-major over (spatial..., component), complex split
#             into (re, im) pairs


def _component_count(field: np.ndarray, grid: Grid) -> int:
    extra = field.shape[grid.ndim :]
    if extra == ():
        return 1 if not np.iscomplexobj(field) else 2
    if extra == (2,) and np.iscomplexobj(field):
        return 4
    raise ValueError(
        "field must be a real or complex scalar field, or a complex "
        f"two-component field; got trailing shape {extra}"
    )


def save_field(path, grid: Grid, field: np.ndarray) -> None:
    """Write a field and its grid to a portable binary dump."""
    field = np.asarray(field)
    grid.spatial_axes(field)
    ncomp = _component_count(field, grid)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", grid.ndim))
        for i in range(grid.ndim):
            fh.write(
                struct.pack("<Qdd", grid.shape[i], grid.lengths[i], grid.origin[i])
            )
        fh.write(struct.pack("<Q", ncomp))
        if ncomp == 1:
            flat = field.astype("<f8", copy=False)
        else:
            cplx = field.astype(np.complex128, copy=False)
            flat = np.stack(
                [cplx.real, cplx.imag], axis=-1
            )  # (..., [spinor,] 2) with re/im fastest
            flat = np.ascontiguousarray(flat, dtype="<f8")
        fh.write(np.ascontiguousarray(flat).tobytes())


def load_field(path) -> tuple[Grid, np.ndarray]:
    """Read back a dump written by :func:`save_field`."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        (ndim,) = struct.unpack("<Q", fh.read(8))
        shape, lengths, origin = [], [], []
        for _ in range(ndim):
            n, length, orig = struct.unpack("<Qdd", fh.read(24))
            shape.append(int(n))
            lengths.append(length)
            origin.append(orig)
        (ncomp,) = struct.unpack("<Q", fh.read(8))
        grid = Grid(tuple(shape), tuple(lengths), tuple(origin))
        count = grid.size * ncomp
        data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
        trailing = fh.read(1)
    if trailing:
        raise ValueError("trailing bytes after field data")
    if ncomp == 1:
        return grid, data.reshape(grid.shape).astype(np.float64)
    if ncomp == 2:
        pairs = data.reshape(grid.shape + (2,))
        return grid, (pairs[..., 0] + 1j * pairs[..., 1]).astype(np.complex128)
    if ncomp == 4:
        pairs = data.reshape(grid.shape + (2, 2))
        return grid, (pairs[..., 0] + 1j * pairs[..., 1]).astype(np.complex128)
    raise ValueError(f"unsupported component count {ncomp}")
