"""Gate electrostatics: variable-permittivity Laplace solves plus band offsets.

The potential is relaxed with red-black successive over-relaxation on a
7-point stencil whose face coefficients are harmonic means of the cell
permittivities, so flux stays continuous across dielectric jumps.  Gate
cells are Dirichlet (held at their voltage exactly), every non-gate
boundary face is zero-flux Neumann.  The sweep schedule is fixed, which
makes the output deterministic for a given device and settings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EPS_SI, EPS_SIO2
from .grid import Grid

__all__ = [
    "GateBox",
    "DeviceSpec",
    "SolverSettings",
    "ConvergenceError",
    "make_device",
    "solve_laplace",
    "electron_potential_energy",
    "normalized_box_flux",
    "build_benchmark_device",
    "build_scan_device",
    "device_from_recipe",
    "GATE_NAMES",
]

EPS_SILICON = EPS_SI
EPS_OXIDE = EPS_SIO2
BAND_OFFSET_MEV = 3000.0

GATE_NAMES = ("P1", "P2", "P3", "C1", "C2")


class ConvergenceError(RuntimeError):
    """Relaxation hit the iteration cap; carries the last residual."""

    def __init__(self, iterations: int, final_residual: float, tol: float):
        self.iterations = iterations
        self.final_residual = float(final_residual)
        super().__init__(
            f"no convergence after {iterations} sweeps: "
            f"residual {final_residual:.3e} V > tol {tol:.3e} V"
        )


@dataclass(frozen=True)
class GateBox:
    """An axis-aligned metallic block held at a fixed voltage.

    Corners are in nm, voltage in mV.  A grid cell belongs to the gate
    when its center lies inside the closed box.
    """

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]
    voltage_mv: float

    def __post_init__(self) -> None:
        lo = tuple(float(c) for c in self.min_corner)
        hi = tuple(float(c) for c in self.max_corner)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("gate corners must have three components")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("gate box needs min_corner < max_corner")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)
        object.__setattr__(self, "voltage_mv", float(self.voltage_mv))


@dataclass(frozen=True)
class DeviceSpec:
    """Immutable gate layout plus material stack on a 3D grid.

    ``interface_height`` is h(x, y) in nm; cells with z > h (strictly)
    are oxide and pick up ``band_offset_mev`` in the electron potential.
    ``recipe`` records how a preset builder made the device, so the
    layout can round-trip through a config file; hand-built specs leave
    it None.
    """

    grid: Grid
    gates: tuple[GateBox, ...]
    permittivity_map: np.ndarray
    interface_height: np.ndarray
    band_offset_mev: float = BAND_OFFSET_MEV
    eps_semiconductor: float = EPS_SILICON
    eps_oxide: float = EPS_OXIDE
    recipe: tuple | None = None

    def __post_init__(self) -> None:
        if self.grid.ndim != 3:
            raise ValueError("device grid must be three-dimensional")
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.permittivity_map.shape != self.grid.shape:
            raise ValueError("permittivity map must live on the device grid")
        if self.interface_height.shape != self.grid.shape[:2]:
            raise ValueError("interface height must be a lateral (x, y) map")
        if not np.all(self.permittivity_map > 0.0):
            raise ValueError("permittivity must be positive everywhere")
        lo = self.grid.origin
        hi = tuple(o + l for o, l in zip(self.grid.origin, self.grid.lengths))
        for gate in self.gates:
            inside = all(
                gate.max_corner[a] >= lo[a] and gate.min_corner[a] <= hi[a]
                for a in range(3)
            )
            if not inside:
                raise ValueError(f"gate box {gate.min_corner} misses the domain")


@dataclass(frozen=True)
class SolverSettings:
    """SOR controls; the residual tolerance is in volts."""

    overrelaxation: float = 1.8
    max_iterations: int = 200_000
    convergence_tol: float = 1e-7

    def __post_init__(self) -> None:
        if not 1.0 <= self.overrelaxation < 2.0:
            raise ValueError("overrelaxation must lie in [1, 2)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.convergence_tol > 0.0:
            raise ValueError("convergence_tol must be positive")


def make_device(
    grid: Grid,
    gates,
    interface_height=0.0,
    eps_semiconductor: float = EPS_SILICON,
    eps_oxide: float = EPS_OXIDE,
    band_offset_mev: float = BAND_OFFSET_MEV,
    recipe: tuple | None = None,
) -> DeviceSpec:
    """Build a DeviceSpec with the two-layer permittivity stack.

    ``interface_height`` may be a scalar or an (nx, ny) array; cells
    strictly above it get the oxide permittivity, everything else the
    semiconductor value.
    """
    if grid.ndim != 3:
        raise ValueError("device grid must be three-dimensional")
    height = np.broadcast_to(
        np.asarray(interface_height, dtype=float), grid.shape[:2]
    ).copy()
    z = grid.axis_positions(2)
    above = z[None, None, :] > height[:, :, None]
    eps = np.where(above, float(eps_oxide), float(eps_semiconductor))
    eps.setflags(write=False)
    height.setflags(write=False)
    return DeviceSpec(
        grid=grid,
        gates=tuple(gates),
        permittivity_map=eps,
        interface_height=height,
        band_offset_mev=float(band_offset_mev),
        eps_semiconductor=float(eps_semiconductor),
        eps_oxide=float(eps_oxide),
        recipe=recipe,
    )


def _rasterize_gates(spec: DeviceSpec):
    """Dirichlet mask and held potential (volts) from the gate list.

    Later gates overwrite earlier ones where boxes overlap.
    """
    grid = spec.grid
    mask = np.zeros(grid.shape, dtype=bool)
    values = np.zeros(grid.shape)
    axes = [grid.axis_positions(a) for a in range(3)]
    for gate in spec.gates:
        per_axis = [
            (axes[a] >= gate.min_corner[a]) & (axes[a] <= gate.max_corner[a])
            for a in range(3)
        ]
        box = (
            per_axis[0][:, None, None]
            & per_axis[1][None, :, None]
            & per_axis[2][None, None, :]
        )
        mask |= box
        values[box] = gate.voltage_mv * 1e-3
    return mask, values


def _face_conductances(spec: DeviceSpec):
    """Harmonic-mean permittivity times face area over spacing, per axis."""
    eps = spec.permittivity_map
    hx, hy, hz = spec.grid.spacing
    areas = (hy * hz / hx, hx * hz / hy, hx * hy / hz)
    out = []
    for axis, area in enumerate(areas):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a, b = eps[tuple(lo)], eps[tuple(hi)]
        out.append(area * 2.0 * a * b / (a + b))
    return out


def _neighbor_sum(phi: np.ndarray, cond) -> np.ndarray:
    out = np.zeros_like(phi)
    for axis in range(3):
        c = cond[axis]
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        out[lo] += c * phi[hi]
        out[hi] += c * phi[lo]
    return out


def solve_laplace(
    spec: DeviceSpec,
    settings: SolverSettings | None = None,
    residual_log: list | None = None,
) -> np.ndarray:
    """Relax the variable-coefficient Laplace equation; returns volts.

    The residual is the Gauss-Seidel displacement |sum(a*phi_nb)/sum(a)
    - phi| maximized over non-gate cells, already in volts.  Raises
    ConvergenceError when it fails to drop below the tolerance.  Pass a
    list as ``residual_log`` to record the per-sweep residual history.
    """
    if settings is None:
        settings = SolverSettings()
    mask, held = _rasterize_gates(spec)
    if not mask.any():
        raise ValueError("no grid cell falls inside any gate box")
    cond = _face_conductances(spec)
    denom = _neighbor_sum(np.ones(spec.grid.shape), cond)

    # Starting from the mean gate voltage keeps the whole iteration
    # equivariant under a global voltage shift, so gauge invariance
    # holds to rounding rather than to the stopping tolerance.
    phi = np.full(spec.grid.shape, held[mask].mean())
    phi[mask] = held[mask]

    mesh = np.indices(spec.grid.shape).sum(axis=0)
    colors = [((mesh % 2 == p) & ~mask) for p in (0, 1)]
    free = ~mask
    omega = settings.overrelaxation

    for sweep in range(settings.max_iterations):
        for color in colors:
            target = _neighbor_sum(phi, cond) / denom
            phi[color] += omega * (target[color] - phi[color])
        target = _neighbor_sum(phi, cond) / denom
        residual = float(np.abs(target[free] - phi[free]).max())
        if residual_log is not None:
            residual_log.append(residual)
        if residual < settings.convergence_tol:
            return phi
    raise ConvergenceError(settings.max_iterations, residual, settings.convergence_tol)


def electron_potential_energy(phi: np.ndarray, spec: DeviceSpec) -> np.ndarray:
    """Electron energy U = -e*phi in meV, plus the band offset above h(x,y).

    The offset applies on the strict half-open side z > h, so a cell
    whose center sits exactly on the interface stays semiconductor.
    """
    if phi.shape != spec.grid.shape:
        raise ValueError("potential must live on the device grid")
    z = spec.grid.axis_positions(2)
    above = z[None, None, :] > spec.interface_height[:, :, None]
    return -1e3 * phi + np.where(above, spec.band_offset_mev, 0.0)


def normalized_box_flux(spec: DeviceSpec, phi: np.ndarray, lo, hi) -> float:
    """Net dielectric flux out of the cell box lo..hi (exclusive), in volts.

    The raw surface flux is normalized by the total surface conductance,
    which puts it on the same scale as the solver residual; for a
    converged solution it telescopes to a residual average.
    """
    lo = tuple(int(i) for i in lo)
    hi = tuple(int(i) for i in hi)
    for a in range(3):
        if not 0 < lo[a] < hi[a] < spec.grid.shape[a]:
            raise ValueError("flux box must be interior with lo < hi")
    cond = _face_conductances(spec)
    flux = 0.0
    weight = 0.0
    for axis in range(3):
        sides = [slice(lo[a], hi[a]) for a in range(3)]
        for face_index, inner_i, outer_i in (
            (lo[axis] - 1, lo[axis], lo[axis] - 1),
            (hi[axis] - 1, hi[axis] - 1, hi[axis]),
        ):
            sel = list(sides)
            sel[axis] = face_index
            c = cond[axis][tuple(sel)]
            inner = list(sides)
            outer = list(sides)
            inner[axis] = inner_i
            outer[axis] = outer_i
            flux += float(np.sum(c * (phi[tuple(outer)] - phi[tuple(inner)])))
            weight += float(np.sum(c))
    return flux / weight


# -- device presets ---------------------------------------------------


def _require_voltages(voltages) -> dict[str, float]:
    got = dict(voltages)
    missing = [k for k in GATE_NAMES if k not in got]
    extra = [k for k in got if k not in GATE_NAMES]
    if missing or extra:
        raise ValueError(
            f"gate voltages must name exactly {GATE_NAMES}; "
            f"missing {missing}, unexpected {extra}"
        )
    return {k: float(got[k]) for k in GATE_NAMES}


def _stepped_height(x: np.ndarray) -> np.ndarray:
    """Three interface sections: +0.5 nm, -0.5 nm, then 0 along x."""
    h = np.zeros_like(x)
    h[x < -10.0] = 0.5
    h[(x >= -10.0) & (x < 10.0)] = -0.5
    return h


def _interface_for(variant: str, grid: Grid) -> np.ndarray:
    if variant == "flat":
        return np.zeros(grid.shape[:2])
    if variant == "stepped":
        x = grid.axis_positions(0)
        return np.broadcast_to(
            _stepped_height(x)[:, None], grid.shape[:2]
        ).copy()
    raise ValueError(f"unknown device variant {variant!r}")


def build_benchmark_device(variant: str, voltages) -> DeviceSpec:
    """Five-gate 160 x 160 x 50 nm device at 1 nm / 0.5 nm resolution.

    Plungers P1/P3 (25 x 60 x 10 nm) sit at x = -30/+30 nm, the barrier
    P2 at x = 0 with its underside 5 nm closer to the interface, and the
    confinement gates C1/C2 (160 x 30 x 10 nm) at y = -50/+50 nm.  Gate
    bottoms are 10 nm (P2: 5 nm) above the nominal interface plane.
    """
    volts = _require_voltages(voltages)
    grid = Grid((160, 160, 100), (160.0, 160.0, 50.0), (-80.0, -80.0, -25.0))
    gates = (
        GateBox((-42.5, -30.0, 10.0), (-17.5, 30.0, 20.0), volts["P1"]),
        GateBox((-12.5, -30.0, 5.0), (12.5, 30.0, 15.0), volts["P2"]),
        GateBox((17.5, -30.0, 10.0), (42.5, 30.0, 20.0), volts["P3"]),
        GateBox((-80.0, -65.0, 10.0), (80.0, -35.0, 20.0), volts["C1"]),
        GateBox((-80.0, 35.0, 10.0), (80.0, 65.0, 20.0), volts["C2"]),
    )
    recipe = ("benchmark", variant, tuple(sorted(volts.items())))
    return make_device(
        grid, gates, _interface_for(variant, grid), recipe=recipe
    )


def build_scan_device(variant: str, voltages) -> DeviceSpec:
    """Small five-gate device for barrier scans: 120 x 24 x 12 nm.

    The 60 x 10 x 24 grid doubles as the quantum grid, so the solved
    potential feeds the eigenproblems with no resampling, and the z
    lattice runs -10.0 .. 1.5 nm in half-nm planes so the fixed-slice
    heights land on grid planes.  The gates are narrow fingers in the
    top plane: 8 nm wide plungers at x = -16/+16 nm, the barrier finger
    at x = 0, and screening strips along both y edges.  Narrow features
    make the gate pattern decay within a few nm of depth, which keeps
    the wells gentle (tens of meV) and the interdot barrier in the
    range where the scanned finger modulates tunneling exponentially.
    """
    volts = _require_voltages(voltages)
    grid = Grid((60, 10, 24), (120.0, 24.0, 12.0), (-59.0, -10.8, -10.0))
    top = (1.25, 1.75)
    gates = (
        GateBox((-20.0, -5.0, top[0]), (-12.0, 5.0, top[1]), volts["P1"]),
        GateBox((-4.0, -5.0, top[0]), (4.0, 5.0, top[1]), volts["P2"]),
        GateBox((12.0, -5.0, top[0]), (20.0, 5.0, top[1]), volts["P3"]),
        GateBox((-60.0, -12.0, top[0]), (60.0, -8.0, top[1]), volts["C1"]),
        GateBox((-60.0, 8.0, top[0]), (60.0, 12.0, top[1]), volts["C2"]),
    )
    recipe = ("scan", variant, tuple(sorted(volts.items())))
    return make_device(
        grid, gates, _interface_for(variant, grid), recipe=recipe
    )


_PRESETS = {"benchmark": build_benchmark_device, "scan": build_scan_device}


def device_from_recipe(preset: str, variant: str, voltages) -> DeviceSpec:
    """Rebuild a preset device; inverse of the ``recipe`` field."""
    try:
        builder = _PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown device preset {preset!r}") from None
    return builder(variant, dict(voltages))
