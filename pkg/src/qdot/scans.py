"""Experiment drivers: barrier-voltage and dot-position scans.

Each driver sweeps one scan axis, evaluates every requested method at
every point, and returns one record per (point, method).  Method
identifiers: "3d" solves the full grid, "bo_2d" the column-corrected
lateral model, "slice_interface" and "slice_maxdensity" the fixed-plane
baselines.  Device scans (tunnel, exchange) build their potentials by
superposing unit-voltage electrostatic solutions, which is exact for
the linear boundary-value problem and makes the potential error vary
smoothly along the scan axis.  Valley scans use the analytic dot
potential plus a step or alloy interface term.

Records are sorted by (scan value, method) before emission, so the
output is independent of worker scheduling.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .band import (
    BandModel,
    ValleyKernel,
    effective_potential,
    single_particle_operator,
)
from .coulomb2e import CoulombKernel, two_electron_operator
from .eigen import lowest_eigenpairs
from .electrostatics import (
    GATE_NAMES,
    SolverSettings,
    build_scan_device,
    electron_potential_energy,
    solve_laplace,
)
from .grid import Grid
from .materials import (
    DotPotentialSpec,
    SiGeSpec,
    StepInterfaceSpec,
    dot_potential,
    sample_sige_potential,
    step_interface_potential,
)
from .reduce import (
    assemble_valley_h2d,
    bo_charge_potential,
    slice_potential,
    two_lowest_valley_states,
    valley_fields,
)
from .valleytools import (
    UndefinedPhaseError,
    extract_phase_fourier,
    unwrap_phases,
    valley_split_from_levels,
)

__all__ = [
    "CSV_HEADER",
    "CHARGE_METHODS",
    "VALLEY_METHODS",
    "ScanConfig",
    "ScanRecord",
    "scan_values",
    "tunnel_coupling",
    "minimize_gap",
    "single_electron_energies",
    "run_tunnel_scan",
    "run_exchange_scan",
    "run_valley_scan",
    "run_scan",
    "tunnel_preset",
    "exchange_preset",
    "valley_step_preset",
    "valley_sige_preset",
    "write_records_csv",
    "write_timings_csv",
]

CSV_HEADER = (
    "scan_value",
    "method",
    "E0_meV",
    "E1_meV",
    "observable_name",
    "observable_value",
    "phase_rad",
    "residual",
    "optimizer_iters",
    "wall_time_s",
)

CHARGE_METHODS = ("3d", "slice_interface", "slice_maxdensity", "bo_2d")
VALLEY_METHODS = ("3d", "bo_2d")

_EXPERIMENT_METHODS = {
    "tunnel": CHARGE_METHODS,
    "exchange": CHARGE_METHODS,
    "valley_step": VALLEY_METHODS,
    "valley_sige": VALLEY_METHODS,
}

# shared domain for both valley experiments: 1 nm lateral cells, 0.0675
# nm vertical cells (fine enough for the k0 oscillation), dot centers
# scanned well inside the x extent
VALLEY_GRID = Grid((30, 10, 200), (30.0, 20.0, 13.5), (-15.0, -10.0, -10.75))

# two-electron 3D runs use a coarsened lateral grid (double x spacing,
# three central y rows) on the same vertical axis as the device
EXCHANGE_GRID_3D = Grid((30, 3, 24), (120.0, 7.2, 12.0), (-58.0, -2.4, -10.0))

_OBSERVABLES = {
    "t": lambda e0, e1: abs(e1 - e0) / 2.0,
    "J": lambda e0, e1: abs(e1 - e0),
    "splitting": lambda e0, e1: e1 - e0,
}


@dataclass(frozen=True)
class ScanConfig:
    """One scan: the experiment, its methods, and the swept axis.

    The axis is gate voltage in mV for device experiments and the dot
    center x0 in nm for valley experiments.  ``variant`` selects the
    interface profile of the device presets; ``sige_seed`` freezes the
    alloy sample shared by every point of a SiGe scan.
    """

    experiment: str
    methods: tuple[str, ...]
    start: float
    stop: float
    step: float
    variant: str = "flat"
    plunger_left_mv: float = 400.0
    plunger_right_mv: float = 400.0
    screen_mv: float = -1000.0
    sige_seed: int = 0
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 5000
    basis_size: int | None = None
    budget_mb: float = 8192.0

    def __post_init__(self) -> None:
        if self.experiment not in _EXPERIMENT_METHODS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        allowed = _EXPERIMENT_METHODS[self.experiment]
        methods = tuple(self.methods)
        if not methods:
            raise ValueError("methods must be nonempty")
        for name in methods:
            if name not in allowed:
                raise ValueError(
                    f"method {name!r} not available for {self.experiment}; "
                    f"choose from {allowed}"
                )
        if len(set(methods)) != len(methods):
            raise ValueError("methods must not repeat")
        object.__setattr__(self, "methods", methods)
        if not self.step > 0.0:
            raise ValueError("scan step must be positive")
        if self.stop < self.start:
            raise ValueError("scan range is empty")
        if self.variant not in ("flat", "stepped"):
            raise ValueError(f"unknown device variant {self.variant!r}")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")

    def solver_kwargs(self) -> dict:
        kwargs = dict(seed=self.seed, tol=self.tol, max_iter=self.max_iter)
        if self.basis_size is not None:
            kwargs["basis_size"] = self.basis_size
        return kwargs


@dataclass(frozen=True)
class ScanRecord:
    """One method evaluated at one scan point.

    ``error`` carries a per-row failure message; failed rows keep their
    numeric fields empty.  The observable always recomputes from the
    stored eigenvalues.
    """

    scan_value: float
    method: str
    e0_mev: float | None
    e1_mev: float | None
    observable_name: str
    observable_value: float | None
    phase_rad: float | None
    residual: float | None
    optimizer_iters: int | None
    wall_time_s: float | None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.observable_name not in _OBSERVABLES:
            raise ValueError(f"unknown observable {self.observable_name!r}")
        have_all = None not in (self.e0_mev, self.e1_mev, self.observable_value)
        if have_all:
            expect = _OBSERVABLES[self.observable_name](self.e0_mev, self.e1_mev)
            if self.observable_value != expect:
                raise ValueError(
                    f"observable {self.observable_value} does not recompute "
                    f"from E0={self.e0_mev}, E1={self.e1_mev}"
                )
        elif self.observable_value is not None:
            raise ValueError("observable without both eigenvalues")


def scan_values(config: ScanConfig) -> np.ndarray:
    """The swept values, inclusive of both endpoints."""
    count = int(math.floor((config.stop - config.start) / config.step + 1e-9)) + 1
    return np.round(config.start + config.step * np.arange(count), 9)


def tunnel_coupling(e0_mev: float, e1_mev: float) -> float:
    """Half the charge-space gap."""
    return abs(e1_mev - e0_mev) / 2.0


def minimize_gap(
    objective,
    lo_mv: float = 200.0,
    hi_mv: float = 500.0,
    start_mv: float | None = None,
    probe_mv: float = 30.0,
    spread_tol_mv: float = 0.1,
    gap_tol_mev: float = 1e-3,
    max_iter: int = 100,
) -> tuple[float, int]:
    """1D Nelder-Mead over a clamped voltage interval.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink
    0.5.  Stops when the simplex spread falls below ``spread_tol_mv``
    or the best objective improves by less than ``gap_tol_mev`` in one
    iteration.  Returns (best voltage, iterations); objective failures
    propagate to the caller.
    """
    if not lo_mv < hi_mv:
        raise ValueError("voltage interval is empty")

    def clamp(v: float) -> float:
        return min(max(v, lo_mv), hi_mv)

    cache: dict[float, float] = {}

    def f(v: float) -> float:
        if v not in cache:
            cache[v] = float(objective(v))
        return cache[v]

    a = clamp(start_mv if start_mv is not None else 0.5 * (lo_mv + hi_mv))
    b = clamp(a + probe_mv)
    if b == a:
        b = clamp(a - probe_mv)
    best, worst = sorted((a, b), key=f)
    iters = 0
    while iters < max_iter:
        if abs(best - worst) < spread_tol_mv:
            break
        if abs(f(best) - f(worst)) < gap_tol_mev:
            break
        reflected = clamp(best + 1.0 * (best - worst))
        if f(reflected) < f(best):
            expanded = clamp(best + 2.0 * (best - worst))
            worst = expanded if f(expanded) < f(reflected) else reflected
        elif f(reflected) < f(worst):
            worst = reflected
        else:
            contracted = clamp(best + 0.5 * (worst - best))
            if f(contracted) < f(worst):
                worst = contracted
            else:
                worst = best + 0.5 * (worst - best)
        best, worst = sorted((best, worst), key=f)
        iters += 1
    return best, iters


@lru_cache(maxsize=4)
def _unit_fields(variant: str):
    """Unit-voltage (1 V) electrostatic solutions, one per gate.

    The Laplace problem is linear in its Dirichlet values, so any gate
    assignment is an exact weighted sum of these five fields.  Solved
    tighter than the default tolerance because superposition weights
    reach a few volts.
    """
    settings = SolverSettings(convergence_tol=1e-9)
    fields = {}
    spec = None
    for name in GATE_NAMES:
        volts = {g: (1000.0 if g == name else 0.0) for g in GATE_NAMES}
        spec = build_scan_device(variant, volts)
        phi = solve_laplace(spec, settings)
        phi.flags.writeable = False
        fields[name] = phi
    return spec, fields


def _device_potential(variant: str, voltages_mv: dict) -> tuple[Grid, np.ndarray]:
    """Electron potential energy on the scan device at given voltages."""
    spec, fields = _unit_fields(variant)
    phi = np.zeros(spec.grid.shape)
    for name in GATE_NAMES:
        phi += (voltages_mv[name] / 1000.0) * fields[name]
    return spec.grid, electron_potential_energy(phi, spec)


def _plane_below(grid: Grid, height: float = 0.0) -> float:
    """Highest z cell center strictly below the reference height."""
    z = grid.axis_positions(grid.ndim - 1)
    below = z[z < height]
    if below.size == 0:
        raise ValueError("no grid plane below the interface")
    return float(below.max())


def single_electron_energies(
    method: str,
    grid: Grid,
    potential: np.ndarray,
    *,
    band: BandModel | None = None,
    density_state: np.ndarray | None = None,
    **solver_kwargs,
):
    """Lowest charge-space pair for one method.

    Returns (E0, E1, residual, ground_state); the 3D ground state is
    returned for reuse as a density reference, 2D methods return None.
    """
    band = band if band is not None else BandModel()
    if method == "3d":
        op = single_particle_operator(grid, band, potential, mode="ema")
        res = lowest_eigenpairs(op, k=2, **solver_kwargs)
        ground = res.eigenvectors[:, 0].reshape(grid.shape)
    else:
        if method == "bo_2d":
            eff = bo_charge_potential(grid, potential, _plane_below(grid), band)
        elif method == "slice_interface":
            eff = slice_potential(grid, potential, "interface", z_plane=_plane_below(grid))
        elif method == "slice_maxdensity":
            eff = slice_potential(
                grid, potential, "max_density", density_state=density_state
            )
        else:
            raise ValueError(f"unknown method {method!r}")
        op = single_particle_operator(eff.grid, band, eff.values, mode="ema")
        res = lowest_eigenpairs(op, k=2, **solver_kwargs)
        ground = None
    e0, e1 = (float(v) for v in res.eigenvalues[:2])
    return e0, e1, float(res.residuals.max()), ground


def _pair_energies(
    method: str,
    grid: Grid,
    potential: np.ndarray,
    config: ScanConfig,
    band: BandModel,
    density_state: np.ndarray | None,
):
    """Two-electron ground pair for one method; returns (E0, E1, residual)."""
    if method == "3d":
        single = single_particle_operator(grid, band, potential, mode="ema")
        kernel = CoulombKernel(dimensionality="3d")
        pair_grid = grid
    else:
        if method == "bo_2d":
            eff = bo_charge_potential(grid, potential, _plane_below(grid), band)
        elif method == "slice_interface":
            eff = slice_potential(grid, potential, "interface", z_plane=_plane_below(grid))
        elif method == "slice_maxdensity":
            eff = slice_potential(
                grid, potential, "max_density", density_state=density_state
            )
        else:
            raise ValueError(f"unknown method {method!r}")
        single = single_particle_operator(eff.grid, band, eff.values, mode="ema")
        kernel = CoulombKernel(dimensionality="2d")
        pair_grid = eff.grid
    pair = two_electron_operator(
        single, pair_grid, kernel=kernel, budget_mb=config.budget_mb
    )
    kwargs = config.solver_kwargs()
    if method == "3d" and config.basis_size is None:
        # pair vectors on the 3D grid run 75 MB each; a slim restart
        # basis keeps the working set near 2 GB, probe included
        kwargs["basis_size"] = 12
    res = lowest_eigenpairs(pair, k=2, **kwargs)
    e0, e1 = (float(v) for v in res.eigenvalues[:2])
    return e0, e1, float(res.residuals.max())


def _worker_count() -> int:
    env = os.environ.get("QDOT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"QDOT_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _map_points(fn, values, workers: int) -> list:
    if workers <= 1 or len(values) <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, values))


def _finish(per_point: list[list[ScanRecord]]) -> list[ScanRecord]:
    records = [rec for point in per_point for rec in point]
    records.sort(key=lambda r: (r.scan_value, r.method))
    return records


def _error_record(
    scan_value: float, method: str, name: str, exc: Exception
) -> ScanRecord:
    return ScanRecord(
        scan_value=float(scan_value),
        method=method,
        e0_mev=None,
        e1_mev=None,
        observable_name=name,
        observable_value=None,
        phase_rad=None,
        residual=None,
        optimizer_iters=None,
        wall_time_s=None,
        error=f"{type(exc).__name__}: {exc}",
    )


def run_tunnel_scan(config: ScanConfig) -> list[ScanRecord]:
    """Barrier sweep with per-point right-plunger retuning.

    The plunger that centers the anticrossing is found once per barrier
    value, with the 3D gap as the objective when that method is
    requested (the reduced gap otherwise), and shared by every method's
    final evaluation.
    """
    if config.experiment != "tunnel":
        raise ValueError("config does not describe a tunnel scan")
    band = BandModel()
    _unit_fields(config.variant)

    def voltages(barrier_mv: float, right_mv: float) -> dict:
        return {
            "P1": config.plunger_left_mv,
            "P2": float(barrier_mv),
            "P3": float(right_mv),
            "C1": config.screen_mv,
            "C2": config.screen_mv,
        }

    objective_method = "3d" if "3d" in config.methods else "bo_2d"
    # the retune only needs the gap's ordering, so it runs with a loose
    # tolerance and no multiplicity probe
    retune_kwargs = dict(
        seed=config.seed, tol=1e-6, max_iter=config.max_iter,
        verify_multiplicity=False, check_hermitian=False,
    )

    def point(barrier: float) -> list[ScanRecord]:
        def gap(right_mv: float) -> float:
            grid, pot = _device_potential(config.variant, voltages(barrier, right_mv))
            e0, e1, _, _ = single_electron_energies(
                objective_method, grid, pot, band=band, **retune_kwargs
            )
            return e1 - e0

        try:
            tuned_mv, iters = minimize_gap(
                gap, 200.0, 500.0, start_mv=config.plunger_right_mv
            )
            grid, pot = _device_potential(config.variant, voltages(barrier, tuned_mv))
        except Exception as exc:
            return [_error_record(barrier, m, "t", exc) for m in config.methods]

        records = []
        ground_3d = None
        ordered = sorted(config.methods, key=lambda m: m != "3d")
        for method in ordered:
            begin = time.perf_counter()
            try:
                e0, e1, residual, ground = single_electron_energies(
                    method,
                    grid,
                    pot,
                    band=band,
                    density_state=ground_3d,
                    **config.solver_kwargs(),
                )
                if ground is not None:
                    ground_3d = ground
                records.append(
                    ScanRecord(
                        scan_value=float(barrier),
                        method=method,
                        e0_mev=e0,
                        e1_mev=e1,
                        observable_name="t",
                        observable_value=tunnel_coupling(e0, e1),
                        phase_rad=None,
                        residual=residual,
                        optimizer_iters=iters,
                        wall_time_s=time.perf_counter() - begin,
                    )
                )
            except Exception as exc:
                records.append(_error_record(barrier, method, "t", exc))
        return records

    return _finish(_map_points(point, scan_values(config), _worker_count()))


def run_exchange_scan(config: ScanConfig) -> list[ScanRecord]:
    """Barrier sweep of the two-electron splitting at fixed plungers.

    Every method is evaluated on potentials interpolated to the
    coarsened two-electron grid, so the comparison isolates the
    vertical treatment rather than lateral resolution.
    """
    if config.experiment != "exchange":
        raise ValueError("config does not describe an exchange scan")
    band = BandModel()
    spec, _ = _unit_fields(config.variant)
    device_grid = spec.grid
    axes = tuple(device_grid.axis_positions(i) for i in range(3))
    targets = [EXCHANGE_GRID_3D.axis_positions(i) for i in range(3)]
    mesh = np.stack(np.meshgrid(*targets, indexing="ij"), axis=-1)

    def point(barrier: float) -> list[ScanRecord]:
        try:
            _, pot_dev = _device_potential(
                config.variant,
                {
                    "P1": config.plunger_left_mv,
                    "P2": float(barrier),
                    "P3": config.plunger_right_mv,
                    "C1": config.screen_mv,
                    "C2": config.screen_mv,
                },
            )
            interp = RegularGridInterpolator(axes, pot_dev)
            pot = interp(mesh)
        except Exception as exc:
            return [_error_record(barrier, m, "J", exc) for m in config.methods]

        records = []
        ground_3d = None
        for method in config.methods:
            begin = time.perf_counter()
            try:
                if method == "slice_maxdensity" and ground_3d is None:
                    # the density reference is a cheap one-electron solve
                    _, _, _, ground_3d = single_electron_energies(
                        "3d", EXCHANGE_GRID_3D, pot, band=band,
                        seed=config.seed, tol=1e-6,
                        verify_multiplicity=False, check_hermitian=False,
                    )
                e0, e1, residual = _pair_energies(
                    method, EXCHANGE_GRID_3D, pot, config, band, ground_3d
                )
                records.append(
                    ScanRecord(
                        scan_value=float(barrier),
                        method=method,
                        e0_mev=e0,
                        e1_mev=e1,
                        observable_name="J",
                        observable_value=abs(e1 - e0),
                        phase_rad=None,
                        residual=residual,
                        optimizer_iters=None,
                        wall_time_s=time.perf_counter() - begin,
                    )
                )
            except Exception as exc:
                records.append(_error_record(barrier, method, "J", exc))
        return records

    workers = 1 if "3d" in config.methods else _worker_count()
    return _finish(_map_points(point, scan_values(config), workers))


@lru_cache(maxsize=2)
def _sige_sample(seed: int) -> np.ndarray:
    field = sample_sige_potential(SiGeSpec(seed=seed), VALLEY_GRID)
    field.flags.writeable = False
    return field


def _lateral_sum_profile(grid: Grid, state: np.ndarray) -> tuple[Grid, np.ndarray]:
    """Collapse a 3D state to its laterally summed vertical profile.

    Valid for valley-pair states, whose lateral factor is nodeless, so
    the columns add coherently after the solver's global phase.
    """
    zgrid = Grid((grid.shape[2],), (grid.lengths[2],), (grid.origin[2],))
    return zgrid, state.sum(axis=(0, 1))


def density_weighted_phase(fields, ground_2d: np.ndarray) -> float:
    """Dot-averaged valley phase of a reduced two-component state.

    Averages the per-column coupling phasor over the ground density and
    returns the half-angle, matching the single-column extractors.
    """
    dens = np.abs(ground_2d.reshape(fields.grid.shape + (2,))) ** 2
    dens = dens.sum(axis=-1)
    weight = np.where(fields.phase_defined, dens, 0.0)
    total = weight.sum()
    if total <= 0.0:
        raise UndefinedPhaseError("no column has a defined valley phase")
    phasor = np.sum(weight * np.exp(1j * np.where(fields.phase_defined, fields.phi, 0.0)))
    if abs(phasor) < 1e-12 * total:
        raise UndefinedPhaseError("valley phasors cancel across the dot")
    return 0.5 * float(np.angle(phasor))


def run_valley_scan(
    config: ScanConfig, profiles: dict | None = None
) -> list[ScanRecord]:
    """Dot-position sweep of valley splitting and phase.

    Both methods run per point: the reduced two-component model and the
    full-grid solve, the latter's phase read from the Fourier content
    of the laterally summed excited state.  Passing a dict as
    ``profiles`` collects that profile per scan value, keyed by x0, so
    callers can study the excited states without re-solving.
    """
    if config.experiment not in ("valley_step", "valley_sige"):
        raise ValueError("config does not describe a valley scan")
    band = BandModel()
    kernel = ValleyKernel()
    grid = VALLEY_GRID
    stepped = config.experiment == "valley_step"
    if stepped:
        # the sharp wall keeps the sub-cell step height exact; the
        # kernel dressing is skipped because it acts on the wall itself
        added = step_interface_potential(
            StepInterfaceSpec(profile="sharp"), grid
        )
        use_filter = False
    else:
        added = _sige_sample(config.sige_seed)
        use_filter = True

    def point(x0: float) -> list[ScanRecord]:
        pot = dot_potential(DotPotentialSpec(x0_nm=float(x0)), grid) + added
        records = []
        for method in config.methods:
            begin = time.perf_counter()
            try:
                if method == "bo_2d":
                    fields = valley_fields(
                        grid, pot, kernel, band,
                        c0_filter=use_filter, unwrap_axis=0,
                    )
                    handle = assemble_valley_h2d(
                        grid.drop_axis(2), fields,
                        np.zeros(grid.shape[:2]), band,
                    )
                    res = two_lowest_valley_states(
                        handle, **config.solver_kwargs()
                    )
                    try:
                        phase = density_weighted_phase(
                            fields, res.eigenvectors[:, 0]
                        )
                    except UndefinedPhaseError:
                        phase = None
                elif method == "3d":
                    pot3 = (
                        effective_potential(kernel, grid, pot)
                        if use_filter
                        else pot
                    )
                    op = single_particle_operator(grid, band, pot3, mode="gef")
                    res = lowest_eigenpairs(op, k=2, **config.solver_kwargs())
                    zgrid, profile = _lateral_sum_profile(
                        grid, res.eigenvectors[:, 1].reshape(grid.shape)
                    )
                    if profiles is not None:
                        profiles[float(x0)] = (zgrid, profile)
                    try:
                        phase = float(
                            extract_phase_fourier(
                                zgrid, profile, band.k0_invnm
                            ).phase_rad
                        )
                    except UndefinedPhaseError:
                        phase = None
                else:
                    raise ValueError(f"unknown method {method!r}")
                e0, e1 = (float(v) for v in res.eigenvalues[:2])
                records.append(
                    ScanRecord(
                        scan_value=float(x0),
                        method=method,
                        e0_mev=e0,
                        e1_mev=e1,
                        observable_name="splitting",
                        observable_value=valley_split_from_levels(e0, e1),
                        phase_rad=phase,
                        residual=float(res.residuals.max()),
                        optimizer_iters=None,
                        wall_time_s=time.perf_counter() - begin,
                    )
                )
            except Exception as exc:
                records.append(_error_record(x0, method, "splitting", exc))
        return records

    return _finish(_map_points(point, scan_values(config), _worker_count()))


_RUNNERS = {
    "tunnel": run_tunnel_scan,
    "exchange": run_exchange_scan,
    "valley_step": run_valley_scan,
    "valley_sige": run_valley_scan,
}


def run_scan(config: ScanConfig) -> list[ScanRecord]:
    """Dispatch a scan to its experiment driver."""
    return _RUNNERS[config.experiment](config)


def tunnel_preset(variant: str = "flat", **overrides) -> ScanConfig:
    """Barrier sweep -120 to 60 mV in 10 mV steps, all four methods."""
    base = dict(
        experiment="tunnel", methods=CHARGE_METHODS,
        start=-120.0, stop=60.0, step=10.0, variant=variant,
    )
    base.update(overrides)
    return ScanConfig(**base)


def exchange_preset(variant: str = "flat", **overrides) -> ScanConfig:
    """Barrier sweep -200 to -25 mV in 12.5 mV steps."""
    base = dict(
        experiment="exchange", methods=("3d", "bo_2d"),
        start=-200.0, stop=-25.0, step=12.5, variant=variant,
    )
    base.update(overrides)
    return ScanConfig(**base)


def valley_step_preset(**overrides) -> ScanConfig:
    """Dot center swept across the atomic step, -14 to 14 nm by 1 nm."""
    base = dict(
        experiment="valley_step", methods=VALLEY_METHODS,
        start=-14.0, stop=14.0, step=1.0,
    )
    base.update(overrides)
    return ScanConfig(**base)


def valley_sige_preset(desk: bool = False, **overrides) -> ScanConfig:
    """Dot center swept over the alloy, -11 to 8 nm.

    The full preset steps 0.25 nm (77 points); the desk preset steps
    1 nm (20 points) for quick runs at the same endpoints.
    """
    base = dict(
        experiment="valley_sige", methods=VALLEY_METHODS,
        start=-11.0, stop=8.0, step=(1.0 if desk else 0.25),
    )
    base.update(overrides)
    return ScanConfig(**base)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def write_records_csv(path, records: list[ScanRecord]) -> None:
    """Emit the scan table; reruns with the same records are identical.

    The wall-time column stays empty because measured times differ
    between byte-identical runs; ``write_timings_csv`` carries them.
    """
    ordered = sorted(records, key=lambda r: (r.scan_value, r.method))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in ordered:
            writer.writerow(
                [
                    _cell(rec.scan_value),
                    rec.method,
                    _cell(rec.e0_mev),
                    _cell(rec.e1_mev),
                    rec.observable_name,
                    _cell(rec.observable_value),
                    _cell(rec.phase_rad),
                    _cell(rec.residual),
                    _cell(rec.optimizer_iters),
                    "",
                ]
            )


def write_timings_csv(path, records: list[ScanRecord]) -> None:
    """Per-row wall times and errors, kept out of the reproducible table."""
    ordered = sorted(records, key=lambda r: (r.scan_value, r.method))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scan_value", "method", "wall_time_s", "error"])
        for rec in ordered:
            writer.writerow(
                [
                    _cell(rec.scan_value),
                    rec.method,
                    _cell(rec.wall_time_s),
                    rec.error or "",
                ]
            )


def phase_swing(records: list[ScanRecord], method: str) -> float:
    """Peak-to-peak unwrapped phase over one method's defined rows."""
    ordered = [
        r for r in sorted(records, key=lambda r: r.scan_value)
        if r.method == method and r.phase_rad is not None
    ]
    if len(ordered) < 2:
        raise ValueError(f"not enough defined phases for method {method!r}")
    phases = unwrap_phases([r.phase_rad for r in ordered], period=np.pi)
    return float(phases.max() - phases.min())
