"""Two-electron operator tests: dense oracle, SWAP symmetry, budgets."""

import numpy as np
import pytest

from qdot.band import BandModel, single_particle_operator
from qdot.constants import COULOMB_MEV_NM
from qdot.coulomb2e import (
    CoulombKernel,
    MemoryBudgetError,
    coulomb_diagonal,
    coulomb_energy,
    exchange_coupling,
    pair_vector_megabytes,
    swap_expectation,
    two_electron_operator,
)
from qdot.eigen import EigenResult, lowest_eigenpairs
from qdot.grid import Grid
from qdot.reduce import ValleyFields, assemble_valley_h2d

KERNEL_2D = CoulombKernel(dimensionality="2d")


def dense_matrix(handle):
    m = handle.dimension
    cols = [handle.apply(np.eye(m, dtype=complex)[:, j]) for j in range(m)]
    return np.stack(cols, axis=1)


def small_pair_problem():
    grid = Grid((6, 6), (6.0, 6.0), (-3.0, -3.0))
    x, y = grid.position_mesh()
    v = 1.0 * (x**2 + y**2)
    single = single_particle_operator(grid, BandModel(), v, mode="ema")
    return grid, single


def test_kernel_validation():
    with pytest.raises(ValueError, match="delta"):
        CoulombKernel(delta_nm=0.0)
    with pytest.raises(ValueError, match="dimensionality"):
        CoulombKernel(dimensionality="4d")
    with pytest.raises(ValueError, match="form"):
        CoulombKernel(form="bare")
    with pytest.raises(ValueError, match="thickness"):
        CoulombKernel(form="thickness", dimensionality="3d")
    with pytest.raises(ValueError, match="thickness"):
        CoulombKernel(form="thickness", dimensionality="2d", thickness_nm=0.0)


def test_coulomb_energy_reference_values():
    k = CoulombKernel()
    coincident = coulomb_energy(k, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert abs(coincident - COULOMB_MEV_NM / 11.9 / 0.1) < 1e-9
    assert abs(coincident - 1210.0) < 1.0
    apart = coulomb_energy(k, [0.0, 0.0, 0.0], [9.9, 0.0, 0.0])
    assert abs(apart - COULOMB_MEV_NM / 11.9 / 10.0) < 1e-9
    assert abs(apart - 12.1) < 0.01


def test_coulomb_energy_symmetry_and_shapes():
    k = CoulombKernel(dimensionality="2d")
    rng = np.random.default_rng(7)
    r1 = rng.normal(size=(5, 2))
    r2 = rng.normal(size=(5, 2))
    assert np.allclose(coulomb_energy(k, r1, r2), coulomb_energy(k, r2, r1))
    with pytest.raises(ValueError, match="components"):
        coulomb_energy(k, np.zeros(3), np.zeros(3))


def test_kernel_forms_differ_only_in_softening():
    soft = CoulombKernel(dimensionality="2d")
    quad = CoulombKernel(dimensionality="2d", form="quadrature")
    thick = CoulombKernel(dimensionality="2d", form="thickness", thickness_nm=1.5)
    d = 0.1
    scale = COULOMB_MEV_NM / 11.9
    assert abs(soft.of_distance(d) - scale / 0.2) < 1e-9
    assert abs(quad.of_distance(d) - scale / np.sqrt(0.02)) < 1e-9
    assert abs(thick.of_distance(0.0) - scale / 1.5) < 1e-9


def test_coulomb_diagonal_table():
    grid = Grid((4, 4), (4.0, 4.0), (0.0, 0.0))
    w = coulomb_diagonal(KERNEL_2D, grid)
    assert w.shape == (16, 16)
    assert np.allclose(w, w.T)
    assert np.allclose(np.diag(w), COULOMB_MEV_NM / 11.9 / 0.1)
    with pytest.raises(ValueError, match="grid"):
        coulomb_diagonal(CoulombKernel(), grid)  # 3d kernel, 2d grid


def test_batched_apply_matches_loop():
    grid, single = small_pair_problem()
    rng = np.random.default_rng(3)
    mat = rng.normal(size=(single.dimension, 5)) + 1j * rng.normal(
        size=(single.dimension, 5)
    )
    batched = single.apply_batch(mat)
    looped = np.stack([single.apply(mat[:, j]) for j in range(5)], axis=1)
    assert np.max(np.abs(batched - looped)) < 1e-12


def test_pair_dense_oracle():
    grid, single = small_pair_problem()
    pair = two_electron_operator(single, grid, KERNEL_2D)
    h1 = dense_matrix(single)
    w = coulomb_diagonal(KERNEL_2D, grid)
    eye = np.eye(single.dimension)
    h2 = np.kron(h1, eye) + np.kron(eye, h1) + np.diag(w.ravel())
    exact = np.linalg.eigvalsh(h2)[:3]
    result = lowest_eigenpairs(pair, k=3, tol=1e-10, seed=1)
    assert np.max(np.abs(result.eigenvalues - exact)) < 1e-8


def test_pair_hermiticity_and_swap_commutation():
    grid, single = small_pair_problem()
    pair = two_electron_operator(single, grid, KERNEL_2D)
    rng = np.random.default_rng(11)
    m = single.dimension
    x = rng.normal(size=pair.dimension) + 1j * rng.normal(size=pair.dimension)
    y = rng.normal(size=pair.dimension) + 1j * rng.normal(size=pair.dimension)
    hx, hy = pair.apply(x), pair.apply(y)
    herm = abs(np.vdot(x, hy) - np.conj(np.vdot(y, hx)))
    assert herm / (np.linalg.norm(x) * np.linalg.norm(hy)) < 1e-10

    def swap(vec):
        return np.ascontiguousarray(vec.reshape(m, m).T).ravel()

    defect = np.linalg.norm(pair.apply(swap(x)) - swap(pair.apply(x)))
    assert defect / np.linalg.norm(pair.apply(x)) < 1e-10


def test_interaction_off_gives_product_spectrum():
    grid, single = small_pair_problem()
    lone = lowest_eigenpairs(single, k=2, tol=1e-10, seed=2)
    pair = two_electron_operator(single, grid, kernel=None)
    result = lowest_eigenpairs(pair, k=2, tol=1e-10, seed=2)
    assert abs(result.eigenvalues[0] - 2.0 * lone.eigenvalues[0]) < 1e-8
    gap = lone.eigenvalues[1] - lone.eigenvalues[0]
    assert abs(exchange_coupling(result) - gap) < 1e-8
    product = np.outer(lone.eigenvectors[:, 0], lone.eigenvectors[:, 0]).ravel()
    overlap = abs(np.vdot(result.eigenvectors[:, 0], product))
    assert overlap > 1.0 - 1e-8


def test_distant_dots_exchange_vanishes():
    grid = Grid((56, 4), (56.0, 4.0), (-28.0, -2.0))
    x, y = grid.position_mesh()
    v = 1.0 * np.minimum((x - 16.0) ** 2, (x + 16.0) ** 2) + 1.0 * y**2
    single = single_particle_operator(grid, BandModel(), v, mode="ema")
    pair = two_electron_operator(single, grid, KERNEL_2D)
    result = lowest_eigenpairs(pair, k=2, tol=1e-9, seed=4)
    assert exchange_coupling(result) < 1e-4
    # spatially symmetric ground state, consistent with J >= 0 reporting
    assert abs(swap_expectation(result.eigenvectors[:, 0]) - 1.0) < 1e-6


def test_valley_pair_matches_dense_expansion():
    lateral = Grid((4, 4), (4.0, 4.0), (-2.0, -2.0))
    const = np.full(lateral.shape, 0.0)
    fields = ValleyFields(
        grid=lateral,
        epsilon_g=const + 1.0,
        delta_abs=const + 0.5,
        phi=const + 0.8,
        phase_defined=np.ones(lateral.shape, dtype=bool),
    )
    single = assemble_valley_h2d(lateral, fields, v_xy=np.zeros(lateral.shape))
    pair = two_electron_operator(single, lateral, KERNEL_2D, components=2)
    h1 = dense_matrix(single)
    m = single.dimension
    w = coulomb_diagonal(KERNEL_2D, lateral)
    w_flat = np.repeat(np.repeat(w, 2, axis=0), 2, axis=1).ravel()
    eye = np.eye(m)
    h2 = np.kron(h1, eye) + np.kron(eye, h1) + np.diag(w_flat)
    exact = np.linalg.eigvalsh(h2)[:4]
    result = lowest_eigenpairs(pair, k=4, tol=1e-10, seed=5)
    assert np.max(np.abs(result.eigenvalues - exact)) < 1e-8


def test_memory_budget_refusal():
    grid, single = small_pair_problem()
    with pytest.raises(MemoryBudgetError) as info:
        two_electron_operator(single, grid, KERNEL_2D, budget_mb=0.01)
    err = info.value
    assert err.dof == 36**2
    assert abs(err.vector_mb - pair_vector_megabytes(36**2)) < 1e-12
    assert "MB" in str(err) and "DOF" in str(err)


def test_swap_expectation_signs():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(5, 5))
    sym = a + a.T
    anti = a - a.T
    assert abs(swap_expectation(sym.ravel()) - 1.0) < 1e-12
    assert abs(swap_expectation(anti.ravel()) + 1.0) < 1e-12


def test_exchange_coupling_input_checks():
    one = EigenResult(
        eigenvalues=np.array([1.0]),
        eigenvectors=np.ones((4, 1)),
        residuals=np.array([0.0]),
        n_applications=1,
        converged=True,
    )
    with pytest.raises(ValueError, match="two eigenvalues"):
        exchange_coupling(one)
    stale = EigenResult(
        eigenvalues=np.array([1.0, 2.0]),
        eigenvectors=np.ones((4, 2)),
        residuals=np.array([0.0, 0.0]),
        n_applications=1,
        converged=False,
    )
    with pytest.raises(ValueError, match="converge"):
        exchange_coupling(stale)
