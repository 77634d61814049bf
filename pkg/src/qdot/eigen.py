"""Matrix-free Lanczos eigensolver for Hermitian operators.

Thick-restart Lanczos with block size 1 and full reorthogonalization on
every step.  The operator is supplied as an apply-callback over flat
vectors; the projected matrix is accumulated from the explicit
Gram-Schmidt coefficients, which makes the restart head block (kept
Ritz vectors plus their coupling column) come out for free.

Full reorthogonalization costs an extra dense product per step but is
what makes near-degenerate valley doublets safe to resolve; all solver
defaults follow from that choice.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "LinearOperatorHandle",
    "EigenResult",
    "OperatorContractError",
    "NonConvergenceError",
    "lowest_eigenpairs",
    "dense_diagonalize_1d",
]


@dataclass(frozen=True)
class LinearOperatorHandle:
    """A Hermitian operator given only through its action on vectors.

    ``apply_batch``, when present, maps a (dimension, nbatch) array to
    its image column by column in one call; consumers fall back to
    looping ``apply`` without it.
    """

    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]
    dtype: np.dtype = np.dtype(np.complex128)
    apply_batch: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("operator dimension must be positive")
        object.__setattr__(self, "dtype", np.dtype(self.dtype))


@dataclass
class EigenResult:
    """Lowest eigenpairs in ascending eigenvalue order.

    ``eigenvectors`` has one unit-norm column per eigenvalue;
    ``residuals`` holds the explicitly evaluated ``||H v - lambda v||``.
    ``ritz_history`` records the Ritz approximations after each restart
    cycle, which lets tests check variational monotonicity.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    n_applications: int
    converged: bool
    ritz_history: list = field(default_factory=list)


class OperatorContractError(ValueError):
    """The supplied callback violated Hermiticity."""


class NonConvergenceError(RuntimeError):
    """Iteration budget exhausted; carries the best result found."""

    def __init__(self, message: str, result: EigenResult):
        super().__init__(message)
        self.result = result


def _check_hermitian(op: LinearOperatorHandle, seed: int) -> None:
    # A single random pair catches sign and conjugation mistakes; the
    # tolerance is scaled so FFT roundoff on meV-scale operators passes.
    rng = np.random.default_rng(seed ^ 0x5EED)
    x = rng.normal(size=op.dimension).astype(op.dtype)
    y = rng.normal(size=op.dimension).astype(op.dtype)
    if np.issubdtype(op.dtype, np.complexfloating):
        x = x + 1j * rng.normal(size=op.dimension)
        y = y + 1j * rng.normal(size=op.dimension)
    x /= np.linalg.norm(x)
    y /= np.linalg.norm(y)
    ax = op.apply(x)
    ay = op.apply(y)
    lhs = np.vdot(x, ay)
    rhs = np.vdot(ax, y)
    scale = max(1.0, np.linalg.norm(ax), np.linalg.norm(ay))
    if abs(lhs - rhs) > 1e-8 * scale:
        raise OperatorContractError(
            f"apply-callback is not Hermitian: <x,Ay>={lhs:.6e} vs "
            f"<Ax,y>={rhs:.6e} (scale {scale:.3e})"
        )


def _orthonormal_start(
    rng: np.random.Generator,
    dim: int,
    dtype: np.dtype,
    basis: np.ndarray,
    nkept: int,
    v0: np.ndarray | None,
) -> np.ndarray:
    """A unit vector orthogonal to the first ``nkept`` basis rows."""
    for attempt in range(5):
        if v0 is not None and attempt == 0:
            v = np.asarray(v0, dtype=dtype).ravel().copy()
        else:
            v = rng.normal(size=dim).astype(dtype)
            if np.issubdtype(np.dtype(dtype), np.complexfloating):
                v = v + 1j * rng.normal(size=dim)
        if nkept:
            v -= basis[:nkept].conj() @ v @ basis[:nkept]
            v -= basis[:nkept].conj() @ v @ basis[:nkept]
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            return v / norm
    raise RuntimeError("could not generate a start vector")  # pragma: no cover


def _deflated_minimum(
    op: LinearOperatorHandle,
    locked: np.ndarray,
    theta: np.ndarray,
    nb: int,
    tol: float,
    basis_size: int,
    seed: int,
) -> tuple[float, np.ndarray, int, bool]:
    """Floor of the spectrum on the orthogonal complement of ``locked``.

    The locked rows are projected out of input and output and lifted
    above the reachable spectrum, so a fresh single-vector solve lands
    on the lowest remaining level; a random start overlaps it almost
    surely even when the parent's Krylov space could not reach it.
    Returns the floor value (or the lift if the complement starts above
    it, which certifies the head just as well), the probe eigenvector,
    the number of operator applications spent, and whether the probe
    itself converged; an unconverged floor is only an upper bound and
    must not certify.
    """
    spread = float(theta[nb - 1] - theta[0])
    lift = float(theta[nb - 1]) + spread + 1.0

    def apply(vec: np.ndarray) -> np.ndarray:
        head = locked.conj() @ vec
        inner = vec - head @ locked
        out = np.asarray(op.apply(inner), dtype=op.dtype).ravel()
        out -= (locked.conj() @ out) @ locked
        out += (lift * head) @ locked
        return out

    probe_op = LinearOperatorHandle(op.dimension, apply, op.dtype)
    try:
        res = lowest_eigenpairs(
            probe_op,
            k=1,
            tol=tol,
            max_iter=2000,
            seed=seed,
            basis_size=basis_size,
            check_hermitian=False,
            verify_multiplicity=False,
        )
    except NonConvergenceError as err:
        res = err.result
    return (
        float(res.eigenvalues[0]),
        res.eigenvectors[:, 0],
        res.n_applications,
        res.converged,
    )


def lowest_eigenpairs(
    op: LinearOperatorHandle,
    k: int = 1,
    *,
    tol: float = 1e-8,
    max_iter: int = 5000,
    seed: int = 0,
    v0: np.ndarray | None = None,
    basis_size: int | None = None,
    trace_path=None,
    check_hermitian: bool = True,
    verify_multiplicity: bool = True,
) -> EigenResult:
    """Return the ``k`` lowest eigenpairs of a Hermitian operator.

    Parameters
    ----------
    op:
        Operator handle; ``op.apply`` must be Hermitian and
        deterministic.
    k:
        Number of eigenpairs, ``1 <= k << dimension``.
    tol:
        Convergence is declared when every requested residual falls
        below ``tol * max(1, |lambda|)`` (energies in meV, so the floor
        is one meV).
    max_iter:
        Budget of operator applications across all restart cycles.
    seed:
        Seed for the start vector and the Hermiticity spot check;
        results are deterministic for a fixed seed.
    v0:
        Optional warm-start vector (e.g. the solution at a neighboring
        scan point).  Overrides the seeded start.
    basis_size:
        Krylov vectors per restart cycle; default ``10 k + 40``.
    trace_path:
        If given, write a per-cycle CSV trace (cycle, applications,
        Ritz values, residual bounds).
    verify_multiplicity:
        A Krylov space grown from one vector spans only one direction
        of a degenerate eigenspace, so converged residuals can hide a
        twin.  When set (default), each convergence is followed by a
        deflation probe: a fresh single-vector solve on the operator
        with the converged Ritz head projected out (and lifted above
        the spectrum).  If the probe floor undercuts or matches the
        k-th Ritz value, the probe vector is injected and iteration
        continues; otherwise the head is certified and returned.

    Raises
    ------
    OperatorContractError
        If a random-pair Hermiticity check fails.
    NonConvergenceError
        If the budget is exhausted; the best result rides on the
        exception's ``result`` attribute.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= op.dimension:
        raise ValueError(f"k={k} must be smaller than dimension={op.dimension}")
    if check_hermitian:
        _check_hermitian(op, seed)

    dim = op.dimension
    dtype = op.dtype
    m = basis_size if basis_size is not None else 10 * k + 40
    m = int(min(max(m, k + 2), dim))
    nkeep = min(k + 10, m // 2) if m < dim else 0

    rng = np.random.default_rng(seed)
    basis = np.empty((m + 1, dim), dtype=dtype)
    proj = np.zeros((m + 1, m + 1), dtype=dtype)
    nkept = 0  # head vectors carried over from the previous cycle
    napply = 0
    history: list[np.ndarray] = []
    trace_rows: list[list] = []
    theta = np.empty(0)
    svec = np.empty((0, 0))
    bounds = np.empty(0)
    exhausted = False
    ever_done = False
    probes = 0

    basis[0] = _orthonormal_start(rng, dim, dtype, basis, 0, v0)

    while True:
        j = nkept
        nfilled = j + 1  # head plus the fresh start/residual vector
        # always span at least k+1 directions so a partial result exists
        while nfilled <= m and (napply < max_iter or j <= k):
            w = np.asarray(op.apply(basis[j]), dtype=dtype).ravel()
            napply += 1
            norm0 = np.linalg.norm(w)
            coeff = basis[:nfilled].conj() @ w
            w -= coeff @ basis[:nfilled]
            # second classical Gram-Schmidt pass when cancellation was severe
            if np.linalg.norm(w) < 0.5 * norm0:
                extra = basis[:nfilled].conj() @ w
                w -= extra @ basis[:nfilled]
                coeff = coeff + extra
            proj[:nfilled, j] = coeff
            proj[j, :nfilled] = coeff.conj()
            proj[j, j] = coeff[j].real
            beta = np.linalg.norm(w)
            scale = max(1.0, np.abs(proj[: nfilled, : nfilled]).max())
            if beta <= 1e-13 * scale:
                if nfilled == dim:
                    # whole space spanned; the projection is exact
                    j += 1
                    nfilled += 1
                    break
                basis[nfilled] = _orthonormal_start(
                    rng, dim, dtype, basis, nfilled, None
                )
                proj[nfilled, j] = 0.0
                proj[j, nfilled] = 0.0
            else:
                basis[nfilled] = w / beta
                proj[nfilled, j] = beta
                proj[j, nfilled] = beta
            j += 1
            nfilled += 1

        nb = j  # vectors actually spanned by the projection
        theta, svec = np.linalg.eigh(proj[:nb, :nb])
        # exact Lanczos residual bound: coupling of each Ritz vector to
        # the single unprojected direction (row nb is zero when the
        # whole space was spanned)
        bounds = np.abs(proj[nb, :nb] @ svec)
        history.append(theta[:k].copy())
        trace_rows.append(
            [len(history), napply, *theta[:k].tolist(), *bounds[:k].tolist()]
        )

        done = nb >= k and bool(
            np.all(bounds[:k] <= tol * np.maximum(1.0, np.abs(theta[:k])))
        )
        if nb == dim:
            break
        if done:
            ever_done = True
            if not verify_multiplicity or probes >= 3:
                break
            probes += 1
            locked = (svec[:, :k].T @ basis[:nb]).astype(dtype)
            mu, probe_vec, probe_applies, probe_ok = _deflated_minimum(
                op, locked, theta, nb, tol, m, int(rng.integers(2**31 - 1))
            )
            napply += probe_applies
            margin = max(100.0 * tol * max(1.0, abs(theta[k - 1])), 1e-10)
            if probe_ok and mu > theta[k - 1] + margin:
                # the complement floor sits strictly above the head:
                # nothing below, at, or degenerate with the k-th value
                # was missed
                break
            # probe found a missed level (a degenerate twin, or a
            # sector the start vector had no overlap with); inject its
            # eigenvector and keep iterating
            nkept = min(nkeep, nb - 1)
            basis[:nkept] = (svec[:, :nkept].T @ basis[:nb]).astype(dtype)
            basis[nkept] = _orthonormal_start(
                rng, dim, dtype, basis, nkept, probe_vec
            )
            proj[:, :] = 0.0
            proj[np.arange(nkept), np.arange(nkept)] = theta[:nkept]
            continue
        if napply >= max_iter:
            exhausted = not ever_done
            break

        # thick restart: keep the lowest Ritz vectors plus the residual
        nkept = min(nkeep, nb - 1)
        kept = (svec[:, :nkept].T @ basis[:nb]).astype(dtype)
        resid_vec = basis[nb].copy()
        basis[:nkept] = kept
        basis[nkept] = resid_vec
        proj[:, :] = 0.0
        proj[np.arange(nkept), np.arange(nkept)] = theta[:nkept]

    vectors = (svec[:, :k].T @ basis[: svec.shape[0]]).astype(dtype)
    # explicit residuals for the returned pairs (spec defines the field
    # as ||Hv - lambda v||, not the Lanczos bound)
    residuals = np.empty(k)
    for i in range(k):
        hv = np.asarray(op.apply(vectors[i]), dtype=dtype).ravel()
        napply += 1
        residuals[i] = np.linalg.norm(hv - theta[i] * vectors[i])

    result = EigenResult(
        eigenvalues=theta[:k].copy(),
        eigenvectors=np.ascontiguousarray(vectors.T),
        residuals=residuals,
        n_applications=napply,
        converged=not exhausted,
        ritz_history=history,
    )

    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["cycle", "applications"]
                + [f"ritz_{i}" for i in range(k)]
                + [f"residual_{i}" for i in range(k)]
            )
            writer.writerows(trace_rows)

    if exhausted:
        raise NonConvergenceError(
            f"no convergence within {max_iter} operator applications "
            f"(best residual bounds {bounds[:k]})",
            result,
        )
    return result


def dense_diagonalize_1d(op: LinearOperatorHandle) -> EigenResult:
    """Full spectrum of a small operator via an explicit matrix build.

    Intended for column (1D) problems; refuses dimensions above 512.
    """
    n = op.dimension
    if n > 512:
        raise ValueError(f"dense diagonalization limited to 512 points, got {n}")
    matrix = np.empty((n, n), dtype=op.dtype)
    unit = np.zeros(n, dtype=op.dtype)
    for i in range(n):
        unit[i] = 1.0
        matrix[:, i] = np.asarray(op.apply(unit), dtype=op.dtype).ravel()
        unit[i] = 0.0
    matrix = 0.5 * (matrix + matrix.conj().T)
    values, vectors = np.linalg.eigh(matrix)
    residuals = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
    return EigenResult(
        eigenvalues=values,
        eigenvectors=vectors,
        residuals=residuals,
        n_applications=n,
        converged=True,
        ritz_history=[values[: min(4, n)].copy()],
    )
