"""Nonlinear Poisson-Boltzmann solve for the electric potential.

For a given ion density n > 0 and squared-Debye-length parameter
eps > 0 the potential solves

    eps * phi'' = exp(phi) - n        (periodic)

by a damped Newton iteration: the Jacobian ``eps*D2 - diag(exp(phi))``
is assembled densely from the cached spectral second-derivative matrix
and factorized directly, and a geometric line search enforces strict
residual decrease. The Boltzmann nonlinearity pins the constant mode,
so no mean normalization is applied. In the eps -> 0 limit the
potential degenerates to ln n, exposed as :func:`solve_phi_limit`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import Field, Grid, _dealias_values

__all__ = [
    "PBSolveOptions",
    "PBSolution",
    "PBConvergenceError",
    "pb_residual",
    "solve_phi",
    "solve_phi_limit",
]


class PBConvergenceError(RuntimeError):
    """Newton iteration failed; carries the last residual norm."""

    def __init__(self, message: str, last_residual: float):
        super().__init__(f"{message} (last residual {last_residual:.3e})")
        self.last_residual = last_residual


@dataclass(frozen=True)
class PBSolveOptions:
    tol: float = 1e-12
    max_newton_iters: int = 50
    damping_min: float = 0.0625

    def __post_init__(self):
        if not (self.tol > 0.0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be at least 1")
        if not (0.0 < self.damping_min <= 1.0):
            raise ValueError(
                f"damping_min must lie in (0, 1], got {self.damping_min}"
            )


@dataclass(frozen=True)
class PBSolution:
    phi: Field
    residual_l2: float
    iterations: int


@lru_cache(maxsize=8)
def _second_derivative_matrix(n_points: int, length: float) -> np.ndarray:
    # columns are the spectral second derivatives of the delta columns
    grid = Grid(n_points, length)
    k2 = grid.wavenumbers**2
    eye = np.eye(n_points)
    mat = np.fft.ifft(-k2[:, None] * np.fft.fft(eye, axis=0), axis=0).real
    mat.flags.writeable = False
    return mat


def _residual_values(grid: Grid, phi: np.ndarray, n: np.ndarray, eps: float,
                     d2_phi: np.ndarray | None = None) -> np.ndarray:
    if d2_phi is None:
        fhat = np.fft.fft(phi)
        d2_phi = np.fft.ifft(-(grid.wavenumbers**2) * fhat).real
    return _dealias_values(grid, eps * d2_phi - np.exp(phi) + n)


def _l2(grid: Grid, values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(values * values) * grid.length))


def pb_residual(phi: Field, n: Field, eps: float) -> Field:
    """F(phi) = eps*phi'' - exp(phi) + n, evaluated pointwise then dealiased."""
    if not (eps > 0.0):
        raise ValueError(f"eps must be positive, got {eps}")
    return Field(phi.grid, _residual_values(phi.grid, phi.values, n.values, eps))


def _solve_phi_values(
    grid: Grid,
    n: np.ndarray,
    eps: float,
    opts: PBSolveOptions,
    phi_init: np.ndarray | None = None,
) -> tuple[np.ndarray, float, int]:
    if not (eps > 0.0):
        raise ValueError(f"eps must be positive, got {eps}")
    if np.min(n) <= 0.0:
        raise ValueError(
            f"density must be strictly positive, min(n) = {np.min(n):.3e}"
        )
    phi = np.log(n) if phi_init is None else np.array(phi_init, dtype=np.float64)
    # the residual is dealiased, so modes above the cutoff are invisible
    # to Newton; keep every iterate inside the band or initializer tail
    # junk rides along into the answer untouched
    phi = _dealias_values(grid, phi)
    d2 = _second_derivative_matrix(grid.n_points, grid.length)

    residual = _residual_values(grid, phi, n, eps)
    res_norm = _l2(grid, residual)
    for iteration in range(opts.max_newton_iters + 1):
        if res_norm <= opts.tol:
            return phi, res_norm, iteration
        if iteration == opts.max_newton_iters:
            raise PBConvergenceError(
                f"Newton did not reach tol={opts.tol:.1e} within "
                f"{opts.max_newton_iters} iterations",
                res_norm,
            )
        jac = eps * d2 - np.diag(np.exp(phi))
        try:
            delta = np.linalg.solve(jac, -residual)
        except np.linalg.LinAlgError as exc:
            raise PBConvergenceError(f"Newton linear solve failed: {exc}", res_norm)
        delta = _dealias_values(grid, delta)
        lam = 1.0
        while True:
            trial = phi + lam * delta
            trial_residual = _residual_values(grid, trial, n, eps)
            trial_norm = _l2(grid, trial_residual)
            if trial_norm < res_norm:
                phi, residual, res_norm = trial, trial_residual, trial_norm
                break
            lam *= 0.5
            if lam < opts.damping_min:
                raise PBConvergenceError(
                    "Newton line search stalled at the damping floor",
                    res_norm,
                )
    raise AssertionError("unreachable")


def solve_phi(
    n: Field,
    eps: float,
    opts: PBSolveOptions | None = None,
    phi_init: Field | None = None,
) -> PBSolution:
    """Solve eps*phi'' = exp(phi) - n by damped Newton.

    The default initializer is the limit potential ln n, which is an
    O(eps) guess for smooth positive densities. The residual norm of
    the returned solution is at or below ``opts.tol``.
    """
    opts = opts or PBSolveOptions()
    init = None if phi_init is None else phi_init.values
    phi, res_norm, iters = _solve_phi_values(n.grid, n.values, eps, opts, init)
    return PBSolution(Field(n.grid, phi), res_norm, iters)


def solve_phi_limit(n: Field) -> Field:
    """Quasineutral potential: phi = ln n pointwise."""
    if np.min(n.values) <= 0.0:
        raise ValueError(
            f"density must be strictly positive, min(n) = {np.min(n.values):.3e}"
        )
    return Field(n.grid, np.log(n.values))
