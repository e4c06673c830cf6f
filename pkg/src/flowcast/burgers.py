"""Finite-volume semi-discretization of the inviscid Burgers equation.

The conservation law

    d/dt theta + d/dx (theta^2 / 2) = 0        on (-r, r)

with Dirichlet boundary states u_l (left) and u_r (right) is discretized on a
uniform grid of ``cells`` finite volumes with the local Lax-Friedrichs
(Rusanov) interface flux

    F(a, b) = (a^2 + b^2)/4 - max(|a|, |b|) (b - a)/2.

One ghost cell per side carries the boundary state. The parameter vector is
mu = (u_l, u_r); with u_l > u_r and step initial data the solution is a shock
traveling at speed (u_l + u_r)/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .ode import IvpProblem

__all__ = [
    "BurgersParams",
    "BurgersGrid",
    "burgers_initial",
    "burgers_rhs",
    "burgers_jacobian",
    "make_burgers_problem",
    "shock_position",
]


@dataclass(frozen=True)
class BurgersParams:
    """Boundary states; mu = (u_l, u_r)."""

    u_l: float
    u_r: float

    @classmethod
    def from_mu(cls, mu) -> "BurgersParams":
        mu = np.asarray(mu, dtype=float).ravel()
        if mu.size != 2:
            raise ValueError(f"mu must have two components (u_l, u_r), got {mu.size}")
        return cls(float(mu[0]), float(mu[1]))


@dataclass(frozen=True)
class BurgersGrid:
    """Uniform cells on (-half_width, half_width)."""

    cells: int = 200
    half_width: float = 5.0

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError(f"cells must be >= 1, got {self.cells!r}")
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise ValueError(f"half_width must be > 0, got {self.half_width!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.cells

    @property
    def centers(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.cells) + 0.5) * self.h


def _flux(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lam = np.maximum(np.abs(a), np.abs(b))
    return 0.25 * (a * a + b * b) - 0.5 * lam * (b - a)


def _flux_partials(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """dF/da and dF/db; at |a| == |b| the b-branch of the max is taken."""
    lam = np.maximum(np.abs(a), np.abs(b))
    a_wins = np.abs(a) > np.abs(b)
    dlam_da = np.where(a_wins, np.sign(a), 0.0)
    dlam_db = np.where(a_wins, 0.0, np.sign(b))
    jump = b - a
    dfa = 0.5 * a - 0.5 * dlam_da * jump + 0.5 * lam
    dfb = 0.5 * b - 0.5 * dlam_db * jump - 0.5 * lam
    return dfa, dfb


def _check_state(u, grid: BurgersGrid) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.cells,):
        raise ValueError(f"state has shape {u.shape}, expected ({grid.cells},)")
    return u


def _with_ghosts(u: np.ndarray, params: BurgersParams) -> np.ndarray:
    return np.concatenate(([params.u_l], u, [params.u_r]))


def burgers_rhs(u: np.ndarray, params: BurgersParams, grid: BurgersGrid) -> np.ndarray:
    """Semi-discrete right-hand side du_c/dt = -(F_{c+1/2} - F_{c-1/2})/h."""
    u = _check_state(u, grid)
    w = _with_ghosts(u, params)
    f = _flux(w[:-1], w[1:])
    return -np.diff(f) / grid.h


def burgers_jacobian(u: np.ndarray, params: BurgersParams, grid: BurgersGrid) -> np.ndarray:
    """Exact tridiagonal derivative of :func:`burgers_rhs` (dense d x d array)."""
    u = _check_state(u, grid)
    w = _with_ghosts(u, params)
    dfa, dfb = _flux_partials(w[:-1], w[1:])
    d, h = grid.cells, grid.h
    jac = np.zeros((d, d))
    idx = np.arange(d)
    jac[idx, idx] = (dfb[:-1] - dfa[1:]) / h
    jac[idx[1:], idx[:-1]] = dfa[1:-1] / h
    jac[idx[:-1], idx[1:]] = -dfb[1:-1] / h
    return jac


def burgers_initial(params: BurgersParams, grid: BurgersGrid) -> np.ndarray:
    """Step profile: u_l on cells with center left of x = 0, u_r elsewhere."""
    return np.where(grid.centers < 0, params.u_l, params.u_r)


def shock_position(u: np.ndarray, params: BurgersParams, grid: BurgersGrid) -> float:
    """Center of the first cell at or below the midpoint of the boundary states."""
    mid = 0.5 * (params.u_l + params.u_r)
    below = np.nonzero(np.asarray(u) <= mid)[0]
    if below.size == 0:
        return float(grid.half_width)
    return float(grid.centers[below[0]])


def _rhs_mu(u, mu, grid):
    return burgers_rhs(u, BurgersParams.from_mu(mu), grid)


def _jacobian_mu(u, mu, grid):
    return burgers_jacobian(u, BurgersParams.from_mu(mu), grid)


def _initial_mu(mu, grid):
    return burgers_initial(BurgersParams.from_mu(mu), grid)


def make_burgers_problem(cells: int = 200, half_width: float = 5.0) -> IvpProblem:
    """Package the discretization as a parametric problem with mu = (u_l, u_r)."""
    grid = BurgersGrid(cells, half_width)
    return IvpProblem(
        dim=grid.cells,
        rhs=partial(_rhs_mu, grid=grid),
        initial_value=partial(_initial_mu, grid=grid),
        jacobian=partial(_jacobian_mu, grid=grid),
        param_dim=2,
        name="burgers",
        notes=(
            f"finite volumes, {grid.cells} cells on "
            f"({-grid.half_width:g}, {grid.half_width:g}), local Lax-Friedrichs "
            "flux, Dirichlet ghost cells, step initial profile at x=0"
        ),
    )
