"""Finite-volume transient heat conduction on the structured mold grid.

Backward-Euler time stepping of  rho*cp*dT/dt = ks*Lap(T)  with

* hot face (y=0):   -ks grad(T).n = g      (n outward; g < 0 means influx)
* cold face (y=ly): -ks grad(T).n = h (T - Tf), wall temperature coupled to
  the cell center through the conduction/convection series resistance
* remaining sides adiabatic.

The backward-Euler operator depends only on (grid, props, dt) and is
separable over the axes (uniform spacing, constant coefficients, Robin
only touches the y-direction), so the default solve diagonalizes the three
1D operators once per dt and applies exact orthogonal transforms to every
state and ensemble member at once; ``method="cg"`` swaps in a
conjugate-gradient solve of the same SPD system (relative residual 1e-10,
at most 10*n_cells iterations).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, NumericalError
from .mesh import Grid

CG_RTOL = 1e-10
CG_MAXITER_FACTOR = 10  # iteration cap: factor * n_cells


@dataclass(frozen=True)
class MaterialProps:
    rho: float      # density, kg/m^3
    cp: float       # specific heat, J/(kg K)
    ks: float       # thermal conductivity, W/(m K)
    h: float        # convective coefficient on the cold face, W/(m^2 K)
    t_fluid: float  # coolant temperature, K
    t_init: float   # initial temperature, K

    def __post_init__(self):
        for name in ("rho", "cp", "ks", "t_fluid", "t_init"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"material property {name} must be positive")
        # h = 0 is allowed as a diagnostic override (pure conduction tests)
        if self.h < 0:
            raise ConfigurationError("convective coefficient h must be >= 0")


@dataclass
class StateField:
    """Cell-centered temperatures (K) at one simulation time."""

    values: np.ndarray
    time: float = 0.0


@dataclass
class FluxField:
    """Heat flux (W/m^2) on the hot faces, ordered like grid.hot_faces."""

    values: np.ndarray
    time: float = 0.0


def uniform_state(grid, temperature, time=0.0):
    return StateField(np.full(grid.n_cells, float(temperature)), time)


class _EigenFactor:
    """Exact inverse of M/dt + K through per-axis eigendecompositions.

    K is the Kronecker sum of three 1D conduction operators (the Robin
    term only adds to the last diagonal entry of the y operator), all
    symmetric, so A = Q (c + L) Q^T with orthogonal Q = Qx x Qy x Qz.
    """

    def __init__(self, solver, dt):
        g = solver.grid
        dx, dy, dz = g.spacing
        ks = solver.props.ks

        def lap1d(n, cond):
            k = np.zeros((n, n))
            i = np.arange(n - 1)
            k[i, i] += cond
            k[i + 1, i + 1] += cond
            k[i, i + 1] -= cond
            k[i + 1, i] -= cond
            return k

        ky = lap1d(g.ny, ks * dx * dz / dy)
        ky[-1, -1] += solver.u_cold * dx * dz
        self.shape4 = (g.nx, g.ny, g.nz)
        self.eigvals, self.eigvecs = [], []
        for k in (lap1d(g.nx, ks * dy * dz / dx), ky, lap1d(g.nz, ks * dx * dy / dz)):
            lam, q = np.linalg.eigh(k)
            self.eigvals.append(lam)
            self.eigvecs.append(q)
        lx, ly, lz = self.eigvals
        self.denom = (solver.heat_capacity / dt
                      + lx[:, None, None] + ly[None, :, None] + lz[None, None, :])

    @staticmethod
    def _apply(q, t, axis):
        t = np.moveaxis(t, axis, 0)
        shape = t.shape
        out = q @ t.reshape(shape[0], -1)
        return np.moveaxis(out.reshape(shape), 0, axis)

    def solve(self, b):
        """Solve A x = b for every column of b (n_cells, n_rhs)."""
        t = b.reshape(self.shape4 + (-1,), order="F")
        for axis, q in enumerate(self.eigvecs):
            t = self._apply(q.T, t, axis)
        t = t / self.denom[..., None]
        for axis, q in enumerate(self.eigvecs):
            t = self._apply(q, t, axis)
        return t.reshape((b.shape[0], -1), order="F")


class HeatSolver:
    """State-transition operator for one grid/material pair."""

    def __init__(self, grid: Grid, props: MaterialProps):
        self.grid = grid
        self.props = props
        dx, dy, dz = grid.spacing
        vol = grid.cell_volume
        self.heat_capacity = props.rho * props.cp * vol  # J/K per cell

        # cold-face transfer coefficient: film in series with the half-cell
        # conduction path, exact for piecewise-linear steady profiles
        if props.h == 0.0:
            self.u_cold = 0.0
        else:
            self.u_cold = 1.0 / (1.0 / props.h + 0.5 * dy / props.ks)

        self._stiffness = None
        self._factorizations = {}
        self._systems = {}

    # -- assembly -----------------------------------------------------------

    def _assemble_stiffness(self):
        g = self.grid
        dx, dy, dz = g.spacing
        n = g.n_cells
        rows, cols, vals = [], [], []

        idx = np.arange(n).reshape((g.nx, g.ny, g.nz), order="F")
        for axis, (d, area) in enumerate(((dx, dy * dz), (dy, dx * dz), (dz, dx * dy))):
            cond = np.full(idx.size // idx.shape[axis] * (idx.shape[axis] - 1),
                           self.props.ks * area / d)
            a = np.moveaxis(idx, axis, 0)[:-1].ravel()
            b = np.moveaxis(idx, axis, 0)[1:].ravel()
            rows.extend((a, b, a, b))
            cols.extend((a, a, b, b))
            vals.extend((cond, -cond, -cond, cond))

        K = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()

        # Robin term adds to the diagonal of the cold cells
        cold = self.grid.cold_faces
        robin = sp.coo_matrix(
            (self.u_cold * cold.areas, (cold.cells, cold.cells)), shape=(n, n)
        ).tocsr()
        return K + robin

    def stiffness_matrix(self):
        """Sparse conduction + Robin operator (used by the CG path and tests)."""
        if self._stiffness is None:
            self._stiffness = self._assemble_stiffness()
        return self._stiffness

    def system_matrix(self, dt):
        """SPD backward-Euler matrix  M/dt + K  for the given step size."""
        if dt not in self._systems:
            n = self.grid.n_cells
            m = sp.identity(n, format="csr") * (self.heat_capacity / dt)
            self._systems[dt] = (m + self.stiffness_matrix()).tocsr()
        return self._systems[dt]

    def _factorization(self, dt):
        if dt not in self._factorizations:
            self._factorizations[dt] = _EigenFactor(self, dt)
        return self._factorizations[dt]

    def _rhs(self, states, fluxes, dt):
        """Right-hand sides, one column per trajectory. states (S,n), fluxes (S,F)."""
        b = (self.heat_capacity / dt) * states.T.copy()  # (n, S)
        cold = self.grid.cold_faces
        np.add.at(b, cold.cells, (self.u_cold * cold.areas * self.props.t_fluid)[:, None])
        hot = self.grid.hot_faces
        np.add.at(b, hot.cells, -(hot.areas[:, None] * fluxes.T))
        return b

    # -- stepping -----------------------------------------------------------

    def step_many(self, states, fluxes, dt, method="direct"):
        """Advance S trajectories one step. states (S, n), fluxes (S, n_hot)."""
        if not dt > 0:
            raise ConfigurationError(f"dt={dt} must be positive")
        states = np.atleast_2d(np.asarray(states, dtype=float))
        fluxes = np.atleast_2d(np.asarray(fluxes, dtype=float))
        if fluxes.shape[1] != len(self.grid.hot_faces):
            raise ConfigurationError(
                f"flux has {fluxes.shape[1]} entries, grid has "
                f"{len(self.grid.hot_faces)} hot faces")
        if states.shape[0] != fluxes.shape[0]:
            raise ConfigurationError("states and fluxes disagree on trajectory count")

        b = self._rhs(states, fluxes, dt)
        if method == "direct":
            out = self._factorization(dt).solve(b)
        elif method == "cg":
            out = self._cg_solve(self.system_matrix(dt), b)
        else:
            raise ConfigurationError(f"unknown solver method {method!r}")
        return out.T

    def _cg_solve(self, A, b):
        n = A.shape[0]
        maxiter = max(1, int(CG_MAXITER_FACTOR * n))
        out = np.empty_like(b)
        for col in range(b.shape[1]):
            iters = 0

            def count(_):
                nonlocal iters
                iters += 1

            x, info = spla.cg(A, b[:, col], rtol=CG_RTOL, atol=0.0,
                              maxiter=maxiter, callback=count)
            if info != 0:
                res = np.linalg.norm(A @ x - b[:, col]) / np.linalg.norm(b[:, col])
                raise NumericalError(
                    f"conjugate gradient failed to converge in {iters} iterations "
                    f"(relative residual {res:.3e}, target {CG_RTOL:.1e})",
                    iterations=iters, residual=res, column=col)
            out[:, col] = x
        return out

    def step(self, state: StateField, flux: FluxField, dt, method="direct"):
        """One backward-Euler step of a single trajectory."""
        new = self.step_many(state.values[None, :], flux.values[None, :], dt, method)
        return StateField(new[0], state.time + dt)

    # -- observation --------------------------------------------------------

    def sensor_cells(self, locations):
        return self.grid.cells_of_points(locations)

    def sample_sensors(self, state: StateField, locations):
        """Temperatures at the sensor locations via nearest-cell lookup."""
        return state.values[self.sensor_cells(locations)]


def step(state, flux, grid, props, dt, method="direct"):
    """Convenience wrapper when no solver instance is kept around."""
    return HeatSolver(grid, props).step(state, flux, dt, method)


def total_energy(state, grid, props):
    """Total thermal energy sum(rho*cp*V*T) in J, for conservation checks."""
    return props.rho * props.cp * grid.cell_volume * float(np.sum(state.values))
