"""Radial-basis-function parameterization of the hot-face flux.

A flux field on the hot faces is compressed to N weights through a basis
matrix ``phi`` with ``phi[j, f] = kernel(eta, |x_f - c_j|)``, where the
centers c_j sit on the hot-face plane and x_f are the face centroids.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalError
from .mesh import Grid

GAUSSIAN = "gaussian"
MULTIQUADRIC = "multiquadric"
KERNELS = (GAUSSIAN, MULTIQUADRIC)


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    eta: float  # shape parameter: steepness of each basis function

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kind!r}, expected one of {KERNELS}")
        if not self.eta > 0:
            raise ConfigurationError(f"shape parameter eta={self.eta} must be positive")


def eval_kernel(spec: KernelSpec, r):
    """Kernel value at distance r >= 0 (vectorized)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ConfigurationError("kernel distance must be nonnegative")
    s = (spec.eta * r) ** 2
    if spec.kind == GAUSSIAN:
        return np.exp(-s)
    return np.sqrt(1.0 + s)


@dataclass(frozen=True)
class RbfBasis:
    centers: np.ndarray            # (N, 3), on the hot-face plane y=0
    spec: KernelSpec
    phi: np.ndarray = field(repr=False)  # (N, n_hot_faces)

    @property
    def n_weights(self):
        return self.centers.shape[0]

    @property
    def n_faces(self):
        return self.phi.shape[1]


@dataclass
class WeightVector:
    """Signed RBF weights (W/m^2 scale) at one time."""

    values: np.ndarray
    time: float = 0.0


def build_basis(centers, grid: Grid, spec: KernelSpec) -> RbfBasis:
    """Assemble phi over all hot-face centroids for the given centers."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] == 2:  # (x, z) shorthand
        centers = np.column_stack([centers[:, 0], np.zeros(len(centers)), centers[:, 1]])
    if centers.shape[1] != 3:
        raise ConfigurationError("centers must be (x, z) or (x, y, z) coordinates")
    if np.any(np.abs(centers[:, 1]) > 1e-12):
        raise ConfigurationError("RBF centers must lie on the hot-face plane y=0")
    diff = centers[:, None, :] - grid.hot_faces.centroids[None, :, :]
    dists = np.linalg.norm(diff, axis=2)
    # duplicate centers make phi rank-deficient; reject early
    for a in range(len(centers)):
        for b in range(a + 1, len(centers)):
            if np.linalg.norm(centers[a] - centers[b]) < 1e-12:
                raise ConfigurationError(f"duplicate RBF centers at rows {a} and {b}")
    if len(centers) > len(grid.hot_faces):
        raise ConfigurationError("more RBF centers than hot faces")
    return RbfBasis(centers=centers, spec=spec, phi=eval_kernel(spec, dists))


def reconstruct_flux(weights, basis: RbfBasis):
    """Flux at face f is sum_j weights[j] * phi[j, f]."""
    w = weights.values if isinstance(weights, WeightVector) else np.asarray(weights, float)
    if w.ndim != 1 or w.shape[0] != basis.n_weights:
        raise ConfigurationError(
            f"weight vector has shape {w.shape}, basis has {basis.n_weights} centers")
    from .heat import FluxField

    return FluxField(w @ basis.phi, getattr(weights, "time", 0.0))


def project_flux(target, basis: RbfBasis):
    """Least-squares weights for a known flux: solve (phi phi^T) w = phi g.

    Returns (WeightVector, residual) with residual = ||phi^T w - g||_2.
    """
    g = target.values if hasattr(target, "values") else np.asarray(target, float)
    if g.shape[0] != basis.n_faces:
        raise ConfigurationError(
            f"target flux has {g.shape[0]} faces, basis has {basis.n_faces}")
    gram = basis.phi @ basis.phi.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(
            f"RBF gramian is numerically singular (condition estimate {cond:.3e}); "
            "centers or eta give linearly dependent basis rows", condition=cond)
    c, low = scipy.linalg.cho_factor(gram)
    w = scipy.linalg.cho_solve((c, low), basis.phi @ g)
    # one step of iterative refinement: the normal equations square the
    # basis conditioning, which wide kernels make noticeable
    w += scipy.linalg.cho_solve((c, low), basis.phi @ (g - basis.phi.T @ w))
    residual = float(np.linalg.norm(basis.phi.T @ w - g))
    time = getattr(target, "time", 0.0)
    return WeightVector(w, time), residual


def default_centers(grid: Grid, sensor_xz):
    """Five centers: the sensors nearest the quarter points and the middle.

    ``sensor_xz`` are the (x, z) coordinates of the measurement layout
    projected onto the hot face.  Picked targets, in normalized (x, z):
    (1/4, 1/4), (1/4, 3/4), (3/4, 1/4), (3/4, 3/4), (1/2, 1/2).
    """
    pts = np.atleast_2d(np.asarray(sensor_xz, dtype=float))
    targets = np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75], [0.5, 0.5]])
    targets *= [grid.lx, grid.lz]
    chosen = []
    for t in targets:
        order = np.argsort(np.linalg.norm(pts - t, axis=1))
        pick = next(i for i in order if i not in chosen)
        chosen.append(int(pick))
    return np.column_stack([pts[chosen, 0], np.zeros(5), pts[chosen, 1]])
