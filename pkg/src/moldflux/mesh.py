"""Structured hexahedral mesh of the mold slab.

Axis convention: x spans the wide face, y the thickness, z the casting
direction.  The hot face (unknown Neumann flux) is the whole y=0 plane,
the cold face (convective cooling) the y=ly plane, and the four remaining
sides are adiabatic.  Cells are uniform boxes; cell (i, j, k) has linear
index ``i + nx*j + nx*ny*k``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class FaceSet:
    """Boundary faces of one kind: owning cell, centroid, area, outward normal."""

    cells: np.ndarray      # (F,) linear cell index owning each face
    centroids: np.ndarray  # (F, 3) m
    areas: np.ndarray      # (F,) m^2
    normals: np.ndarray    # (F, 3) unit outward

    def __len__(self):
        return self.cells.shape[0]


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    nz: int
    lx: float
    ly: float
    lz: float
    cell_centers: np.ndarray = field(repr=False)  # (n_cells, 3)
    hot_faces: FaceSet = field(repr=False)        # y = 0 plane
    cold_faces: FaceSet = field(repr=False)       # y = ly plane
    adiabatic_faces: FaceSet = field(repr=False)  # the four x/z sides

    @property
    def n_cells(self):
        return self.nx * self.ny * self.nz

    @property
    def spacing(self):
        return (self.lx / self.nx, self.ly / self.ny, self.lz / self.nz)

    @property
    def cell_volume(self):
        dx, dy, dz = self.spacing
        return dx * dy * dz

    def cell_index(self, i, j, k):
        return i + self.nx * (j + self.ny * k)

    def cell_of_point(self, point):
        """Linear index of the cell containing ``point``.

        Points exactly on an interior cell face belong to the higher-index
        cell (floor arithmetic); points on the domain boundary are clamped
        inward.  Raises ConfigurationError outside the domain.
        """
        x, y, z = point
        if not (0.0 <= x <= self.lx and 0.0 <= y <= self.ly and 0.0 <= z <= self.lz):
            raise ConfigurationError(
                f"point {tuple(point)} lies outside the domain "
                f"[0,{self.lx}]x[0,{self.ly}]x[0,{self.lz}]"
            )
        dx, dy, dz = self.spacing
        i = min(int(x / dx), self.nx - 1)
        j = min(int(y / dy), self.ny - 1)
        k = min(int(z / dz), self.nz - 1)
        return self.cell_index(i, j, k)

    def cells_of_points(self, points):
        return np.array([self.cell_of_point(p) for p in np.atleast_2d(points)])


def _face_grid(coords_a, coords_b, const_axis, const_value, axes):
    """Centroids for a rectangular patch of faces with one frozen coordinate."""
    a, b = np.meshgrid(coords_a, coords_b, indexing="ij")
    out = np.empty((a.size, 3))
    out[:, axes[0]] = a.ravel()
    out[:, axes[1]] = b.ravel()
    out[:, const_axis] = const_value
    return out


def build_grid(lx, ly, lz, nx, ny, nz):
    """Build a uniform structured grid with tagged boundary faces.

    Hot faces are ordered x-major over (i, k): ``face_id = i*nz + k``; the
    cold face set uses the same ordering.
    """
    for name, val in (("lx", lx), ("ly", ly), ("lz", lz)):
        if not val > 0:
            raise ConfigurationError(f"extent {name}={val} must be positive")
    for name, val in (("nx", nx), ("ny", ny), ("nz", nz)):
        if int(val) != val or val < 2:
            raise ConfigurationError(f"cell count {name}={val} must be an integer >= 2")
    nx, ny, nz = int(nx), int(ny), int(nz)

    dx, dy, dz = lx / nx, ly / ny, lz / nz
    xs = (np.arange(nx) + 0.5) * dx
    ys = (np.arange(ny) + 0.5) * dy
    zs = (np.arange(nz) + 0.5) * dz
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    # linear index i + nx*j + nx*ny*k  <=>  Fortran-ravel of (i, j, k)
    centers = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])

    ii, kk = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
    ii, kk = ii.ravel(), kk.ravel()

    hot_cells = ii + nx * (0 + ny * kk)
    hot = FaceSet(
        cells=hot_cells,
        centroids=_face_grid(xs, zs, 1, 0.0, (0, 2)),
        areas=np.full(ii.size, dx * dz),
        normals=np.tile([0.0, -1.0, 0.0], (ii.size, 1)),
    )
    cold_cells = ii + nx * ((ny - 1) + ny * kk)
    cold = FaceSet(
        cells=cold_cells,
        centroids=_face_grid(xs, zs, 1, ly, (0, 2)),
        areas=np.full(ii.size, dx * dz),
        normals=np.tile([0.0, 1.0, 0.0], (ii.size, 1)),
    )

    # adiabatic: x=0, x=lx (area dy*dz) and z=0, z=lz (area dx*dy)
    jj, kk2 = np.meshgrid(np.arange(ny), np.arange(nz), indexing="ij")
    jj, kk2 = jj.ravel(), kk2.ravel()
    ii2, jj2 = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ii2, jj2 = ii2.ravel(), jj2.ravel()

    ad_cells = np.concatenate([
        0 + nx * (jj + ny * kk2),
        (nx - 1) + nx * (jj + ny * kk2),
        ii2 + nx * (jj2 + ny * 0),
        ii2 + nx * (jj2 + ny * (nz - 1)),
    ])
    ad_centroids = np.concatenate([
        _face_grid(ys, zs, 0, 0.0, (1, 2)),
        _face_grid(ys, zs, 0, lx, (1, 2)),
        _face_grid(xs, ys, 2, 0.0, (0, 1)),
        _face_grid(xs, ys, 2, lz, (0, 1)),
    ])
    ad_areas = np.concatenate([
        np.full(jj.size, dy * dz),
        np.full(jj.size, dy * dz),
        np.full(ii2.size, dx * dy),
        np.full(ii2.size, dx * dy),
    ])
    ad_normals = np.concatenate([
        np.tile([-1.0, 0.0, 0.0], (jj.size, 1)),
        np.tile([1.0, 0.0, 0.0], (jj.size, 1)),
        np.tile([0.0, 0.0, -1.0], (ii2.size, 1)),
        np.tile([0.0, 0.0, 1.0], (ii2.size, 1)),
    ])
    adiabatic = FaceSet(cells=ad_cells, centroids=ad_centroids, areas=ad_areas, normals=ad_normals)

    n_boundary = 2 * (nx * nz + ny * nz + nx * ny)
    assert len(hot) + len(cold) + len(adiabatic) == n_boundary

    return Grid(nx=nx, ny=ny, nz=nz, lx=float(lx), ly=float(ly), lz=float(lz),
                cell_centers=centers, hot_faces=hot, cold_faces=cold,
                adiabatic_faces=adiabatic)


def refine(grid, factor=2):
    """Same domain, ``factor`` times as many cells per axis."""
    return build_grid(grid.lx, grid.ly, grid.lz,
                      grid.nx * factor, grid.ny * factor, grid.nz * factor)
