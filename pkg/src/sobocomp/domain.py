"""Cartesian cell grids, cell-mass measures and weighted norms.

A domain is a uniform grid on a box in R^n (n <= 3) with a boolean mask of
active cells.  Everything downstream works on the *active* cells only, in
C (lexicographic) order: scalar fields are ``(m,)`` arrays, vector fields are
``(m, dim)`` arrays and cell sets are ``(m,)`` boolean masks.

Measures are stored as per-cell masses (density times cell volume), so the
measure of a cell set is a plain sum and integrals are midpoint sums.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ConfigError,
    PreconditionError,
    SingularWeightError,
    UnsupportedConfiguration,
    ZeroMeasureError,
)
from .expr import compile_expr


@dataclass(frozen=True, eq=False)
class GridDomain:
    dim: int
    bounds: tuple
    cells_per_axis: tuple
    full_mask: np.ndarray = field(repr=False)
    spacing: tuple
    cell_volume: float
    centers: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)
    mask_source: str = None
    _multi: np.ndarray = field(default=None, repr=False)

    @property
    def n_active(self):
        return self.centers.shape[0]

    @property
    def n_cells(self):
        return int(np.prod(self.cells_per_axis))

    @property
    def diameter(self):
        return float(math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.bounds)))

    def all_cells(self):
        return np.ones(self.n_active, dtype=bool)

    def no_cells(self):
        return np.zeros(self.n_active, dtype=bool)

    def window(self, i, halfwidth):
        """Active indices whose centers may lie within ``halfwidth[k]`` of cell i
        along every axis k (a superset; callers filter by distance)."""
        c = self.multi_index()[i] if self._multi is None else self._multi[i]
        sl = []
        for k in range(self.dim):
            if not np.isfinite(halfwidth[k]):
                sl.append(slice(None))
                continue
            reach = int(math.ceil(halfwidth[k] / self.spacing[k])) + 1
            sl.append(slice(max(0, c[k] - reach), c[k] + reach + 1))
        idx = self.index[tuple(sl)].ravel()
        return idx[idx >= 0]

    def inactive_centers(self):
        return _axis_centers_grid(self)[~self.full_mask.ravel()]

    def multi_index(self):
        """Integer grid coordinates of each active cell, shape ``(m, dim)``."""
        return np.argwhere(self.full_mask)

    def cell_of(self, point):
        """Active index of the cell containing ``point``; raises if inactive."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for k in range(self.dim):
            lo, hi = self.bounds[k]
            j = int(math.floor((point[k] - lo) / self.spacing[k]))
            if j < 0 or j >= self.cells_per_axis[k]:
                raise PreconditionError(f"point {point.tolist()} lies outside the grid bounds")
            idx.append(j)
        a = int(self.index[tuple(idx)])
        if a < 0:
            raise PreconditionError(f"point {point.tolist()} lies in an inactive cell")
        return a

    def spec(self):
        out = {
            "dim": self.dim,
            "bounds": [list(b) for b in self.bounds],
            "cells": list(self.cells_per_axis),
        }
        if self.mask_source is not None:
            out["mask"] = self.mask_source
        return out


def _axis_centers(bounds, cells, spacing):
    return [lo + (np.arange(c) + 0.5) * h for (lo, _), c, h in zip(bounds, cells, spacing)]


def _axis_centers_grid(domain):
    axes = _axis_centers(domain.bounds, domain.cells_per_axis, domain.spacing)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def build_grid(dim, bounds, cells, mask=None):
    """Uniform grid on ``bounds`` with ``cells`` cells per axis.

    ``bounds`` is a pair (1-d) or a list of pairs; a single pair is broadcast to
    every axis.  ``cells`` is an int (broadcast) or one int per axis.  ``mask``
    is an expression string, a callable on ``(k, dim)`` centers, or a boolean
    array shaped like the grid; a cell is active when its center satisfies it.
    """
    if dim not in (1, 2, 3):
        raise ConfigError(f"dim must be 1, 2 or 3, got {dim!r}")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape == (2,):
        bounds = np.tile(bounds, (dim, 1))
    if bounds.shape != (dim, 2):
        raise ConfigError(f"bounds must be one pair or {dim} pairs, got shape {bounds.shape}")
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ConfigError(f"degenerate bounds {bounds.tolist()}")
    cells = np.atleast_1d(np.asarray(cells))
    if cells.size == 1:
        cells = np.repeat(cells, dim)
    if cells.shape != (dim,) or not np.all(cells == np.round(cells)):
        raise ConfigError(f"cells must be {dim} integers, got {cells.tolist()}")
    cells = tuple(int(c) for c in cells)
    if any(c <= 0 for c in cells):
        raise ConfigError(f"cell counts must be positive, got {list(cells)}")

    bounds_t = tuple((float(lo), float(hi)) for lo, hi in bounds)
    spacing = tuple((hi - lo) / c for (lo, hi), c in zip(bounds_t, cells))
    volume = float(np.prod(spacing))
    axes = _axis_centers(bounds_t, cells, spacing)
    mesh = np.meshgrid(*axes, indexing="ij")
    all_centers = np.stack([m.ravel() for m in mesh], axis=1)

    source = None
    if mask is None:
        full = np.ones(cells, dtype=bool)
    elif isinstance(mask, str):
        source = mask
        full = np.asarray(compile_expr(mask)(all_centers), dtype=bool).reshape(cells)
    elif callable(mask):
        full = np.asarray(mask(all_centers), dtype=bool).reshape(cells)
    else:
        full = np.asarray(mask, dtype=bool)
        if full.shape != cells:
            raise ConfigError(f"mask shape {full.shape} does not match cells {cells}")
    if not full.any():
        raise ConfigError("mask leaves no active cell")

    index = np.full(cells, -1, dtype=np.int64)
    index[full] = np.arange(int(full.sum()))
    centers = all_centers[full.ravel()]
    multi = np.argwhere(full)
    for arr in (full, index, centers, multi):
        arr.setflags(write=False)
    return GridDomain(
        dim=dim,
        bounds=bounds_t,
        cells_per_axis=cells,
        full_mask=full,
        spacing=spacing,
        cell_volume=volume,
        centers=centers,
        index=index,
        mask_source=source,
        _multi=multi,
    )


def distance_to_complement(domain, include_faces=True):
    """Euclidean distance from each active center to the complement.

    The complement is represented by the inactive cell centers and, unless
    ``include_faces`` is false, by the faces of the bounding box.
    """
    inactive = domain.inactive_centers()
    if inactive.shape[0] == 0 and not include_faces:
        raise UnsupportedConfiguration("complement is empty: every cell is active and faces are excluded")
    best = np.full(domain.n_active, np.inf)
    if include_faces:
        for k, (lo, hi) in enumerate(domain.bounds):
            x = domain.centers[:, k]
            best = np.minimum(best, np.minimum(x - lo, hi - x))
    if inactive.shape[0]:
        dist, _ = cKDTree(inactive).query(domain.centers, k=1)
        best = np.minimum(best, dist)
    return best


@dataclass(frozen=True, eq=False)
class Measure:
    domain: GridDomain
    mass: np.ndarray = field(repr=False)
    density: np.ndarray = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (self.domain.n_active,):
            raise PreconditionError(f"mass has shape {mass.shape}, expected ({self.domain.n_active},)")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            bad = int(np.flatnonzero(~np.isfinite(mass) | (mass < 0))[0])
            raise PreconditionError(
                "measure masses must be finite and nonnegative",
                witness={"cell": bad, "mass": float(mass[bad])},
            )
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    def of(self, cells=None):
        """Measure of a cell set (whole domain when ``cells`` is None)."""
        if cells is None:
            return float(self.mass.sum())
        return float(self.mass[cells].sum())

    @property
    def total(self):
        return float(self.mass.sum())


def lebesgue(domain):
    return Measure(domain, np.full(domain.n_active, domain.cell_volume),
                   np.ones(domain.n_active), "lebesgue")


def density_measure(domain, density, label="density"):
    """Measure with the given per-cell density (array, callable or expression)."""
    if isinstance(density, str):
        label = density
        density = compile_expr(density)(domain.centers)
    elif callable(density):
        density = density(domain.centers)
    density = np.broadcast_to(np.asarray(density, dtype=float), (domain.n_active,)).copy()
    if not np.all(np.isfinite(density)):
        bad = int(np.flatnonzero(~np.isfinite(density))[0])
        raise SingularWeightError(
            f"density is not finite at cell {bad}",
            witness={"cell": bad, "center": domain.centers[bad].tolist()},
        )
    return Measure(domain, density * domain.cell_volume, density, label)


def power_weight(domain, rho, alpha):
    """Measure ``rho(x)^alpha dx``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise PreconditionError("rho must be nonnegative")
    if alpha == 0:
        return Measure(domain, np.full(domain.n_active, domain.cell_volume),
                       np.ones(domain.n_active), "power^0")
    if alpha < 0 and np.any(rho == 0):
        bad = int(np.flatnonzero(rho == 0)[0])
        raise SingularWeightError(
            f"rho vanishes at active cell {bad} with negative exponent {alpha}",
            witness={"cell": bad, "center": domain.centers[bad].tolist()},
        )
    density = rho ** alpha
    return Measure(domain, density * domain.cell_volume, density, f"power^{alpha}")


def lp_norm(f, p, m, E=None):
    f = np.asarray(f, dtype=float)
    if E is None:
        E = slice(None)
    vals = np.abs(f[E])
    if p == math.inf:
        return float(vals.max()) if vals.size else 0.0
    if p < 1:
        raise PreconditionError(f"p must be >= 1, got {p}")
    return float(np.sum(vals ** p * m.mass[E]) ** (1.0 / p))


def average(f, E, m):
    """Mass-weighted mean of ``f`` over the cell set ``E``."""
    if E is None:
        E = slice(None)
    total = float(m.mass[E].sum())
    if total <= 0:
        raise ZeroMeasureError("cannot average over a set of zero measure")
    return float(np.dot(np.asarray(f, dtype=float)[E], m.mass[E]) / total)


def field_rows(domain, values):
    """Rows ``(cell, x1..xn, value...)`` for CSV export."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    rows = []
    for i in range(domain.n_active):
        rows.append([i, *domain.centers[i].tolist(), *values[i].tolist()])
    return rows
