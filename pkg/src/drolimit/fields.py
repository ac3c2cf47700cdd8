"""Uniform box grids and scalar fields sampled on them.

A ``ScalarField`` stands in for a bounded continuous function: multilinear
interpolation inside the box, constant (clamped) extension outside.  All
convergence diagnostics elsewhere in the package are measured on an interior
``CompactWindow`` so that the clamped boundary never contaminates them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InputError

Array = np.ndarray

_MIN_POINTS = 8


def _as_tuple(v, dim: Optional[int] = None) -> tuple:
    if np.isscalar(v):
        v = (v,)
    t = tuple(v)
    if dim is not None and len(t) != dim:
        raise InputError(f"expected {dim} per-axis entries, got {len(t)}")
    return t


@dataclass(eq=False)
class Grid:
    """Uniform tensor grid on a box in 1 or 2 dimensions.

    Node coordinates along each axis are exactly ``lo + i * spacing`` with
    ``spacing = (hi - lo) / (n - 1)``; node 0 is ``lo``, node ``n - 1`` is
    ``hi``.  Instances are treated as immutable after construction.
    """

    lo: tuple
    hi: tuple
    n: tuple

    def __post_init__(self):
        self.lo = tuple(float(v) for v in _as_tuple(self.lo))
        self.hi = tuple(float(v) for v in _as_tuple(self.hi, len(self.lo)))
        self.n = tuple(int(v) for v in _as_tuple(self.n, len(self.lo)))
        if self.dim not in (1, 2):
            raise InputError(f"grid dimension must be 1 or 2, got {self.dim}")
        for lo, hi, n in zip(self.lo, self.hi, self.n):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InputError(f"need finite lo < hi per axis, got [{lo}, {hi}]")
            if n < _MIN_POINTS:
                raise InputError(f"need at least {_MIN_POINTS} points per axis, got {n}")
        self.spacing = tuple(
            (hi - lo) / (n - 1) for lo, hi, n in zip(self.lo, self.hi, self.n)
        )
        self.axes = tuple(
            lo + h * np.arange(n) for lo, h, n in zip(self.lo, self.spacing, self.n)
        )

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.n))

    def nodes(self) -> Array:
        """All node coordinates as an (num_nodes, dim) array in C order."""
        if self.dim == 1:
            return self.axes[0][:, None]
        xx, yy = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    @classmethod
    def line(cls, lo: float, hi: float, n: int) -> "Grid":
        return cls((lo,), (hi,), (n,))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float], n: Sequence[int]) -> "Grid":
        return cls(tuple(lo), tuple(hi), tuple(n))


@dataclass(eq=False)
class CompactWindow:
    """Interior sub-box on which sup norms and diagnostics are measured."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        self.lo = tuple(float(v) for v in _as_tuple(self.lo))
        self.hi = tuple(float(v) for v in _as_tuple(self.hi, len(self.lo)))
        for lo, hi in zip(self.lo, self.hi):
            if not lo < hi:
                raise InputError(f"window needs lo < hi, got [{lo}, {hi}]")

    def validate_for(self, grid: Grid) -> None:
        # Require a margin of at least 10% of the box width per axis, so the
        # clamped extension cannot reach into measured quantities.
        if len(self.lo) != grid.dim:
            raise InputError("window dimension does not match grid")
        for wlo, whi, glo, ghi in zip(self.lo, self.hi, grid.lo, grid.hi):
            margin = 0.1 * (ghi - glo)
            if wlo < glo + margin - 1e-12 or whi > ghi - margin + 1e-12:
                raise InputError(
                    f"window [{wlo}, {whi}] too close to grid box [{glo}, {ghi}]"
                    f" (need >= 10% margin)"
                )

    def mask(self, grid: Grid) -> Array:
        """Boolean node mask of the window, shaped like the value array."""
        self.validate_for(grid)
        masks = [
            (ax >= lo - 1e-12) & (ax <= hi + 1e-12)
            for ax, lo, hi in zip(grid.axes, self.lo, self.hi)
        ]
        if grid.dim == 1:
            return masks[0]
        return masks[0][:, None] & masks[1][None, :]


class ScalarField:
    """Values of a bounded function on a grid, clamped outside the box."""

    __slots__ = ("grid", "values")

    extension = "clamp"  # the only supported out-of-box rule

    def __init__(self, grid: Grid, values: Array):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise InputError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "ScalarField":
        if grid.dim == 1:
            vals = fn(grid.axes[0])
        else:
            xx, yy = np.meshgrid(grid.axes[0], grid.axes[1], indexing="ij")
            vals = fn(xx, yy)
        return cls(grid, np.broadcast_to(np.asarray(vals, dtype=float), grid.shape).copy())

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    def with_values(self, values: Array) -> "ScalarField":
        return ScalarField(self.grid, values)

    def eval(self, x) -> Array:
        """Interpolate at points ``x`` of shape (d,) or (..., d) (or bare
        floats in 1-d).  Outside the box the nearest boundary value is used."""
        pts = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(pts)):
            raise InputError("evaluation points must be finite")
        scalar_in = False
        if self.grid.dim == 1:
            if pts.ndim == 0:
                scalar_in = True
                pts = pts.reshape(1)
            elif pts.ndim > 1 and pts.shape[-1] == 1:
                pts = pts[..., 0]
            out = np.interp(pts.ravel(), self.grid.axes[0], self.values).reshape(pts.shape)
            return float(out[0]) if scalar_in else out
        if pts.ndim == 1:
            scalar_in = True
            pts = pts.reshape(1, -1)
        out = _bilinear(self.grid, self.values, pts.reshape(-1, 2)).reshape(pts.shape[:-1])
        return float(out[0]) if scalar_in else out

    def sup_norm(self, window: Optional[CompactWindow] = None) -> float:
        if window is None:
            return float(np.max(np.abs(self.values)))
        return float(np.max(np.abs(self.values[window.mask(self.grid)])))

    def __repr__(self):
        return f"ScalarField(dim={self.grid.dim}, n={self.grid.n}, sup={self.sup_norm():.3g})"


def _bilinear(grid: Grid, values: Array, pts: Array) -> Array:
    """Bilinear interpolation with clamped extension, exact at nodes."""
    out_idx = []
    out_frac = []
    for axis in range(2):
        u = (pts[:, axis] - grid.lo[axis]) / grid.spacing[axis]
        u = np.clip(u, 0.0, grid.n[axis] - 1)
        i0 = np.floor(u).astype(np.intp)
        np.minimum(i0, grid.n[axis] - 2, out=i0)
        frac = u - i0
        # snap float wobble so node queries reproduce node values bitwise
        near = np.rint(u)
        snap = np.abs(u - near) < 1e-12
        i_snap = np.minimum(near.astype(np.intp), grid.n[axis] - 2)
        i0 = np.where(snap, i_snap, i0)
        frac = np.where(snap, near - i_snap, frac)
        out_idx.append(i0)
        out_frac.append(frac)
    i, j = out_idx
    fx, fy = out_frac
    v00 = values[i, j]
    v10 = values[i + 1, j]
    v01 = values[i, j + 1]
    v11 = values[i + 1, j + 1]
    return (
        v00 * (1 - fx) * (1 - fy)
        + v10 * fx * (1 - fy)
        + v01 * (1 - fx) * fy
        + v11 * fx * fy
    )


def sup_distance(f: ScalarField, g: ScalarField, window: Optional[CompactWindow] = None) -> float:
    if f.grid is not g.grid and f.grid.shape != g.grid.shape:
        raise InputError("fields live on different grids")
    diff = f.values - g.values
    if window is None:
        return float(np.max(np.abs(diff)))
    return float(np.max(np.abs(diff[window.mask(f.grid)])))


def gradient_fd(field: ScalarField) -> tuple:
    """Per-axis finite-difference gradient fields.

    Central differences at interior nodes (second order for smooth data),
    one-sided at the boundary nodes.
    """
    g = field.grid
    grads = np.gradient(field.values, *g.spacing, edge_order=1)
    if g.dim == 1:
        grads = (grads,)
    return tuple(ScalarField(g, gr) for gr in grads)


def gradient_norm(field: ScalarField) -> ScalarField:
    comps = gradient_fd(field)
    sq = sum(c.values ** 2 for c in comps)
    return ScalarField(field.grid, np.sqrt(sq))


def lipschitz_estimate(field: ScalarField) -> float:
    """Largest axis-wise node-to-node slope; a lower bound on the Lipschitz
    constant of the underlying function that converges for smooth data."""
    g = field.grid
    best = 0.0
    for axis in range(g.dim):
        d = np.diff(field.values, axis=axis) / g.spacing[axis]
        if d.size:
            best = max(best, float(np.max(np.abs(d))))
    return best


def save_csv(field: ScalarField, path) -> None:
    """Dump as ``x[,y],value`` rows with a header; round-trips via load_csv."""
    g = field.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if g.dim == 1:
            w.writerow(["x", "value"])
            for x, v in zip(g.axes[0], field.values):
                w.writerow([repr(float(x)), repr(float(v))])
        else:
            w.writerow(["x", "y", "value"])
            for i, x in enumerate(g.axes[0]):
                for j, y in enumerate(g.axes[1]):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(field.values[i, j]))])


def load_csv(path) -> ScalarField:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    if header[:2] == ["x", "value"]:
        xs = np.array([float(r[0]) for r in data])
        vs = np.array([float(r[1]) for r in data])
        grid = _grid_from_axis(xs)
        return ScalarField(grid, vs)
    if header[:3] == ["x", "y", "value"]:
        xs = np.array([float(r[0]) for r in data])
        ys = np.array([float(r[1]) for r in data])
        vs = np.array([float(r[2]) for r in data])
        ax0 = np.unique(xs)
        ax1 = np.unique(ys)
        grid = Grid.box((ax0[0], ax1[0]), (ax0[-1], ax1[-1]), (len(ax0), len(ax1)))
        return ScalarField(grid, vs.reshape(len(ax0), len(ax1)))
    raise InputError(f"unrecognized field CSV header: {header}")


def _grid_from_axis(xs: Array) -> Grid:
    n = len(xs)
    spac = np.diff(xs)
    if n < _MIN_POINTS or not np.allclose(spac, spac[0], rtol=1e-9, atol=1e-12):
        raise InputError("CSV nodes are not a uniform grid")
    return Grid.line(float(xs[0]), float(xs[-1]), n)
