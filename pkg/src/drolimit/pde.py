"""Monotone explicit finite differences for the limiting nonlinear PDE.

Initial-value form:

    dv/dt = inf_a [ 1/2 tr(sigma(a) sigma(a)^T D^2 v) + <b(a, x), grad v> ]
            + m * ||grad v||

with b(a, x) = b(a) for the Brownian family and -theta(a) x + kappa(a) for
the Ornstein-Uhlenbeck family.  Diffusion uses centered second differences,
drift is upwinded by sign, and the gradient-magnitude source uses the
monotone Godunov selector per axis

    g = max(0, -D^- v, D^+ v),

combined across axes by the Euclidean norm.  This orientation makes the
update nondecreasing in every neighbor value for the +m||grad v|| source
(neighbors can only push a node up), which is the defining monotonicity
property; the explicit step is stable under the CFL bound below.  Terminal
value problems reduce to this solver by the substitution w(tau) = v(T - tau).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .fields import Grid, ScalarField, gradient_fd
from .models import BROWNIAN
from .operators import OperatorConfig

Array = np.ndarray


@dataclass
class PdeScheme:
    """Time step controls; ``dt=None`` derives the step from the CFL bound."""

    dt: Optional[float] = None
    upwind: str = "godunov"
    boundary: str = "clamp"
    cfl_safety: float = 0.8

    def __post_init__(self):
        if self.upwind != "godunov":
            raise ConfigError(f"unsupported upwind rule {self.upwind!r}")
        if self.boundary != "clamp":
            raise ConfigError(f"unsupported boundary rule {self.boundary!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError("cfl_safety must lie in (0, 1]")


@dataclass
class SpaceTimeField:
    grid: Grid
    times: List[float]
    snapshots: List[ScalarField]

    def __post_init__(self):
        if len(self.times) != len(self.snapshots):
            raise InputError("one snapshot per time required")

    def at(self, t: float) -> ScalarField:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise InputError(f"no snapshot recorded at t={t}")
        return self.snapshots[i]

    def save_csv(self, path) -> None:
        import csv

        g = self.grid
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + (["x", "value"] if g.dim == 1 else ["x", "y", "value"]))
            for t, snap in zip(self.times, self.snapshots):
                if g.dim == 1:
                    for x, v in zip(g.axes[0], snap.values):
                        w.writerow([repr(float(t)), repr(float(x)), repr(float(v))])
                else:
                    for i, x in enumerate(g.axes[0]):
                        for j, y in enumerate(g.axes[1]):
                            w.writerow(
                                [repr(float(t)), repr(float(x)), repr(float(y)), repr(float(snap.values[i, j]))]
                            )


def _drift_arrays(cfg: OperatorConfig) -> List[List[Array]]:
    """Per action, per axis drift values on the grid (constants broadcast)."""
    grid = cfg.grid
    model = cfg.model
    out = []
    if grid.dim == 1:
        coords = [grid.axes[0]]
    else:
        xx, yy = np.meshgrid(grid.axes[0], grid.axes[1], indexing="ij")
        coords = [xx, yy]
    for act in model.actions:
        if model.family == BROWNIAN:
            out.append([np.full(grid.shape, act.drift[ax]) for ax in range(grid.dim)])
        else:
            per_axis = []
            for ax in range(grid.dim):
                vals = np.full(grid.shape, act.kappa[ax], dtype=float)
                for ax2 in range(grid.dim):
                    vals -= act.theta[ax, ax2] * coords[ax2]
                per_axis.append(vals)
            out.append(per_axis)
    return out


def _diffusion_diagonals(cfg: OperatorConfig) -> List[Array]:
    """Per action the diagonal of sigma sigma^T; rejects cross terms in 2-d
    (monotone discretization of mixed derivatives is out of scope)."""
    out = []
    for act in cfg.model.actions:
        ssT = act.sigma @ act.sigma.T
        if cfg.grid.dim == 2:
            off = abs(ssT[0, 1])
            if off > 1e-12 * max(1.0, abs(ssT).max()):
                raise ConfigError("2-d solver requires diagonal sigma sigma^T")
        out.append(np.diag(ssT).copy())
    return out


def cfl_time_step(cfg: OperatorConfig, scheme: PdeScheme) -> float:
    """Largest dt with dt * [sum_ax max_a (ssT)_aa / h_ax^2
    + sum_ax (max_a |b_ax| + m) / h_ax] <= cfl_safety."""
    drifts = _drift_arrays(cfg)
    diags = _diffusion_diagonals(cfg)
    denom = 0.0
    for ax in range(cfg.grid.dim):
        h = cfg.grid.spacing[ax]
        max_diff = max(d[ax] for d in diags)
        max_drift = max(float(np.max(np.abs(b[ax]))) for b in drifts)
        denom += max_diff / h ** 2 + (max_drift + cfg.ambiguity.m) / h
    if denom == 0.0:
        return np.inf
    return scheme.cfl_safety / denom


def _shift(v: Array, axis: int, by: int) -> Array:
    """Neighbor values with clamped (edge-replicated) boundary."""
    padded = np.pad(v, 1, mode="edge")
    sl = [slice(1, -1)] * v.ndim
    sl[axis] = slice(1 + by, v.shape[axis] + 1 + by)
    return padded[tuple(sl)]


def generator_apply(cfg: OperatorConfig, f: ScalarField) -> ScalarField:
    """Central-difference evaluation of inf_a L^a f + m ||grad f||.

    Diagnostic only: meaningful where f is smooth; the time stepper uses the
    upwind forms instead.
    """
    grid = cfg.grid
    v = f.values
    grads = [g.values for g in gradient_fd(f)]
    second = []
    for ax in range(grid.dim):
        h = grid.spacing[ax]
        second.append((_shift(v, ax, 1) - 2 * v + _shift(v, ax, -1)) / h ** 2)
    drifts = _drift_arrays(cfg)
    diags = _diffusion_diagonals(cfg)
    best = None
    for b, d in zip(drifts, diags):
        cand = np.zeros(grid.shape)
        for ax in range(grid.dim):
            cand += 0.5 * d[ax] * second[ax] + b[ax] * grads[ax]
        best = cand if best is None else np.minimum(best, cand)
    grad_norm = np.sqrt(sum(g ** 2 for g in grads))
    return ScalarField(grid, best + cfg.ambiguity.m * grad_norm)


def step_forward(cfg: OperatorConfig, scheme: PdeScheme, v: ScalarField, dt: Optional[float] = None) -> ScalarField:
    """One explicit Euler step of size dt (defaults to the scheme's)."""
    if dt is None:
        dt = scheme.dt if scheme.dt is not None else cfl_time_step(cfg, scheme)
    bound = cfl_time_step(cfg, scheme)
    if dt > bound * (1 + 1e-12):
        raise ConfigError(f"dt={dt} violates the CFL bound {bound}")
    grid = cfg.grid
    vals = v.values
    dplus, dminus, second = [], [], []
    for ax in range(grid.dim):
        h = grid.spacing[ax]
        up = _shift(vals, ax, 1)
        dn = _shift(vals, ax, -1)
        dplus.append((up - vals) / h)
        dminus.append((vals - dn) / h)
        second.append((up - 2 * vals + dn) / h ** 2)
    drifts = _drift_arrays(cfg)
    diags = _diffusion_diagonals(cfg)
    best = None
    for b, d in zip(drifts, diags):
        cand = np.zeros(grid.shape)
        for ax in range(grid.dim):
            bp = np.maximum(b[ax], 0.0)
            bm = np.minimum(b[ax], 0.0)
            cand += 0.5 * d[ax] * second[ax] + bp * dplus[ax] + bm * dminus[ax]
        best = cand if best is None else np.minimum(best, cand)
    gsq = np.zeros(grid.shape)
    for ax in range(grid.dim):
        sel = np.maximum(0.0, np.maximum(-dminus[ax], dplus[ax]))
        gsq += sel ** 2
    return ScalarField(grid, vals + dt * (best + cfg.ambiguity.m * np.sqrt(gsq)))


def solve(
    cfg: OperatorConfig,
    scheme: PdeScheme,
    u0: ScalarField,
    horizon: float,
    snapshot_times: Optional[Sequence[float]] = None,
) -> SpaceTimeField:
    """March the initial condition to the horizon, recording snapshots.

    Snapshot times are hit exactly by shortening the step that would
    overshoot them (shorter steps keep the CFL bound).
    """
    if horizon < 0:
        raise InputError("horizon must be nonnegative")
    snaps = sorted(set(float(s) for s in (snapshot_times or [])) | {float(horizon)})
    if snaps and (snaps[0] < 0 or snaps[-1] > horizon + 1e-12):
        raise InputError("snapshot times must lie in [0, horizon]")
    dt = scheme.dt if scheme.dt is not None else cfl_time_step(cfg, scheme)
    if not np.isfinite(dt):
        dt = horizon if horizon > 0 else 1.0
    times: List[float] = []
    fields: List[ScalarField] = []
    t = 0.0
    v = u0
    if snaps and snaps[0] == 0.0:
        times.append(0.0)
        fields.append(v)
        snaps = snaps[1:]
    for target in snaps:
        while t < target - 1e-12:
            step = min(dt, target - t)
            v = step_forward(cfg, scheme, v, dt=step)
            t += step
        t = target
        times.append(target)
        fields.append(v)
    return SpaceTimeField(cfg.grid, times, fields)


def solve_terminal(
    cfg: OperatorConfig, scheme: PdeScheme, h: ScalarField, horizon: float
) -> SpaceTimeField:
    """Terminal-value problem -dv/dt = generator, v(T) = h, via time reversal.

    Returns snapshots indexed by the original (forward) time, so ``at(0.0)``
    is the value at time zero."""
    reversed_run = solve(cfg, scheme, h, horizon, snapshot_times=[0.0, horizon])
    times = [horizon - t for t in reversed_run.times][::-1]
    snaps = reversed_run.snapshots[::-1]
    return SpaceTimeField(cfg.grid, times, snaps)
