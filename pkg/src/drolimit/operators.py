"""One-period robust operators, their compositions, and the scaling limit.

Per grid node x and action a, one period of length t is the worst-case
expectation of f(psi_t^a(x) + z) over the Wasserstein ball of radius t*m
around the Gaussian quadrature law of Y_t^a.  The robust (worst case, best
action) operator takes the node-wise min over actions, the best-case operator
the max.  Compositions over a partition apply the one-period operator over
the successive gaps, rightmost gap first; the scaling limit follows the
dyadic partition sequence, whose values decrease node-wise as the mesh is
refined.

Candidate destinations for the inner worst case live on a lattice of offsets
around each quadrature atom spanning [-reach * r, reach * r].  The lattice
spacing is proportional to the radius r (a fixed number of points per side),
so the relative quality of the inner maximization is scale-free along the
dyadic refinement; resolution is controlled by ``cand_per_side`` and audited
by the refinement certificates in the validation module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dual import AmbiguitySpec, solve_batch
from .errors import InputError
from .fields import CompactWindow, Grid, ScalarField, lipschitz_estimate, sup_distance
from .models import ReferenceModel, law, psi

Array = np.ndarray

MODE_DRO = "dro"
MODE_BEST_CASE = "best_case"


@dataclass(frozen=True)
class Partition:
    """Finite time grid 0 = t_0 < t_1 < ... < t_k."""

    times: Tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", ts)
        if not ts or ts[0] != 0.0:
            raise InputError("partition must start at 0")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InputError("partition times must be strictly increasing")

    @property
    def horizon(self) -> float:
        return self.times[-1]

    @property
    def mesh(self) -> float:
        if len(self.times) == 1:
            return 0.0
        return max(b - a for a, b in zip(self.times, self.times[1:]))

    @property
    def gaps(self) -> Tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.times, self.times[1:]))

    def refines(self, other: "Partition") -> bool:
        """True if every time of ``other`` appears in this partition."""
        mine = set(self.times)
        return all(t in mine for t in other.times)


@dataclass(frozen=True)
class DyadicSchedule:
    """Horizon t and refinement level n for the dyadic partition sequence."""

    horizon: float
    level: int

    def __post_init__(self):
        if self.horizon < 0:
            raise InputError("horizon must be nonnegative")
        if self.level < 0:
            raise InputError("level must be nonnegative")

    def partition(self) -> Partition:
        return dyadic_partition(self.horizon, self.level)


def dyadic_partition(t: float, level: int) -> Partition:
    """{0, 2^-n, 2*2^-n, ..., k 2^-n, t} with k the largest k 2^-n < t."""
    if t < 0 or level < 0:
        raise InputError("need t >= 0 and level >= 0")
    if t == 0.0:
        return Partition((0.0,))
    step = 2.0 ** (-level)
    k = int(np.floor(t / step))
    if k * step >= t:
        k -= 1
    times = [i * step for i in range(k + 1)] + [t]
    return Partition(tuple(times))


@dataclass(eq=False)
class OperatorConfig:
    """Everything a one-period application needs."""

    model: ReferenceModel
    ambiguity: AmbiguitySpec
    grid: Grid
    quad_order: int = 16
    dual_tol: float = 1e-12
    reach_factor: float = 4.0
    cand_per_side: int = 16

    def __post_init__(self):
        if self.model.dim != self.grid.dim:
            raise InputError("model and grid dimensions differ")
        if self.reach_factor <= 0:
            raise InputError("reach_factor must be positive")
        if self.cand_per_side < 1:
            raise InputError("cand_per_side must be >= 1")
        if not self.dual_tol > 0:
            raise InputError("dual_tol must be positive")


def _radius_offsets(radius: float, reach: float, per_side: int, dim: int, p: float):
    """Candidate offsets around each atom and their transport costs, sorted
    by cost ascending so that index 0 is the free stay option."""
    if radius <= 0.0:
        return np.zeros((1, dim)), np.zeros(1)
    span = reach * radius
    step = span / per_side
    line = step * np.arange(-per_side, per_side + 1)  # exact 0 at the center
    if dim == 1:
        offs = line[:, None]
    else:
        xx, yy = np.meshgrid(line, line, indexing="ij")
        offs = np.column_stack([xx.ravel(), yy.ravel()])
        offs = offs[np.linalg.norm(offs, axis=1) <= span * (1 + 1e-12)]
    costs = np.linalg.norm(offs, axis=1) ** p
    order = np.argsort(costs, kind="stable")
    return offs[order], costs[order]


class _StepKernel:
    """Precomputed geometry of one (action, gap) period, reused across the
    steps of a composition: flow of the grid nodes, quadrature atoms and
    weights, candidate offsets/costs, and the flattened evaluation points."""

    __slots__ = ("weights", "costs", "points", "shape", "radius", "p")

    def __init__(self, cfg: OperatorConfig, action, dt: float):
        meas = law(cfg.model, action, dt, cfg.quad_order)
        base = psi(cfg.model, action, dt, cfg.grid.nodes())          # (N, d)
        radius = cfg.ambiguity.radius(dt)
        offs, costs = _radius_offsets(
            radius, cfg.reach_factor, cfg.cand_per_side, cfg.grid.dim, cfg.ambiguity.p
        )
        pts = (
            base[:, None, None, :]
            + meas.atoms[None, :, None, :]
            + offs[None, None, :, :]
        )
        self.shape = pts.shape[:3]
        self.points = pts.reshape(-1, cfg.grid.dim)
        self.weights = meas.weights
        self.costs = costs
        self.radius = radius
        self.p = cfg.ambiguity.p

    def apply(self, cfg: OperatorConfig, f: ScalarField) -> Array:
        g = f.eval(self.points).reshape(self.shape)
        if self.radius <= 0.0 or g.shape[2] == 1:
            return g[:, :, 0] @ self.weights
        return solve_batch(
            g,
            self.costs,
            self.weights,
            self.radius,
            self.p,
            tol=cfg.dual_tol,
            lip_hint=max(lipschitz_estimate(f), 1e-12),
        )


def _node_values_to_field(grid: Grid, vals: Array) -> ScalarField:
    return ScalarField(grid, vals.reshape(grid.shape))


def reference_step(cfg: OperatorConfig, a, t: float, f: ScalarField) -> ScalarField:
    """Linear transition step: quadrature expectation of f(psi_t^a(x) + y)."""
    if t < 0:
        raise InputError("time must be nonnegative")
    if t == 0.0:
        return f
    meas = law(cfg.model, a, t, cfg.quad_order)
    base = psi(cfg.model, a, t, cfg.grid.nodes())
    pts = base[:, None, :] + meas.atoms[None, :, :]
    g = f.eval(pts.reshape(-1, cfg.grid.dim)).reshape(pts.shape[:2])
    return _node_values_to_field(cfg.grid, g @ meas.weights)


def dro_step_single_action(
    cfg: OperatorConfig, a, t: float, f: ScalarField, _cache: Optional[Dict] = None
) -> ScalarField:
    """Worst case over the radius-(t m) ball around the action's law."""
    if t < 0:
        raise InputError("time must be nonnegative")
    if t == 0.0:
        return f
    act = cfg.model.action(a)
    kernel = None
    if _cache is not None:
        kernel = _cache.get((act.label, t))
    if kernel is None:
        kernel = _StepKernel(cfg, act, t)
        if _cache is not None:
            _cache[(act.label, t)] = kernel
    return _node_values_to_field(cfg.grid, kernel.apply(cfg, f))


def dro_step(
    cfg: OperatorConfig, t: float, f: ScalarField, _cache: Optional[Dict] = None
) -> ScalarField:
    """One robust period: node-wise min over actions of the worst case."""
    vals = None
    for act in cfg.model.actions:
        out = dro_step_single_action(cfg, act, t, f, _cache).values
        vals = out if vals is None else np.minimum(vals, out)
    return ScalarField(cfg.grid, vals)


def best_case_step(
    cfg: OperatorConfig, t: float, f: ScalarField, _cache: Optional[Dict] = None
) -> ScalarField:
    """Best case: node-wise max over actions of the worst-case expectation."""
    vals = None
    for act in cfg.model.actions:
        out = dro_step_single_action(cfg, act, t, f, _cache).values
        vals = out if vals is None else np.maximum(vals, out)
    return ScalarField(cfg.grid, vals)


def reference_inf_step(cfg: OperatorConfig, t: float, f: ScalarField) -> ScalarField:
    """Non-robust Bellman step: node-wise min over actions of the reference."""
    vals = None
    for act in cfg.model.actions:
        out = reference_step(cfg, act, t, f).values
        vals = out if vals is None else np.minimum(vals, out)
    return ScalarField(cfg.grid, vals)


def compose(cfg: OperatorConfig, pi: Partition, f: ScalarField, mode: str = MODE_DRO) -> ScalarField:
    """Multi-period value over a partition, rightmost gap applied first."""
    if mode not in (MODE_DRO, MODE_BEST_CASE):
        raise InputError(f"unknown composition mode {mode!r}")
    step = dro_step if mode == MODE_DRO else best_case_step
    cache: Dict = {}
    out = f
    for gap in reversed(pi.gaps):
        out = step(cfg, gap, out, cache)
    return out


@dataclass
class ScalingLimitResult:
    field: ScalarField
    levels_used: int
    level_gaps: List[float]
    levels: List[int]
    converged: bool


def scaling_limit(
    cfg: OperatorConfig,
    t: float,
    f: ScalarField,
    max_level: int = 8,
    stop_tol: float = 1e-3,
    window: Optional[CompactWindow] = None,
) -> ScalingLimitResult:
    """Dyadic approximation of the infimum over partitions.

    Runs the composition over the dyadic partitions of [0, t] for increasing
    level, recording window sup-distances between successive distinct levels,
    and stops when that gap drops to ``stop_tol``.  Levels whose partition
    repeats the previous one (t smaller than the dyadic step) are skipped;
    they define the same composition.  Non-convergence within ``max_level``
    is reported in the result, not raised.
    """
    if max_level > 10:
        raise InputError("max_level > 10 doubles cost per level; refusing")
    if not stop_tol >= 0:
        raise InputError("stop_tol must be nonnegative")
    if t == 0.0:
        return ScalingLimitResult(f, 0, [], [], True)
    prev_part = None
    prev_field = None
    gaps: List[float] = []
    levels: List[int] = []
    converged = False
    for n in range(max_level + 1):
        part = dyadic_partition(t, n)
        if prev_part is not None and part.times == prev_part.times:
            continue
        out = compose(cfg, part, f, MODE_DRO)
        levels.append(n)
        if prev_field is not None:
            gaps.append(sup_distance(out, prev_field, window))
            if gaps[-1] <= stop_tol:
                prev_field = out
                prev_part = part
                converged = True
                break
        prev_field = out
        prev_part = part
    return ScalingLimitResult(prev_field, len(levels), gaps, levels, converged)


def best_case_diagnostic(
    cfg: OperatorConfig, t: float, f: ScalarField, max_level: int = 6
) -> List[ScalarField]:
    """Best-case compositions over the dyadic sequence, levels 0..max_level.

    A lower diagnostic for the mesh-restricted sup over partitions; no
    convergence claim is attached to it.
    """
    if t == 0.0:
        return [f]
    out: List[ScalarField] = []
    prev_part = None
    for n in range(max_level + 1):
        part = dyadic_partition(t, n)
        if prev_part is not None and part.times == prev_part.times:
            out.append(out[-1])
            continue
        out.append(compose(cfg, part, f, MODE_BEST_CASE))
        prev_part = part
    return out
