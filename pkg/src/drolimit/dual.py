"""Worst-case expectations over a Wasserstein ball around a discrete measure.

The inner problem is

    sup { E_nu[g]  :  nu supported on the candidate sets,  W_p(mu, nu) <= r }

with mu = sum_i w_i delta_{y_i} and per-atom candidate destinations Z_i that
always contain y_i itself.  Restricted to finite candidates this is a
transport LP whose dual collapses to one multiplier:

    D(lam) = lam r^p + sum_i w_i max_{z in Z_i} [ g(z) - lam ||z - y_i||^p ],

a convex piecewise-linear function of lam >= 0 whose minimum equals the LP
value (LP strong duality).  ``wasserstein_sup`` minimizes D by bracketed
ternary search; ``brute_force_sup`` enumerates lattice transport plans as an
independent primal oracle; ``solve_batch`` is the vectorized path used by the
operator module (bisection on the subgradient of D, one bracket per grid
node).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import DataError, InputError
from .models import DiscreteMeasure

Array = np.ndarray

_MAX_DOUBLINGS = 200
_STAY_TOL = 1e-9


@dataclass(frozen=True)
class AmbiguitySpec:
    """Uncertainty rate m >= 0 and Wasserstein order p in (1, inf).

    The ambiguity ball at horizon t has radius t * m.
    """

    m: float
    p: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m >= 0):
            raise InputError(f"uncertainty rate m must be >= 0, got {self.m}")
        if not (np.isfinite(self.p) and self.p > 1):
            raise InputError(f"Wasserstein order p must be in (1, inf), got {self.p}")

    def radius(self, t: float) -> float:
        if t < 0:
            raise InputError("time must be nonnegative")
        return self.m * t


@dataclass(frozen=True)
class DualSolution:
    value: float
    lambda_star: float


class DualInstance:
    """One discrete worst-case problem: source atoms, candidate destinations,
    an integrand, a radius, and the transport order p."""

    def __init__(
        self,
        source: DiscreteMeasure,
        candidates: Sequence[Array],
        integrand: Callable[[Array], Array],
        radius: float,
        p: float = 2.0,
    ):
        if radius < 0:
            raise InputError("radius must be nonnegative")
        if not p > 1:
            raise InputError("order p must be > 1")
        if len(candidates) != source.atoms.shape[0]:
            raise InputError("need one candidate set per source atom")
        self.source = source
        self.radius = float(radius)
        self.p = float(p)
        self.integrand = integrand
        self.candidates = []
        d = source.dim
        for i, z in enumerate(candidates):
            z = np.atleast_2d(np.asarray(z, dtype=float))
            if z.ndim == 2 and z.shape[1] != d and z.shape[0] == d and d > 1:
                z = z.T
            if d == 1 and z.shape[1] != 1:
                z = z.reshape(-1, 1)
            dist = np.linalg.norm(z - source.atoms[i], axis=1)
            if dist.min() > _STAY_TOL:
                raise InputError(
                    f"candidate set {i} does not contain its source atom"
                    " (zero-cost stay option required)"
                )
            self.candidates.append(z)

    def _tableau(self):
        """Padded (values, costs) arrays, candidates sorted by cost per atom.

        Sorting ascending by cost makes argmax ties resolve toward the
        cheaper destination, which keeps every downstream choice
        deterministic.
        """
        k = len(self.candidates)
        cmax = max(z.shape[0] for z in self.candidates)
        gvals = np.full((k, cmax), -np.inf)
        costs = np.full((k, cmax), np.inf)
        for i, z in enumerate(self.candidates):
            c = np.linalg.norm(z - self.source.atoms[i], axis=1) ** self.p
            order = np.argsort(c, kind="stable")
            g = np.asarray(self.integrand(z), dtype=float).ravel()
            if g.shape[0] != z.shape[0]:
                raise DataError("integrand returned wrong number of values")
            if not np.all(np.isfinite(g)):
                raise DataError("integrand returned non-finite values")
            gvals[i, : z.shape[0]] = g[order]
            costs[i, : z.shape[0]] = c[order]
        costs[:, 0] = 0.0  # stay option is exactly free
        return gvals, costs


def dual_objective(inst: DualInstance, lam: float) -> float:
    """D(lam) = lam r^p + sum_i w_i max_z [g(z) - lam ||z - y_i||^p]."""
    if lam < 0:
        raise InputError("lambda must be nonnegative")
    gvals, costs = inst._tableau()
    finite = np.isfinite(costs)
    obj = np.where(finite, gvals - lam * np.where(finite, costs, 0.0), -np.inf)
    return float(lam * inst.radius ** inst.p + inst.source.weights @ obj.max(axis=1))


def _value_subgrad(gvals, costs, weights, rp, lam):
    finite = np.isfinite(costs)
    obj = np.where(finite, gvals - lam * np.where(finite, costs, 0.0), -np.inf)
    arg = obj.argmax(axis=1)
    rows = np.arange(obj.shape[0])
    value = lam * rp + weights @ obj[rows, arg]
    sub = rp - weights @ costs[rows, arg]
    return float(value), float(sub)


def wasserstein_sup(
    inst: DualInstance, tol: float = 1e-10, trace: Optional[List] = None
) -> DualSolution:
    """Minimal dual value and its multiplier, by bracketed ternary search.

    The objective is convex in lambda (affine per candidate, max over a
    finite set, positive combination), so ternary search on a bracket whose
    right end has nonnegative subgradient converges to the LP value.  With
    radius zero the plain expectation is returned without any search.
    """
    if not tol > 0:
        raise InputError("tolerance must be positive")
    gvals, costs = inst._tableau()
    w = inst.source.weights
    if inst.radius == 0.0:
        value = float(w @ gvals[:, 0])
        if trace is not None:
            trace.append((0.0, value))
        return DualSolution(value=value, lambda_star=0.0)
    rp = inst.radius ** inst.p

    best_val = np.inf
    best_lam = 0.0

    def probe(lam: float) -> float:
        nonlocal best_val, best_lam
        val, _ = _value_subgrad(gvals, costs, w, rp, lam)
        if trace is not None:
            trace.append((lam, val))
        if val < best_val:
            best_val, best_lam = val, lam
        return val

    # bracket: start from the integrand's Lipschitz scale, double until the
    # subgradient at the right end is nonnegative
    with np.errstate(invalid="ignore"):
        dist = costs ** (1.0 / inst.p)
        slope = np.where(dist > _STAY_TOL, np.abs(gvals - gvals[:, :1]) / np.where(dist > 0, dist, 1.0), 0.0)
    lip = float(np.nanmax(np.where(np.isfinite(slope), slope, 0.0))) if slope.size else 0.0
    hi = lip / (inst.p * max(inst.radius, 1e-12) ** (inst.p - 1.0)) + 1.0
    hi0 = hi
    for _ in range(_MAX_DOUBLINGS):
        _, sub = _value_subgrad(gvals, costs, w, rp, hi)
        if sub >= 0:
            break
        hi *= 2.0
    else:
        raise DataError("dual bracket failed to close; integrand unbounded?")

    probe(0.0)
    probe(hi)
    lo = 0.0
    width_target = tol * (1.0 + hi0)
    for _ in range(500):
        if hi - lo <= width_target:
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if probe(m1) < probe(m2):
            hi = m2
        else:
            lo = m1
    probe(0.5 * (lo + hi))
    return DualSolution(value=best_val, lambda_star=best_lam)


def save_trace_csv(trace, path) -> None:
    """Dump a (lambda, objective) search trace collected by wasserstein_sup."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "objective"])
        for lam, val in trace:
            w.writerow([repr(float(lam)), repr(float(val))])


def wasserstein_inf(inst: DualInstance, tol: float = 1e-10) -> float:
    """Best-case (inner minimization) value: -sup with negated integrand."""
    flipped = DualInstance(
        inst.source,
        inst.candidates,
        lambda z: -np.asarray(inst.integrand(z), dtype=float),
        inst.radius,
        inst.p,
    )
    return -wasserstein_sup(flipped, tol).value


def _simplex_lattice(k: int, steps: int) -> Array:
    """All length-k nonnegative integer tuples summing to steps, as fractions."""
    if k == 1:
        return np.ones((1, 1))
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], steps, k)
    return np.array(out, dtype=float) / steps


def brute_force_sup(inst: DualInstance, grid_steps: int = 8) -> float:
    """Primal enumeration oracle over lattice transport plans.

    Each atom's conditional plan runs over the simplex lattice with
    ``grid_steps`` subdivisions; plans are combined across atoms by outer
    sums and filtered by the p-th moment budget.  Exponential in the instance
    size, so it refuses anything beyond a few atoms and candidates.
    """
    natoms = inst.source.atoms.shape[0]
    biggest = max(z.shape[0] for z in inst.candidates)
    if natoms > 5 or biggest > 12:
        raise InputError(
            f"instance too large for the enumeration oracle"
            f" ({natoms} atoms, up to {biggest} candidates per atom)"
        )
    if grid_steps < 1:
        raise InputError("grid_steps must be >= 1")
    rp = inst.radius ** inst.p
    w = inst.source.weights

    per_atom_vals = []
    per_atom_costs = []
    n_plans = 1
    for i, z in enumerate(inst.candidates):
        g = np.asarray(inst.integrand(z), dtype=float).ravel()
        if not np.all(np.isfinite(g)):
            raise DataError("integrand returned non-finite values")
        c = np.linalg.norm(z - inst.source.atoms[i], axis=1) ** inst.p
        imin = int(np.argmin(c))
        if c[imin] <= _STAY_TOL:
            c[imin] = 0.0  # the stay option is exactly free
        plans = _simplex_lattice(z.shape[0], grid_steps)
        per_atom_vals.append(w[i] * plans @ g)
        per_atom_costs.append(w[i] * plans @ c)
        n_plans *= plans.shape[0]
        if n_plans > 5_000_000:
            raise InputError("instance too large for the enumeration oracle")

    vals = per_atom_vals[0]
    cost = per_atom_costs[0]
    for v, c in zip(per_atom_vals[1:], per_atom_costs[1:]):
        vals = np.add.outer(vals, v).ravel()
        cost = np.add.outer(cost, c).ravel()
    feasible = cost <= rp * (1.0 + 1e-12) + 1e-15
    if not feasible.any():
        raise DataError("oracle found no feasible lattice plan (missing stay option?)")
    return float(vals[feasible].max())


def oracle_resolution(inst: DualInstance, grid_steps: int) -> float:
    """Upper bound on the lattice oracle's shortfall versus the exact LP.

    An optimal basic solution splits at most one atom between two
    destinations, so rounding that split to the lattice loses at most
    max_i w_i * osc_i(g) / grid_steps.
    """
    worst = 0.0
    for i, z in enumerate(inst.candidates):
        g = np.asarray(inst.integrand(z), dtype=float).ravel()
        worst = max(worst, float(inst.source.weights[i] * (g.max() - g.min())))
    return worst / grid_steps


def solve_batch(
    gvals: Array,
    costs: Array,
    weights: Array,
    radius: float,
    p: float,
    tol: float = 1e-10,
    lip_hint: float = 1.0,
) -> Array:
    """Vectorized dual minimization for a batch of instances sharing geometry.

    gvals:   (N, Q, C) integrand values, one row of atoms per grid node
    costs:   (C,) transport costs ||z - y||^p, ascending with costs[0] == 0
    weights: (Q,) source weights

    Returns the per-node LP values, found by bisection on the subgradient of
    the piecewise-linear dual (monotone in lambda); the reported value is the
    running minimum of all evaluated dual objectives, so it is always an
    upper bound on the LP value, within ``tol`` of it at the end.
    """
    n = gvals.shape[0]
    if radius <= 0.0 or gvals.shape[2] == 1:
        return gvals[:, :, 0] @ weights
    if costs[0] != 0.0:
        raise InputError("costs[0] must be the zero-cost stay option")
    rp = radius ** p

    def evaluate(lam: Array):
        obj = gvals - lam[:, None, None] * costs
        arg = obj.argmax(axis=2)
        mx = np.take_along_axis(obj, arg[:, :, None], axis=2)[:, :, 0]
        val = lam * rp + mx @ weights
        sub = rp - costs[arg] @ weights
        return val, sub

    lo = np.zeros(n)
    val0, sub0 = evaluate(lo)
    best = val0.copy()

    hi_scalar = lip_hint / (p * max(radius, 1e-12) ** (p - 1.0)) + 1.0
    hi = np.full(n, hi_scalar)
    need = sub0 < 0
    for _ in range(_MAX_DOUBLINGS):
        if not need.any():
            break
        _, sub_hi = evaluate(hi)
        grow = need & (sub_hi < 0)
        if not grow.any():
            break
        hi[grow] *= 2.0
    else:
        raise DataError("batch dual bracket failed to close")
    hi = np.where(need, hi, 0.0)  # lambda* = 0 where the budget is slack at 0

    cmax = float(costs[-1])
    slope_bound = max(rp, cmax)
    span = float(hi.max())
    if span > 0 and slope_bound > 0:
        iters = int(np.ceil(np.log2(span * slope_bound / tol))) if span * slope_bound > tol else 1
    else:
        iters = 1
    iters = int(np.clip(iters, 30, 120))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val, sub = evaluate(mid)
        np.minimum(best, val, out=best)
        shrink_up = sub < 0
        lo = np.where(shrink_up, mid, lo)
        hi = np.where(shrink_up, hi, mid)
    val, _ = evaluate(0.5 * (lo + hi))
    np.minimum(best, val, out=best)
    return best
