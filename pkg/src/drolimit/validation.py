"""Executable verification of the package's quantitative claims.

Every check returns a ``CheckReport`` with measured errors, thresholds, and a
pass flag; reports are deterministic given (config, seed).  Thresholds are
arguments with defaults matching the shipped acceptance configuration, never
hard-coded mid-computation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dual import AmbiguitySpec, DualInstance, brute_force_sup, oracle_resolution, wasserstein_sup
from .errors import InputError
from .fields import (
    CompactWindow,
    Grid,
    ScalarField,
    gradient_norm,
    lipschitz_estimate,
    sup_distance,
)
from .models import DiscreteMeasure, brownian_model
from .operators import (
    MODE_DRO,
    OperatorConfig,
    best_case_step,
    compose,
    dro_step,
    dyadic_partition,
    reference_inf_step,
    scaling_limit,
)
from .pde import PdeScheme, generator_apply, solve

Array = np.ndarray

_TINY = 1e-300


@dataclass
class CheckReport:
    name: str
    parameters: dict
    measured: List[Tuple[str, float]]
    thresholds: Dict[str, float]
    passed: bool
    runtime_seconds: float
    artifacts: Optional[dict] = field(default=None, repr=False, compare=False)

    def to_dict(self, include_runtime: bool = True) -> dict:
        return {
            "name": self.name,
            "parameters": _jsonable(self.parameters),
            "measured": [[k, float(v)] for k, v in self.measured],
            "thresholds": {k: float(v) for k, v in self.thresholds.items()},
            "passed": bool(self.passed),
            "runtime_seconds": float(self.runtime_seconds) if include_runtime else None,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _finish(name, params, measured, thresholds, t0, artifacts=None) -> CheckReport:
    passed = all(
        value <= thresholds[label] for label, value in measured if label in thresholds
    )
    return CheckReport(
        name=name,
        parameters=params,
        measured=measured,
        thresholds=thresholds,
        passed=passed,
        runtime_seconds=time.perf_counter() - t0,
        artifacts=artifacts,
    )


# ----------------------------------------------------------------------
# test-function library

def normal_cdf(x):
    arr = np.asarray(x, dtype=float)
    flat = np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in arr.ravel()])
    return flat.reshape(arr.shape) if arr.ndim else float(flat[0])


_NAMED = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "gauss": lambda x: np.exp(-0.5 * x ** 2),
    "normal_cdf": normal_cdf,
    "constant": lambda x: np.ones_like(np.asarray(x, dtype=float)),
}


def named_field(grid: Grid, name: str) -> ScalarField:
    try:
        fn = _NAMED[name]
    except KeyError:
        raise InputError(f"unknown test function {name!r}; choose from {sorted(_NAMED)}")
    if grid.dim != 1:
        raise InputError("named test functions are one-dimensional")
    return ScalarField.from_function(grid, fn)


def fourier_field(grid: Grid, rng: np.random.Generator, max_wavenumber: int = 8) -> ScalarField:
    """Random band-limited field: smooth, bounded by 1, known gradient scale."""
    width = grid.hi[0] - grid.lo[0]
    n_modes = int(rng.integers(2, 6))
    ks = rng.integers(1, max_wavenumber + 1, size=n_modes)
    amps = rng.random(n_modes)
    amps /= max(amps.sum(), _TINY)
    phases = rng.uniform(0.0, 2 * np.pi, size=n_modes)
    if grid.dim == 1:
        x = grid.axes[0]
        vals = sum(a * np.cos(k * 2 * np.pi / width * x + p) for a, k, p in zip(amps, ks, phases))
    else:
        xx, yy = np.meshgrid(grid.axes[0], grid.axes[1], indexing="ij")
        dirs = rng.standard_normal((n_modes, 2))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        vals = sum(
            a * np.cos(k * 2 * np.pi / width * (d[0] * xx + d[1] * yy) + p)
            for a, k, p, d in zip(amps, ks, phases, dirs)
        )
    return ScalarField(grid, vals)


# ----------------------------------------------------------------------
# limit checks: sensitivity, generator, semigroup

def check_sensitivity(
    cfg: OperatorConfig,
    f: ScalarField,
    t_list: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
    window: Optional[CompactWindow] = None,
    final_factor: float = 0.05,
    decrease_slack: float = 0.10,
    grid_slack: float = 0.0,
) -> CheckReport:
    """Error of (I(t)f - T(t)f)/t against m ||grad f|| along shrinking t.

    Passes when the window error is nonincreasing (within the stated slack)
    and the final error is below final_factor * m * sup||grad f|| plus the
    grid slack.
    """
    t0 = time.perf_counter()
    ts = sorted(set(float(t) for t in t_list), reverse=True)
    if any(t <= 0 for t in ts):
        raise InputError("sensitivity times must be positive")
    m = cfg.ambiguity.m
    grad = gradient_norm(f)
    target = m * grad.values
    mask = window.mask(cfg.grid) if window is not None else np.ones(cfg.grid.shape, bool)
    errors = []
    for t in ts:
        robust = dro_step(cfg, t, f)
        base = reference_inf_step(cfg, t, f)
        quotient = (robust.values - base.values) / t
        errors.append(float(np.max(np.abs((quotient - target)[mask]))))
    max_ratio = 0.0
    for a, b in zip(errors, errors[1:]):
        max_ratio = max(max_ratio, (b - a) / max(a, 1e-15))
    final_threshold = final_factor * m * float(np.max(grad.values[mask])) + grid_slack
    measured = [("final_error", errors[-1]), ("max_increase_ratio", max_ratio)]
    measured += [(f"error_t={t:g}", e) for t, e in zip(ts, errors)]
    thresholds = {"final_error": final_threshold, "max_increase_ratio": decrease_slack}
    params = {"t_list": ts, "m": m, "p": cfg.ambiguity.p, "function": "given"}
    return _finish("sensitivity_limit", params, measured, thresholds, t0)


def check_generator(
    cfg: OperatorConfig,
    f: ScalarField,
    t_list: Sequence[float] = (0.2, 0.1, 0.05),
    window: Optional[CompactWindow] = None,
    stop_tol: float = 2e-5,
    max_level: int = 6,
    final_factor: float = 0.1,
    decrease_slack: float = 0.10,
) -> CheckReport:
    """Error of (S(t)f - f)/t against inf_a L^a f + m ||grad f||.

    The dyadic depth is capped: each composition stage re-samples the grid,
    and past ``max_level`` the accumulated interpolation bias (of order
    spacing^2 per stage, divided by t in the quotient) would dominate the
    quantity under test.
    """
    t0 = time.perf_counter()
    ts = sorted(set(float(t) for t in t_list), reverse=True)
    if any(t <= 0 for t in ts):
        raise InputError("generator times must be positive")
    target_field = generator_apply(cfg, f)
    mask = window.mask(cfg.grid) if window is not None else np.ones(cfg.grid.shape, bool)
    errors = []
    for t in ts:
        lim = scaling_limit(cfg, t, f, max_level=max_level, stop_tol=stop_tol, window=window)
        quotient = (lim.field.values - f.values) / t
        errors.append(float(np.max(np.abs((quotient - target_field.values)[mask]))))
    max_ratio = 0.0
    for a, b in zip(errors, errors[1:]):
        max_ratio = max(max_ratio, (b - a) / max(a, 1e-15))
    bellman_cfg = replace(cfg, ambiguity=AmbiguitySpec(m=0.0, p=cfg.ambiguity.p))
    bellman_sup = float(np.max(np.abs(generator_apply(bellman_cfg, f).values[mask])))
    grad_sup = float(np.max(gradient_norm(f).values[mask]))
    threshold = final_factor * (bellman_sup + cfg.ambiguity.m * grad_sup)
    measured = [("final_error", errors[-1]), ("max_increase_ratio", max_ratio)]
    measured += [(f"error_t={t:g}", e) for t, e in zip(ts, errors)]
    thresholds = {"final_error": threshold, "max_increase_ratio": decrease_slack}
    params = {"t_list": ts, "m": cfg.ambiguity.m, "stop_tol": stop_tol}
    return _finish("generator_identity", params, measured, thresholds, t0)


def check_semigroup(
    cfg: OperatorConfig,
    f: ScalarField,
    pairs: Sequence[Tuple[float, float]] = ((0.25, 0.25), (0.5, 0.25)),
    window: Optional[CompactWindow] = None,
    stop_tol: float = 1e-3,
    max_level: int = 8,
    gap_factor: float = 5.0,
    extra_slack: float = 1e-3,
) -> CheckReport:
    """Window gap between S(s+t)f and S(t)S(s)f at matched stopping tolerance."""
    t0 = time.perf_counter()
    measured = []
    thresholds = {}
    threshold = gap_factor * stop_tol + extra_slack
    for s, t in pairs:
        if s + t > 1.0 + 1e-12:
            raise InputError("semigroup pairs must satisfy s + t <= 1")
        joint = scaling_limit(cfg, s + t, f, max_level=max_level, stop_tol=stop_tol, window=window)
        inner = scaling_limit(cfg, s, f, max_level=max_level, stop_tol=stop_tol, window=window)
        outer = scaling_limit(cfg, t, inner.field, max_level=max_level, stop_tol=stop_tol, window=window)
        label = f"gap_s={s:g}_t={t:g}"
        measured.append((label, sup_distance(joint.field, outer.field, window)))
        thresholds[label] = threshold
    params = {"pairs": list(pairs), "stop_tol": stop_tol, "m": cfg.ambiguity.m}
    return _finish("semigroup_property", params, measured, thresholds, t0)


def check_operator_properties(
    cfg: OperatorConfig,
    trials: int = 100,
    seed: int = 0,
    t_list: Sequence[float] = (0.05, 0.1, 0.5),
    contraction_tol: float = 1e-9,
    monotonicity_tol: float = 1e-9,
    lipschitz_slack_nodes: float = 10.0,
    structural_trials: int = 10,
    subadd_tol: float = 1e-9,
    homogeneity_rel_tol: float = 1e-12,
    translation_tol: float = 1e-12,
    sandwich_tol: float = 1e-9,
) -> CheckReport:
    """Property suite over seeded random band-limited fields.

    Contraction, monotonicity, and Lipschitz propagation run on every trial;
    the structurally exact identities (translation covariance, positive
    homogeneity, subadditivity, order sandwich) on the first
    ``structural_trials`` trials.
    """
    if trials < 1:
        raise InputError("need at least one trial")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    grid = cfg.grid
    h = max(grid.spacing)
    worst = {
        "contraction": -np.inf,
        "monotonicity": -np.inf,
        "lipschitz_excess": -np.inf,
        "translation": -np.inf,
        "homogeneity_rel": -np.inf,
        "subadditivity": -np.inf,
        "sandwich": -np.inf,
    }
    cache: Dict = {}
    for trial in range(trials):
        f = fourier_field(grid, rng)
        g = fourier_field(grid, rng)
        structural = trial < structural_trials
        for t in t_list:
            rob_f = dro_step(cfg, t, f, cache)
            rob_g = dro_step(cfg, t, g, cache)
            gap_out = float(np.max(np.abs(rob_f.values - rob_g.values)))
            gap_in = float(np.max(np.abs(f.values - g.values)))
            worst["contraction"] = max(worst["contraction"], gap_out - gap_in)

            upper = ScalarField(grid, f.values + np.abs(g.values - f.values))
            rob_upper = dro_step(cfg, t, upper, cache)
            worst["monotonicity"] = max(
                worst["monotonicity"], float(np.max(rob_f.values - rob_upper.values))
            )

            lip_f = lipschitz_estimate(f)
            worst["lipschitz_excess"] = max(
                worst["lipschitz_excess"],
                lipschitz_estimate(rob_f) - lip_f - lipschitz_slack_nodes * h * lip_f,
            )

            if structural:
                shifted = dro_step(cfg, t, ScalarField(grid, f.values + 1.0), cache)
                worst["translation"] = max(
                    worst["translation"],
                    float(np.max(np.abs(shifted.values - rob_f.values - 1.0))),
                )
                best_f = best_case_step(cfg, t, f, cache)
                for lam in (0.0, 0.5, 2.0):
                    best_lam = best_case_step(cfg, t, ScalarField(grid, lam * f.values), cache)
                    err = float(np.max(np.abs(best_lam.values - lam * best_f.values)))
                    worst["homogeneity_rel"] = max(
                        worst["homogeneity_rel"],
                        err / max(1.0, abs(lam) * float(np.max(np.abs(best_f.values)))),
                    )
                best_g = best_case_step(cfg, t, g, cache)
                best_sum = best_case_step(cfg, t, ScalarField(grid, f.values + g.values), cache)
                worst["subadditivity"] = max(
                    worst["subadditivity"],
                    float(np.max(best_sum.values - best_f.values - best_g.values)),
                )
                non_robust = reference_inf_step(cfg, t, f)
                worst["sandwich"] = max(
                    worst["sandwich"],
                    float(np.max(non_robust.values - rob_f.values)),
                    float(np.max(rob_f.values - best_f.values)),
                )
    measured = [(k, v) for k, v in worst.items()]
    thresholds = {
        "contraction": contraction_tol,
        "monotonicity": monotonicity_tol,
        "lipschitz_excess": 1e-12,
        "translation": translation_tol,
        "homogeneity_rel": homogeneity_rel_tol,
        "subadditivity": subadd_tol,
        "sandwich": sandwich_tol,
    }
    params = {"trials": trials, "seed": seed, "t_list": list(t_list), "m": cfg.ambiguity.m}
    return _finish("operator_properties", params, measured, thresholds, t0)


def check_refinement_monotonicity(
    cfg: OperatorConfig,
    f: ScalarField,
    t: float = 1.0,
    levels: int = 7,
    window: Optional[CompactWindow] = None,
    tol: float = 1e-8,
) -> CheckReport:
    """Node-wise decrease of the dyadic composition sequence on the window."""
    t0 = time.perf_counter()
    mask = window.mask(cfg.grid) if window is not None else np.ones(cfg.grid.shape, bool)
    worst = -np.inf
    prev = None
    fields = []
    for n in range(levels + 1):
        part = dyadic_partition(t, n)
        cur = compose(cfg, part, f, MODE_DRO)
        fields.append(cur)
        if prev is not None:
            worst = max(worst, float(np.max((cur.values - prev.values)[mask])))
        prev = cur
    measured = [("max_refinement_increase", worst)]
    thresholds = {"max_refinement_increase": tol}
    params = {"t": t, "levels": levels, "m": cfg.ambiguity.m}
    return _finish(
        "refinement_monotonicity", params, measured, thresholds, t0,
        artifacts={"fields": fields},
    )


def check_dual_oracle(
    trials: int = 200,
    seed: int = 0,
    grid_steps: int = 8,
    tol: float = 1e-6,
) -> CheckReport:
    """Strong-duality solver against the lattice enumeration oracle on random
    small instances; the oracle's lattice resolution is granted per instance."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    radii = [0.0, 0.1, 0.5, 2.0]
    worst = -np.inf
    worst_abs = -np.inf
    for trial in range(trials):
        inst = _random_instance(rng, radius=radii[trial % len(radii)])
        dual = wasserstein_sup(inst, tol=1e-11)
        oracle = brute_force_sup(inst, grid_steps=grid_steps)
        res = oracle_resolution(inst, grid_steps)
        gap = abs(dual.value - oracle)
        worst_abs = max(worst_abs, gap)
        worst = max(worst, gap - res)
    measured = [("excess_over_resolution", worst), ("max_abs_gap", worst_abs)]
    thresholds = {"excess_over_resolution": tol}
    params = {"trials": trials, "seed": seed, "grid_steps": grid_steps}
    return _finish("dual_oracle_equivalence", params, measured, thresholds, t0)


def _random_instance(rng: np.random.Generator, radius: float) -> DualInstance:
    d = 2 if rng.random() < 0.2 else 1
    natoms = int(rng.integers(1, 6))
    # keep the enumeration oracle's plan product small
    for _ in range(200):
        sizes = [int(rng.integers(1, 5)) for _ in range(natoms)]
        if natoms == 1:
            sizes = [int(rng.integers(2, 9))]
        total = natoms + sum(sizes)
        prod = 1.0
        for k in sizes:
            prod *= math.comb(8 + k, k)
        if total <= 12 and prod <= 3e5:
            break
    else:
        sizes = [1] * natoms
    atoms = rng.uniform(-2, 2, size=(natoms, d))
    weights = rng.random(natoms) + 0.1
    weights /= weights.sum()
    candidates = []
    for i in range(natoms):
        offs = rng.uniform(-1.5, 1.5, size=(sizes[i], d))
        candidates.append(np.vstack([atoms[i][None, :], atoms[i][None, :] + offs]))
    nmodes = int(rng.integers(1, 5))
    amps = rng.random(nmodes)
    amps /= amps.sum()
    freqs = rng.uniform(-2, 2, size=(nmodes, d))
    phases = rng.uniform(0, 2 * np.pi, size=nmodes)

    def integrand(z, amps=amps, freqs=freqs, phases=phases):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return sum(a * np.cos(z @ w + p) for a, w, p in zip(amps, freqs, phases))

    return DualInstance(
        DiscreteMeasure(atoms, weights), candidates, integrand, radius=radius, p=2.0
    )


# ----------------------------------------------------------------------
# operator-versus-PDE cross checks and the named anchor experiments

def cross_check_pde(
    cfg: OperatorConfig,
    u0: ScalarField,
    horizon: float,
    window: Optional[CompactWindow] = None,
    stop_tol: float = 1e-3,
    max_level: int = 8,
    scheme: Optional[PdeScheme] = None,
    tol: float = 2e-2,
    reference: Optional[Callable] = None,
    reference_tol: Optional[float] = None,
    name: str = "operator_pde_crosscheck",
) -> CheckReport:
    """Window gap between the scaling limit and the PDE solution at the
    horizon; optionally both against a closed-form reference."""
    if horizon > 1.0 + 1e-12:
        raise InputError("cross-check horizons are limited to T <= 1")
    t0 = time.perf_counter()
    scheme = scheme or PdeScheme()
    lim = scaling_limit(cfg, horizon, u0, max_level=max_level, stop_tol=stop_tol, window=window)
    pde_run = solve(cfg, scheme, u0, horizon)
    pde_final = pde_run.at(horizon)
    gap = sup_distance(lim.field, pde_final, window)
    measured = [("operator_pde_gap", gap)]
    thresholds = {"operator_pde_gap": tol}
    mask = window.mask(cfg.grid) if window is not None else np.ones(cfg.grid.shape, bool)
    if reference is not None:
        if cfg.grid.dim != 1:
            raise InputError("closed-form references are one-dimensional")
        ref_vals = np.asarray(reference(cfg.grid.axes[0]), dtype=float)
        err_limit = float(np.max(np.abs((lim.field.values - ref_vals)[mask])))
        err_pde = float(np.max(np.abs((pde_final.values - ref_vals)[mask])))
        measured += [("limit_vs_reference", err_limit), ("pde_vs_reference", err_pde)]
        if reference_tol is not None:
            thresholds["limit_vs_reference"] = reference_tol
            thresholds["pde_vs_reference"] = reference_tol
    params = {
        "horizon": horizon,
        "m": cfg.ambiguity.m,
        "stop_tol": stop_tol,
        "levels": lim.levels,
        "level_gaps": [float(g) for g in lim.level_gaps],
        "converged": lim.converged,
    }
    return _finish(
        name, params, measured, thresholds, t0,
        artifacts={"limit": lim, "pde": pde_final},
    )


def _with_model(cfg: OperatorConfig, drifts, sigma, m: float) -> OperatorConfig:
    model = brownian_model(drifts, np.atleast_2d(sigma), dim=cfg.grid.dim)
    return replace(cfg, model=model, ambiguity=AmbiguitySpec(m=m, p=cfg.ambiguity.p))


def heat_anchor_check(cfg: OperatorConfig, window: CompactWindow, tol: float = 5e-3) -> CheckReport:
    """m = 0 reduction: both routes must reproduce e^{-t/2} cos at t = 1/2."""
    run = _with_model(cfg, [[0.0]], [[1.0]], m=0.0)
    u0 = named_field(run.grid, "cos")
    ref = lambda x: math.exp(-0.25) * np.cos(x)
    return cross_check_pde(
        run, u0, 0.5, window=window, stop_tol=1e-4, max_level=8,
        tol=tol, reference=ref, reference_tol=tol, name="heat_anchor",
    )


def cdf_anchor_check(cfg: OperatorConfig, window: CompactWindow, tol: float = 1e-2) -> CheckReport:
    """Monotone-data closed form: S(1) applied to the normal CDF with m = 1/2
    equals Phi((x + 1/2) / sqrt(2)) because the gradient term linearizes."""
    run = _with_model(cfg, [[0.0]], [[1.0]], m=0.5)
    u0 = named_field(run.grid, "normal_cdf")
    ref = lambda x: normal_cdf((x + 0.5) / math.sqrt(2.0))
    return cross_check_pde(
        run, u0, 1.0, window=window, stop_tol=1e-3, max_level=8,
        tol=tol, reference=ref, reference_tol=tol, name="cdf_anchor",
    )


def game_crosscheck(
    cfg: OperatorConfig,
    window: CompactWindow,
    gap_tol: float = 2e-2,
    dominance_tol: float = 1e-8,
    max_level: int = 8,
) -> CheckReport:
    """Genuine min-max: two drifts b = -1/2, +1/2, sigma = 1, m = 1/4.

    Checks the operator limit against the PDE and that the two-action value
    never exceeds either single-action robust value.  The dominance
    comparison runs all limits to the same dyadic level so that the stopping
    rule cannot inject asymmetric truncation error.
    """
    t0 = time.perf_counter()
    two = _with_model(cfg, [[-0.5], [0.5]], [[1.0]], m=0.25)
    u0 = named_field(two.grid, "tanh")
    horizon = 0.5
    report = cross_check_pde(
        two, u0, horizon, window=window, stop_tol=1e-3, max_level=max_level,
        tol=gap_tol, name="game_crosscheck",
    )
    # matched-level dominance check, node-wise over the whole grid: at equal
    # dyadic levels the two-action composition is an exact node-wise min of
    # the same single-action kernels, so no stopping-rule slack is needed
    two_fixed = scaling_limit(two, horizon, u0, max_level=max_level, stop_tol=0.0, window=window)
    worst = -np.inf
    for b in (-0.5, 0.5):
        single = _with_model(cfg, [[b]], [[1.0]], m=0.25)
        lim = scaling_limit(single, horizon, u0, max_level=max_level, stop_tol=0.0, window=window)
        worst = max(worst, float(np.max(two_fixed.field.values - lim.field.values)))
    measured = report.measured + [("dominance_violation", worst)]
    thresholds = dict(report.thresholds)
    thresholds["dominance_violation"] = dominance_tol
    return _finish(
        "game_crosscheck", report.parameters, measured, thresholds, t0,
        artifacts=report.artifacts,
    )


def refined_config(cfg: OperatorConfig) -> OperatorConfig:
    """Doubled spatial, quadrature, and candidate resolution, halved dual_tol."""
    g = cfg.grid
    fine = Grid(g.lo, g.hi, tuple(2 * (n - 1) + 1 for n in g.n))
    return replace(
        cfg,
        grid=fine,
        quad_order=min(2 * cfg.quad_order, 64),
        cand_per_side=2 * cfg.cand_per_side,
        dual_tol=0.5 * cfg.dual_tol,
    )


_CERTIFIABLE = {
    "heat_anchor": (heat_anchor_check, 5e-3),
    "cdf_anchor": (cdf_anchor_check, 1e-2),
    "game_crosscheck": (game_crosscheck, 2e-2),
}


def _headline(report: CheckReport) -> float:
    keyed = dict(report.measured)
    if "limit_vs_reference" in keyed:
        return max(keyed["limit_vs_reference"], keyed["pde_vs_reference"])
    return keyed["operator_pde_gap"]


def refinement_certificates(
    cfg: OperatorConfig,
    window: CompactWindow,
    experiments: Sequence[str] = ("heat_anchor", "cdf_anchor", "game_crosscheck"),
    base_reports: Optional[Dict[str, CheckReport]] = None,
    factor: float = 0.5,
) -> CheckReport:
    """Re-run the anchor experiments at doubled resolution; each headline
    number must move by at most ``factor`` times its acceptance tolerance."""
    t0 = time.perf_counter()
    fine = refined_config(cfg)
    measured = []
    thresholds = {}
    for name in experiments:
        if name not in _CERTIFIABLE:
            raise InputError(f"unknown certifiable experiment {name!r}")
        check, tol = _CERTIFIABLE[name]
        base = base_reports.get(name) if base_reports else None
        if base is None:
            base = check(cfg, window)
        refined = check(fine, window)
        change = abs(_headline(refined) - _headline(base))
        label = f"change_{name}"
        measured.append((label, change))
        thresholds[label] = factor * tol
    params = {"experiments": list(experiments), "factor": factor}
    return _finish("refinement_certificates", params, measured, thresholds, t0)
