"""Controlled reference Markov families with Gaussian transition laws.

Two built-in families, both of the form X_t = psi_t(x) + Y_t with Y_t a
centered Gaussian:

* Brownian motion with drift:  psi_t(x) = x + b t,  Cov(Y_t) = sigma sigma^T t.
* Ornstein-Uhlenbeck:          psi_t(x) = e^{-theta t} x + int_0^t e^{-theta s} kappa ds,
                               Cov(Y_t) = int_0^t e^{-theta s} sigma sigma^T e^{-theta s} ds,
  with theta symmetric positive semi-definite.

Both flows are 1-Lipschitz in x, and both laws are represented for quadrature
as tensor Gauss-Hermite discretizations (exact Cholesky/eigen mapping of the
covariance), which the rest of the package consumes as finite measures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, ModelError
from .fields import ScalarField

Array = np.ndarray

BROWNIAN = "brownian_drift"
ORNSTEIN_UHLENBECK = "ornstein_uhlenbeck"

_ATOL = 1e-12


@dataclass(eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure: atoms (k, d) and weights (k,)."""

    atoms: Array
    weights: Array

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.atoms.shape[0] != self.weights.shape[0]:
            raise InputError("atom/weight count mismatch")
        if not np.all(np.isfinite(self.atoms)):
            raise InputError("atoms must be finite")
        if np.any(self.weights < -_ATOL):
            raise InputError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > _ATOL:
            raise InputError(f"weights sum to {self.weights.sum()!r}, not 1")

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def mean(self) -> Array:
        return self.weights @ self.atoms

    def covariance(self) -> Array:
        c = self.atoms - self.mean()
        return (c * self.weights[:, None]).T @ c

    def moment(self, p: float) -> float:
        """E ||y||^p under the measure."""
        return float(self.weights @ np.linalg.norm(self.atoms, axis=1) ** p)


@dataclass(eq=False)
class Action:
    """One action's parameters; which fields apply depends on the family."""

    label: str
    drift: Optional[Array] = None       # b(a), Brownian family
    sigma: Optional[Array] = None       # diffusion matrix, both families
    theta: Optional[Array] = None       # mean-reversion matrix, OU family
    kappa: Optional[Array] = None       # pull vector, OU family


class ReferenceModel:
    """A family tag plus a finite action set; all parameters bounded."""

    def __init__(self, family: str, actions: Sequence[Action], dim: int = 1):
        if family not in (BROWNIAN, ORNSTEIN_UHLENBECK):
            raise ModelError(f"unknown family {family!r}")
        if not actions:
            raise ModelError("action set must be nonempty")
        self.family = family
        self.dim = int(dim)
        self.actions = tuple(actions)
        self._by_label = {}
        for a in self.actions:
            self._validate_action(a)
            if a.label in self._by_label:
                raise ModelError(f"duplicate action label {a.label!r}")
            self._by_label[a.label] = a
        # eigendecompositions of theta are reused by psi/law for the OU family
        self._theta_eig = {}
        if family == ORNSTEIN_UHLENBECK:
            for a in self.actions:
                self._theta_eig[a.label] = np.linalg.eigh(a.theta)

    def _validate_action(self, a: Action) -> None:
        d = self.dim
        a.sigma = _square(a.sigma, d, "sigma")
        if self.family == BROWNIAN:
            a.drift = _vector(a.drift, d, "drift")
        else:
            a.theta = _square(a.theta, d, "theta")
            a.kappa = _vector(a.kappa, d, "kappa")
            if not np.allclose(a.theta, a.theta.T, atol=1e-10):
                raise ModelError(f"theta for action {a.label!r} is not symmetric")
            if np.linalg.eigvalsh(a.theta).min() < -1e-10:
                raise ModelError(f"theta for action {a.label!r} is not PSD")

    def action(self, a) -> Action:
        if isinstance(a, Action):
            return a
        try:
            return self._by_label[a]
        except KeyError:
            raise InputError(f"unknown action {a!r}") from None

    @property
    def lipschitz_rate(self) -> float:
        # both built-in flows are 1-Lipschitz (e^{c t} with c = 0)
        return 0.0

    def drift_increment_constant(self) -> float:
        """Constant C with sup_{t,a} ||psi_t(x) - x|| / t <= C (1 + ||x||)."""
        if self.family == BROWNIAN:
            return max(float(np.linalg.norm(a.drift)) for a in self.actions)
        return max(
            max(float(np.linalg.norm(a.theta, 2)), float(np.linalg.norm(a.kappa)))
            for a in self.actions
        )


def _vector(v, d: int, name: str) -> Array:
    if v is None:
        raise ModelError(f"{name} is required for this family")
    arr = np.asarray(v, dtype=float).ravel()
    if arr.shape != (d,):
        raise ModelError(f"{name} must have shape ({d},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} must be finite")
    return arr


def _square(v, d: int, name: str) -> Array:
    if v is None:
        raise ModelError(f"{name} is required")
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0 and d == 1:
        arr = arr.reshape(1, 1)
    if arr.shape != (d, d):
        raise ModelError(f"{name} must have shape ({d},{d}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} must be finite")
    return arr


def brownian_model(drifts, sigma, dim: int = 1, labels=None) -> ReferenceModel:
    """Convenience constructor: one action per drift vector, shared sigma."""
    acts = []
    for i, b in enumerate(drifts):
        lab = labels[i] if labels else f"a{i}"
        acts.append(Action(label=lab, drift=np.atleast_1d(b), sigma=sigma))
    return ReferenceModel(BROWNIAN, acts, dim=dim)


def _exp_decay_integral(lam: Array, t: float) -> Array:
    """Entrywise int_0^t e^{-lam s} ds, stable near lam t = 0."""
    a = lam * t
    small = np.abs(a) < 1e-10
    out = np.where(small, t * (1.0 - 0.5 * a), np.divide(
        -np.expm1(-a), np.where(small, 1.0, lam)))
    return out


def _points(x, d: int):
    """Normalize x to an (N, d) array, remembering the caller's shape."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError("points must be finite")
    if arr.ndim == 0:
        if d != 1:
            raise InputError(f"scalar point given for a {d}-dimensional model")
        return arr.reshape(1, 1), (d,)
    if arr.ndim == 1:
        if arr.shape[0] == d:
            return arr.reshape(1, d), (d,)
        if d == 1:
            return arr.reshape(-1, 1), arr.shape
        raise InputError(f"point of length {arr.shape[0]} in dimension {d}")
    if arr.shape[-1] != d:
        raise InputError(f"points must have trailing dimension {d}")
    return arr.reshape(-1, d), arr.shape


def psi(model: ReferenceModel, a, t: float, x) -> Array:
    """Deterministic drift flow psi_t^a applied to x of shape (d,) or (..., d)."""
    if t < 0:
        raise InputError(f"time must be nonnegative, got {t}")
    act = model.action(a)
    pts, out_shape = _points(x, model.dim)
    if model.family == BROWNIAN:
        out = pts + act.drift * t
    else:
        lam, q = model._theta_eig[act.label]
        decay = np.exp(-np.clip(lam, 0.0, None) * t)
        flow = (q * decay) @ q.T
        pull = q @ (_exp_decay_integral(np.clip(lam, 0.0, None), t) * (q.T @ act.kappa))
        out = pts @ flow.T + pull
    return out.reshape(out_shape)


def covariance(model: ReferenceModel, a, t: float) -> Array:
    """Closed-form covariance of Y_t^a."""
    if t < 0:
        raise InputError(f"time must be nonnegative, got {t}")
    act = model.action(a)
    ssT = act.sigma @ act.sigma.T
    if model.family == BROWNIAN:
        return ssT * t
    lam, q = model._theta_eig[act.label]
    lam = np.clip(lam, 0.0, None)
    m = q.T @ ssT @ q
    pair = lam[:, None] + lam[None, :]
    integ = _exp_decay_integral(pair, t)
    return q @ (m * integ) @ q.T


def law(model: ReferenceModel, a, t: float, quad_order: int = 16) -> DiscreteMeasure:
    """Gauss-Hermite discretization of the (possibly degenerate) law of Y_t^a.

    Exact for polynomial integrands up to degree 2*quad_order - 1 along every
    non-degenerate covariance direction; returns the point mass at 0 when the
    covariance vanishes (in particular at t = 0).
    """
    if not 4 <= quad_order <= 64:
        raise InputError(f"quad_order must be in [4, 64], got {quad_order}")
    d = model.dim
    if t == 0:
        return DiscreteMeasure(np.zeros((1, d)), np.ones(1))
    cov = covariance(model, a, t)
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -1e-10 * max(1.0, abs(evals.max())):
        raise ModelError("covariance is not positive semi-definite")
    evals = np.clip(evals, 0.0, None)
    keep = evals > 1e-15 * max(1.0, evals.max())
    if not keep.any():
        return DiscreteMeasure(np.zeros((1, d)), np.ones(1))
    nodes, wts = np.polynomial.hermite.hermgauss(quad_order)
    axes_nodes, axes_wts = [], []
    for j in range(d):
        if keep[j]:
            axes_nodes.append(np.sqrt(2.0 * evals[j]) * nodes)
            axes_wts.append(wts)
        else:
            axes_nodes.append(np.zeros(1))
            axes_wts.append(np.ones(1))
    if d == 1:
        z = axes_nodes[0][:, None]
        w = axes_wts[0].copy()
    else:
        za, zb = np.meshgrid(axes_nodes[0], axes_nodes[1], indexing="ij")
        z = np.column_stack([za.ravel(), zb.ravel()])
        w = np.outer(axes_wts[0], axes_wts[1]).ravel()
    atoms = z @ evecs.T
    w = w / w.sum()
    return DiscreteMeasure(atoms, w)


def check_chapman_kolmogorov(
    model: ReferenceModel, a, s: float, t: float, f: ScalarField, x, quad_order: int = 16
) -> float:
    """Residual of the two-step versus one-step transition identity at x.

    Both sides are evaluated by quadrature; for the built-in families the
    residual is pure quadrature/interpolation error.
    """
    if s < 0 or t < 0:
        raise InputError("times must be nonnegative")
    act = model.action(a)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu_st = law(model, act, s + t, quad_order)
    lhs = float(mu_st.weights @ f.eval(psi(model, act, s + t, x)[None, :] + mu_st.atoms))
    mu_s = law(model, act, s, quad_order)
    mu_t = law(model, act, t, quad_order)
    inner = psi(model, act, t, x)[None, :] + mu_t.atoms          # (kt, d)
    mid = psi(model, act, s, inner)                              # (kt, d)
    pts = mid[:, None, :] + mu_s.atoms[None, :, :]               # (kt, ks, d)
    vals = f.eval(pts)
    rhs = float(mu_t.weights @ vals @ mu_s.weights)
    return abs(lhs - rhs)


def psi_stability_time(model: ReferenceModel, R: float, R_prime: float) -> float:
    """Largest guaranteed horizon t0 = (R' - R) / (C (1 + R')) such that the
    flow of any action keeps ||psi_t(x)|| >= R whenever ||x|| >= R'."""
    if not R_prime > R >= 0:
        raise InputError("need R' > R >= 0")
    c = model.drift_increment_constant()
    if c == 0.0:
        return float("inf")
    return (R_prime - R) / (c * (1.0 + R_prime))


def check_psi_stability(
    model: ReferenceModel, R: float, R_prime: float, samples: int = 100, seed: int = 0
) -> float:
    """Return t0 and verify it on sampled points with ||x|| >= R'."""
    t0 = psi_stability_time(model, R, R_prime)
    rng = np.random.default_rng(seed)
    d = model.dim
    dirs = rng.standard_normal((samples, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = R_prime + 2.0 * rng.random(samples)
    pts = dirs * radii[:, None]
    t_hi = min(t0, 10.0)
    for t in np.linspace(0.0, t_hi, 8):
        for act in model.actions:
            moved = psi(model, act, float(t), pts)
            if np.linalg.norm(moved, axis=1).min() < R - 1e-9:
                raise ModelError(
                    f"psi stability violated at t={t}: some ||psi_t(x)|| < {R}"
                )
    return t0
