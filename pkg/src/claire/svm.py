"""Kernel SVM trained with a simplified sequential-minimal-optimization loop.

The dual problem is solved over pairs of multipliers: the first index comes
from a sweep over current KKT violators, the second is drawn uniformly at
random from the remaining indices (seeded). Each accepted pair update is the
exact maximizer of the dual restricted to that pair, clipped to the box, so
the dual objective never decreases.

Labels are +1 / -1 inside this module. 0 / 1 mapping happens in training.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateDataError, InputError, ShapeError
from .numerics import RngStream, as_matrix, column_mean_var

SV_THRESHOLD = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """One of: linear, polynomial, rbf, sigmoid.

    gamma is the rbf width or the sigmoid slope; None means "resolve from
    the training data" (rbf: 1 / (n_features * mean feature variance);
    sigmoid: 1 / n_features). coef0 is the polynomial / sigmoid offset.
    """
    kind: str
    gamma: float | None = None
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "rbf", "sigmoid"):
            raise InputError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise InputError(f"polynomial degree must be >= 1, got {self.degree}")
        if self.gamma is not None and self.gamma <= 0 and self.kind == "rbf":
            raise InputError(f"rbf gamma must be positive, got {self.gamma}")

    @staticmethod
    def linear() -> "KernelSpec":
        return KernelSpec("linear")

    @staticmethod
    def polynomial(coef0: float = 1.0, degree: int = 3) -> "KernelSpec":
        return KernelSpec("polynomial", degree=degree, coef0=coef0)

    @staticmethod
    def rbf(gamma: float | None = None) -> "KernelSpec":
        return KernelSpec("rbf", gamma=gamma)

    @staticmethod
    def sigmoid(gamma: float | None = None, coef0: float = 0.0) -> "KernelSpec":
        return KernelSpec("sigmoid", gamma=gamma, coef0=coef0)


def resolve_kernel(spec: KernelSpec, train_features: np.ndarray) -> KernelSpec:
    """Fill in a data-dependent gamma where the spec left it open."""
    if spec.gamma is not None or spec.kind in ("linear", "polynomial"):
        return spec
    x = as_matrix(train_features)
    if spec.kind == "rbf":
        _, var = column_mean_var(x)
        denom = x.shape[1] * float(var.mean())
        gamma = 1.0 / denom if denom > 1e-12 else 1.0
    else:
        gamma = 1.0 / x.shape[1]
    return replace(spec, gamma=gamma)


def kernel_eval(spec: KernelSpec, u: np.ndarray, v: np.ndarray) -> float:
    """Kernel value for a single pair of vectors."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ShapeError(f"kernel arguments differ in length: {u.shape} vs {v.shape}")
    if spec.kind == "linear":
        return float(u @ v)
    if spec.kind == "polynomial":
        return float((u @ v + spec.coef0) ** spec.degree)
    if spec.kind == "rbf":
        diff = u - v
        return float(np.exp(-spec.gamma * (diff @ diff)))
    return float(np.tanh(spec.gamma * (u @ v) + spec.coef0))


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel values for every row pair, shape (rows(a), rows(b))."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature widths differ: {a.shape[1]} vs {b.shape[1]}")
    inner = a @ b.T
    if spec.kind == "linear":
        return inner
    if spec.kind == "polynomial":
        return (inner + spec.coef0) ** spec.degree
    if spec.kind == "sigmoid":
        return np.tanh(spec.gamma * inner + spec.coef0)
    sq = (np.square(a).sum(axis=1)[:, None]
          + np.square(b).sum(axis=1)[None, :] - 2.0 * inner)
    np.maximum(sq, 0.0, out=sq)
    if a is b:
        np.fill_diagonal(sq, 0.0)
    return np.exp(-spec.gamma * sq)


@dataclass
class SvmModel:
    """Trained classifier: support vectors with their signed multipliers.

    dual_coef[i] = alpha_i * y_i for support vector i (alpha_i > 1e-10).
    ``converged`` is False when the pass budget ran out before the stopping
    test passed; the model is still usable.
    """
    kernel: KernelSpec
    c: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    support_indices: np.ndarray
    bias: float
    converged: bool
    n_sweeps: int
    objective_trace: np.ndarray | None = None


def decision_function(model: SvmModel, z: np.ndarray) -> np.ndarray:
    """Signed decision values for each row of z."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    k = kernel_matrix(model.kernel, model.support_vectors, z)
    return model.dual_coef @ k + model.bias


def predict_labels(model: SvmModel, z: np.ndarray) -> np.ndarray:
    """0/1 labels; a decision value of exactly 0 maps to +1, i.e. label 1."""
    return (decision_function(model, z) >= 0.0).astype(np.int64)


def dual_objective(gram: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Maximized dual: sum(alpha) - 0.5 * (alpha*y)' K (alpha*y)."""
    coef = alpha * y
    return float(alpha.sum() - 0.5 * coef @ gram @ coef)


def smo_train(features: np.ndarray, y: np.ndarray, kernel: KernelSpec,
              c: float = 1.0, tol: float = 1e-3, max_passes: int = 100,
              seed: int = 0, track_objective: bool = False) -> SvmModel:
    """Train on labels in {-1, +1}.

    Stops successfully when a full scan finds no KKT violation at ``tol``,
    or gives up (converged=False) after ``max_passes`` consecutive sweeps
    without an accepted update, or after a hard cap of 100 * max_passes
    sweeps. The bias is recomputed at the end from the unbounded support
    vectors, falling back to the midpoint of the feasible interval the
    bound multipliers imply.
    """
    x = as_matrix(features, "training features")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ShapeError(f"{y.shape[0]} labels for {x.shape[0]} rows")
    classes = set(np.unique(y))
    if classes != {-1.0, 1.0}:
        raise DegenerateDataError(
            f"training needs both classes -1 and +1, got {sorted(classes)}")
    if c <= 0:
        raise InputError(f"penalty C must be positive, got {c}")

    kernel = resolve_kernel(kernel, x)
    n = x.shape[0]
    gram = kernel_matrix(kernel, x, x)
    alpha = np.zeros(n)
    b = 0.0
    rng = RngStream(seed)
    objective_trace: list[float] = [] if track_objective else None

    converged = False
    quiet_sweeps = 0
    sweeps = 0
    hard_cap = 100 * max_passes
    while sweeps < hard_cap:
        sweeps += 1
        f = (alpha * y) @ gram + b     # exact refresh, then incremental updates
        err = f - y
        r = y * err
        violators = np.flatnonzero(((r < -tol) & (alpha < c)) | ((r > tol) & (alpha > 0)))
        if violators.size == 0:
            converged = True
            break
        changed = 0
        for i in violators:
            e_i = f[i] - y[i]
            r_i = y[i] * e_i
            if not ((r_i < -tol and alpha[i] < c) or (r_i > tol and alpha[i] > 0)):
                continue   # fixed by an earlier update this sweep
            j = int(rng.integers(0, n - 1))
            if j >= i:
                j += 1
            e_j = f[j] - y[j]
            if y[i] != y[j]:
                lo = max(0.0, alpha[j] - alpha[i])
                hi = min(c, c + alpha[j] - alpha[i])
            else:
                lo = max(0.0, alpha[i] + alpha[j] - c)
                hi = min(c, alpha[i] + alpha[j])
            if lo >= hi:
                continue
            eta = 2.0 * gram[i, j] - gram[i, i] - gram[j, j]
            if eta >= 0:
                continue   # non-concave direction (possible for sigmoid kernels)
            a_j = alpha[j] - y[j] * (e_i - e_j) / eta
            a_j = min(max(a_j, lo), hi)
            if abs(a_j - alpha[j]) < 1e-12:
                continue
            a_i = alpha[i] + y[i] * y[j] * (alpha[j] - a_j)

            b1 = b - e_i - y[i] * (a_i - alpha[i]) * gram[i, i] \
                - y[j] * (a_j - alpha[j]) * gram[i, j]
            b2 = b - e_j - y[i] * (a_i - alpha[i]) * gram[i, j] \
                - y[j] * (a_j - alpha[j]) * gram[j, j]
            if 0 < a_i < c:
                b_new = b1
            elif 0 < a_j < c:
                b_new = b2
            else:
                b_new = 0.5 * (b1 + b2)

            f = f + y[i] * (a_i - alpha[i]) * gram[i] \
                + y[j] * (a_j - alpha[j]) * gram[j] + (b_new - b)
            alpha[i], alpha[j], b = a_i, a_j, b_new
            changed += 1
            if track_objective:
                objective_trace.append(dual_objective(gram, y, alpha))
        if changed == 0:
            quiet_sweeps += 1
            if quiet_sweeps >= max_passes:
                break
        else:
            quiet_sweeps = 0

    # final bias per the KKT system, independent of the running estimate
    g = (alpha * y) @ gram
    unbounded = (alpha > 1e-8 * c) & (alpha < c * (1 - 1e-8))
    if unbounded.any():
        b = float(np.mean(y[unbounded] - g[unbounded]))
    else:
        margins = y - g
        lower_set = ((alpha <= 1e-8 * c) & (y > 0)) | ((alpha >= c * (1 - 1e-8)) & (y < 0))
        upper_set = ((alpha <= 1e-8 * c) & (y < 0)) | ((alpha >= c * (1 - 1e-8)) & (y > 0))
        lo = margins[lower_set].max() if lower_set.any() else -np.inf
        hi = margins[upper_set].min() if upper_set.any() else np.inf
        if np.isfinite(lo) and np.isfinite(hi):
            b = float(0.5 * (lo + hi))
        elif np.isfinite(lo):
            b = float(lo)
        elif np.isfinite(hi):
            b = float(hi)
        else:
            b = 0.0

    sv_mask = alpha > SV_THRESHOLD
    model = SvmModel(
        kernel=kernel, c=float(c),
        support_vectors=x[sv_mask].copy(),
        dual_coef=(alpha * y)[sv_mask],
        support_indices=np.flatnonzero(sv_mask),
        bias=b, converged=converged, n_sweeps=sweeps,
        objective_trace=np.array(objective_trace) if track_objective else None,
    )
    return model


def full_alphas(model: SvmModel, n_train: int) -> np.ndarray:
    """Expand the stored support multipliers back to one alpha per row."""
    alpha = np.zeros(n_train)
    alpha[model.support_indices] = np.abs(model.dual_coef)
    return alpha


def kkt_violation(model: SvmModel, features: np.ndarray, y: np.ndarray) -> float:
    """Largest KKT violation over the training set, for diagnostics/tests."""
    x = as_matrix(features)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    alpha = full_alphas(model, x.shape[0])
    margins = y * decision_function(model, x)
    worst = 0.0
    for a_i, m_i in zip(alpha, margins):
        if a_i <= SV_THRESHOLD:
            worst = max(worst, 1.0 - m_i)              # need m >= 1
        elif a_i >= model.c - 1e-8:
            worst = max(worst, m_i - 1.0)              # need m <= 1
        else:
            worst = max(worst, abs(m_i - 1.0))         # need m == 1
    return worst
