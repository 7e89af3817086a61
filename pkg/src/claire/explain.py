"""Shapley-value feature attributions via the kernel-weighted regression.

For an input x, a background set B and a vector-valued model f, the value
of a coalition S of features is the exact expectation over background
completions:

    v(S) = mean over rows r of B of f(x restricted to S, r elsewhere)

Attributions solve a weighted least squares fit of an additive game to
v(.), with coalition weight

    pi(s) = (d - 1) / (C(d, s) * s * (d - s))

for coalitions of size s. The empty and full coalitions carry infinite
weight; they are enforced exactly as constraints (intercept = v(empty),
attributions sum to f(x) - v(empty)) by eliminating one unknown, so the
additivity identity holds by construction.

All 2^d coalitions are enumerated when d <= 12. Otherwise coalition sizes
are stratified by their total kernel mass (d - 1) / (s * (d - s)): strata
that fit in the remaining budget are enumerated fully, the rest are
sampled without replacement within the stratum and reweighted by
count/drawn so each stratum keeps its mass. Sampling is deterministic
given the seed. Output per evaluated sample is one attribution per
(feature, model output) pair.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InterfaceError, ShapeError
from .numerics import RngStream, as_matrix, solve_weighted_least_squares

EXHAUSTIVE_LIMIT = 12


@dataclass
class AttributionTensor:
    """values[sample, feature, output] plus per-output base values."""
    values: np.ndarray
    base_values: np.ndarray
    feature_names: list[str] | None = None

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.values.shape[2]


def shapley_kernel_weight(d: int, s: int) -> float:
    """Regression weight for one coalition of size s out of d features."""
    if not 0 < s < d:
        raise InputError(f"coalition size must be strictly between 0 and {d}, got {s}")
    return (d - 1) / (math.comb(d, s) * s * (d - s))


def _size_mass(d: int, s: int) -> float:
    # total kernel mass of the whole size-s stratum: pi(s) * C(d, s)
    return (d - 1) / (s * (d - s))


def _call_model(f, batch: np.ndarray, expected_width: int | None) -> np.ndarray:
    out = np.asarray(f(batch), dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2 or out.shape[0] != batch.shape[0]:
        raise InterfaceError(
            f"model returned shape {out.shape} for a batch of {batch.shape[0]} rows")
    if expected_width is not None and out.shape[1] != expected_width:
        raise InterfaceError(
            f"model output width changed between calls: {expected_width} then {out.shape[1]}")
    return out


def _coalition_values(f, x: np.ndarray, background: np.ndarray,
                      coalitions: list[tuple[int, ...]], width: int) -> np.ndarray:
    """v(S) for each coalition: exact mean over all background completions."""
    n_bg, d = background.shape
    rows_per_chunk = max(1, 16384 // n_bg)
    values = np.empty((len(coalitions), width))
    for start in range(0, len(coalitions), rows_per_chunk):
        block = coalitions[start:start + rows_per_chunk]
        masks = np.zeros((len(block), d), dtype=bool)
        for row, coalition in enumerate(block):
            masks[row, list(coalition)] = True
        batch = np.where(masks[:, None, :], x[None, None, :], background[None, :, :])
        out = _call_model(f, batch.reshape(-1, d), width)
        values[start:start + len(block)] = out.reshape(len(block), n_bg, width).mean(axis=1)
    return values


def _enumerate_all(d: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    coalitions, weights = [], []
    for s in range(1, d):
        w = shapley_kernel_weight(d, s)
        for combo in itertools.combinations(range(d), s):
            coalitions.append(combo)
            weights.append(w)
    return coalitions, np.array(weights)


def _allocate_budget(budget: int, d: int) -> dict[int, int]:
    """Split the coalition budget over sizes proportionally to kernel mass."""
    sizes = list(range(1, d))
    counts = {s: math.comb(d, s) for s in sizes}
    masses = {s: _size_mass(d, s) for s in sizes}
    alloc = {s: 0 for s in sizes}
    left = budget
    while left > 0:
        active = [s for s in sizes if alloc[s] < counts[s]]
        if not active:
            break
        total = sum(masses[s] for s in active)
        gave = 0
        for s in active:
            take = min(int(left * masses[s] / total), counts[s] - alloc[s])
            alloc[s] += take
            gave += take
        if gave == 0:
            for s in sorted(active, key=lambda s: (-masses[s], s)):
                if gave >= left:
                    break
                alloc[s] += 1
                gave += 1
        left -= gave
    return alloc


def _sample_coalitions(d: int, budget: int,
                       rng: RngStream) -> tuple[list[tuple[int, ...]], np.ndarray]:
    alloc = _allocate_budget(budget, d)
    coalitions, weights = [], []
    for s in sorted(alloc):
        want = alloc[s]
        if want == 0:
            continue
        count = math.comb(d, s)
        mass = _size_mass(d, s)
        if want >= count:
            for combo in itertools.combinations(range(d), s):
                coalitions.append(combo)
                weights.append(mass / count)
            continue
        seen: set[tuple[int, ...]] = set()
        while len(seen) < want:
            combo = tuple(sorted(rng.permutation(d)[:s].tolist()))
            seen.add(combo)
        for combo in sorted(seen):
            coalitions.append(combo)
            weights.append(mass / want)
    return coalitions, np.array(weights)


def _solve_attribution(coalitions, weights, values, base, fx, d: int) -> np.ndarray:
    """Constrained weighted least squares via elimination of the last
    feature: phi_last = (f(x) - base) - sum(other phi).
    """
    excess = fx - base                         # (k,)
    if d == 1:
        return excess[None, :].copy()
    z = np.zeros((len(coalitions), d))
    for row, coalition in enumerate(coalitions):
        z[row, list(coalition)] = 1.0
    design = z[:, :-1] - z[:, -1:]
    targets = values - base[None, :] - z[:, -1:] * excess[None, :]
    phi_head = solve_weighted_least_squares(design, targets, weights)
    phi = np.empty((d, values.shape[1]))
    phi[:-1] = phi_head
    phi[-1] = excess - phi_head.sum(axis=0)
    return phi


def kernel_shap(f, x_eval: np.ndarray, background: np.ndarray,
                n_coalitions: int | None = None, seed: int = 0) -> AttributionTensor:
    """Attribute each model output across input features for every row of
    ``x_eval``. ``f`` maps a (rows, d) batch to (rows, k) outputs.
    """
    x_eval = as_matrix(x_eval, "evaluation rows")
    background = as_matrix(background, "background rows")
    if x_eval.shape[1] != background.shape[1]:
        raise ShapeError(
            f"evaluation rows have {x_eval.shape[1]} features, background has "
            f"{background.shape[1]}")
    if background.shape[0] < 1:
        raise InputError("background set must contain at least one row")
    d = x_eval.shape[1]
    if n_coalitions is None:
        n_coalitions = 2 * d + 2048

    base_out = _call_model(f, background, None)
    width = base_out.shape[1]
    base = base_out.mean(axis=0)
    fx_all = _call_model(f, x_eval, width)

    exhaustive = d <= EXHAUSTIVE_LIMIT
    if exhaustive:
        coalitions, weights = _enumerate_all(d)
    else:
        if n_coalitions < d + 2:
            raise InputError(
                f"n_coalitions must be at least d + 2 = {d + 2}, got {n_coalitions}")
        budget = min(n_coalitions, 2**d - 2)
        coalitions, weights = _sample_coalitions(d, budget, RngStream(seed))

    values = np.empty((x_eval.shape[0], d, width))
    for i in range(x_eval.shape[0]):
        if coalitions:
            coalition_vals = _coalition_values(f, x_eval[i], background, coalitions, width)
        else:
            coalition_vals = np.zeros((0, width))
        values[i] = _solve_attribution(coalitions, weights, coalition_vals,
                                       base, fx_all[i], d)
    return AttributionTensor(values=values, base_values=base)


def explain_encoder(params, train_features: np.ndarray, test_features: np.ndarray,
                    feature_names: list[str] | None = None,
                    n_background: int = 100, n_eval: int = 100,
                    n_coalitions: int | None = None, seed: int = 0) -> AttributionTensor:
    """Kernel attributions of every latent dimension of the encoder.

    Background = first ``n_background`` training rows; evaluated samples =
    first ``n_eval`` test rows. Inputs must already be preprocessed.
    """
    from .network import encode

    train_features = as_matrix(train_features, "training rows")
    test_features = as_matrix(test_features, "test rows")
    if n_background < 1 or n_background > train_features.shape[0]:
        raise InputError(
            f"n_background must be in [1, {train_features.shape[0]}], got {n_background}")
    if n_eval < 1 or n_eval > test_features.shape[0]:
        raise InputError(f"n_eval must be in [1, {test_features.shape[0]}], got {n_eval}")
    attr = kernel_shap(lambda rows: encode(params, rows),
                       test_features[:n_eval], train_features[:n_background],
                       n_coalitions=n_coalitions, seed=seed)
    attr.feature_names = list(feature_names) if feature_names is not None else None
    return attr


@dataclass
class ImportanceRanking:
    """Features sorted by mean absolute attribution, most important first.

    ``msv`` is the mean over samples and model outputs of |attribution|;
    ``per_output`` keeps the per-output means, aligned with the ranking.
    """
    order: np.ndarray
    features: list[str]
    msv: np.ndarray
    per_output: np.ndarray


def _names_for(attr: AttributionTensor) -> list[str]:
    if attr.feature_names is not None:
        return list(attr.feature_names)
    return [f"feature_{j}" for j in range(attr.n_features)]


def _rank(scores_per_output: np.ndarray, names: list[str]) -> ImportanceRanking:
    msv = scores_per_output.mean(axis=1)
    order = np.argsort(-msv, kind="stable")
    return ImportanceRanking(order=order,
                             features=[names[j] for j in order],
                             msv=msv[order],
                             per_output=scores_per_output[order])


def global_importance(attr: AttributionTensor) -> ImportanceRanking:
    """Rank features by mean |attribution| over samples and outputs."""
    scores = np.abs(attr.values).mean(axis=0)      # (d, k)
    return _rank(scores, _names_for(attr))


@dataclass
class ClassImportance:
    failure: ImportanceRanking
    success: ImportanceRanking
    contrast_features: list[str]
    contrast: np.ndarray           # failure score - success score, sorted desc
    contrast_order: np.ndarray


def class_conditional_importance(attr: AttributionTensor,
                                 labels: np.ndarray) -> ClassImportance:
    """Importance computed separately over failure (label 0) and success
    (label 1) samples; contrast = failure score - success score.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != attr.n_samples:
        raise ShapeError(f"{labels.shape[0]} labels for {attr.n_samples} explained samples")
    bad = set(np.unique(labels)) - {0, 1}
    if bad:
        raise InputError(f"labels must be 0 or 1, found {sorted(bad)}")
    names = _names_for(attr)
    abs_vals = np.abs(attr.values)

    def class_scores(mask):
        if not mask.any():
            return np.zeros((attr.n_features, attr.n_outputs))
        return abs_vals[mask].mean(axis=0)

    fail_scores = class_scores(labels == 0)
    succ_scores = class_scores(labels == 1)
    diff = fail_scores.mean(axis=1) - succ_scores.mean(axis=1)
    order = np.argsort(-diff, kind="stable")
    return ClassImportance(failure=_rank(fail_scores, names),
                           success=_rank(succ_scores, names),
                           contrast_features=[names[j] for j in order],
                           contrast=diff[order],
                           contrast_order=order)


def dependence_export(attr: AttributionTensor, x_eval: np.ndarray,
                      feature: int, color_feature: int,
                      output: int | str = "mean") -> list[tuple[float, float, float]]:
    """Rows of (feature value, attribution of that feature, color feature
    value) per evaluated sample. ``output`` picks one model output index or
    "mean" to average attributions over outputs.
    """
    x_eval = as_matrix(x_eval, "evaluation rows")
    if x_eval.shape[0] != attr.n_samples or x_eval.shape[1] != attr.n_features:
        raise ShapeError(
            f"evaluation rows {x_eval.shape} do not match attributions "
            f"({attr.n_samples}, {attr.n_features})")
    for name, idx in (("feature", feature), ("color_feature", color_feature)):
        if not 0 <= idx < attr.n_features:
            raise InputError(f"{name} index {idx} out of range [0, {attr.n_features})")
    if output == "mean":
        shap_vals = attr.values[:, feature, :].mean(axis=1)
    else:
        if not 0 <= int(output) < attr.n_outputs:
            raise InputError(f"output index {output} out of range [0, {attr.n_outputs})")
        shap_vals = attr.values[:, feature, int(output)]
    return [(float(x_eval[i, feature]), float(shap_vals[i]), float(x_eval[i, color_feature]))
            for i in range(attr.n_samples)]


def additivity_gap(attr: AttributionTensor, f, x_eval: np.ndarray) -> float:
    """Largest |base + sum(attributions) - f(x)| over samples and outputs."""
    x_eval = as_matrix(x_eval)
    fx = _call_model(f, x_eval, attr.n_outputs)
    reconstructed = attr.base_values[None, :] + attr.values.sum(axis=1)
    return float(np.max(np.abs(reconstructed - fx)))
