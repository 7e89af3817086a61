"""Denoising autoencoder with a joint classifier head, from scratch.

Layer recipe: affine, then batch normalization, then activation, then
dropout. Hidden and latent layers use LeakyReLU; the decoder output layer
and the classifier head use a sigmoid and carry neither batch norm nor
dropout (so reconstructions stay inside (0, 1) in every mode).

Batch norm keeps running statistics (momentum 0.9 by default) for
inference and uses population batch statistics while training. Dropout is
the non-inverted kind: a Bernoulli(keep) 0/1 mask multiplies activations
during training, and inference multiplies activations by keep instead.

The optimizer is Adam in its plain recurrence without bias correction:

    m <- beta1 * m + (1 - beta1) * g
    v <- beta2 * v + (1 - beta2) * g^2
    theta <- theta - lr * m / (sqrt(v) + eps)

The joint objective is

    L_total = L_recon + latent_weight * L_latent
            + classifier_weight * L_clf + entropy_weight * L_ent

where L_recon is the batch mean of squared reconstruction norms against the
clean inputs, L_latent is the mean over latent dimensions of the population
variance of each latent coordinate, L_clf is binary cross entropy, and
L_ent is the mean prediction entropy. ``backward`` returns analytic
gradients of L_total for every weight, bias, gamma and beta, including the
paths through batch statistics, dropout masks and the variance penalty.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, NumericError, ShapeError, StateError
from .numerics import RngStream, as_matrix

LOG_CLAMP = 1e-12
LOSS_GUARD = 1e6


@dataclass(frozen=True)
class Activation:
    kind: str                 # "leaky_relu" | "sigmoid" | "linear"
    slope: float = 0.01       # leaky_relu only

    def apply(self, a: np.ndarray) -> np.ndarray:
        if self.kind == "leaky_relu":
            return np.where(a > 0, a, self.slope * a)
        if self.kind == "sigmoid":
            return sigmoid(a)
        if self.kind == "linear":
            return a
        raise StateError(f"unknown activation kind {self.kind!r}")

    def grad(self, a: np.ndarray, out: np.ndarray) -> np.ndarray:
        """Derivative with respect to the pre-activation, elementwise."""
        if self.kind == "leaky_relu":
            return np.where(a > 0, 1.0, self.slope)
        if self.kind == "sigmoid":
            return out * (1.0 - out)
        if self.kind == "linear":
            return np.ones_like(a)
        raise StateError(f"unknown activation kind {self.kind!r}")


LEAKY = Activation("leaky_relu", 0.01)
SIGMOID = Activation("sigmoid")
LINEAR = Activation("linear")


def sigmoid(a: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(a, dtype=np.float64)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.9
    epsilon: float = 1e-5


@dataclass
class DropoutState:
    keep: float

    def __post_init__(self):
        if not 0.0 < self.keep <= 1.0:
            raise StateError(f"dropout keep probability must be in (0, 1], got {self.keep}")


@dataclass
class DenseLayer:
    weights: np.ndarray          # (out, in)
    bias: np.ndarray             # (out,)
    activation: Activation
    batch_norm: BatchNormState | None = None
    dropout: DropoutState | None = None


@dataclass
class NetworkParams:
    encoder: list[DenseLayer]
    decoder: list[DenseLayer]
    classifier: DenseLayer
    input_dim: int
    latent_dim: int


def build_network(input_dim: int, hidden_widths: list[int], latent_dim: int,
                  rng: RngStream, dropout_keep: float = 0.7,
                  bn_momentum: float = 0.9, bn_epsilon: float = 1e-5) -> NetworkParams:
    """Assemble encoder input->hidden...->latent, a mirrored decoder, and a
    one-unit sigmoid classifier head. Weights are seeded He-style normals.
    """
    if input_dim < 1 or latent_dim < 1 or any(w < 1 for w in hidden_widths):
        raise ShapeError("all layer widths must be positive")

    def dense(n_in, n_out, act, with_bn, with_dropout):
        std = np.sqrt(2.0 / n_in) if act.kind == "leaky_relu" else np.sqrt(1.0 / n_in)
        bn = None
        if with_bn:
            bn = BatchNormState(gamma=np.ones(n_out), beta=np.zeros(n_out),
                                running_mean=np.zeros(n_out), running_var=np.ones(n_out),
                                momentum=bn_momentum, epsilon=bn_epsilon)
        drop = DropoutState(dropout_keep) if with_dropout and dropout_keep < 1.0 else None
        return DenseLayer(weights=rng.normal((n_out, n_in), std=std),
                          bias=np.zeros(n_out), activation=act,
                          batch_norm=bn, dropout=drop)

    enc_widths = [input_dim, *hidden_widths, latent_dim]
    encoder = [dense(enc_widths[i], enc_widths[i + 1], LEAKY, True, True)
               for i in range(len(enc_widths) - 1)]
    dec_widths = [latent_dim, *reversed(hidden_widths), input_dim]
    decoder = [dense(dec_widths[i], dec_widths[i + 1], LEAKY, True, True)
               for i in range(len(dec_widths) - 2)]
    decoder.append(dense(dec_widths[-2], dec_widths[-1], SIGMOID, False, False))
    classifier = dense(latent_dim, 1, SIGMOID, False, False)
    return NetworkParams(encoder, decoder, classifier, input_dim, latent_dim)


def batchnorm_forward(state: BatchNormState, a: np.ndarray,
                      training: bool) -> tuple[np.ndarray, dict | None]:
    """Normalize per column. Training uses population batch statistics and
    updates the running estimates in place; inference uses the running ones.
    """
    a = as_matrix(a, "batch norm input")
    if training:
        if a.shape[0] < 2:
            raise DegenerateDataError(
                f"batch norm in training mode needs at least 2 rows, got {a.shape[0]}")
        mean = a.mean(axis=0)
        var = np.square(a - mean).mean(axis=0)
        state.running_mean = state.momentum * state.running_mean + (1 - state.momentum) * mean
        state.running_var = state.momentum * state.running_var + (1 - state.momentum) * var
        std = np.sqrt(var + state.epsilon)
        normalized = (a - mean) / std
        return state.gamma * normalized + state.beta, {"normalized": normalized, "std": std}
    std = np.sqrt(state.running_var + state.epsilon)
    normalized = (a - state.running_mean) / std
    return state.gamma * normalized + state.beta, None


def batchnorm_backward(state: BatchNormState, cache: dict,
                       d_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients through training-mode batch norm, including the dependence
    of the batch mean and variance on every row.
    """
    normalized, std = cache["normalized"], cache["std"]
    d_gamma = (d_out * normalized).sum(axis=0)
    d_beta = d_out.sum(axis=0)
    d_norm = d_out * state.gamma
    d_a = (d_norm - d_norm.mean(axis=0)
           - normalized * (d_norm * normalized).mean(axis=0)) / std
    return d_a, d_gamma, d_beta


def dense_forward(layer: DenseLayer, h_in: np.ndarray, training: bool,
                  rng: RngStream | None = None) -> tuple[np.ndarray, dict | None]:
    """One layer: affine, optional batch norm, activation, optional dropout.

    Returns (output, cache); the cache is only built in training mode and
    holds what the backward pass needs.
    """
    h_in = as_matrix(h_in, "layer input")
    if h_in.shape[1] != layer.weights.shape[1]:
        raise ShapeError(
            f"layer expects {layer.weights.shape[1]} inputs, got {h_in.shape[1]}")
    a = h_in @ layer.weights.T + layer.bias
    bn_cache = None
    if layer.batch_norm is not None:
        u, bn_cache = batchnorm_forward(layer.batch_norm, a, training)
    else:
        u = a
    h_act = layer.activation.apply(u)
    mask = None
    if layer.dropout is not None:
        if training:
            if rng is None:
                raise StateError("training-mode dropout needs an RngStream")
            mask = rng.bernoulli(layer.dropout.keep, h_act.shape)
            h_out = mask * h_act
        else:
            h_out = layer.dropout.keep * h_act
    else:
        h_out = h_act
    if not training:
        return h_out, None
    cache = {"h_in": h_in, "pre_act": u, "post_act": h_act,
             "bn": bn_cache, "mask": mask}
    return h_out, cache


def dense_backward(layer: DenseLayer, cache: dict,
                   d_out: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Gradients for one layer. Returns (d_input, {weights, bias[, gamma, beta]})."""
    if cache is None:
        raise StateError("dense_backward needs a training-mode cache")
    d = d_out
    if cache["mask"] is not None:
        d = d * cache["mask"]
    d_u = d * layer.activation.grad(cache["pre_act"], cache["post_act"])
    grads: dict[str, np.ndarray] = {}
    if layer.batch_norm is not None:
        d_a, d_gamma, d_beta = batchnorm_backward(layer.batch_norm, cache["bn"], d_u)
        grads["gamma"] = d_gamma
        grads["beta"] = d_beta
    else:
        d_a = d_u
    grads["weights"] = d_a.T @ cache["h_in"]
    grads["bias"] = d_a.sum(axis=0)
    d_in = d_a @ layer.weights
    return d_in, grads


def _stack_forward(layers, x, training, rng):
    caches = [] if training else None
    h = x
    for layer in layers:
        h, cache = dense_forward(layer, h, training, rng)
        if training:
            caches.append(cache)
    return h, caches


def encoder_forward(params: NetworkParams, x: np.ndarray, training: bool = False,
                    rng: RngStream | None = None):
    """Map inputs to latent codes. Returns (z, caches); caches is None when
    not training.
    """
    return _stack_forward(params.encoder, as_matrix(x, "encoder input"), training, rng)


def decoder_forward(params: NetworkParams, z: np.ndarray, training: bool = False,
                    rng: RngStream | None = None):
    return _stack_forward(params.decoder, as_matrix(z, "decoder input"), training, rng)


def classifier_forward(params: NetworkParams, z: np.ndarray, training: bool = False):
    """Single sigmoid unit on the latent code. Returns (y_hat column, cache)."""
    return dense_forward(params.classifier, as_matrix(z, "classifier input"), training)


def encode(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Inference-mode latent codes."""
    z, _ = encoder_forward(params, x, training=False)
    return z


def reconstruct(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    x_hat, _ = decoder_forward(params, encode(params, x), training=False)
    return x_hat


def classify(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    y_hat, _ = classifier_forward(params, encode(params, x), training=False)
    return y_hat[:, 0]


@dataclass
class ForwardPass:
    """Training-mode forward results plus the caches backward needs."""
    x_in: np.ndarray
    z: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray            # column vector (n, 1)
    encoder_caches: list | None
    decoder_caches: list | None
    classifier_cache: dict | None


def training_forward(params: NetworkParams, x_corrupted: np.ndarray,
                     rng: RngStream) -> ForwardPass:
    z, enc_caches = encoder_forward(params, x_corrupted, training=True, rng=rng)
    x_hat, dec_caches = decoder_forward(params, z, training=True, rng=rng)
    y_hat, clf_cache = classifier_forward(params, z, training=True)
    return ForwardPass(x_corrupted, z, x_hat, y_hat, enc_caches, dec_caches, clf_cache)


def corrupt(x: np.ndarray, noise_std: float, rng: RngStream) -> np.ndarray:
    """Additive Gaussian corruption clipped back to [0, 1].

    noise_std == 0 is exactly the identity and consumes no randomness.
    """
    x = as_matrix(x, "corruption input")
    if noise_std < 0:
        raise ShapeError(f"noise_std must be non-negative, got {noise_std}")
    if noise_std == 0.0:
        return x.copy()
    return np.clip(x + rng.normal(x.shape, std=noise_std), 0.0, 1.0)


@dataclass(frozen=True)
class LossWeights:
    latent_weight: float = 0.1
    classifier_weight: float = 1.0
    entropy_weight: float = 0.01


@dataclass(frozen=True)
class LossComponents:
    """Unweighted loss terms from one batch."""
    recon: float
    latent: float
    clf: float
    ent: float


def loss_reconstruction(x_clean: np.ndarray, x_hat: np.ndarray) -> float:
    x_clean = as_matrix(x_clean)
    x_hat = as_matrix(x_hat)
    if x_clean.shape != x_hat.shape:
        raise ShapeError(f"shapes differ: {x_clean.shape} vs {x_hat.shape}")
    return float(np.square(x_clean - x_hat).sum(axis=1).mean())


def loss_latent_variance(z: np.ndarray) -> float:
    """Mean over latent dimensions of the population variance of each one."""
    z = as_matrix(z)
    var = np.square(z - z.mean(axis=0)).mean(axis=0)
    return float(var.mean())


def _clamped(y_hat: np.ndarray) -> np.ndarray:
    return np.clip(y_hat, LOG_CLAMP, 1.0 - LOG_CLAMP)


def loss_classification(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Binary cross entropy with probability clamping at 1e-12."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    p = _clamped(np.asarray(y_hat, dtype=np.float64).reshape(-1))
    if y.shape != p.shape:
        raise ShapeError(f"shapes differ: {y.shape} vs {p.shape}")
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())


def loss_entropy(y_hat: np.ndarray) -> float:
    """Mean binary entropy of the predicted probabilities."""
    p = _clamped(np.asarray(y_hat, dtype=np.float64).reshape(-1))
    return float(-(p * np.log(p) + (1 - p) * np.log(1 - p)).mean())


def total_loss(components: LossComponents,
               weights: LossWeights) -> tuple[float, dict[str, float]]:
    """Weighted sum of the four terms plus an unweighted breakdown."""
    breakdown = {"recon": components.recon, "latent": components.latent,
                 "clf": components.clf, "ent": components.ent}
    for term, value in breakdown.items():
        if not np.isfinite(value):
            raise NumericError(f"loss term {term!r} is non-finite: {value}")
    total = (components.recon
             + weights.latent_weight * components.latent
             + weights.classifier_weight * components.clf
             + weights.entropy_weight * components.ent)
    if not np.isfinite(total):
        raise NumericError(f"total loss is non-finite: {total}")
    return float(total), breakdown


def batch_losses(fwd: ForwardPass, x_clean: np.ndarray, y: np.ndarray) -> LossComponents:
    return LossComponents(
        recon=loss_reconstruction(x_clean, fwd.x_hat),
        latent=loss_latent_variance(fwd.z),
        clf=loss_classification(y, fwd.y_hat),
        ent=loss_entropy(fwd.y_hat),
    )


def _stack_backward(prefix: str, layers, caches, d_out, grads: dict):
    d = d_out
    for idx in reversed(range(len(layers))):
        d, layer_grads = dense_backward(layers[idx], caches[idx], d)
        for key, val in layer_grads.items():
            grads[f"{prefix}.{idx}.{key}"] = val
    return d


def backward(params: NetworkParams, fwd: ForwardPass, x_clean: np.ndarray,
             y: np.ndarray, weights: LossWeights) -> dict[str, np.ndarray]:
    """Analytic gradients of the weighted total loss for every parameter.

    Keys follow ``named_parameters``: encoder.i.weights, encoder.i.bias,
    encoder.i.gamma, encoder.i.beta, decoder.i.*, classifier.*.
    """
    if fwd.encoder_caches is None:
        raise StateError("backward needs a training-mode forward (caches missing)")
    x_clean = as_matrix(x_clean)
    n, k = fwd.z.shape
    y_col = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if y_col.shape[0] != n:
        raise ShapeError(f"{y_col.shape[0]} labels for a batch of {n}")
    grads: dict[str, np.ndarray] = {}

    # reconstruction path back to the latent code
    d_x_hat = (2.0 / n) * (fwd.x_hat - x_clean)
    d_z = _stack_backward("decoder", params.decoder, fwd.decoder_caches, d_x_hat, grads)

    # classification and entropy paths through the sigmoid head
    p = _clamped(fwd.y_hat)
    d_y_hat = (weights.classifier_weight * (-(1.0 / n)) * (y_col / p - (1 - y_col) / (1 - p))
               + weights.entropy_weight * (-(1.0 / n)) * np.log(p / (1 - p)))
    d_z_clf, clf_grads = dense_backward(params.classifier, fwd.classifier_cache, d_y_hat)
    for key, val in clf_grads.items():
        grads[f"classifier.{key}"] = val
    d_z = d_z + d_z_clf

    # variance penalty acts on the latent code directly
    d_z = d_z + weights.latent_weight * (2.0 / (n * k)) * (fwd.z - fwd.z.mean(axis=0))

    _stack_backward("encoder", params.encoder, fwd.encoder_caches, d_z, grads)
    return grads


def named_parameters(params: NetworkParams) -> list[tuple[str, np.ndarray]]:
    """Stable (name, array) listing of every trainable parameter."""
    out: list[tuple[str, np.ndarray]] = []
    for prefix, layers in (("encoder", params.encoder), ("decoder", params.decoder)):
        for idx, layer in enumerate(layers):
            out.append((f"{prefix}.{idx}.weights", layer.weights))
            out.append((f"{prefix}.{idx}.bias", layer.bias))
            if layer.batch_norm is not None:
                out.append((f"{prefix}.{idx}.gamma", layer.batch_norm.gamma))
                out.append((f"{prefix}.{idx}.beta", layer.batch_norm.beta))
    out.append(("classifier.weights", params.classifier.weights))
    out.append(("classifier.bias", params.classifier.bias))
    return out


@dataclass
class AdamState:
    """Plain Adam moments, one pair per named parameter. No bias correction."""
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: NetworkParams,
              grads: dict[str, np.ndarray]) -> None:
    """One in-place update of every parameter from its gradient."""
    for name, theta in named_parameters(params):
        g = grads.get(name)
        if g is None:
            raise StateError(f"missing gradient for parameter {name!r}")
        if g.shape != theta.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match {name} {theta.shape}")
        m = state.first_moment.setdefault(name, np.zeros_like(theta))
        v = state.second_moment.setdefault(name, np.zeros_like(theta))
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * np.square(g)
        theta -= state.learning_rate * m / (np.sqrt(v) + state.epsilon)
    state.step += 1
