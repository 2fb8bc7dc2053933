"""Point regressors (ridge, k-NN, MLP) and the log-residual error model.

The conformal layer only needs ``predict``; every regressor here is
multi-output, deterministic given its seed, and immutable once fitted.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, DimensionMismatch, DomainError, NonFiniteLoss

SELU_SCALE = 1.0507009873554804934193349852946
SELU_ALPHA = 1.6732632423543772848170429916717

KINDS = ("ridge", "knn", "mlp")


def selu(x):
    x = np.asarray(x, dtype=np.float64)
    # clip the unused branch so np.where does not overflow on large inputs
    return SELU_SCALE * np.where(x > 0.0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))


def selu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return SELU_SCALE * np.where(x > 0.0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0)))


@dataclass(frozen=True)
class RegressorSpec:
    """Declarative model choice; only the fields for ``kind`` are consulted.

    mlp: widths (hidden layers), dropout, epochs, lr, batch.
    knn: k. ridge: l2.
    """

    kind: str = "ridge"
    widths: tuple[int, ...] = (128, 64, 32)
    dropout: float = 0.1
    epochs: int = 100
    lr: float = 1e-3
    batch: int = 32
    k: int = 5
    l2: float = 1e-6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"regressor kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"layer widths must be >= 1, got {self.widths}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.epochs < 1 or self.batch < 1:
            raise ConfigError("epochs and batch must be >= 1")
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.l2 < 0:
            raise ConfigError(f"l2 weight must be >= 0, got {self.l2}")

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError(f"regressor spec must be an object, got {type(data).__name__}")
        allowed = {"kind", "widths", "dropout", "epochs", "lr", "batch", "k", "l2"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown regressor spec keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


class FittedModel:
    """Shared predict-time validation; subclasses implement _predict."""

    spec: RegressorSpec
    input_dim: int
    output_dim: int

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"expected (n, {self.input_dim}) inputs, got shape {X.shape}"
            )
        return self._predict(X)

    def _predict(self, X):
        raise NotImplementedError


def _freeze(arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


class RidgeModel(FittedModel):
    """Linear model with intercept; the l2 penalty does not touch the intercept."""

    def __init__(self, spec, coef):
        coef = _freeze(coef)
        if coef.ndim != 2 or coef.shape[0] < 2:
            raise DimensionMismatch("coef must be ((d+1), m) including the intercept row")
        self.spec = spec
        self.coef = coef
        self.input_dim = coef.shape[0] - 1
        self.output_dim = coef.shape[1]

    def _predict(self, X):
        return X @ self.coef[:-1] + self.coef[-1]


class KnnModel(FittedModel):
    """Mean of the k nearest stored rows by Euclidean distance (stable ties)."""

    def __init__(self, spec, X, Y):
        self.spec = spec
        self.X = _freeze(X)
        self.Y = _freeze(Y)
        if self.X.shape[0] != self.Y.shape[0]:
            raise DimensionMismatch("stored X and Y must share a row count")
        self.input_dim = self.X.shape[1]
        self.output_dim = self.Y.shape[1]

    def _predict(self, X):
        out = np.empty((X.shape[0], self.output_dim))
        train_sq = (self.X**2).sum(axis=1)
        k = self.spec.k
        for start in range(0, X.shape[0], 512):
            chunk = X[start:start + 512]
            d2 = (chunk**2).sum(axis=1)[:, None] - 2.0 * chunk @ self.X.T + train_sq[None, :]
            near = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start:start + 512] = self.Y[near].mean(axis=1)
        return out


class MlpModel(FittedModel):
    """Fully connected SELU network with a linear output layer."""

    def __init__(self, spec, weights, biases, loss_history=()):
        if len(weights) != len(biases) or not weights:
            raise DimensionMismatch("need one bias vector per weight matrix")
        self.spec = spec
        self.weights = tuple(_freeze(W) for W in weights)
        self.biases = tuple(_freeze(b) for b in biases)
        self.loss_history = tuple(float(v) for v in loss_history)
        self.input_dim = self.weights[0].shape[0]
        self.output_dim = self.weights[-1].shape[1]

    def _predict(self, X):
        return _mlp_forward(self.weights, self.biases, X)[0]


def _mlp_forward(weights, biases, X, masks=None):
    """Forward pass; returns (output, per-layer (pre-activation, activation) cache)."""
    cache = []
    h = X
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        if i < len(weights) - 1:
            a = selu(z)
            if masks is not None:
                a = a * masks[i]
            cache.append((z, a))
            h = a
        else:
            cache.append((z, z))
            h = z
    return h, cache


def _mlp_backward(weights, biases, X, Y, masks=None):
    """Gradient of mean squared error over all n*m output entries."""
    yhat, cache = _mlp_forward(weights, biases, X, masks)
    n_terms = Y.shape[0] * Y.shape[1]
    delta = 2.0 * (yhat - Y) / n_terms
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        h_prev = X if i == 0 else cache[i - 1][1]
        grads_w[i] = h_prev.T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ weights[i].T
            if masks is not None:
                delta = delta * masks[i - 1]
            delta = delta * selu_grad(cache[i - 1][0])
    return grads_w, grads_b, float(np.mean((yhat - Y) ** 2))


def mlp_gradient(model: MlpModel, X, Y):
    """Analytic MSE gradient with dropout disabled (for optimizer and checks)."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0] or X.shape[0] < 1:
        raise DimensionMismatch("batch X and Y must share a positive row count")
    gw, gb, _ = _mlp_backward(list(model.weights), list(model.biases), X, Y)
    return gw, gb


def _fit_mlp(spec, X, Y, seed):
    rng = np.random.default_rng(seed)
    dims = [X.shape[1], *spec.widths, Y.shape[1]]
    # LeCun-normal initialization keeps SELU activations self-normalizing
    weights = [
        rng.normal(0.0, np.sqrt(1.0 / dims[i]), size=(dims[i], dims[i + 1]))
        for i in range(len(dims) - 1)
    ]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    m_w = [np.zeros_like(W) for W in weights]
    v_w = [np.zeros_like(W) for W in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    n = X.shape[0]
    history = []
    for _ in range(spec.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, spec.batch):
            idx = perm[start:start + spec.batch]
            if spec.dropout > 0.0:
                masks = [
                    (rng.random((idx.size, w)) >= spec.dropout) / (1.0 - spec.dropout)
                    for w in spec.widths
                ]
            else:
                masks = None
            gw, gb, _ = _mlp_backward(weights, biases, X[idx], Y[idx], masks)
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for i in range(len(weights)):
                for g, p, mm, vv in ((gw[i], weights[i], m_w[i], v_w[i]),
                                     (gb[i], biases[i], m_b[i], v_b[i])):
                    mm *= beta1
                    mm += (1.0 - beta1) * g
                    vv *= beta2
                    vv += (1.0 - beta2) * g * g
                    p -= spec.lr * (mm / corr1) / (np.sqrt(vv / corr2) + eps)
        epoch_loss = float(np.mean((_mlp_forward(weights, biases, X)[0] - Y) ** 2))
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(f"training diverged at epoch {len(history)}")
        history.append(epoch_loss)
    return MlpModel(spec, weights, biases, history)


def fit(spec: RegressorSpec, X, Y, seed=0):
    """Fit the regressor described by ``spec``; deterministic given ``seed``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] < 1:
        raise DimensionMismatch(
            f"X and Y must be 2-d with matching positive rows, got {X.shape}, {Y.shape}"
        )
    if spec.kind == "ridge":
        Z = np.hstack([X, np.ones((X.shape[0], 1))])
        if spec.l2 == 0.0:
            coef, *_ = np.linalg.lstsq(Z, Y, rcond=None)
        else:
            penalty = spec.l2 * np.eye(Z.shape[1])
            penalty[-1, -1] = 0.0
            coef = np.linalg.solve(Z.T @ Z + penalty, Z.T @ Y)
        return RidgeModel(spec, coef)
    if spec.kind == "knn":
        if spec.k > X.shape[0]:
            raise DomainError(f"k={spec.k} exceeds the {X.shape[0]} stored rows")
        return KnnModel(spec, X, Y)
    return _fit_mlp(spec, X, Y, seed)


class ErrorModel:
    """Regressor over log residual magnitudes; predictions live in log space."""

    def __init__(self, model: FittedModel, floor):
        self.model = model
        self.floor = float(floor)

    @property
    def input_dim(self):
        return self.model.input_dim

    @property
    def output_dim(self):
        return self.model.output_dim

    def predict_log_error(self, X):
        return self.model.predict(X)


def fit_error_model(spec, X_train, Y_train, Yhat_train, seed=0, floor=1e-8):
    """Fit a model of per-target log residual size: mu = ln(max(|Y - Yhat|, floor)).

    The floor keeps exact fits from producing -inf targets.
    """
    Y_train = np.asarray(Y_train, dtype=np.float64)
    Yhat_train = np.asarray(Yhat_train, dtype=np.float64)
    if Y_train.shape != Yhat_train.shape:
        raise DimensionMismatch(
            f"Y and Yhat must match, got {Y_train.shape}, {Yhat_train.shape}"
        )
    if floor <= 0.0:
        raise DomainError(f"residual floor must be positive, got {floor}")
    mu = np.log(np.maximum(np.abs(Y_train - Yhat_train), floor))
    return ErrorModel(fit(spec, X_train, mu, seed), floor)
