"""Inductive conformal pipeline: fit, score, calibrate, and emit prediction boxes."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .copulas import CopulaModel, _thresholds_from_cdfs, fit_gumbel
from .data import Dataset
from .errors import CalibTooSmall, DimensionMismatch, DomainError, LengthMismatch
from .regressors import ErrorModel, FittedModel, fit, fit_error_model
from .scores import EmpiricalCdf, pseudo_observations, score_matrix

COPULA_CHOICES = ("independent", "gumbel", "empirical")


@dataclass(frozen=True)
class PredictionBox:
    """Axis-aligned hyper-rectangle: one closed interval per target."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64).ravel()
        upper = np.asarray(self.upper, dtype=np.float64).ravel()
        if lower.size != upper.size or lower.size < 1:
            raise DimensionMismatch("lower and upper must be non-empty and equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DomainError("box bounds must be finite")
        if np.any(lower > upper):
            raise DomainError("every lower bound must be <= its upper bound")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_targets(self):
        return self.lower.size


def box_volume(box: PredictionBox) -> float:
    return float(np.prod(box.upper - box.lower))


def box_contains(box: PredictionBox, y) -> bool:
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != box.n_targets:
        raise LengthMismatch(f"box has {box.n_targets} targets, y has {y.size}")
    return bool(np.all((box.lower <= y) & (y <= box.upper)))


class ConformalPredictor:
    """Frozen pipeline state: fitted models, calibration scores, and a copula.

    Per-target thresholds are recomputed from the stored score matrix for
    each requested significance level; the per-column CDFs are the only
    cached derived state.
    """

    def __init__(self, underlying: FittedModel, error_model: ErrorModel,
                 scores: np.ndarray, beta: float, copula: CopulaModel,
                 ecdf_divisor="n", gumbel_estimator="tau_inversion"):
        scores = np.asarray(scores, dtype=np.float64)
        if scores.ndim != 2 or scores.shape[0] < 1:
            raise DimensionMismatch("score matrix must be 2-d and non-empty")
        m = scores.shape[1]
        if underlying.output_dim != m or error_model.output_dim != m:
            raise DimensionMismatch(
                f"models predict {underlying.output_dim}/{error_model.output_dim} "
                f"targets but the score matrix has {m} columns"
            )
        if beta < 0:
            raise DomainError(f"beta must be >= 0, got {beta}")
        if scores.flags.writeable:
            scores = scores.copy()
            scores.flags.writeable = False
        self.underlying = underlying
        self.error_model = error_model
        self.score_matrix = scores
        self.beta = float(beta)
        self.copula = copula
        self.ecdf_divisor = ecdf_divisor
        self.gumbel_estimator = gumbel_estimator
        self._cdfs = tuple(EmpiricalCdf(scores[:, j], divisor=ecdf_divisor) for j in range(m))

    @property
    def n_targets(self):
        return self.score_matrix.shape[1]

    def thresholds(self, epsilon_g, target_weights=None):
        """Per-target score thresholds alpha_s at a global significance level."""
        return _thresholds_from_cdfs(self._cdfs, self.copula, epsilon_g, target_weights)

    def _moments(self, X):
        yhat = self.underlying.predict(X)
        sigma = np.exp(self.error_model.predict_log_error(X)) + self.beta
        return yhat, sigma

    def predict_boxes(self, X, epsilon_g, target_weights=None):
        """Vectorized boxes for a feature matrix: (lower, upper) arrays."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        alpha = self.thresholds(epsilon_g, target_weights)
        yhat, sigma = self._moments(X)
        half = sigma * alpha[None, :]
        return yhat - half, yhat + half


def predict_box(pred: ConformalPredictor, x, epsilon_g, target_weights=None) -> PredictionBox:
    """Prediction box for a single feature vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    lower, upper = pred.predict_boxes(x[None, :], epsilon_g, target_weights)
    return PredictionBox(lower[0], upper[0])


def _derive_copula(choice, A, gumbel_estimator, ecdf_divisor):
    if isinstance(choice, CopulaModel):
        return choice
    if choice not in COPULA_CHOICES:
        raise DomainError(f"copula must be one of {COPULA_CHOICES}, got {choice!r}")
    if choice == "independent":
        return CopulaModel.independent()
    if choice == "gumbel":
        if A.shape[1] == 1:
            # a single target has no dependence to estimate
            return CopulaModel.gumbel(1.0)
        return fit_gumbel(pseudo_observations(A, ecdf_divisor), gumbel_estimator)
    return CopulaModel.empirical(pseudo_observations(A, ecdf_divisor))


def build(train: Dataset, calib: Dataset, spec, error_spec, copula_choice="independent",
          beta=0.1, seed=0, gumbel_estimator="tau_inversion", ecdf_divisor="n"):
    """Fit the full pipeline: models on train, scores and copula on calib.

    ``train`` and ``calib`` must be disjoint for the coverage guarantee to
    hold; that split is the caller's responsibility (see data.make_folds).
    """
    if calib.n_examples < 8:
        raise CalibTooSmall(f"need >= 8 calibration rows, got {calib.n_examples}")
    if train.n_targets != calib.n_targets or train.n_features != calib.n_features:
        raise DimensionMismatch("train and calib must share feature and target layout")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seed_underlying, seed_error = seq.spawn(2)
    underlying = fit(spec, train.features, train.targets, seed_underlying)
    yhat_train = underlying.predict(train.features)
    error_model = fit_error_model(error_spec, train.features, train.targets,
                                  yhat_train, seed_error)
    yhat_cal = underlying.predict(calib.features)
    mu_cal = error_model.predict_log_error(calib.features)
    A = score_matrix(calib.targets, yhat_cal, mu_cal, beta)
    copula = _derive_copula(copula_choice, A, gumbel_estimator, ecdf_divisor)
    return ConformalPredictor(underlying, error_model, A, beta, copula,
                              ecdf_divisor, gumbel_estimator)


def with_copula(pred: ConformalPredictor, copula_choice, gumbel_estimator=None):
    """Same fitted models and scores, recalibrated with a different copula."""
    estimator = gumbel_estimator or pred.gumbel_estimator
    copula = _derive_copula(copula_choice, pred.score_matrix, estimator, pred.ecdf_divisor)
    return ConformalPredictor(pred.underlying, pred.error_model, pred.score_matrix,
                              pred.beta, copula, pred.ecdf_divisor, estimator)


def write_predictions_csv(pred: ConformalPredictor, X, epsilon_g, path, target_names=None):
    """Boxes for each row of X: lower/center/upper per target, plus epsilon_g."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    names = list(target_names) if target_names else [f"t{j + 1}" for j in range(pred.n_targets)]
    if len(names) != pred.n_targets:
        raise DimensionMismatch("target_names must match the predictor's target count")
    lower, upper = pred.predict_boxes(X, epsilon_g)
    center = pred.underlying.predict(X)
    header = []
    for name in names:
        header += [f"{name}_lower", f"{name}_center", f"{name}_upper"]
    header.append("epsilon_g")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(X.shape[0]):
            row = []
            for j in range(pred.n_targets):
                row += [repr(float(lower[i, j])), repr(float(center[i, j])),
                        repr(float(upper[i, j]))]
            row.append(repr(float(epsilon_g)))
            writer.writerow(row)
