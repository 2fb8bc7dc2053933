"""Dataset loading, standardization, fold planning, and synthetic data generation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    EmptyFile,
    EmptyFitSet,
    MissingColumn,
    NonNumericCell,
    TooFewRows,
)


def _as_float_matrix(a, name):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Dataset:
    """A fixed table of numeric features and one or more numeric targets.

    Arrays are stored as read-only float64 so a dataset can be shared across
    worker threads without copying.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def __post_init__(self):
        feats = _as_float_matrix(self.features, "features")
        targs = _as_float_matrix(self.targets, "targets")
        if feats.shape[0] != targs.shape[0]:
            raise DimensionMismatch(
                f"features have {feats.shape[0]} rows, targets have {targs.shape[0]}"
            )
        if feats.shape[0] < 1:
            raise EmptyFile("dataset has no rows")
        if feats.shape[1] < 1 or targs.shape[1] < 1:
            raise DimensionMismatch("need at least one feature and one target column")
        if len(self.feature_names) != feats.shape[1]:
            raise DimensionMismatch("feature_names does not match feature count")
        if len(self.target_names) != targs.shape[1]:
            raise DimensionMismatch("target_names does not match target count")
        feats = feats.copy()
        targs = targs.copy()
        feats.flags.writeable = False
        targs.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "target_names", tuple(self.target_names))

    @property
    def n_examples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_targets(self):
        return self.targets.shape[1]

    def subset(self, idx):
        """Rows at ``idx``, as a new Dataset."""
        return Dataset(
            self.features[idx], self.targets[idx], self.feature_names, self.target_names
        )


def load_csv(path, target_columns):
    """Read a headed CSV file into a Dataset.

    Columns named in ``target_columns`` become targets (in the given order);
    every other column becomes a feature (in header order).

    Raises:
        EmptyFile: no header or no data rows.
        MissingColumn: a requested target is absent from the header.
        NonNumericCell: a cell fails float parsing (reports data row index
            and column name).
    """
    target_columns = list(target_columns)
    if not target_columns:
        raise MissingColumn("<none requested>")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} is empty") from None
        header = [h.strip() for h in header]
        for name in target_columns:
            if name not in header:
                raise MissingColumn(name)
        rows = []
        for i, raw in enumerate(reader):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise NonNumericCell(i, header[min(len(raw), len(header) - 1)], "<ragged row>")
            parsed = []
            for name, cell in zip(header, raw):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise NonNumericCell(i, name, cell.strip()) from None
            rows.append(parsed)
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")
    table = np.asarray(rows, dtype=np.float64)
    tcol = [header.index(name) for name in target_columns]
    fcol = [j for j in range(len(header)) if j not in set(tcol)]
    if not fcol:
        raise DimensionMismatch("every column was claimed as a target; no features left")
    return Dataset(
        features=table[:, fcol],
        targets=table[:, tcol],
        feature_names=tuple(header[j] for j in fcol),
        target_names=tuple(target_columns),
    )


@dataclass(frozen=True)
class ScalerParams:
    """Per-column affine transform fitted on a subset of rows.

    ``mean`` and ``std`` hold feature columns first, then target columns.
    Columns with zero variance keep std 1.0 so the transform stays invertible.
    """

    mean: np.ndarray
    std: np.ndarray
    n_features: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise DimensionMismatch("mean and std must be 1-d arrays of equal length")
        if np.any(std <= 0):
            raise DomainError("std entries must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def feature_mean(self):
        return self.mean[: self.n_features]

    @property
    def feature_std(self):
        return self.std[: self.n_features]

    @property
    def target_mean(self):
        return self.mean[self.n_features:]

    @property
    def target_std(self):
        return self.std[self.n_features:]

    def transform(self, data: Dataset) -> Dataset:
        return Dataset(
            (data.features - self.feature_mean) / self.feature_std,
            (data.targets - self.target_mean) / self.target_std,
            data.feature_names,
            data.target_names,
        )

    def inverse(self, data: Dataset) -> Dataset:
        return Dataset(
            data.features * self.feature_std + self.feature_mean,
            data.targets * self.target_std + self.target_mean,
            data.feature_names,
            data.target_names,
        )


def standardize(data: Dataset, fit_idx):
    """Zero-mean unit-std scaling with statistics taken from ``fit_idx`` rows only.

    Returns the fully transformed dataset and the fitted ScalerParams. Rows
    outside ``fit_idx`` never influence the statistics, so held-out data
    cannot leak into them.
    """
    fit_idx = np.asarray(fit_idx, dtype=np.intp)
    if fit_idx.size == 0:
        raise EmptyFitSet("standardize needs at least one fit row")
    cols = np.hstack([data.features[fit_idx], data.targets[fit_idx]])
    mean = cols.mean(axis=0)
    std = cols.std(axis=0)
    std[std == 0.0] = 1.0
    params = ScalerParams(mean=mean, std=std, n_features=data.n_features)
    return params.transform(data), params


@dataclass(frozen=True)
class Fold:
    train_idx: np.ndarray
    calib_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        for name in ("train_idx", "calib_idx", "test_idx"):
            arr = np.asarray(getattr(self, name), dtype=np.intp)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        a, b, c = set(self.train_idx), set(self.calib_idx), set(self.test_idx)
        if (a & b) or (a & c) or (b & c):
            raise DomainError("fold index sets overlap")


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic cross-validation plan: k disjoint test folds covering all
    rows, with a calibration subset carved out of each fold's remainder."""

    fold_count: int
    calibration_fraction: float
    seed: int
    folds: tuple[Fold, ...] = field(default=())

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def make_folds(n, fold_count=10, calibration_fraction=0.10, seed=0):
    """Plan a k-fold split with a proper-training / calibration partition.

    Rows are shuffled once (seeded), cut into ``fold_count`` contiguous test
    folds whose sizes differ by at most one, and for each fold a calibration
    set of ``round(calibration_fraction * len(non-test))`` rows is drawn
    uniformly (seeded) from the non-test rows; the rest train the models.

    Raises:
        TooFewRows: n < 2 * fold_count, or a fold's calibration set would
            have fewer than 2 rows.
        DomainError: fold_count < 2 or fraction outside (0, 1).
    """
    if fold_count < 2:
        raise DomainError(f"fold_count must be >= 2, got {fold_count}")
    if not 0.0 < calibration_fraction < 1.0:
        raise DomainError(f"calibration_fraction must be in (0, 1), got {calibration_fraction}")
    if n < 2 * fold_count:
        raise TooFewRows(f"need at least {2 * fold_count} rows for {fold_count} folds, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_blocks = np.array_split(perm, fold_count)
    folds = []
    for block in test_blocks:
        in_test = np.zeros(n, dtype=bool)
        in_test[block] = True
        rest = perm[~in_test[perm]]
        n_calib = int(round(calibration_fraction * rest.size))
        if n_calib < 2:
            raise TooFewRows(
                f"calibration_fraction {calibration_fraction} gives {n_calib} "
                f"calibration rows; need at least 2"
            )
        calib = rng.choice(rest, size=n_calib, replace=False)
        calib_mask = np.zeros(n, dtype=bool)
        calib_mask[calib] = True
        train = rest[~calib_mask[rest]]
        folds.append(Fold(np.sort(train), np.sort(calib), np.sort(block)))
    return SplitPlan(
        fold_count=fold_count,
        calibration_fraction=calibration_fraction,
        seed=seed,
        folds=tuple(folds),
    )


def synth_dataset(n, m, dependence, feature_dim=8, seed=0):
    """Generate a linear-Gaussian dataset with tunable noise dependence.

    Targets are X @ W plus unit-variance noise built from a shared latent
    factor: noise_j = rho * g + sqrt(1 - rho^2) * e_j with rho = dependence,
    so any two noise components have correlation rho^2. dependence=0 gives
    independent noise, dependence -> 1 approaches comonotone noise.

    Feature columns are named x1..xd, targets t1..tm.
    """
    if n < 10:
        raise TooFewRows(f"synthetic dataset needs n >= 10, got {n}")
    if m < 1 or feature_dim < 1:
        raise DomainError("m and feature_dim must be positive")
    if not 0.0 <= dependence < 1.0:
        raise DomainError(f"dependence must be in [0, 1), got {dependence}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, feature_dim))
    W = rng.standard_normal((feature_dim, m)) / np.sqrt(feature_dim)
    g = rng.standard_normal((n, 1))
    e = rng.standard_normal((n, m))
    noise = dependence * g + np.sqrt(1.0 - dependence**2) * e
    Y = X @ W + noise
    return Dataset(
        features=X,
        targets=Y,
        feature_names=tuple(f"x{j + 1}" for j in range(feature_dim)),
        target_names=tuple(f"t{j + 1}" for j in range(m)),
    )
