"""Validity and efficiency evaluation over cross-validation folds.

Validity: the empirical coverage curve against the significance grid, and its
mean signed gap (in percentage points) from the nominal line 1 - epsilon_g.
Efficiency: the median prediction-box volume at epsilon_g = 0.1, robust to
the occasional huge box.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, make_folds, standardize
from .errors import CalibTooSmall, ConfigError, DomainError, EmptyTestSet
from .predictor import ConformalPredictor, build, with_copula

EFFICIENCY_EPSILON = 0.1


def default_grid():
    """Twenty significance levels: 0.01 plus 0.05 steps up to 0.95."""
    return np.concatenate([[0.01], np.arange(1, 20) * 0.05])


@dataclass(frozen=True)
class ValidityCurve:
    grid: np.ndarray
    coverage: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64).ravel()
        cov = np.asarray(self.coverage, dtype=np.float64).ravel()
        if grid.size != cov.size or grid.size < 1:
            raise DomainError("grid and coverage must be non-empty and equal length")
        if np.any(grid <= 0.0) or np.any(grid >= 1.0) or np.any(np.diff(grid) <= 0.0):
            raise DomainError("grid must be strictly increasing within (0, 1)")
        if np.any(cov < 0.0) or np.any(cov > 1.0):
            raise DomainError("coverage values must lie in [0, 1]")
        grid.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coverage", cov)


def validity_curve(pred: ConformalPredictor, X_test, Y_test, grid=None) -> ValidityCurve:
    """Fraction of test points whose target vector falls in its box, per grid level."""
    X = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y_test, dtype=np.float64))
    if X.shape[0] < 1:
        raise EmptyTestSet("validity_curve needs a non-empty test set")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    yhat, sigma = pred._moments(X)
    coverage = np.empty(grid.size)
    for i, eps in enumerate(grid):
        alpha = pred.thresholds(eps)
        half = sigma * alpha[None, :]
        lower, upper = yhat - half, yhat + half
        inside = np.all((lower <= Y) & (Y <= upper), axis=1)
        coverage[i] = float(np.mean(inside))
    return ValidityCurve(grid=grid, coverage=coverage)


def validity_gap(curve: ValidityCurve) -> float:
    """Mean of (coverage - (1 - epsilon_g)) over the grid, in percentage points.

    Negative means the curve sits below the nominal line on average.
    """
    return float(np.mean(curve.coverage - (1.0 - curve.grid)) * 100.0)


def efficiency_median_volume(pred: ConformalPredictor, X_test,
                             epsilon_g=EFFICIENCY_EPSILON) -> float:
    """Median box volume over the test points at one significance level."""
    X = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    if X.shape[0] < 1:
        raise EmptyTestSet("efficiency needs a non-empty test set")
    lower, upper = pred.predict_boxes(X, epsilon_g)
    return float(np.median(np.prod(upper - lower, axis=1)))


@dataclass(frozen=True)
class FoldResult:
    fold: int
    copula: str
    theta: float | None
    curve: ValidityCurve
    gap_percent: float
    median_volume: float
    seconds: float


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    grid: np.ndarray
    fold_count: int
    copulas: tuple[str, ...]
    folds: tuple[FoldResult, ...]
    aggregates: dict
    scalers: tuple[dict, ...]
    total_seconds: float


def _aggregate(folds, copulas):
    out = {}
    for name in copulas:
        gaps = np.array([f.gap_percent for f in folds if f.copula == name])
        vols = np.array([f.median_volume for f in folds if f.copula == name])
        ddof = 1 if gaps.size > 1 else 0
        out[name] = {
            "gap_mean": float(gaps.mean()),
            "gap_std": float(gaps.std(ddof=ddof)),
            "volume_mean": float(vols.mean()),
            "volume_std": float(vols.std(ddof=ddof)),
            "folds": int(gaps.size),
        }
    return out


def run_experiment(dataset: Dataset, config) -> ExperimentReport:
    """The full protocol: k folds, per fold fit once and calibrate per copula.

    Deterministic given config.seed; fold failures abort the run naming the
    fold. With config.jobs > 1 folds run in a thread pool.
    """
    copulas = tuple(config.copulas)
    if not copulas:
        raise ConfigError("config must name at least one copula")
    grid = np.asarray(config.grid, dtype=np.float64)
    started = time.perf_counter()
    plan = make_folds(dataset.n_examples, config.fold_count,
                      config.calibration_fraction, config.seed)
    min_calib = max(8, dataset.n_targets + 2)
    smallest = min(f.calib_idx.size for f in plan.folds)
    if smallest < min_calib:
        raise CalibTooSmall(
            f"smallest fold calibration set has {smallest} rows; need >= {min_calib} "
            f"(raise calibration_fraction or use more data)"
        )
    fold_seeds = np.random.SeedSequence(config.seed).spawn(config.fold_count)

    def run_fold(i):
        fold = plan.folds[i]
        scaled, params = standardize(dataset, fold.train_idx)
        train = scaled.subset(fold.train_idx)
        calib = scaled.subset(fold.calib_idx)
        test = scaled.subset(fold.test_idx)
        base = build(train, calib, config.regressor, config.error_model,
                     copula_choice=copulas[0], beta=config.beta, seed=fold_seeds[i],
                     gumbel_estimator=config.gumbel_estimator,
                     ecdf_divisor=config.ecdf_divisor)
        results = []
        for name in copulas:
            t0 = time.perf_counter()
            pred = base if name == copulas[0] else with_copula(base, name)
            curve = validity_curve(pred, test.features, test.targets, grid)
            results.append(FoldResult(
                fold=i,
                copula=name,
                theta=pred.copula.theta,
                curve=curve,
                gap_percent=validity_gap(curve),
                median_volume=efficiency_median_volume(pred, test.features),
                seconds=time.perf_counter() - t0,
            ))
        scaler = {
            "target_mean": [float(v) for v in params.target_mean],
            "target_std": [float(v) for v in params.target_std],
        }
        return results, scaler

    outputs = [None] * config.fold_count
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = {i: pool.submit(run_fold, i) for i in range(config.fold_count)}
            for i, fut in futures.items():
                try:
                    outputs[i] = fut.result()
                except Exception as exc:
                    raise RuntimeError(f"fold {i} failed: {exc}") from exc
    else:
        for i in range(config.fold_count):
            try:
                outputs[i] = run_fold(i)
            except Exception as exc:
                raise RuntimeError(f"fold {i} failed: {exc}") from exc
    folds = tuple(r for results, _ in outputs for r in results)
    scalers = tuple(scaler for _, scaler in outputs)
    return ExperimentReport(
        config=config.to_dict(),
        grid=grid,
        fold_count=config.fold_count,
        copulas=copulas,
        folds=folds,
        aggregates=_aggregate(folds, copulas),
        scalers=scalers,
        total_seconds=time.perf_counter() - started,
    )


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "config": report.config,
        "fold_count": report.fold_count,
        "grid": [float(g) for g in report.grid],
        "copulas": list(report.copulas),
        "folds": [
            {
                "fold": f.fold,
                "copula": f.copula,
                "theta": f.theta,
                "coverage": [float(c) for c in f.curve.coverage],
                "gap_percent": f.gap_percent,
                "median_volume": f.median_volume,
                "seconds": f.seconds,
            }
            for f in report.folds
        ],
        "aggregates": report.aggregates,
        "scalers": list(report.scalers),
        "total_seconds": report.total_seconds,
    }


def write_report_json(report: ExperimentReport, path):
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def write_curves_csv(report: ExperimentReport, path):
    """One row per (fold, copula, epsilon_g); the fold's median volume at
    epsilon_g=0.1 is repeated on each of its rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "copula", "epsilon_g", "coverage", "median_volume_at_0.1"])
        for f in report.folds:
            for eps, cov in zip(f.curve.grid, f.curve.coverage):
                writer.writerow([f.fold, f.copula, repr(float(eps)),
                                 repr(float(cov)), repr(f.median_volume)])


def _mean_curves(report):
    out = {}
    for name in report.copulas:
        curves = np.array([f.curve.coverage for f in report.folds if f.copula == name])
        out[name] = curves.mean(axis=0)
    return out


def plot_validity(report: ExperimentReport, path):
    """Mean validity curve per copula with the nominal line overlaid (SVG)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    grid = report.grid
    ax.plot(grid, 1.0 - grid, "k--", linewidth=1, label="calibration line")
    for name, cov in _mean_curves(report).items():
        ax.plot(grid, cov, marker="o", markersize=3, label=name)
    ax.set_xlabel("significance level $\\epsilon_g$")
    ax.set_ylabel("empirical coverage")
    ax.set_title("Validity (mean over folds)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_volumes(report: ExperimentReport, path):
    """Box plot of per-fold median volumes per copula (SVG)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    data = [
        [f.median_volume for f in report.folds if f.copula == name]
        for name in report.copulas
    ]
    ax.boxplot(data, tick_labels=list(report.copulas))
    ax.set_ylabel(f"median box volume at $\\epsilon_g={EFFICIENCY_EPSILON}$")
    ax.set_title("Efficiency (per-fold medians)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def summarize(aggregates, copulas) -> str:
    """Fixed-width text table: gap and median volume per copula."""
    lines = [f"{'copula':<14}{'gap % (mean ± std)':<26}{'median volume (mean ± std)':<30}"]
    for name in copulas:
        agg = aggregates[name]
        gap = f"{agg['gap_mean']:+.3f} ± {agg['gap_std']:.3f}"
        vol = f"{agg['volume_mean']:.4f} ± {agg['volume_std']:.4f}"
        lines.append(f"{name:<14}{gap:<26}{vol:<30}")
    return "\n".join(lines)
