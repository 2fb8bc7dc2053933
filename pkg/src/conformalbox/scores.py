"""Nonconformity scores, empirical CDFs, pseudo-observations, and conformal p-values."""

from __future__ import annotations

import csv

import numpy as np

from .errors import DimensionMismatch, DomainError, EmptySample

ECDF_DIVISORS = ("n", "n+1")


def standard_score(y, yhat):
    """Absolute residual |y - yhat|. Accepts scalars or arrays."""
    return np.abs(np.asarray(y, dtype=np.float64) - np.asarray(yhat, dtype=np.float64))


def normalized_score(y, yhat, mu, beta=0.1):
    """Residual scaled by a predicted error level: |y - yhat| / (exp(mu) + beta).

    ``mu`` is a log-scale error prediction; ``beta >= 0`` keeps the
    denominator away from zero when the predicted error vanishes.
    """
    if beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    return standard_score(y, yhat) / (np.exp(np.asarray(mu, dtype=np.float64)) + beta)


def score_matrix(Y, Yhat, Mu, beta=0.1):
    """Normalized scores for every (calibration example, target) pair.

    All three inputs must share the same (rows, targets) shape. Returns a
    non-negative float64 matrix with one column per target.
    """
    Y = np.asarray(Y, dtype=np.float64)
    Yhat = np.asarray(Yhat, dtype=np.float64)
    Mu = np.asarray(Mu, dtype=np.float64)
    if not (Y.shape == Yhat.shape == Mu.shape) or Y.ndim != 2:
        raise DimensionMismatch(
            f"expected matching 2-d shapes, got {Y.shape}, {Yhat.shape}, {Mu.shape}"
        )
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(Yhat)) and np.all(np.isfinite(Mu))):
        raise DomainError("score inputs must be finite")
    A = normalized_score(Y, Yhat, Mu, beta)
    if not np.all(np.isfinite(A)):
        raise DomainError("score matrix has non-finite entries")
    return A


class EmpiricalCdf:
    """Step CDF of a finite sample: eval(x) = #{values <= x} / divisor.

    The divisor is the sample size N by default, so the largest value maps
    to exactly 1.0; the more conservative N+1 variant is available with
    divisor="n+1". The function is non-decreasing and right-continuous,
    0 below the minimum and (with the default divisor) 1 at and above the
    maximum.
    """

    __slots__ = ("sorted_values", "count", "divisor", "_den", "_cum")

    def __init__(self, values, divisor="n"):
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size == 0:
            raise EmptySample("empirical CDF needs at least one value")
        if not np.all(np.isfinite(values)):
            raise DomainError("empirical CDF values must be finite")
        if divisor not in ECDF_DIVISORS:
            raise DomainError(f"divisor must be one of {ECDF_DIVISORS}, got {divisor!r}")
        self.sorted_values = np.sort(values)
        self.sorted_values.flags.writeable = False
        self.count = int(values.size)
        self.divisor = divisor
        self._den = self.count if divisor == "n" else self.count + 1
        # Same integer/int division used everywhere ranks become fractions,
        # so equality comparisons between pseudo-observations and these
        # cumulative levels are exact.
        self._cum = np.arange(1, self.count + 1) / self._den
        self._cum.flags.writeable = False

    def __call__(self, x):
        ranks = np.searchsorted(self.sorted_values, x, side="right")
        return ranks / self._den

    def quantile(self, p):
        """Smallest stored value v with eval(v) >= p; p=0 gives the minimum.

        With divisor="n+1" no stored value reaches levels above N/(N+1);
        those p clamp to the maximum.
        """
        p = np.asarray(p, dtype=np.float64)
        if np.any(p < 0) or np.any(p > 1):
            raise DomainError("quantile level must be in [0, 1]")
        idx = np.minimum(np.searchsorted(self._cum, p, side="left"), self.count - 1)
        out = self.sorted_values[idx]
        return float(out) if p.ndim == 0 else out


def ecdf_eval(cdf: EmpiricalCdf, x):
    return cdf(x)


def ecdf_quantile(cdf: EmpiricalCdf, p):
    return cdf.quantile(p)


def pseudo_observations(A, divisor="n"):
    """Map each score-matrix column through its own empirical CDF.

    Entry (i, j) becomes rank of A[i, j] within column j, divided by the
    divisor; tied values share the maximal rank. With the default divisor
    every column's values lie in {1/N, ..., 1}.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatch(f"score matrix must be 2-d, got shape {A.shape}")
    if A.shape[0] < 1:
        raise EmptySample("pseudo-observations need at least one row")
    U = np.empty_like(A)
    for j in range(A.shape[1]):
        U[:, j] = EmpiricalCdf(A[:, j], divisor=divisor)(A[:, j])
    return U


def p_value(calib_scores, candidate_score):
    """Conformal p-value of a candidate score against calibration scores.

    Counts how many calibration scores are >= the candidate, plus one for
    the candidate itself, out of N+1.
    """
    calib_scores = np.asarray(calib_scores, dtype=np.float64).ravel()
    if calib_scores.size == 0:
        raise EmptySample("p_value needs a non-empty calibration sample")
    n_ge = int(np.count_nonzero(calib_scores >= candidate_score))
    return (n_ge + 1) / (calib_scores.size + 1)


def write_score_matrix_csv(A, target_names, path):
    """Dump a score matrix with one header row of target names."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != len(target_names):
        raise DimensionMismatch("target_names must match the score matrix columns")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(target_names))
        for row in A:
            writer.writerow([repr(float(v)) for v in row])
