"""Copula models over nonconformity scores and per-target significance calibration.

Three variants cover the dependence spectrum: the closed-form product copula
(no dependence), the one-parameter Gumbel family (symmetric positive
dependence, fitted from data), and the nonparametric empirical copula (any
dependence, at the cost of step granularity).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    DegenerateDependenceWarning,
    DimensionMismatch,
    DomainError,
    EmptySample,
    LengthMismatch,
    TooFewRows,
)
from .scores import EmpiricalCdf
from .search import bisect_smallest, golden_section_minimize, grid_bracket

THETA_MAX = 50.0
VARIANTS = ("independent", "gumbel", "empirical")
GUMBEL_METHODS = ("tau_inversion", "pairwise_mple")


@dataclass(frozen=True)
class CopulaModel:
    """Immutable copula choice: variant plus its data (theta or pseudo-observations)."""

    variant: str
    theta: float | None = None
    pseudo_obs: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "gumbel":
            if self.theta is None or not math.isfinite(self.theta) or self.theta < 1.0:
                raise DomainError(f"Gumbel theta must be finite and >= 1, got {self.theta}")
        if self.variant == "empirical":
            U = np.asarray(self.pseudo_obs, dtype=np.float64)
            if U.ndim != 2 or U.shape[0] < 1:
                raise EmptySample("empirical copula needs a non-empty pseudo-observation matrix")
            if not np.all((U > 0.0) & (U <= 1.0)):
                raise DomainError("pseudo-observations must lie in (0, 1]")
            U = U.copy()
            U.flags.writeable = False
            object.__setattr__(self, "pseudo_obs", U)

    @classmethod
    def independent(cls):
        return cls(variant="independent")

    @classmethod
    def gumbel(cls, theta):
        return cls(variant="gumbel", theta=float(theta))

    @classmethod
    def empirical(cls, pseudo_obs):
        return cls(variant="empirical", pseudo_obs=pseudo_obs)

    @property
    def n_targets(self):
        return None if self.pseudo_obs is None else self.pseudo_obs.shape[1]


@dataclass(frozen=True)
class ConfidenceSpec:
    """Global significance level and the shared per-target level derived from it.

    The closed-form variants always give epsilon_t <= epsilon_g. The empirical
    copula instead reads epsilon_t off a step function of row maxima, which
    can land on either side of epsilon_g: at 0 (threshold = the largest
    calibration score) when epsilon_g is below the step resolution, or above
    epsilon_g when ties make the diagonal jump past 1 - epsilon_g at a low
    step. Both are sound — the joint calibration count, not epsilon_t itself,
    carries the coverage guarantee — so only [0, 1) is enforced here.
    """

    epsilon_g: float
    epsilon_t: float

    def __post_init__(self):
        if not 0.0 < self.epsilon_g < 1.0:
            raise DomainError(f"epsilon_g must be in (0, 1), got {self.epsilon_g}")
        if not 0.0 <= self.epsilon_t < 1.0:
            raise DomainError(f"epsilon_t must be in [0, 1), got {self.epsilon_t}")


def _check_unit_vector(u):
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size < 1:
        raise DimensionMismatch("u must have at least one coordinate")
    if np.any(u < 0.0) or np.any(u > 1.0) or not np.all(np.isfinite(u)):
        raise DomainError("every coordinate of u must lie in [0, 1]")
    return u


def copula_cdf(model: CopulaModel, u) -> float:
    """Evaluate the model's copula at a point of the unit hypercube."""
    u = _check_unit_vector(u)
    if model.variant == "independent":
        return float(np.prod(u))
    if model.variant == "gumbel":
        if np.any(u == 0.0):
            return 0.0
        t = (-np.log(u)) ** model.theta
        return float(np.exp(-(t.sum() ** (1.0 / model.theta))))
    if model.n_targets != u.size:
        raise DimensionMismatch(
            f"empirical copula stores {model.n_targets} targets, point has {u.size}"
        )
    return float(np.mean(np.all(model.pseudo_obs <= u, axis=1)))


def frechet_bounds(u):
    """Lower and upper copula bounds W and M at a point u."""
    u = _check_unit_vector(u)
    W = max(float(u.sum()) - u.size + 1.0, 0.0)
    M = float(u.min())
    return W, M


def kendall_tau(x, y):
    """Kendall's tau-a: (concordant - discordant) / all pairs, ties count as neither."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"x has {x.size} entries, y has {y.size}")
    n = x.size
    if n < 2:
        raise LengthMismatch("kendall_tau needs at least 2 observations")
    total = 0.0
    block = 256  # row blocks keep the O(n^2) sign matrices small
    for start in range(0, n, block):
        dx = np.sign(x[start:start + block, None] - x[None, :])
        dy = np.sign(y[start:start + block, None] - y[None, :])
        total += float((dx * dy).sum())
    # every unordered pair was counted twice (and i=j pairs contribute 0)
    return total / (n * (n - 1))


def mean_pairwise_tau(U):
    """Average Kendall tau over all column pairs of a pseudo-observation matrix."""
    U = np.asarray(U, dtype=np.float64)
    m = U.shape[1]
    if m < 2:
        raise DimensionMismatch("need at least 2 columns for pairwise tau")
    taus = [kendall_tau(U[:, a], U[:, b]) for a, b in combinations(range(m), 2)]
    return float(np.mean(taus))


def gumbel_pair_log_density(u, v, theta):
    """Log density of the bivariate Gumbel copula, elementwise over u, v.

    With x = -ln u, y = -ln v and A = x^theta + y^theta the density is
    C(u,v) * (xy)^(theta-1) / (uv) * A^(2/theta - 2) * (1 + (theta-1) * A^(-1/theta));
    everything is evaluated in log space to stay stable near the corners.
    """
    if theta < 1.0 or not math.isfinite(theta):
        raise DomainError(f"theta must be finite and >= 1, got {theta}")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u <= 0.0) or np.any(u >= 1.0) or np.any(v <= 0.0) or np.any(v >= 1.0):
        raise DomainError("density is evaluated on the open square (0,1)^2")
    x = -np.log(u)
    y = -np.log(v)
    lx = np.log(x)
    ly = np.log(y)
    lnA = np.logaddexp(theta * lx, theta * ly)
    S = np.exp(lnA / theta)
    return (
        -S
        + (theta - 1.0) * (lx + ly)
        + (x + y)
        + (2.0 / theta - 2.0) * lnA
        + np.log1p((theta - 1.0) / S)
    )


def _check_pseudo_obs(U):
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] < 1:
        raise EmptySample("pseudo-observation matrix must be 2-d and non-empty")
    if not np.all((U > 0.0) & (U <= 1.0)):
        raise DomainError("pseudo-observations must lie in (0, 1]")
    return U


def fit_gumbel(U, method="tau_inversion"):
    """Estimate the Gumbel dependence parameter from pseudo-observations.

    tau_inversion maps the mean pairwise Kendall tau through theta = 1/(1-tau);
    pairwise_mple maximizes the summed bivariate log-density over all column
    pairs with a grid pre-scan plus golden-section refinement. Both clamp to
    [1, THETA_MAX] and warn when the estimate saturates the upper bound.
    """
    U = _check_pseudo_obs(U)
    if U.shape[0] < 8:
        raise TooFewRows(f"fit_gumbel needs at least 8 rows, got {U.shape[0]}")
    if U.shape[1] < 2:
        raise DimensionMismatch("fit_gumbel needs at least 2 targets")
    if method not in GUMBEL_METHODS:
        raise DomainError(f"method must be one of {GUMBEL_METHODS}, got {method!r}")
    if method == "tau_inversion":
        tau_bar = mean_pairwise_tau(U)
        if tau_bar >= 1.0 - 1.0 / THETA_MAX:
            warnings.warn(
                f"mean pairwise tau {tau_bar:.4f} is at the comonotone boundary; "
                f"clamping theta to {THETA_MAX}",
                DegenerateDependenceWarning,
                stacklevel=2,
            )
            theta = THETA_MAX
        elif tau_bar <= 0.0:
            theta = 1.0
        else:
            theta = min(1.0 / (1.0 - tau_bar), THETA_MAX)
        return CopulaModel.gumbel(theta)
    # rescale away from the u=1 boundary, where the log-density diverges
    V = U * (U.shape[0] / (U.shape[0] + 1.0))
    pairs = list(combinations(range(U.shape[1]), 2))

    def negloglik(theta):
        return -sum(
            float(gumbel_pair_log_density(V[:, a], V[:, b], theta).sum()) for a, b in pairs
        )

    lo, hi = grid_bracket(negloglik, 1.0, THETA_MAX, num=60)
    theta = golden_section_minimize(negloglik, lo, hi, tol=1e-6)
    theta = min(max(theta, 1.0), THETA_MAX)
    if theta >= THETA_MAX - 1e-2:
        warnings.warn(
            f"pairwise MPLE hit the upper bound; clamping theta to {THETA_MAX}",
            DegenerateDependenceWarning,
            stacklevel=2,
        )
        theta = THETA_MAX
    return CopulaModel.gumbel(theta)


def sample_gumbel(theta, n, m, seed=None):
    """Draw n rows from the m-variate Gumbel copula (test scaffolding).

    Uses the Marshall-Olkin mixture construction: a positive stable variate V
    with Laplace transform exp(-s^(1/theta)) scales independent exponentials,
    and the generator inverse maps them to uniform marginals.
    """
    if theta < 1.0 or not math.isfinite(theta):
        raise DomainError(f"theta must be finite and >= 1, got {theta}")
    if n < 1 or m < 1:
        raise DomainError("n and m must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if theta == 1.0:
        return rng.random((n, m))
    alpha = 1.0 / theta
    t = rng.uniform(0.0, math.pi, size=n)
    w = rng.standard_exponential(n)
    # Chambers-Mallows-Stuck positive stable variate
    V = (np.sin(alpha * t) / np.sin(t) ** (1.0 / alpha)) * (
        np.sin((1.0 - alpha) * t) / w
    ) ** ((1.0 - alpha) / alpha)
    E = rng.standard_exponential((n, m))
    return np.exp(-((E / V[:, None]) ** alpha))


def independent_epsilon_t(epsilon_g, m):
    """Per-target significance under independence: 1 - (1-eps_g)^(1/m).

    Computed through expm1/log1p so the round trip stays exact where the
    real-number result is representable (e.g. eps_g=0.19, m=2 gives 0.1).
    """
    _check_epsilon_g(epsilon_g)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if m == 1:
        return float(epsilon_g)
    return min(-math.expm1(math.log1p(-epsilon_g) / m), float(epsilon_g))


def gumbel_epsilon_t(epsilon_g, m, theta):
    """Per-target significance under a Gumbel copula: 1 - (1-eps_g)^(m^(-1/theta))."""
    _check_epsilon_g(epsilon_g)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if theta < 1.0 or not math.isfinite(theta):
        raise DomainError(f"theta must be finite and >= 1, got {theta}")
    if theta == 1.0 or m == 1:
        # theta=1 is the product copula; reuse the independent formula so the
        # reduction is bit-exact and reports coincide
        return independent_epsilon_t(epsilon_g, m)
    return min(-math.expm1(math.log1p(-epsilon_g) * m ** (-1.0 / theta)), float(epsilon_g))


def empirical_epsilon_t(U, epsilon_g):
    """Largest epsilon_t whose diagonal empirical-copula value reaches 1 - epsilon_g.

    The diagonal of the empirical copula is the ECDF of the row maxima of U,
    a step function, so a dichotomic search brackets the jump and the result
    snaps to the exact step value: 1 - epsilon_t is the smallest stored row
    maximum t with #({row maxima <= t}) / N >= 1 - epsilon_g.
    """
    _check_epsilon_g(epsilon_g)
    U = _check_pseudo_obs(U)
    sorted_max = np.sort(U.max(axis=1))
    N = sorted_max.size
    target = 1.0 - epsilon_g

    def reaches(t):
        return np.searchsorted(sorted_max, t, side="right") / N >= target

    # bracket narrower than any step gap so exactly one stored value is inside
    lo, hi = bisect_smallest(reaches, 0.0, 1.0, tol=min(1e-9, 0.25 / N))
    pos = min(int(np.searchsorted(sorted_max, lo, side="right")), N - 1)
    t_star = float(sorted_max[pos])
    eps_t = 1.0 - t_star
    # threshold queries flip this back to 1 - eps_t, and the subtraction can
    # round one ulp past t_star, which would skip to the next order statistic;
    # pick the neighbouring float whose flip lands back on the step
    while 1.0 - eps_t > t_star:
        eps_t = np.nextafter(eps_t, 1.0)
    return float(eps_t)


def _check_epsilon_g(epsilon_g):
    if not 0.0 < epsilon_g < 1.0:
        raise DomainError(f"epsilon_g must be in (0, 1), got {epsilon_g}")


def per_target_significance(model: CopulaModel, epsilon_g, m) -> ConfidenceSpec:
    """Split a global significance level into the shared per-target level."""
    if model.variant == "independent":
        eps_t = independent_epsilon_t(epsilon_g, m)
    elif model.variant == "gumbel":
        eps_t = gumbel_epsilon_t(epsilon_g, m, model.theta)
    else:
        if model.n_targets != m:
            raise DimensionMismatch(
                f"empirical copula stores {model.n_targets} targets, expected {m}"
            )
        eps_t = empirical_epsilon_t(model.pseudo_obs, epsilon_g)
    return ConfidenceSpec(epsilon_g=float(epsilon_g), epsilon_t=eps_t)


def calibrate_thresholds(A, model: CopulaModel, epsilon_g, target_weights=None, ecdf_divisor="n"):
    """Per-target score thresholds alpha_s meeting a global significance level.

    The copula turns epsilon_g into a shared per-target level epsilon_t, and
    each threshold is the (1 - epsilon_t) empirical quantile of that target's
    calibration scores. ``target_weights`` tilts the per-target levels
    proportionally (closed-form copulas only); the equal-weights path is the
    validated one.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1:
        raise EmptySample("score matrix must be 2-d and non-empty")
    m = A.shape[1]
    if model.variant == "empirical" and model.n_targets != m:
        raise DimensionMismatch(
            f"empirical copula stores {model.n_targets} targets, score matrix has {m}"
        )
    cdfs = [EmpiricalCdf(A[:, j], divisor=ecdf_divisor) for j in range(m)]
    return _thresholds_from_cdfs(cdfs, model, epsilon_g, target_weights)


def _thresholds_from_cdfs(cdfs, model, epsilon_g, target_weights=None):
    m = len(cdfs)
    if target_weights is not None:
        w = np.asarray(target_weights, dtype=np.float64).ravel()
        if w.size != m:
            raise DimensionMismatch(f"need {m} weights, got {w.size}")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("target weights must be positive and finite")
        if not np.all(w == w[0]):
            return _weighted_thresholds(cdfs, model, epsilon_g, w)
    spec = per_target_significance(model, epsilon_g, m)
    p = 1.0 - spec.epsilon_t
    return np.array([c.quantile(p) for c in cdfs])


def _weighted_thresholds(cdfs, model, epsilon_g, w):
    if model.variant == "empirical":
        raise DomainError("per-target weights are only supported for closed-form copulas")
    _check_epsilon_g(epsilon_g)
    target = 1.0 - epsilon_g
    c_max = float(1.0 / w.max())

    def too_small(c):
        u = np.clip(1.0 - c * w, 0.0, 1.0)
        return copula_cdf(model, u) < target

    # largest scale c keeping the joint level at or above 1 - epsilon_g
    c_star, _ = bisect_smallest(too_small, 0.0, c_max, tol=1e-12)
    eps = np.clip(c_star * w, 0.0, 1.0 - 1e-15)
    return np.array([cdf.quantile(1.0 - e) for cdf, e in zip(cdfs, eps)])
