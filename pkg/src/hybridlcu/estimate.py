"""Sample-count planning and confidence intervals for the shot estimators.

Two regimes: finite-sample Bernstein bounds for the unnormalized
expectation (numerator) estimator, and the asymptotic delta-method
interval for the ratio estimator ``mean(g_O)/mean(g_1)``. Variances use
the population convention (divide by N) to match the planner formulas;
the small-N bias is documented, not corrected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EstimationConfig",
    "SampleBatch",
    "EstimationReport",
    "UndefinedRatioError",
    "z_quantile",
    "bernstein_n",
    "bernstein_half_width",
    "ratio_n",
    "sample_variance",
    "estimate_numerator",
    "estimate_ratio",
    "estimate_R_obs",
    "write_report_csv",
]


class UndefinedRatioError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class EstimationConfig:
    """Targets and a.s. bounds driving both planners.

    ``bound_c`` bounds |g| (the observable norm scale). ``ratio_bound_cprime``
    bounds the ratio of means; when left None it defaults to ``bound_c``
    and the default is flagged in reports, since the theory needs the
    bound as an input but gives no recipe for it.
    """

    epsilon: float
    delta: float
    bound_c: float
    ratio_bound_cprime: float | None = None
    sigma2_obs_bound: float | None = None
    sigma2_one_bound: float | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.bound_c > 0:
            raise ValueError("bound_c must be positive")

    @property
    def cprime(self) -> float:
        return self.bound_c if self.ratio_bound_cprime is None else self.ratio_bound_cprime

    @property
    def cprime_defaulted(self) -> bool:
        return self.ratio_bound_cprime is None


class SampleBatch:
    """Paired g-samples for the observable and for the identity."""

    def __init__(self, g_obs, g_one=None, seed: int = 0):
        self.g_obs = np.asarray(g_obs, dtype=float)
        self.g_one = None if g_one is None else np.asarray(g_one, dtype=float)
        if self.g_one is not None and len(self.g_one) != len(self.g_obs):
            raise ValueError("paired batches must have equal length")
        self.seed = seed
        self.n = len(self.g_obs)


@dataclass
class EstimationReport:
    method: str
    target: str
    estimate: float
    half_width: float
    delta: float
    epsilon: float
    n: int
    sigma2_obs: float
    sigma2_one: float
    r_hat: float
    seed: int
    notes: tuple[str, ...] = field(default_factory=tuple)


def z_quantile(delta: float) -> float:
    """z with Gaussian upper-tail mass delta/2, by bisection to 1e-10.

    Satisfies ``z <= sqrt(2 ln(1/delta))`` (the bound the planner formulas
    quote); the inverse itself is computed numerically.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    target = delta / 2.0
    lo, hi = 0.0, 50.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(mid / math.sqrt(2.0)) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bernstein_n(sigma2_bound: float, c: float, epsilon: float, delta: float) -> int:
    """Samples guaranteeing the Bernstein tail at most delta.

    N = ceil(2 ln(2/delta) (sigma2/eps^2 + 2c/(3 eps))).
    """
    if sigma2_bound < 0 or c <= 0 or epsilon <= 0:
        raise ValueError("arguments must be positive (sigma2 nonnegative)")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    val = 2.0 * math.log(2.0 / delta) * (sigma2_bound / epsilon**2 + 2.0 * c / (3.0 * epsilon))
    return max(1, math.ceil(val))


def bernstein_half_width(sigma2_bound: float, c: float, n: int, delta: float) -> float:
    """Invert the Bernstein tail: epsilon with 2 exp(-N eps^2/(2 sigma2 + 4 c eps/3)) = delta."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ell = math.log(2.0 / delta)
    b = (4.0 * c / 3.0) * ell
    return (b + math.sqrt(b * b + 8.0 * sigma2_bound * n * ell)) / (2.0 * n)


def ratio_n(config: EstimationConfig, sigma2_x: float, sigma2_y: float, mu_y_abs: float) -> int:
    """Sample count for the ratio estimator at (epsilon, delta).

    N = ceil(32 ln(4/delta) max{sx^2/(muY^2 eps^2) + c/(6|muY| eps),
                                 (sy^2/(muY^2 eps^2)) c'^2 + (c/(6|muY| eps)) c'}).
    Valid only for eps <= 2 c'.
    """
    if mu_y_abs <= 0:
        raise ValueError("mu_y_abs must be positive")
    eps, delta = config.epsilon, config.delta
    c, cprime = config.bound_c, config.cprime
    if eps > 2.0 * cprime:
        raise ValueError(f"epsilon {eps} outside ratio-planner range (must be <= 2 c' = {2 * cprime})")
    var_term = sigma2_x / (mu_y_abs**2 * eps**2) + c / (6.0 * mu_y_abs * eps)
    den_term = (sigma2_y / (mu_y_abs**2 * eps**2)) * cprime**2 + (c / (6.0 * mu_y_abs * eps)) * cprime
    val = 32.0 * math.log(4.0 / delta) * max(var_term, den_term)
    return max(1, math.ceil(val))


def sample_variance(values) -> float:
    """Population-style variance (1/N) Σ (g_i - mean)^2; biased at small N."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("variance of an empty batch")
    return float(np.mean((arr - arr.mean()) ** 2))


def estimate_R_obs(batch: SampleBatch) -> float:
    """``sigma_hat^2 + mean^2``, the empirical second moment (converges to R^O)."""
    return sample_variance(batch.g_obs) + float(batch.g_obs.mean()) ** 2


def estimate_numerator(batch: SampleBatch, one_norm: float, config: EstimationConfig) -> EstimationReport:
    """Bernstein report for ``|c|_1^2 mean(g_O)`` estimating tr[O K rho K^dag].

    The variance bound is the supplied ``sigma2_obs_bound`` when present,
    otherwise the empirical second moment (the R^O estimate); the path
    taken is recorded in the notes. Widths are computed on the g scale and
    rescaled by |c|_1^2 (variance by |c|_1^4).
    """
    if batch.n == 0:
        raise ValueError("empty batch")
    notes = []
    if config.sigma2_obs_bound is not None:
        sigma2 = config.sigma2_obs_bound
        notes.append("sigma2 path: supplied bound")
    else:
        sigma2 = estimate_R_obs(batch)
        notes.append("sigma2 path: empirical R^O estimate")
    width_g = bernstein_half_width(sigma2, config.bound_c, batch.n, config.delta)
    mean_g = float(batch.g_obs.mean())
    return EstimationReport(
        method="bernstein",
        target="numerator",
        estimate=one_norm**2 * mean_g,
        half_width=one_norm**2 * width_g,
        delta=config.delta,
        epsilon=config.epsilon,
        n=batch.n,
        sigma2_obs=sample_variance(batch.g_obs),
        sigma2_one=sample_variance(batch.g_one) if batch.g_one is not None else float("nan"),
        r_hat=estimate_R_obs(batch),
        seed=batch.seed,
        notes=tuple(notes),
    )


def estimate_ratio(batch: SampleBatch, config: EstimationConfig) -> EstimationReport:
    """Delta-method report for mean(g_O)/mean(g_1) estimating the normalized expectation."""
    if batch.g_one is None:
        raise ValueError("ratio estimation needs the identity batch")
    if batch.n == 0:
        raise ValueError("empty batch")
    mean_x = float(batch.g_obs.mean())
    mean_y = float(batch.g_one.mean())
    if mean_y == 0.0:
        raise UndefinedRatioError("identity batch mean is zero; ratio undefined")
    var_x = sample_variance(batch.g_obs)
    var_y = sample_variance(batch.g_one)
    sigma_ratio2 = var_x / mean_y**2 + mean_x**2 * var_y / mean_y**4
    z = z_quantile(config.delta)
    notes = []
    if config.cprime_defaulted:
        notes.append("cprime defaulted to bound_c (= |O| scale)")
    return EstimationReport(
        method="asymptotic",
        target="ratio",
        estimate=mean_x / mean_y,
        half_width=z * math.sqrt(sigma_ratio2 / batch.n),
        delta=config.delta,
        epsilon=config.epsilon,
        n=batch.n,
        sigma2_obs=var_x,
        sigma2_one=var_y,
        r_hat=estimate_R_obs(batch),
        seed=batch.seed,
        notes=tuple(notes),
    )


def write_report_csv(path, reports: list[EstimationReport], seed: int, version: str) -> None:
    with open(path, "w") as fh:
        fh.write("method,target,estimate,half_width,delta,epsilon,N,sigma2_O,sigma2_one,R_hat,seed\n")
        for r in reports:
            fh.write(
                f"{r.method},{r.target},{r.estimate:.17g},{r.half_width:.17g},{r.delta:.17g},"
                f"{r.epsilon:.17g},{r.n},{r.sigma2_obs:.17g},{r.sigma2_one:.17g},{r.r_hat:.17g},{r.seed}\n"
            )
        fh.write(f"# seed={seed} version={version}\n")
