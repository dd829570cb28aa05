"""
Decay fits, phase-point scans and Monte Carlo domination probes
"""
import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, field_validator, model_validator
from scipy.stats import norm

from config.config import config
from hexloop.configurations import EdgeConfig, components, is_loop_config, max_surrounding_loop
from hexloop.couplings import INV_SQRT3, critical_x_conjectured, epsilon_of
from hexloop.errors import DomainMismatch, InsufficientData, OutOfRange
from hexloop.hexlattice import preset_domain
from hexloop.mcmc import SamplerConfig, StatisticKind, TailEstimate, estimate_tail

logger = logging.getLogger(__name__)

MIN_SURVIVORS = 50
MIN_POINTS = 4
PERIMETER_MARGIN = 6


class DecayFit(BaseModel):
    """log P(stat >= k) ~ log C - c k over the usable k range"""
    c: float
    C: float
    ci_low: float
    ci_high: float
    k_min: int
    k_max: int
    n_points: int
    residual: float
    statistic: Optional[StatisticKind] = None

    @model_validator(mode="after")
    def validate_interval(self) -> "DecayFit":
        if not (math.isfinite(self.ci_low) and math.isfinite(self.ci_high)):
            raise ValueError("Confidence interval must be finite")
        if self.ci_low > self.ci_high:
            raise ValueError("Confidence interval is reversed")
        return self

    @property
    def decays(self) -> bool:
        """Positive rate with the 95% interval excluding 0"""
        return self.ci_low > 0.0

    @property
    def no_decay(self) -> bool:
        return not self.decays


def fit_decay(tail: TailEstimate, min_survivors: int = MIN_SURVIVORS) -> DecayFit:
    """
    Weighted least squares of log P(stat >= k) against k

    Usable points have at least min_survivors surviving samples and lie more
    than one hexagon perimeter below the largest k of the table. Weights are
    the inverse delta-method errors of log P, floored at the Poisson error of
    the survivor count.

    Raises:
        InsufficientData: fewer than 4 usable k values
    """
    k = np.asarray(tail.k, dtype=float)
    p = np.asarray(tail.estimate, dtype=float)
    se = np.asarray(tail.stderr, dtype=float)
    survivors = np.asarray(tail.survivors())
    cutoff = k.max() - PERIMETER_MARGIN if len(k) else -1
    usable = (survivors >= min_survivors) & (k <= cutoff) & (p > 0.0)
    if usable.sum() < MIN_POINTS:
        raise InsufficientData(
            f"Only {int(usable.sum())} usable k values (need {MIN_POINTS}); "
            f"k must have >= {min_survivors} survivors and lie at or below {cutoff:g}"
        )
    k, p, se = k[usable], p[usable], se[usable]
    sigma = np.maximum(se / p, 1.0 / np.sqrt(tail.n_samples * p))
    weights = 1.0 / sigma

    coeffs, cov = np.polyfit(k, np.log(p), 1, w=weights, cov="unscaled")
    slope, intercept = coeffs
    residuals = (np.log(p) - np.polyval(coeffs, k)) * weights
    dof = len(k) - 2
    reduced = float(residuals @ residuals) / dof
    slope_se = math.sqrt(cov[0, 0] * max(reduced, 1.0))
    z = norm.ppf(0.975)

    c = -float(slope)
    if len(k) < 8:
        logger.warning(f"Decay fit uses only {len(k)} points")
    fit = DecayFit(
        c=c,
        C=math.exp(float(intercept)),
        ci_low=c - z * slope_se,
        ci_high=c + z * slope_se,
        k_min=int(k.min()),
        k_max=int(k.max()),
        n_points=int(len(k)),
        residual=reduced,
        statistic=tail.statistic,
    )
    logger.info(f"Fitted c = {fit.c:.4g} [{fit.ci_low:.4g}, {fit.ci_high:.4g}] over k in [{fit.k_min}, {fit.k_max}]")
    return fit


# ==================== Scans ====================

class ScanPoint(BaseModel):
    n: float
    x: float
    num_vertices: int
    num_edges: int
    fit: DecayFit
    xc: Optional[float]
    inv_sqrt3: float = INV_SQRT3
    eps_line: float

    @field_validator("n")
    @classmethod
    def validate_n(cls, v: float) -> float:
        if not v > 1.0:
            raise ValueError("Scan points need n > 1")
        return v

    @field_validator("x")
    @classmethod
    def validate_x(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("Scan points need x in (0, 1)")
        return v


class ScanResult(BaseModel):
    radius: int
    statistic: StatisticKind
    points: list[ScanPoint] = []


def point_seed(seed: Optional[int], index: int) -> Optional[int]:
    """Deterministic per-point master seed"""
    if seed is None:
        return None
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def scan(grid: Sequence[tuple[float, float]], radius: int, cfg: SamplerConfig,
         statistic=StatisticKind.R, k_max: Optional[int] = None,
         workers: Optional[int] = None) -> ScanResult:
    """Tail estimate and decay fit at every (n, x) of the grid on hex_ball(radius)"""
    statistic = StatisticKind(statistic)
    for n, x in grid:
        if not (n > 1.0 and 0.0 < x < 1.0):
            raise OutOfRange(f"Grid point ({n}, {x}) is outside (1, inf) x (0, 1)")
    result = ScanResult(radius=radius, statistic=statistic)
    if not grid:
        return result

    domain = preset_domain("hex_ball", radius)
    top = domain.num_edges if k_max is None else k_max
    for i, (n, x) in enumerate(grid):
        point_cfg = cfg.model_copy(update={"seed": point_seed(cfg.seed, i)})
        tail = estimate_tail(domain, n, x, statistic, top, point_cfg, workers=workers)
        fit = fit_decay(tail)
        result.points.append(ScanPoint(
            n=n,
            x=x,
            num_vertices=domain.num_vertices,
            num_edges=domain.num_edges,
            fit=fit,
            xc=critical_x_conjectured(n) if n <= 2.0 else None,
            eps_line=INV_SQRT3 + epsilon_of(n),
        ))
        logger.info(f"Scan point {i + 1}/{len(grid)} (n={n}, x={x}) done")
    return result


# ==================== Domination probes ====================

class ProbeStatistic(BaseModel):
    name: str
    mean_a: float = 0.0
    mean_b: float = 0.0
    stderr_a: float = 0.0
    stderr_b: float = 0.0
    z: float = 0.0
    p_value: float = 1.0
    violation: bool = False
    significant_difference: bool = False
    skipped: Optional[str] = None


class ProbeReport(BaseModel):
    """a <=_st b is expected; a violation is a mean of a significantly above b"""
    significance: float
    n_a: int
    n_b: int
    statistics: list[ProbeStatistic]

    @property
    def violations(self) -> list[str]:
        return [s.name for s in self.statistics if s.violation]

    @property
    def ordered(self) -> bool:
        return not self.violations


def _batch_stderr(values: np.ndarray, batches: int) -> float:
    """Batch-means standard error; plain i.i.d. error for short series"""
    if len(values) < 2:
        return 0.0
    if len(values) < 2 * batches:
        return float(values.std(ddof=1) / math.sqrt(len(values)))
    means = np.array([b.mean() for b in np.array_split(values, batches)])
    return float(means.std(ddof=1) / math.sqrt(batches))


def _statistic_values(samples: list[EdgeConfig], name: str) -> Optional[np.ndarray]:
    if name == "size":
        return np.array([s.size for s in samples], dtype=float)
    if name == "cluster":
        return np.array([components(s).origin_size for s in samples], dtype=float)
    if name == "R":
        if not all(is_loop_config(s) for s in samples):
            return None
        return np.array([max_surrounding_loop(s) for s in samples], dtype=float)
    if name.startswith("edge:"):
        edge = int(name.split(":", 1)[1])
        return np.array([edge in s for s in samples], dtype=float)
    raise ValueError(f"Unknown statistic: {name}")


def domination_probe(law_a: Iterable[EdgeConfig], law_b: Iterable[EdgeConfig],
                     statistics: Sequence[str] = ("size", "cluster", "R"),
                     significance: Optional[float] = None,
                     batches: Optional[int] = None) -> ProbeReport:
    """
    Two-sample z-tests of monotone statistics for an expected ordering a <= b

    Statistics are "size" (|omega|), "cluster" (|C_0|), "R" (loop samples
    only) and "edge:<i>" (single-edge marginals).

    Raises:
        DomainMismatch: the two streams live on different domains
    """
    significance = config.significance if significance is None else significance
    batches = config.batches if batches is None else batches
    a, b = list(law_a), list(law_b)
    domains = {s.domain for s in a} | {s.domain for s in b}
    if len(domains) > 1:
        raise DomainMismatch("Sample streams live on different domains")

    rows = []
    for name in statistics:
        va, vb = _statistic_values(a, name), _statistic_values(b, name)
        if va is None or vb is None:
            rows.append(ProbeStatistic(name=name, skipped="not a loop configuration"))
            continue
        mean_a = float(va.mean()) if len(va) else 0.0
        mean_b = float(vb.mean()) if len(vb) else 0.0
        se_a, se_b = _batch_stderr(va, batches), _batch_stderr(vb, batches)
        spread = math.hypot(se_a, se_b)
        diff = mean_a - mean_b
        if spread > 0.0:
            z = diff / spread
        else:
            z = 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        rows.append(ProbeStatistic(
            name=name,
            mean_a=mean_a,
            mean_b=mean_b,
            stderr_a=se_a,
            stderr_b=se_b,
            z=z,
            p_value=float(norm.sf(z)),
            violation=z > significance,
            significant_difference=abs(z) > significance,
        ))
        logger.debug(f"Probe {name}: {mean_a:.4g} vs {mean_b:.4g}, z = {z:.3g}")

    report = ProbeReport(significance=significance, n_a=len(a), n_b=len(b), statistics=rows)
    if report.violations:
        logger.warning(f"Ordering violated at {significance} sigma for: {', '.join(report.violations)}")
    return report
