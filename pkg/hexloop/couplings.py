"""
Parameter maps, couplings and stochastic domination checks

Covers the loop/percolation/FK superposition, the blue/red colouring of
loops, the blue spin field and its spin domains, the two-sheet percolation
construction, Holley-type ratio checks and an exact max-flow certificate
of stochastic ordering.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import networkx as nx
import numpy as np
from pydantic import BaseModel, field_validator, model_validator
from scipy.optimize import bisect

from config.config import config
from hexloop.configurations import (
    EdgeConfig,
    SpinConfig,
    bits_matrix,
    component_counts,
    component_labels,
    decompose_loops,
    is_loop_config,
    matrix_indices,
    origin_loop_length,
    spin_edge_domains,
)
from hexloop.errors import DomainMismatch, NotEven, OutOfRange, TooLarge
from hexloop.hexlattice import Domain
from hexloop.measures import (
    ExactDistribution,
    IdentityReport,
    MeasureKind,
    SiteKind,
    WeightVector,
    cluster_size_tail,
    conditional_loop_measure,
    even_subgraph_matrix,
    exact_distribution,
    product_distribution,
    tv_distance,
    z_loop,
)

logger = logging.getLogger(__name__)

INV_SQRT3 = 1.0 / math.sqrt(3.0)

# leading-order constant of epsilon(n) / (n - 1)^2 as n -> 1
EPSILON_CONSTANT = (1.0 + math.sqrt(3.0)) / (3.0 * 12 ** 4)

# flow values are compared in units of 2^-52
_FLOW_SCALE = 1 << 52


# ==================== Parameters ====================

class Params(BaseModel):
    """(n, x) with every derived quantity"""
    n: float
    x: float
    p: float
    M: float
    holley_bound: float
    beta: float
    alpha: float
    one_minus_alpha: float
    xtilde: float
    xc: Optional[float] = None
    eps: Optional[float] = None

    @field_validator("p")
    @classmethod
    def validate_p(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("p must lie in (0, 1)")
        return v

    # alpha and beta round to 1.0 once the bound passes 2^53; one_minus_alpha stays exact
    @field_validator("alpha", "beta")
    @classmethod
    def validate_unit(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("alpha and beta must lie in (0, 1]")
        return v

    @field_validator("one_minus_alpha")
    @classmethod
    def validate_gap(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("one_minus_alpha must lie in (0, 1)")
        return v

    def summary(self) -> dict:
        return {
            "p": self.p,
            "alpha": self.alpha,
            "beta": self.beta,
            "xtilde": self.xtilde,
            "eps": self.eps,
            "xc": self.xc,
        }


def _check_n(n: float) -> None:
    if not n > 1.0:
        raise OutOfRange(f"n must be greater than 1, got {n}")


def _check_x(x: float) -> None:
    if not 0.0 < x < 1.0:
        raise OutOfRange(f"x must lie in (0, 1), got {x}")


def max_factor(n: float) -> float:
    """max{(n-1)^2, (n-1)^-2}"""
    return max((n - 1.0) ** 2, (n - 1.0) ** -2)


def holley_bound(n, x):
    """(2/x)^6 * max{(n-1)^2, (n-1)^-2}"""
    return (2.0 / x) ** 6 * max_factor(n)


def one_minus_alpha_of(n, x):
    k = holley_bound(n, x)
    return -np.expm1(np.log1p(-1.0 / (1.0 + k)) / 6.0)


def xtilde_of(x, alpha, one_minus_alpha=None):
    """x~ solving x~/(1-x~) = x/(1-x) / (1 + (1+x)/(2(1-x)) (1-alpha)/alpha)"""
    oma = 1.0 - alpha if one_minus_alpha is None else one_minus_alpha
    ratio = (x / (1.0 - x)) / (1.0 + (1.0 + x) / (2.0 * (1.0 - x)) * oma / alpha)
    return ratio / (1.0 + ratio)


def fk_conditional_ratio(x: float, connected: bool) -> float:
    """phi_x(e | eta): 2x/(1-x) when the endpoints of e are joined in eta, x/(1-x) otherwise"""
    return (2.0 * x if connected else x) / (1.0 - x)


def critical_x_conjectured(n: float) -> float:
    """x_c(n) = 1 / sqrt(2 + sqrt(2 - n)) for n in [0, 2]"""
    if not 0.0 <= n <= 2.0:
        raise OutOfRange(f"x_c(n) is defined for n in [0, 2], got {n}")
    return 1.0 / math.sqrt(2.0 + math.sqrt(2.0 - n))


def beta_near_one(n: float) -> float:
    """Simplified beta for n close to 1 at x = 1/sqrt(3)"""
    c = (2.0 * math.sqrt(3.0)) ** 6
    return c / ((n - 1.0) ** 2 + c)


def alpha_near_one(n: float) -> float:
    return 1.0 - (n - 1.0) ** 2 / (6.0 * (2.0 * math.sqrt(3.0)) ** 6)


def epsilon_asymptotic(n: float) -> float:
    """Leading order of epsilon(n) as n -> 1"""
    return EPSILON_CONSTANT * (n - 1.0) ** 2


def _xtilde_gap(n: float, x):
    alpha_gap = one_minus_alpha_of(n, x)
    return xtilde_of(x, 1.0 - alpha_gap, alpha_gap) - INV_SQRT3


@lru_cache(maxsize=256)
def epsilon_of(n: float) -> float:
    """
    Largest eps with x~(n, x) < 1/sqrt(3) for every x < 1/sqrt(3) + eps

    Bisects g(x) = x~ - 1/sqrt(3) on [1/sqrt(3), 1). When g is not
    non-decreasing on a sample grid the first sign change on the grid is
    refined instead.
    """
    _check_n(n)
    lo, hi = INV_SQRT3, 1.0 - 1e-9
    grid = np.linspace(lo, hi, 257)
    values = _xtilde_gap(n, grid)
    if values[0] >= 0.0 or values[-1] <= 0.0:
        raise OutOfRange(f"No sign change of x~ - 1/sqrt(3) on [{lo}, {hi}] for n = {n}")
    if np.all(np.diff(values) >= 0.0):
        root = bisect(lambda x: float(_xtilde_gap(n, x)), lo, hi, xtol=1e-12)
    else:
        first = int(np.argmax(values >= 0.0))
        logger.warning(f"x~ is not monotone on the grid for n = {n}; refining the first crossing")
        root = bisect(lambda x: float(_xtilde_gap(n, x)), grid[first - 1], grid[first], xtol=1e-12)
    return root - INV_SQRT3


def derive_params(n: float, x: float, with_epsilon: bool = True) -> Params:
    """
    All derived quantities for n > 1 and x in (0, 1)

    Raises:
        OutOfRange: n <= 1 or x outside (0, 1)
    """
    _check_n(n)
    _check_x(x)
    bound = holley_bound(n, x)
    beta = 1.0 - 1.0 / (1.0 + bound)
    oma = float(one_minus_alpha_of(n, x))
    alpha = 1.0 - oma
    return Params(
        n=n,
        x=x,
        p=2.0 * x / (1.0 + x),
        M=max_factor(n),
        holley_bound=bound,
        beta=beta,
        alpha=alpha,
        one_minus_alpha=oma,
        xtilde=float(xtilde_of(x, alpha, oma)),
        xc=critical_x_conjectured(n) if n <= 2.0 else None,
        eps=epsilon_of(n) if with_epsilon else None,
    )


# ==================== Reports ====================

class Verdict(str, Enum):
    DOMINATES = "dominates"
    FAILS = "fails"


class DominationMethod(str, Enum):
    STRASSEN_FLOW = "strassen_flow"
    HOLLEY_EXHAUSTIVE = "holley_exhaustive"


class DominationReport(BaseModel):
    """Outcome of a domination check; a failure always carries a witness"""
    verdict: Verdict
    method: DominationMethod
    witness: Optional[dict] = None
    worst_ratio: Optional[float] = None
    bound: Optional[float] = None
    checked: int = 0
    details: dict = {}

    @model_validator(mode="after")
    def validate_witness(self) -> "DominationReport":
        if self.verdict == Verdict.FAILS and not self.witness:
            raise ValueError("A failing verdict needs a witness")
        return self

    @property
    def dominates(self) -> bool:
        return self.verdict == Verdict.DOMINATES


# ==================== Superposition and colouring ====================

def superpose(omega: EdgeConfig, pi: EdgeConfig) -> EdgeConfig:
    """omega OR pi for a loop configuration omega"""
    omega.same_domain(pi)
    if not is_loop_config(omega):
        raise NotEven("The loop component of a superposition must be even")
    return omega | pi


class LoopColor(str, Enum):
    BLUE = "blue"
    RED = "red"


@dataclass(frozen=True)
class ColoredConfig:
    blue: EdgeConfig
    red: EdgeConfig
    colors: tuple[LoopColor, ...]


def color_loops(omega: EdgeConfig, n: float, rng: np.random.Generator) -> ColoredConfig:
    """Colour each loop red with probability 1/n and blue otherwise, one draw per loop"""
    _check_n(n)
    decomposition = decompose_loops(omega)
    blue = red = 0
    colors = []
    for loop in decomposition.loops:
        if rng.random() < 1.0 / n:
            red |= loop.mask
            colors.append(LoopColor.RED)
        else:
            blue |= loop.mask
            colors.append(LoopColor.BLUE)
    domain = omega.domain
    return ColoredConfig(EdgeConfig(domain, blue), EdgeConfig(domain, red), tuple(colors))


# ==================== Face spins ====================

def face_bernoulli_sample(domain: Domain, beta: float, rng: np.random.Generator) -> SpinConfig:
    """Independent face spins with P(+1) = beta"""
    if not 0.0 <= beta <= 1.0:
        raise OutOfRange(f"beta must lie in [0, 1], got {beta}")
    plus = rng.random(domain.num_faces) < beta
    return SpinConfig(domain, tuple(1 if s else -1 for s in plus))


def face_bernoulli_distribution(domain: Domain, beta: float) -> ExactDistribution:
    """Exact law of the face-Bernoulli spin field (bit 1 = spin +1)"""
    if not 0.0 <= beta <= 1.0:
        raise OutOfRange(f"beta must lie in [0, 1], got {beta}")
    _check_holley_size(domain)
    faces = domain.num_faces
    support = np.arange(1 << faces, dtype=np.int64)
    plus = bits_matrix(support, faces).sum(axis=1)
    probabilities = np.power(beta, plus) * np.power(1.0 - beta, faces - plus)
    keep = probabilities > 0.0
    return ExactDistribution(domain, SiteKind.FACES, support[keep], probabilities[keep], 1.0,
                             f"face_bernoulli({beta:g})")


def _check_holley_size(domain: Domain) -> None:
    if domain.num_faces > config.max_holley_faces:
        raise TooLarge(f"{domain.num_faces} faces exceed the spin enumeration limit of {config.max_holley_faces}")


@dataclass(frozen=True)
class BlueTable:
    """Blue loop configurations indexed by their set of -1 faces"""
    masks: np.ndarray
    sizes: np.ndarray
    loops: np.ndarray
    z_red: np.ndarray
    weights: np.ndarray

    @property
    def total(self) -> float:
        return math.fsum(self.weights)


def blue_table(domain: Domain, n: float, x: float) -> BlueTable:
    """
    Unnormalised blue marginal weights

    weight(omega_b) = Z_loop(D minus omega_b, 1, x) (n - 1)^loops x^|omega_b|, where
    face subset S gives omega_b with spin -1 exactly on S.
    """
    _check_n(n)
    _check_holley_size(domain)
    count = 1 << domain.num_faces
    open_edges = even_subgraph_matrix(domain, 0, count)
    masks = matrix_indices(open_edges)
    sizes = open_edges.sum(axis=1)
    labels = component_labels(open_edges, domain)
    loops = component_counts(labels) - domain.num_vertices + sizes
    x_power = np.power(float(x), sizes)

    rows = max(1, (1 << 20) // count)
    z_red = np.empty(count)
    for start in range(0, count, rows):
        block = masks[start:start + rows]
        disjoint = (block[:, None] & masks[None, :]) == 0
        z_red[start:start + rows] = disjoint.astype(np.float64) @ x_power
    weights = z_red * np.power(n - 1.0, loops) * x_power
    return BlueTable(masks, sizes, loops, z_red, weights)


def blue_spin_distribution(domain: Domain, n: float, x: float) -> ExactDistribution:
    """Exact law of the blue spin field sigma_b (bit 1 = spin +1)"""
    table = blue_table(domain, n, x)
    full = (1 << domain.num_faces) - 1
    spins = full ^ np.arange(1 << domain.num_faces, dtype=np.int64)
    order = np.argsort(spins)
    total = table.total
    return ExactDistribution(domain, SiteKind.FACES, spins[order], table.weights[order] / total, total,
                             f"blue_spins(n={n:g}, x={x:g})")


def holley_check_blue_spins(domain: Domain, n: float, x: float, mirrored: bool = False) -> DominationReport:
    """
    Single-face ratio bound for the blue spin field (or its negation)

    For every spin configuration and every face at -1, raising that face to +1
    may multiply the probability by at most (2/x)^6 max{(n-1)^2, (n-1)^-2}.
    """
    _check_x(x)
    table = blue_table(domain, n, x)
    bound = holley_bound(n, x)
    count = 1 << domain.num_faces
    subsets = np.arange(count, dtype=np.int64)
    worst, worst_at = -math.inf, None
    checked = 0
    for u in range(domain.num_faces):
        bit = 1 << u
        if mirrored:
            lower = subsets[(subsets & bit) == 0]
            upper = lower | bit
        else:
            lower = subsets[(subsets & bit) != 0]
            upper = lower ^ bit
        ratios = table.weights[upper] / table.weights[lower]
        checked += len(ratios)
        i = int(np.argmax(ratios))
        if ratios[i] > worst:
            worst = float(ratios[i])
            worst_at = (u, int(upper[i]), int(lower[i]))

    full = count - 1
    witness = None
    holds = worst <= bound * (1.0 + config.identity_tolerance)
    if not holds and worst_at is not None:
        u, upper_minus, lower_minus = worst_at
        witness = {
            "face": u,
            "upper_spins": full ^ (upper_minus if not mirrored else lower_minus),
            "lower_spins": full ^ (lower_minus if not mirrored else upper_minus),
            "ratio": worst,
        }
    logger.debug(f"Blue spin Holley check on {domain.name} (mirrored={mirrored}): worst {worst:.6g} <= {bound:.6g}")
    return DominationReport(
        verdict=Verdict.DOMINATES if holds else Verdict.FAILS,
        method=DominationMethod.HOLLEY_EXHAUSTIVE,
        witness=witness,
        worst_ratio=worst,
        bound=bound,
        checked=checked,
        details={"mirrored": mirrored},
    )


def _side_minus(domain: Domain, minus_faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row -1 indicator on the left and right side of each edge (outside counts +1)"""
    extended = np.concatenate([minus_faces, np.zeros((minus_faces.shape[0], 1), dtype=bool)], axis=1)
    sides = np.where(domain.edge_sides < 0, domain.num_faces, domain.edge_sides)
    return extended[:, sides[:, 0]], extended[:, sides[:, 1]]


def spin_domain_edge_law(domain: Domain, n: float, x: float, sign: int) -> ExactDistribution:
    """Exact law of D+ (sign = +1) or D- (sign = -1) under the blue spin field"""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    table = blue_table(domain, n, x)
    minus_faces = bits_matrix(np.arange(1 << domain.num_faces, dtype=np.int64), domain.num_faces)
    left, right = _side_minus(domain, minus_faces)
    open_edges = (~left & ~right) if sign == 1 else (left & right)
    indices = matrix_indices(open_edges)
    support, inverse = np.unique(indices, return_inverse=True)
    total = table.total
    probabilities = np.bincount(inverse, weights=table.weights, minlength=len(support)) / total
    label = "D+" if sign == 1 else "D-"
    return ExactDistribution(domain, SiteKind.EDGES, support, probabilities, total, label)


# ==================== Two-sheet construction ====================

@dataclass(frozen=True)
class TwoSheetSample:
    eta_left: EdgeConfig
    eta_right: EdgeConfig
    spins: SpinConfig


def _sheet_members(domain: Domain) -> tuple[list[list[int]], list[list[int]]]:
    lefts: list[list[int]] = [[] for _ in domain.faces]
    rights: list[list[int]] = [[] for _ in domain.faces]
    for e in domain.edges:
        if e.left is not None:
            lefts[e.left].append(e.index)
        if e.right is not None:
            rights[e.right].append(e.index)
    return lefts, rights


def two_sheet_batch(domain: Domain, alpha: float, rng: np.random.Generator, size: int
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorised two-sheet draws

    Returns boolean arrays eta_left (size x E), eta_right (size x E) and
    plus (size x F), where a face is +1 iff every retained sheet value
    around it is open: eta_left for edges having the face on their left,
    eta_right otherwise.
    """
    if not 0.0 <= alpha <= 1.0:
        raise OutOfRange(f"alpha must lie in [0, 1], got {alpha}")
    uniforms = rng.random((size, 2, domain.num_edges))
    eta_left = uniforms[:, 0, :] < alpha
    eta_right = uniforms[:, 1, :] < alpha
    lefts, rights = _sheet_members(domain)
    plus = np.ones((size, domain.num_faces), dtype=bool)
    for f in range(domain.num_faces):
        plus[:, f] = eta_left[:, lefts[f]].all(axis=1) & eta_right[:, rights[f]].all(axis=1)
    return eta_left, eta_right, plus


def two_sheet(domain: Domain, alpha: float, rng: np.random.Generator) -> TwoSheetSample:
    eta_left, eta_right, plus = two_sheet_batch(domain, alpha, rng, 1)
    return TwoSheetSample(
        EdgeConfig(domain, int(matrix_indices(eta_left)[0])),
        EdgeConfig(domain, int(matrix_indices(eta_right)[0])),
        SpinConfig(domain, tuple(1 if s else -1 for s in plus[0])),
    )


def plus_domain_matrix(domain: Domain, plus: np.ndarray) -> np.ndarray:
    """D+ per row of a (rows x F) boolean +1 indicator"""
    left, right = _side_minus(domain, ~plus)
    return ~left & ~right


def two_sheet_violations(domain: Domain, eta_left: np.ndarray, plus: np.ndarray) -> int:
    """Number of rows where eta_left fails to contain D+"""
    return int(np.any(plus_domain_matrix(domain, plus) & ~eta_left, axis=1).sum())


# ==================== Exact stochastic ordering ====================

def _dense(dist: ExactDistribution) -> np.ndarray:
    out = np.zeros(1 << dist.num_sites)
    out[dist.support] = dist.probabilities
    return out


def strassen_dominates(a: ExactDistribution, b: ExactDistribution) -> DominationReport:
    """
    Decide whether b stochastically dominates a

    Max flow on the Hasse diagram of the cube: source -> xi with capacity a(xi),
    xi -> sink with capacity b(xi), uncapacitated cover edges xi -> xi + site.
    Full flow means a monotone coupling exists; otherwise the source side of
    a minimum cut is an increasing event A with a(A) > b(A).
    """
    if a.domain != b.domain or a.sites != b.sites:
        raise DomainMismatch("Distributions live on different domains or site sets")
    sites = a.num_sites
    if sites > config.max_exhaustive_edges:
        raise TooLarge(f"Max-flow domination over {sites} sites exceeds the limit of {config.max_exhaustive_edges}")
    pa, pb = _dense(a), _dense(b)
    graph = nx.DiGraph()
    source, sink = "source", "sink"
    total = 0
    for xi in range(1 << sites):
        graph.add_node(xi)
        ca = int(round(pa[xi] * _FLOW_SCALE))
        cb = int(round(pb[xi] * _FLOW_SCALE))
        if ca > 0:
            graph.add_edge(source, xi, capacity=ca)
            total += ca
        if cb > 0:
            graph.add_edge(xi, sink, capacity=cb)
        for j in range(sites):
            if not xi >> j & 1:
                graph.add_edge(xi, xi | (1 << j))
    if total == 0:
        raise ValueError("Lower distribution has no mass")
    graph.add_node(source)
    graph.add_node(sink)
    cut_value, (reachable, _) = nx.minimum_cut(graph, source, sink)
    deficit = (total - cut_value) / _FLOW_SCALE
    holds = deficit <= config.tv_tolerance
    witness = None
    if not holds:
        upset = sorted(v for v in reachable if v != source)
        members = set(upset)
        generators = [xi for xi in upset if not any((xi & ~(1 << j)) in members for j in range(sites) if xi >> j & 1)]
        witness = {
            "generators": generators,
            "lower_mass": math.fsum(pa[upset]),
            "upper_mass": math.fsum(pb[upset]),
        }
    logger.debug(f"Strassen check {a.label} <= {b.label}: deficit {deficit:.3e}")
    return DominationReport(
        verdict=Verdict.DOMINATES if holds else Verdict.FAILS,
        method=DominationMethod.STRASSEN_FLOW,
        witness=witness,
        checked=1 << sites,
        details={"flow_deficit": deficit},
    )


def increasing_event_mass(dist: ExactDistribution, generators: list[int]) -> float:
    """Probability of the up-set generated by the given configurations"""
    if not generators:
        return 0.0
    gens = np.asarray(generators, dtype=np.int64)
    inside = np.any((dist.support[:, None] & gens[None, :]) == gens[None, :], axis=1)
    return math.fsum(dist.probabilities[inside])


# ==================== Averaged FK ratio check ====================

def _zeta_subsets(values: np.ndarray, bits: int) -> np.ndarray:
    out = values.copy()
    for j in range(bits):
        view = out.reshape(-1, 2, 1 << j)
        view[:, 1, :] += view[:, 0, :]
    return out


def _zeta_supersets(values: np.ndarray, bits: int) -> np.ndarray:
    out = values.copy()
    for j in range(bits):
        view = out.reshape(-1, 2, 1 << j)
        view[:, 0, :] += view[:, 1, :]
    return out


def _subset_max(values: np.ndarray, bits: int) -> tuple[np.ndarray, np.ndarray]:
    best = values.copy()
    where = np.arange(len(values), dtype=np.int64)
    for j in range(bits):
        v = best.reshape(-1, 2, 1 << j)
        w = where.reshape(-1, 2, 1 << j)
        better = v[:, 0, :] > v[:, 1, :]
        v[:, 1, :] = np.where(better, v[:, 0, :], v[:, 1, :])
        w[:, 1, :] = np.where(better, w[:, 0, :], w[:, 1, :])
    return best, where


def holley_check_lemma42(domain: Domain, x: float, alpha: float,
                         xtilde: Optional[float] = None) -> DominationReport:
    """
    Ratio check for the Perco_alpha-averaged FK measure against Phi_{x~}

    For all eta inside eta~ and e outside eta~, checks
    Perco_alpha[Phi_{D',x}(eta + e)] / Perco_alpha[Phi_{D',x}(eta)] <= phi_{x~}(e | eta~).
    The averages run over every sub-edge-set D' with weight alpha^|D'| (1-alpha)^(|E|-|D'|).

    Args:
        xtilde: override of the comparison weight (defaults to x~(x, alpha))
    """
    _check_x(x)
    if not 0.0 < alpha <= 1.0:
        raise OutOfRange(f"alpha must lie in (0, 1], got {alpha}")
    edges = domain.num_edges
    if edges > config.max_exhaustive_edges:
        raise TooLarge(f"{edges} edges exceed the exhaustive limit of {config.max_exhaustive_edges}")
    xt = float(xtilde_of(x, alpha)) if xtilde is None else float(xtilde)
    count = 1 << edges
    configs = np.arange(count, dtype=np.int64)
    open_edges = bits_matrix(configs, edges)
    labels = component_labels(open_edges, domain)
    k = component_counts(labels)
    sizes = open_edges.sum(axis=1)

    p = 2.0 * x / (1.0 + x)
    g = np.power(p / (1.0 - p), sizes) * np.power(2.0, k)
    h = np.power(alpha, sizes) * np.power(1.0 - alpha, edges - sizes) / _zeta_subsets(g, edges)
    averaged = g * _zeta_supersets(h, edges)

    tol = config.identity_tolerance
    worst, worst_at, checked = -math.inf, None, 0
    for e in range(edges):
        bit = 1 << e
        without = (configs & bit) == 0
        lhs = np.full(count, -math.inf)
        lhs[without] = averaged[configs[without] | bit] / averaged[configs[without]]
        best, argbest = _subset_max(lhs, edges)
        connected = labels[:, domain.tails[e]] == labels[:, domain.heads[e]]
        rhs = np.where(connected, 2.0 * xt, xt) / (1.0 - xt)
        ratio = np.where(without, best / rhs, -math.inf)
        i = int(np.argmax(ratio))
        checked += int(np.power(2, sizes[without]).sum())
        if ratio[i] > worst:
            worst = float(ratio[i])
            worst_at = {"eta": int(argbest[i]), "eta_tilde": int(i), "edge": e,
                        "lhs": float(best[i]), "rhs": float(rhs[i])}

    holds = worst <= 1.0 + tol
    logger.debug(f"Averaged FK ratio check on {domain.name}: worst lhs/rhs {worst:.12g}")
    return DominationReport(
        verdict=Verdict.DOMINATES if holds else Verdict.FAILS,
        method=DominationMethod.HOLLEY_EXHAUSTIVE,
        witness=None if holds else worst_at,
        worst_ratio=worst,
        bound=1.0,
        checked=checked,
        details={"x": x, "alpha": alpha, "xtilde": xt},
    )


def lemma42_triple_ratio(domain: Domain, x: float, alpha: float, xtilde: float,
                         eta: int, eta_tilde: int, edge: int) -> float:
    """Re-evaluate lhs / rhs for one (eta, eta~, e) triple by direct enumeration over D'"""
    numer, denom = [], []
    for kept in range(1 << domain.num_edges):
        weight = alpha ** kept.bit_count() * (1.0 - alpha) ** (domain.num_edges - kept.bit_count())
        if weight == 0.0:
            continue
        w = WeightVector.masked(domain, x, [j for j in range(domain.num_edges) if kept >> j & 1])
        dist = exact_distribution(MeasureKind.FK, domain, w)
        numer.append(weight * dist.probability(eta | (1 << edge)))
        denom.append(weight * dist.probability(eta))
    lhs_num, lhs_den = math.fsum(numer), math.fsum(denom)
    labels = component_labels(bits_matrix(np.array([eta_tilde]), domain.num_edges), domain)[0]
    connected = bool(labels[domain.tails[edge]] == labels[domain.heads[edge]])
    return (lhs_num / lhs_den) / fk_conditional_ratio(xtilde, connected)


# ==================== Blue / red decomposition checks ====================

def _distribution_from_mapping(domain: Domain, masses: dict[int, float], label: str) -> ExactDistribution:
    keys = np.array(sorted(masses), dtype=np.int64)
    values = np.array([masses[k] for k in sorted(masses)])
    total = math.fsum(values)
    return ExactDistribution(domain, SiteKind.EDGES, keys, values / total, total, label)


def verify_red_conditional(domain: Domain, n: float, x: float) -> IdentityReport:
    """
    Exact joint law of (omega_b, omega_r) against its closed forms

    Checks that given omega_b the red configuration has law Loop_{D minus omega_b, 1, x},
    that the blue marginal matches Z_loop(D minus omega_b, 1, x) (n-1)^loops x^|omega_b| / Z_loop(D, n, x),
    and that (1/n) Loop(|C_0(omega)| >= k) = Loop(|C_0(omega_r)| >= k) for k >= 2.
    """
    _check_n(n)
    _check_holley_size(domain)
    loop = exact_distribution(MeasureKind.LOOP, domain, WeightVector.constant(domain, x), n)
    joint: dict[tuple[int, int], float] = {}
    blue: dict[int, float] = {}
    red_origin = np.zeros(domain.num_vertices + 1)
    full_origin = np.zeros(domain.num_vertices + 1)
    for index, prob in zip(loop.support, loop.probabilities):
        omega = EdgeConfig(domain, int(index))
        loops = decompose_loops(omega).loops
        full_origin[origin_loop_length(omega)] += prob
        for coloring in range(1 << len(loops)):
            red_mask = sum(l.mask for i, l in enumerate(loops) if coloring >> i & 1)
            reds = coloring.bit_count()
            weight = prob * (1.0 / n) ** reds * ((n - 1.0) / n) ** (len(loops) - reds)
            blue_mask = int(index) ^ red_mask
            joint[(blue_mask, red_mask)] = joint.get((blue_mask, red_mask), 0.0) + weight
            blue[blue_mask] = blue.get(blue_mask, 0.0) + weight
            red_origin[origin_loop_length(EdgeConfig(domain, red_mask))] += weight

    z_total = z_loop(domain, n, WeightVector.constant(domain, x))
    worst_tv = worst_marginal = 0.0
    for blue_mask, mass in blue.items():
        conditional = {r: m / mass for (b, r), m in joint.items() if b == blue_mask}
        reference = conditional_loop_measure(domain, 1.0, x, EdgeConfig(domain, blue_mask))
        observed = _distribution_from_mapping(domain, conditional, "red|blue")
        worst_tv = max(worst_tv, tv_distance(observed, reference))

        omega_b = EdgeConfig(domain, blue_mask)
        closed = (reference.normalization / z_total) * (n - 1.0) ** len(decompose_loops(omega_b).loops) \
            * x ** omega_b.size
        worst_marginal = max(worst_marginal, abs(closed - mass))

    lhs = np.cumsum(full_origin[::-1])[::-1] / n
    rhs = np.cumsum(red_origin[::-1])[::-1]
    worst_origin = float(np.max(np.abs(lhs[2:] - rhs[2:]))) if len(lhs) > 2 else 0.0

    tol = config.tv_tolerance
    worst = max(worst_tv, worst_marginal, worst_origin)
    return IdentityReport(
        name="red_conditional",
        holds=worst <= tol,
        max_discrepancy=worst,
        tolerance=tol,
        checked=len(blue),
        details={
            "conditional_tv": worst_tv,
            "marginal_discrepancy": worst_marginal,
            "origin_identity_discrepancy": worst_origin,
        },
    )


def verify_spin_domain_decoupling(domain: Domain, n: float, x: float) -> IdentityReport:
    """
    Red loops split over the two spin domains

    For every blue configuration, Loop_{D minus omega_b, 1, x} equals the product of
    Loop_{D+, 1, x} and Loop_{D-, 1, x}, and
    Loop_{D minus omega_b}(|C_0| >= k) <= Phi_{D+}(|C_0| >= k) + Phi_{D-}(|C_0| >= k).
    The union bound is also checked after averaging over the blue law.
    """
    table = blue_table(domain, n, x)
    total = table.total
    tol = config.tv_tolerance
    worst_tv = worst_excess = 0.0
    red_tail = np.zeros(domain.num_vertices + 1)
    fk_tail = np.zeros(domain.num_vertices + 1)
    for subset in range(1 << domain.num_faces):
        omega_b = EdgeConfig(domain, int(table.masks[subset]))
        spins = SpinConfig.from_bits(domain, ((1 << domain.num_faces) - 1) ^ subset)
        plus, minus = spin_edge_domains(spins)
        conditional = conditional_loop_measure(domain, 1.0, x, omega_b)
        plus_law = exact_distribution(MeasureKind.LOOP, domain, WeightVector.masked(domain, x, plus))
        minus_law = exact_distribution(MeasureKind.LOOP, domain, WeightVector.masked(domain, x, minus))
        worst_tv = max(worst_tv, tv_distance(conditional, product_distribution(plus_law, minus_law)))

        lhs = cluster_size_tail(conditional)
        rhs = (cluster_size_tail(exact_distribution(MeasureKind.FK, domain, WeightVector.masked(domain, x, plus)))
               + cluster_size_tail(exact_distribution(MeasureKind.FK, domain, WeightVector.masked(domain, x, minus))))
        worst_excess = max(worst_excess, float(np.max(lhs[1:] - rhs[1:])))
        weight = table.weights[subset] / total
        red_tail += weight * lhs
        fk_tail += weight * rhs

    averaged_excess = float(np.max(red_tail[1:] - fk_tail[1:]))
    worst = max(worst_tv, worst_excess, averaged_excess)
    return IdentityReport(
        name="spin_domain_decoupling",
        holds=worst <= tol,
        max_discrepancy=max(worst, 0.0),
        tolerance=tol,
        checked=1 << domain.num_faces,
        details={
            "product_tv": worst_tv,
            "union_bound_excess": worst_excess,
            "averaged_union_bound_excess": averaged_excess,
        },
    )


