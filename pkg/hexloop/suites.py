"""
Verification suites exposed to the command line
Each suite runs a group of exact checks and returns a result dictionary
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from config.config import config
from hexloop.couplings import (
    blue_spin_distribution,
    derive_params,
    face_bernoulli_distribution,
    holley_check_blue_spins,
    holley_check_lemma42,
    spin_domain_edge_law,
    strassen_dominates,
    two_sheet_batch,
    two_sheet_violations,
    verify_red_conditional,
    verify_spin_domain_decoupling,
)
from hexloop.errors import HexLoopError
from hexloop.hexlattice import Domain
from hexloop.measures import (
    MeasureKind,
    WeightVector,
    exact_distribution,
    fk_edge_removal_bounds,
    superposition_distribution,
    tv_distance,
    verify_partition_identity,
)

logger = logging.getLogger(__name__)

_BATCH = 1 << 16


@dataclass(frozen=True)
class SuiteContext:
    """Inputs shared by every suite"""
    domain: Domain
    n: float = 2.0
    x: float = 0.4
    seed: Optional[int] = None
    samples: int = 100_000
    workers: Optional[int] = None

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(stream,)))


def _failure(error: Exception) -> Dict[str, Any]:
    return {"success": False, "report": None, "error": str(error)}


class SuperpositionSuite:
    """
    Loop(1, w) superposed with independent Perco(w) against the FK table

    Runs for the constant weight x and for one random inhomogeneous weight vector.
    """

    name = "prop21"
    description = "Loop(1, x) OR Perco(x) has the FK-Ising law"

    @staticmethod
    def execute(ctx: SuiteContext) -> Dict[str, Any]:
        try:
            domain = ctx.domain
            weights = {
                "constant": WeightVector.constant(domain, ctx.x),
                "random": WeightVector(domain, ctx.rng(21).random(domain.num_edges)),
            }
            tol = config.tv_tolerance
            checks = {}
            for label, w in weights.items():
                tv = tv_distance(superposition_distribution(domain, w, ctx.workers),
                                 exact_distribution(MeasureKind.FK, domain, w, workers=ctx.workers))
                checks[label] = {"tv": tv, "holds": tv <= tol}
            success = all(c["holds"] for c in checks.values())
            return {"success": success, "report": {"tolerance": tol, "checks": checks}, "error": None}
        except HexLoopError as e:
            logger.error(f"Superposition suite error: {e}")
            return _failure(e)


class PartitionSuite:
    """Loop/FK partition identity and the single-edge removal bounds"""

    name = "eqz"
    description = "Z_loop(D, 1, w) / (2^-|V| prod(1 + w_e)) = Z_FK(D, w)"

    @staticmethod
    def execute(ctx: SuiteContext) -> Dict[str, Any]:
        try:
            domain = ctx.domain
            tol = config.identity_tolerance
            identities = {}
            for label, w in {
                "constant": WeightVector.constant(domain, ctx.x),
                "random": WeightVector(domain, ctx.rng(0).random(domain.num_edges)),
            }.items():
                report = verify_partition_identity(domain, w, ctx.workers)
                identities[label] = {**report.model_dump(mode="json"), "holds": report.discrepancy <= tol}

            removals = []
            if 0.0 < ctx.x < 1.0:
                removals = [fk_edge_removal_bounds(domain, ctx.x, e).model_dump(mode="json")
                            for e in range(domain.num_edges)]
            success = all(r["holds"] for r in identities.values()) and all(r["holds"] for r in removals)
            return {
                "success": success,
                "report": {"tolerance": tol, "identities": identities, "edge_removal": removals},
                "error": None,
            }
        except HexLoopError as e:
            logger.error(f"Partition suite error: {e}")
            return _failure(e)


class ColoringSuite:
    """Red loops given blue loops, and their split across spin domains"""

    name = "prop31"
    description = "Loop(omega_r | omega_b) = Loop_{D minus omega_b, 1, x}, split over D+ and D-"

    @staticmethod
    def execute(ctx: SuiteContext) -> Dict[str, Any]:
        try:
            red = verify_red_conditional(ctx.domain, ctx.n, ctx.x)
            split = verify_spin_domain_decoupling(ctx.domain, ctx.n, ctx.x)
            return {
                "success": red.holds and split.holds,
                "report": {"red_conditional": red.model_dump(mode="json"), "decoupling": split.model_dump(mode="json")},
                "error": None,
            }
        except HexLoopError as e:
            logger.error(f"Colouring suite error: {e}")
            return _failure(e)


class SpinDominationSuite:
    """
    Blue spin field below face-Bernoulli(beta)

    Single-face ratio bounds for sigma_b and -sigma_b, an exact max-flow
    certificate at the spin level, the edge-level D+ / D- laws against
    Perco(alpha) where small enough, and sampled two-sheet draws.
    """

    name = "lemma41"
    description = "law(sigma_b) <= P_beta and D+ <= Perco_alpha"

    @staticmethod
    def execute(ctx: SuiteContext) -> Dict[str, Any]:
        try:
            domain = ctx.domain
            params = derive_params(ctx.n, ctx.x, with_epsilon=False)
            holley = holley_check_blue_spins(domain, ctx.n, ctx.x)
            mirrored = holley_check_blue_spins(domain, ctx.n, ctx.x, mirrored=True)
            spins = strassen_dominates(blue_spin_distribution(domain, ctx.n, ctx.x),
                                       face_bernoulli_distribution(domain, params.beta))
            report: Dict[str, Any] = {
                "params": params.summary(),
                "holley": holley.model_dump(mode="json"),
                "holley_mirrored": mirrored.model_dump(mode="json"),
                "spin_strassen": spins.model_dump(mode="json"),
            }
            success = holley.dominates and mirrored.dominates and spins.dominates

            if domain.num_edges <= config.max_exhaustive_edges:
                perco = exact_distribution(MeasureKind.PERCO, domain, WeightVector.constant(domain, params.alpha))
                for sign, label in ((1, "plus_domain_strassen"), (-1, "minus_domain_strassen")):
                    edge_report = strassen_dominates(spin_domain_edge_law(domain, ctx.n, ctx.x, sign), perco)
                    report[label] = edge_report.model_dump(mode="json")
                    success = success and edge_report.dominates

            sheets = SpinDominationSuite.two_sheet_check(ctx, params.alpha)
            report["two_sheet"] = sheets
            success = success and sheets["violations"] == 0 and sheets["within_band"]
            return {"success": success, "report": report, "error": None}
        except HexLoopError as e:
            logger.error(f"Spin domination suite error: {e}")
            return _failure(e)

    @staticmethod
    def two_sheet_check(ctx: SuiteContext, alpha: float, sigmas: float = 4.0) -> Dict[str, Any]:
        """Invariant eta_L >= D+ on every draw; +1 face frequency within sigmas of alpha^6"""
        rng = ctx.rng(41)
        violations, plus_count, drawn = 0, 0, 0
        while drawn < ctx.samples:
            size = min(_BATCH, ctx.samples - drawn)
            eta_left, _, plus = two_sheet_batch(ctx.domain, alpha, rng, size)
            violations += two_sheet_violations(ctx.domain, eta_left, plus)
            plus_count += int(plus.sum())
            drawn += size
        target = alpha ** 6
        trials = drawn * ctx.domain.num_faces
        frequency = plus_count / trials if trials else 0.0
        spread = math.sqrt(target * (1.0 - target) / trials) if trials else 0.0
        z = (frequency - target) / spread if spread > 0.0 else 0.0
        return {
            "samples": drawn,
            "violations": violations,
            "plus_frequency": frequency,
            "expected": target,
            "z": z,
            "within_band": abs(z) <= sigmas,
        }


class AveragedFkSuite:
    """Perco(alpha)-averaged FK ratios against Phi at the reduced weight x~"""

    name = "lemma42"
    description = "Perco_alpha[Phi_{D',x}] ratios are bounded by Phi_{D,x~} ratios"

    @staticmethod
    def execute(ctx: SuiteContext) -> Dict[str, Any]:
        try:
            params = derive_params(ctx.n, ctx.x, with_epsilon=False)
            report = holley_check_lemma42(ctx.domain, ctx.x, params.alpha, params.xtilde)
            return {
                "success": report.dominates,
                "report": {"params": params.summary(), "check": report.model_dump(mode="json")},
                "error": None,
            }
        except HexLoopError as e:
            logger.error(f"Averaged FK suite error: {e}")
            return _failure(e)


class OrderingSuite:
    """Exact orderings fk(x) <= fk(x') for x < x' and loop(1, x) <= fk(x)"""

    name = "domination"
    description = "Max-flow certificates of FK monotonicity and loop-below-FK"

    @staticmethod
    def execute(ctx: SuiteContext) -> Dict[str, Any]:
        try:
            domain = ctx.domain
            larger = (ctx.x + 1.0) / 2.0
            fk_low = exact_distribution(MeasureKind.FK, domain, WeightVector.constant(domain, ctx.x))
            fk_high = exact_distribution(MeasureKind.FK, domain, WeightVector.constant(domain, larger))
            loop = exact_distribution(MeasureKind.LOOP, domain, WeightVector.constant(domain, ctx.x), 1.0)
            monotone = strassen_dominates(fk_low, fk_high)
            below = strassen_dominates(loop, fk_low)
            return {
                "success": monotone.dominates and below.dominates,
                "report": {
                    "fk_monotone": {"x": ctx.x, "x_larger": larger, **monotone.model_dump(mode="json")},
                    "loop_below_fk": below.model_dump(mode="json"),
                },
                "error": None,
            }
        except HexLoopError as e:
            logger.error(f"Ordering suite error: {e}")
            return _failure(e)


# Suite registry for easy access
SUITES = {
    "prop21": SuperpositionSuite,
    "prop31": ColoringSuite,
    "lemma41": SpinDominationSuite,
    "lemma42": AveragedFkSuite,
    "eqz": PartitionSuite,
    "domination": OrderingSuite,
}


def get_suite(name: str):
    """Get a suite by name"""
    return SUITES.get(name)


def list_suites() -> list:
    """List all available suites"""
    return [{"name": suite.name, "description": suite.description} for suite in SUITES.values()]


def run_suite(name: str, ctx: SuiteContext) -> Dict[str, Any]:
    """Run one suite, or every suite in registry order for 'all'"""
    if name == "all":
        results = {key: suite.execute(ctx) for key, suite in SUITES.items()}
        failed = [key for key, result in results.items() if not result["success"]]
        if failed:
            logger.warning(f"Failed suites: {', '.join(failed)}")
        return {
            "success": not failed,
            "report": results,
            "error": f"Failed suites: {', '.join(failed)}" if failed else None,
        }
    suite = get_suite(name)
    if suite is None:
        return {"success": False, "report": None, "error": f"Unknown suite: {name}"}
    logger.info(f"Running suite {name} on {ctx.domain.name}")
    return suite.execute(ctx)
