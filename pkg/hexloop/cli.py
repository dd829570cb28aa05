"""
Command-line entry point

Exit codes: 0 success, 1 verification failure, 2 usage error.
Reports go to stdout as JSON; logs go to stderr.
"""
import argparse
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

from config.config import config
from hexloop import __version__
from hexloop.analysis import fit_decay, scan
from hexloop.configurations import EdgeConfig
from hexloop.couplings import derive_params
from hexloop.errors import HexLoopError, TooLarge
from hexloop.measures import MeasureKind, WeightVector, exact_distribution, verify_partition_identity
from hexloop.mcmc import Measure, SamplerConfig, StatisticKind, estimate_tail
from hexloop.plotting import plot
from hexloop.suites import SUITES, SuiteContext, run_suite
from hexloop.validators import (
    validate_domain,
    validate_grid_file,
    validate_mask,
    validate_n,
    validate_positive_int,
    validate_seed,
    validate_x,
)
from storage.results import dumps_json, get_result_store
from utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flag value; the message names the flag"""
    pass


def _require(result: tuple[bool, Any, str]) -> Any:
    ok, value, message = result
    if not ok:
        raise UsageError(message)
    return value


def _emit(payload: Any) -> None:
    sys.stdout.write(dumps_json(payload))


# ==================== Parser ====================

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default: HEXLOOP_LOG_LEVEL)")
    parser.add_argument("--workers", default=None, help="Worker count (default: HEXLOOP_WORKERS)")
    parser.add_argument("--seed", default=None, help="Master seed (default: HEXLOOP_SEED)")


def _sampler_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sweeps", default="1000", help="Measurement sweeps per chain")
    parser.add_argument("--burn-in", default=None, help="Burn-in sweeps (default: HEXLOOP_BURN_IN_SWEEPS)")
    parser.add_argument("--thinning", default="1", help="Sweeps between recorded samples")
    parser.add_argument("--chains", default="1", help="Independent chains")
    parser.add_argument("--stat", choices=[s.value for s in StatisticKind], default=StatisticKind.R.value)
    parser.add_argument("--kmax", default=None, help="Largest k of the tail (default: |E|)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hexloop", description="Loop O(n) model on hexagonal domains")
    parser.add_argument("--version", action="version", version=f"hexloop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="Exact probability table of loop, perco or fk")
    _common(p)
    p.add_argument("--domain", required=True, help="single_hex, two_hex, hex_ball:R or a domain file")
    p.add_argument("--kind", choices=[k.value for k in MeasureKind], default=MeasureKind.LOOP.value)
    p.add_argument("--n", default="1", help="Loop weight (loop kind only)")
    p.add_argument("--x", required=True, help="Edge weight in [0, 1]")
    p.add_argument("--mask", default=None, help="Comma-separated edges keeping weight x; others get 0")
    p.add_argument("--out", required=True, help="Table CSV (config_hex, probability)")

    p = sub.add_parser("verify", help="Run a verification suite")
    _common(p)
    p.add_argument("--suite", choices=[*SUITES, "all"], required=True)
    p.add_argument("--domain", default="single_hex")
    p.add_argument("--n", default="2")
    p.add_argument("--x", default="0.4")
    p.add_argument("--samples", default="100000", help="Two-sheet draws")
    p.add_argument("--out", default=None, help="Also write the JSON report here")

    p = sub.add_parser("params", help="Derived parameters for (n, x)")
    _common(p)
    p.add_argument("--n", required=True)
    p.add_argument("--x", required=True)

    p = sub.add_parser("sample", help="Monte Carlo tail estimate")
    _common(p)
    p.add_argument("--domain", required=True)
    p.add_argument("--n", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--measure", choices=[m.value for m in Measure], default=Measure.LOOP.value)
    _sampler_flags(p)
    p.add_argument("--out", required=True, help="Tail CSV (k, estimate, stderr, n_samples)")

    p = sub.add_parser("fit", help="Exponential decay fit of a tail CSV")
    _common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("scan", help="Tail fits over a grid of (n, x)")
    _common(p)
    p.add_argument("--grid", required=True, help="File with one 'n x' pair per line")
    p.add_argument("--radius", required=True)
    _sampler_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="Render tail or scan CSV files to SVG")
    _common(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    return parser


# ==================== Commands ====================

def _sampler_config(args: argparse.Namespace, seed: Optional[int]) -> SamplerConfig:
    burn_in = config.burn_in_sweeps if args.burn_in is None else \
        _require(validate_positive_int(args.burn_in, "--burn-in", allow_zero=True))
    return SamplerConfig(
        burn_in_sweeps=burn_in,
        sweeps=_require(validate_positive_int(args.sweeps, "--sweeps")),
        thinning=_require(validate_positive_int(args.thinning, "--thinning")),
        chains=_require(validate_positive_int(args.chains, "--chains")),
        seed=seed,
    )


def cmd_enumerate(args, seed, workers) -> tuple[int, list[Path]]:
    domain = _require(validate_domain(args.domain))
    x = _require(validate_x(args.x))
    kind = MeasureKind(args.kind)
    n = _require(validate_n(args.n)) if kind == MeasureKind.LOOP else 1.0
    kept = _require(validate_mask(args.mask, domain))
    w = WeightVector.constant(domain, x) if kept is None else WeightVector.masked(domain, x, kept)

    dist = exact_distribution(kind, domain, w, n, workers)
    lines = ["config_hex,probability"]
    lines += [f"{EdgeConfig(domain, int(i)).to_hex()},{float(p)!r}"
              for i, p in zip(dist.support, dist.probabilities)]
    out = get_result_store().write_text(args.out, "\n".join(lines) + "\n")

    try:
        partition = verify_partition_identity(domain, w, workers).model_dump(mode="json")
    except TooLarge as e:
        logger.warning(f"Partition identity skipped: {e}")
        partition = None
    _emit({
        "domain": domain.summary(),
        "kind": kind.value,
        "n": n,
        "x": x,
        "normalization": dist.normalization,
        "support_size": int(len(dist.support)),
        "mean_size": dist.mean_size(),
        "partition": partition,
    })
    return EXIT_OK, [out]


def cmd_verify(args, seed, workers) -> tuple[int, list[Path]]:
    ctx = SuiteContext(
        domain=_require(validate_domain(args.domain)),
        n=_require(validate_n(args.n)),
        x=_require(validate_x(args.x)),
        seed=seed,
        samples=_require(validate_positive_int(args.samples, "--samples")),
        workers=workers,
    )
    result = run_suite(args.suite, ctx)
    _emit(result)
    outputs = []
    if args.out:
        outputs.append(get_result_store().write_json(args.out, result))
    if not result["success"]:
        logger.error(f"Suite {args.suite} failed: {result['error'] or 'check did not hold'}")
        return EXIT_FAILED, outputs
    return EXIT_OK, outputs


def cmd_params(args, seed, workers) -> tuple[int, list[Path]]:
    n = _require(validate_n(args.n, strict=True))
    x = _require(validate_x(args.x, open_interval=True))
    _emit(derive_params(n, x).summary())
    return EXIT_OK, []


def cmd_sample(args, seed, workers) -> tuple[int, list[Path]]:
    domain = _require(validate_domain(args.domain))
    n = _require(validate_n(args.n))
    x = _require(validate_x(args.x))
    k_max = domain.num_edges if args.kmax is None else _require(validate_positive_int(args.kmax, "--kmax"))
    tail = estimate_tail(domain, n, x, args.stat, k_max, _sampler_config(args, seed),
                         measure=args.measure, workers=workers)
    out = get_result_store().write_tail(args.out, tail)
    _emit({"domain": domain.summary(), "statistic": tail.statistic.value, "measure": tail.measure.value,
           "n_samples": tail.n_samples, "out": str(out)})
    return EXIT_OK, [out]


def cmd_fit(args, seed, workers) -> tuple[int, list[Path]]:
    store = get_result_store()
    fit = fit_decay(store.read_tail(args.input))
    payload = {**fit.model_dump(mode="json"), "decays": fit.decays}
    out = store.write_json(args.out, payload)
    _emit(payload)
    return EXIT_OK, [out]


def cmd_scan(args, seed, workers) -> tuple[int, list[Path]]:
    grid = _require(validate_grid_file(args.grid))
    radius = _require(validate_positive_int(args.radius, "--radius", allow_zero=True))
    k_max = None if args.kmax is None else _require(validate_positive_int(args.kmax, "--kmax"))
    result = scan(grid, radius, _sampler_config(args, seed), statistic=args.stat, k_max=k_max, workers=workers)
    out = get_result_store().write_scan(args.out, result)
    _emit({"radius": radius, "points": len(result.points), "out": str(out)})
    return EXIT_OK, [out]


def cmd_plot(args, seed, workers) -> tuple[int, list[Path]]:
    out = plot(args.inputs, args.out)
    _emit({"out": str(out)})
    return EXIT_OK, [out]


COMMANDS = {
    "enumerate": cmd_enumerate,
    "verify": cmd_verify,
    "params": cmd_params,
    "sample": cmd_sample,
    "fit": cmd_fit,
    "scan": cmd_scan,
    "plot": cmd_plot,
}


def _parameters(args: argparse.Namespace) -> dict[str, Any]:
    return {key: value for key, value in sorted(vars(args).items()) if key not in ("log_level", "command")}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run the subcommand and write manifests; returns the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    setup_logging(args.log_level or config.log_level, run=args.command)
    ok, errors = config.validate()
    if not ok:
        for error in errors:
            print(f"[error] {error}", file=sys.stderr)
        return EXIT_USAGE

    started_at = datetime.now(timezone.utc)
    clock = time.perf_counter()
    try:
        seed = _require(validate_seed(args.seed, config.default_seed))
        workers = config.workers if args.workers is None else \
            _require(validate_positive_int(args.workers, "--workers"))
        code, outputs = COMMANDS[args.command](args, seed, workers)
    except UsageError as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_USAGE
    except HexLoopError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"[error] {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        # pydantic's ValidationError is a ValueError
        logger.error(f"{args.command} rejected its input: {e}")
        print(f"[error] {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE

    store = get_result_store()
    parameters = {**_parameters(args), "seed": seed, "workers": workers}
    for output in outputs:
        store.write_manifest(output, args.command, parameters, seed, started_at, time.perf_counter() - clock)
    logger.info(f"{args.command} finished with exit code {code}")
    return code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
