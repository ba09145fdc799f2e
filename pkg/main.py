#!/usr/bin/env python3
"""
cfkit: C-FISTA solvers, baselines and benchmark tooling.

Usage:
    python main.py gen --model lasso --out data/gl
    python main.py solve data/gl --algorithm cfista --trace gl-cfista.csv
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from cfkit import __version__
from cfkit.config import Config
from cfkit.data import DESK_SHAPES, MODELS, GenSpec, generate, load_dataset, save_dataset
from cfkit.engine import SolverConfig
from cfkit.errors import (
    EXIT_CHECK_FAILED,
    EXIT_IO,
    EXIT_NOT_CONVERGED,
    EXIT_USAGE,
    CFKitError,
    MaxItersExceeded,
)
from cfkit.models import FLAVORS, VIEWS
from cfkit.session import ALGORITHMS, SolveSession, load_reference, save_reference
from cfkit.trace import RunManifest, write_manifest, write_trace

logger = logging.getLogger("cfkit.cli")

# Exit codes
EXIT_SUCCESS = 0

_json_mode = False


def _eprint(*args, **kwargs):
    """Print to stderr (for errors)."""
    print(*args, file=sys.stderr, **kwargs)


def _info(*args, **kwargs):
    """Print diagnostic info: to stderr in JSON mode, stdout otherwise."""
    if _json_mode:
        print(*args, file=sys.stderr, **kwargs)
    else:
        print(*args, **kwargs)


def _json_event(event_type, **fields):
    """Write a single JSONL event line to stdout."""
    print(json.dumps({"type": event_type, **fields}, ensure_ascii=False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfkit",
        description="cfkit: accelerated composite optimization for group-sparse models",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    python main.py gen --model lasso --m 800 --n 400 --group-size 10 --seed 7 --out data/gl
    python main.py gen --model lasso --group-size 10 --overlap-stride 5 --out data/osgl
    python main.py gen --model logistic --out data/sglr
    python main.py reference data/gl
    python main.py solve data/gl --algorithm fista --reference data/gl/reference --trace gl-fista.csv
    python main.py check data/gl
        """
    )
    parser.add_argument("--version", action="version", version=f"cfkit {__version__}")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help="Set the logging level (default: LOG_LEVEL or INFO)"
    )
    parser.add_argument(
        "--json",
        action="store_true",
        help="Output structured JSONL to stdout (one JSON object per line)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("--model", choices=MODELS, default="lasso", help="Dataset kind (default: lasso)")
    gen.add_argument("--m", type=int, help="Rows (default: 800 lasso, 100 logistic)")
    gen.add_argument("--n", type=int, help="Columns (default: 400 lasso, 500 logistic)")
    gen.add_argument("--group-size", type=int, default=10, help="Group size (default: 10)")
    gen.add_argument("--overlap-stride", type=int, default=0,
                     help="Offset between consecutive group starts; 0 for disjoint groups (default: 0)")
    gen.add_argument("--delta", type=float, default=None, help="Noise scale (default: CFKIT_NOISE_DELTA)")
    gen.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    gen.add_argument("--out", required=True, help="Output dataset directory")

    def add_problem_args(p):
        p.add_argument("dataset", help="Dataset directory")
        p.add_argument("--flavor", choices=FLAVORS, help="Lasso flavor (default: inferred from the dataset)")
        p.add_argument("--gamma1", type=float, help="Group penalty weight (default: dataset default)")
        p.add_argument("--gamma2", type=float, help="l1 penalty weight (default: dataset default)")
        p.add_argument("--mu", type=float, help="Strong convexity modulus (default: estimated)")
        p.add_argument("--lipschitz", type=float, help="Gradient Lipschitz constant (default: estimated)")
        p.add_argument("--view", choices=VIEWS, default="identity",
                       help="Constant convention for Lasso problems (default: identity)")

    solve = sub.add_parser("solve", help="Run a solver and write its convergence trace")
    add_problem_args(solve)
    solve.add_argument("--algorithm", choices=list(ALGORITHMS.keys()), default="cfista",
                       help="Solver (default: cfista)")
    solve.add_argument("--tol", type=float, default=None, help="Gradient-mapping tolerance (default: CFKIT_TOLERANCE)")
    solve.add_argument("--max-iter", type=int, default=None, help="Iteration cap (default: CFKIT_MAX_ITERS)")
    solve.add_argument("--trace", help="Trace CSV path (default: <dataset>/trace-<algorithm>.csv)")
    solve.add_argument("--reference", help="Reference directory from 'reference'; fills the gap column")
    solve.add_argument("--manifest", help="Manifest path (default: <trace>.manifest.json)")
    solve.add_argument("--timing", action="store_true", default=None,
                       help="Record elapsed_ms in the trace (default: CFKIT_TRACE_TIMING)")

    reference = sub.add_parser("reference", help="Compute a high-accuracy reference optimum")
    add_problem_args(reference)
    reference.add_argument("--tol", type=float, default=None,
                           help="Tolerance (default: CFKIT_REFERENCE_TOLERANCE)")
    reference.add_argument("--max-iter", type=int, default=None,
                           help="Iteration cap (default: CFKIT_REFERENCE_MAX_ITERS)")
    reference.add_argument("--out", help="Reference directory (default: <dataset>/reference)")

    check = sub.add_parser("check", help="Verify the Lyapunov contraction and geometric envelope")
    check.add_argument("dataset", help="Dataset directory")
    check.add_argument("--reference", help="Reference directory (default: <dataset>/reference)")
    check.add_argument("--max-iter", type=int, default=None, help="Iterations to replay (default: CFKIT_MAX_ITERS)")
    check.add_argument("--tol", type=float, default=None, help="Stop the replay at this residual")
    check.add_argument("--mu", type=float, help="Strong convexity modulus (default: estimated)")
    check.add_argument("--lipschitz", type=float, help="Gradient Lipschitz constant (default: estimated)")
    check.add_argument("--theta-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def _solver_config(args, **overrides) -> SolverConfig:
    kwargs = {}
    if getattr(args, "tol", None) is not None:
        kwargs["tolerance"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        kwargs["max_iters"] = args.max_iter
    kwargs.update(overrides)
    return SolverConfig(**kwargs)


def _session(args, dataset, config: SolverConfig, **fixed) -> SolveSession:
    options = dict(
        flavor=getattr(args, "flavor", None),
        gamma1=getattr(args, "gamma1", None),
        gamma2=getattr(args, "gamma2", None),
        mu=args.mu,
        lipschitz=args.lipschitz,
        view=getattr(args, "view", "identity"),
    )
    options.update(fixed)
    return SolveSession(dataset, config=config, **options)


def _reference_dir(args) -> str:
    path = args.reference or os.path.join(args.dataset, "reference")
    return path if os.path.isdir(path) else os.path.dirname(path)


def cmd_gen(args) -> int:
    m_default, n_default = DESK_SHAPES[args.model]
    spec = GenSpec(
        m=m_default if args.m is None else args.m,
        n=n_default if args.n is None else args.n,
        group_size=args.group_size,
        overlap_stride=args.overlap_stride,
        delta=Config.NOISE_DELTA if args.delta is None else args.delta,
        seed=args.seed,
        model=args.model,
    )
    dataset = generate(spec)
    save_dataset(dataset, args.out)
    if _json_mode:
        _json_event("dataset", path=args.out, m=spec.m, n=spec.n, model=spec.model, groups=len(dataset.groups))
    else:
        print(args.out)
    return EXIT_SUCCESS


def cmd_solve(args, argv: List[str]) -> int:
    dataset = load_dataset(args.dataset)
    session = _session(args, dataset, _solver_config(args), algorithm=args.algorithm)

    reference_objective = None
    if args.reference:
        ref = load_reference(_reference_dir(args))
        if (ref.flavor, ref.gamma1, ref.gamma2) != (session.flavor, session.gamma1, session.gamma2):
            logger.warning(
                f"Reference was computed for {ref.flavor} with gammas ({ref.gamma1:g}, {ref.gamma2:g}); "
                f"gaps may be meaningless"
            )
        reference_objective = ref.objective

    result = session.run()
    exit_status = EXIT_SUCCESS
    try:
        result.raise_for_status()
    except MaxItersExceeded as e:
        _eprint(f"Not converged: {e}")
        exit_status = EXIT_NOT_CONVERGED

    trace_path = args.trace or os.path.join(args.dataset, f"trace-{args.algorithm}.csv")
    timing = Config.TRACE_TIMING if args.timing is None else args.timing
    rows = write_trace(trace_path, result.trace, reference_objective, timing)
    manifest_path = args.manifest or os.path.splitext(trace_path)[0] + ".manifest.json"
    params = result.params
    manifest = RunManifest(
        command=["cfkit"] + list(argv),
        dataset=args.dataset,
        algorithm=args.algorithm,
        flavor=session.flavor,
        mu=session.mu,
        lipschitz=session.lipschitz,
        theta=params.theta,
        alpha=params.alpha,
        big_c=params.big_c,
        tolerance=session.config.tolerance,
        iterations=result.iterations,
        final_objective=result.final_objective,
        wall_time=result.wall_time,
        exit_status=exit_status,
        status=result.status,
        trace=trace_path,
        reference_objective=reference_objective,
        extra={
            "gamma1": session.gamma1,
            "gamma2": session.gamma2,
            "gamma_rule": dataset.meta.get("gamma_rule"),
            "view": args.view,
            "residual": result.residual,
        },
    )
    write_manifest(manifest, manifest_path)

    if _json_mode:
        _json_event(
            "result",
            algorithm=args.algorithm,
            flavor=session.flavor,
            status=result.status,
            iterations=result.iterations,
            final_objective=result.final_objective,
            residual=result.residual,
            trace=trace_path,
            manifest=manifest_path,
        )
    else:
        print(f"{args.algorithm} on {session.flavor}: {result.status} after {result.iterations} iterations")
        print(f"  objective {result.final_objective!r}, residual {result.residual:.3e}")
        _info(f"Trace ({rows} rows) saved to: {trace_path}")
        _info(f"Manifest saved to: {manifest_path}")
    return exit_status


def cmd_reference(args) -> int:
    dataset = load_dataset(args.dataset)
    session = _session(args, dataset, SolverConfig())
    try:
        ref = session.reference(tolerance=args.tol, max_iters=args.max_iter)
    except MaxItersExceeded as e:
        _eprint(f"Reference run did not converge: {e}")
        return EXIT_NOT_CONVERGED
    out = args.out or os.path.join(args.dataset, "reference")
    save_reference(ref, out)
    if _json_mode:
        _json_event("reference", path=out, objective=ref.objective, iterations=ref.iterations,
                    residual=ref.residual, status=ref.status)
    else:
        print(f"Reference optimum {ref.objective!r} ({ref.status}, {ref.iterations} iterations)")
        _info(f"Saved to: {out}")
    return EXIT_SUCCESS


def cmd_check(args) -> int:
    dataset = load_dataset(args.dataset)
    ref = load_reference(_reference_dir(args))
    config = _solver_config(args)
    session = _session(args, dataset, config, flavor=None if ref.flavor == "sglr" else ref.flavor,
                       gamma1=ref.gamma1, gamma2=ref.gamma2, view="identity")
    report = session.certify(ref.x, ref.objective, theta_scale=args.theta_scale)

    checks = [
        ("contraction", report.contraction_ok, report.contraction_violation),
        ("envelope", report.envelope_ok, report.envelope_violation),
    ]
    for name, passed, where in checks:
        if _json_mode:
            _json_event("check", assertion=name, passed=passed, first_violation=where,
                        iterations=len(report.lyapunov_values) - 1, theta=report.theta)
        else:
            suffix = "" if passed else f" (first violation at iteration {where})"
            print(f"{name}: {'PASS' if passed else 'FAIL'}{suffix}")
    return EXIT_SUCCESS if report.passed else EXIT_CHECK_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the cfkit command line."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    global _json_mode
    _json_mode = args.json

    try:
        if args.log_level:
            Config.LOG_LEVEL = args.log_level
        Config.setup_logging()
        Config.validate()

        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args, argv)
        if args.command == "reference":
            return cmd_reference(args)
        return cmd_check(args)

    except CFKitError as e:
        _eprint(f"Error: {e}")
        return e.exit_code
    except OSError as e:
        _eprint(f"I/O error: {e}")
        return EXIT_IO
    except ValueError as e:
        _eprint(f"Invalid arguments: {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
