"""Command line interface.

Subcommands:
    compute   one (model, alpha, measure) point, printed as a CSV record
    sweep     run a config-file sweep and write its CSV
    models    list the model catalog

Exit codes: 0 success, 1 validation error (bad arguments, config, or a
measure with no closed form), 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .errors import (
    DegenerateCovarianceError,
    DegenerateOutputError,
    NonFiniteSampleError,
    NotPositiveSemiDefiniteError,
)
from .measures import compute_mon
from .models import MODEL_VARIANTS, builtin_model
from .moments import estimate_moments
from .sweep import (
    CSV_COLUMNS,
    DEFAULT_SAMPLES,
    Measure,
    SweepConfig,
    _record_from_result,
    derive_point_seed,
    run_sweep,
    weight_for_measure,
)

_NUMERICAL_ERRORS = (
    NotPositiveSemiDefiniteError,
    DegenerateCovarianceError,
    DegenerateOutputError,
    NonFiniteSampleError,
)


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="nlmeasure", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    compute = sub.add_parser("compute", help="evaluate one (model, alpha, measure) point")
    compute.add_argument("--model", required=True, help="catalog model name")
    compute.add_argument("--alpha", type=float, default=1.0, help="prior spread scale")
    compute.add_argument(
        "--measure",
        default="full",
        help="orig | orig_normalized | diag | full | family(a1,a2,...) | general",
    )
    compute.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    compute.add_argument("--seed", type=int, default=0, help="base seed (point seed is derived)")
    compute.add_argument("--units", default=None, help="unit variant, e.g. km_deg_kmh")

    sweep = sub.add_parser("sweep", help="run a config-file sweep")
    sweep.add_argument("--config", required=True, help="INI sweep configuration file")
    sweep.add_argument("--out", default=None, help="output CSV path (overrides config)")

    sub.add_parser("models", help="list the model catalog")
    return parser


def _cmd_compute(args) -> int:
    measure = Measure.parse(args.measure)
    if measure.kind == "general":
        raise ValueError("no closed form for general noise")
    variant = args.units or "native"
    model = builtin_model(args.model, args.alpha, None if variant == "native" else variant)
    seed = derive_point_seed(args.seed, args.model, args.alpha)
    est = estimate_moments(model, args.samples, seed)
    result = compute_mon(est, weight_for_measure(measure, est))
    record = _record_from_result(args.model, variant, args.alpha, measure, result)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerow(record.to_csv_row())
    return 0


def _cmd_sweep(args) -> int:
    config = SweepConfig.from_file(args.config)
    target = args.out or config.out
    if not target:
        raise ValueError("no output path: pass --out or set 'out' in the config")
    records = run_sweep(config, out_path=target)
    errors = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} rows to {target}" + (f" ({errors} error rows)" if errors else ""))
    return 0


def _cmd_models(_args) -> int:
    print(f"{'model':<16} {'dims (n_u,n_v,n_y)':<20} variants")
    for name, variants in MODEL_VARIANTS.items():
        model = builtin_model(name, 1.0)
        dims = ",".join(str(d) for d in model.dims)
        print(f"{name:<16} ({dims}){'':<12} {', '.join(variants)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {"compute": _cmd_compute, "sweep": _cmd_sweep, "models": _cmd_models}[args.command]
    try:
        return handler(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
