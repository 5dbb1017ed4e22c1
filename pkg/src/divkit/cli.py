from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from dotenv import load_dotenv
from pydantic import ValidationError

from . import DivkitError, DomainError, ParseError, RejectedInput, UnknownIdentifier
from .config import (
    DEFAULT_SCAN_TOLERANCE,
    DEFAULT_SEARCH_BUDGET,
    MAX_DIMENSION,
    VerifyDefaults,
)
from .core import logger
from .differences import (
    ChainReport,
    DifferenceId,
    InequalityChain,
    chain_registry,
    run_chains,
    select_chains,
)
from .distributions import (
    DistributionPair,
    PairBatch,
    ValidationPolicy,
    load_pairs,
    parse_values,
    sample_pair_batch,
    validate,
)
from .generators import GridSpec
from .measures import NORMALIZED, MeasureId, evaluate, xi, zeta
from .reporting import build_report, render_csv, render_json, render_plot_csv, render_table, write_output
from .verification import (
    K2_CANDIDATES,
    MONOTONE_GRID,
    AuxFunctionId,
    GRatioId,
    ScanReport,
    counterexample_search,
    function_label,
    generator_consistency,
    parse_function,
    plot_data,
    power_mean_scan,
    proposition_chains,
    ratio_sup,
    scan_function,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

CONSISTENCY_ORDERS = (-1.0, 0.0, 0.5, 1.0, 2.0)
# Printed k2 forms kept for the record; only the derived form gates a scan.
NON_GATING_SCANS = {AuxFunctionId.K2.value, AuxFunctionId.K2_PLUS3.value}


def _dims(text: str) -> Tuple[int, int]:
    """'2..10' or '5'."""
    try:
        low, _, high = text.partition("..")
        dims = (int(low), int(high or low))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 2..10, got {text!r}") from None
    if not 2 <= dims[0] <= dims[1] <= MAX_DIMENSION:
        raise argparse.ArgumentTypeError(f"dims must satisfy 2 <= a <= b <= {MAX_DIMENSION}")
    return dims


def _grid(text: str) -> GridSpec:
    """'1e-6..1e6:100000'; a trailing ':linear' switches the spacing."""
    try:
        bounds, _, rest = text.partition(":")
        low, _, high = bounds.partition("..")
        points, _, spacing = rest.partition(":")
        return GridSpec(
            x_min=float(low),
            x_max=float(high),
            points=int(points),
            spacing=spacing or "log",
        )
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _tolerance(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value >= 0.0:
        raise argparse.ArgumentTypeError("tolerance must be >= 0")
    return value


def _split(values: Optional[Sequence[str]]) -> List[str]:
    out: List[str] = []
    for value in values or ():
        out.extend(item.strip() for item in value.split(",") if item.strip())
    return out


def _policy(args) -> Optional[ValidationPolicy]:
    if args.policy is None and args.zero_floor is None:
        return None
    try:
        return ValidationPolicy(mode=args.policy or "renormalize", zero_floor=args.zero_floor or 0.0)
    except ValidationError as exc:
        raise RejectedInput(str(exc.errors()[0]["msg"])) from exc


def _input_format(args) -> str:
    if args.format:
        return args.format
    return "json" if Path(args.input).suffix.lower() == ".json" else "csv"


def _read_pairs(args) -> List[DistributionPair]:
    policy = _policy(args)
    if args.input:
        return load_pairs(args.input, _input_format(args), policy)
    if args.p is None or args.q is None:
        raise ParseError("give --p and --q, or --input")
    policy = policy or ValidationPolicy()
    p = validate(parse_values(args.p, locus="--p"), policy)
    q = validate(parse_values(args.q, locus="--q"), policy)
    if len(p) != len(q):
        raise RejectedInput(f"P and Q differ in length ({len(p)} vs {len(q)})")
    return [DistributionPair(p=p, q=q)]


def _defaults(args) -> VerifyDefaults:
    return VerifyDefaults.load(args.config)


def _emit(args, report: Dict, text: Optional[str] = None, csv_text: Optional[str] = None) -> None:
    fmt = args.output_format
    if fmt == "text" and text is not None:
        write_output(text, args.output)
    elif fmt == "csv" and csv_text is not None:
        write_output(csv_text, args.output)
    else:
        write_output(render_json(report), args.output)


def _cmd_compute(args) -> int:
    pairs = _read_pairs(args)
    requested = _split(args.measure) or ["all"]
    orders = parse_values(",".join(_split(args.s)), locus="--s") if args.s else []
    families = [name for name in requested if name in ("zeta", "xi")]
    if families and not orders:
        raise ParseError("zeta and xi need --s", locus="--measure")
    if "all" in requested:
        measures = list(MeasureId)
    else:
        measures = [MeasureId.parse(name) for name in requested if name not in ("zeta", "xi")]

    entries = []
    rows: List[Tuple[str, float]] = []
    csv_rows: List[Tuple[int, str, float]] = []
    for index, pair in enumerate(pairs):
        values = {m.value: evaluate(m, pair) for m in measures}
        family_values = {
            name: {f"{s:g}": (zeta if name == "zeta" else xi)(s, pair) for s in orders}
            for name in families
        }
        normalized = [
            {"rank": m.rank, "label": m.label, "value": m.value(pair)} for m in NORMALIZED
        ]
        entries.append(
            {
                "index": index,
                "p": list(pair.p.values),
                "q": list(pair.q.values),
                "measures": values,
                "families": family_values,
                "normalized": normalized,
            }
        )
        block: List[Tuple[str, float]] = [(name, value) for name, value in values.items()]
        for name, by_order in family_values.items():
            block.extend((f"{name}({s})", value) for s, value in by_order.items())
        block.extend((f"normalized[{m['rank']}] {m['label']}", m["value"]) for m in normalized)
        prefix = f"pair[{index}] " if len(pairs) > 1 else ""
        rows.extend((prefix + label, value) for label, value in block)
        csv_rows.extend((index, label, value) for label, value in block)

    report = build_report("compute", pairs=entries)
    _emit(
        args,
        report,
        text=render_table(rows),
        csv_text=render_csv(("pair", "quantity", "value"), csv_rows),
    )
    return EXIT_OK


def _verification_chains(names: List[str]) -> List[InequalityChain]:
    propositions = proposition_chains()
    if not names:
        return list(chain_registry()) + propositions
    by_name = {chain.name: chain for chain in propositions}
    rest = select_chains([name for name in names if name not in by_name])
    selected: List[InequalityChain] = []
    for name in dict.fromkeys(names):
        if name in by_name:
            selected.append(by_name[name])
        else:
            selected.extend(chain for chain in rest if chain.name == name)
    return selected


def _sampled_batches(samples: int, dims: Tuple[int, int], seed: int) -> List[PairBatch]:
    return [sample_pair_batch(samples, n, seed) for n in range(dims[0], dims[1] + 1)]


def _cmd_verify(args) -> int:
    defaults = _defaults(args)
    samples = args.samples or defaults.samples
    dims = args.dims or defaults.dims
    seed = defaults.seed if args.seed is None else args.seed
    tol = defaults.tolerance if args.tol is None else args.tol

    chains = _verification_chains(_split(args.chain))
    if args.input or args.p is not None:
        pairs: Union[List[DistributionPair], List[PairBatch]] = _read_pairs(args)
    else:
        pairs = _sampled_batches(samples, dims, seed)
    reports: List[ChainReport] = run_chains(chains, pairs, tol)
    sups = [ratio_sup(gid, pairs) for gid in GRatioId]

    searches = []
    if args.search_budget:
        result = counterexample_search(
            (12, DifferenceId.parse("Jd")),
            (Fraction(1, 4), DifferenceId.parse("PsiDelta")),
            args.search_budget,
            seed,
            dims=dims,
        )
        searches.append(result)

    gating = [r.name for r in reports if r.gates and not r.passed]
    gating += [f"sup:{s.function}" for s in sups if not s.within_limit]
    recorded = [r.name for r in reports if not r.gates and not r.passed]
    if recorded:
        logger.warning("non-gating chains failed", chains=recorded)
    report = build_report(
        "verify",
        seed=seed,
        tolerance=tol,
        chains=reports,
        samples=samples,
        dims=list(dims),
        searches=searches,
        ratio_sups=sups,
        gating_failures=gating,
        passed=not gating,
    )
    lines = [
        (f"{r.name} [{r.provenance}] {'PASS' if r.passed else 'FAIL'} failures={r.failure_count}", r.worst_slack)
        for r in reports
    ]
    lines += [
        (f"sup {s.ratio} <= {gid.limit} {'PASS' if s.within_limit else 'FAIL'} used={s.used}", s.sup)
        for gid, s in zip(GRatioId, sups)
    ]
    _emit(args, report, text=render_table(lines))
    return EXIT_OK if not gating else EXIT_FAILED


def _scan_ids(names: List[str]) -> List[Union[AuxFunctionId, GRatioId]]:
    if not names:
        return list(AuxFunctionId) + list(GRatioId)
    ids = [parse_function(name) for name in names]
    if any(fid in K2_CANDIDATES for fid in ids):
        ids.extend(fid for fid in K2_CANDIDATES if fid not in ids)
    return ids


def _scan_grid(args, fid: Union[AuxFunctionId, GRatioId], defaults: VerifyDefaults) -> GridSpec:
    if args.grid is not None:
        return args.grid
    if isinstance(fid, GRatioId):
        return MONOTONE_GRID
    scan = defaults.scan
    return GridSpec(x_min=scan.x_min, x_max=scan.x_max, points=scan.points, spacing=scan.spacing)


def _cmd_scan(args) -> int:
    defaults = _defaults(args)
    ids = _scan_ids(_split(args.functions))
    tol = DEFAULT_SCAN_TOLERANCE if args.tol is None else args.tol
    reports: List[ScanReport] = []
    series = {}
    for fid in ids:
        grid = _scan_grid(args, fid, defaults)
        reports.append(scan_function(fid, grid, tol, with_limit=args.limits))
        if args.plot_data:
            series[function_label(fid)] = plot_data(fid, grid)
    if args.consistency:
        for family in ("phi", "psi"):
            reports.extend(generator_consistency(family, s) for s in CONSISTENCY_ORDERS)
    if args.power_mean:
        reports.append(power_mean_scan())
    if args.plot_data:
        write_output(render_plot_csv(series), args.plot_data)

    gating = [r.function for r in reports if not r.passed and r.function not in NON_GATING_SCANS]
    report = build_report(
        "scan",
        tolerance=tol,
        scans=reports,
        gating_failures=gating,
        passed=not gating,
    )
    lines = [
        (f"{r.function} {'PASS' if r.passed else 'FAIL'} argmin={r.argmin:.17g} min", r.min_value)
        for r in reports
    ]
    _emit(args, report, text=render_table(lines))
    return EXIT_OK if not gating else EXIT_FAILED


def _cmd_list(args) -> int:
    lines: List[str] = []
    if args.what in ("all", "chains"):
        for chain in list(chain_registry()) + proposition_chains():
            lines.append(f"chain\t{chain.name}\t{chain.provenance}\t{chain.statement}")
    if args.what in ("all", "measures"):
        for measure in MeasureId:
            lines.append(f"measure\t{measure.value}\t{measure.symbol}")
    if args.what in ("all", "functions"):
        for fid in list(AuxFunctionId) + list(GRatioId):
            lines.append(f"function\t{function_label(fid)}")
    print("\n".join(lines))
    return EXIT_OK


def _add_input(s: argparse.ArgumentParser) -> None:
    s.add_argument("--p", help="comma-separated probabilities")
    s.add_argument("--q", help="comma-separated probabilities")
    s.add_argument("--input", help="CSV or JSON file of distribution pairs")
    s.add_argument("--format", choices=("csv", "json"))
    s.add_argument("--policy", choices=("reject", "renormalize"))
    s.add_argument("--zero-floor", type=float)


def _add_output(s: argparse.ArgumentParser, default: str) -> None:
    s.add_argument("--output", help="write the report here instead of stdout")
    s.add_argument("--output-format", choices=("text", "json", "csv"), default=default)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="divkit", description="Symmetric divergence measures and their inequalities")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("compute", help="evaluate measures on given distributions")
    _add_input(s)
    s.add_argument("--measure", action="append", help="measure id or symbol, 'all', 'zeta' or 'xi'")
    s.add_argument("--s", action="append", help="family parameter(s) for zeta and xi")
    _add_output(s, "text")
    s.set_defaults(func=_cmd_compute)

    s = sub.add_parser("verify", help="check the inequality chains on random or given pairs")
    _add_input(s)
    s.add_argument("--chain", action="append", help="chain name(s); default every chain")
    s.add_argument("--samples", type=_positive_int, help="pairs per dimension")
    s.add_argument("--dims", type=_dims, help="dimension range, e.g. 2..10")
    s.add_argument("--seed", type=_seed)
    s.add_argument("--tol", type=_tolerance)
    s.add_argument("--config", help="YAML defaults file (default: $DIVKIT_CONFIG or divkit.yml)")
    s.add_argument(
        "--search-budget",
        type=int,
        nargs="?",
        const=DEFAULT_SEARCH_BUDGET,
        default=0,
        help="also look for pairs ordering 12*D_Jd and D_PsiDelta/4 both ways",
    )
    _add_output(s, "json")
    s.set_defaults(func=_cmd_verify)

    s = sub.add_parser("scan", help="grid scans of auxiliary functions and g-ratios")
    s.add_argument("--functions", action="append", help="m1..m3, k1..k7, ineq15..ineq22, g:<ratio>")
    s.add_argument("--grid", type=_grid, help="x_min..x_max:points[:linear]")
    s.add_argument("--tol", type=_tolerance)
    s.add_argument("--config", help="YAML defaults file (default: $DIVKIT_CONFIG or divkit.yml)")
    s.add_argument("--limits", action="store_true", help="extrapolate g-ratio limits at x = 1")
    s.add_argument("--consistency", action="store_true", help="check generator second derivatives")
    s.add_argument("--power-mean", action="store_true", help="check power-mean monotonicity")
    s.add_argument("--plot-data", help="CSV path for (function, x, value) samples")
    _add_output(s, "json")
    s.set_defaults(func=_cmd_scan)

    s = sub.add_parser("list", help="print chain, measure and scan-function names")
    s.add_argument("what", nargs="?", choices=("all", "chains", "measures", "functions"), default="all")
    s.set_defaults(func=_cmd_list)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RejectedInput, ParseError, UnknownIdentifier, DomainError) as exc:
        logger.error("invalid input", command=args.cmd, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivkitError as exc:
        logger.error("command failed", command=args.cmd, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
