"""
CLI application for exact fixed-radius search with SNN indexes.

Subcommands: ``build``, ``query``, ``bench``, ``dbscan`` and ``model``.
Exit status is 0 on success, 1 on usage or parameter errors and 2 on data
or file errors. Logging goes to stderr; reports go to stdout.
"""

import argparse
import json
import logging
import sys
import time
from collections.abc import Callable
from pathlib import Path
from typing import NoReturn

from pydantic import ValidationError

from snn_search.bench import BenchConfig, run_bench
from snn_search.dataset import PointMatrix, as_points, zscore_standardize
from snn_search.dbscan import Backend, DbscanParams, dbscan, nmi
from snn_search.errors import DataError, ParameterError, UsageError
from snn_search.indexer import SnnIndex, build_index
from snn_search.io_persist import (
    format_labels,
    load_index,
    load_labels,
    load_matrix,
    save_index,
)
from snn_search.jinja import render_report
from snn_search.metrics import (
    MetricKind,
    MetricSpec,
    euclidean_radius,
    manhattan_query_many,
    normalize_rows,
    prepare_points,
    require_unit_rows,
    to_native_distance,
)
from snn_search.query import DEFAULT_CHUNK_SIZE, QueryResult, query_radius_many
from snn_search.radius_parser import parse_radii, parse_radius
from snn_search.theory_model import BlobModel, limit_radius, model_row

VERSION = "0.1.0"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

log = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """Argument parser that raises ``UsageError`` instead of exiting."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def radius_arg(text: str) -> float:
    try:
        return parse_radius(text)
    except ParameterError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def radii_arg(text: str) -> list[float]:
    try:
        return parse_radii(text)
    except ParameterError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _add_input_args(parser: argparse.ArgumentParser, flag: str, help_text: str) -> None:
    parser.add_argument(flag, type=Path, required=True, help=help_text)
    parser.add_argument(
        "--format",
        choices=("csv", "binary"),
        default="csv",
        help="Input file format (default: csv)",
    )
    parser.add_argument("--header", action="store_true", help="Skip the first CSV line")


def create_parser() -> argparse.ArgumentParser:
    """
    Create and configure the argument parser for the CLI.

    Returns:
        Configured ArgumentParser instance
    """
    common = CliParser(add_help=False)
    common.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Enable debug logging on stderr",
    )

    parser = CliParser(
        prog="snn-search",
        description=(
            "Exact fixed-radius nearest neighbor search by principal-direction sorting"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s build --input points.csv --output points.snni
  %(prog)s query --index points.snni --queries q.csv --radius 0.5
  %(prog)s query --index unit.snni --queries q.csv --metric angular --radius 0.30pi
  %(prog)s bench --n 10000 --d 2 --seed 1 --radii 0.02,0.05,0.14 --self-query
  %(prog)s dbscan --input data.csv --eps 0.4 --standardize --labels classes.txt
  %(prog)s model --c 0 --R 1 --s 0.5 --d 5
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    build = sub.add_parser("build", parents=[common], help="Build and save an index")
    _add_input_args(build, "--input", "Dataset to index")
    build.add_argument(
        "--metric",
        choices=[kind.value for kind in MetricKind],
        default=MetricKind.EUCLIDEAN.value,
        help="Metric the index will serve (default: euclidean)",
    )
    build.add_argument(
        "--normalize",
        action="store_true",
        help="Scale rows to unit norm before indexing (cosine/angular)",
    )
    build.add_argument("--output", type=Path, required=True, help="Index file to write")
    build.set_defaults(handler=cmd_build)

    query = sub.add_parser(
        "query",
        parents=[common],
        help="Radius queries against a saved index",
    )
    query.add_argument("--index", type=Path, required=True, help="Index file")
    _add_input_args(query, "--queries", "Query points, one per row")
    query.add_argument(
        "--radius",
        type=radius_arg,
        required=True,
        help=(
            "Radius in the metric's native unit; "
            "angles accept multiples of pi (0.30pi)"
        ),
    )
    query.add_argument(
        "--metric",
        choices=[kind.value for kind in MetricKind],
        default=MetricKind.EUCLIDEAN.value,
        help="Metric of the radius (default: euclidean)",
    )
    query.add_argument(
        "--normalize",
        action="store_true",
        help="Scale queries to unit norm",
    )
    query.add_argument(
        "--output",
        type=Path,
        default=None,
        help="Write hit lists to this file instead of stdout",
    )
    query.add_argument(
        "--workers",
        type=int,
        default=1,
        help="Query threads (default: 1)",
    )
    query.add_argument(
        "--chunk-size",
        type=int,
        default=DEFAULT_CHUNK_SIZE,
        help=f"Queries per chunk (default: {DEFAULT_CHUNK_SIZE})",
    )
    query.set_defaults(handler=cmd_query)

    bench = sub.add_parser(
        "bench",
        parents=[common],
        help="Return-ratio benchmark on synthetic data",
    )
    bench.add_argument("--synthetic", choices=("uniform", "blob"), default="uniform")
    bench.add_argument("--n", type=int, required=True, help="Number of indexed points")
    bench.add_argument("--d", type=int, required=True, help="Dimension")
    bench.add_argument(
        "--s",
        type=float,
        default=1.0,
        help="Blob elongation (default: 1)",
    )
    bench.add_argument(
        "--seed",
        type=int,
        default=0,
        help="Generator seed (default: 0)",
    )
    bench.add_argument(
        "--radii",
        type=radii_arg,
        required=True,
        help="Comma separated radii",
    )
    bench.add_argument(
        "--self-query",
        action="store_true",
        help="Query every indexed point instead of fresh points",
    )
    bench.add_argument(
        "--n-queries",
        type=int,
        default=1000,
        help="Number of fresh query points (default: 1000)",
    )
    bench.add_argument(
        "--bruteforce",
        action="store_true",
        help="Also time a matrix-vector brute-force scan",
    )
    bench.add_argument(
        "--workers",
        type=int,
        default=1,
        help="Query threads (default: 1)",
    )
    bench.add_argument("--json", action="store_true", help="One JSON object per radius")
    bench.set_defaults(handler=cmd_bench)

    clus = sub.add_parser("dbscan", parents=[common], help="DBSCAN clustering")
    _add_input_args(clus, "--input", "Dataset to cluster")
    clus.add_argument(
        "--eps",
        type=radius_arg,
        required=True,
        help="Neighborhood radius",
    )
    clus.add_argument(
        "--min-samples",
        type=int,
        default=5,
        help="Core point threshold (default: 5)",
    )
    clus.add_argument(
        "--metric",
        choices=(
            MetricKind.EUCLIDEAN.value,
            MetricKind.COSINE.value,
            MetricKind.ANGULAR.value,
        ),
        default=MetricKind.EUCLIDEAN.value,
    )
    clus.add_argument(
        "--standardize",
        action="store_true",
        help="Z-score every column before clustering",
    )
    clus.add_argument(
        "--normalize",
        action="store_true",
        help="Scale rows to unit norm",
    )
    clus.add_argument(
        "--backend",
        choices=[backend.value for backend in Backend],
        default=Backend.SNN.value,
    )
    clus.add_argument(
        "--labels",
        type=Path,
        default=None,
        help="Reference labels for NMI",
    )
    clus.add_argument(
        "--output",
        type=Path,
        default=None,
        help="Write labels to this file instead of stdout",
    )
    clus.set_defaults(handler=cmd_dbscan)

    model = sub.add_parser(
        "model",
        parents=[common],
        help="Theoretical pruning efficiency",
    )
    model.add_argument(
        "--c",
        type=float,
        default=0.0,
        help="Query offset along the long axis",
    )
    model.add_argument(
        "--R",
        dest="radius",
        type=radii_arg,
        required=True,
        help="Radius or radii",
    )
    model.add_argument("--s", type=float, required=True, help="Elongation in (0, 1]")
    model.add_argument("--d", type=int, required=True, help="Dimension >= 2")
    model.add_argument(
        "--limit-eps",
        type=float,
        default=None,
        help="Also print the radius that drives the ratio to (1 - eps)^2",
    )
    model.add_argument("--json", action="store_true", help="One JSON object per radius")
    model.set_defaults(handler=cmd_model)

    return parser


def validate_args(args: argparse.Namespace) -> tuple[bool, str]:
    """
    Validate parsed arguments.

    Args:
        args: Parsed command line arguments

    Returns:
        Boolean indicating whether arguments are valid
        String error message, if invalid
    """
    if getattr(args, "workers", 1) < 1:
        return False, f"--workers must be >= 1, got {args.workers}"

    if getattr(args, "chunk_size", 1) < 1:
        return False, f"--chunk-size must be >= 1, got {args.chunk_size}"

    if args.command == "query" and args.metric == MetricKind.MIPS:
        return False, "--metric mips has no radius semantics and cannot be queried"

    if output := getattr(args, "output", None):
        output_parent = output.parent
        if output_parent.exists() and not output_parent.is_dir():
            return (
                False,
                f"Output path parent exists, but is not a directory: {output_parent}",
            )

    return True, ""


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.WARNING)


def _write(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text, encoding="utf-8")
    log.debug("Output written to: %s", output)


def cmd_build(args: argparse.Namespace) -> int:
    points = load_matrix(args.input, args.format, args.header)
    if args.normalize:
        points = normalize_rows(points)
    points, spec = prepare_points(points, MetricSpec(kind=args.metric))
    start = time.perf_counter()
    idx = build_index(points)
    build_time = time.perf_counter() - start
    save_index(idx, args.output)
    sys.stdout.write(
        render_report(
            "build.jinja",
            path=str(args.output),
            n=idx.n,
            d=idx.d,
            metric=spec.kind.value,
            sigma1=idx.sigma1,
            sigma2=idx.sigma2,
            xi=spec.xi,
            build_time=build_time,
        )
    )
    return 0


def format_hits(qid: int, res: QueryResult) -> str:
    """
    ``qid: id:dist id:dist ...`` with ids ascending and shortest round-trip
    floats.
    """
    return f"{qid}:" + "".join(f" {i}:{dist!r}" for i, dist in res.hits)


def _run_queries(
    idx: SnnIndex, queries: PointMatrix, spec: MetricSpec, args: argparse.Namespace
) -> list[QueryResult]:
    if spec.kind is MetricKind.MANHATTAN:
        return manhattan_query_many(
            idx,
            queries,
            spec.parameter,
            chunk_size=args.chunk_size,
            workers=args.workers,
        )
    if spec.kind.needs_unit_rows:
        require_unit_rows(queries)
    results = query_radius_many(
        idx,
        queries,
        euclidean_radius(spec),
        chunk_size=args.chunk_size,
        workers=args.workers,
    )
    return [
        QueryResult(res.ids, to_native_distance(res.dists, spec.kind), res.candidates)
        for res in results
    ]


def cmd_query(args: argparse.Namespace) -> int:
    spec = MetricSpec(kind=args.metric, parameter=args.radius)
    idx = load_index(args.index)
    queries = as_points(load_matrix(args.queries, args.format, args.header), idx.d)
    if args.normalize:
        queries = normalize_rows(queries)
    start = time.perf_counter()
    results = _run_queries(idx, queries, spec, args)
    elapsed = time.perf_counter() - start

    lines = (format_hits(qid, res) + "\n" for qid, res in enumerate(results))
    _write("".join(lines), args.output)
    n_queries = len(results)
    mean_hits = mean_candidates = mean_time = None
    if n_queries:
        mean_hits = sum(len(res) for res in results) / n_queries
        mean_candidates = sum(res.candidates for res in results) / (n_queries * idx.n)
        mean_time = elapsed / n_queries
    sys.stdout.write(
        render_report(
            "query.jinja",
            n_queries=n_queries,
            radius=spec.parameter,
            metric=spec.kind.value,
            mean_hits=mean_hits,
            mean_candidates=mean_candidates,
            mean_time=mean_time,
        )
    )
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = BenchConfig(
        synthetic=args.synthetic,
        n=args.n,
        d=args.d,
        s=args.s,
        seed=args.seed,
        radii=tuple(args.radii),
        self_query=args.self_query,
        n_queries=args.n_queries,
        bruteforce=args.bruteforce,
        workers=args.workers,
    )
    rows = run_bench(config)
    if args.json:
        sys.stdout.write("".join(row.model_dump_json() + "\n" for row in rows))
    else:
        sys.stdout.write(render_report("bench.jinja", config=config, rows=rows))
    return 0


def cmd_dbscan(args: argparse.Namespace) -> int:
    params = DbscanParams(
        eps=args.eps,
        min_samples=args.min_samples,
        backend=args.backend,
    )
    points = load_matrix(args.input, args.format, args.header)
    if args.standardize:
        points = zscore_standardize(points)
    if args.normalize:
        points = normalize_rows(points)
    kind = MetricKind(args.metric)
    if kind.needs_unit_rows:
        require_unit_rows(points)
        params = params.model_copy(
            update={"eps": euclidean_radius(MetricSpec(kind=kind, parameter=args.eps))}
        )
    reference = load_labels(args.labels) if args.labels else None

    start = time.perf_counter()
    labeling = dbscan(points, params)
    elapsed = time.perf_counter() - start
    score = nmi(labeling, reference) if reference is not None else None

    _write(format_labels(labeling.labels), args.output)
    sys.stdout.write(
        render_report(
            "dbscan.jinja",
            params=params,
            n=len(labeling),
            labeling=labeling,
            score=score,
            elapsed=elapsed,
        )
    )
    return 0


def cmd_model(args: argparse.Namespace) -> int:
    rows = [
        model_row(BlobModel(s=args.s, d=args.d, c=args.c, radius=radius))
        for radius in args.radius
    ]
    limit = None
    if args.limit_eps is not None:
        r1, r2, t = limit_radius(args.c, args.s, args.d, args.limit_eps)
        limit = {"eps": args.limit_eps, "r1": r1, "r2": r2, "t": t}
    if args.json:
        lines = [row.model_dump_json() for row in rows]
        if limit is not None:
            lines.append(json.dumps(limit))
        sys.stdout.write("".join(line + "\n" for line in lines))
    else:
        sys.stdout.write(render_report("model.jinja", rows=rows, limit=limit))
    return 0


def _fail(err: Exception, code: int) -> int:
    print(f"error: {err}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the CLI application."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    configure_logging(args.verbose)
    ok, err = validate_args(args)
    if not ok:
        print(err, file=sys.stderr)
        return 1

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except (UsageError, ParameterError, ValidationError) as err:
        return _fail(err, 1)
    except (DataError, OSError) as err:
        return _fail(err, 2)


if __name__ == "__main__":
    sys.exit(main())
