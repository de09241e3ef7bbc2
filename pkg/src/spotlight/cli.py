"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 bad input data,
3 any other runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from spotlight import files
from spotlight.errors import ConfigError, DataError, DimensionError, UnsupportedMetadataError
from spotlight.multi import find_spotlights
from spotlight.optimizer import SpotlightConfig
from spotlight.oracle import PlantedSpec, gen_planted_dataset, grid_search_oracle
from spotlight.projection import ProjectionSpec, project_seeded
from spotlight.report import build_report, read_report, write_report

log = logging.getLogger("spotlight")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"size fraction must lie in (0, 1), got {text} (out of range)")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spotlight", description="Find high-loss regions of a model's representation space.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("audit", help="optimize spotlights and write a JSON report")
    a.add_argument("--embeddings", required=True, type=Path)
    a.add_argument("--losses", required=True, type=Path)
    a.add_argument("--metadata", type=Path)
    a.add_argument("--size-fraction", type=_fraction, default=0.05,
                   help="spotlight size as a fraction of N (0.05 non-vision, 0.02 vision)")
    a.add_argument("--num-spotlights", type=_positive_int, default=5)
    a.add_argument("--mode", choices=["spherical", "elliptical"], default="spherical")
    a.add_argument("--project-dim", type=_positive_int)
    a.add_argument("--seed", type=_u64, default=0)
    a.add_argument("--top-k", type=_positive_int, default=20)
    a.add_argument("--max-steps", type=_positive_int, default=3000)
    a.add_argument("--include-centers", action="store_true", help="keep centers even above 4096 dimensions")
    a.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("project", help="random-project embeddings to a flat binary file")
    p.add_argument("--embeddings", required=True, type=Path)
    p.add_argument("--target-dim", required=True, type=_positive_int)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", required=True, type=Path)

    s = sub.add_parser("summarize", help="print one spotlight of a report as tables")
    s.add_argument("--report", required=True, type=Path)
    s.add_argument("--spotlight", required=True, type=_positive_int, help="1-based spotlight number")

    g = sub.add_parser("gen-fixture", help="write a planted-cluster dataset with ground truth")
    g.add_argument("--out-dir", required=True, type=Path)
    g.add_argument("--n-background", type=_positive_int, default=4900)
    g.add_argument("--n-cluster", type=_positive_int, default=100)
    g.add_argument("--n-clusters", type=int, default=1)
    g.add_argument("--d", type=_positive_int, default=32)
    g.add_argument("--separation", type=float, default=6.0)
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--format", choices=["csv", "binary"], default="csv")

    o = sub.add_parser("oracle", help="brute-force grid search for small 1-2 dimensional datasets")
    o.add_argument("--embeddings", required=True, type=Path)
    o.add_argument("--losses", required=True, type=Path)
    o.add_argument("--size-fraction", type=_fraction, required=True)
    o.add_argument("--grid-points", type=_positive_int, default=101, help="center grid points per axis")
    o.add_argument("--log-precision-min", type=float, default=-6.0)
    o.add_argument("--log-precision-max", type=float, default=6.0)
    o.add_argument("--log-precision-num", type=_positive_int, default=61)
    return parser


def _audit(args) -> int:
    dataset = files.load_dataset(args.embeddings, args.losses, args.metadata)
    config = SpotlightConfig(
        size_fraction=args.size_fraction, mode=args.mode, max_steps=args.max_steps, seed=args.seed
    )
    config.spotlight_size(dataset.n)
    source_dim = None
    projection = None
    if args.project_dim is not None:
        spec = ProjectionSpec(dataset.d, args.project_dim, args.seed)
        source_dim = dataset.d
        log.info("projecting %d -> %d dimensions", dataset.d, args.project_dim)
        dataset = type(dataset)(project_seeded(dataset.embeddings, spec), dataset.losses, dataset.metadata)
        projection = {"source_dim": spec.source_dim, "target_dim": spec.target_dim, "seed": spec.seed}

    results = find_spotlights(dataset, config, args.num_spotlights)
    for i, r in enumerate(results, 1):
        log.info("spotlight %d: objective %.6g (mean %.6g), total weight %.1f, feasible=%s",
                 i, r.objective, r.baseline_mean_loss, r.weights.total, r.feasible)
    echo = {
        "config": config.to_dict(),
        "num_spotlights": args.num_spotlights,
        "top_k": args.top_k,
        "projection": projection,
        "inputs": {
            "embeddings": str(args.embeddings),
            "losses": str(args.losses),
            "metadata": None if args.metadata is None else str(args.metadata),
        },
    }
    report = build_report(dataset, results, echo, args.top_k, args.include_centers, source_dim)
    write_report(report, args.out)
    return EXIT_OK


def _project(args) -> int:
    X = files.read_matrix(args.embeddings)
    spec = ProjectionSpec(X.shape[1], args.target_dim, args.seed)
    files.write_binary(args.out, project_seeded(X, spec))
    return EXIT_OK


def _table(rows, headers):
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _summarize(args) -> int:
    out = sys.stdout
    report = read_report(args.report)
    if args.spotlight > len(report.spotlights):
        raise UsageError(f"report has {len(report.spotlights)} spotlights; got --spotlight {args.spotlight}")
    sp = report.spotlights[args.spotlight - 1]
    ds = report.dataset_summary
    print(f"Spotlight {sp.index} ({sp.mode}): weighted loss {sp.objective:.4g} vs mean {ds.mean_loss:.4g}; "
          f"total weight {sp.total_weight:.1f} (size {sp.size:.1f}); "
          f"feasible={sp.feasible}{' DEGENERATE' if sp.degenerate else ''}", file=out)
    print("\nTop-weighted examples", file=out)
    rows = [(e.index, f"{e.weight:.4f}", f"{e.loss:.4f}", e.label or "", e.category or "",
             " ".join((e.tokens or [])[:6])) for e in sp.top]
    print(_table(rows, ["index", "weight", "loss", "label", "category", "tokens"]), file=out)
    if sp.tokens:
        print("\nOver-represented tokens", file=out)
        rows = [(t.token, f"{t.spotlight_freq:.3f}", f"{t.baseline_freq:.3f}", f"{t.ratio:.2f}") for t in sp.tokens]
        print(_table(rows, ["token", "spotlight", "dataset", "ratio"]), file=out)
    if sp.categories:
        print("\nCategories", file=out)
        rows = [(c.category, f"{c.spotlight_freq:.3f}", f"{c.baseline_freq:.3f}", f"{c.mean_loss:.4f}")
                for c in sp.categories]
        print(_table(rows, ["category", "spotlight", "dataset", "mean loss"]), file=out)
    print("\nHighest losses (baseline)", file=out)
    rows = [(e.index, f"{e.loss:.4f}", e.label or "", e.category or "") for e in report.high_loss_baseline]
    print(_table(rows, ["index", "loss", "label", "category"]), file=out)
    return EXIT_OK


def _gen_fixture(args) -> int:
    spec = PlantedSpec(
        n_background=args.n_background,
        n_cluster=args.n_cluster,
        n_clusters=args.n_clusters,
        d=args.d,
        cluster_separation=args.separation,
        seed=args.seed,
    )
    dataset, truth = gen_planted_dataset(spec)
    paths = files.save_dataset(args.out_dir, dataset, args.format)
    truth_path = args.out_dir / "truth.json"
    truth_path.write_text(
        json.dumps({"spec": spec.to_dict(), "clusters": [t.tolist() for t in truth]}, indent=1) + "\n"
    )
    for role, path in paths.items():
        print(f"{role}: {path}")
    print(f"truth: {truth_path}")
    return EXIT_OK


def _oracle(args) -> int:
    dataset = files.load_dataset(args.embeddings, args.losses)
    S = SpotlightConfig(size_fraction=args.size_fraction).spotlight_size(dataset.n)
    X = dataset.embeddings
    axes = [np.linspace(X[:, j].min(), X[:, j].max(), args.grid_points) for j in range(dataset.d)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dataset.d)
    lps = np.linspace(args.log_precision_min, args.log_precision_max, args.log_precision_num)
    params, objective = grid_search_oracle(dataset, S, centers, lps)
    print(json.dumps({
        "center": params.center.tolist(),
        "log_precision": params.log_precision,
        "objective": objective,
        "size": S,
    }))
    return EXIT_OK


COMMANDS = {
    "audit": _audit,
    "project": _project,
    "summarize": _summarize,
    "gen-fixture": _gen_fixture,
    "oracle": _oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"spotlight {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, UnsupportedMetadataError, FileNotFoundError) as exc:
        print(f"spotlight {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"spotlight {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
