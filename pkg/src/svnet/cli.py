"""Command-line entry point: ``svnet <command> ...``.

``run`` executes the whole pipeline from a JSON config. The other commands
run one stage at a time and pass data between stages through the same files
the pipeline writes.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .community import detect_communities
from .enrichment import characterize_clusters, link_combination_enrichment, write_enrichment_tsv
from .errors import StageError, SvnetError, UsageError
from .market_data import WINDOW_POLICIES, filter_active, load_trades, read_meta
from .network import assemble_network, link_weight_graph, strip_opposite_links
from .pipeline import EXIT_CODES, RunConfig, _prefixed, _stage, run_pipeline
from .plots import render_ccdf, render_microarray
from .serialize import (FORMATS, export_network, read_clusters_json, read_network_tsv,
                        write_clusters_json, write_json)
from .states import build_state_matrix, write_state_csv
from .synth import SynthSpec, generate, write_synth
from .validation import TestConfig, enumerate_tests, validate, write_tests_tsv

log = logging.getLogger("svnet")
USAGE_EXIT = 2


def _add_inputs(p):
    p.add_argument("--trades", required=True, help="trades CSV")
    p.add_argument("--meta", help="investor category CSV")
    p.add_argument("--windows", help="activity windows CSV")
    p.add_argument("--window-policy", choices=WINDOW_POLICIES)
    p.add_argument("--min-active-days", type=int, default=20)
    p.add_argument("--theta", type=float, default=0.01)


def _load(args):
    with _stage("ingest"):
        ds = load_trades(args.trades, args.meta, args.windows, args.window_policy)
    with _stage("filter"):
        ds = filter_active(ds, args.min_active_days)
    with _stage("encode"):
        m = build_state_matrix(ds, args.theta)
    return ds, m


def cmd_run(args):
    with _stage("config"):
        cfg = RunConfig.from_json(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    manifest = run_pipeline(cfg)
    for correction, info in manifest["networks"].items():
        log.info("%s: %d tests validated, %d links, %d clusters", correction,
                 info["tests_validated"], info["links_validated"], info["clusters"])


def cmd_synth(args):
    with _stage("config"):
        spec = SynthSpec.from_json(args.spec)
    ds, truth = generate(spec, args.seed)
    paths = write_synth(ds, truth, args.out)
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))


def cmd_encode(args):
    ds, m = _load(args)
    with _stage("encode"):
        write_state_csv(m, args.out, ds.dates)
    log.info("%d investors, %d state entries", ds.n_investors, len(m))


def cmd_validate(args):
    ds, m = _load(args)
    with _stage("validate"):
        tests = enumerate_tests(m, ds)
        validated = validate(tests, TestConfig(ds.n_investors, args.p_threshold, args.correction))
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_tests_tsv(validated, out / "validated_tests.tsv")
    with _stage("network"):
        net = assemble_network(validated, ds.categories, args.correction, nodes=ds.investors)
        export_network(net, args.format, out / f"network.{args.format}")
    log.info("%d tests, %d validated, %d links", len(tests), len(validated), len(net.links))


def cmd_communities(args):
    with _stage("network"):
        meta = read_meta(args.meta) if args.meta else None
        net = read_network_tsv(args.network, meta)
        stripped = strip_opposite_links(net)
    with _stage("community"):
        part = detect_communities(link_weight_graph(stripped), seed=args.seed,
                                  restarts=args.restarts)
        write_clusters_json(part, args.out)
    log.info("%d clusters, codelength %.6f bits", part.n_clusters, part.codelength)


def cmd_enrich(args):
    with _stage("enrich"):
        part = read_clusters_json(args.clusters)
        meta = read_meta(args.meta)
        rows = [_prefixed(r, "category")
                for r in characterize_clusters(part, meta, args.p_threshold)]
        if args.network:
            net = strip_opposite_links(read_network_tsv(args.network, meta))
            rows += [_prefixed(r, "combination")
                     for r in link_combination_enrichment(part, net, args.p_threshold)]
        rows.sort(key=lambda r: (r.cluster_id, r.attribute, r.direction))
        write_enrichment_tsv(rows, args.out)
    log.info("%d tests, %d significant", len(rows), sum(r.significant for r in rows))


def cmd_report(args):
    ds, m = _load(args)
    with _stage("report"):
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary = {"ccdf": render_ccdf(ds, out / "activity_ccdf.svg")}
        if args.clusters:
            part = read_clusters_json(args.clusters)
            summary["microarray"] = render_microarray(m, part, out / "microarray.svg",
                                                      max_clusters=args.max_clusters)
        if args.network:
            if args.format not in FORMATS:
                raise UsageError(f"unknown network format {args.format!r}")
            net = read_network_tsv(args.network, ds.categories)
            export_network(net, args.format, out / f"network.{args.format}")
        write_json(summary, out / "report.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="synthetic dataset with planted groups")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="dump the daily state matrix")
    _add_inputs(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("validate", help="pairwise tests and validated network")
    _add_inputs(p)
    p.add_argument("--p-threshold", type=float, default=0.01)
    p.add_argument("--correction", choices=("bonferroni", "fdr"), default="bonferroni")
    p.add_argument("--format", choices=FORMATS, default="tsv")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("communities", help="map-equation clusters of a network TSV")
    p.add_argument("--network", required=True)
    p.add_argument("--meta")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("enrich", help="category and link-combination enrichment")
    p.add_argument("--clusters", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--network")
    p.add_argument("--p-threshold", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("report", help="activity CCDF, microarray plot, network export")
    _add_inputs(p)
    p.add_argument("--clusters")
    p.add_argument("--max-clusters", type=int, default=30)
    p.add_argument("--network")
    p.add_argument("--format", default="graphml")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        log.error("%s", exc)
        return EXIT_CODES.get(exc.stage, 1)
    except UsageError as exc:
        log.error("%s", exc)
        return USAGE_EXIT
    except SvnetError as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
