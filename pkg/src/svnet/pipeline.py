"""End-to-end run: ingest, encode, validate, network, communities, enrichment, report.

Artifacts are written to a staging directory and moved into the output
directory only when every stage succeeds. The manifest records parameters,
per-stage counts and SHA-256 digests of every artifact; it carries no
timestamps, so identical inputs give a byte-identical manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

from . import __version__
from .community import compare_partitions, detect_communities
from .enrichment import characterize_clusters, link_combination_enrichment, write_enrichment_tsv
from .errors import ConfigurationError, StageError, SvnetError
from .market_data import filter_active, load_trades
from .network import (assemble_network, combination_census, connected_components,
                      link_weight_graph, mask_bits, strip_opposite_links)
from .plots import render_ccdf, render_microarray
from .serialize import write_clusters_json, write_graphml, write_json, write_network_tsv
from .states import build_state_matrix, write_state_csv
from .synth import GroundTruth, recovery_score
from .validation import TestConfig, bonferroni_threshold, enumerate_tests, fdr_threshold, validate, write_tests_tsv

logger = logging.getLogger(__name__)

STAGES = ("config", "ingest", "filter", "encode", "validate", "network", "community",
          "enrich", "report")
# 2 is left to argparse usage errors
EXIT_CODES = {"config": 3, **{stage: 10 + k for k, stage in enumerate(STAGES[1:])}}

NOTES = {
    "family_size": "9 * N * (N - 1) / 2 tests (unordered pairs x 9 state combinations), "
                   "N = investors entering the all-pairs pass",
    "stripping": "(b,s) and (s,b) bits cleared; links left without bits removed",
    "link_weight": "number of validated state pairs on the multi-link",
    "within_cluster_order": "descending number of active days, ties by investor id",
    "category_enrichment_population": "all partitioned investors; clusters of size >= 2 tested",
    "link_enrichment_population": "intra-cluster multi-links only",
    "enrichment_correction": "Bonferroni over clusters x attributes x 2 directions",
}


@dataclass
class RunConfig:
    trades: str
    output_dir: str = "svnet_out"
    meta: Optional[str] = None
    windows: Optional[str] = None
    truth: Optional[str] = None
    theta: float = 0.01
    min_active_days: int = 20
    p_t: float = 0.01
    correction: str = "bonferroni"  # bonferroni | fdr | both
    window_policy: Optional[str] = None
    seed: int = 0
    restarts: int = 10
    microarray_max_clusters: Optional[int] = 30
    dump_states: bool = False

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {sorted(unknown)}")
        # relative paths (and the default output_dir) resolve against the config's directory
        data.setdefault("output_dir", cls.output_dir)
        for key in ("trades", "meta", "windows", "truth", "output_dir"):
            if data.get(key) is not None and not Path(data[key]).is_absolute():
                data[key] = str(path.parent / data[key])
        return cls(**data)

    def check(self):
        """Parameter checks; input-file presence is checked by :meth:`check_inputs`."""
        if self.correction not in ("bonferroni", "fdr", "both"):
            raise ConfigurationError(f"unknown correction {self.correction!r}")
        if self.min_active_days < 1:
            raise ConfigurationError("min_active_days must be >= 1")
        if self.restarts < 1:
            raise ConfigurationError("restarts must be >= 1")
        if not 0 < self.p_t < 1:
            raise ConfigurationError("p_t must lie in (0, 1)")

    def check_inputs(self):
        for key in ("trades", "meta", "windows", "truth"):
            value = getattr(self, key)
            if value is not None and not Path(value).is_file():
                raise ConfigurationError(f"{key} file not found: {value}")

    @property
    def corrections(self) -> tuple:
        return ("bonferroni", "fdr") if self.correction == "both" else (self.correction,)


@contextmanager
def _stage(name):
    try:
        yield
    except StageError:
        raise
    except (SvnetError, OSError, ValueError, KeyError) as exc:
        raise StageError(name, exc) from exc


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_pipeline(cfg: RunConfig) -> dict:
    """Run every stage and return the manifest (also written as manifest.json)."""
    with _stage("config"):
        cfg.check()
    with _stage("ingest"):
        cfg.check_inputs()
    out_dir = Path(cfg.output_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".svnet-", dir=out_dir.parent))
    try:
        manifest = _run(cfg, staging)
        out_dir.mkdir(parents=True, exist_ok=True)
        for item in sorted(staging.iterdir()):
            shutil.move(str(item), str(out_dir / item.name))
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return manifest


def _run(cfg: RunConfig, work: Path) -> dict:
    counts = {}
    with _stage("ingest"):
        ds = load_trades(cfg.trades, cfg.meta, cfg.windows, cfg.window_policy)
        counts.update(rows_read=ds.report.rows_read, rows_dropped_zero=ds.report.dropped_zero,
                      rows_aggregated=ds.report.aggregated, records=ds.n_records,
                      investors_ingested=ds.n_investors, calendar_days=ds.calendar_length)
        truth = GroundTruth.from_json(cfg.truth) if cfg.truth else None

    with _stage("filter"):
        ds = filter_active(ds, cfg.min_active_days)
        counts["investors_filtered"] = ds.n_investors
        activity = dict(zip(ds.investors, ds.active_days().tolist()))

    with _stage("encode"):
        m = build_state_matrix(ds, cfg.theta)
        counts["state_entries"] = len(m)
        if cfg.dump_states:
            write_state_csv(m, work / "states.csv", ds.dates)

    with _stage("validate"):
        tests = enumerate_tests(m, ds)
        counts["tests_materialized"] = len(tests)
        counts["family_size"] = 9 * ds.n_investors * (ds.n_investors - 1) // 2

    networks = {}
    partitions = {}
    for correction in cfg.corrections:
        info = {}
        with _stage("validate"):
            tc = TestConfig(ds.n_investors, cfg.p_t, correction)
            info["bonferroni_threshold"] = bonferroni_threshold(tc)
            if correction == "fdr":
                info["fdr_threshold"] = fdr_threshold(tests.pvalue, tc)
            validated = validate(tests, tc)
            info["tests_validated"] = len(validated)
            write_tests_tsv(validated, work / f"{correction}_validated_tests.tsv")

        with _stage("network"):
            net = assemble_network(validated, ds.categories, correction, nodes=ds.investors)
            stripped = strip_opposite_links(net)
            info["links_validated"] = len(net.links)
            info["links_after_stripping"] = len(stripped.links)
            info["network_investors"] = len(net.linked_nodes)
            census = combination_census(net)
            info["distinct_combinations"] = len(census)
            info["census"] = [{"mask_bits": mask_bits(c.mask), "label": c.label, "count": c.count}
                              for c in census]
            linked = set(net.linked_nodes)
            comps = [c for c in connected_components(net) if len(c) > 1 or c[0] in linked]
            info["components"] = len(comps)
            info["component_sizes"] = [len(c) for c in comps]
            write_network_tsv(net, work / f"{correction}_network.tsv")
            write_graphml(net, work / f"{correction}_network.graphml")
            write_network_tsv(stripped, work / f"{correction}_network_stripped.tsv")
            write_json([{"component_id": k, "members": c, "size": len(c)} for k, c in enumerate(comps)],
                       work / f"{correction}_components.json")

        with _stage("community"):
            graph = link_weight_graph(stripped)
            part = detect_communities(graph, seed=cfg.seed, restarts=cfg.restarts)
            sizes = part.sizes()
            info["codelength"] = part.codelength
            info["clusters"] = part.n_clusters
            info["non_singleton_clusters"] = sum(1 for s in sizes if s > 1)
            info["clustered_investors"] = sum(s for s in sizes if s > 1)
            info["cluster_sizes"] = [s for s in sizes if s > 1]
            if truth is not None:
                info["recovery_nmi"] = recovery_score(part, truth)
            write_clusters_json(part, work / f"{correction}_clusters.json", activity)

        with _stage("enrich"):
            results = characterize_clusters(part, ds.categories, cfg.p_t)
            links = link_combination_enrichment(part, stripped, cfg.p_t)
            rows = ([_prefixed(r, "category") for r in results]
                    + [_prefixed(r, "combination") for r in links])
            rows.sort(key=lambda r: (r.cluster_id, r.attribute, r.direction))
            write_enrichment_tsv(rows, work / f"{correction}_enrichment.tsv")
            info["enrichment_significant"] = sum(1 for r in rows if r.significant)

        with _stage("report"):
            if part.assignment and len(m):
                render_microarray(m, part, work / f"{correction}_microarray.svg",
                                  max_clusters=cfg.microarray_max_clusters)
        networks[correction] = info
        partitions[correction] = part

    manifest = {
        "tool": "svnet",
        "version": __version__,
        "parameters": _parameters(cfg),
        "inputs": {k: sha256(getattr(cfg, k)) for k in ("trades", "meta", "windows", "truth")
                   if getattr(cfg, k) is not None},
        "counts": counts,
        "networks": networks,
        "notes": NOTES,
    }
    if len(partitions) == 2:
        with _stage("community"):
            score, report = compare_partitions(partitions["bonferroni"], partitions["fdr"])
            manifest["comparison"] = {
                "nmi": score,
                "inclusion": [asdict(r) for r in report],
            }
    with _stage("report"):
        if ds.n_investors:
            render_ccdf(ds, work / "activity_ccdf.svg")
        manifest["outputs"] = {p.name: sha256(p) for p in sorted(work.iterdir())}
        write_json(manifest, work / "manifest.json")
    return manifest


def _prefixed(r, kind):
    return replace(r, attribute=f"{kind}:{r.attribute}")


def _parameters(cfg: RunConfig) -> dict:
    params = asdict(cfg)
    params["window_policy"] = cfg.window_policy or ("provided" if cfg.windows else "full_calendar")
    return params
