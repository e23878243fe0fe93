"""Over- and under-expression of attributes inside clusters.

Each (cluster, attribute) pair gets two one-sided hypergeometric tail tests.
Significance uses a Bonferroni correction over the whole family
``clusters x attributes x 2`` directions.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .community import Partition
from .errors import DomainError
from .network import ValidatedNetwork, attribute_name, transpose_mask
from .validation import cooccurrence_pvalues

ENRICHMENT_HEADER = ["cluster_id", "attribute", "direction", "N", "N_C", "N_Q",
                     "N_CQ", "p_value", "significant"]


@dataclass(frozen=True)
class EnrichmentResult:
    cluster_id: int
    attribute: str
    direction: str  # "over" | "under"
    N: int
    N_C: int
    N_Q: int
    N_CQ: int
    p_value: float
    significant: bool


def attribute_pvalues(N, N_C, N_Q, N_CQ):
    """``(p_over, p_under)`` for ``N_CQ`` attribute holders in a cluster of ``N_C``.

    The lower tail uses the complement count: members lacking the attribute,
    ``N_C - X``, follow a hypergeometric law with ``N - N_Q`` successes.
    Arguments broadcast; scalar input gives floats.
    """
    N, N_C, N_Q, N_CQ = np.broadcast_arrays(*(np.asarray(v, dtype=np.int64) for v in (N, N_C, N_Q, N_CQ)))
    bad = ((N_C < 0) | (N_C > N) | (N_Q < 0) | (N_Q > N) | (N_CQ < 0)
           | (N_CQ > np.minimum(N_C, N_Q)) | (N_CQ < N_C + N_Q - N))
    if bad.any():
        k = np.flatnonzero(bad.ravel())[0]
        raise DomainError("inconsistent counts N={} N_C={} N_Q={} N_CQ={}".format(
            *(int(v.ravel()[k]) for v in (N, N_C, N_Q, N_CQ))))
    p_over = cooccurrence_pvalues(N, N_C, N_Q, N_CQ)
    p_under = cooccurrence_pvalues(N, N - N_Q, N_C, N_C - N_CQ)
    if p_over.ndim == 0:
        return float(p_over), float(p_under)
    return p_over, p_under


def _results(groups: Mapping[int, Counter], totals: Counter, p_t: float) -> list:
    attributes = sorted(totals)
    if not groups or not attributes:
        return []
    n_total = sum(totals.values())  # whole population, tested clusters or not
    threshold = p_t / (len(groups) * len(attributes) * 2)
    out = []
    for cid in sorted(groups):
        counts = groups[cid]
        n_c = sum(counts.values())
        for attr in attributes:
            n_q, n_cq = totals[attr], counts.get(attr, 0)
            p_over, p_under = attribute_pvalues(n_total, n_c, n_q, n_cq)
            for direction, p in (("over", p_over), ("under", p_under)):
                out.append(EnrichmentResult(cid, attr, direction, n_total, n_c, n_q, n_cq,
                                            p, p < threshold))
    return out


def characterize_clusters(part: Partition, meta: Mapping[str, str], p_t: float = 0.01,
                          min_cluster_size: int = 2) -> list:
    """Category enrichment for every cluster with at least ``min_cluster_size`` members.

    The population is every partitioned investor; singletons still count
    towards ``N`` but are not tested.
    """
    missing = [n for n in part.assignment if n not in meta]
    if missing:
        raise DomainError(f"no category for investor(s) {missing[:5]}")
    totals = Counter(meta[n] for n in part.assignment)
    members = defaultdict(Counter)
    for node, cid in part.assignment.items():
        members[cid][meta[node]] += 1
    groups = {cid: c for cid, c in members.items() if sum(c.values()) >= min_cluster_size}
    return _results(groups, totals, p_t)


def link_combination_enrichment(part: Partition, net: ValidatedNetwork, p_t: float = 0.01) -> list:
    """Co-occurrence combination enrichment among intra-cluster links.

    Combinations are undirected: a mask and its transpose share one label.
    """
    groups = defaultdict(Counter)
    for link in net.links:
        ci = part.assignment.get(link.investor_i)
        cj = part.assignment.get(link.investor_j)
        if ci is None or ci != cj:
            continue
        canonical = min(link.mask, transpose_mask(link.mask))
        groups[ci][attribute_name(canonical)] += 1
    totals = Counter()
    for counts in groups.values():
        totals.update(counts)
    return _results(dict(groups), totals, p_t)


def write_enrichment_tsv(results: Iterable[EnrichmentResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(ENRICHMENT_HEADER)
        for r in results:
            w.writerow([r.cluster_id, r.attribute, r.direction, r.N, r.N_C, r.N_Q, r.N_CQ,
                        repr(float(r.p_value)), "true" if r.significant else "false"])
