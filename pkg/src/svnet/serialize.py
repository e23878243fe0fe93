"""Network, cluster and component files."""

from __future__ import annotations

import csv
import json
from types import MappingProxyType

import networkx as nx

from .community import Partition
from .errors import UsageError
from .market_data import id_sort_key
from .network import MultiLink, ValidatedNetwork, mask_bits, parse_mask_bits, transpose_mask

NETWORK_HEADER = ["investor_i", "investor_j", "mask_bits", "weight", "labels"]
FORMATS = ("tsv", "graphml")


def _labels(link: MultiLink) -> str:
    return f"{link.label},{link.color}" if link.label else "-"


def write_network_tsv(net: ValidatedNetwork, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(NETWORK_HEADER)
        for link in net.links:
            w.writerow([link.investor_i, link.investor_j, mask_bits(link.mask),
                        link.weight, _labels(link)])


def read_network_tsv(path, categories=None, correction="bonferroni") -> ValidatedNetwork:
    links = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != NETWORK_HEADER:
            raise UsageError(f"{path}: not a network edge list (header {header})")
        for row in reader:
            if not row:
                continue
            mask = parse_mask_bits(row[2])
            link = MultiLink(row[0], row[1], mask)
            if link.weight != int(row[3]):
                raise UsageError(f"{path}:{reader.line_num}: weight does not match mask")
            links.append(link)
    categories = dict(categories or {})
    nodes = set(categories)
    for link in links:
        nodes.update((link.investor_i, link.investor_j))
    node_tuple = tuple(sorted(nodes, key=id_sort_key))
    cats = MappingProxyType({n: categories.get(n, "OTHER") for n in node_tuple})
    return ValidatedNetwork(node_tuple, tuple(links), cats, correction)


def write_graphml(net: ValidatedNetwork, path) -> None:
    g = nx.Graph(correction=net.correction)
    for n in net.nodes:
        g.add_node(n, category=net.categories.get(n, "OTHER"))
    for link in net.links:
        g.add_edge(link.investor_i, link.investor_j, mask=link.mask,
                   mask_bits=mask_bits(link.mask), weight=link.weight,
                   label=link.label or "", color=link.color or "")
    nx.write_graphml(g, path)


def read_graphml(path) -> ValidatedNetwork:
    g = nx.read_graphml(path)
    nodes = tuple(sorted((str(n) for n in g.nodes), key=id_sort_key))
    cats = MappingProxyType({str(n): d.get("category", "OTHER") for n, d in g.nodes(data=True)})
    links = []
    for u, v, d in g.edges(data=True):
        u, v = str(u), str(v)
        mask = int(d["mask"])
        if id_sort_key(v) < id_sort_key(u):
            u, v, mask = v, u, transpose_mask(mask)
        links.append(MultiLink(u, v, mask))
    links.sort(key=lambda l: (id_sort_key(l.investor_i), id_sort_key(l.investor_j)))
    return ValidatedNetwork(nodes, tuple(links), cats, g.graph.get("correction", "bonferroni"))


def export_network(net: ValidatedNetwork, fmt: str, path) -> None:
    if fmt == "tsv":
        write_network_tsv(net, path)
    elif fmt == "graphml":
        write_graphml(net, path)
    else:
        raise UsageError(f"unknown network format {fmt!r}; expected one of {FORMATS}")


def write_clusters_json(part: Partition, path, activity=None) -> None:
    """Clusters as ``[{cluster_id, members, size}]``.

    Members are listed by descending active-day count when ``activity``
    (investor -> count) is supplied, canonical id order otherwise.
    """
    out = []
    for cid, members in enumerate(part.clusters()):
        if activity is not None:
            members = sorted(members, key=lambda i: (-activity.get(i, 0), id_sort_key(i)))
        out.append({"cluster_id": cid, "members": members, "size": len(members)})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")


def read_clusters_json(path) -> Partition:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    assignment = {}
    for entry in data:
        for member in entry["members"]:
            assignment[str(member)] = int(entry["cluster_id"])
    return Partition(assignment, float("nan"))


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
