"""Statistically validated multi-link networks.

Each link between investors ``i < j`` carries a 9-bit mask with one bit per
ordered state pair ``(state_i, state_j)``; bit ``3 * state_i + state_j``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

import networkx as nx

from .community import WeightedGraph
from .market_data import id_sort_key
from .states import STATES, TradeState
from .validation import PairTest, TestTable

B, S, BS = TradeState.B, TradeState.S, TradeState.BS


def bit(state_i, state_j) -> int:
    return 1 << (3 * int(state_i) + int(state_j))


def mask_of(*pairs) -> int:
    m = 0
    for p, q in pairs:
        m |= bit(p, q)
    return m


def transpose_mask(mask: int) -> int:
    out = 0
    for p in STATES:
        for q in STATES:
            if mask & bit(p, q):
                out |= bit(q, p)
    return out


OPPOSITE_BITS = mask_of((B, S), (S, B))

# Most populated co-occurrence combinations, with their link colours.
COMBINATIONS = {
    "C1": mask_of((B, B)),
    "C2": mask_of((S, S)),
    "C3": mask_of((BS, BS)),
    "C4": mask_of((B, B), (S, S)),
    "C5": mask_of((B, BS)),
    "C6": mask_of((S, BS)),
    "C7": mask_of((S, B)),
    "C8": mask_of((B, B), (S, S), (BS, BS)),
    "C9": mask_of((B, BS), (S, BS)),
}
COLORS = {
    "C1": "magenta", "C2": "green", "C3": "apricot", "C4": "black", "C5": "blue",
    "C6": "orange", "C7": "tan", "C8": "brown", "C9": "purple",
}

_LABEL_OF = {}
for _label, _mask in COMBINATIONS.items():
    _LABEL_OF.setdefault(_mask, _label)
    _LABEL_OF.setdefault(transpose_mask(_mask), _label)


def combination_label(mask: int) -> Optional[str]:
    """C-label of a mask; combinations are undirected, so transposes match too."""
    return _LABEL_OF.get(mask)


def mask_bits(mask: int) -> str:
    """Nine-character 0/1 string, first character = (b, b) bit."""
    return "".join("1" if mask >> k & 1 else "0" for k in range(9))


def parse_mask_bits(text: str) -> int:
    if len(text) != 9 or set(text) - {"0", "1"}:
        raise ValueError(f"bad mask bits {text!r}")
    return sum(1 << k for k, c in enumerate(text) if c == "1")


def mask_pairs(mask: int) -> list:
    return [(p, q) for p in STATES for q in STATES if mask & bit(p, q)]


def attribute_name(mask: int) -> str:
    """C-label when one applies, else the raw state pairs, e.g. ``b-s+bs-bs``."""
    label = combination_label(mask)
    if label is not None:
        return label
    return "+".join(f"{p.label}-{q.label}" for p, q in mask_pairs(mask))


@dataclass(frozen=True)
class MultiLink:
    investor_i: str
    investor_j: str
    mask: int

    @property
    def weight(self) -> int:
        return bin(self.mask).count("1")

    @property
    def label(self) -> Optional[str]:
        return combination_label(self.mask)

    @property
    def color(self) -> Optional[str]:
        label = self.label
        return COLORS[label] if label else None


@dataclass(frozen=True)
class ValidatedNetwork:
    nodes: tuple
    links: tuple
    categories: Mapping[str, str] = field(default_factory=dict)
    correction: str = "bonferroni"

    @property
    def linked_nodes(self) -> list:
        seen = set()
        for link in self.links:
            seen.add(link.investor_i)
            seen.add(link.investor_j)
        return sorted(seen, key=id_sort_key)

    def link_map(self) -> dict:
        return {(l.investor_i, l.investor_j): l.mask for l in self.links}


def _rows(validated) -> Iterable:
    if isinstance(validated, TestTable):
        inv = validated.investors
        yield from zip((inv[k] for k in validated.i.tolist()),
                       (inv[k] for k in validated.j.tolist()),
                       validated.state_i.tolist(), validated.state_j.tolist())
    else:
        for t in validated:
            if isinstance(t, PairTest):
                yield t.investor_i, t.investor_j, int(t.state_i), int(t.state_j)
            else:
                i, j, p, q = t
                yield str(i), str(j), _state(p), _state(q)


def _state(value) -> int:
    if isinstance(value, str):
        return int(TradeState[value.upper()])
    return int(value)


def assemble_network(validated, meta: Optional[Mapping[str, str]] = None,
                     correction: str = "bonferroni", nodes: Optional[Iterable] = None
                     ) -> ValidatedNetwork:
    """Fold validated tests into one multi-link per unordered investor pair.

    Tests listed as ``(j, i)`` with ``j > i`` are transposed, so a validated
    ``(j_b, i_s)`` sets the ``(s, b)`` bit of link ``(i, j)``.
    """
    masks: dict = {}
    node_set = set(str(n) for n in (nodes if nodes is not None else (meta or {})))
    for i, j, p, q in _rows(validated):
        if i == j:
            continue
        if id_sort_key(j) < id_sort_key(i):
            i, j, p, q = j, i, q, p
        masks[(i, j)] = masks.get((i, j), 0) | bit(p, q)
        node_set.add(i)
        node_set.add(j)
    links = tuple(MultiLink(i, j, masks[(i, j)])
                  for i, j in sorted(masks, key=lambda k: (id_sort_key(k[0]), id_sort_key(k[1]))))
    meta = meta or {}
    node_tuple = tuple(sorted(node_set, key=id_sort_key))
    cats = MappingProxyType({n: meta.get(n, "OTHER") for n in node_tuple})
    return ValidatedNetwork(node_tuple, links, cats, correction)


def strip_opposite_links(net: ValidatedNetwork) -> ValidatedNetwork:
    """Clear the (b, s) and (s, b) bits; drop links left empty."""
    links = []
    for link in net.links:
        mask = link.mask & ~OPPOSITE_BITS
        if mask:
            links.append(link if mask == link.mask else MultiLink(link.investor_i, link.investor_j, mask))
    return ValidatedNetwork(net.nodes, tuple(links), net.categories, net.correction)


@dataclass(frozen=True)
class CensusEntry:
    mask: int
    count: int
    label: Optional[str]


def combination_census(net: ValidatedNetwork) -> list:
    """Link counts per raw mask, most populated first."""
    counts = Counter(link.mask for link in net.links)
    return [CensusEntry(m, c, combination_label(m))
            for m, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def link_weight_graph(net: ValidatedNetwork):
    """Undirected weighted graph, weight = number of validated state pairs."""
    return WeightedGraph(net.nodes, tuple((l.investor_i, l.investor_j, float(l.weight))
                                          for l in net.links))


def connected_components(net: ValidatedNetwork) -> list:
    """Components as sorted member lists, largest first."""
    g = nx.Graph()
    g.add_nodes_from(net.nodes)
    g.add_edges_from((l.investor_i, l.investor_j) for l in net.links)
    comps = [sorted(c, key=id_sort_key) for c in nx.connected_components(g)]
    comps.sort(key=lambda c: (-len(c), id_sort_key(c[0])))
    return comps
