"""Two-level map equation for undirected weighted graphs.

Visit rates are proportional to node strength, ``p_a = s_a / 2W``, and the
exit rate of module ``m`` is its cut weight over ``2W``. With ``q = sum q_m``
and ``plogp(x) = x log2 x`` the codelength is::

    L = plogp(q) - 2 sum_m plogp(q_m) - sum_a plogp(p_a) + sum_m plogp(q_m + p_m)

which equals ``q H(Q) + sum_m p_m H(P_m)``. The optimiser is a Louvain-style
scheme: node moves in seeded random order until no move helps, aggregation
of modules into super-nodes, repeated to a fixpoint, followed by a fine-tune
pass of single-node moves on the original graph.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from .errors import DomainError, LimitError
from .market_data import id_sort_key

EXHAUSTIVE_LIMIT = 10
_EPS = 1e-12


def plogp(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


@dataclass(frozen=True)
class WeightedGraph:
    nodes: tuple
    edges: tuple  # (u, v, weight)

    def __post_init__(self):
        known = set(self.nodes)
        for u, v, w in self.edges:
            if u == v:
                raise DomainError(f"self-loop on {u!r}")
            if w <= 0:
                raise DomainError(f"non-positive weight on edge {u!r}-{v!r}")
            if u not in known or v not in known:
                raise DomainError(f"edge {u!r}-{v!r} references an unknown node")

    @classmethod
    def from_edges(cls, edges: Iterable, nodes: Iterable = ()) -> "WeightedGraph":
        norm = []
        for e in edges:
            norm.append((e[0], e[1], float(e[2]) if len(e) > 2 else 1.0))
        edges = tuple(norm)
        node_set = set(nodes)
        for u, v, _ in edges:
            node_set.add(u)
            node_set.add(v)
        return cls(tuple(sorted(node_set, key=_node_key)), edges)

    def strengths(self) -> dict:
        s = dict.fromkeys(self.nodes, 0.0)
        for u, v, w in self.edges:
            s[u] += w
            s[v] += w
        return s

    @property
    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges)


def _node_key(node):
    return id_sort_key(node) if isinstance(node, str) else (0, node, str(node))


@dataclass(frozen=True)
class Partition:
    assignment: Mapping  # node -> cluster id
    codelength: float = 0.0

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignment.values()))

    def clusters(self) -> list:
        out = defaultdict(list)
        for node, c in self.assignment.items():
            out[c].append(node)
        return [sorted(out[c], key=_node_key) for c in sorted(out)]

    def sizes(self) -> list:
        return [len(c) for c in self.clusters()]


def visit_rates(g: WeightedGraph) -> dict:
    """Stationary visit rates of non-isolated nodes."""
    two_w = 2.0 * g.total_weight
    if two_w <= 0:
        raise DomainError("graph has no weight")
    return {n: s / two_w for n, s in g.strengths().items() if s > 0}


def map_equation(g: WeightedGraph, part) -> float:
    """Codelength in bits of ``part`` (a Partition or node->module mapping)."""
    assignment = part.assignment if isinstance(part, Partition) else part
    if not g.edges:
        return 0.0
    rates = visit_rates(g)
    missing = [n for n in rates if n not in assignment]
    if missing:
        raise DomainError(f"partition does not cover node(s) {missing[:5]}")
    two_w = 2.0 * g.total_weight
    exit_rate = defaultdict(float)
    flow = defaultdict(float)
    for n, p in rates.items():
        flow[assignment[n]] += p
    for u, v, w in g.edges:
        mu, mv = assignment[u], assignment[v]
        if mu != mv:
            exit_rate[mu] += w / two_w
            exit_rate[mv] += w / two_w
    q = math.fsum(exit_rate.values())
    value = (plogp(q)
             - 2.0 * math.fsum(plogp(x) for x in exit_rate.values())
             - math.fsum(plogp(p) for p in rates.values())
             + math.fsum(plogp(exit_rate[m] + flow[m]) for m in flow))
    return max(value, 0.0)


# optimiser ---------------------------------------------------------------

class _Level:
    """Graph at one aggregation level: flows, exit weights, neighbour lists."""

    __slots__ = ("n", "nbrs", "flow", "out")

    def __init__(self, n, nbrs, flow, out):
        self.n = n
        self.nbrs = nbrs
        self.flow = flow
        self.out = out

    def aggregate(self, module: list) -> "_Level":
        n = max(module) + 1
        flow = [0.0] * n
        acc = [defaultdict(float) for _ in range(n)]
        for u in range(self.n):
            mu = module[u]
            flow[mu] += self.flow[u]
            row = acc[mu]
            for v, w in self.nbrs[u]:
                mv = module[v]
                if mv != mu:
                    row[mv] += w
        nbrs = [sorted(row.items()) for row in acc]
        out = [math.fsum(w for _, w in row) for row in nbrs]
        return _Level(n, nbrs, flow, out)


def _compact(module: list) -> list:
    remap = {}
    return [remap.setdefault(m, len(remap)) for m in module]


class _Modules:
    """Per-module exit and flow sums with incremental codelength terms."""

    def __init__(self, level: _Level, module: list, node_term: float):
        n = level.n
        self.level = level
        self.module = list(module)
        self.exit = [0.0] * n
        self.flow = [0.0] * n
        self.size = [0] * n
        for u in range(n):
            m = self.module[u]
            self.flow[m] += level.flow[u]
            self.size[m] += 1
            for v, w in level.nbrs[u]:
                if self.module[v] != m:
                    self.exit[m] += w
        self.node_term = node_term
        self.exit_total = math.fsum(self.exit)
        self.sum_exit = math.fsum(plogp(x) for x in self.exit)
        self.sum_total = math.fsum(plogp(x + f) for x, f in zip(self.exit, self.flow))
        self.empty = [m for m in range(n) if self.size[m] == 0]
        heapq.heapify(self.empty)

    def codelength(self) -> float:
        return plogp(self.exit_total) - 2.0 * self.sum_exit + self.sum_total - self.node_term

    def delta(self, u, a, b, w_a, w_b):
        """Codelength change if node ``u`` moves from module ``a`` to ``b``."""
        lv = self.level
        out, p = lv.out[u], lv.flow[u]
        ea, fa, eb, fb = self.exit[a], self.flow[a], self.exit[b], self.flow[b]
        na = ea - out + 2.0 * w_a
        nb = eb + out - 2.0 * w_b
        new_total = self.exit_total - ea - eb + na + nb
        d_exit = plogp(na) + plogp(nb) - plogp(ea) - plogp(eb)
        d_total = plogp(na + fa - p) + plogp(nb + fb + p) - plogp(ea + fa) - plogp(eb + fb)
        return plogp(new_total) - plogp(self.exit_total) - 2.0 * d_exit + d_total, na, nb

    def move(self, u, a, b, na, nb):
        p = self.level.flow[u]
        ea, fa, eb, fb = self.exit[a], self.flow[a], self.exit[b], self.flow[b]
        self.sum_exit += plogp(na) + plogp(nb) - plogp(ea) - plogp(eb)
        self.sum_total += (plogp(na + fa - p) + plogp(nb + fb + p)
                           - plogp(ea + fa) - plogp(eb + fb))
        self.exit_total += na + nb - ea - eb
        self.exit[a], self.exit[b] = na, nb
        self.flow[a] -= p
        self.flow[b] += p
        self.size[a] -= 1
        self.size[b] += 1
        self.module[u] = b
        if self.size[a] == 0:
            heapq.heappush(self.empty, a)

    def first_empty(self):
        while self.empty and self.size[self.empty[0]] > 0:
            heapq.heappop(self.empty)
        return self.empty[0] if self.empty else None


def _local_moves(mods: _Modules, rng, trace=None, max_sweeps=200) -> bool:
    lv = mods.level
    moved_any = False
    for _ in range(max_sweeps):
        moved = False
        for u in rng.permutation(lv.n).tolist():
            a = mods.module[u]
            links = defaultdict(float)
            for v, w in lv.nbrs[u]:
                links[mods.module[v]] += w
            w_a = links.pop(a, 0.0)
            candidates = sorted(links)
            if mods.size[a] > 1:
                spare = mods.first_empty()
                if spare is not None:
                    candidates = sorted(candidates + [spare])
            best, best_delta, best_exits = a, -_EPS, None
            for b in candidates:
                d, na, nb = mods.delta(u, a, b, w_a, links.get(b, 0.0))
                if d < best_delta:
                    best, best_delta, best_exits = b, d, (na, nb)
            if best != a:
                mods.move(u, a, best, *best_exits)
                moved = True
                if trace is not None:
                    trace(mods.codelength())
        if not moved:
            break
        moved_any = True
    return moved_any


def _optimise(base: _Level, node_term: float, rng, trace=None, max_rounds=50) -> list:
    assignment = list(range(base.n))
    level = base
    for _ in range(max_rounds):
        while level.n > 1:
            mods = _Modules(level, list(range(level.n)), node_term)
            if not _local_moves(mods, rng, trace):
                break
            coarse = _compact(mods.module)
            assignment = [coarse[m] for m in assignment]
            level = level.aggregate(coarse)
        mods = _Modules(base, assignment, node_term)
        if not _local_moves(mods, rng, trace):
            break
        assignment = _compact(mods.module)
        level = base.aggregate(assignment)
    return assignment


def _build_base(g: WeightedGraph):
    rates = visit_rates(g)
    active = sorted(rates, key=_node_key)
    index = {n: k for k, n in enumerate(active)}
    two_w = 2.0 * g.total_weight
    acc = [defaultdict(float) for _ in active]
    for u, v, w in g.edges:
        acc[index[u]][index[v]] += w / two_w
        acc[index[v]][index[u]] += w / two_w
    nbrs = [sorted(row.items()) for row in acc]
    out = [math.fsum(w for _, w in row) for row in nbrs]
    flow = [rates[n] for n in active]
    node_term = math.fsum(plogp(p) for p in flow)
    return active, _Level(len(active), nbrs, flow, out), node_term


def _finalise(g: WeightedGraph, active: list, module_of: Mapping) -> Partition:
    """Relabel: detected modules by size (desc), then isolated singletons."""
    groups = defaultdict(list)
    for node in active:
        groups[module_of[node]].append(node)
    ordered = sorted((sorted(m, key=_node_key) for m in groups.values()),
                     key=lambda m: (-len(m), _node_key(m[0])))
    assignment = {}
    for cid, members in enumerate(ordered):
        for node in members:
            assignment[node] = cid
    next_id = len(ordered)
    for node in sorted((n for n in g.nodes if n not in assignment), key=_node_key):
        assignment[node] = next_id
        next_id += 1
    return Partition(assignment, map_equation(g, assignment) if g.edges else 0.0)


def detect_communities(g: WeightedGraph, seed: int = 0, restarts: int = 10,
                       trace: Optional[Callable[[float], None]] = None) -> Partition:
    """Best map-equation partition over ``restarts`` seeded optimiser runs.

    Ties between restarts keep the earliest. The one-module partition is
    also considered, so the result never codes worse than it (or than the
    singleton start every run begins from).
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if not g.nodes:
        return Partition({}, 0.0)
    if not g.edges:
        return _finalise(g, [], {})
    active, base, node_term = _build_base(g)
    best, best_len = None, math.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        assignment = _optimise(base, node_term, rng, trace)
        module_of = dict(zip(active, assignment))
        length = map_equation(g, module_of)
        if length < best_len - _EPS:
            best, best_len = module_of, length
    one = dict.fromkeys(active, 0)
    if map_equation(g, one) < best_len - _EPS:
        best = one
    return _finalise(g, active, best)


def _set_partitions(n):
    """Restricted growth strings of length ``n``."""
    if n == 0:
        yield []
        return
    labels = [0] * n

    def rec(k, top):
        if k == n:
            yield list(labels)
            return
        for c in range(top + 2):
            labels[k] = c
            yield from rec(k + 1, max(top, c))

    yield from rec(1, 0)


def exhaustive_best_partition(g: WeightedGraph, limit: int = EXHAUSTIVE_LIMIT) -> Partition:
    """Global codelength minimum by enumerating every set partition."""
    if not g.nodes or not g.edges:
        return _finalise(g, [], {}) if g.nodes else Partition({}, 0.0)
    rates = visit_rates(g)
    active = sorted(rates, key=_node_key)
    if len(active) > limit:
        raise LimitError(f"{len(active)} non-isolated nodes exceed the exhaustive limit {limit}")
    index = {n: k for k, n in enumerate(active)}
    two_w = 2.0 * g.total_weight
    edges = [(index[u], index[v], w / two_w) for u, v, w in g.edges]
    flow = [rates[n] for n in active]
    node_term = sum(plogp(p) for p in flow)
    best, best_len = None, math.inf
    for labels in _set_partitions(len(active)):
        k = max(labels) + 1
        exits = [0.0] * k
        flows = [0.0] * k
        for u, c in enumerate(labels):
            flows[c] += flow[u]
        for u, v, w in edges:
            if labels[u] != labels[v]:
                exits[labels[u]] += w
                exits[labels[v]] += w
        length = (plogp(sum(exits)) - 2.0 * sum(plogp(x) for x in exits)
                  - node_term + sum(plogp(x + f) for x, f in zip(exits, flows)))
        if length < best_len - _EPS:
            best, best_len = labels, length
    return _finalise(g, active, dict(zip(active, best)))


# comparison --------------------------------------------------------------

def _entropy(counts: Iterable[int], n: int) -> float:
    return -math.fsum(c / n * math.log(c / n) for c in counts if c)


def nmi(labels_a: list, labels_b: list) -> float:
    """Mutual information normalised by the arithmetic mean of the entropies."""
    n = len(labels_a)
    if n == 0:
        raise DomainError("no common nodes")
    ca, cb = Counter(labels_a), Counter(labels_b)
    joint = Counter(zip(labels_a, labels_b))
    ha, hb = _entropy(ca.values(), n), _entropy(cb.values(), n)
    if ha + hb == 0:
        return 1.0
    # same entropy routine for all three terms, so identical labelings give exactly 1
    mi = ha + hb - _entropy(joint.values(), n)
    return min(1.0, max(0.0, mi / ((ha + hb) / 2.0)))


@dataclass(frozen=True)
class Inclusion:
    cluster: int
    size: int
    best_match: int
    n_inside: int
    fraction: float
    over_75: bool
    over_90: bool


def compare_partitions(a: Partition, b: Partition):
    """NMI over common nodes, plus how much of each cluster of ``a`` sits in one cluster of ``b``."""
    common = [n for n in a.assignment if n in b.assignment]
    if not common:
        raise DomainError("partitions share no nodes")
    common.sort(key=_node_key)
    la = [a.assignment[n] for n in common]
    lb = [b.assignment[n] for n in common]
    score = nmi(la, lb)
    members = defaultdict(list)
    for x, y in zip(la, lb):
        members[x].append(y)
    report = []
    for cid in sorted(members):
        counts = Counter(members[cid])
        best = min(counts, key=lambda c: (-counts[c], c))
        size = len(members[cid])
        frac = counts[best] / size
        report.append(Inclusion(cid, size, best, counts[best], frac, frac > 0.75, frac > 0.90))
    return score, report
