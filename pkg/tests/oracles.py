"""Independent reference implementations used only by the tests."""

from fractions import Fraction
from itertools import combinations
from math import comb

from svnet.market_data import id_sort_key


def exact_pmf(x, T, n_p, n_q):
    if x < max(0, n_p + n_q - T) or x > min(n_p, n_q):
        return Fraction(0)
    return Fraction(comb(n_p, x) * comb(T - n_p, n_q - x), comb(T, n_q))


def exact_sf(T, n_p, n_q, x):
    """P(X >= x) as a fraction, summed from the definition."""
    return sum((exact_pmf(k, T, n_p, n_q) for k in range(x, min(n_p, n_q) + 1)), Fraction(0))


def rel_err(value, exact):
    exact = float(exact) if not isinstance(exact, Fraction) else exact
    if exact == 0:
        return abs(value)
    return abs(Fraction(value) - Fraction(exact)) / abs(Fraction(exact))


def brute_force_tests(m):
    """Double loop over investor pairs and the nine state pairs.

    Returns sorted tuples ``(inv_i, inv_j, P, Q, T, N_P, N_Q, N_PQ)`` for every
    test with ``N_PQ >= 1`` on the window intersection.
    """
    rows = m.rows()
    windows = {inv: tuple(w) for inv, w in zip(m.investors, m.windows.tolist())}
    out = []
    for a, b in combinations(sorted(m.investors, key=id_sort_key), 2):
        lo = max(windows[a][0], windows[b][0])
        hi = min(windows[a][1], windows[b][1])
        if lo > hi:
            continue
        ra = {d: int(s) for d, s in rows.get(a, {}).items() if lo <= d <= hi}
        rb = {d: int(s) for d, s in rows.get(b, {}).items() if lo <= d <= hi}
        for p in range(3):
            for q in range(3):
                n_pq = sum(1 for d, s in ra.items() if s == p and rb.get(d) == q)
                if n_pq:
                    n_p = sum(1 for s in ra.values() if s == p)
                    n_q = sum(1 for s in rb.values() if s == q)
                    out.append((a, b, p, q, hi - lo + 1, n_p, n_q, n_pq))
    return out


def spec_map_equation(g, modules):
    """Two-level map equation in the entropy form ``q H(Q) + sum p_m H(P_m)``."""
    from math import log2

    def H(ps):
        tot = sum(ps)
        return -sum(p / tot * log2(p / tot) for p in ps if p > 0)

    strength = g.strengths()
    two_w = 2 * g.total_weight
    p = {n: s / two_w for n, s in strength.items() if s > 0}
    module_of = {n: k for k, mod in enumerate(modules) for n in mod}
    exits = [0.0] * len(modules)
    for u, v, w in g.edges:
        if module_of[u] != module_of[v]:
            exits[module_of[u]] += w / two_w
            exits[module_of[v]] += w / two_w
    q = sum(exits)
    total = q * H(exits) if q > 0 else 0.0
    for k, mod in enumerate(modules):
        parts = [exits[k]] + [p[n] for n in mod]
        total += sum(parts) * H(parts)
    return total


def exact_tails(T, n_p, n_q):
    """Integer tail sums of the hypergeometric law.

    Returns ``(lo, upper, lower, den)``: for ``x`` in the support,
    ``P(X >= x) = upper[x - lo] / den`` and ``P(X <= x) = lower[x - lo] / den``.
    """
    lo, hi = max(0, n_p + n_q - T), min(n_p, n_q)
    terms = [comb(n_p, x) * comb(T - n_p, n_q - x) for x in range(lo, hi + 1)]
    upper = terms[:]
    for k in range(len(terms) - 2, -1, -1):
        upper[k] += upper[k + 1]
    lower = terms[:]
    for k in range(1, len(terms)):
        lower[k] += lower[k - 1]
    return lo, upper, lower, comb(T, n_q)


def rel_err_ratio(value, num, den):
    """Relative error of a float against ``num / den``, from exact integers."""
    p, q = float(value).as_integer_ratio()
    return abs(p * den - num * q) / (num * q)
