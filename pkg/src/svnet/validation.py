"""Hypergeometric co-occurrence tests and multiple-testing corrections.

For investors ``i`` and ``j`` observed over ``T`` common days, with ``N_P``
days of ``i`` in state ``P``, ``N_Q`` days of ``j`` in state ``Q`` and
``N_PQ`` days where both happen, the p-value is the upper tail
``P(X >= N_PQ)`` of ``X ~ Hypergeom(T, N_P, N_Q)``.

The all-pairs pass only materialises tests with ``N_PQ >= 1``: the join of
per-state investor-by-day incidence matrices (a sparse product, i.e. an
inverted index from ``(day, state)`` to investors) yields exactly those
pairs. Tests with ``N_PQ = 0`` have p-value 1 but still count towards the
family size ``9 N (N - 1) / 2``.
"""

from __future__ import annotations

import csv
import decimal
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DomainError
from .market_data import Dataset
from .states import STATES, StateMatrix, TradeState

CORRECTIONS = ("bonferroni", "fdr")
TESTS_HEADER = ["investor_i", "investor_j", "state_i", "state_j",
                "T", "N_P", "N_Q", "N_PQ", "p_value"]

# relative size below which the remaining tail mass is dropped
_TAIL_EPS = 2.0 ** -60


# scalar distribution -----------------------------------------------------------

def _check_counts(T, n_p, n_q):
    if T < 0 or n_p < 0 or n_q < 0 or n_p > T or n_q > T:
        raise DomainError(f"need 0 <= N_P, N_Q <= T, got T={T}, N_P={n_p}, N_Q={n_q}")


def _stirling_table(n_max=15):
    """``log n! - ((n + 1/2) log n - n + log sqrt(2 pi))`` for small ``n``, to 30 digits."""
    ctx = decimal.Context(prec=40)
    pi = decimal.Decimal("3.14159265358979323846264338327950288419716939937510")
    half_log_2pi = ctx.divide(ctx.ln(ctx.multiply(2, pi)), 2)
    out = [0.0]
    for n in range(1, n_max + 1):
        d = decimal.Decimal(n)
        v = (ctx.ln(decimal.Decimal(math.factorial(n)))
             - ctx.multiply(d + decimal.Decimal("0.5"), ctx.ln(d)) + d - half_log_2pi)
        out.append(float(v))
    return np.array(out)


_STIRLERR = _stirling_table()


def _stirlerr(n):
    """Error of Stirling's approximation to ``log n!`` (zero at ``n = 0``)."""
    n = np.asarray(n, dtype=float)
    big = np.maximum(n, 16.0)
    nn = big * big
    series = (1 / 12 - (1 / 360 - (1 / 1260 - (1 / 1680 - 1 / (1188 * nn)) / nn) / nn) / nn) / big
    return np.where(n <= 15, _STIRLERR[np.clip(n, 0, 15).astype(np.int64)], series)


def _bd0(x, m):
    """Deviance term ``x log(x / m) + m - x`` without cancellation near ``x = m``."""
    total = x + m
    v = (x - m) / np.where(total > 0, total, 1.0)
    # |v| < 0.1 on the series branch, so ten terms reach double precision
    s = (x - m) * v
    ej = 2 * x * v
    v2 = v * v
    for j in range(1, 11):
        ej = ej * v2
        s = s + ej / (2 * j + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = np.where(x > 0, x * np.log(x / m), 0.0) + m - x
    return np.where(np.abs(x - m) < 0.1 * total, s, far)


def _log_binom_pmf(x, n, p, q):
    """``log C(n, x) p^x q^(n - x)`` for ``0 <= x <= n``, ``0 < p < 1``."""
    inner = (x > 0) & (x < n)
    xs = np.where(inner, x, 1.0)
    ns = np.where(inner, n, 2.0)
    lf = np.where(inner, np.log(2 * math.pi * xs) + np.log1p(-xs / ns), 0.0)
    return (_stirlerr(n) - _stirlerr(x) - _stirlerr(n - x)
            - _bd0(x, n * p) - _bd0(n - x, n * q) - 0.5 * lf)


def _log_pmf(x, T, a, b):
    """Log-pmf of ``Hypergeom(T, a, b)`` at in-support ``x``.

    Writes the pmf as a ratio of three binomial pmfs with success probability
    ``b / T`` and evaluates each through Stirling-error and deviance terms, so
    the relative accuracy does not degrade with ``T`` the way a difference of
    nine log-gamma values does. Requires ``0 < b < T``.
    """
    x, T, a, b = (np.asarray(v, dtype=float) for v in (x, T, a, b))
    p = b / T
    q = (T - b) / T
    return (_log_binom_pmf(x, a, p, q) + _log_binom_pmf(b - x, T - a, p, q)
            - _log_binom_pmf(b, T, p, q))


def hypergeom_pmf(x: int, T: int, n_p: int, n_q: int) -> float:
    """``C(N_P, x) C(T - N_P, N_Q - x) / C(T, N_Q)``, evaluated in log space."""
    _check_counts(T, n_p, n_q)
    lo = max(0, n_p + n_q - T)
    hi = min(n_p, n_q)
    if x < lo or x > hi:
        return 0.0
    if lo == hi:
        return 1.0
    return math.exp(float(_log_pmf(x, T, n_p, n_q)))


def cooccurrence_pvalue(T: int, n_p: int, n_q: int, n_pq: int) -> float:
    """Upper-tail probability of observing at least ``n_pq`` co-occurrences."""
    _check_counts(T, n_p, n_q)
    hi = min(n_p, n_q)
    if n_pq < 0 or n_pq > hi:
        raise DomainError(f"N_PQ={n_pq} outside [0, min(N_P, N_Q)={hi}]")
    return float(cooccurrence_pvalues(T, n_p, n_q, n_pq))


# vectorised survival function -------------------------------------------------

def _walk(ratio_fn, start, stop, step, T, a, b):
    """Sum pmf ratios relative to the anchor, walking from ``start`` to ``stop``.

    Terms decrease monotonically away from the anchor (log-concavity), so the
    walk stops once the geometric bound on what is left is negligible.
    """
    total = np.zeros(start.shape)
    term = np.ones(start.shape)
    k = start.copy()
    idx = np.flatnonzero(k != stop)
    while idx.size:
        r = ratio_fn(k[idx], T[idx], a[idx], b[idx])
        t = term[idx] * r
        term[idx] = t
        total[idx] += t
        k[idx] += step
        # remaining mass after t is at most t * r / (1 - r) with r the next ratio
        small = (r < 1.0) & (t * r < _TAIL_EPS * (1.0 - r) * (1.0 + total[idx]))
        idx = idx[(k[idx] != stop[idx]) & ~small]
    return total


def _ratio_up(k, T, a, b):
    # pmf(k + 1) / pmf(k)
    return ((a - k) * (b - k)) / ((k + 1.0) * (T - a - b + k + 1.0))


def _ratio_down(k, T, a, b):
    # pmf(k - 1) / pmf(k)
    return (k * (T - a - b + k)) / ((a - k + 1.0) * (b - k + 1.0))


def cooccurrence_pvalues(T, n_p, n_q, n_pq) -> np.ndarray:
    """Vectorised :func:`cooccurrence_pvalue`; arguments broadcast.

    The tail is summed relative to its largest term (the mode, or ``n_pq``
    when that lies above the mode), so no subtraction from one is ever
    needed and tiny p-values keep full relative precision.
    """
    T, a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=np.int64) for v in (T, n_p, n_q, n_pq)))
    if T.size == 0:
        return np.zeros(T.shape)
    if ((a < 0) | (b < 0) | (a > T) | (b > T)).any():
        raise DomainError("need 0 <= N_P, N_Q <= T")
    lo = np.maximum(0, a + b - T)
    hi = np.minimum(a, b)
    if ((x < 0) | (x > hi)).any():
        raise DomainError("N_PQ outside [0, min(N_P, N_Q)]")

    out = np.ones(T.shape)
    sel = np.flatnonzero((x > lo).ravel())
    if sel.size == 0:
        return out
    Tf, af, bf, xf, hf = (v.ravel()[sel] for v in (T, a, b, x, hi))
    mode = ((af + 1) * (bf + 1)) // (Tf + 2)
    anchor = np.maximum(xf, np.minimum(mode, hf))
    Td, ad, bd = Tf.astype(float), af.astype(float), bf.astype(float)
    up = _walk(_ratio_up, anchor, hf, 1, Td, ad, bd)
    down = _walk(_ratio_down, anchor, xf, -1, Td, ad, bd)
    log_anchor = _log_pmf(anchor.astype(float), Td, ad, bd)
    p = np.exp(log_anchor) * (1.0 + up + down)
    flat = out.ravel()
    flat[sel] = np.minimum(p, 1.0)
    return flat.reshape(T.shape)


# tests -----------------------------------------------------------------------

@dataclass(frozen=True)
class PairTest:
    investor_i: str
    investor_j: str
    state_i: TradeState
    state_j: TradeState
    T: int
    N_P: int
    N_Q: int
    N_PQ: int
    p_value: float = 1.0

    __test__ = False


@dataclass(frozen=True)
class TestConfig:
    n_investors: int
    p_t: float = 0.01
    correction: str = "bonferroni"

    __test__ = False

    def __post_init__(self):
        if not 0 < self.p_t < 1:
            raise ConfigurationError(f"p_t must lie in (0, 1), got {self.p_t}")
        if self.correction not in CORRECTIONS:
            raise ConfigurationError(f"unknown correction {self.correction!r}")
        if self.n_investors < 2:
            raise ConfigurationError("at least two investors are needed to form a pair")

    @property
    def family_size(self) -> int:
        n = self.n_investors
        return 9 * n * (n - 1) // 2


@dataclass(frozen=True, eq=False)
class TestTable:
    """Columnar collection of pair tests sorted by ``(i, j, state_i, state_j)``.

    ``i`` and ``j`` index into ``investors`` (canonical order, ``i < j``).
    Iterating yields :class:`PairTest` rows.
    """

    investors: tuple
    i: np.ndarray
    j: np.ndarray
    state_i: np.ndarray
    state_j: np.ndarray
    T: np.ndarray
    n_p: np.ndarray
    n_q: np.ndarray
    n_pq: np.ndarray
    pvalue: np.ndarray

    __test__ = False

    _COLUMNS = ("i", "j", "state_i", "state_j", "T", "n_p", "n_q", "n_pq", "pvalue")

    def __len__(self):
        return int(self.i.size)

    def __iter__(self) -> Iterator[PairTest]:
        inv = self.investors
        for row in zip(*(getattr(self, c).tolist() for c in self._COLUMNS)):
            i, j, si, sj, T, a, b, x, p = row
            yield PairTest(inv[i], inv[j], TradeState(si), TradeState(sj), T, a, b, x, p)

    def take(self, index) -> "TestTable":
        return TestTable(self.investors, *(getattr(self, c)[index] for c in self._COLUMNS))

    @classmethod
    def empty(cls, investors=()) -> "TestTable":
        z = np.zeros(0, dtype=np.int32)
        return cls(tuple(investors), z, z, z.astype(np.int8), z.astype(np.int8),
                   z, z, z, z, np.zeros(0))


def _incidence(m: StateMatrix, state: int) -> sp.csr_matrix:
    sel = m.state == state
    data = np.ones(int(sel.sum()), dtype=np.int32)
    return sp.csr_matrix((data, (m.inv[sel], m.day[sel])),
                         shape=(m.n_investors, m.calendar_length))


def enumerate_tests(m: StateMatrix, ds: Optional[Dataset] = None,
                    block_rows: Optional[int] = None) -> TestTable:
    """Materialise every ``(pair, state_i, state_j)`` test with ``N_PQ >= 1``.

    Windows come from ``ds`` when given, otherwise from the matrix.
    """
    n = m.n_investors
    L = m.calendar_length
    windows = np.asarray(ds.windows if ds is not None else m.windows, dtype=np.int64)
    if n < 2 or len(m) == 0:
        return TestTable.empty(m.investors)
    full = bool((windows[:, 0] == 0).all() and (windows[:, 1] == L - 1).all())

    mats = [_incidence(m, s) for s in STATES]
    totals = [np.asarray(x.sum(axis=1)).ravel().astype(np.int64) for x in mats]
    transposed = [x.T.tocsc() for x in mats]
    # sorted (investor, day) keys per state, for window-restricted counts
    keys = []
    for s in STATES:
        sel = m.state == s
        keys.append(np.sort(m.inv[sel].astype(np.int64) * (L + 1) + m.day[sel]))

    if block_rows is None:
        block_rows = max(1, min(n, 4_000_000 // max(n, 1)))

    parts = []
    for p in STATES:
        for q in STATES:
            for r0 in range(0, n, block_rows):
                r1 = min(n, r0 + block_rows)
                prod = (mats[p][r0:r1] @ transposed[q]).tocoo()
                rows = prod.row.astype(np.int64) + r0
                cols = prod.col.astype(np.int64)
                keep = cols > rows
                if not keep.any():
                    continue
                parts.append((p, q, rows[keep], cols[keep], prod.data[keep].astype(np.int64)))

    if not parts:
        return TestTable.empty(m.investors)

    i = np.concatenate([x[2] for x in parts])
    j = np.concatenate([x[3] for x in parts])
    n_pq = np.concatenate([x[4] for x in parts])
    si = np.concatenate([np.full(x[2].size, x[0], dtype=np.int8) for x in parts])
    sj = np.concatenate([np.full(x[2].size, x[1], dtype=np.int8) for x in parts])

    if full:
        T = np.full(i.size, L, dtype=np.int64)
        n_p = np.empty(i.size, dtype=np.int64)
        n_q = np.empty(i.size, dtype=np.int64)
        for s in STATES:
            mi = si == s
            n_p[mi] = totals[s][i[mi]]
            mj = sj == s
            n_q[mj] = totals[s][j[mj]]
    else:
        lo = np.maximum(windows[i, 0], windows[j, 0])
        hi = np.minimum(windows[i, 1], windows[j, 1])
        T = hi - lo + 1
        n_p = np.empty(i.size, dtype=np.int64)
        n_q = np.empty(i.size, dtype=np.int64)
        for s in STATES:
            for who, state_col, out in ((i, si, n_p), (j, sj, n_q)):
                mask = state_col == s
                base = who[mask] * (L + 1)
                out[mask] = (np.searchsorted(keys[s], base + hi[mask], side="right")
                             - np.searchsorted(keys[s], base + lo[mask], side="left"))

    order = np.lexsort((sj, si, j, i))
    i, j, si, sj, T, n_p, n_q, n_pq = (v[order] for v in (i, j, si, sj, T, n_p, n_q, n_pq))
    pvalue = cooccurrence_pvalues(T, n_p, n_q, n_pq)
    return TestTable(
        m.investors, i.astype(np.int32), j.astype(np.int32), si, sj,
        T.astype(np.int32), n_p.astype(np.int32), n_q.astype(np.int32),
        n_pq.astype(np.int32), pvalue,
    )


# corrections -------------------------------------------------------------------

def bonferroni_threshold(cfg: TestConfig) -> float:
    n = cfg.n_investors
    if n < 2:
        raise ConfigurationError("at least two investors are needed to form a pair")
    return 2.0 * cfg.p_t / (9.0 * n * (n - 1))


def fdr_threshold(pvalues: Sequence[float], cfg: TestConfig) -> Optional[float]:
    """Largest ``p_(k)`` with ``p_(k) < k * p_b``, or ``None`` if no rank qualifies.

    Non-materialised tests all sit at p = 1 and can never qualify, so only
    the supplied p-values need ranking.
    """
    p = np.sort(np.asarray(pvalues, dtype=float))
    if p.size == 0:
        return None
    p_b = bonferroni_threshold(cfg)
    ranks = np.arange(1, p.size + 1, dtype=float)
    ok = np.flatnonzero(p < ranks * p_b)
    if ok.size == 0:
        return None
    return float(p[ok[-1]])


def _validated_mask(pvalues: np.ndarray, cfg: TestConfig) -> np.ndarray:
    if cfg.correction == "bonferroni":
        return pvalues < bonferroni_threshold(cfg)
    thr = fdr_threshold(pvalues, cfg)
    if thr is None:
        return np.zeros(pvalues.shape, dtype=bool)
    return pvalues <= thr


def validate(tests, cfg: TestConfig):
    """Keep the tests that survive ``cfg.correction``; same container type back."""
    if isinstance(tests, TestTable):
        return tests.take(np.flatnonzero(_validated_mask(tests.pvalue, cfg)))
    tests = list(tests)
    mask = _validated_mask(np.array([t.p_value for t in tests], dtype=float), cfg)
    return [t for t, keep in zip(tests, mask) if keep]


def write_tests_tsv(tests: Iterable[PairTest], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(TESTS_HEADER)
        for t in tests:
            w.writerow([t.investor_i, t.investor_j, t.state_i.label, t.state_j.label,
                        t.T, t.N_P, t.N_Q, t.N_PQ, repr(float(t.p_value))])
