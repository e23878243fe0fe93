"""Categorical daily trading states (buying, selling, buying-and-selling)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .market_data import ActivityWindow, Dataset


class TradeState(IntEnum):
    B = 0
    S = 1
    BS = 2

    @property
    def label(self) -> str:
        return self.name.lower()


NO_STATE = -1
STATES = (TradeState.B, TradeState.S, TradeState.BS)


def theta_fraction(theta) -> Fraction:
    """Exact rational value of a threshold given as float, str or Fraction."""
    if isinstance(theta, Fraction):
        frac = theta
    elif isinstance(theta, float):
        # repr gives the shortest decimal that round-trips: 0.01 -> 1/100
        frac = Fraction(repr(theta))
    else:
        frac = Fraction(theta)
    if not 0 < frac < 1:
        raise ConfigurationError(f"theta must lie in (0, 1), got {theta}")
    return frac


def encode_day(vb: int, vs: int, theta=0.01) -> Optional[TradeState]:
    """State of one investor-day, or ``None`` when nothing was traded.

    ``r = (vb - vs) / (vb + vs)`` is compared against ``theta`` by
    cross-multiplication, so ties ``r == +-theta`` resolve to BS exactly.
    """
    frac = theta_fraction(theta)
    if vb < 0 or vs < 0:
        raise ValueError("volumes must be non-negative")
    total = vb + vs
    if total == 0:
        return None
    num, den = frac.numerator, frac.denominator
    diff = (vb - vs) * den
    bound = num * total
    if diff > bound:
        return TradeState.B
    if diff < -bound:
        return TradeState.S
    if vb > 0 and vs > 0:
        return TradeState.BS
    return None


def encode_volumes(vb: np.ndarray, vs: np.ndarray, theta=0.01) -> np.ndarray:
    """Vectorised :func:`encode_day`; returns int8 codes, ``NO_STATE`` for none."""
    frac = theta_fraction(theta)
    num, den = frac.numerator, frac.denominator
    vb = np.asarray(vb)
    vs = np.asarray(vs)
    total = vb + vs
    peak = int(total.max()) if total.size else 0
    if peak * max(num, den) >= 2 ** 62:
        vb = vb.astype(object)
        vs = vs.astype(object)
        total = vb + vs
    diff = (vb - vs) * den
    bound = total * num
    out = np.full(vb.shape, NO_STATE, dtype=np.int8)
    out[np.asarray((vb > 0) & (vs > 0), dtype=bool)] = TradeState.BS
    out[np.asarray(diff > bound, dtype=bool)] = TradeState.B
    out[np.asarray(diff < -bound, dtype=bool)] = TradeState.S
    out[np.asarray(total == 0, dtype=bool)] = NO_STATE
    return out


@dataclass(frozen=True, eq=False)
class StateMatrix:
    """Sparse investor-by-day state map, columnar like :class:`Dataset`."""

    investors: tuple
    calendar_length: int
    inv: np.ndarray
    day: np.ndarray
    state: np.ndarray
    theta: Fraction
    windows: np.ndarray

    def __post_init__(self):
        for arr in (self.inv, self.day, self.state):
            arr.setflags(write=False)

    def __len__(self):
        return int(self.inv.size)

    @property
    def n_investors(self) -> int:
        return len(self.investors)

    def entries(self) -> dict:
        return {
            (self.investors[k], d): TradeState(s)
            for k, d, s in zip(self.inv.tolist(), self.day.tolist(), self.state.tolist())
        }

    def rows(self) -> dict:
        """``investor_id -> {day: TradeState}``."""
        out = {i: {} for i in self.investors}
        for k, d, s in zip(self.inv.tolist(), self.day.tolist(), self.state.tolist()):
            out[self.investors[k]][d] = TradeState(s)
        return out


def build_state_matrix(ds: Dataset, theta=0.01) -> StateMatrix:
    codes = encode_volumes(ds.bought, ds.sold, theta)
    keep = codes != NO_STATE
    return StateMatrix(
        investors=ds.investors,
        calendar_length=ds.calendar_length,
        inv=ds.inv[keep].copy(),
        day=ds.day[keep].copy(),
        state=codes[keep],
        theta=theta_fraction(theta),
        windows=ds.windows,
    )


def state_counts(m: StateMatrix, investor_id, window: ActivityWindow) -> tuple:
    """``(N_B, N_S, N_BS)`` for one investor inside ``window``."""
    try:
        k = m.investors.index(str(investor_id))
    except ValueError:
        return (0, 0, 0)
    sel = (m.inv == k) & (m.day >= window.first_day) & (m.day <= window.last_day)
    counts = np.bincount(m.state[sel], minlength=3)
    return tuple(int(c) for c in counts)


def write_state_csv(m: StateMatrix, path, dates=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["investor_id", "date", "state"])
        for k, d, s in zip(m.inv.tolist(), m.day.tolist(), m.state.tolist()):
            w.writerow([m.investors[k], dates[d] if dates else d, TradeState(s).name])
