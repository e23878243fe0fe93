"""Synthetic trading data with planted synchronised groups.

Group members trade only on their group's signal days (each with
probability ``participation``), in the state their profile dictates; noise
traders trade independently. Volumes are drawn so that the state encoder at
``theta = 0.01`` recovers exactly the intended state.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .community import Partition, nmi
from .errors import ConfigurationError
from .market_data import CATEGORIES, Dataset, write_meta, write_trades, write_windows
from .states import TradeState

PROFILES = ("B-herd", "S-herd", "B/S-alternating", "BS-daytrader", "opposite-pair")
NOISE_ACTIVITY = ("constant", "powerlaw")
_THETA = 0.01


@dataclass(frozen=True)
class GroupSpec:
    size: int
    signal_days: int
    state_profile: str = "B-herd"
    participation: float = 1.0
    category: Optional[str] = None


@dataclass(frozen=True)
class SynthSpec:
    n_days: int
    groups: tuple = ()
    n_noise: int = 0
    noise_rate: float = 0.05
    noise_state_mix: tuple = (0.45, 0.45, 0.10)  # B, S, BS
    volume_scale: int = 100
    noise_activity: str = "constant"
    min_noise_days: int = 20
    random_windows: bool = False
    noise_category: str = "H"
    start_date: str = "2000-01-03"

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(
            g if isinstance(g, GroupSpec) else GroupSpec(**g) for g in self.groups))
        mix = self.noise_state_mix
        if isinstance(mix, dict):
            mix = tuple(float(mix.get(k, 0.0)) for k in ("B", "S", "BS"))
        object.__setattr__(self, "noise_state_mix", tuple(mix))
        self.check()

    def check(self):
        if self.n_days < 1:
            raise ConfigurationError("n_days must be >= 1")
        if self.volume_scale < 1:
            raise ConfigurationError("volume_scale must be a positive integer")
        if not 0 <= self.noise_rate <= 1:
            raise ConfigurationError("noise_rate must be a probability")
        mix = self.noise_state_mix
        if len(mix) != 3 or any(p < 0 or p > 1 for p in mix) or (self.n_noise and abs(sum(mix) - 1) > 1e-9):
            raise ConfigurationError("noise_state_mix must be three probabilities summing to 1")
        if self.noise_activity not in NOISE_ACTIVITY:
            raise ConfigurationError(f"noise_activity must be one of {NOISE_ACTIVITY}")
        if self.noise_category not in CATEGORIES:
            raise ConfigurationError(f"unknown noise category {self.noise_category!r}")
        for g in self.groups:
            if g.size < 2:
                raise ConfigurationError("group size must be >= 2")
            if g.state_profile not in PROFILES:
                raise ConfigurationError(f"unknown state profile {g.state_profile!r}")
            if not 0 <= g.participation <= 1:
                raise ConfigurationError("participation must be a probability")
            if not 1 <= g.signal_days <= self.n_days:
                raise ConfigurationError(
                    f"signal_days={g.signal_days} infeasible for n_days={self.n_days}")
            if g.category is not None and g.category not in CATEGORIES:
                raise ConfigurationError(f"unknown category {g.category!r}")

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = [asdict(g) for g in self.groups]
        d["noise_state_mix"] = list(self.noise_state_mix)
        return d


@dataclass
class GroundTruth:
    labels: dict  # investor -> group index, None for noise traders
    groups: list = field(default_factory=list)  # [{"profile", "signal_days"}]

    def planted(self) -> list:
        return [i for i, g in self.labels.items() if g is not None]

    def to_json(self) -> dict:
        return {
            "labels": {i: ("none" if g is None else g) for i, g in self.labels.items()},
            "groups": self.groups,
        }

    @classmethod
    def from_json(cls, data) -> "GroundTruth":
        if not isinstance(data, dict):
            with open(data, encoding="utf-8") as fh:
                data = json.load(fh)
        labels = {i: (None if g == "none" else int(g)) for i, g in data["labels"].items()}
        return cls(labels, data.get("groups", []))


def _volumes(rng, states: np.ndarray, scale: int):
    n = states.size
    base = rng.integers(scale, 2 * scale + 1, size=n)
    vb = np.zeros(n, dtype=np.int64)
    vs = np.zeros(n, dtype=np.int64)
    is_b = states == TradeState.B
    is_s = states == TradeState.S
    is_bs = states == TradeState.BS
    vb[is_b] = base[is_b]
    vs[is_s] = base[is_s]
    # |vb - vs| / (vb + vs) <= theta / 4 keeps the day balanced
    slack = np.floor(_THETA * base / 2).astype(np.int64)
    delta = rng.integers(0, slack + 1)
    swap = rng.random(n) < 0.5
    hi = base + delta
    vb[is_bs & ~swap] = hi[is_bs & ~swap]
    vs[is_bs & ~swap] = base[is_bs & ~swap]
    vb[is_bs & swap] = base[is_bs & swap]
    vs[is_bs & swap] = hi[is_bs & swap]
    return vb, vs


def generate(spec: SynthSpec, seed: int = 0):
    """Draw a dataset and its ground truth; deterministic in ``(spec, seed)``."""
    spec.check()
    rng = np.random.default_rng(seed)
    n_planted = sum(g.size for g in spec.groups)
    n_total = n_planted + spec.n_noise
    ids = [str(k + 1) for k in rng.permutation(n_total)]

    rows_inv, rows_day, rows_state = [], [], []
    labels, categories, group_info = {}, {}, []
    pos = 0
    for gi, g in enumerate(spec.groups):
        days = np.sort(rng.choice(spec.n_days, size=g.signal_days, replace=False))
        group_info.append({"profile": g.state_profile, "signal_days": days.tolist()})
        half = g.size // 2
        for m in range(g.size):
            inv_id = ids[pos]
            pos += 1
            labels[inv_id] = gi
            categories[inv_id] = g.category or spec.noise_category
            active = days[rng.random(days.size) < g.participation]
            if g.state_profile == "B-herd":
                st = np.full(active.size, TradeState.B)
            elif g.state_profile == "S-herd":
                st = np.full(active.size, TradeState.S)
            elif g.state_profile == "BS-daytrader":
                st = np.full(active.size, TradeState.BS)
            elif g.state_profile == "B/S-alternating":
                rank = np.searchsorted(days, active)
                st = np.where(rank % 2 == 0, TradeState.B, TradeState.S)
            else:  # opposite-pair
                st = np.full(active.size, TradeState.B if m < half else TradeState.S)
            rows_inv.append(np.full(active.size, pos - 1))
            rows_day.append(active)
            rows_state.append(st.astype(np.int8))

    mix = np.asarray(spec.noise_state_mix, dtype=float)
    for _ in range(spec.n_noise):
        inv_id = ids[pos]
        pos += 1
        labels[inv_id] = None
        categories[inv_id] = spec.noise_category
        if spec.noise_activity == "constant":
            rate = spec.noise_rate
        else:
            # Pareto activity: P(days >= x) ~ min_days / x
            target = min(spec.n_days, int(spec.min_noise_days / (1.0 - rng.random())))
            rate = target / spec.n_days
        active = np.flatnonzero(rng.random(spec.n_days) < rate)
        st = rng.choice(3, size=active.size, p=mix / mix.sum()).astype(np.int8)
        rows_inv.append(np.full(active.size, pos - 1))
        rows_day.append(active)
        rows_state.append(st)

    inv = np.concatenate(rows_inv) if rows_inv else np.zeros(0, dtype=np.int64)
    day = np.concatenate(rows_day) if rows_day else np.zeros(0, dtype=np.int64)
    states = np.concatenate(rows_state) if rows_state else np.zeros(0, dtype=np.int8)
    vb, vs = _volumes(rng, states, spec.volume_scale)

    traded = set(inv.tolist())
    windows = None
    if spec.random_windows:
        windows = {}
        lo = np.full(n_total, spec.n_days, dtype=np.int64)
        hi = np.full(n_total, -1, dtype=np.int64)
        np.minimum.at(lo, inv, day)
        np.maximum.at(hi, inv, day)
        for k in sorted(traded):
            first = int(rng.integers(0, lo[k] + 1))
            last = int(rng.integers(hi[k], spec.n_days))
            windows[ids[k]] = (first, last)

    labels = {i: g for k, (i, g) in enumerate(labels.items()) if k in traded}
    categories = {i: c for i, c in categories.items() if i in labels}
    start = np.datetime64(spec.start_date)
    first_day = np.busday_offset(start, 0, roll="forward")
    dates = [str(d) for d in np.busday_offset(first_day, np.arange(spec.n_days))]
    records = zip((ids[k] for k in inv.tolist()), day.tolist(), vb.tolist(), vs.tolist())
    ds = Dataset.from_records(records, spec.n_days, categories=categories,
                              windows=windows, dates=dates)
    return ds, GroundTruth(labels, group_info)


def write_synth(ds: Dataset, truth: GroundTruth, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trades": out / "trades.csv", "meta": out / "meta.csv", "truth": out / "truth.json"}
    write_trades(ds, paths["trades"])
    write_meta(ds, paths["meta"])
    if ds.window_policy == "provided":
        paths["windows"] = out / "windows.csv"
        write_windows(ds, paths["windows"])
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(truth.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return paths


def recovery_score(detected: Partition, truth: GroundTruth) -> float:
    """NMI between planted groups and detected clusters over planted investors.

    Planted investors missing from ``detected`` count as singletons.
    """
    planted = sorted(truth.planted())
    if not planted:
        return 1.0
    true_labels = [truth.labels[i] for i in planted]
    found = [detected.assignment.get(i, ("missing", i)) for i in planted]
    return nmi(true_labels, found)
