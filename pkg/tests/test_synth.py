import json
from itertools import combinations

import numpy as np
import pytest
from sklearn.metrics import normalized_mutual_info_score

from svnet.community import Partition, detect_communities
from svnet.errors import ConfigurationError
from svnet.market_data import filter_active, load_trades
from svnet.network import OPPOSITE_BITS, assemble_network, link_weight_graph, strip_opposite_links
from svnet.states import TradeState, build_state_matrix, encode_day
from svnet.synth import GroundTruth, GroupSpec, SynthSpec, generate, recovery_score, write_synth
from svnet.validation import TestConfig, enumerate_tests, validate


def _rows(ds):
    m = build_state_matrix(ds)
    return m, m.rows()


def test_b_herd_rows_identical():
    spec = SynthSpec(n_days=60, groups=[GroupSpec(5, 12, "B-herd")])
    ds, truth = generate(spec, seed=1)
    m, rows = _rows(ds)
    signal = truth.groups[0]["signal_days"]
    for inv in ds.investors:
        assert rows[inv] == {d: TradeState.B for d in signal}


def test_noise_only_truth():
    ds, truth = generate(SynthSpec(n_days=100, n_noise=100, noise_rate=0.1), seed=2)
    assert truth.planted() == []
    assert set(truth.labels.values()) == {None}
    assert set(truth.to_json()["labels"].values()) == {"none"}


def test_alternating_group_cooccurrence():
    spec = SynthSpec(n_days=80, groups=[GroupSpec(4, 15, "B/S-alternating")])
    ds, truth = generate(spec, seed=0)
    _, rows = _rows(ds)
    for a, b in combinations(ds.investors, 2):
        shared = [rows[a][d] for d in rows[a] if rows[b].get(d) == rows[a][d]]
        assert len(shared) == 15
        assert shared.count(TradeState.B) == 8 and shared.count(TradeState.S) == 7


@pytest.mark.parametrize("profile,states", [
    ("S-herd", {TradeState.S}), ("BS-daytrader", {TradeState.BS}),
    ("opposite-pair", {TradeState.B, TradeState.S}),
])
def test_profiles(profile, states):
    ds, _ = generate(SynthSpec(n_days=50, groups=[GroupSpec(6, 10, profile)]), seed=4)
    _, rows = _rows(ds)
    assert {s for r in rows.values() for s in r.values()} == states


def test_volumes_encode_to_intended_state():
    spec = SynthSpec(n_days=200, groups=[GroupSpec(4, 30, "BS-daytrader"), GroupSpec(4, 30, "B/S-alternating")],
                     n_noise=50, noise_rate=0.2, volume_scale=1000)
    ds, _ = generate(spec, seed=9)
    for r in ds.records():
        state = encode_day(r.volume_bought, r.volume_sold, 0.01)
        assert state is not None
        if state is TradeState.BS:
            assert r.volume_bought > 0 and r.volume_sold > 0
            assert abs(r.volume_bought - r.volume_sold) <= 0.005 * (r.volume_bought + r.volume_sold)


def test_infeasible_spec():
    with pytest.raises(ConfigurationError):
        SynthSpec(n_days=10, groups=[GroupSpec(3, 11)])
    with pytest.raises(ConfigurationError):
        SynthSpec(n_days=10, groups=[GroupSpec(1, 5)])
    with pytest.raises(ConfigurationError):
        SynthSpec(n_days=10, groups=[GroupSpec(3, 5, participation=1.5)])
    with pytest.raises(ConfigurationError):
        SynthSpec(n_days=10, n_noise=3, noise_state_mix=(0.5, 0.2, 0.2))


def test_reproducible_dump(tmp_path):
    spec = SynthSpec(n_days=120, groups=[GroupSpec(5, 20, "B/S-alternating", 0.8, "FI")],
                     n_noise=40, noise_activity="powerlaw", random_windows=True)
    a = write_synth(*generate(spec, seed=11), tmp_path / "a")
    b = write_synth(*generate(spec, seed=11), tmp_path / "b")
    assert set(a) == {"trades", "meta", "truth", "windows"}
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    c = write_synth(*generate(spec, seed=12), tmp_path / "c")
    assert a["trades"].read_bytes() != c["trades"].read_bytes()


def test_written_files_load_back(tmp_path):
    spec = SynthSpec(n_days=60, groups=[GroupSpec(3, 10, "S-herd", category="G")],
                     n_noise=5, random_windows=True)
    ds, truth = generate(spec, seed=5)
    paths = write_synth(ds, truth, tmp_path)
    back = load_trades(paths["trades"], paths["meta"], paths["windows"])
    assert back.n_records == ds.n_records
    assert dict(back.categories) == dict(ds.categories)
    assert GroundTruth.from_json(paths["truth"]).labels == truth.labels


def test_spec_json_round_trip(tmp_path):
    spec = SynthSpec(n_days=30, groups=[GroupSpec(2, 5)], n_noise=3,
                     noise_state_mix={"B": 0.5, "S": 0.5, "BS": 0.0})
    (tmp_path / "s.json").write_text(json.dumps(spec.to_dict()))
    assert SynthSpec.from_json(tmp_path / "s.json") == spec


def test_recovery_examples():
    truth = GroundTruth({str(k): k // 20 for k in range(60)})
    exact = Partition({str(k): k // 20 for k in range(60)})
    assert recovery_score(exact, truth) == 1.0
    giant = Partition(dict.fromkeys(map(str, range(60)), 0))
    assert recovery_score(giant, truth) == 0.0
    split = Partition({str(k): (k // 20 if k >= 20 else 10 + k // 10) for k in range(60)})
    true = [k // 20 for k in range(60)]
    found = [split.assignment[str(k)] for k in range(60)]
    ref = normalized_mutual_info_score(true, found, average_method="arithmetic")
    assert recovery_score(split, truth) == pytest.approx(ref, abs=1e-12)
    # closed form from the confusion table: H(true) = ln 3, H(found) = ln 3 + ln(2) / 3
    assert ref == pytest.approx(np.log(3) / ((2 * np.log(3) + np.log(2) / 3) / 2), abs=1e-12)


def test_recovery_missing_investors_are_singletons():
    truth = GroundTruth({"a": 0, "b": 0, "c": 1, "d": 1, "n": None})
    part = Partition({"a": 0, "b": 0})
    expected = normalized_mutual_info_score([0, 0, 1, 1], [0, 0, 1, 2], average_method="arithmetic")
    assert recovery_score(part, truth) == pytest.approx(expected, abs=1e-12)


def _bonferroni_partition(ds):
    ds = filter_active(ds, 5)
    m = build_state_matrix(ds)
    tests = enumerate_tests(m, ds)
    validated = validate(tests, TestConfig(ds.n_investors))
    net = assemble_network(validated, ds.categories, nodes=ds.investors)
    return net, detect_communities(link_weight_graph(strip_opposite_links(net)))


@pytest.mark.parametrize("seed", range(3))
def test_perfect_synchrony_recovered(seed):
    spec = SynthSpec(n_days=250, groups=[GroupSpec(10, 10, p) for p in
                                         ("B-herd", "S-herd", "B/S-alternating")])
    ds, truth = generate(spec, seed)
    _, part = _bonferroni_partition(ds)
    assert recovery_score(part, truth) == 1.0


def test_opposite_pair_links_vanish_after_stripping():
    spec = SynthSpec(n_days=300, groups=[GroupSpec(8, 30, "opposite-pair")], n_noise=30, noise_rate=0.1)
    ds, _ = generate(spec, seed=0)
    net, _ = _bonferroni_partition(ds)
    assert any(l.mask & OPPOSITE_BITS for l in net.links)
    assert not any(l.mask & OPPOSITE_BITS for l in strip_opposite_links(net).links)
