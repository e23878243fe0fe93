import pytest
from hypothesis import given, settings, strategies as st

from svnet.community import WeightedGraph
from svnet.network import (COLORS, COMBINATIONS, OPPOSITE_BITS, MultiLink, assemble_network,
                           attribute_name, bit, combination_census, combination_label,
                           connected_components, link_weight_graph, mask_bits, mask_of,
                           parse_mask_bits, strip_opposite_links, transpose_mask,
                           ValidatedNetwork)
from svnet.states import TradeState

B, S, BS = TradeState.B, TradeState.S, TradeState.BS


def test_bit_layout():
    order = [(B, B), (B, S), (B, BS), (S, B), (S, S), (S, BS), (BS, B), (BS, S), (BS, BS)]
    assert [bit(p, q) for p, q in order] == [1 << k for k in range(9)]
    assert mask_bits(mask_of((B, B))) == "100000000"
    assert mask_bits(mask_of((BS, BS))) == "000000001"


def test_table_of_combinations():
    assert COMBINATIONS["C4"] == mask_of((B, B), (S, S))
    assert COMBINATIONS["C7"] == mask_of((S, B))
    assert COMBINATIONS["C9"] == mask_of((B, BS), (S, BS))
    assert COLORS == {"C1": "magenta", "C2": "green", "C3": "apricot", "C4": "black",
                      "C5": "blue", "C6": "orange", "C7": "tan", "C8": "brown", "C9": "purple"}
    # combinations are undirected: a transpose keeps its label
    assert combination_label(mask_of((B, S))) == "C7"
    assert combination_label(mask_of((BS, S))) == "C6"
    assert combination_label(mask_of((B, S), (S, B))) is None
    assert attribute_name(mask_of((B, S), (BS, BS))) == "b-s+bs-bs"


def test_c4_link():
    net = assemble_network([("1", "2", "b", "b"), ("1", "2", "s", "s")])
    (link,) = net.links
    assert link.mask == COMBINATIONS["C4"] and link.weight == 2 and link.label == "C4"
    assert link.color == "black"


def test_c1_link():
    (link,) = assemble_network([("1", "2", B, B)]).links
    assert link.label == "C1" and link.weight == 1


def test_empty_validated_set_keeps_nodes():
    net = assemble_network([], meta={"1": "FI", "2": "H"})
    assert net.nodes == ("1", "2") and net.links == ()
    assert dict(net.categories) == {"1": "FI", "2": "H"}


def test_orientation_is_normalised():
    # (j_b, i_s) sets the (s, b) bit of the (i, j) link
    (link,) = assemble_network([("9", "3", "b", "s")]).links
    assert (link.investor_i, link.investor_j) == ("3", "9")
    assert link.mask == bit(S, B)


@pytest.mark.parametrize("mask,after", [
    (COMBINATIONS["C7"], None),
    (COMBINATIONS["C4"], COMBINATIONS["C4"]),
    (mask_of((B, B), (B, S)), mask_of((B, B))),
])
def test_stripping_examples(mask, after):
    net = ValidatedNetwork(("1", "2"), (MultiLink("1", "2", mask),))
    out = strip_opposite_links(net)
    if after is None:
        assert out.links == ()
    else:
        assert out.links[0].mask == after
        assert out.links[0].weight == bin(after).count("1")


def test_census():
    c1 = [("1", "2", B, B), ("2", "3", B, B), ("3", "4", B, B)]
    census = combination_census(assemble_network(c1))
    assert [(e.label, e.count) for e in census] == [("C1", 3)]
    assert combination_census(assemble_network([])) == []
    mixed = assemble_network([("1", "2", B, B), ("3", "4", S, S), ("5", "6", B, B), ("5", "6", S, S)])
    census = combination_census(mixed)
    assert sorted(e.label for e in census) == ["C1", "C2", "C4"]
    assert all(e.count == 1 for e in census)


@pytest.mark.parametrize("label,weight", [("C8", 3), ("C1", 1), ("C9", 2)])
def test_link_weights(label, weight):
    net = ValidatedNetwork(("a", "b"), (MultiLink("a", "b", COMBINATIONS[label]),))
    g = link_weight_graph(net)
    assert isinstance(g, WeightedGraph)
    assert g.edges == (("a", "b", float(weight)),)


def test_components():
    net = assemble_network([("1", "2", B, B), ("2", "3", B, B)])
    assert connected_components(net) == [["1", "2", "3"]]
    net = assemble_network([], meta={"1": "H", "2": "H"})
    assert connected_components(net) == [["1"], ["2"]]
    net = assemble_network([("1", "2", B, B), ("3", "4", S, S)])
    assert [len(c) for c in connected_components(net)] == [2, 2]


def test_mask_bits_round_trip():
    for m in range(512):
        assert parse_mask_bits(mask_bits(m)) == m
    with pytest.raises(ValueError):
        parse_mask_bits("10")


tests_st = st.lists(st.tuples(st.sampled_from("123456"), st.sampled_from("123456"),
                              st.sampled_from([B, S, BS]), st.sampled_from([B, S, BS])),
                    max_size=40)


@settings(max_examples=200)
@given(tests_st)
def test_orientation_invariance(tests):
    flipped = [(j, i, q, p) for i, j, p, q in tests]
    assert assemble_network(tests).links == assemble_network(flipped).links


@settings(max_examples=200)
@given(tests_st)
def test_weight_is_popcount_and_stripping_idempotent(tests):
    net = assemble_network(tests)
    once = strip_opposite_links(net)
    assert strip_opposite_links(once).links == once.links
    for link in net.links + once.links:
        assert link.weight == bin(link.mask).count("1") and link.mask
    assert all(not (l.mask & OPPOSITE_BITS) for l in once.links)
    assert all(l.investor_i != l.investor_j for l in net.links)
    pairs = [(l.investor_i, l.investor_j) for l in net.links]
    assert len(pairs) == len(set(pairs))


@given(st.integers(0, 511))
def test_transpose_involution(m):
    assert transpose_mask(transpose_mask(m)) == m
    assert bin(transpose_mask(m)).count("1") == bin(m).count("1")
