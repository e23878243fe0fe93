from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_dataset
from svnet.errors import ConfigurationError
from svnet.market_data import ActivityWindow
from svnet.states import (TradeState, build_state_matrix, encode_day, encode_volumes,
                          state_counts, write_state_csv)

B, S, BS = TradeState.B, TradeState.S, TradeState.BS


@pytest.mark.parametrize("vb,vs,theta,expected", [
    (10, 5, 0.01, B),
    (100, 99, 0.01, BS),
    (0, 7, 0.01, S),
    (0, 0, 0.01, None),
    (50, 50, 0.25, BS),
])
def test_encode_day_examples(vb, vs, theta, expected):
    assert encode_day(vb, vs, theta) == expected


def test_boundary_is_balanced():
    # r = (101 - 99) / 200 = 0.01 exactly; float 0.01 is slightly above 1/100
    assert encode_day(101, 99, 0.01) is BS
    assert encode_day(99, 101, 0.01) is BS
    assert encode_day(3, 1, 0.5) is BS  # r = 1/2
    assert encode_day(3, 1, Fraction(1, 2)) is BS


@pytest.mark.parametrize("theta", [0, 1, -0.1, 1.5])
def test_theta_out_of_range(theta):
    with pytest.raises(ConfigurationError):
        encode_day(1, 1, theta)


def test_vectorised_matches_scalar_on_grid():
    vb, vs = np.meshgrid(np.arange(60), np.arange(60))
    vb, vs = vb.ravel(), vs.ravel()
    for theta in (0.01, 0.1, 0.25, 1 / 3):
        codes = encode_volumes(vb, vs, theta)
        ref = [encode_day(int(b), int(s), theta) for b, s in zip(vb, vs)]
        assert codes.tolist() == [-1 if r is None else int(r) for r in ref]


def test_huge_volumes_do_not_overflow():
    big = 2 ** 62
    codes = encode_volumes(np.array([big, big], dtype=np.int64), np.array([big - 1, 1], dtype=np.int64))
    assert codes.tolist() == [int(BS), int(B)]


def test_build_matrix_examples():
    ds = make_dataset([("a", d, 5, 0) for d in range(3)])
    m = build_state_matrix(ds)
    assert len(m) == 3 and set(m.entries().values()) == {B}
    empty = build_state_matrix(make_dataset([("a", 0, 0, 0)]))
    assert len(empty) == 0


def test_state_counts():
    ds = make_dataset([("i", 2, 3, 0), ("i", 3, 1, 0), ("i", 9, 0, 4)])
    m = build_state_matrix(ds)
    assert state_counts(m, "i", ActivityWindow("i", 0, 9)) == (2, 1, 0)
    assert state_counts(m, "i", ActivityWindow("i", 3, 9)) == (1, 1, 0)
    assert state_counts(m, "ghost", ActivityWindow("ghost", 0, 9)) == (0, 0, 0)


def test_state_csv(tmp_path):
    ds = make_dataset([("i", 0, 3, 0), ("i", 1, 2, 2)], calendar_length=2, dates=["d0", "d1"])
    write_state_csv(build_state_matrix(ds), tmp_path / "s.csv", ds.dates)
    assert (tmp_path / "s.csv").read_text() == "investor_id,date,state\ni,d0,B\ni,d1,BS\n"


vol = st.integers(0, 10 ** 6)
thetas = st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(999, 1000))


@settings(max_examples=300)
@given(vol, vol, thetas)
def test_matches_exact_rational(vb, vs, theta):
    got = encode_day(vb, vs, theta)
    if vb + vs == 0:
        assert got is None
        return
    r = Fraction(vb - vs, vb + vs)
    expected = B if r > theta else S if r < -theta else BS
    assert got is expected


@settings(max_examples=300)
@given(vol, vol, thetas)
def test_antisymmetry(vb, vs, theta):
    a, b = encode_day(vb, vs, theta), encode_day(vs, vb, theta)
    swap = {B: S, S: B, BS: BS, None: None}
    assert b is swap[a]


@settings(max_examples=300)
@given(vol, vol, thetas, thetas)
def test_theta_monotone(vb, vs, t1, t2):
    lo, hi = sorted((t1, t2))
    a, b = encode_day(vb, vs, lo), encode_day(vb, vs, hi)
    assert a == b or (a in (B, S) and b is BS)


@settings(max_examples=300)
@given(vol, vol, st.integers(1, 1000), thetas)
def test_scale_invariance(vb, vs, c, theta):
    assert encode_day(c * vb, c * vs, theta) == encode_day(vb, vs, theta)
