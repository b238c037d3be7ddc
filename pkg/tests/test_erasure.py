import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lerw.erasure import (
    erase_full,
    erase_windowed,
    erase_windowed_naive,
    loop_free_mask,
    window_length,
    window_spec,
    z_indicator,
)
from lerw.walk import WalkPath, as_path
from oracles import brute_loop_free, forward_loop_erasure, random_walk_points, windowed_sigma_reference

O, E1, E2 = (0, 0, 0), (1, 0, 0), (0, 1, 0)
E12 = (1, 1, 0)
SHORT = as_path([O, E1, O, E2])
# not a nearest-neighbour walk (O -> e1+e2 jumps); erasure only needs point equality
NESTED = WalkPath(np.array([O, E1, O, E12, E1, O], dtype=np.int64))


@st.composite
def walk_and_window(draw, max_n=400, dims=(1, 2, 3)):
    seed = draw(st.integers(0, 2**32))
    n = draw(st.integers(0, max_n))
    dim = draw(st.sampled_from(dims))
    pts = random_walk_points(random.Random(seed), n, dim)
    W = draw(st.integers(1, max(1, n + 2)))
    return as_path(pts), W


# -- window length --------------------------------------------------------------


@pytest.mark.parametrize(
    "N, alpha, path_len, expected",
    [
        (100, 0.5, 10**6, 10),
        (10, 2.0, 10**6, 100),
        (10, math.inf, 500, 500),
        (1024, 0.4, 10**6, 16),
        (1024, 0.6, 10**6, 64),
        (2**14, 0.4, 10**6, 48),
        (32, 2.5, 10**6, 5792),
        (7, 0.0, 10, 1),
        (10, 3.0, 50, 50),
    ],
)
def test_window_length(N, alpha, path_len, expected):
    assert window_length(N, alpha, path_len) == expected


@pytest.mark.parametrize("args", [(0, 0.5, 10), (10, -0.1, 10), (10, 0.5, 0), (10, math.nan, 10)])
def test_window_length_rejects(args):
    with pytest.raises(ValueError):
        window_length(*args)


def test_window_spec_records_inputs():
    spec = window_spec(100, 0.5, 1000)
    assert (spec.N, spec.alpha, spec.W) == (100, 0.5, 10)


# -- hand-evaluated examples --------------------------------------------------------


def test_distinct_points_untouched():
    path = as_path([O, E1, E12, (1, 1, 1), (1, 1, 2)])
    for W in (1, 2, 5, 100):
        tr = erase_windowed(path, W)
        assert tr.sigma.tolist() == [0, 1, 2, 3, 4]
        assert np.array_equal(tr.erased_path, path.points)


def test_short_loop_erased_when_window_covers_it():
    tr = erase_windowed(SHORT, 2)
    assert tr.sigma.tolist() == [2, 3]
    assert tr.erased_path.tolist() == [list(O), list(E2)]
    assert tr.y_flags.tolist() == [False, False, True, True]
    assert tr.rho.tolist() == [0, 0, 1, 2]


def test_short_loop_kept_when_window_too_small():
    tr = erase_windowed(SHORT, 1)
    assert tr.sigma.tolist() == [0, 1, 2, 3]
    assert tr.rho.tolist() == [1, 2, 3, 4]


def test_nested_loops_sup_rule():
    tr = erase_windowed(NESTED, 5)
    assert tr.sigma.tolist() == [5]
    assert tr.erased_path.tolist() == [list(O)]


def test_nested_loops_narrow_window():
    # W = 2: the pivot O revisits at 2; from 3 the point e1+e2 never recurs;
    # from 4 the pivot e1 has no revisit within 2 steps.
    tr = erase_windowed(NESTED, 2)
    assert tr.sigma.tolist() == [2, 3, 4, 5]


def test_hand_examples_naive_agrees():
    for path in (SHORT, NESTED):
        for W in (1, 2, 3, 5, 9):
            assert erase_windowed(path, W) == erase_windowed_naive(path, W)


def test_full_erasure_examples():
    assert erase_full(SHORT).erased_path.tolist() == [list(O), list(E2)]
    assert erase_full(NESTED).erased_path.tolist() == [list(O)]


def test_single_point_path():
    tr = erase_windowed(as_path([O]), 3)
    assert tr.sigma.tolist() == [0]
    assert tr.rho.tolist() == [1]


def test_erase_rejects_bad_window():
    with pytest.raises(ValueError):
        erase_windowed(SHORT, 0)
    with pytest.raises(ValueError):
        erase_windowed_naive(SHORT, -3)
    with pytest.raises(ValueError):
        loop_free_mask(SHORT, 0)


def test_loop_free_examples():
    assert loop_free_mask(SHORT, 2).tolist() == [False, False, False, True]
    assert loop_free_mask(SHORT, 1).tolist() == [True, True, True, True]
    assert loop_free_mask(NESTED, 5).tolist() == [False] * 6
    assert loop_free_mask(NESTED, 2).tolist() == [False, False, False, True, True, True]


def test_z_indicator_examples():
    mask = [False, False, False, True]
    assert z_indicator(mask, 0, 2) is True
    assert z_indicator(mask, 0, 3) is False
    everywhere = [True] * 6
    for j in range(6):
        for k in range(j, 6):
            assert z_indicator(everywhere, j, k) is False


@pytest.mark.parametrize("j, k", [(-1, 2), (2, 1), (0, 4)])
def test_z_indicator_range(j, k):
    with pytest.raises(IndexError):
        z_indicator([True, False, True, True], j, k)


# -- properties against the oracles -----------------------------------------------


@given(walk_and_window())
@settings(max_examples=300, deadline=None)
def test_fast_equals_naive_equals_reference(case):
    path, W = case
    fast = erase_windowed(path, W)
    assert fast == erase_windowed_naive(path, W)
    assert fast.sigma.tolist() == windowed_sigma_reference(path.points, W)


@given(walk_and_window())
@settings(max_examples=300, deadline=None)
def test_trace_invariants(case):
    path, W = case
    tr = erase_windowed(path, W)
    tr.check(path)
    mask = loop_free_mask(path, W)
    assert np.all(tr.y_flags[mask]), "a loop-free index was erased"


@given(walk_and_window(max_n=200))
@settings(max_examples=200, deadline=None)
def test_loop_free_mask_matches_brute_force(case):
    path, W = case
    assert loop_free_mask(path, W).tolist() == brute_loop_free(path.points, W)


@given(walk_and_window())
@settings(max_examples=200, deadline=None)
def test_full_window_is_chronological_erasure(case):
    path, _ = case
    out = erase_full(path).erased_path
    assert [tuple(p) for p in out] == forward_loop_erasure(path.points)
    assert len({tuple(p) for p in out}) == len(out)


@given(walk_and_window())
@settings(max_examples=100, deadline=None)
def test_window_beyond_path_is_full_erasure(case):
    path, W = case
    big = len(path) + W
    assert erase_windowed(path, big).sigma.tolist() == erase_full(path).sigma.tolist()


@given(walk_and_window())
@settings(max_examples=100, deadline=None)
def test_unit_window_is_identity(case):
    # a nearest-neighbour walk cannot revisit a point after one step
    path, _ = case
    tr = erase_windowed(path, 1)
    assert tr.sigma.tolist() == list(range(len(path)))


@given(walk_and_window())
@settings(max_examples=100, deadline=None)
def test_self_avoiding_output_is_fixed_point(case):
    path, _ = case
    loop_free = as_path(forward_loop_erasure(path.points))
    tr = erase_full(loop_free)
    assert np.array_equal(tr.erased_path, loop_free.points)
    for W in (1, 3, len(loop_free)):
        assert erase_windowed(loop_free, W).sigma.tolist() == list(range(len(loop_free)))


@given(walk_and_window(max_n=150))
@settings(max_examples=100, deadline=None)
def test_z_indicator_matches_mask(case):
    path, W = case
    mask = loop_free_mask(path, W)
    n = mask.size
    for j in range(0, n, 7):
        for k in range(j, n, 5):
            assert z_indicator(mask, j, k) == (not any(mask[j : k + 1]))


def test_long_walk_fast_equals_naive():
    pts = random_walk_points(random.Random(123), 100_000, 3)
    path = as_path(pts)
    for W in (16, 48, 1000):
        assert erase_windowed(path, W) == erase_windowed_naive(path, W)
