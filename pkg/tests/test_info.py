from collections import Counter
from math import log2

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critnet.info import (ais, entropy, joint_mi, lagged_mi, lagged_mi_curve, memory_capacity,
                          mutual_information, pair_info, past_states, transfer_entropy)
from critnet.records import InputError

N = 200_000


def _bits(n, p=0.5, seed=0):
    return (np.random.default_rng(seed).random(n) < p).astype(np.int64)


def _h2(p):
    return 0.0 if p in (0.0, 1.0) else -p * log2(p) - (1 - p) * log2(1 - p)


# --------------------------------------------------------------------------- naive oracle

def _naive_h(rows):
    c = Counter(rows)
    n = sum(c.values())
    return -sum(v / n * log2(v / n) for v in c.values())


def _naive_mi(a, b):
    return _naive_h(a) + _naive_h(b) - _naive_h(list(zip(a, b)))


def _naive_cmi(a, b, z):
    return (_naive_h(list(zip(a, z))) + _naive_h(list(zip(b, z)))
            - _naive_h(list(zip(a, b, z))) - _naive_h(z))


def _past(x, l):
    return [tuple(x[t - l:t]) for t in range(l, len(x))]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=6, max_size=20), st.data(), st.integers(1, 3))
def test_brute_force_equivalence(x, data, l):
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(x), max_size=len(x)))
    x, y = np.array(x), np.array(y)
    xs, ys = x.tolist(), y.tolist()
    assert entropy(x, 1) == pytest.approx(_naive_h(xs), abs=1e-12)
    assert mutual_information(x, y, 1) == pytest.approx(_naive_mi(xs, ys), abs=1e-12)
    if len(x) > l:
        assert ais(x, l, 1) == pytest.approx(_naive_mi(xs[l:], _past(xs, l)), abs=1e-12)
        assert transfer_entropy(y, x, l, 1) == pytest.approx(
            _naive_cmi(xs[l:], _past(ys, l), _past(xs, l)), abs=1e-12)
        both = list(zip(_past(xs, l), _past(ys, l)))
        assert joint_mi(x, y, l, 1) == pytest.approx(_naive_mi(xs[l:], both), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=30, max_size=300), st.data())
def test_chain_rule_and_symmetry(x, data):
    y = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(x), max_size=len(x))))
    x = np.array(x)
    r = pair_info(x, y, l=3, min_samples=1)
    assert r.joint_MI == pytest.approx(r.AIS + r.TE, abs=1e-12)
    assert mutual_information(x, y, 1) == pytest.approx(mutual_information(y, x, 1), abs=1e-12)
    for v in (r.H, r.MI, r.AIS, r.TE, r.joint_MI):
        assert v >= 0
    assert r.MI <= min(r.H, entropy(y, 1)) + 1e-12
    assert r.AIS <= r.H + 1e-12


# --------------------------------------------------------------------------- examples

def test_entropy_examples():
    assert entropy(np.tile([0, 1], 1000)) == pytest.approx(1.0)
    assert entropy(np.zeros(2000, int)) == 0.0
    quarter = np.r_[np.ones(500, int), np.zeros(1500, int)]
    assert entropy(quarter) == pytest.approx(0.8113, abs=1e-4)


def test_entropy_input_errors():
    with pytest.raises(InputError):
        entropy([])
    with pytest.raises(InputError):
        entropy(np.zeros(10, int))


def test_independent_bits_have_small_mi():
    x, y = _bits(N, seed=1), _bits(N, seed=2)
    # one degree of freedom: expected plug-in bias 1/(2 n ln 2)
    assert mutual_information(x, y) < 10 / (2 * N * np.log(2))


def test_delayed_copy_transfer_entropy():
    x = _bits(N, seed=3)
    y = np.r_[0, x[:-1]]
    assert transfer_entropy(x, y, l=4) == pytest.approx(1.0, abs=1e-3)
    assert ais(y, l=4) < 1e-3


def test_period_two_series_stores_one_bit():
    x = np.tile([0, 1], 5000)
    for l in (1, 2, 4):
        assert ais(x, l) == pytest.approx(1.0)


def test_past_state_layout():
    x = np.array([1, 0, 0, 1, 1])
    # bit k-1 holds x[t-k]
    assert past_states(x, 2).tolist() == [1 * 2 + 0, 0 * 2 + 0, 0 * 2 + 1]
    with pytest.raises(InputError):
        past_states(x, 5)


def test_delayed_copy_lagged_mi_and_memory_capacity():
    x = _bits(N, seed=4)
    y = np.r_[np.zeros(3, int), x[:-3]]
    curve = lagged_mi_curve(x, y, n_tau=20)
    assert curve[2] == pytest.approx(1.0, abs=1e-3)
    assert np.delete(curve, 2).max() < 1e-3
    assert lagged_mi(x, y, 3) == curve[2]
    assert memory_capacity(x, y, n_tau=20, dt_bin=4.9) == pytest.approx(4.9, rel=0.01)


def test_independent_memory_capacity_is_small():
    x, y = _bits(N, seed=5), _bits(N, seed=6)
    assert abs(memory_capacity(x, y, n_tau=20, dt_bin=1.0)) < 1e-3


def test_memory_capacity_needs_enough_bins():
    with pytest.raises(InputError):
        memory_capacity(np.zeros(50, int), np.zeros(50, int), n_tau=100)


def test_memory_capacity_matches_markov_chain_enumeration():
    """Noisy observation of a symmetric two-state Markov chain."""
    stay, flip, n_tau, dt = 0.9, 0.05, 60, 4.9
    rng = np.random.default_rng(7)
    steps = rng.random(N) >= stay
    x = np.cumsum(steps) % 2
    y = x ^ (rng.random(N) < flip)

    # exact lagged MI: P(x(t) == y(t+tau)) from the transition matrix power
    P = np.array([[stay, 1 - stay], [1 - stay, stay]])
    E = np.array([[1 - flip, flip], [flip, 1 - flip]])
    exact = []
    for tau in range(1, n_tau + 1):
        joint = 0.5 * np.linalg.matrix_power(P, tau) @ E
        exact.append(sum(-joint[i, j] * log2(joint[i, j] / 0.25) for i in range(2)
                         for j in range(2)) * -1)
    exact = np.array(exact)
    mc_exact = dt * np.sum(exact - exact[-1])

    curve = lagged_mi_curve(x, y, n_tau)
    assert np.abs(curve - exact).max() < 0.005
    assert memory_capacity(x, y, n_tau, dt) == pytest.approx(mc_exact, rel=0.10)
