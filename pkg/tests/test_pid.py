import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from critnet.pid import (PIDResult, broja_pid, estimate_joint, mi_t_s, mi_t_s1s2,
                         read_joint_table, solve_broja, write_joint_table)
from critnet.records import InputError

CONSISTENCY = 1e-6


def _and_table():
    p = np.zeros((2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            p[a & b, a, b] = 0.25
    return p


def _mi_of_family(base, thetas):
    """I_Q(T; S1, S2) for Q_t = base_t + theta_t * [[1, -1], [-1, 1]] (binary T)."""
    pattern = np.array([[1.0, -1.0], [-1.0, 1.0]])
    q = base[None, None] + thetas[..., None, None] * pattern  # (..., t, s1, s2)
    q = np.where(q < 0, np.nan, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        qs = q.sum(axis=-3, keepdims=True)
        qt = q.sum(axis=(-2, -1), keepdims=True)
        terms = np.where(q > 0, q * np.log2(q / (qs * qt)), 0.0)
    return np.nansum(terms, axis=(-3, -2, -1)) + np.where(np.isnan(q).any(axis=(-3, -2, -1)),
                                                          np.inf, 0.0)


def _grid_min_binary(p, rounds=10, n=201):
    """Zooming exhaustive search over the feasible polytope of a 2x2x2 table.

    Each target block has one free coordinate ``theta_t`` whose feasible
    interval follows from non-negativity; the grid always includes the
    interval ends, where the optimum often lies.
    """
    lo = np.maximum(-p[:, 0, 0], -p[:, 1, 1])
    hi = np.minimum(p[:, 0, 1], p[:, 1, 0])
    a, b = lo.copy(), hi.copy()
    best = np.inf
    for _ in range(rounds):
        g0 = np.linspace(a[0], b[0], n)
        g1 = np.linspace(a[1], b[1], n)
        th = np.stack(np.meshgrid(g0, g1, indexing="ij"), axis=-1)
        vals = _mi_of_family(p, th)
        k = np.unravel_index(np.nanargmin(vals), vals.shape)
        best = min(best, vals[k])
        step = (b - a) / (n - 1)
        a = np.maximum(lo, th[k] - 2 * step)
        b = np.minimum(hi, th[k] + 2 * step)
    return best


# --------------------------------------------------------------------------- examples

def test_xor_is_pure_synergy():
    p = np.zeros((2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            p[a ^ b, a, b] = 0.25
    r = broja_pid(p)
    assert r.syn == pytest.approx(1.0, abs=1e-6)
    for v in (r.unq1, r.unq2, r.shd):
        assert abs(v) < 1e-6


def test_copy_is_pure_redundancy():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 0.5
    r = broja_pid(p)
    assert r.shd == pytest.approx(1.0, abs=1e-9)
    for v in (r.unq1, r.unq2, r.syn):
        assert abs(v) < 1e-9


def test_and_against_one_parameter_oracle():
    p = _and_table()
    # feasible set: only the t=0 block has freedom, theta = Q(0, 1, 1) in [0, 1/4]
    # (t=1 is a single cell, pinned by its marginals)
    thetas = np.linspace(0.0, 0.25, 200_001)
    q = np.broadcast_to(p, (len(thetas), 2, 2, 2)).copy()
    q[:, 0, 0, 0] += thetas
    q[:, 0, 0, 1] -= thetas
    q[:, 0, 1, 0] -= thetas
    q[:, 0, 1, 1] += thetas
    qs = q.sum(axis=1, keepdims=True)
    qt = q.sum(axis=(2, 3), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(q > 0, q * np.log2(q / (qs * qt)), 0.0).sum(axis=(1, 2, 3))
    best = vals.min()

    r = broja_pid(p)
    joint = mi_t_s1s2(p)
    assert joint - r.syn == pytest.approx(best, abs=1e-6)
    assert r.syn == pytest.approx(0.5, abs=1e-3)
    assert r.shd == pytest.approx(0.3113, abs=1e-3)
    assert abs(r.unq1) < 1e-6 and abs(r.unq2) < 1e-6


def test_constant_target_has_no_information():
    rng = np.random.default_rng(0)
    x = np.zeros(5000, int)
    s = (rng.random(5000) < 0.5).astype(int)
    p = estimate_joint(x, s, rng.integers(0, 2, 5000), l=2)
    r = broja_pid(p)
    for v in (r.unq1, r.unq2, r.shd, r.syn, r.joint_mi):
        assert abs(v) < 1e-9


def test_identical_sources_live_on_diagonal():
    rng = np.random.default_rng(1)
    x = rng.integers(0, 2, 5000)
    s = rng.integers(0, 2, 5000)
    p = estimate_joint(x, s, s, l=1)
    assert p.shape == (2, 2, 2)
    assert p[:, 0, 1].sum() == 0 and p[:, 1, 0].sum() == 0


def test_xor_joint_estimate():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 2, 20_001)
    b = rng.integers(0, 2, 20_001)
    t = np.r_[0, a[:-1] ^ b[:-1]]
    p = estimate_joint(t, a, b, l=1)
    valid = np.zeros((2, 2, 2), bool)
    for i in (0, 1):
        for j in (0, 1):
            valid[i ^ j, i, j] = True
    assert np.all(p[~valid] == 0)
    assert np.allclose(p[valid], 0.25, atol=0.02)


def test_estimate_joint_errors():
    with pytest.raises(InputError):
        estimate_joint(np.zeros(10, int), np.zeros(10, int), np.zeros(10, int), l=4)
    with pytest.raises(InputError):
        estimate_joint(np.zeros(2000, int), np.zeros(1999, int), np.zeros(2000, int))
    with pytest.raises(InputError):
        estimate_joint(np.full(2000, 2), np.zeros(2000, int), np.zeros(2000, int))


# --------------------------------------------------------------------------- oracles

@pytest.mark.parametrize("seed", range(6))
def test_binary_tables_match_exhaustive_grid(seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(8)).reshape(2, 2, 2)
    r = broja_pid(p)
    assert mi_t_s1s2(p) - r.syn == pytest.approx(_grid_min_binary(p), abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_random_tables_match_conic_solver(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(seed)
    shape = [(2, 4, 4), (2, 16, 16), (3, 5, 7)][seed]
    p = rng.dirichlet(np.full(int(np.prod(shape)), 0.5)).reshape(shape)

    nt, n1, n2 = shape
    q = cp.Variable(shape[0] * n1 * n2, nonneg=True)
    idx = np.arange(q.size).reshape(shape)
    cons = []
    for t in range(nt):
        cons += [cp.sum(q[idx[t, i, :]]) == p[t, i, :].sum() for i in range(n1)]
        cons += [cp.sum(q[idx[t, :, j]]) == p[t, :, j].sum() for j in range(n2)]
    # q(s1, s2) replicated over t
    qs = sum(q[idx[t].ravel()] for t in range(nt))
    obj = sum(cp.sum(cp.rel_entr(q[idx[t].ravel()], qs)) for t in range(nt))
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver="CLARABEL")
    Q = np.clip(q.value, 0, None).reshape(shape)
    ref = mi_t_s1s2(Q)

    r = broja_pid(p)
    q_star, _, gap = solve_broja(p)
    # the Frank-Wolfe gap bounds the distance to the optimum from above
    excess = mi_t_s1s2(q_star) - ref
    assert -1e-7 <= excess <= gap + 1e-7
    assert excess < 1e-5
    assert r.consistency_error() < CONSISTENCY


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(2, 2, 2), (2, 3, 3), (2, 4, 4), (2, 2, 5)]),
       st.floats(0.2, 2.0))
@example(92270349, (2, 2, 5), 2.0)  # rounding in the marginals once broke the transport LP
def test_consistency_and_feasibility(seed, shape, conc):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(int(np.prod(shape)), conc)).reshape(shape)
    p[rng.random(shape) < 0.2] = 0.0
    if p.sum() == 0:
        return
    p /= p.sum()
    r = broja_pid(p)
    assert r.consistency_error() < CONSISTENCY
    for v in (r.unq1, r.unq2, r.shd, r.syn):
        assert v >= -1e-9
    q, _, _ = solve_broja(p)
    tv1 = 0.5 * np.abs(q.sum(axis=2) - p.sum(axis=2)).sum()
    tv2 = 0.5 * np.abs(q.sum(axis=1) - p.sum(axis=1)).sum()
    assert tv1 < 1e-9 and tv2 < 1e-9
    assert r.mi1 == pytest.approx(mi_t_s(p, 1))


# --------------------------------------------------------------------------- I/O

def test_table_roundtrip(tmp_path):
    p = np.random.default_rng(3).dirichlet(np.ones(18)).reshape(2, 3, 3)
    write_joint_table(p, tmp_path / "p.txt")
    assert np.allclose(read_joint_table(tmp_path / "p.txt"), p, rtol=1e-15, atol=0)


def test_table_errors(tmp_path):
    (tmp_path / "empty.txt").write_text("# nothing\n")
    with pytest.raises(InputError):
        read_joint_table(tmp_path / "empty.txt")
    (tmp_path / "neg.txt").write_text("0 0 0 0.5\n1 1 1 -0.5\n")
    with pytest.raises(InputError):
        read_joint_table(tmp_path / "neg.txt")


def test_result_row_has_all_fields():
    row = PIDResult(0.1, 0.2, 0.3, 0.4, 1.0, 0.4, 0.5, 10, 1e-9).as_row()
    assert list(row)[:5] == ["unq1", "unq2", "shd", "syn", "joint_mi"]
