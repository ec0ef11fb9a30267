"""BROJA partial information decomposition for one target and two sources.

The decomposition needs

    Q* = argmin_{Q in D_P} I_Q(T; S1, S2),
    D_P = {Q : Q(t, s1) = P(t, s1), Q(t, s2) = P(t, s2)}.

The objective equals ``KL(Q || Q(s1, s2) * U(t))`` up to a constant and is
1-smooth relative to the negative entropy on ``D_P``, so entropic mirror
descent with unit step converges. One step maps ``Q`` to the Bregman (KL)
projection of ``Q(s1, s2)`` onto ``D_P``; the projection decouples over
``t`` and is computed by Sinkhorn scaling. Optimality is certified with
the Frank-Wolfe gap, whose linear subproblem is one transportation LP per
target symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.optimize import linprog

from .records import InputError

LOG2 = np.log(2.0)


class SolverError(RuntimeError):
    pass


@dataclass
class PIDResult:
    unq1: float
    unq2: float
    shd: float
    syn: float
    joint_mi: float
    mi1: float
    mi2: float
    iterations: int
    duality_gap: float

    def consistency_error(self) -> float:
        return max(abs(self.unq1 + self.shd - self.mi1),
                   abs(self.unq2 + self.shd - self.mi2),
                   abs(self.unq1 + self.unq2 + self.shd + self.syn - self.joint_mi))

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in
                ("unq1", "unq2", "shd", "syn", "joint_mi", "mi1", "mi2",
                 "iterations", "duality_gap")}


def _xlogx_sum(p):
    p = p[p > 0]
    return float(np.sum(p * np.log(p)))


def _entropy(p):
    return -_xlogx_sum(np.ravel(p)) / LOG2


def mi_t_s1s2(q):
    """``I(T; S1, S2)`` in bits of a table indexed ``[t, s1, s2]``."""
    return _entropy(q.sum(axis=(1, 2))) + _entropy(q.sum(axis=0)) - _entropy(q)


def mi_t_s(q, axis):
    """``I(T; S_axis)`` for ``axis`` 1 or 2."""
    other = 3 - axis
    pts = q.sum(axis=other)
    return _entropy(q.sum(axis=(1, 2))) + _entropy(pts.sum(axis=0)) - _entropy(pts)


def cmi_t_s_given(q, axis):
    """``I(T; S_axis | S_other)``."""
    other = 3 - axis
    return (_entropy(q.sum(axis=axis)) + _entropy(q.sum(axis=0))
            - _entropy(q) - _entropy(q.sum(axis=(0, axis))))


def normalize_joint(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 3:
        raise InputError("joint distribution must be indexed [t, s1, s2]")
    if np.any(p < 0):
        raise InputError("negative probabilities")
    total = p.sum()
    if total <= 0:
        raise InputError("distribution sums to zero")
    return p / total


def estimate_joint(target, src1, src2, l: int = 4, min_samples: int = 1000) -> np.ndarray:
    """Empirical ``P(x1(t), x1^-(t), x2^-(t))`` from binary series.

    ``src1``/``src2`` are the series whose pasts form the two sources; for
    the usual decomposition ``src1`` is the target itself.
    """
    target = np.asarray(target, dtype=np.int64)
    if not (len(target) == len(src1) == len(src2)):
        raise InputError("series must be aligned")
    if len(target) - l < min_samples:
        raise InputError(f"{len(target) - l} samples after embedding, need {min_samples}")
    if target.size and (target.min() < 0 or target.max() > 1):
        raise InputError("target must be binary")
    for s in (src1, src2):
        if len(s) and (np.min(s) < 0 or np.max(s) > 1):
            raise InputError("sources must be binary")
    # base 2 regardless of the observed symbols, so the alphabet is always 2**l
    a = _base2(np.asarray(src1, dtype=np.int64), l)
    b = _base2(np.asarray(src2, dtype=np.int64), l)
    n_states = 1 << l
    p = np.zeros((2, n_states, n_states))
    np.add.at(p, (target[l:], a, b), 1.0)
    return p / p.sum()


def _base2(x, l):
    n = len(x)
    code = np.zeros(n - l, dtype=np.int64)
    for k in range(l, 0, -1):
        code = code * 2 + x[l - k:n - k]
    return code


@njit(cache=True)
def _md_iterations(q, support, p_ts1, p_ts2, u, v, n_iter, tol, inner_tol):
    """Run up to ``n_iter`` mirror-descent steps in place.

    Each step rescales ``Q(s1, s2)`` per target symbol with warm-started
    Sinkhorn potentials ``u``, ``v``. Returns ``(steps, last_improvement)``.
    """
    nt, n1, n2 = q.shape
    w = np.zeros((n1, n2))
    f_old = _objective(q)
    improvement = np.inf
    for it in range(n_iter):
        w[:, :] = 0.0
        for t in range(nt):
            w += q[t]
        for t in range(nt):
            kern = w * support[t]
            for _ in range(10000):
                for i in range(n1):
                    acc = 0.0
                    for j in range(n2):
                        acc += kern[i, j] * v[t, j]
                    u[t, i] = p_ts1[t, i] / acc if acc > 0 else 0.0
                err = 0.0
                for j in range(n2):
                    acc = 0.0
                    for i in range(n1):
                        acc += kern[i, j] * u[t, i]
                    v[t, j] = p_ts2[t, j] / acc if acc > 0 else 0.0
                for i in range(n1):
                    acc = 0.0
                    for j in range(n2):
                        acc += kern[i, j] * v[t, j]
                    err += abs(u[t, i] * acc - p_ts1[t, i])
                if err < inner_tol:
                    break
            for i in range(n1):
                for j in range(n2):
                    q[t, i, j] = u[t, i] * kern[i, j] * v[t, j]
        f_new = _objective(q)
        improvement = f_old - f_new
        f_old = f_new
        if improvement < tol:
            return it + 1, improvement
    return n_iter, improvement


@njit(cache=True)
def _objective(q):
    """``sum q log q - sum q_s log q_s`` in nats (``-H(T|S)``)."""
    nt, n1, n2 = q.shape
    total = 0.0
    for i in range(n1):
        for j in range(n2):
            qs = 0.0
            for t in range(nt):
                x = q[t, i, j]
                if x > 0:
                    total += x * np.log(x)
                qs += x
            if qs > 0:
                total -= qs * np.log(qs)
    return total


def _fw_gap(q, support, p_ts1, p_ts2):
    """Frank-Wolfe gap ``<grad, q - argmin_{D_P} <grad, .>>`` in nats."""
    q_s = q.sum(axis=0)
    grad = np.zeros_like(q)
    pos = q > 0
    qs_b = np.broadcast_to(q_s, q.shape)
    grad[pos] = np.log(q[pos] / qs_b[pos])
    # cells on the support with zero mass would have gradient -inf;
    # mirror descent never zeroes them, so treat as very negative
    grad[support & ~pos] = -50.0
    lin_opt = 0.0
    for t in range(q.shape[0]):
        rows, cols = p_ts1[t], p_ts2[t]
        if rows.sum() == 0:
            continue
        ri, ci = np.flatnonzero(rows > 0), np.flatnonzero(cols > 0)
        cost = grad[t][np.ix_(ri, ci)]
        sup = support[t][np.ix_(ri, ci)]
        nr, nc = len(ri), len(ci)
        a_eq = np.zeros((nr + nc, nr * nc))
        for i in range(nr):
            a_eq[i, i * nc:(i + 1) * nc] = 1.0
        for j in range(nc):
            a_eq[nr + j, j::nc] = 1.0
        b_eq = np.concatenate([rows[ri], cols[ci]])
        # the last column constraint is implied by the others; keeping it lets
        # rounding in the marginal totals make the system slightly infeasible
        a_eq, b_eq = a_eq[:-1], b_eq[:-1]
        shift = cost.min()
        bounds = [(0, None) if s else (0, 0) for s in sup.ravel()]
        res = linprog((cost - shift).ravel(), A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                      method="highs")
        if res.status != 0:
            raise SolverError(f"transport LP failed: {res.message}")
        lin_opt += res.fun + shift * rows[ri].sum()
    return float(np.sum(grad * q) - lin_opt)


def solve_broja(p, tol=1e-10, gap_tol=1e-8, max_iter=100_000, check_every=2000):
    """Minimise ``I_Q(T; S1, S2)`` over ``D_P``.

    Stops when one step improves the objective by less than ``tol`` bits
    or the Frank-Wolfe duality gap falls below ``gap_tol`` bits.
    Returns ``(Q*, iterations, gap)``.
    """
    p = normalize_joint(p)
    p_ts1 = p.sum(axis=2)
    p_ts2 = p.sum(axis=1)
    p_t = p.sum(axis=(1, 2))
    support = (p_ts1[:, :, None] > 0) & (p_ts2[:, None, :] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(support, p_ts1[:, :, None] * p_ts2[:, None, :] / p_t[:, None, None], 0.0)
    q = np.ascontiguousarray(np.nan_to_num(q))
    u = np.ones_like(p_ts1)
    v = np.ones_like(p_ts2)
    sup = support.astype(np.float64)
    it = 0
    gap = np.inf
    while it < max_iter:
        n = min(check_every, max_iter - it)
        done, improvement = _md_iterations(q, sup, p_ts1, p_ts2, u, v, n,
                                           tol * LOG2, 1e-14)
        it += done
        gap = _fw_gap(q, support, p_ts1, p_ts2) / LOG2
        if gap < gap_tol or improvement < tol * LOG2:
            return q, it, float(gap)
    raise SolverError(f"no convergence after {max_iter} iterations (gap {gap:.3g} bits)")


def broja_pid(p, **solver_kw) -> PIDResult:
    """Unique, shared and synergistic information of ``p[t, s1, s2]``."""
    p = normalize_joint(p)
    q, it, gap = solve_broja(p, **solver_kw)
    joint = mi_t_s1s2(p)
    mi1, mi2 = mi_t_s(p, 1), mi_t_s(p, 2)
    unq1 = cmi_t_s_given(q, 1)
    unq2 = cmi_t_s_given(q, 2)
    shd = mi1 - unq1
    syn = joint - mi_t_s1s2(q)
    return PIDResult(unq1, unq2, shd, syn, joint, mi1, mi2, it, gap)


def read_joint_table(path) -> np.ndarray:
    """Read ``t s1 s2 prob`` rows (``#`` comments allowed)."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                t, s1, s2, pr = line.split()
                rows.append((int(t), int(s1), int(s2), float(pr)))
            except ValueError as err:
                raise InputError(f"{path}: malformed row {line!r}") from err
    if not rows:
        raise InputError(f"{path}: no table rows")
    arr = np.array(rows)
    shape = tuple(int(arr[:, k].max()) + 1 for k in range(3))
    p = np.zeros(shape)
    for t, s1, s2, pr in rows:
        p[t, s1, s2] += pr
    return normalize_joint(p)


def write_joint_table(p, path) -> None:
    p = np.asarray(p)
    lines = ["# t s1 s2 prob"]
    for idx in zip(*np.nonzero(p)):
        lines.append(f"{idx[0]} {idx[1]} {idx[2]} {float(p[idx])!r}")
    Path(path).write_text("\n".join(lines) + "\n")
