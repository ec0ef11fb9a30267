"""Synapse-slot wiring between external sources and neurons.

Presynaptic partners are addressed by a combined index: ``0..n_ext-1`` are
external sources, ``n_ext..n_ext+N-1`` are neurons. Every connection is one
synapse slot of its postsynaptic neuron. In slot-exact mode neuron ``j`` owns
connections ``j*N .. j*N+N-1`` in slot order.

Recurrent partners are drawn from all N neurons, so autapses can occur.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ConfigError


@dataclass
class Topology:
    N: int
    K_ext: int
    N_inh: int
    mode: str
    seed: int
    n_ext: int
    pre: np.ndarray   # combined presynaptic index per connection
    post: np.ndarray  # postsynaptic neuron per connection
    inh: np.ndarray   # inhibitory flag per connection

    @property
    def n_conn(self) -> int:
        return len(self.pre)

    @property
    def is_external(self) -> np.ndarray:
        return self.pre < self.n_ext

    def ext_map(self, j: int) -> np.ndarray:
        sel = (self.post == j) & self.is_external
        return np.sort(self.pre[sel])

    def rec_map(self, j: int) -> np.ndarray:
        sel = (self.post == j) & ~self.is_external
        return np.sort(self.pre[sel] - self.n_ext)

    def inh_mask(self) -> np.ndarray:
        """Boolean (n_ext + N, N) matrix of inhibitory (pre, post) pairs."""
        m = np.zeros((self.n_ext + self.N, self.N), dtype=bool)
        m[self.pre, self.post] = self.inh
        return m

    def conn_mask(self) -> np.ndarray:
        m = np.zeros((self.n_ext + self.N, self.N), dtype=bool)
        m[self.pre, self.post] = True
        return m

    def weight_matrix(self, w: np.ndarray) -> np.ndarray:
        """Scatter per-connection weights into a (n_ext + N, N) matrix."""
        m = np.zeros((self.n_ext + self.N, self.N))
        m[self.pre, self.post] = w
        return m

    def outgoing(self):
        """CSR arrays (ptr, conn) of connections grouped by presynaptic index."""
        order = np.argsort(self.pre, kind="stable")
        counts = np.bincount(self.pre, minlength=self.n_ext + self.N)
        ptr = np.zeros(self.n_ext + self.N + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        return ptr, order.astype(np.int64)


def build_topology(N, K_ext, N_inh=6, mode="slot-exact", seed=0, n_ext=None) -> Topology:
    """Draw a random wiring.

    Slot-exact: every neuron has N slots; K_ext of them take distinct
    external sources, the rest take distinct presynaptic neurons, and N_inh
    slots are inhibitory. Probabilistic: each (source, neuron) pair is wired
    with probability K_ext/N, each (neuron, neuron) pair with (N-K_ext)/N,
    and each synapse is inhibitory with probability N_inh/N.
    """
    n_ext = N if n_ext is None else n_ext
    if N < 1 or not 0 <= K_ext <= N or not 0 <= N_inh <= N:
        raise ConfigError(f"invalid topology N={N} K_ext={K_ext} N_inh={N_inh}")
    if mode == "slot-exact" and K_ext > n_ext:
        raise ConfigError("K_ext exceeds the number of external sources")
    rng = np.random.default_rng(seed)

    if mode == "slot-exact":
        pre = np.empty((N, N), dtype=np.int64)
        inh = np.zeros((N, N), dtype=bool)
        for j in range(N):
            slots = rng.permutation(N)
            ext_slots, rec_slots = slots[:K_ext], slots[K_ext:]
            pre[j, ext_slots] = rng.choice(n_ext, size=K_ext, replace=False)
            pre[j, rec_slots] = n_ext + rng.choice(N, size=N - K_ext, replace=False)
            inh[j, rng.choice(N, size=N_inh, replace=False)] = True
        post = np.repeat(np.arange(N), N)
        return Topology(N, K_ext, N_inh, mode, seed, n_ext, pre.ravel(), post, inh.ravel())

    if mode == "probabilistic":
        ext = rng.random((n_ext, N)) < K_ext / N
        rec = rng.random((N, N)) < (N - K_ext) / N
        full = np.vstack([ext, rec])
        pre_idx, post_idx = np.nonzero(full)
        order = np.lexsort((pre_idx, post_idx))
        pre_idx, post_idx = pre_idx[order], post_idx[order]
        inh = rng.random(len(pre_idx)) < N_inh / N
        return Topology(N, K_ext, N_inh, mode, seed, n_ext,
                        pre_idx.astype(np.int64), post_idx.astype(np.int64), inh)

    raise ConfigError(f"unknown topology mode {mode!r}")


def rewire(topo: Topology, w: np.ndarray, K_new: int, seed: int = 0):
    """Change the number of external slots per neuron of a slot-exact wiring.

    Slots that keep their role (and partner) keep their weight; reassigned
    slots start from zero. Inhibitory flags stay attached to slots.
    Returns ``(new_topology, new_weights)``.
    """
    if topo.mode != "slot-exact":
        raise ConfigError("rewiring is defined for slot-exact topologies only")
    N, n_ext = topo.N, topo.n_ext
    if not 0 <= K_new <= min(N, n_ext):
        raise ConfigError(f"K_ext={K_new} out of range")
    rng = np.random.default_rng(seed)
    pre = topo.pre.reshape(N, N).copy()
    w_new = np.asarray(w, dtype=float).reshape(N, N).copy()
    for j in range(N):
        is_ext = pre[j] < n_ext
        k_old = int(is_ext.sum())
        if K_new > k_old:
            rec_slots = np.flatnonzero(~is_ext)
            flip = rng.choice(rec_slots, size=K_new - k_old, replace=False)
            unused = np.setdiff1d(np.arange(n_ext), pre[j, is_ext])
            pre[j, flip] = rng.choice(unused, size=len(flip), replace=False)
            w_new[j, flip] = 0.0
        elif K_new < k_old:
            ext_slots = np.flatnonzero(is_ext)
            flip = rng.choice(ext_slots, size=k_old - K_new, replace=False)
            unused = np.setdiff1d(np.arange(N), pre[j, ~is_ext] - n_ext)
            pre[j, flip] = n_ext + rng.choice(unused, size=len(flip), replace=False)
            w_new[j, flip] = 0.0
    new = Topology(N, K_new, topo.N_inh, topo.mode, seed, n_ext,
                   pre.ravel(), topo.post.copy(), topo.inh.copy())
    return new, w_new.ravel()
