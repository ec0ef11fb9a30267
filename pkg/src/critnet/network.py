"""Clock-driven integration of the current-based LIF network.

Between events the neuron/synapse system is linear, so each step applies
exact exponential propagators. Delta-current events are written into a ring
buffer ``d_syn`` ahead and added to the target's excitatory or inhibitory
current on arrival. Spikes are detected on step boundaries.

Order within step ``m`` (boundary time ``m*dt``):

1. threshold check on ``u(m*dt)``; spiking neurons reset and become
   refractory for ``tau_ref``
2. external events on step ``m`` and recurrent spikes from (1) are queued for
   step ``m + d``; anticausal pairings are accumulated when plastic
3. arrivals for step ``m`` are added to the synaptic currents
4. propagation to ``(m+1)*dt``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .params import NetworkConfig, propagators
from .plasticity import update_weights
from .records import InputError, SpikeRecord
from .topology import Topology, build_topology

NO_SPIKE = np.iinfo(np.int64).min // 4


@numba.njit(cache=True, nogil=True)
def _integrate(step0, n_steps, u, i_exc, i_inh, ref_until, buf_exc, buf_inh,
               ptr, out_conn, post, w, inh, n_ext,
               ext_steps, ext_src, ext_pos,
               p_mem, p_exc, p_inh, c_exc, c_inh,
               u_leak, u_thresh, u_reset, gamma, d_steps, ref_steps,
               plastic, post_last, paired_post, f_acc, eta, decay_per_step,
               spk_src, spk_step, n_spk):
    n = u.shape[0]
    depth = buf_exc.shape[0]
    n_ev = ext_steps.shape[0]
    while ext_pos < n_ev and ext_steps[ext_pos] < step0:
        ext_pos += 1
    fired = np.empty(n, dtype=np.int64)
    for m in range(step0, step0 + n_steps):
        # 1. threshold
        n_fired = 0
        for j in range(n):
            if u[j] >= u_thresh:
                u[j] = u_reset
                ref_until[j] = m + ref_steps
                fired[n_fired] = j
                n_fired += 1
                spk_src[n_spk] = j
                spk_step[n_spk] = m
                n_spk += 1
        slot = (m + d_steps) % depth
        # 2a. external events
        while ext_pos < n_ev and ext_steps[ext_pos] == m:
            p = ext_src[ext_pos]
            ext_pos += 1
            for k in range(ptr[p], ptr[p + 1]):
                c = out_conn[k]
                tgt = post[c]
                if inh[c]:
                    buf_inh[slot, tgt] += gamma * w[c]
                else:
                    buf_exc[slot, tgt] += gamma * w[c]
                if plastic:
                    tp = post_last[tgt]
                    if tp > NO_SPIKE and tp < m and paired_post[c] != tp:
                        f_acc[c] += eta * np.exp(-(m - tp) * decay_per_step)
                        paired_post[c] = tp
        # 2b. recurrent spikes
        for q in range(n_fired):
            p = n_ext + fired[q]
            for k in range(ptr[p], ptr[p + 1]):
                c = out_conn[k]
                tgt = post[c]
                if inh[c]:
                    buf_inh[slot, tgt] += gamma * w[c]
                else:
                    buf_exc[slot, tgt] += gamma * w[c]
                if plastic:
                    tp = post_last[tgt]
                    if tp > NO_SPIKE and tp < m and paired_post[c] != tp:
                        f_acc[c] += eta * np.exp(-(m - tp) * decay_per_step)
                        paired_post[c] = tp
        for q in range(n_fired):
            post_last[fired[q]] = m
        # 3. arrivals
        cur = m % depth
        for j in range(n):
            i_exc[j] += buf_exc[cur, j]
            i_inh[j] += buf_inh[cur, j]
            buf_exc[cur, j] = 0.0
            buf_inh[cur, j] = 0.0
        # 4. propagation
        for j in range(n):
            if m < ref_until[j]:
                u[j] = u_reset
            else:
                u[j] = u_leak + (u[j] - u_leak) * p_mem + c_exc * i_exc[j] - c_inh * i_inh[j]
            i_exc[j] *= p_exc
            i_inh[j] *= p_inh
    return ext_pos, n_spk


@dataclass
class NetworkState:
    """Live state of one network; owned by a single run."""

    config: NetworkConfig
    topology: Topology
    w: np.ndarray
    u: np.ndarray
    i_exc: np.ndarray
    i_inh: np.ndarray
    ref_until: np.ndarray
    buf_exc: np.ndarray
    buf_inh: np.ndarray
    post_last: np.ndarray
    paired_post: np.ndarray
    f_acc: np.ndarray
    rng: np.random.Generator
    step_index: int = 0
    _csr: tuple = field(default=None, repr=False)

    @classmethod
    def create(cls, config: NetworkConfig, topology: Topology | None = None,
               w: np.ndarray | None = None, seed: int = 0) -> "NetworkState":
        if topology is None:
            topology = build_topology(config.N, config.K_ext, config.N_inh,
                                      config.mode, seed)
        n = config.N
        depth = config.delay_steps + 1
        n_conn = topology.n_conn
        w = np.zeros(n_conn) if w is None else np.array(w, dtype=float)
        if w.shape != (n_conn,):
            raise InputError(f"weights must have shape ({n_conn},)")
        return cls(
            config=config, topology=topology, w=w,
            u=np.full(n, config.neuron.u_leak),
            i_exc=np.zeros(n), i_inh=np.zeros(n),
            ref_until=np.full(n, NO_SPIKE, dtype=np.int64),
            buf_exc=np.zeros((depth, n)), buf_inh=np.zeros((depth, n)),
            post_last=np.full(n, NO_SPIKE, dtype=np.int64),
            paired_post=np.full(n_conn, NO_SPIKE, dtype=np.int64),
            f_acc=np.zeros(n_conn),
            rng=np.random.default_rng(seed),
        )

    @property
    def t(self) -> float:
        return self.step_index * self.config.dt

    @property
    def W(self) -> np.ndarray:
        return self.topology.weight_matrix(self.w)

    def csr(self):
        if self._csr is None:
            self._csr = self.topology.outgoing()
        return self._csr

    def advance(self, n_steps: int, ext_steps: np.ndarray, ext_src: np.ndarray,
                plastic: bool = False, ext_pos: int = 0):
        """Integrate ``n_steps`` steps; returns (ext_pos, spike_src, spike_step)."""
        cfg = self.config
        pr = propagators(cfg)
        ptr, out_conn = self.csr()
        cap = cfg.N * (n_steps // max(cfg.ref_steps, 1) + 2)
        spk_src = np.empty(cap, dtype=np.int64)
        spk_step = np.empty(cap, dtype=np.int64)
        ext_pos, n_spk = _integrate(
            self.step_index, n_steps, self.u, self.i_exc, self.i_inh, self.ref_until,
            self.buf_exc, self.buf_inh, ptr, out_conn, self.topology.post, self.w,
            self.topology.inh, self.topology.n_ext,
            ext_steps, ext_src, ext_pos,
            pr["p_mem"], pr["p_exc"], pr["p_inh"], pr["c_exc"], pr["c_inh"],
            cfg.neuron.u_leak, cfg.neuron.u_thresh, cfg.neuron.u_reset,
            cfg.synapse.gamma, cfg.delay_steps, cfg.ref_steps,
            plastic, self.post_last, self.paired_post, self.f_acc,
            cfg.plasticity.eta_stdp, cfg.dt / cfg.plasticity.tau_stdp,
            spk_src, spk_step, 0)
        self.step_index += n_steps
        return ext_pos, spk_src[:n_spk], spk_step[:n_spk]


def step(state: NetworkState, external_sources=(), plastic: bool = False):
    """Advance ``state`` by one step with the given external sources firing now.

    Returns the ids of neurons that spiked at the start of this step.
    """
    src = np.asarray(external_sources, dtype=np.int64)
    steps = np.full(len(src), state.step_index, dtype=np.int64)
    _, spk_src, _ = state.advance(1, steps, src, plastic=plastic)
    return spk_src


def stimulus_to_steps(stimulus: SpikeRecord, dt: float):
    steps = np.floor(stimulus.times / dt + 1e-9).astype(np.int64)
    order = np.lexsort((stimulus.sources, steps))
    return steps[order], stimulus.sources[order].astype(np.int64)


@dataclass
class WeightTrace:
    times: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def append(self, t, w):
        self.times.append(float(t))
        self.weights.append(np.array(w, copy=True))


def run(config: NetworkConfig, stimulus: SpikeRecord, duration: float,
        plasticity_on: bool = False, seed: int = 0, state: NetworkState | None = None,
        topology: Topology | None = None, w: np.ndarray | None = None,
        trace_every: float | None = None):
    """Run the network for ``duration`` ms under ``stimulus``.

    A fresh state is built from ``(config, topology, w, seed)`` unless
    ``state`` is given, in which case it is advanced in place. With
    plasticity on, weights are updated every ``T`` of simulated time.
    Returns ``(SpikeRecord, WeightTrace)``; the trace holds the initial
    weights, then snapshots every ``trace_every`` ms (default: every update
    when plastic) and the final weights.
    """
    if stimulus.duration < duration - 1e-9:
        raise InputError(f"stimulus lasts {stimulus.duration} ms < duration {duration} ms")
    if state is None:
        state = NetworkState.create(config, topology, w, seed)
    cfg = state.config
    dt = cfg.dt
    step_start = state.step_index
    t_start = state.t
    n_total = int(round(duration / dt))
    ext_steps, ext_src = stimulus_to_steps(stimulus, dt)
    ext_steps = ext_steps + state.step_index
    if cfg.N and len(ext_src) and ext_src.max() >= state.topology.n_ext:
        raise InputError("stimulus has more sources than the network has inputs")

    trace = WeightTrace()
    trace.append(t_start, state.w)
    period = cfg.period_steps
    if trace_every is None:
        trace_steps = period if plasticity_on else n_total
    else:
        trace_steps = max(1, int(round(trace_every / dt)))

    srcs, stps = [], []
    end = state.step_index + n_total
    ext_pos = 0
    while state.step_index < end:
        nxt = end
        if plasticity_on:
            nxt = min(nxt, (state.step_index // period + 1) * period)
        nxt = min(nxt, (state.step_index // trace_steps + 1) * trace_steps)
        ext_pos, s, k = state.advance(nxt - state.step_index, ext_steps, ext_src,
                                      plastic=plasticity_on, ext_pos=ext_pos)
        srcs.append(s)
        stps.append(k)
        if plasticity_on and state.step_index % period == 0:
            state.w = update_weights(state.w, state.f_acc, cfg.plasticity,
                                     state.rng, w_max=cfg.w_max)
            state.f_acc[:] = 0.0
        if state.step_index % trace_steps == 0 and state.step_index < end:
            trace.append(state.t, state.w)
    trace.append(state.t, state.w)

    src = np.concatenate(srcs) if srcs else np.zeros(0, np.int64)
    stp = np.concatenate(stps) if stps else np.zeros(0, np.int64)
    times = (stp - step_start) * dt
    record = SpikeRecord(src, times, "neuron", duration, cfg.N)
    return record, trace
