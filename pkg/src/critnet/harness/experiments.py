"""Experiment protocols: burn-in, frozen runs, analyses, sweeps, switches and scans.

All randomness is derived from ``plan.master_seed`` with
:func:`~critnet.harness.seeds.derive_seed`, keyed by the network size,
``K_ext``, the seed index and the purpose of the stream.
"""

from __future__ import annotations

import logging
import time
import traceback
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .. import info, pid
from ..analysis import avalanches, branching, perturbation
from ..analysis.binning import bin_record, mean_iei, population_activity
from ..network import NetworkState, run
from ..params import NetworkConfig
from ..records import InputError, SpikeRecord
from ..reservoir import TaskConfig, run_task
from ..stimulus import StimulusConfig, generate, jitter
from ..topology import Topology, build_topology, rewire
from .config import ExperimentPlan
from .seeds import derive_rng, derive_seed

log = logging.getLogger(__name__)


@dataclass
class Network:
    """A wiring plus (usually burned-in) weights."""

    config: NetworkConfig
    topology: Topology
    w: np.ndarray
    seed: int

    @property
    def W(self) -> np.ndarray:
        return self.topology.weight_matrix(self.w)


def cell_config(plan: ExperimentPlan, K_ext: int, N: int | None = None,
                mode: str | None = None) -> NetworkConfig:
    """Plan network settings at a given ``K_ext`` (and optionally size and mode).

    When ``N`` differs from the plan, ``N_inh`` keeps its fraction of slots.
    """
    base = plan.network
    changes = {"K_ext": int(K_ext)}
    if N is not None and N != base.N:
        changes["N"] = int(N)
        changes["N_inh"] = int(round(base.N_inh * N / base.N))
    if mode is not None:
        changes["mode"] = mode
    return base.replace(**changes)


def _keys(config: NetworkConfig, seed: int):
    return (config.N, config.K_ext, seed)


def burn_in(config: NetworkConfig, seed: int, T_burnin: float, master_seed: int = 0) -> Network:
    """Plastic run from zero weights under independent Poisson drive."""
    k = _keys(config, seed)
    topo = build_topology(config.N, config.K_ext, config.N_inh, config.mode,
                          derive_seed(master_seed, "topology", config.mode, *k))
    state = NetworkState.create(config, topo, seed=derive_seed(master_seed, "plasticity", *k))
    if T_burnin > 0:
        stim = generate(StimulusConfig(nu=config.nu, n_sources=topo.n_ext, duration=T_burnin,
                                       seed=derive_seed(master_seed, "burnin-input", *k),
                                       dt=config.dt))
        run(config, stim, T_burnin, plasticity_on=True, state=state)
    return Network(config, topo, state.w.copy(), seed)


def frozen_state(net: Network, rng=None) -> NetworkState:
    """Fresh frozen-weight state; with ``rng`` the membranes start at random."""
    state = NetworkState.create(net.config, net.topology, net.w)
    if rng is not None:
        nrn = net.config.neuron
        state.u[:] = rng.uniform(nrn.u_reset, nrn.u_thresh, size=net.config.N)
    return state


def frozen_run(net: Network, stimulus: SpikeRecord, rng=None) -> SpikeRecord:
    state = frozen_state(net, rng)
    record, _ = run(net.config, stimulus, stimulus.duration, state=state)
    record.meta = dict(stimulus.meta) if stimulus.meta else None
    return record


def input_stimulus(net: Network, duration: float, seed: int, kind="independent-poisson",
                   **kw) -> SpikeRecord:
    return generate(StimulusConfig(kind=kind, nu=net.config.nu, n_sources=net.topology.n_ext,
                                   duration=duration, seed=seed, dt=net.config.dt, **kw))


# --------------------------------------------------------------------------- analyses

def analyze_dynamics(record: SpikeRecord, config: NetworkConfig) -> dict:
    """Rate, branching, autocorrelation, Fano factor and avalanche sizes of one run."""
    out = {"rate_hz": float(np.median(record.rates())) if len(record) else 0.0}
    dt_bin = config.neuron.tau_ref
    a = population_activity(record, dt_bin)
    for key in ("m", "h", "tau_branch", "tau_corr", "fano"):
        out[key] = float("nan")
    try:
        est = branching.analyze_population(a, dt_bin)
        out.update(m=est.m, h=est.h, tau_branch=est.tau_branch,
                   tau_corr=est.tau_corr, fano=est.fano)
    except (branching.RegressionError, ValueError) as err:
        out["branching_error"] = str(err)
    try:
        iei = mean_iei(record)
        out["iei"] = iei
        out["sizes"] = avalanches.extract_avalanches(population_activity(record, iei))
    except InputError as err:
        out["iei"] = float("nan")
        out["sizes"] = np.zeros(0, dtype=np.int64)
        out["avalanche_error"] = str(err)
    return out


def fit_avalanches(sizes, N: int) -> dict:
    """Truncated power-law fit and model comparison on ``[4, 3N]``."""
    fr = (4, 3 * N)
    try:
        fit = avalanches.avalanche_fit(np.asarray(sizes), fr)
        return {"alpha": fit.alpha_s, "s_cut": fit.s_cut, "preferred": fit.preferred,
                "lr": fit.lr, "p_value": fit.lr_p_value,
                "n_sizes": int(len(sizes)), "fit_min": fr[0], "fit_max": fr[1]}
    except (avalanches.InsufficientData, avalanches.FitError) as err:
        return {"alpha": float("nan"), "s_cut": float("nan"), "preferred": "error",
                "lr": float("nan"), "p_value": float("nan"), "n_sizes": int(len(sizes)),
                "fit_min": fr[0], "fit_max": fr[1], "error": str(err)}


def _trial(net: Network, stimulus: SpikeRecord, plan: ExperimentPlan, rng) -> SpikeRecord:
    return frozen_run(net, jitter(stimulus, plan.trial_jitter, rng, net.config.dt), rng)


def perturbation_trials(net: Network, plan: ExperimentPlan, master_seed: int | None = None) -> dict:
    """Trial-to-trial distance and susceptibility from repeated frozen runs.

    Every trial replays the same stimulus with its spike times jittered by
    ``plan.trial_jitter`` ms and starts from random membrane potentials.
    The deterministic model would otherwise repeat itself exactly.
    """
    ms = plan.master_seed if master_seed is None else master_seed
    k = _keys(net.config, net.seed)
    d = plan.durations
    sigma = net.config.neuron.tau_ref
    static = input_stimulus(net, d.T_static, derive_seed(ms, "static-input", *k))
    records = [_trial(net, static, plan, derive_rng(ms, "static-trial", *k, t))
               for t in range(plan.trials)]
    pair_vrd = [perturbation.vrd(records[a], records[b], sigma=sigma)
                for a, b in combinations(range(len(records)), 2)]
    pert = input_stimulus(net, d.T_pert, derive_seed(ms, "pert-input", *k),
                          t_pert=d.t_pert, n_pert=plan.N_pert)
    chis = []
    for t in range(plan.trials):
        rec = _trial(net, pert, plan, derive_rng(ms, "pert-trial", *k, t))
        chis.append(perturbation.susceptibility(rec, max(net.config.K_ext, 1), d.t_pert,
                                                net.config.synapse.d_syn))
    return {"vrd": float(np.median(pair_vrd)), "chi": float(np.median(chis)),
            "sigma_vrd": sigma, "vrd_pairs": pair_vrd, "chi_trials": chis}


def info_analysis(record: SpikeRecord, stimulus: SpikeRecord, net: Network,
                  plan: ExperimentPlan, rng=None, with_pid: bool = True) -> dict:
    """Pairwise information fingerprint of one frozen-weight run.

    Returns per-pair rows (all ordered pairs with an active target), PID rows
    on a random subset of at most ``plan.max_pid_pairs`` pairs, and per-neuron
    memory capacity with respect to one of its external inputs.
    """
    rng = np.random.default_rng(rng)
    dt_bin = net.config.neuron.tau_ref
    l = plan.history
    x = bin_record(record, dt_bin).binary
    n_bins = x.shape[1]
    s = bin_record(stimulus, dt_bin, n_bins=n_bins).binary
    N = x.shape[0]
    H = np.array([info.entropy(x[j], min_samples=1) for j in range(N)])
    active = np.flatnonzero(H > 0)
    pair_rows = []
    chain_err = 0.0
    for j in active:
        for i in range(N):
            if i == j:
                continue
            mi = info.mutual_information(x[j], x[i])
            a = info.ais(x[j], l)
            te = info.transfer_entropy(x[i], x[j], l)
            jm = info.joint_mi(x[j], x[i], l)
            chain_err = max(chain_err, abs(a + te - jm))
            pair_rows.append({"target": int(j), "source": int(i), "H": H[j], "MI": mi,
                              "AIS": a, "TE": te, "joint_MI": jm})
    pid_rows = []
    max_pid_err = 0.0
    if with_pid and pair_rows:
        idx = np.arange(len(pair_rows))
        if plan.max_pid_pairs is not None and len(idx) > plan.max_pid_pairs:
            idx = np.sort(rng.choice(idx, plan.max_pid_pairs, replace=False))
        for r in idx:
            j, i = pair_rows[r]["target"], pair_rows[r]["source"]
            p = pid.estimate_joint(x[j], x[j], x[i], l)
            res = pid.broja_pid(p)
            max_pid_err = max(max_pid_err, res.consistency_error())
            pid_rows.append({"target": j, "source": i, "H": H[j], **res.as_row()})
    mc_rows = []
    for j in active:
        ext = net.topology.ext_map(j)
        if len(ext) == 0:
            continue
        src = int(rng.choice(ext))
        curve = info.lagged_mi_curve(s[src], x[j], plan.n_tau)
        mc_rows.append({"neuron": int(j), "input": src, "H": H[j],
                        "MC": info.memory_capacity(None, None, plan.n_tau, dt_bin, curve=curve),
                        "lagged_MI": curve})
    return {"pairs": pair_rows, "pid": pid_rows, "mc": mc_rows,
            "chain_rule_error": chain_err, "pid_consistency_error": max_pid_err}


def task_analysis(net: Network, plan: ExperimentPlan, master_seed: int | None = None,
                  tasks=None, N_read=None) -> list:
    """Parity/sum performance of one frozen network under a shared input train."""
    ms = plan.master_seed if master_seed is None else master_seed
    k = _keys(net.config, net.seed)
    d = plan.durations
    tasks = plan.tasks if tasks is None else tasks
    N_read = plan.N_read if N_read is None else N_read
    duration = d.T_train + d.T_test
    stim = input_stimulus(net, duration, derive_seed(ms, "task-input", *k), kind="shared-poisson")
    record = frozen_run(net, stim)
    n_bins = int(round(duration / 1.0))
    act = bin_record(record, 1.0, n_bins=n_bins).binary.T
    s = bin_record(stim, 1.0, n_bins=n_bins).binary[0]
    rows = []
    for n_read in N_read:
        subset_rng = derive_rng(ms, "readout", *k, n_read)
        subset = np.sort(subset_rng.choice(net.config.N, n_read, replace=False))
        for task, n in tasks:
            cfg = TaskConfig(task=task, n=n, N_read=n_read, T_train=d.T_train, T_test=d.T_test,
                             n_shuffles=plan.n_shuffles)
            res = run_task(act, s, cfg, rng=derive_rng(ms, "shuffle", *k, n_read, task, n),
                           readout_subset=subset)
            rows.append({"task": task, "n": n, "N_read": n_read, "K_ext": net.config.K_ext,
                         "seed": net.seed, "I_raw": res.I_raw, "I_shuffle": res.I_shuffle,
                         "I_corrected": res.I_corrected, "I_norm": res.normalized})
    return rows


# --------------------------------------------------------------------------- sweep

def summarize(values) -> dict:
    """Median and 5-95% interval, ignoring NaNs."""
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if len(v) == 0:
        return {"median": float("nan"), "q05": float("nan"), "q95": float("nan"), "n": 0}
    q05, med, q95 = np.percentile(v, [5, 50, 95])
    return {"median": float(med), "q05": float(q05), "q95": float(q95), "n": int(len(v))}


@dataclass
class SweepResult:
    cells: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    pid: list = field(default_factory=list)
    mc: list = field(default_factory=list)
    tasks: list = field(default_factory=list)
    avalanche_fits: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    networks: dict = field(default_factory=dict)
    sizes: dict = field(default_factory=dict)
    timing: list = field(default_factory=list)

    def values(self, key, K_ext) -> list:
        return [c[key] for c in self.cells if c["K_ext"] == K_ext and key in c]

    def aggregate(self, keys=("rate_hz", "m", "tau_branch", "tau_corr", "fano", "vrd", "chi",
                              "MI", "AIS", "TE", "joint_MI", "MC", "unq1", "unq2", "shd", "syn")):
        rows = []
        for K in sorted({c["K_ext"] for c in self.cells}):
            for key in keys:
                vals = self.values(key, K)
                if vals:
                    rows.append({"K_ext": K, "measure": key, **summarize(vals)})
        return rows


def run_cell(plan: ExperimentPlan, K_ext: int, seed: int, result: SweepResult,
             keep_networks: bool = False) -> None:
    """Burn-in plus every selected analysis for one (K_ext, seed) grid cell."""
    t0 = time.perf_counter()
    cfg = cell_config(plan, K_ext)
    ms = plan.master_seed
    net = burn_in(cfg, seed, plan.durations.T_burnin, ms)
    if keep_networks:
        result.networks[(K_ext, seed)] = net
    k = _keys(cfg, seed)
    cell = {"K_ext": K_ext, "seed": seed}
    analyses = set(plan.analyses)
    if analyses & {"avalanche", "branching", "info", "pid"}:
        stim = input_stimulus(net, plan.durations.T_exp, derive_seed(ms, "exp-input", *k))
        record = frozen_run(net, stim)
        dyn = analyze_dynamics(record, cfg)
        sizes = dyn.pop("sizes")
        result.sizes.setdefault(K_ext, []).append(sizes)
        cell.update({k_: v for k_, v in dyn.items() if not k_.endswith("_error")})
        if "avalanche" in analyses:
            fit = fit_avalanches(sizes, cfg.N)
            cell.update(alpha=fit["alpha"], s_cut=fit["s_cut"], preferred=fit["preferred"])
        if analyses & {"info", "pid"}:
            inf = info_analysis(record, stim, net, plan, derive_rng(ms, "pairs", *k),
                                with_pid="pid" in analyses)
            for row in inf["pairs"]:
                result.pairs.append({"K_ext": K_ext, "seed": seed, **row})
            for row in inf["pid"]:
                result.pid.append({"K_ext": K_ext, "seed": seed, **row})
            for row in inf["mc"]:
                result.mc.append({"K_ext": K_ext, "seed": seed,
                                  **{k_: v for k_, v in row.items() if k_ != "lagged_MI"}})
            cell["chain_rule_error"] = inf["chain_rule_error"]
            cell["pid_consistency_error"] = inf["pid_consistency_error"]
            for key in ("MI", "AIS", "TE", "joint_MI"):
                cell[key] = _median_norm(inf["pairs"], key)
            cell["MC"] = _median_norm(inf["mc"], "MC")
            for key in ("unq1", "unq2", "shd", "syn"):
                cell[key] = _median_norm(inf["pid"], key)
    if "perturbation" in analyses:
        pr = perturbation_trials(net, plan)
        cell.update(vrd=pr["vrd"], chi=pr["chi"])
    if "task" in analyses:
        result.tasks.extend(task_analysis(net, plan))
    result.cells.append(cell)
    result.timing.append({"K_ext": K_ext, "seed": seed, "seconds": time.perf_counter() - t0})


def _median_norm(rows, key):
    vals = [r[key] / r["H"] for r in rows if r["H"] > 0]
    return float(np.median(vals)) if vals else float("nan")


def sweep(plan: ExperimentPlan, cells=None, keep_networks: bool = False,
          progress=None) -> SweepResult:
    """Run every (K_ext, seed) cell of the plan and pool avalanches per K_ext.

    A failing cell is recorded in ``errors`` and the sweep continues.
    """
    result = SweepResult()
    if cells is None:
        cells = [(K, s) for K in plan.kext_grid for s in range(plan.n_seeds)]
    for K, s in cells:
        try:
            run_cell(plan, K, s, result, keep_networks)
        except Exception as err:  # noqa: BLE001 - recorded, sweep continues
            log.exception("cell K_ext=%s seed=%s failed", K, s)
            result.errors.append({"K_ext": K, "seed": s, "error": repr(err),
                                  "traceback": traceback.format_exc()})
        if progress is not None:
            progress(K, s)
    if "avalanche" in plan.analyses:
        for K in sorted(result.sizes):
            pooled = np.concatenate(result.sizes[K]) if result.sizes[K] else np.zeros(0)
            result.avalanche_fits.append({"K_ext": K, **fit_avalanches(pooled, plan.network.N)})
    return result


# --------------------------------------------------------------------------- task switch

@dataclass
class SwitchResult:
    from_K: int
    to_K: int
    seed: int
    rows: list

    def m_curve(self):
        return [r["updates"] for r in self.rows], [r["m"] for r in self.rows]


def evaluate_state(net: Network, plan: ExperimentPlan, tag, tasks=()) -> dict:
    """Branching ratio (and optionally task scores) of a frozen snapshot."""
    ms = plan.master_seed
    k = _keys(net.config, net.seed)
    stim = input_stimulus(net, plan.durations.T_exp, derive_seed(ms, "switch-eval", *k, tag))
    dyn = analyze_dynamics(frozen_run(net, stim), net.config)
    out = {"m": dyn["m"], "rate_hz": dyn["rate_hz"], "tau_corr": dyn["tau_corr"]}
    for row in task_analysis(net, plan, tasks=tasks, N_read=plan.N_read[:1]) if tasks else []:
        out[f"I_{row['task']}{row['n']}"] = row["I_norm"]
    return out


def task_switch(plan: ExperimentPlan, from_K: int, to_K: int, checkpoints, seed: int = 0,
                source: Network | None = None, tasks=()) -> SwitchResult:
    """Rewire a converged network to ``to_K`` and follow it under plasticity.

    ``checkpoints`` are update counts after the switch (one update per
    plasticity period). ``source`` is the converged network at ``from_K``;
    it is burned in if not given.
    """
    checkpoints = sorted(int(c) for c in checkpoints)
    if not checkpoints or checkpoints[0] < 0:
        raise InputError("checkpoints must be non-negative update counts")
    ms = plan.master_seed
    if source is None:
        source = burn_in(cell_config(plan, from_K), seed, plan.durations.T_burnin, ms)
    elif source.config.K_ext != from_K:
        raise InputError(f"source network has K_ext={source.config.K_ext}, expected {from_K}")
    cfg = cell_config(plan, to_K)
    k = ("switch", cfg.N, from_K, to_K, seed)
    topo, w = rewire(source.topology, source.w, to_K, derive_seed(ms, "rewire", *k))
    state = NetworkState.create(cfg, topo, w, seed=derive_seed(ms, "switch-plasticity", *k))
    period = cfg.plasticity.T
    total = checkpoints[-1] * period
    stim = generate(StimulusConfig(nu=cfg.nu, n_sources=topo.n_ext, duration=max(total, cfg.dt),
                                   seed=derive_seed(ms, "switch-input", *k), dt=cfg.dt))
    rows = []
    done = 0
    for c in checkpoints:
        if c > done:
            seg = stim.window(done * period, c * period)
            run(cfg, seg, (c - done) * period, plasticity_on=True, state=state)
            done = c
        snap = Network(cfg, topo, state.w.copy(), seed)
        rows.append({"updates": c, "time_s": c * period / 1000.0,
                     **evaluate_state(snap, plan, ("switch", from_K, to_K, c), tasks)})
    return SwitchResult(from_K, to_K, seed, rows)


def relaxation_updates(updates, m_values, band) -> float:
    """First update count at which ``m`` lies inside ``band = (lo, hi)``."""
    lo, hi = band
    for u, m in zip(updates, m_values):
        if lo <= m <= hi:
            return float(u)
    return float("inf")


def fresh_band(plan: ExperimentPlan, K_ext: int, seeds, quantiles=(5, 95)) -> tuple:
    """5-95% interval of ``m`` over fresh burn-ins at ``K_ext``."""
    ms = []
    for s in seeds:
        net = burn_in(cell_config(plan, K_ext), s, plan.durations.T_burnin, plan.master_seed)
        ms.append(evaluate_state(net, plan, ("fresh", K_ext))["m"])
    lo, hi = np.percentile(ms, quantiles)
    return float(lo), float(hi), ms


# --------------------------------------------------------------------------- finite size

def scaling_exponent(N_values, s_cut_values) -> float:
    """Slope of ``log s_cut`` against ``log N`` by least squares."""
    x = np.log(np.asarray(N_values, dtype=float))
    y = np.log(np.asarray(s_cut_values, dtype=float))
    ok = np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(x[ok], y[ok], 1)[0])


def finite_size_scan(plan: ExperimentPlan, N_grid=(16, 32, 64, 128), kext_ratio: float = 0.25,
                     n_seeds: int | None = None) -> dict:
    """Pooled avalanche cutoff per network size with probabilistic wiring."""
    if len(N_grid) < 3:
        raise InputError("finite-size scaling needs at least three sizes")
    n_seeds = plan.n_seeds if n_seeds is None else n_seeds
    rows = []
    for N in N_grid:
        cfg = cell_config(plan, int(round(kext_ratio * N)), N=N, mode="probabilistic")
        pooled, rates = [], []
        for s in range(n_seeds):
            net = burn_in(cfg, s, plan.durations.T_burnin, plan.master_seed)
            stim = input_stimulus(net, plan.durations.T_exp,
                                  derive_seed(plan.master_seed, "exp-input", *_keys(cfg, s)))
            dyn = analyze_dynamics(frozen_run(net, stim), cfg)
            pooled.append(dyn["sizes"])
            rates.append(dyn["rate_hz"])
        sizes = np.concatenate(pooled)
        rows.append({"N": N, "K_ext": cfg.K_ext, "rate_hz": float(np.median(rates)),
                     **fit_avalanches(sizes, N)})
    slope = scaling_exponent([r["N"] for r in rows], [r["s_cut"] for r in rows])
    return {"rows": rows, "exponent": slope}
