"""Command-line entry point: ``critnet <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pid
from .harness import experiments as ex
from .harness.config import load_plan
from .harness.output import long_format, write_csv, write_manifest
from .harness.seeds import derive_seed
from .network import run
from .params import ConfigError
from .records import InputError, read_spikes, read_weights, write_spikes, write_weights
from .stimulus import StimulusConfig, generate

log = logging.getLogger("critnet")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML configuration file")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--out-dir", type=Path, default=Path("runs"), help="output directory")
    p.add_argument("--paper-scale", action="store_true",
                   help="full-scale seeds and durations instead of desk-scale defaults")
    p.add_argument("-v", "--verbose", action="store_true")


def _plan(args):
    plan = load_plan(args.config, paper_scale=args.paper_scale)
    if args.seed is not None:
        plan.master_seed = args.seed
    return plan


def _network(plan, K_ext, seed, weights=None, burn=True):
    cfg = ex.cell_config(plan, K_ext)
    if weights is not None:
        net = ex.burn_in(cfg, seed, 0.0, plan.master_seed)
        net.w = weights_from_matrix(net.topology, read_weights(weights))
        return net
    return ex.burn_in(cfg, seed, plan.durations.T_burnin if burn else 0.0, plan.master_seed)


def weights_from_matrix(topology, W) -> np.ndarray:
    """Per-connection weights from a ``(n_ext + N, N)`` matrix."""
    W = np.asarray(W, dtype=float)
    expected = (topology.n_ext + topology.N, topology.N)
    if W.shape != expected:
        raise InputError(f"weight matrix has shape {W.shape}, expected {expected}")
    return W[topology.pre, topology.post].copy()


def cmd_simulate(args, plan):
    net = _network(plan, args.K_ext, args.net_seed, args.weights, burn=False)
    cfg = net.config
    stim_seed = derive_seed(plan.master_seed, "simulate-input", cfg.N, cfg.K_ext, args.net_seed)
    if args.stimulus:
        stim = read_spikes(args.stimulus)
    else:
        stim = generate(StimulusConfig(kind=args.kind, nu=cfg.nu, n_sources=net.topology.n_ext,
                                       duration=args.duration, seed=stim_seed, dt=cfg.dt))
    from .network import NetworkState
    state = NetworkState.create(cfg, net.topology, net.w,
                                seed=derive_seed(plan.master_seed, "simulate-plasticity",
                                                 cfg.N, cfg.K_ext, args.net_seed))
    record, _ = run(cfg, stim, args.duration, plasticity_on=args.plastic, state=state)
    out = args.out_dir
    files = [out / "spikes.txt", out / "stimulus.txt", out / "weights.csv"]
    write_spikes(record, files[0])
    write_spikes(stim, files[1])
    write_weights(net.topology.weight_matrix(state.w), files[2])
    return files, {"rate_hz": float(np.median(record.rates())) if len(record) else 0.0}


def cmd_burnin(args, plan):
    net = _network(plan, args.K_ext, args.net_seed)
    path = args.out_dir / f"weights_K{args.K_ext}_seed{args.net_seed}.csv"
    write_weights(net.W, path)
    return [path], {"mean_weight": float(net.w.mean())}


def _sweep_outputs(res, out):
    files = [
        write_csv(res.cells, out / "cells.csv"),
        write_csv(res.aggregate(), out / "aggregate.csv"),
    ]
    if res.avalanche_fits:
        files.append(write_csv(res.avalanche_fits, out / "avalanche_fits.csv"))
        files.append(write_csv(long_format(res.cells, ["K_ext", "seed"],
                                           ["m", "tau_branch", "tau_corr", "fano", "alpha",
                                            "s_cut"]), out / "fig_dynamics_long.csv"))
    if res.pairs:
        files.append(write_csv(res.pairs, out / "pairs.csv"))
        files.append(write_csv(long_format(res.cells, ["K_ext", "seed"],
                                           ["MI", "AIS", "TE", "joint_MI", "MC"]),
                               out / "fig_info_long.csv"))
    if res.pid:
        files.append(write_csv(res.pid, out / "pid.csv"))
        files.append(write_csv(long_format(res.cells, ["K_ext", "seed"],
                                           ["unq1", "unq2", "shd", "syn"]),
                               out / "fig_pid_long.csv"))
    if res.mc:
        files.append(write_csv(res.mc, out / "memory_capacity.csv"))
    if res.tasks:
        files.append(write_csv(res.tasks, out / "tasks.csv"))
    if any("vrd" in c for c in res.cells):
        files.append(write_csv(long_format(res.cells, ["K_ext", "seed"], ["vrd", "chi"]),
                               out / "fig_perturbation_long.csv"))
    if res.errors:
        files.append(write_csv(res.errors, out / "errors.csv"))
    return files


def cmd_sweep(args, plan):
    if args.K_ext:
        plan.kext_grid = args.K_ext
    if args.n_seeds:
        plan.n_seeds = args.n_seeds
    if args.analyses:
        plan.analyses = tuple(args.analyses)
    res = ex.sweep(plan, progress=lambda K, s: log.info("done K_ext=%s seed=%s", K, s))
    wall = sum(t["seconds"] for t in res.timing)
    return _sweep_outputs(res, args.out_dir), {"n_errors": len(res.errors), "wall_seconds": wall}


def cmd_analyze(args, plan):
    record = read_spikes(args.spikes)
    cfg = plan.network
    dyn = ex.analyze_dynamics(record, cfg)
    sizes = dyn.pop("sizes")
    row = {"file": str(args.spikes), **dyn, **ex.fit_avalanches(sizes, record.n_sources)}
    return [write_csv([row], args.out_dir / "analysis.csv")], {}


def cmd_task(args, plan):
    net = _network(plan, args.K_ext, args.net_seed, args.weights)
    tasks = [(t, n) for t in args.task for n in args.n] if args.task else None
    rows = ex.task_analysis(net, plan, tasks=tasks, N_read=args.N_read or None)
    return [write_csv(rows, args.out_dir / "tasks.csv")], {}


def cmd_switch(args, plan):
    tasks = [("parity", n) for n in args.parity] if args.parity else ()
    res = ex.task_switch(plan, args.from_K, args.to_K, args.checkpoints, args.net_seed,
                         tasks=tasks)
    rows = [{"from_K": args.from_K, "to_K": args.to_K, "seed": args.net_seed, **r}
            for r in res.rows]
    return [write_csv(rows, args.out_dir / "switch.csv")], {}


def cmd_fss(args, plan):
    res = ex.finite_size_scan(plan, args.N, args.ratio, args.n_seeds)
    path = write_csv(res["rows"], args.out_dir / "fss.csv")
    return [path], {"exponent": res["exponent"]}


def cmd_pid(args, plan):
    p = pid.read_joint_table(args.table)
    res = pid.broja_pid(p)
    return [write_csv([res.as_row()], args.out_dir / "pid.csv")], {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="critnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one network and write spikes and weights")
    _common(p)
    p.add_argument("--K-ext", dest="K_ext", type=int, default=8)
    p.add_argument("--net-seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=1000.0, help="ms")
    p.add_argument("--kind", default="independent-poisson",
                   choices=["independent-poisson", "shared-poisson"])
    p.add_argument("--stimulus", type=Path, help="spike file to use as input")
    p.add_argument("--weights", type=Path, help="weight CSV to start from")
    p.add_argument("--plastic", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("burnin", help="plastic burn-in from zero weights")
    _common(p)
    p.add_argument("--K-ext", dest="K_ext", type=int, default=8)
    p.add_argument("--net-seed", type=int, default=0)
    p.set_defaults(func=cmd_burnin)

    p = sub.add_parser("sweep", help="K_ext sweep with all selected analyses")
    _common(p)
    p.add_argument("--K-ext", dest="K_ext", type=int, nargs="*")
    p.add_argument("--n-seeds", type=int)
    p.add_argument("--analyses", nargs="*")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="dynamics and avalanche analysis of a spike file")
    _common(p)
    p.add_argument("spikes", type=Path)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("task", help="parity/sum performance of one network")
    _common(p)
    p.add_argument("--K-ext", dest="K_ext", type=int, default=8)
    p.add_argument("--net-seed", type=int, default=0)
    p.add_argument("--weights", type=Path)
    p.add_argument("--task", nargs="*", choices=["parity", "sum"])
    p.add_argument("--n", type=int, nargs="*", default=[5])
    p.add_argument("--N-read", dest="N_read", type=int, nargs="*")
    p.set_defaults(func=cmd_task)

    p = sub.add_parser("switch", help="task-switch protocol between two K_ext values")
    _common(p)
    p.add_argument("--from-K", dest="from_K", type=int, required=True)
    p.add_argument("--to-K", dest="to_K", type=int, required=True)
    p.add_argument("--checkpoints", type=int, nargs="+",
                   default=[0, 10, 20, 50, 100, 200, 500, 1000])
    p.add_argument("--parity", type=int, nargs="*", help="parity n values to evaluate")
    p.add_argument("--net-seed", type=int, default=0)
    p.set_defaults(func=cmd_switch)

    p = sub.add_parser("fss", help="finite-size scaling of the avalanche cutoff")
    _common(p)
    p.add_argument("--N", type=int, nargs="+", default=[16, 32, 64, 128])
    p.add_argument("--ratio", type=float, default=0.25)
    p.add_argument("--n-seeds", type=int)
    p.set_defaults(func=cmd_fss)

    p = sub.add_parser("pid", help="BROJA decomposition of a 't s1 s2 prob' table")
    _common(p)
    p.add_argument("table", type=Path)
    p.set_defaults(func=cmd_pid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        plan = _plan(args)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        files, summary = args.func(args, plan)
    except (ConfigError, InputError, pid.SolverError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    arg_dict = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                if k != "func"}
    write_manifest(args.out_dir, args.command, arg_dict, plan.to_dict(), files, summary)
    print(json.dumps({"out_dir": str(args.out_dir), **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
