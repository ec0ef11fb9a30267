"""Desk-scale acceptance experiments, computed once per test session.

The full run takes a few hours on one core, so the result is stored as
JSON and reused: by default in ``runs/acceptance/results.json`` under the
repository root, or wherever ``CRITNET_ACCEPTANCE_CACHE`` points. Delete
the file to recompute.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np

from critnet.harness import experiments as ex
from critnet.harness.config import ExperimentPlan

GRID = [8, 10, 12, 16, 24, 32]
K_CRIT, K_SUB = 10, 26
FSS_SIZES = (16, 32, 64, 128)
DEFAULT_CACHE = Path(__file__).resolve().parents[1] / "runs" / "acceptance" / "results.json"
CHECKPOINTS = [0, 5, 10, 15, 20, 30, 40, 50, 70, 100, 150, 200, 300, 400, 500, 700, 1000]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def compute(plan: ExperimentPlan | None = None, log=print) -> dict:
    plan = plan or ExperimentPlan()
    out = {"plan": plan.to_dict(), "timing": {}}

    t0 = time.perf_counter()
    ex.burn_in(ex.cell_config(plan, 8), 0, plan.durations.T_burnin, plan.master_seed)
    out["timing"]["burnin_K8_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    plan.kext_grid = GRID
    plan.analyses = ("avalanche", "branching", "perturbation")
    grid = ex.sweep(plan, progress=lambda K, s: log(f"grid K={K} seed={s}"))
    out["grid"] = {"cells": grid.cells, "fits": grid.avalanche_fits, "errors": grid.errors}
    out["timing"]["grid_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    plan.kext_grid = [K_CRIT, K_SUB]
    plan.analyses = ("branching", "info", "pid", "task")
    inf = ex.sweep(plan, progress=lambda K, s: log(f"info K={K} seed={s}"))
    out["info"] = {"cells": inf.cells, "tasks": inf.tasks, "errors": inf.errors,
                   "pid_consistency": [r["pid_consistency_error"] for r in inf.cells],
                   "chain_rule": [r["chain_rule_error"] for r in inf.cells],
                   "n_pid_pairs": len(inf.pid)}
    out["timing"]["info_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fss = ex.finite_size_scan(plan, FSS_SIZES, 0.25, plan.n_seeds)
    out["fss"] = fss
    out["timing"]["fss_s"] = time.perf_counter() - t0
    log(f"fss exponent {fss['exponent']}")

    t0 = time.perf_counter()
    switch = []
    for s in range(plan.n_seeds):
        for a, b in ((K_CRIT, K_SUB), (K_SUB, K_CRIT)):
            res = ex.task_switch(plan, a, b, CHECKPOINTS, s)
            switch.append({"from_K": a, "to_K": b, "seed": s, "rows": res.rows})
        log(f"switch seed={s}")
    out["switch"] = switch
    out["timing"]["switch_s"] = time.perf_counter() - t0
    return _clean(out)


def load_or_compute(log=print) -> dict:
    cache = os.environ.get("CRITNET_ACCEPTANCE_CACHE", str(DEFAULT_CACHE))
    if cache and Path(cache).exists():
        return json.loads(Path(cache).read_text())
    result = compute(log=log)
    if cache:
        Path(cache).parent.mkdir(parents=True, exist_ok=True)
        Path(cache).write_text(json.dumps(result))
    return result


if __name__ == "__main__":
    load_or_compute(log=lambda m: print(m, flush=True))
