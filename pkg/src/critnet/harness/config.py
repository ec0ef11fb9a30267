"""Experiment plans and TOML configuration.

A configuration file mirrors the parameter table names::

    [network]
    N = 32
    K_ext = 8

    [neuron]
    tau_ref = 4.9

    [plasticity]
    corr_gain = 12.0

    [plan]
    kext_grid = [8, 10, 12, 16, 24, 32]
    n_seeds = 10

    [durations]
    T_burnin = 300000.0

Unknown keys raise :class:`ConfigError`. Durations are in ms.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..params import ConfigError, NetworkConfig, NeuronParams, PlasticityParams, SynapseParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ANALYSES = ("avalanche", "branching", "perturbation", "info", "pid", "task")


@dataclass
class Durations:
    T_burnin: float = 300_000.0
    T_exp: float = 104_000.0
    T_static: float = 1_000.0
    T_train: float = 104_000.0
    T_test: float = 21_000.0
    T_pert: float = 2_000.0
    t_pert: float = 1_000.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "T_burnin":
                if v < 0:
                    raise ConfigError("T_burnin must be non-negative")
            elif v <= 0:
                raise ConfigError(f"{f.name} must be positive")
        if not self.t_pert < self.T_pert:
            raise ConfigError("t_pert must lie before the end of T_pert")

    @classmethod
    def paper_scale(cls) -> "Durations":
        return cls(T_burnin=625_000.0)


@dataclass
class ExperimentPlan:
    """What to run: grid, seeds, durations and which analyses to apply."""

    network: NetworkConfig = field(default_factory=NetworkConfig)
    kext_grid: list = field(default_factory=lambda: [8, 10, 12, 16, 24, 32])
    n_seeds: int = 10
    master_seed: int = 0
    durations: Durations = field(default_factory=Durations)
    trials: int = 10
    N_pert: int = 6
    analyses: tuple = ANALYSES
    history: int = 4
    n_tau: int = 100
    max_pid_pairs: int | None = 64
    tasks: list = field(default_factory=lambda: [("parity", 5), ("parity", 15), ("sum", 5)])
    N_read: list = field(default_factory=lambda: [16])
    n_shuffles: int = 5
    trial_jitter: float = 0.1

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")
        if self.trials < 2:
            raise ConfigError("at least two trials are needed for trial distances")
        if self.trial_jitter < 0:
            raise ConfigError("trial_jitter must be non-negative")
        for k in self.kext_grid:
            if not 0 <= k <= self.network.N:
                raise ConfigError(f"K_ext={k} outside [0, {self.network.N}]")
        bad = set(self.analyses) - set(ANALYSES)
        if bad:
            raise ConfigError(f"unknown analyses {sorted(bad)}")
        self.tasks = [tuple(t) for t in self.tasks]

    @classmethod
    def paper_scale(cls, **kw) -> "ExperimentPlan":
        kw.setdefault("n_seeds", 100)
        kw.setdefault("durations", Durations.paper_scale())
        kw.setdefault("max_pid_pairs", None)
        return cls(**kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["analyses"] = list(self.analyses)
        d["tasks"] = [list(t) for t in self.tasks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        network = NetworkConfig.from_dict(d.pop("network", {}))
        durations = Durations(**d.pop("durations", {}))
        if "analyses" in d:
            d["analyses"] = tuple(d["analyses"])
        return cls(network=network, durations=durations, **d)


_SECTIONS = {
    "neuron": NeuronParams,
    "synapse": SynapseParams,
    "plasticity": PlasticityParams,
}


def _check_keys(section, values, allowed):
    unknown = set(values) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")


def plan_from_mapping(data: dict, paper_scale: bool = False) -> ExperimentPlan:
    """Build a plan from a parsed TOML mapping."""
    known = {"network", "plan", "durations", *_SECTIONS}
    _check_keys("top level", data, known)
    net = dict(data.get("network", {}))
    _check_keys("network", net, [f.name for f in dataclasses.fields(NetworkConfig)
                                 if f.name not in _SECTIONS])
    for name, klass in _SECTIONS.items():
        values = data.get(name, {})
        _check_keys(name, values, [f.name for f in dataclasses.fields(klass)])
        net[name] = values
    network = NetworkConfig.from_dict(net)

    base = ExperimentPlan.paper_scale() if paper_scale else ExperimentPlan()
    durations = dataclasses.asdict(base.durations)
    dur_in = data.get("durations", {})
    _check_keys("durations", dur_in, durations)
    durations.update(dur_in)

    plan_in = dict(data.get("plan", {}))
    allowed = [f.name for f in dataclasses.fields(ExperimentPlan)
               if f.name not in ("network", "durations")]
    _check_keys("plan", plan_in, allowed)
    fields = {f.name: getattr(base, f.name) for f in dataclasses.fields(ExperimentPlan)
              if f.name not in ("network", "durations")}
    fields.update(plan_in)
    if "analyses" in fields:
        fields["analyses"] = tuple(fields["analyses"])
    return ExperimentPlan(network=network, durations=Durations(**durations), **fields)


def load_plan(path=None, paper_scale: bool = False) -> ExperimentPlan:
    """Read a TOML file into an :class:`ExperimentPlan` (defaults if ``path`` is None).

    A ``manifest.json`` written by an earlier run is accepted too; its
    recorded plan is used as is, so the run can be replayed exactly.
    """
    if path is None:
        return plan_from_mapping({}, paper_scale)
    if Path(path).suffix == ".json":
        try:
            manifest = json.loads(Path(path).read_text())
            return ExperimentPlan.from_dict(manifest["plan"])
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"{path}: not a run manifest ({err})") from err
    with open(Path(path), "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"{path}: {err}") from err
    return plan_from_mapping(data, paper_scale)
