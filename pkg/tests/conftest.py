import pytest

from critnet.harness.config import Durations, ExperimentPlan

SMALL_TOML = """
[network]
N = 32

[plan]
kext_grid = [8, 16]
n_seeds = 2
trials = 3
n_tau = 10
max_pid_pairs = 2
tasks = [["parity", 2], ["sum", 2]]
N_read = [8]
n_shuffles = 1

[durations]
T_burnin = 300000.0
T_exp = 10000.0
T_static = 300.0
T_pert = 400.0
t_pert = 200.0
T_train = 3000.0
T_test = 1000.0
"""


def small_durations():
    return Durations(T_burnin=300_000.0, T_exp=10_000.0, T_static=300.0, T_pert=400.0,
                     t_pert=200.0, T_train=3000.0, T_test=1000.0)


@pytest.fixture
def small_plan():
    return ExperimentPlan(kext_grid=[8, 16], n_seeds=2, durations=small_durations(), trials=3,
                          n_tau=10, max_pid_pairs=2, tasks=[("parity", 2), ("sum", 2)],
                          N_read=[8], n_shuffles=1)


@pytest.fixture
def small_toml(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_TOML)
    return path


ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
