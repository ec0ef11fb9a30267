"""Parity and sum benchmarks with a class-balanced linear readout.

The network is driven by a single shared Poisson train. Both the stimulus
and the readout neurons' spikes are binned at 1 ms; the readout sees the
binary activity of ``N_read`` neurons in the same bin as the label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .info import entropy, mutual_information
from .records import InputError

TASKS = ("parity", "sum")


class DegenerateTask(ValueError):
    """Training labels contain a single class."""


@dataclass
class TaskConfig:
    task: str = "parity"
    n: int = 5
    N_read: int = 16
    dt_bin: float = 1.0
    T_train: float = 104_000.0
    T_test: float = 21_000.0
    intercept: bool = True
    ridge: float = 1e-6
    n_shuffles: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise InputError(f"unknown task {self.task!r}")
        if self.n < 1:
            raise InputError("n must be at least 1")
        if self.N_read < 1:
            raise InputError("N_read must be at least 1")

    @property
    def n_classes(self) -> int:
        return 2 if self.task == "parity" else self.n + 1


def _window_sum(s, n):
    s = np.asarray(s, dtype=np.int64)
    if len(s) < n:
        return np.zeros(0, dtype=np.int64)
    c = np.concatenate([[0], np.cumsum(s)])
    return c[n:] - c[:-n]


def label_parity(s, n: int) -> np.ndarray:
    """``s(t) xor ... xor s(t-n+1)`` for ``t = n-1 .. len(s)-1``."""
    return _window_sum(s, n) % 2


def label_sum(s, n: int) -> np.ndarray:
    """``s(t) + ... + s(t-n+1)`` for ``t = n-1 .. len(s)-1``."""
    return _window_sum(s, n)


def labels(s, n: int, task: str) -> np.ndarray:
    if task == "parity":
        return label_parity(s, n)
    if task == "sum":
        return label_sum(s, n)
    raise InputError(f"unknown task {task!r}")


@dataclass
class Readout:
    """Linear readout; ``weights`` has one column per output unit.

    Parity uses a single unit thresholded at 1/2, the sum task one
    one-vs-rest unit per class with winner-take-all.
    """

    weights: np.ndarray
    task: str
    intercept: bool = True

    def _design(self, activity):
        x = np.asarray(activity, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if self.intercept:
            x = np.hstack([x, np.ones((len(x), 1))])
        return x

    def output(self, activity) -> np.ndarray:
        return self._design(activity) @ self.weights

    def predict(self, activity) -> np.ndarray:
        out = self.output(activity)
        if self.task == "parity":
            return (out[:, 0] > 0.5).astype(np.int64)
        # argmax returns the first maximum, i.e. ties go to the smaller class
        return np.argmax(out, axis=1).astype(np.int64)


def class_weights(y, n_classes: int) -> np.ndarray:
    """Per-sample weights ``1/frequency(class)`` normalised to mean 1."""
    counts = np.bincount(y, minlength=n_classes).astype(float)
    w = 1.0 / counts[y]
    return w / w.mean()


def train_readout(activity, y, task: str, n: int | None = None, intercept: bool = True,
                  ridge: float = 1e-6) -> Readout:
    """Class-weighted ridge least squares via the normal equations.

    The ridge is ``ridge * trace(A) / dim(A)`` with ``A`` the weighted Gram
    matrix. For the sum task ``n`` fixes the number of classes (``n + 1``);
    by default it is inferred from the largest label.
    """
    y = np.asarray(y, dtype=np.int64)
    x = np.asarray(activity, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) != len(y):
        raise InputError("activity and labels must be aligned")
    if len(np.unique(y)) < 2:
        raise DegenerateTask("training labels contain a single class")
    if task == "parity":
        n_classes = 2
        targets = y[:, None].astype(float)
    elif task == "sum":
        n_classes = (int(y.max()) if n is None else n) + 1
        targets = np.eye(n_classes)[y]
    else:
        raise InputError(f"unknown task {task!r}")
    readout = Readout(np.zeros(0), task, intercept)
    design = readout._design(x)
    sw = class_weights(y, n_classes)
    gram = design.T @ (design * sw[:, None])
    dim = gram.shape[0]
    gram[np.diag_indices(dim)] += ridge * np.trace(gram) / dim
    readout.weights = np.linalg.solve(gram, design.T @ (targets * sw[:, None]))
    return readout


@dataclass
class TaskResult:
    I_raw: float
    I_shuffle: float
    H_label: float
    extra: dict = field(default_factory=dict)

    @property
    def I_corrected(self) -> float:
        return self.I_raw - self.I_shuffle

    @property
    def normalized(self) -> float:
        return self.I_corrected / self.H_label if self.H_label > 0 else float("nan")


def _mi(a, b):
    return mutual_information(a, b, min_samples=1)


def evaluate(readout: Readout, test_activity, test_labels, train_activity=None,
             train_labels=None, rng=None, n: int | None = None,
             n_shuffles: int = 1) -> TaskResult:
    """Plug-in MI between predicted and true test labels.

    When training data are supplied the shuffle baseline retrains the same
    pipeline on permuted training labels and scores it on the true test
    labels, averaged over ``n_shuffles`` permutations; otherwise
    ``I_shuffle`` is zero.
    """
    y = np.asarray(test_labels, dtype=np.int64)
    pred = readout.predict(test_activity)
    i_raw = _mi(y, pred)
    i_shuffle = 0.0
    if train_activity is not None:
        rng = np.random.default_rng(rng)
        vals = []
        for _ in range(n_shuffles):
            perm = rng.permutation(np.asarray(train_labels))
            shuffled = train_readout(train_activity, perm, readout.task, n=n,
                                     intercept=readout.intercept)
            vals.append(_mi(y, shuffled.predict(test_activity)))
        i_shuffle = float(np.mean(vals))
    return TaskResult(i_raw, i_shuffle, entropy(y, min_samples=1))


def run_task(activity, stimulus_bits, config: TaskConfig, rng=None,
             readout_subset=None) -> TaskResult:
    """Train on the first ``T_train`` and test on the next ``T_test`` of binned data.

    ``activity`` is ``(n_bins, N)`` binary network activity and
    ``stimulus_bits`` the binned shared input. Bins before ``t = n - 1``
    have no label and are dropped. ``readout_subset`` defaults to
    ``N_read`` neurons drawn without replacement from ``rng``.
    """
    rng = np.random.default_rng(rng)
    activity = np.asarray(activity)
    n_neurons = activity.shape[1]
    if config.N_read > n_neurons:
        raise InputError(f"N_read={config.N_read} exceeds N={n_neurons}")
    if readout_subset is None:
        readout_subset = np.sort(rng.choice(n_neurons, config.N_read, replace=False))
    n = config.n
    y = labels(stimulus_bits, n, config.task)
    x = activity[n - 1:, readout_subset].astype(float)
    n_train = int(round(config.T_train / config.dt_bin)) - (n - 1)
    n_test = int(round(config.T_test / config.dt_bin))
    if n_train <= 0 or n_train + n_test > len(y):
        raise InputError(f"need {n_train + n_test + n - 1} bins, got {len(stimulus_bits)}")
    nk = n if config.task == "sum" else None
    readout = train_readout(x[:n_train], y[:n_train], config.task, n=nk,
                            intercept=config.intercept, ridge=config.ridge)
    test = slice(n_train, n_train + n_test)
    res = evaluate(readout, x[test], y[test], x[:n_train], y[:n_train], rng, n=nk,
                   n_shuffles=config.n_shuffles)
    res.extra["readout_subset"] = [int(i) for i in readout_subset]
    return res
