"""Drift + anticausal STDP + biased-noise weight update.

Every period ``T`` each weight moves by

    dw = -lambda_stdp * g * f - lambda_drift * w + n,   n ~ U(-n_amp, n_amp) + n_mean

where ``g`` is ``corr_gain`` and ``f`` sums ``eta * exp((t_post - t_pre) / tau_stdp)``
over anticausal (pre after post) nearest-neighbour pairs. Each presynaptic
spike pairs with the most recent postsynaptic spike, and that postsynaptic
spike is consumed for the synapse, so it cannot pair again. Spike memory
persists across update windows. The network kernel accumulates ``f`` online with the same
rule; :func:`stdp_kernel` is the reference version on explicit spike times.
"""

from __future__ import annotations

import numpy as np

from .params import PlasticityParams


def stdp_kernel(pre_times, post_times, eta=0.071, tau_stdp=6.8,
                window=None, last_post=None, last_paired=None) -> float:
    """Anticausal nearest-neighbour kernel sum for one synapse.

    ``window=(t0, t1)`` restricts the presynaptic spikes considered to
    ``[t0, t1)``. ``last_post``/``last_paired`` carry the postsynaptic
    spike memory in from earlier windows.
    """
    pre = np.sort(np.asarray(pre_times, dtype=float))
    post = np.sort(np.asarray(post_times, dtype=float))
    if window is not None:
        pre = pre[(pre >= window[0]) & (pre < window[1])]
    f = 0.0
    paired = last_paired
    for tp in pre:
        k = np.searchsorted(post, tp, side="left")
        if k > 0:
            t_post = post[k - 1]
        elif last_post is not None and last_post < tp:
            t_post = last_post
        else:
            continue
        if paired is not None and t_post == paired:
            continue
        f += eta * np.exp((t_post - tp) / tau_stdp)
        paired = t_post
    return f


def update_weights(w, f, params: PlasticityParams, rng: np.random.Generator,
                   w_max: float = 63.0) -> np.ndarray:
    """One plasticity tick. ``f`` is the accumulated kernel per synapse."""
    w = np.asarray(w, dtype=float)
    noise = rng.uniform(-params.n_amp, params.n_amp, size=w.shape) + params.n_mean
    dw = -params.lambda_stdp * params.corr_gain * np.asarray(f) - params.lambda_drift * w + noise
    return np.clip(w + dw, 0.0, w_max)


def fixed_point(params: PlasticityParams, mean_f: float = 0.0) -> float:
    """Weight at which the expected update vanishes (before clipping)."""
    return (params.n_mean - params.lambda_stdp * params.corr_gain * mean_f) / params.lambda_drift
