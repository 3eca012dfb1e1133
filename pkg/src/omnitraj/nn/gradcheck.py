"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Parameter


def grad_check(
    f,
    params: list[Parameter],
    step: float = 1e-5,
    max_entries_per_param: int = 25,
    seed: int = 0,
    atol: float = 1e-9,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` rebuilds the scalar loss graph on every call. For parameters larger
    than `max_entries_per_param` a deterministic random subset of entries is
    probed. Relative error is |a - n| / max(|a| + |n|, 1e-8); differences
    below `atol` count as zero, so parameters whose true gradient vanishes
    by symmetry (and leaves only cancellation residue) do not trip the
    check.
    """
    for p in params:
        p.zero_grad()
    loss = f()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        n_entries = flat.size
        if n_entries <= max_entries_per_param:
            idxs = np.arange(n_entries)
        else:
            idxs = rng.choice(n_entries, size=max_entries_per_param, replace=False)
        a_flat = a.reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            up = f().item()
            flat[i] = orig - step
            down = f().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            diff = abs(a_flat[i] - numeric)
            if diff <= atol:
                continue
            worst = max(worst, diff / max(abs(a_flat[i]) + abs(numeric), 1e-8))
    return worst
