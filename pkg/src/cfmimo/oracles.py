"""Independent brute-force oracles for small instances.

These are deliberately naive (exhaustive grids, direct formulas) and
share no code path with the optimizer; the acceptance suite compares the
optimizer's output against them.
"""

from __future__ import annotations

import itertools

import numpy as np

from .config import CircuitModel
from .rates import GainTensor


def _feasible_block_grids(served: np.ndarray, p_max: float, points: int):
    """Per-AP lists of feasible power tuples on a uniform grid."""
    axes = np.linspace(0.0, p_max, points)
    grids = []
    for m in range(served.shape[0]):
        n = int(served[m].sum())
        if n == 0:
            grids.append(np.zeros((1, 0)))
            continue
        mesh = np.array(list(itertools.product(axes, repeat=n)))
        grids.append(mesh[mesh.sum(axis=1) <= p_max + 1e-12])
    return grids


def batch_gee_p1(tensor: GainTensor, eta_batch: np.ndarray, delta: float,
                 circuit_model: CircuitModel, p_c_w: float) -> np.ndarray:
    """Vectorized downlink GEE for a batch of (M, K) allocations, P=1 only."""
    if tensor.p_streams != 1:
        raise ValueError("batched oracle supports P = 1 only")
    gains = tensor.gains[..., 0, 0]                    # (K, K, M)
    served = tensor.served.astype(float)
    w = np.sqrt(eta_batch) * served[None]              # (G, M, K)
    a = np.einsum("gml,klm->gkl", w, gains)            # (G, K, K)
    noise = tensor.noise_var * tensor.n_ms_ant / tensor.p_streams
    power2 = np.abs(a) ** 2
    k = tensor.n_users
    own = power2[:, np.arange(k), np.arange(k)]
    inter = power2.sum(axis=2) - own
    rates = tensor.bandwidth_hz * np.log2(1.0 + own / (noise + inter))
    sum_rate = rates.sum(axis=1)

    radiated = eta_batch.sum(axis=(1, 2))
    per_ap = eta_batch.sum(axis=2)
    if circuit_model is CircuitModel.STATIC:
        circuit = p_c_w * tensor.n_aps * np.ones(eta_batch.shape[0])
    elif circuit_model is CircuitModel.IDLE:
        circuit = p_c_w * (0.5 + 0.5 * (per_ap > 0)).sum(axis=1)
    else:
        raise ValueError("oracle supports static and idle circuit models")
    return sum_rate / (delta * radiated + circuit)


def gee_grid_search(tensor: GainTensor, p_max: float, delta: float,
                    circuit_model: CircuitModel, p_c_w: float,
                    points: int = 20):
    """Exhaustive GEE maximization on a per-dimension grid; P=1 instances.

    Returns (best_gee, best_eta).  Cost grows as points^(total served
    pairs); intended for tiny instances only.
    """
    served = tensor.served
    grids = _feasible_block_grids(served, p_max, points)
    sizes = [g.shape[0] for g in grids]
    total = int(np.prod(sizes))
    eta_batch = np.zeros((total, tensor.n_aps, tensor.n_users))
    reps_after = np.concatenate([np.cumprod(sizes[::-1])[::-1][1:], [1]])
    for m, grid in enumerate(grids):
        ks = np.nonzero(served[m])[0]
        if ks.size == 0:
            continue
        tiled = np.repeat(np.tile(grid, (total // (sizes[m] * reps_after[m]), 1)),
                          reps_after[m], axis=0)
        eta_batch[:, m, ks] = tiled
    gee = batch_gee_p1(tensor, eta_batch, delta, circuit_model, p_c_w)
    best = int(np.argmax(gee))
    return float(gee[best]), eta_batch[best]


def sumrate_grid_search(tensor: GainTensor, p_max: float, points: int = 20):
    """Exhaustive sum-rate maximization on a grid (P=1 instances)."""
    served = tensor.served
    grids = _feasible_block_grids(served, p_max, points)
    sizes = [g.shape[0] for g in grids]
    total = int(np.prod(sizes))
    eta_batch = np.zeros((total, tensor.n_aps, tensor.n_users))
    reps_after = np.concatenate([np.cumprod(sizes[::-1])[::-1][1:], [1]])
    for m, grid in enumerate(grids):
        ks = np.nonzero(served[m])[0]
        if ks.size == 0:
            continue
        tiled = np.repeat(np.tile(grid, (total // (sizes[m] * reps_after[m]), 1)),
                          reps_after[m], axis=0)
        eta_batch[:, m, ks] = tiled
    # sum-rate = GEE with delta=0 and unit static circuit power, times M
    vals = batch_gee_p1(tensor, eta_batch, 0.0, CircuitModel.STATIC, 1.0) \
        * tensor.n_aps
    best = int(np.argmax(vals))
    return float(vals[best]), eta_batch[best]
