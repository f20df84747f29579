"""Power control: GEE and sum-rate maximization plus uniform baselines.

The downlink GEE problem is non-concave, so it is attacked block by block
(one AP at a time).  Within a block the rate of each user splits as
g1 - g2 with both terms concave in the block powers; replacing g2 by its
first-order Taylor expansion at the current point gives a concave lower
bound that touches the objective there, and the resulting concave/affine
fractional subproblem is solved globally by Dinkelbach iterations on top
of a projected-gradient inner solver.  Accepting a block update only when
the true objective does not drop keeps every reported trace monotone even
under inexact inner solves or the non-smooth idle circuit model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import CircuitModel, OptimizerConfig
from .rates import (GainTensor, LN2, circuit_power, downlink_rates,
                    gee_downlink, gee_uplink, total_power_downlink,
                    uplink_rates)


class OptimizerError(RuntimeError):
    pass


# --------------------------------------------------------------------- #
# feasible-set projections

def project_capped_simplex(v: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= cap}."""
    if cap < 0:
        raise ValueError("cap must be non-negative")
    w = np.maximum(v, 0.0)
    if w.sum() <= cap:
        return w
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, v.size + 1)
    support = idx[u - css / idx > 0]
    if support.size == 0:           # cap = 0: everything clips to zero
        return np.zeros_like(w)
    rho = support[-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def project_box(v: np.ndarray, upper: float) -> np.ndarray:
    return np.clip(v, 0.0, upper)


# --------------------------------------------------------------------- #
# inner concave maximizer: projected gradient ascent with backtracking

def inner_maximize(value: Callable[[np.ndarray], float],
                   grad: Callable[[np.ndarray], np.ndarray],
                   project: Callable[[np.ndarray], np.ndarray],
                   x0: np.ndarray, cfg: OptimizerConfig,
                   step_scale: float = 1.0):
    """Maximize a concave objective over a convex set via projected ascent.

    Returns (x, value, info); info["stalled"] marks a non-improving step
    after the backtracking floor.
    """
    x = project(np.asarray(x0, dtype=float))
    fx = value(x)
    t = None
    stalled = False
    for _ in range(cfg.inner_max_iter):
        g = grad(x)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        if t is None:
            t = step_scale / gn
        fn = fx
        xn = x
        accepted = False
        for _ in range(80):
            cand = project(x + t * g)
            dx = cand - x
            if float(np.linalg.norm(dx)) <= 1e-15 * (1.0 + float(np.linalg.norm(x))):
                break
            fc = value(cand)
            if fc >= fx + cfg.armijo_c1 * float(g @ dx):
                xn, fn, accepted = cand, fc, True
                break
            t *= cfg.armijo_shrink
        if not accepted:
            stalled = float(np.linalg.norm(project(x + t * g) - x)) > \
                1e-12 * (1.0 + float(np.linalg.norm(x)))
            break
        rel = (fn - fx) / max(abs(fn), 1e-300)
        x, fx = xn, fn
        t *= 2.0
        if rel < cfg.inner_tol:
            break
    return x, fx, {"stalled": stalled}


# --------------------------------------------------------------------- #
# Dinkelbach for concave / affine fractional programs

def dinkelbach(numer: Callable[[np.ndarray], float],
               numer_grad: Callable[[np.ndarray], np.ndarray],
               denom_lin: np.ndarray, denom_const: float,
               project: Callable[[np.ndarray], np.ndarray],
               x0: np.ndarray, cfg: OptimizerConfig,
               step_scale: float = 1.0, max_iter: int = 50):
    """Maximize numer(x) / (denom_lin @ x + denom_const) over the set.

    Returns (x, lambdas); the lambda sequence is non-decreasing because
    each parametric subproblem starts from the incumbent and the inner
    solver only accepts improving steps.
    """
    if denom_const <= 0:
        raise OptimizerError("denominator must be positive on the feasible set")
    x = project(np.asarray(x0, dtype=float))
    lambdas = []
    for _ in range(max_iter):
        n = numer(x)
        d = float(denom_lin @ x) + denom_const
        lam = n / d
        lambdas.append(lam)
        x_new, f_star, _ = inner_maximize(
            lambda y: numer(y) - lam * (float(denom_lin @ y) + denom_const),
            lambda y: numer_grad(y) - lam * denom_lin,
            project, x, cfg, step_scale=step_scale)
        x = x_new
        if f_star <= cfg.dinkelbach_tol * max(abs(n), abs(lam) * d, 1.0):
            break
    return x, np.asarray(lambdas)


# --------------------------------------------------------------------- #
# per-block rate model and Taylor lower bound

class BlockRateModel:
    """Per-user g1/g2 values and gradients as functions of one AP's powers.

    For AP ``m`` with served users ``ls`` (block size n), every user-k
    covariance is X_k(x) = D_k + sum_j x_j M_kj + sqrt(x_j) C_kj where the
    D/M/C matrices are precomputed from the gain tensor and the frozen
    powers of the other APs.
    """

    def __init__(self, tensor: GainTensor, eta: np.ndarray, m: int,
                 grad_floor: float):
        self.tensor = tensor
        self.m = m
        self.grad_floor = grad_floor
        self.block_users = np.nonzero(tensor.served[m])[0]
        n = self.block_users.size
        k_users, p = tensor.n_users, tensor.p_streams
        self.scale = tensor.bandwidth_hz / LN2

        weights = np.sqrt(np.asarray(eta, dtype=float)) * tensor.served
        a_full = np.einsum("ml,klmpq->klpq", weights, tensor.gains)
        own_b = tensor.gains[:, self.block_users, m]          # (K, n, P, P)
        c = a_full[:, self.block_users] \
            - weights[m, self.block_users][None, :, None, None] * own_b

        noise = tensor.noise_matrix.astype(complex)
        other = np.ones(k_users, dtype=bool)
        other[self.block_users] = False
        fixed = np.einsum("klpq,klrq->kpr", a_full[:, other],
                          a_full[:, other].conj())
        d1 = noise[None] + fixed \
            + np.einsum("kjpq,kjrq->kpr", c, c.conj())
        m1 = np.einsum("kjpq,kjrq->kjpr", own_b, own_b.conj())
        c1 = np.einsum("kjpq,kjrq->kjpr", own_b, c.conj())
        c1 = c1 + np.conj(np.transpose(c1, (0, 1, 3, 2)))

        # g2 drops every own-signal (l = k) contribution.
        d2 = d1.copy()
        m2 = m1.copy()
        c2 = c1.copy()
        pos_of = {int(l): j for j, l in enumerate(self.block_users)}
        for k in range(k_users):
            if k in pos_of:
                j = pos_of[k]
                d2[k] -= c[k, j] @ c[k, j].conj().T
                m2[k, j] = 0.0
                c2[k, j] = 0.0
            else:
                d2[k] -= a_full[k, k] @ a_full[k, k].conj().T
        self._d = (d1, d2)
        self._m = (m1, m2)
        self._c = (c1, c2)

    # -- raw g_i machinery ------------------------------------------- #

    def _x_mats(self, which: int, x: np.ndarray) -> np.ndarray:
        d, mm, cc = self._d[which], self._m[which], self._c[which]
        sx = np.sqrt(np.maximum(x, 0.0))
        return d + np.einsum("j,kjpq->kpq", x, mm) \
                 + np.einsum("j,kjpq->kpq", sx, cc)

    def _vals(self, which: int, x: np.ndarray) -> np.ndarray:
        _, logdet = np.linalg.slogdet(self._x_mats(which, x))
        return self.scale * logdet

    def _grads(self, which: int, x: np.ndarray) -> np.ndarray:
        mm, cc = self._m[which], self._c[which]
        xf = np.maximum(x, self.grad_floor)
        xinv = np.linalg.inv(self._x_mats(which, xf))
        dx = mm + cc / (2.0 * np.sqrt(xf))[None, :, None, None]
        return self.scale * np.einsum("kpq,kjqp->kj", xinv, dx).real

    def g1_vals(self, x):
        return self._vals(0, x)

    def g2_vals(self, x):
        return self._vals(1, x)

    def g1_grads(self, x):
        return self._grads(0, x)

    def g2_grads(self, x):
        return self._grads(1, x)

    def rates(self, x) -> np.ndarray:
        return self.g1_vals(x) - self.g2_vals(x)

    def rate_grads(self, x) -> np.ndarray:
        return self.g1_grads(x) - self.g2_grads(x)

    def lower_bound_model(self, x0: np.ndarray) -> "LowerBoundModel":
        x0 = np.maximum(np.asarray(x0, dtype=float), self.grad_floor)
        return LowerBoundModel(block=self, expansion=x0,
                               g2_at_expansion=self.g2_vals(x0),
                               g2_grad_at_expansion=self.g2_grads(x0))


@dataclass
class LowerBoundModel:
    """Concave per-user lower bounds R_bar_k over one AP's power block."""

    block: BlockRateModel
    expansion: np.ndarray
    g2_at_expansion: np.ndarray        # (K,)
    g2_grad_at_expansion: np.ndarray   # (K, n)

    def values(self, x: np.ndarray) -> np.ndarray:
        dx = np.asarray(x, dtype=float) - self.expansion
        return (self.block.g1_vals(x) - self.g2_at_expansion
                - self.g2_grad_at_expansion @ dx)

    def grads(self, x: np.ndarray) -> np.ndarray:
        return self.block.g1_grads(x) - self.g2_grad_at_expansion

    def total(self, x: np.ndarray) -> float:
        return float(self.values(x).sum())

    def total_grad(self, x: np.ndarray) -> np.ndarray:
        return self.grads(x).sum(axis=0)


def lower_bound(tensor: GainTensor, eta: np.ndarray, m: int, k: int,
                expansion: np.ndarray, grad_floor: float = 1e-13):
    """Value and gradient callables for user k's Taylor lower bound R_bar_k
    over the powers of AP m, expanded at ``expansion``."""
    model = BlockRateModel(tensor, eta, m, grad_floor)
    lbm = model.lower_bound_model(np.asarray(expansion, dtype=float))
    return (lambda x: float(lbm.values(np.asarray(x, dtype=float))[k]),
            lambda x: lbm.grads(np.asarray(x, dtype=float))[k])


# --------------------------------------------------------------------- #
# allocations

def uniform_allocation(served: np.ndarray, p_max: float) -> np.ndarray:
    """eta_{m,k} = P_max / card(K(m)) for served pairs, zero elsewhere."""
    served = np.asarray(served, dtype=bool)
    counts = served.sum(axis=1)
    eta = np.zeros(served.shape, dtype=float)
    for m in np.nonzero(counts)[0]:
        eta[m, served[m]] = p_max / counts[m]
    return eta


def uniform_uplink(n_users: int, p_t_max: float, n_ms_ant: int) -> np.ndarray:
    """Full-power uplink baseline: eta_k = P_T,max / tr(L^H L)."""
    return np.full(n_users, p_t_max / n_ms_ant)


# --------------------------------------------------------------------- #
# downlink GEE maximization (block sweeps + Dinkelbach)

MONOTONE_SLACK = 1e-9


def _check_monotone(trace: list[float], what: str) -> None:
    if len(trace) >= 2:
        prev, cur = trace[-2], trace[-1]
        if cur < prev - MONOTONE_SLACK * max(abs(prev), 1.0):
            raise OptimizerError(
                f"{what} decreased from {prev!r} to {cur!r}; "
                "lower bound or gradient is inconsistent")


def gee_max_downlink(tensor: GainTensor, cfg: OptimizerConfig, p_max: float,
                     delta: float, circuit_model: CircuitModel, p_c_w: float,
                     sigmoid_theta: float | None = None,
                     eta0: np.ndarray | None = None):
    """Sequential GEE maximization; returns (eta, gee_trace).

    Starts from the uniform allocation unless ``eta0`` is given, sweeps
    the APs in index order solving the concave/affine surrogate
    subproblem of each block by Dinkelbach, and keeps the best of
    {current, subproblem solution, all-off} measured on the true GEE so
    the trace is non-decreasing by construction.
    """
    served = tensor.served
    eta = uniform_allocation(served, p_max) if eta0 is None \
        else np.array(eta0, dtype=float)
    floor = cfg.grad_floor_scale * p_max

    def true_gee(e):
        return gee_downlink(tensor, e, delta, circuit_model, p_c_w,
                            sigmoid_theta)

    gee = true_gee(eta)
    trace = [gee]
    blocks = [m for m in range(tensor.n_aps) if served[m].any()]
    for _ in range(cfg.max_sweeps):
        gee_sweep_start = gee
        for m in blocks:
            model = BlockRateModel(tensor, eta, m, floor)
            ls = model.block_users
            x0 = eta[m, ls]
            lbm = model.lower_bound_model(x0)
            # Affine denominator: other blocks frozen, AP m counted active.
            eta_rest = eta.copy()
            eta_rest[m, :] = 0.0
            pc_rest = circuit_power(eta_rest, circuit_model, p_c_w,
                                    sigmoid_theta)
            d_const = float(delta * eta_rest.sum()
                            + pc_rest.sum() - pc_rest[m] + p_c_w)
            d_lin = np.full(ls.size, delta)
            if delta == 0.0:
                x_star, _, _ = inner_maximize(
                    lbm.total, lbm.total_grad,
                    lambda v: project_capped_simplex(v, p_max),
                    x0, cfg, step_scale=p_max)
            else:
                x_star, _ = dinkelbach(
                    lbm.total, lbm.total_grad, d_lin, d_const,
                    lambda v: project_capped_simplex(v, p_max),
                    x0, cfg, step_scale=p_max)
            candidates = [x0, x_star]
            if circuit_model in (CircuitModel.IDLE, CircuitModel.SIGMOID):
                candidates.append(np.zeros(ls.size))
            best_gee, best_x = -np.inf, x0
            for cand in candidates:
                eta[m, ls] = cand
                g = true_gee(eta)
                if g > best_gee:
                    best_gee, best_x = g, cand
            eta[m, ls] = best_x
            gee = best_gee
            trace.append(gee)
            _check_monotone(trace, "GEE trace")
        if abs(gee - gee_sweep_start) <= cfg.outer_tol * max(abs(gee), 1e-300):
            break
    return eta, np.asarray(trace)


# --------------------------------------------------------------------- #
# sum-rate maximization

def zero_interference_tensor(tensor: GainTensor) -> GainTensor:
    """Copy of the tensor with all cross-user gains zeroed (perfect ZF)."""
    gains = np.zeros_like(tensor.gains)
    k = tensor.n_users
    gains[np.arange(k), np.arange(k)] = tensor.gains[np.arange(k), np.arange(k)]
    return GainTensor(gains=gains, served=tensor.served.copy(),
                      bandwidth_hz=tensor.bandwidth_hz,
                      noise_var=tensor.noise_var,
                      n_ms_ant=tensor.n_ms_ant, p_streams=tensor.p_streams)


def sumrate_max(tensor: GainTensor, cfg: OptimizerConfig, p_max: float,
                method: str = "general", perfect_csi_fd: bool = False,
                eta0: np.ndarray | None = None):
    """Sum-rate maximizing power control; returns (eta, sumrate_trace).

    ``general`` runs the GEE machinery with delta=0, P_c=1 (the
    subproblem degenerates to a single concave maximization).  ``zf``
    requires perfect CSI with FD ZF precoding: multi-user interference is
    dropped, which makes the sum-rate globally concave, and the same
    block sweeps then converge to the global optimum.
    """
    if method == "zf":
        if not perfect_csi_fd:
            raise OptimizerError(
                "zf sum-rate path needs perfect CSI and fully digital ZF")
        work = zero_interference_tensor(tensor)
    elif method == "general":
        work = tensor
    else:
        raise OptimizerError(f"unknown sum-rate method {method!r}")

    eta, trace = gee_max_downlink(
        work, cfg, p_max, delta=0.0, circuit_model=CircuitModel.STATIC,
        p_c_w=1.0, eta0=eta0)
    # Traces are GEE values with unit circuit power: sum-rate / M.
    return eta, trace * work.n_aps


# --------------------------------------------------------------------- #
# uplink GEE maximization

class UplinkRateModel:
    """g1/g2 values and gradients in the K uplink powers (jointly concave)."""

    def __init__(self, tensor: GainTensor):
        self.tensor = tensor
        k, p = tensor.n_users, tensor.p_streams
        self.scale = tensor.bandwidth_hz / LN2
        mask = tensor.served.astype(float)                     # (M, K)
        # t[j, k] = sum_{m in M(k)} B[j, k, m]
        t = np.einsum("mk,jkmpq->jkpq", mask, tensor.gains)
        # e[k, j] = T_jk^H T_jk; own-signal term is e[k, k].
        self.e = np.einsum("jkpq,jkpr->kjqr", t.conj(), t)
        card = mask.sum(axis=0)
        # Users decoded by no AP have all-zero gain rows; a floor on the
        # noise keeps their covariances invertible while leaving their
        # rate and gradient contributions exactly zero.
        self.noise = (tensor.noise_var * np.maximum(card, 1.0))[:, None, None] \
            * np.eye(p)[None]
        self.own = np.zeros((k, k, p, p), dtype=complex)
        self.own[np.arange(k), np.arange(k)] = self.e[np.arange(k), np.arange(k)]
        self.cross = self.e - self.own

    def _x_mats(self, which: int, x: np.ndarray) -> np.ndarray:
        e = self.e if which == 0 else self.cross
        return self.noise + np.einsum("j,kjpq->kpq", x, e)

    def _vals(self, which, x):
        _, logdet = np.linalg.slogdet(self._x_mats(which, x))
        return self.scale * logdet

    def _grads(self, which, x):
        e = self.e if which == 0 else self.cross
        xinv = np.linalg.inv(self._x_mats(which, x))
        return self.scale * np.einsum("kpq,kjqp->kj", xinv, e).real

    def rates(self, x) -> np.ndarray:
        return self._vals(0, x) - self._vals(1, x)

    def g2_vals(self, x):
        return self._vals(1, x)

    def g2_grads(self, x):
        return self._grads(1, x)

    def surrogate(self, x0: np.ndarray):
        g2_0 = self._vals(1, x0)
        g2_grad_0 = self._grads(1, x0)

        def total(x):
            dx = np.asarray(x, dtype=float) - x0
            return float((self._vals(0, x) - g2_0 - g2_grad_0 @ dx).sum())

        def total_grad(x):
            return (self._grads(0, x) - g2_grad_0).sum(axis=0)

        return total, total_grad


def gee_max_uplink(tensor: GainTensor, cfg: OptimizerConfig, p_t_max: float,
                   delta: float, circuit_model: CircuitModel, p_c_ul_w: float,
                   sigmoid_theta: float | None = None,
                   eta0: np.ndarray | None = None):
    """Uplink GEE maximization over the K per-MS powers; (eta_ul, trace)."""
    k = tensor.n_users
    cap = p_t_max / tensor.n_ms_ant        # tr(L^H L) = N_MS
    eta = uniform_uplink(k, p_t_max, tensor.n_ms_ant) if eta0 is None \
        else np.array(eta0, dtype=float)
    model = UplinkRateModel(tensor)

    def true_gee(e):
        return gee_uplink(tensor, e, delta, circuit_model, p_c_ul_w,
                          sigmoid_theta)

    gee = true_gee(eta)
    trace = [gee]
    for _ in range(cfg.max_sweeps):
        total, total_grad = model.surrogate(eta)
        d_const = float(k * p_c_ul_w)
        if circuit_model is CircuitModel.IDLE:
            active = (eta > 0)
            d_const = float(p_c_ul_w * (active.sum() + 0.5 * (~active).sum()))
        d_lin = np.full(k, delta)
        if delta == 0.0:
            x_star, _, _ = inner_maximize(
                total, total_grad, lambda v: project_box(v, cap),
                eta, cfg, step_scale=cap)
        else:
            x_star, _ = dinkelbach(
                total, total_grad, d_lin, max(d_const, 1e-12),
                lambda v: project_box(v, cap), eta, cfg, step_scale=cap)
        candidates = [eta, x_star]
        if circuit_model in (CircuitModel.IDLE, CircuitModel.SIGMOID):
            candidates.append(np.zeros(k))
        best_gee, best_x = -np.inf, eta
        for cand in candidates:
            g = true_gee(cand)
            if g > best_gee:
                best_gee, best_x = g, cand
        converged = abs(best_gee - gee) <= cfg.outer_tol * max(abs(best_gee),
                                                               1e-300)
        eta, gee = best_x.copy(), best_gee
        trace.append(gee)
        _check_monotone(trace, "uplink GEE trace")
        if converged:
            break
    return eta, np.asarray(trace)
