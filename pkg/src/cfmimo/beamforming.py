"""MS combiners, ZF precoding and the BCD-SD hybrid decomposition.

Precoders are computed per AP from locally available effective channels:
at AP m the served estimates are stacked into G_m and
Q_{k,m} = (G_m G_m^H)^-1 S_{k,m}, followed by unit-trace normalization.
A push-through Tikhonov term handles the rank-deficient Gram that arises
whenever the AP serves fewer than N_AP streams (always the case in UC
mode with small N); the regularized solution converges to the right
pseudo-inverse, so multi-user interference is still nulled whenever the
dimensionality permits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BeamformingError(ValueError):
    pass


class PrecoderMode(str, enum.Enum):
    FULLY_DIGITAL = "fd"
    HYBRID = "hy"


REG_SCALE = 1e-8          # Tikhonov: eps = REG_SCALE * tr(Gram) / N_AP
COND_LIMIT = 1e10


@dataclass
class PrecoderSet:
    mode: PrecoderMode
    q: np.ndarray                     # (M, K, N_AP, P); zero for unserved pairs
    served: np.ndarray                # (M, K) bool
    q_rf: np.ndarray | None = None    # (M, N_AP, N_RF) for hybrid
    q_bb: np.ndarray | None = None    # per-AP list is ragged; stored dense (M, N_RF, K*P)
    regularized_aps: list[int] = field(default_factory=list)


def ms_combiner(n_ms_ant: int, p_streams: int) -> np.ndarray:
    """0-1 combiner L = I_P kron 1_{N_MS/P}; requires P | N_MS."""
    if n_ms_ant % p_streams != 0:
        raise BeamformingError("multiplexing order P must divide N_MS")
    return np.kron(np.eye(p_streams), np.ones((n_ms_ant // p_streams, 1)))


def _regularized_inverse_apply(gram: np.ndarray, rhs: np.ndarray):
    """Solve gram @ X = rhs, adding eps*I when gram is ill conditioned.

    Returns (X, regularized_flag).
    """
    eig = np.linalg.eigvalsh(gram)
    top = max(float(eig[-1]), 0.0)
    if top <= 0.0 or eig[0] <= top / COND_LIMIT:
        eps = REG_SCALE * np.trace(gram).real / gram.shape[0]
        if eps <= 0.0:
            raise BeamformingError("zero effective channel matrix at AP")
        return np.linalg.solve(gram + eps * np.eye(gram.shape[0]), rhs), True
    return np.linalg.solve(gram, rhs), False


def zf_precoders(s_eff: np.ndarray, served: np.ndarray) -> PrecoderSet:
    """Fully-digital ZF precoders from (estimated) effective channels.

    ``s_eff`` has shape (M, K, N_AP, P); only columns of served MSs enter
    each AP's stacked matrix.  Every returned Q_{k,m} is normalized to
    unit trace(QQ^H).
    """
    n_aps, n_users, n_ap_ant, p = s_eff.shape
    q = np.zeros_like(s_eff)
    regularized = []
    for m in range(n_aps):
        ks = np.nonzero(served[m])[0]
        if ks.size == 0:
            continue
        g = np.concatenate([s_eff[m, k] for k in ks], axis=1)  # (N_AP, n*P)
        gram = g @ g.conj().T
        sol, flagged = _regularized_inverse_apply(gram, g)
        if flagged:
            regularized.append(m)
        for j, k in enumerate(ks):
            qk = sol[:, j * p:(j + 1) * p]
            norm = np.linalg.norm(qk)
            if norm == 0.0:
                raise BeamformingError(f"zero precoder for AP {m}, MS {k}")
            q[m, k] = qk / norm
    return PrecoderSet(mode=PrecoderMode.FULLY_DIGITAL, q=q,
                       served=served.copy(), regularized_aps=regularized)


def bcd_sd(q_opt: np.ndarray, n_rf: int, rng: np.random.Generator,
           max_iter: int = 100, tol: float = 1e-6):
    """Alternating LS factorization Q_opt ~ Q_rf Q_bb with |Q_rf|=1/sqrt(N_AP).

    Q_bb is the exact LS solution given Q_rf; the Q_rf phase-projection
    step is accepted only if the end-of-iteration residual does not grow,
    which makes the returned residual sequence non-increasing by
    construction.  Returns (q_rf, q_bb, residuals).
    """
    if n_rf < 1:
        raise BeamformingError("n_rf must be >= 1")
    if not np.all(np.isfinite(q_opt)):
        raise BeamformingError("non-finite hybrid decomposition target")
    n_ap = q_opt.shape[0]
    scale = 1.0 / np.sqrt(n_ap)

    def ls_bb(q_rf):
        gram = q_rf.conj().T @ q_rf
        sol, _ = _regularized_inverse_apply(gram, q_rf.conj().T @ q_opt)
        return sol

    q_rf = scale * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(n_ap, n_rf)))
    q_bb = ls_bb(q_rf)
    residuals = [np.linalg.norm(q_opt - q_rf @ q_bb)]
    for _ in range(max_iter):
        gram = q_bb @ q_bb.conj().T
        sol, _ = _regularized_inverse_apply(gram, q_bb @ q_opt.conj().T)
        phi = np.angle(sol.conj().T)
        cand_rf = scale * np.exp(1j * phi)
        cand_bb = ls_bb(cand_rf)
        res = np.linalg.norm(q_opt - cand_rf @ cand_bb)
        if res > residuals[-1]:
            break
        q_rf, q_bb = cand_rf, cand_bb
        improved = residuals[-1] - res
        residuals.append(res)
        if improved <= tol * max(residuals[0], 1e-300):
            break
    return q_rf, q_bb, np.asarray(residuals)


def hybrid_precoders(fd: PrecoderSet, n_rf: int,
                     rng: np.random.Generator,
                     max_iter: int = 100, tol: float = 1e-6) -> PrecoderSet:
    """Decompose each AP's stacked FD precoder and renormalize per MS.

    The per-MS effective precoders Q_rf @ Q_bb_k are renormalized to unit
    trace so the downlink power semantics match the FD mode.
    """
    n_aps, n_users, n_ap_ant, p = fd.q.shape
    q_eff = np.zeros_like(fd.q)
    q_rf_all = np.zeros((n_aps, n_ap_ant, n_rf), dtype=complex)
    q_bb_all = np.zeros((n_aps, n_rf, n_users * p), dtype=complex)
    for m in range(n_aps):
        ks = np.nonzero(fd.served[m])[0]
        if ks.size == 0:
            continue
        q_opt = np.concatenate([fd.q[m, k] for k in ks], axis=1)
        q_rf, q_bb, _ = bcd_sd(q_opt, n_rf, rng, max_iter=max_iter, tol=tol)
        q_rf_all[m] = q_rf
        for j, k in enumerate(ks):
            block = q_bb[:, j * p:(j + 1) * p]
            q_bb_all[m, :, k * p:(k + 1) * p] = block
            eff = q_rf @ block
            norm = np.linalg.norm(eff)
            if norm == 0.0:
                raise BeamformingError(f"zero hybrid precoder at AP {m}, MS {k}")
            q_eff[m, k] = eff / norm
    return PrecoderSet(mode=PrecoderMode.HYBRID, q=q_eff,
                       served=fd.served.copy(), q_rf=q_rf_all, q_bb=q_bb_all,
                       regularized_aps=list(fd.regularized_aps))
