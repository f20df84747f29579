"""Association, effective gain tensor, achievable rates, power and GEE.

Everything downstream of beamforming works on the P x P gain blocks
B[k, l, m] = L_k^H H_{k,m}^H Q_{l,m}, defined for APs m serving MS l.
Interference at MS k from the stream of MS l is summed over the APs that
actually transmit it, i.e. over the serving set of l.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .config import CircuitModel

LN2 = np.log(2.0)


class RateError(ValueError):
    pass


class AssociationMode(str, enum.Enum):
    CF = "cf"
    UC = "uc"


@dataclass
class Association:
    served: np.ndarray        # (M, K) bool; served[m, k] iff AP m serves MS k
    mode: AssociationMode
    n_per_ap: int             # N in UC mode; K in CF mode

    def served_by_ap(self, m: int) -> np.ndarray:
        return np.nonzero(self.served[m])[0]

    def serving_aps(self, k: int) -> np.ndarray:
        return np.nonzero(self.served[:, k])[0]


@dataclass
class GainTensor:
    gains: np.ndarray         # (K, K, M, P, P); gains[k, l, m] = L_k^H H_{k,m}^H Q_{l,m}
    served: np.ndarray        # (M, K) bool
    bandwidth_hz: float
    noise_var: float          # sigma_z^2 = sigma_w^2 (watts)
    n_ms_ant: int
    p_streams: int

    @property
    def n_users(self) -> int:
        return self.gains.shape[0]

    @property
    def n_aps(self) -> int:
        return self.gains.shape[2]

    @property
    def noise_matrix(self) -> np.ndarray:
        # sigma_z^2 L^H L = sigma_z^2 (N_MS / P) I
        return (self.noise_var * self.n_ms_ant / self.p_streams) \
            * np.eye(self.p_streams)


def associate(channels: np.ndarray, mode: AssociationMode,
              n_per_ap: int | None = None) -> Association:
    """CF: every AP serves every MS.  UC: top-N MSs by Frobenius norm.

    Ties break toward the lower MS index for reproducibility.
    """
    n_aps, n_users = channels.shape[:2]
    if mode is AssociationMode.CF:
        return Association(served=np.ones((n_aps, n_users), dtype=bool),
                           mode=mode, n_per_ap=n_users)
    if n_per_ap is None or not 1 <= n_per_ap <= n_users:
        raise RateError("UC association needs 1 <= N <= K")
    norms = np.linalg.norm(channels, axis=(2, 3))     # (M, K)
    served = np.zeros((n_aps, n_users), dtype=bool)
    for m in range(n_aps):
        order = np.argsort(-norms[m], kind="stable")  # stable: index breaks ties
        served[m, order[:n_per_ap]] = True
    return Association(served=served, mode=mode, n_per_ap=n_per_ap)


def gain_tensor(channels: np.ndarray, precoders, combiner: np.ndarray,
                assoc: Association, bandwidth_hz: float,
                noise_var: float) -> GainTensor:
    """B[k, l, m] = L_k^H H_{k,m}^H Q_{l,m} for every m serving l."""
    n_aps, n_users = channels.shape[:2]
    p = combiner.shape[1]
    gains = np.zeros((n_users, n_users, n_aps, p, p), dtype=complex)
    # S[m, k] = H[m, k] @ L  has shape (N_AP, P); B = S^H Q.
    s_eff = np.einsum("mkij,jp->mkip", channels, combiner)
    for m in range(n_aps):
        for l in np.nonzero(assoc.served[m])[0]:
            gains[:, l, m] = np.einsum("kip,iq->kpq",
                                       s_eff[m].conj(), precoders.q[m, l])
    return GainTensor(gains=gains, served=assoc.served.copy(),
                      bandwidth_hz=bandwidth_hz, noise_var=noise_var,
                      n_ms_ant=combiner.shape[0], p_streams=p)


def effective_gain_tensor(s_eff: np.ndarray, precoders, assoc: Association,
                          bandwidth_hz: float, noise_var: float,
                          n_ms_ant: int) -> GainTensor:
    """Gain tensor from (estimated) effective channels S_{k,m} = H L_k.

    B_hat[k, l, m] = S_{k,m}^H Q_{l,m}; this is what the optimizer sees
    when only channel estimates are available.
    """
    n_aps, n_users, _, p = s_eff.shape
    gains = np.zeros((n_users, n_users, n_aps, p, p), dtype=complex)
    for m in range(n_aps):
        for l in np.nonzero(assoc.served[m])[0]:
            gains[:, l, m] = np.einsum("kip,iq->kpq",
                                       s_eff[m].conj(), precoders.q[m, l])
    return GainTensor(gains=gains, served=assoc.served.copy(),
                      bandwidth_hz=bandwidth_hz, noise_var=noise_var,
                      n_ms_ant=n_ms_ant, p_streams=p)


# --------------------------------------------------------------------- #
# downlink rates

def _check_eta(tensor: GainTensor, eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (tensor.n_aps, tensor.n_users):
        raise RateError("eta must have shape (M, K)")
    if not np.all(np.isfinite(eta)) or np.any(eta < 0):
        raise RateError("eta must be finite and non-negative")
    return eta


def signal_matrices(tensor: GainTensor, eta: np.ndarray, k: int) -> np.ndarray:
    """A_{k,l} = sum_{m in M(l)} sqrt(eta_{m,l}) B[k,l,m], all l; (K, P, P)."""
    weights = np.sqrt(eta) * tensor.served          # (M, K)
    return np.einsum("ml,lmpq->lpq", weights, tensor.gains[k])


def downlink_rate(tensor: GainTensor, eta: np.ndarray, k: int,
                  form: str = "direct") -> float:
    """Achievable downlink rate of MS k in bits/s.

    ``form`` selects between the direct log-det expression over the
    interference covariance ("direct") and the algebraically equivalent
    difference of two log-dets ("g1g2"); both are kept as an internal
    cross-check.
    """
    eta = _check_eta(tensor, eta)
    a = signal_matrices(tensor, eta, k)
    noise = tensor.noise_matrix
    inter = noise + sum(a[l] @ a[l].conj().T
                        for l in range(tensor.n_users) if l != k)
    if form == "direct":
        sig = a[k] @ a[k].conj().T
        sign, logdet = np.linalg.slogdet(
            np.eye(tensor.p_streams) + np.linalg.solve(inter, sig))
        val = logdet / LN2
    elif form == "g1g2":
        total = inter + a[k] @ a[k].conj().T
        _, ld1 = np.linalg.slogdet(total)
        _, ld2 = np.linalg.slogdet(inter)
        val = (ld1 - ld2) / LN2
    else:
        raise RateError(f"unknown rate form {form!r}")
    return tensor.bandwidth_hz * max(val, 0.0)


def downlink_rates(tensor: GainTensor, eta: np.ndarray,
                   form: str = "direct") -> np.ndarray:
    return np.array([downlink_rate(tensor, eta, k, form=form)
                     for k in range(tensor.n_users)])


def uplink_rate(tensor: GainTensor, eta_ul: np.ndarray, k: int) -> float:
    """Achievable uplink rate of MS k in bits/s.

    The decoding set of k is its serving-AP set M(k); the noise term uses
    the scalar approximation sigma_w^2 * card(M(k)) * I (exact for P=1
    with unit-trace postcoders).
    """
    eta_ul = np.asarray(eta_ul, dtype=float)
    if eta_ul.shape != (tensor.n_users,):
        raise RateError("uplink eta must have shape (K,)")
    if not np.all(np.isfinite(eta_ul)) or np.any(eta_ul < 0):
        raise RateError("uplink eta must be finite and non-negative")
    mask = tensor.served[:, k].astype(float)        # APs decoding MS k
    card = float(mask.sum())
    if card == 0:
        return 0.0
    # T_j = sum_{m in M(k)} B[j, k, m]; signal is j=k.
    t = np.einsum("m,jmpq->jpq", mask, tensor.gains[:, k])
    cov = tensor.noise_var * card * np.eye(tensor.p_streams, dtype=complex)
    for j in range(tensor.n_users):
        if j != k:
            cov += eta_ul[j] * t[j].conj().T @ t[j]
    sig = eta_ul[k] * t[k].conj().T @ t[k]
    _, logdet = np.linalg.slogdet(
        np.eye(tensor.p_streams) + np.linalg.solve(cov, sig))
    return tensor.bandwidth_hz * max(logdet / LN2, 0.0)


def uplink_rates(tensor: GainTensor, eta_ul: np.ndarray) -> np.ndarray:
    return np.array([uplink_rate(tensor, eta_ul, k)
                     for k in range(tensor.n_users)])


# --------------------------------------------------------------------- #
# power consumption and GEE

def circuit_power(eta: np.ndarray, model: CircuitModel, p_c_w: float,
                  sigmoid_theta: float | None = None) -> np.ndarray:
    """Per-AP circuit power: constant, halved-when-idle, or sigmoid-smoothed."""
    eta = np.asarray(eta, dtype=float)
    radiated = eta.sum(axis=-1)
    if model is CircuitModel.STATIC:
        return np.full_like(radiated, p_c_w)
    if model is CircuitModel.IDLE:
        active = (radiated > 0).astype(float)
        return p_c_w * (active + 0.5 * (1.0 - active))
    if model is CircuitModel.SIGMOID:
        if sigmoid_theta is None or sigmoid_theta <= 0:
            raise RateError("sigmoid circuit model needs theta > 0")
        act = 1.0 / (1.0 + np.exp(-radiated / sigmoid_theta))
        return p_c_w * (act + 0.5 * (1.0 - act))
    raise RateError(f"unknown circuit model {model}")


def total_power_downlink(eta: np.ndarray, delta: float, model: CircuitModel,
                         p_c_w: float, sigmoid_theta: float | None = None) -> float:
    return float(delta * eta.sum()
                 + circuit_power(eta, model, p_c_w, sigmoid_theta).sum())


def gee_downlink(tensor: GainTensor, eta: np.ndarray, delta: float,
                 model: CircuitModel, p_c_w: float,
                 sigmoid_theta: float | None = None) -> float:
    """Global energy efficiency: sum-rate over total consumed power, bits/J."""
    denom = total_power_downlink(eta, delta, model, p_c_w, sigmoid_theta)
    if denom <= 0:
        raise RateError("non-positive total power in GEE")
    return downlink_rates(tensor, eta).sum() / denom


def gee_uplink(tensor: GainTensor, eta_ul: np.ndarray, delta: float,
               model: CircuitModel, p_c_ul_w: float,
               sigmoid_theta: float | None = None) -> float:
    eta_ul = np.asarray(eta_ul, dtype=float)
    denom = float(delta * eta_ul.sum()
                  + circuit_power(eta_ul[:, None], model, p_c_ul_w,
                                  sigmoid_theta).sum())
    if denom <= 0:
        raise RateError("non-positive total power in uplink GEE")
    return uplink_rates(tensor, eta_ul).sum() / denom
