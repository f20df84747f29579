"""Uplink training: pilot books, received training signal, LMMSE estimation.

The estimator targets the effective channels S_{k,m} = H_{k,m} L_k seen
through the 0-1 combiners.  The Kronecker structure of the vectorized
model collapses the LMMSE inverse to a tau_p x tau_p system, so the
estimate for AP m is simply ``sqrt(p_k) * Y_m @ C^-1 @ Phi_k^H`` with
``C = sum_l p_l Phi_l^H Phi_l + sigma^2 I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard


class TrainingError(ValueError):
    pass


@dataclass
class PilotBook:
    pilots: np.ndarray       # (K, P, tau_p) complex, rows of each Phi_k orthonormal
    powers: np.ndarray       # (K,) watts

    @property
    def tau_p(self) -> int:
        return self.pilots.shape[2]


def generate_pilots(n_users: int, p_streams: int, tau_p: int,
                    rng: np.random.Generator, power_w: float = 0.1,
                    orthogonal: bool = False) -> PilotBook:
    """Random binary pilots with exactly orthonormal rows per MS.

    With ``orthogonal=True`` all MSs get mutually orthogonal Hadamard rows
    (requires tau_p a power of two and K*P <= tau_p); otherwise each MS
    draws +-1 sequences independently and only its own rows are
    orthonormalized (QR when P > 1, plain scaling when P = 1).
    """
    if tau_p < p_streams:
        raise TrainingError("tau_p must be >= P to fit orthonormal pilot rows")
    if orthogonal:
        if n_users * p_streams > tau_p:
            raise TrainingError("orthogonal pilots need K*P <= tau_p")
        if tau_p & (tau_p - 1):
            raise TrainingError("orthogonal pilots need tau_p a power of two")
        base = hadamard(tau_p).astype(float) / np.sqrt(tau_p)
        pilots = np.stack([base[k * p_streams:(k + 1) * p_streams]
                           for k in range(n_users)]).astype(complex)
    else:
        pilots = np.empty((n_users, p_streams, tau_p), dtype=complex)
        for k in range(n_users):
            raw = rng.choice([-1.0, 1.0], size=(p_streams, tau_p))
            if p_streams == 1:
                pilots[k] = raw / np.sqrt(tau_p)
            else:
                # Re-orthonormalize the +-1 rows; sign-fix the diagonal so
                # the result stays close to the binary draw.
                q, r = np.linalg.qr(raw.T)
                q = q * np.sign(np.diag(r))
                pilots[k] = q.T
    powers = np.full(n_users, float(power_w))
    return PilotBook(pilots=pilots, powers=powers)


def training_signal(s_eff: np.ndarray, book: PilotBook, noise_var: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Y_m = sum_k sqrt(p_k) S_{k,m} Phi_k + W_m for one AP.

    ``s_eff`` holds the effective channels at this AP, shape (K, N_AP, P).
    """
    n_users, n_ap, _ = s_eff.shape
    tau_p = book.tau_p
    y = np.zeros((n_ap, tau_p), dtype=complex)
    for k in range(n_users):
        y += np.sqrt(book.powers[k]) * s_eff[k] @ book.pilots[k]
    if noise_var > 0:
        y += np.sqrt(noise_var / 2.0) * (rng.standard_normal((n_ap, tau_p))
                                         + 1j * rng.standard_normal((n_ap, tau_p)))
    return y


def _gram(book: PilotBook, noise_var: float) -> np.ndarray:
    tau_p = book.tau_p
    c = noise_var * np.eye(tau_p, dtype=complex)
    for k in range(book.pilots.shape[0]):
        c += book.powers[k] * book.pilots[k].conj().T @ book.pilots[k]
    return c


def lmmse_estimate(y: np.ndarray, book: PilotBook,
                   noise_var: float) -> np.ndarray:
    """LMMSE estimates of all S_{k,m} at one AP; output shape (K, N_AP, P).

    Identity prior on vec(S) is assumed; the tau_p x tau_p reduced system
    keeps the cost independent of N_AP.
    """
    c = _gram(book, noise_var)
    if noise_var == 0.0:
        eig = np.linalg.eigvalsh(c)
        if eig[0] <= 1e-12 * max(eig[-1], 1.0):
            raise TrainingError("noiseless rank-deficient training")
    c_inv_phi = np.linalg.solve(c, np.conj(np.transpose(book.pilots, (0, 2, 1))))
    n_users = book.pilots.shape[0]
    return np.stack([np.sqrt(book.powers[k]) * y @ c_inv_phi[k]
                     for k in range(n_users)])
