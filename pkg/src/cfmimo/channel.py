"""Geometry and clustered mmWave channel generation.

A single field of scatterer clusters is shared by every link; each AP-MS
pair only sees the clusters inside an ellipse whose foci are the two
devices, which is what correlates the channels of nearby users.  Each
active cluster contributes ``rays_per_cluster`` single-bounce rays; a
Bernoulli LOS component is added on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, PathLossParams, SystemConfig


class GeometryError(ValueError):
    """Degenerate geometric configuration (e.g. coincident AP and MS)."""


@dataclass
class ScattererField:
    cluster_positions: np.ndarray      # (n_clusters, 2) meters
    rays_per_cluster: int = 3


@dataclass
class EllipseGate:
    """Cluster c is active iff |c-a| + |c-b| <= axis_ratio * |a-b|."""

    focus_a: np.ndarray
    focus_b: np.ndarray
    axis_ratio: float


@dataclass
class ScenarioRealization:
    ap_positions: np.ndarray           # (M, 2)
    ms_positions: np.ndarray           # (K, 2)
    ap_orientations: np.ndarray        # (M,) radians, broadside reference
    ms_orientations: np.ndarray        # (K,)
    field: ScattererField
    channels: np.ndarray               # (M, K, N_AP, N_MS) complex
    outage: np.ndarray                 # (M, K) bool: no clusters and no LOS
    seed: int = 0


def path_loss_db(r, params: PathLossParams, shadow_db, wavelength_m: float):
    """Path gain in dB: -20log10(4pi/lambda) - 10 n log10(r) - X_sigma."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("distance must be positive")
    return (-20.0 * np.log10(4.0 * np.pi / wavelength_m)
            - 10.0 * params.exponent_n * np.log10(r)
            - np.asarray(shadow_db, dtype=float))


def los_probability(d):
    """UMi LOS probability: min(20/d,1)(1-e^{-d/39}) + e^{-d/39}."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    decay = np.exp(-d / 39.0)
    return np.minimum(20.0 / d, 1.0) * (1.0 - decay) + decay


def array_response(angle, n_elements: int) -> np.ndarray:
    """Half-wavelength ULA steering vector, unnormalized unit-modulus entries.

    ``angle`` may be scalar or an array; output shape is (n_elements,) or
    (n_elements, len(angle)).
    """
    if n_elements < 1:
        raise ValueError("need at least one array element")
    base = np.exp(1j * np.pi * np.sin(np.atleast_1d(angle)))
    resp = np.empty((n_elements, base.size), dtype=complex)
    resp[0] = 1.0
    # exp(j pi i sin) = base**i; one exp per angle, then cheap multiplies.
    for i in range(1, n_elements):
        resp[i] = resp[i - 1] * base
    return resp[:, 0] if np.isscalar(angle) or np.ndim(angle) == 0 else resp


def select_active_clusters(ap: np.ndarray, ms: np.ndarray,
                           fld: ScattererField, axis_ratio: float) -> np.ndarray:
    """Ascending indices of the clusters inside the AP-MS ellipse."""
    ap = np.asarray(ap, dtype=float)
    ms = np.asarray(ms, dtype=float)
    d = float(np.hypot(*(ap - ms)))
    if d == 0.0:
        raise GeometryError("coincident AP and MS give a degenerate ellipse")
    c = fld.cluster_positions
    total = (np.hypot(c[:, 0] - ap[0], c[:, 1] - ap[1])
             + np.hypot(c[:, 0] - ms[0], c[:, 1] - ms[1]))
    return np.nonzero(total <= axis_ratio * d)[0]


def generate_channel(ap: np.ndarray, ms: np.ndarray,
                     ap_orientation: float, ms_orientation: float,
                     fld: ScattererField, config: SystemConfig,
                     rng: np.random.Generator,
                     los_indicator: bool | None = None):
    """Draw one H matrix (N_AP x N_MS) for an AP-MS link.

    Returns ``(H, outage)``; a link with no active clusters and no LOS
    yields the all-zero matrix with ``outage=True`` so Monte Carlo drops
    never abort.  ``los_indicator`` overrides the Bernoulli LOS draw (used
    by tests); the draw is consumed from ``rng`` either way when it is None.
    """
    ap = np.asarray(ap, dtype=float)
    ms = np.asarray(ms, dtype=float)
    n_ap, n_ms = config.n_ap_ant, config.n_ms_ant
    d = float(np.hypot(*(ap - ms)))
    if d == 0.0:
        raise GeometryError("coincident AP and MS")

    if los_indicator is None:
        los = bool(rng.random() < los_probability(d)) and config.los_enabled
    else:
        los = bool(los_indicator)
    params = config.pathloss_params(los)

    c = fld.cluster_positions
    dist_ap = np.hypot(c[:, 0] - ap[0], c[:, 1] - ap[1])
    dist_ms = np.hypot(c[:, 0] - ms[0], c[:, 1] - ms[1])
    detour = dist_ap + dist_ms
    active = np.nonzero(detour <= config.ellipse_ratio * d)[0]
    n_cl = active.size
    if n_cl == 0 and not los:
        return np.zeros((n_ap, n_ms), dtype=complex), True

    wavelength = config.wavelength_m
    h = np.zeros((n_ap, n_ms), dtype=complex)
    if n_cl > 0:
        n_ray = fld.rays_per_cluster
        centers = c[active]                                         # (n_cl, 2)
        theta_ap = np.arctan2(centers[:, 1] - ap[1],
                              centers[:, 0] - ap[0]) - ap_orientation
        theta_ms = np.arctan2(centers[:, 1] - ms[1],
                              centers[:, 0] - ms[0]) - ms_orientation
        lengths = detour[active]
        spread = math.radians(config.ray_angle_spread_deg)
        off_ap = rng.normal(0.0, spread, size=(n_cl, n_ray))
        off_ms = rng.normal(0.0, spread, size=(n_cl, n_ray))
        ray_theta_ap = (theta_ap[:, None] + off_ap).ravel()
        ray_theta_ms = (theta_ms[:, None] + off_ms).ravel()
        ray_len = np.repeat(lengths, n_ray)
        if config.shadowing and params.shadow_sigma_db > 0:
            shadow = rng.normal(0.0, params.shadow_sigma_db, size=ray_len.size)
        else:
            shadow = np.zeros(ray_len.size)
        loss_db = path_loss_db(ray_len, params, shadow, wavelength)
        alpha = (rng.standard_normal(ray_len.size)
                 + 1j * rng.standard_normal(ray_len.size)) / math.sqrt(2.0)
        gamma = math.sqrt(n_ap * n_ms / (n_cl * n_ray))
        coef = gamma * alpha * 10.0 ** (loss_db / 20.0)
        a_ap = array_response(ray_theta_ap, n_ap)                   # (N_AP, R)
        a_ms_h = array_response(-ray_theta_ms, n_ms)   # conj(a_ms) row-wise
        h += (a_ap * coef) @ a_ms_h.T

    if los:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        if config.shadowing and params.shadow_sigma_db > 0:
            shadow_los = rng.normal(0.0, params.shadow_sigma_db)
        else:
            shadow_los = 0.0
        loss_db = float(path_loss_db(d, params, shadow_los, wavelength))
        theta_ap = math.atan2(ms[1] - ap[1], ms[0] - ap[0]) - ap_orientation
        theta_ms = math.atan2(ap[1] - ms[1], ap[0] - ms[0]) - ms_orientation
        a_ap = array_response(theta_ap, n_ap)
        a_ms = array_response(theta_ms, n_ms)
        h += (math.sqrt(n_ap * n_ms) * np.exp(1j * phase)
              * math.sqrt(10.0 ** (loss_db / 10.0))) * np.outer(a_ap, a_ms.conj())

    return h, False


def _link_rng(seed: int, k: int, m: int) -> np.random.Generator:
    # Deterministic, independent stream per (seed, k, m) pair.
    return np.random.default_rng(np.random.SeedSequence([seed, 1, k, m]))


def generate_scenario(config: SystemConfig, seed: int) -> ScenarioRealization:
    """Drop AP/MS/cluster positions and fill every H_{k,m}.

    All positions are i.i.d. uniform over the square area; the cluster
    count is round(density * area).  The same scatterer field feeds every
    link, and each (k, m) channel is drawn from its own seeded stream so
    links can be generated concurrently without changing the result.
    """
    if config.area_m <= 0:
        raise ConfigError("zero-area scenario")
    if config.cluster_density_per_m2 <= 0:
        raise ConfigError("zero cluster density")
    n_clusters = int(round(config.cluster_density_per_m2 * config.area_m ** 2))
    if n_clusters == 0:
        raise ConfigError("empty scatterer field")

    geo_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    side = config.area_m
    m_aps, k_ms = config.n_aps, config.n_ms
    ap_pos = geo_rng.uniform(0.0, side, size=(m_aps, 2))
    ms_pos = geo_rng.uniform(0.0, side, size=(k_ms, 2))
    ap_orient = geo_rng.uniform(0.0, 2.0 * np.pi, size=m_aps)
    ms_orient = geo_rng.uniform(0.0, 2.0 * np.pi, size=k_ms)
    clusters = geo_rng.uniform(0.0, side, size=(n_clusters, 2))
    fld = ScattererField(cluster_positions=clusters,
                         rays_per_cluster=config.rays_per_cluster)

    channels = np.zeros((m_aps, k_ms, config.n_ap_ant, config.n_ms_ant),
                        dtype=complex)
    outage = np.zeros((m_aps, k_ms), dtype=bool)
    for m in range(m_aps):
        for k in range(k_ms):
            rng = _link_rng(seed, k, m)
            channels[m, k], outage[m, k] = generate_channel(
                ap_pos[m], ms_pos[k], ap_orient[m], ms_orient[k],
                fld, config, rng)
    return ScenarioRealization(ap_positions=ap_pos, ms_positions=ms_pos,
                               ap_orientations=ap_orient,
                               ms_orientations=ms_orient,
                               field=fld, channels=channels,
                               outage=outage, seed=seed)
