"""Scenario, hardware and optimizer configuration.

All scenario constants live in :class:`SystemConfig`; defaults follow the
73 GHz UMi Open Square setup (250x250 m area, 0.4 clusters/sqm, M=80 APs
with 16-element ULAs, K=6 MSs with 8-element ULAs, 200 MHz bandwidth).
Configs load from YAML files; CLI flags override file values.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised when a configuration fails validation."""


class Mode(str, enum.Enum):
    CF = "cf"
    UC = "uc"


class Beamforming(str, enum.Enum):
    FD = "fd"
    HY = "hy"


class CsiModel(str, enum.Enum):
    PERFECT = "perfect"
    ESTIMATED = "estimated"


class CircuitModel(str, enum.Enum):
    STATIC = "static"
    IDLE = "idle"
    SIGMOID = "sigmoid"


class Objective(str, enum.Enum):
    GEE = "gee"
    SUMRATE = "sumrate"
    UNIFORM = "uniform"


class PathLossScenario(str, enum.Enum):
    UMI_STREET_LOS = "umi_street_los"
    UMI_STREET_NLOS = "umi_street_nlos"
    UMI_OPEN_LOS = "umi_open_los"
    UMI_OPEN_NLOS = "umi_open_nlos"


# (path loss exponent n, shadowing std sigma in dB) per UMi scenario row.
PATHLOSS_TABLE: dict[PathLossScenario, tuple[float, float]] = {
    PathLossScenario.UMI_STREET_LOS: (1.98, 3.1),
    PathLossScenario.UMI_STREET_NLOS: (3.19, 8.2),
    PathLossScenario.UMI_OPEN_LOS: (2.89, 7.1),
    PathLossScenario.UMI_OPEN_NLOS: (1.73, 3.02),
}


@dataclass(frozen=True)
class PathLossParams:
    """One row of the UMi path-loss table."""

    exponent_n: float
    shadow_sigma_db: float
    scenario_tag: PathLossScenario

    def __post_init__(self):
        if self.exponent_n <= 0:
            raise ConfigError("path loss exponent must be positive")
        if self.shadow_sigma_db < 0:
            raise ConfigError("shadowing std must be non-negative")

    @classmethod
    def from_scenario(cls, tag: PathLossScenario) -> "PathLossParams":
        n, sigma = PATHLOSS_TABLE[tag]
        return cls(exponent_n=n, shadow_sigma_db=sigma, scenario_tag=tag)


@dataclass
class OptimizerConfig:
    """Tolerances and iteration caps for the power-control solvers."""

    outer_tol: float = 1e-4          # relative GEE change across block sweeps
    dinkelbach_tol: float = 1e-6     # relative F = N - lambda*D stop level
    inner_max_iter: int = 500        # projected-gradient iterations per subproblem
    inner_tol: float = 1e-8          # relative objective change in inner solver
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    max_sweeps: int = 50
    grad_floor_scale: float = 1e-12  # eta floor = scale * P_max for sqrt gradients

    def validate(self) -> None:
        for name in ("outer_tol", "dinkelbach_tol", "inner_tol",
                     "armijo_c1", "grad_floor_scale"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"optimizer.{name} must be > 0")
        if not 0 < self.armijo_shrink < 1:
            raise ConfigError("optimizer.armijo_shrink must be in (0,1)")
        if self.inner_max_iter < 1 or self.max_sweeps < 1:
            raise ConfigError("optimizer iteration caps must be >= 1")


# Named drop-count presets: quick CI-scale runs vs. full-scale averaging.
DROP_PRESETS = {"ci": 100, "paper": 1000}


@dataclass
class SystemConfig:
    # geometry
    area_m: float = 250.0
    n_aps: int = 80                  # M
    n_ms: int = 6                    # K
    n_ap_ant: int = 16               # antennas per AP
    n_ms_ant: int = 8                # antennas per MS
    p_streams: int = 1               # multiplexing order P
    mode: Mode = Mode.UC
    uc_n: int = 1                    # MSs served per AP in UC mode
    # beamforming
    beamforming: Beamforming = Beamforming.FD
    n_rf: int = 4                    # RF chains for hybrid beamforming
    # CSI
    csi: CsiModel = CsiModel.PERFECT
    tau_p: int = 64                  # training length (samples)
    tau_c: int = 10_000              # coherence time (samples); only tau_p < tau_c enforced
    pilot_power_w: float = 0.1
    orthogonal_pilots: bool = False
    # radio
    f0_hz: float = 73e9
    bandwidth_hz: float = 200e6
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 6.0
    # powers
    p_max_w: float = 0.1             # per-AP downlink budget
    p_t_max_w: float = 0.1           # per-MS uplink budget
    delta: float = 1.0               # inverse amplifier efficiency
    circuit_model: CircuitModel = CircuitModel.IDLE
    p_c_w: float = 1.0               # per-AP circuit power
    p_c_ul_w: float = 0.3            # per-MS circuit power (uplink GEE)
    sigmoid_theta: Optional[float] = None   # default 1e-3 * p_max_w
    # channel model
    pathloss_scenario: str = "umi_open"     # "umi_open" or "umi_street"
    cluster_density_per_m2: float = 0.4
    rays_per_cluster: int = 3
    ray_angle_spread_deg: float = 2.0
    ellipse_ratio: float = 1.5
    shadowing: bool = True
    los_enabled: bool = True
    # execution
    drops: int = 100
    seed: int = 0
    workers: int = 1
    objective: Objective = Objective.GEE
    sumrate_method: str = "auto"     # auto | general | zf
    optimize_uplink: bool = False
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    # ------------------------------------------------------------------ #

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.f0_hz

    @property
    def noise_var_w(self) -> float:
        """Receiver noise power: PSD + noise figure over the signal bandwidth."""
        dbm = self.noise_psd_dbm_hz + self.noise_figure_db \
            + 10.0 * math.log10(self.bandwidth_hz)
        return 10.0 ** (dbm / 10.0) * 1e-3

    @property
    def sigmoid_theta_w(self) -> float:
        return self.sigmoid_theta if self.sigmoid_theta is not None \
            else 1e-3 * self.p_max_w

    def pathloss_params(self, los: bool) -> PathLossParams:
        key = {
            ("umi_open", True): PathLossScenario.UMI_OPEN_LOS,
            ("umi_open", False): PathLossScenario.UMI_OPEN_NLOS,
            ("umi_street", True): PathLossScenario.UMI_STREET_LOS,
            ("umi_street", False): PathLossScenario.UMI_STREET_NLOS,
        }[(self.pathloss_scenario, los)]
        return PathLossParams.from_scenario(key)

    def validate(self) -> None:
        if self.n_aps < 1 or self.n_ms < 1:
            raise ConfigError("need at least one AP and one MS")
        if self.area_m <= 0:
            raise ConfigError("area must be positive")
        if self.cluster_density_per_m2 <= 0:
            raise ConfigError("cluster density must be positive")
        if self.n_ms_ant % self.p_streams != 0:
            raise ConfigError("multiplexing order P must divide N_MS")
        if self.mode is Mode.UC and not 1 <= self.uc_n <= self.n_ms:
            raise ConfigError("UC association size N must satisfy 1 <= N <= K")
        if self.csi is CsiModel.ESTIMATED:
            if self.tau_p < self.p_streams:
                raise ConfigError("tau_p must be >= P")
            if self.tau_p >= self.tau_c:
                raise ConfigError("training length must fit the coherence time")
        if self.beamforming is Beamforming.HY and self.n_rf < 1:
            raise ConfigError("hybrid beamforming needs n_rf >= 1")
        for name in ("p_max_w", "p_t_max_w", "pilot_power_w", "p_c_w", "p_c_ul_w"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.delta < 0:
            raise ConfigError("delta must be non-negative")
        if self.drops < 1:
            raise ConfigError("drops must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.ellipse_ratio <= 1.0:
            raise ConfigError("ellipse axis ratio must exceed 1")
        if self.pathloss_scenario not in ("umi_open", "umi_street"):
            raise ConfigError("pathloss_scenario must be umi_open or umi_street")
        if self.sumrate_method not in ("auto", "general", "zf"):
            raise ConfigError("sumrate_method must be auto, general or zf")
        self.optimizer.validate()

    # ----------------------------- serialization ---------------------- #

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        for key, val in d.items():
            if isinstance(val, enum.Enum):
                d[key] = val.value
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemConfig":
        data = dict(data)
        if "drops" in data and isinstance(data["drops"], str):
            try:
                data["drops"] = DROP_PRESETS[data["drops"]]
            except KeyError as exc:
                raise ConfigError(
                    f"unknown drops preset {data['drops']!r}; "
                    f"use one of {sorted(DROP_PRESETS)}") from exc
        enums = {"mode": Mode, "beamforming": Beamforming, "csi": CsiModel,
                 "circuit_model": CircuitModel, "objective": Objective}
        for key, enum_cls in enums.items():
            if key in data and not isinstance(data[key], enum_cls):
                try:
                    data[key] = enum_cls(str(data[key]).lower())
                except ValueError as exc:
                    raise ConfigError(f"invalid {key}: {data[key]!r}") from exc
        if "optimizer" in data and isinstance(data["optimizer"], dict):
            known = {f.name for f in dataclasses.fields(OptimizerConfig)}
            bad = set(data["optimizer"]) - known
            if bad:
                raise ConfigError(f"unknown optimizer keys: {sorted(bad)}")
            data["optimizer"] = OptimizerConfig(**data["optimizer"])
        fields = {f.name: f for f in dataclasses.fields(cls)}
        bad = set(data) - set(fields)
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        # YAML 1.1 reads exponents without a sign ("73.0e9") as strings;
        # coerce by declared field type so such values still load.
        for key, val in data.items():
            target = fields[key].type
            try:
                if target == "float" and not isinstance(val, float):
                    data[key] = float(val)
                elif target == "int" and not isinstance(val, int):
                    data[key] = int(val)
                elif target == "bool" and not isinstance(val, bool):
                    raise ConfigError(f"{key} must be a boolean")
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for {key}: {val!r}") from exc
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path: str) -> "SystemConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)
