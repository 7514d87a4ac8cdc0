"""Scenario configuration: schema, validation, presets, JSON I/O.

A scenario bundles everything one experiment needs: region geometry,
terrestrial-station density and failure fraction, channel constants,
checkpoint process, deployment altitudes, controller gains, grid
resolution and trial bookkeeping. Values live in config files in dB/dBm
where that is conventional and are converted once, here.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal

from . import channel
from .channel import ChannelParams
from .errors import ConfigError
from .geometry import Region
from .swarm import ControlParams

Method = Literal["proposed", "bsl", "grid"]
Mode = Literal["offline", "online"]


@dataclass(frozen=True)
class ScenarioConfig:
    # region and terrestrial network
    region_width: float = 500.0
    region_height: float = 500.0
    lambda_b: float = 1.0e-4            # BSs per m^2 (100 per km^2)
    bs_failure_fraction: float = 0.0    # sparse keeps 30% operational -> 0.7
    bs_height: float = 30.0
    tx_power_bs_dbm: float = 43.0
    tx_power_abs_dbm: float = 37.0

    # channel
    m: float = 3.0
    omega: float = 1.0
    alpha_b: float = 2.2
    alpha_al: float = 2.0
    alpha_an: float = 2.5
    env_a: float = math.pi / 18.0
    env_b: float = 0.11
    noise_power: float = 1.0e-8         # watts; calibration knob, see README
    ref_gain_db: float = -38.5          # path gain at 1 m
    gamma_th_db: float = 11.3

    # detection
    lambda_cp: float = 5.0e-5           # checkpoints per m^2 (50 per km^2)
    exclusion_d: float = 100.0
    patrol_height: float = 25.0
    rx_height: float = 25.0
    start_policy: str = "left-most"
    interference: Literal["full", "none"] = "none"
    fading: str = "mean"                # "mean" or "sampled"
    fading_draws: int = 100

    # deployment altitudes (desk-scale defaults; paper scale uses 150/300/150)
    single_altitude: float = 40.0
    swarm_h_a: float = 120.0
    swarm_h_b: float = 40.0
    altitude_min: float = 35.0
    altitude_max: float = 300.0

    # scheduling
    method: Method = "proposed"
    mode: Mode = "online"
    window: int = 3
    grid_dim: int = 7
    speed: float = 20.0                 # m/s patrol and dispatch speed
    beta: float = 0.7124

    # evaluation
    grid_resolution: float = 10.0
    trials: int = 100
    seed: int = 1
    fly: bool = False

    # controller (swarm flight)
    control_b: float = 0.5
    control_c: float = 1.0
    control_eps: float = 10.0
    control_k1: float = 0.01
    control_k2: float = 0.02
    collision_radius: float = 10.0
    comm_radius: float = 30.0
    v_max: float = 20.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            ("region_width", self.region_width > 0, "must be > 0"),
            ("region_height", self.region_height > 0, "must be > 0"),
            ("lambda_b", 0 < self.lambda_b <= 1e-3, "must be in (0, 1e-3] per m^2"),
            ("bs_failure_fraction", 0 <= self.bs_failure_fraction < 1, "must be in [0, 1)"),
            ("bs_height", self.bs_height > 0, "must be > 0"),
            ("tx_power_bs_dbm", 0 < self.tx_power_bs_dbm <= 60, "must be in (0, 60] dBm"),
            ("tx_power_abs_dbm", 0 < self.tx_power_abs_dbm <= 60, "must be in (0, 60] dBm"),
            ("m", self.m >= 0.5, "fading shape must be >= 0.5"),
            ("omega", self.omega > 0, "must be > 0"),
            ("alpha_b", 2 < self.alpha_b <= 6, "must be in (2, 6]"),
            ("alpha_al", 1.5 <= self.alpha_al <= 4, "must be in [1.5, 4]"),
            ("alpha_an", self.alpha_an >= self.alpha_al, "must be >= alpha_al"),
            ("noise_power", self.noise_power > 0, "must be > 0"),
            ("gamma_th_db", 0 < self.gamma_th_db < 50, "must be in (0, 50) dB"),
            ("lambda_cp", 0 <= self.lambda_cp <= 1e-3, "must be in [0, 1e-3] per m^2"),
            ("exclusion_d", self.exclusion_d > 0, "must be > 0"),
            ("patrol_height", 0 < self.patrol_height <= 300, "must be in (0, 300] m"),
            ("rx_height", 0 < self.rx_height <= 300, "must be in (0, 300] m"),
            (
                "altitudes",
                self.altitude_min <= self.single_altitude <= self.altitude_max,
                f"single altitude must lie in [{self.altitude_min}, {self.altitude_max}]",
            ),
            (
                "altitudes",
                self.altitude_min <= self.swarm_h_b < self.swarm_h_a <= self.altitude_max,
                "need altitude_min <= h_b < h_a <= altitude_max",
            ),
            ("altitude_min", self.altitude_min >= self.bs_height, "aerial floor must clear BS height"),
            ("start_policy", self.start_policy in ("left-most", "right-most", "top-most", "bottom-most", "random"), "unknown policy"),
            ("interference", self.interference in ("full", "none"), "must be full|none"),
            ("fading", self.fading in ("mean", "sampled"), "must be mean|sampled"),
            ("fading_draws", self.fading_draws >= 1, "must be >= 1"),
            ("method", self.method in ("proposed", "bsl", "grid"), "must be proposed|bsl|grid"),
            ("mode", self.mode in ("offline", "online"), "must be offline|online"),
            ("window", self.window >= 3, "must be >= 3"),
            ("grid_dim", self.grid_dim >= 1, "must be >= 1"),
            ("speed", self.speed > 0, "must be > 0"),
            ("beta", self.beta > 0, "must be > 0"),
            ("grid_resolution", self.grid_resolution > 0, "must be > 0"),
            ("trials", self.trials >= 1, "must be >= 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name, None)!r})")

    # ----- derived views -----

    @property
    def region(self) -> Region:
        return Region(self.region_width, self.region_height)

    @property
    def gamma_th(self) -> float:
        return channel.db_to_linear(self.gamma_th_db)

    @property
    def p_bs(self) -> float:
        return channel.dbm_to_watts(self.tx_power_bs_dbm)

    @property
    def p_abs(self) -> float:
        return channel.dbm_to_watts(self.tx_power_abs_dbm)

    @property
    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            m=self.m,
            omega=self.omega,
            alpha_b=self.alpha_b,
            alpha_al=self.alpha_al,
            alpha_an=self.alpha_an,
            env_a=self.env_a,
            env_b=self.env_b,
            noise_power=self.noise_power,
            ref_gain=channel.db_to_linear(self.ref_gain_db),
        )

    @property
    def control_params(self) -> ControlParams:
        return ControlParams(
            b=self.control_b,
            c=self.control_c,
            eps=self.control_eps,
            k1=self.control_k1,
            k2=self.control_k2,
            r_c=self.collision_radius,
            r_d=self.comm_radius,
            v_max=self.v_max,
        )

    @property
    def altitudes(self) -> tuple[float, float, float]:
        return (self.single_altitude, self.swarm_h_a, self.swarm_h_b)

    def coverage_radii(self) -> tuple[float, float]:
        """(single-station radius, swarm radius) for this link budget."""
        p = self.channel_params
        r1 = channel.coverage_radius_single(
            self.p_abs, self.gamma_th, p.noise_power, p.alpha_al,
            self.single_altitude, p.ref_gain,
        )
        r1_base = channel.coverage_radius_single(
            self.p_abs, self.gamma_th, p.noise_power, p.alpha_al,
            self.swarm_h_b, p.ref_gain,
        )
        r2 = channel.coverage_radius_swarm(r1_base, self.swarm_h_a, self.swarm_h_b)
        return r1, r2

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


_FIELDS = {f for f in ScenarioConfig.__dataclass_fields__}


def config_from_dict(data: dict) -> ScenarioConfig:
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(data)


def regular_preset(**overrides) -> ScenarioConfig:
    """Healthy terrestrial deployment: every sampled BS operational."""
    return replace(ScenarioConfig(), bs_failure_fraction=0.0, **overrides)


def sparse_preset(**overrides) -> ScenarioConfig:
    """Disaster scenario: only 30% of terrestrial BSs stay operational."""
    return replace(ScenarioConfig(), bs_failure_fraction=0.7, **overrides)
