"""Propagation, fading, SINR, coverage radii and gridded coverage maps.

Units are watts and meters throughout; dB/dBm appear only in the
conversion helpers, which config code uses at its boundary. The fading
power gain of a terrestrial link is Gamma distributed (shape m, mean
omega); the aerial links in the recovery stage are deterministic
line-of-sight. Path loss is d^-alpha scaled by an explicit reference
gain at 1 m so link budgets are dimensionally meaningful.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import InfeasibleAltitudeError, InvalidGeometryError, InvalidParameterError
from .geometry import Region

TxKind = Literal["terrestrial", "aerial"]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class ChannelParams:
    """Propagation constants for one scenario.

    m, omega        fading shape and mean power gain of terrestrial links
    alpha_b         terrestrial path-loss exponent (> 2)
    alpha_al        aerial line-of-sight exponent
    alpha_an        aerial non-line-of-sight exponent (mixed mode only)
    env_a, env_b    LoS-probability sigmoid constants
    noise_power     receiver noise, watts
    ref_gain        path gain at 1 m, linear
    """

    m: float = 3.0
    omega: float = 1.0
    alpha_b: float = 2.2
    alpha_al: float = 2.0
    alpha_an: float = 2.5
    env_a: float = math.pi / 18.0
    env_b: float = 0.11
    noise_power: float = 1.0e-8
    ref_gain: float = 1.413e-4

    def __post_init__(self):
        if self.m < 0.5:
            raise InvalidParameterError(f"fading shape must be >= 0.5, got {self.m}")
        if self.omega <= 0:
            raise InvalidParameterError(f"mean fading power must be > 0, got {self.omega}")
        if self.alpha_b <= 2:
            raise InvalidParameterError(f"terrestrial exponent must be > 2, got {self.alpha_b}")
        if self.noise_power <= 0:
            raise InvalidParameterError(f"noise power must be > 0, got {self.noise_power}")
        if self.ref_gain <= 0:
            raise InvalidParameterError(f"reference gain must be > 0, got {self.ref_gain}")


@dataclass(frozen=True)
class Transmitter:
    """A base station: fixed 3D position, transmit power, terrestrial or aerial."""

    position: tuple[float, float, float]
    tx_power: float
    kind: TxKind = "terrestrial"

    def __post_init__(self):
        if self.tx_power <= 0:
            raise InvalidParameterError(f"tx power must be > 0, got {self.tx_power}")


@dataclass(frozen=True)
class AerialGroup:
    """One deployment unit for map building: 1 (single) or 4 (swarm)
    co-transmitting aerial stations whose received powers add."""

    positions: np.ndarray  # (K, 3)
    tx_power: float

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float).reshape(-1, 3))
        if self.tx_power <= 0:
            raise InvalidParameterError(f"tx power must be > 0, got {self.tx_power}")


def nakagami_pdf(x, m: float, omega: float):
    """Amplitude density 2 m^m x^(2m-1) exp(-m x^2 / omega) / (Gamma(m) omega^m)."""
    if m < 0.5:
        raise InvalidParameterError(f"shape must be >= 0.5, got {m}")
    if omega <= 0:
        raise InvalidParameterError(f"mean power must be > 0, got {omega}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise InvalidParameterError("amplitude must be >= 0")
    with np.errstate(divide="ignore"):
        logpdf = (
            math.log(2.0)
            + m * math.log(m)
            + (2.0 * m - 1.0) * np.log(x, out=np.full_like(x, -np.inf), where=x > 0)
            - m * x * x / omega
            - gammaln(m)
            - m * math.log(omega)
        )
    out = np.exp(logpdf)
    out = np.where(x == 0, 0.0, out)  # x^(2m-1) -> 0 for m > 0.5
    return float(out) if out.ndim == 0 else out


def sample_power_gain(m: float, omega: float, seed=None, size=None):
    """Fading power gain draw(s): Gamma(m, omega/m), mean omega, var omega^2/m."""
    if m < 0.5:
        raise InvalidParameterError(f"shape must be >= 0.5, got {m}")
    if omega <= 0:
        raise InvalidParameterError(f"mean power must be > 0, got {omega}")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    return rng.gamma(m, omega / m, size=size)


def _distances(rx_pos: np.ndarray, tx_positions: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(np.asarray(tx_positions, dtype=float) - np.asarray(rx_pos, dtype=float), axis=-1)
    return d


def sinr_c2a(
    rx_pos,
    bs_list: Sequence[Transmitter],
    serving_index: int,
    params: ChannelParams,
    fading: Sequence[float],
) -> float:
    """Downlink SINR at an airborne receiver served by one terrestrial BS.

    Numerator: P_i g_i d_i^-alpha_b; denominator: same terms over every
    other BS in the list plus noise. `fading` carries one power gain per
    transmitter; the reference gain multiplies every link.
    """
    if not 0 <= serving_index < len(bs_list):
        raise InvalidParameterError(f"serving index {serving_index} out of range")
    if len(fading) != len(bs_list):
        raise InvalidParameterError("need one fading gain per transmitter")
    positions = np.array([t.position for t in bs_list], dtype=float)
    powers = np.array([t.tx_power for t in bs_list], dtype=float)
    gains = np.asarray(fading, dtype=float) * params.ref_gain
    d = _distances(np.asarray(rx_pos, dtype=float), positions)
    if np.any(d <= 0):
        raise InvalidGeometryError("receiver coincides with a transmitter")
    rx = powers * gains * d ** (-params.alpha_b)
    interference = rx.sum() - rx[serving_index]
    return float(rx[serving_index] / (interference + params.noise_power))


def sinr_a2g(ue_pos, unit: AerialGroup, params: ChannelParams) -> float:
    """SINR at a ground user served by an aerial unit.

    Joint transmission: the K members' deterministic LoS channel power
    gains add, and interference is zero because the user sits inside a
    coverage hole no terrestrial BS reaches.
    """
    k = len(unit.positions)
    if k not in (1, 4):
        raise InvalidParameterError(f"aerial unit must have 1 or 4 members, got {k}")
    d = _distances(np.asarray(ue_pos, dtype=float), unit.positions)
    if np.any(d <= 0):
        raise InvalidGeometryError("aerial station coincides with the user")
    gains = params.ref_gain * d ** (-params.alpha_al)
    return float(unit.tx_power * gains.sum() / params.noise_power)


def los_probability(elevation_deg: float, env_a: float, env_b: float) -> float:
    """Line-of-sight probability vs elevation angle: 1/(1 + a exp(-b (theta - a)))."""
    if not 0.0 <= elevation_deg <= 90.0:
        raise InvalidParameterError(f"elevation must be in [0, 90], got {elevation_deg}")
    return 1.0 / (1.0 + env_a * math.exp(-env_b * (elevation_deg - env_a)))


def coverage_radius_single(
    tx_power: float,
    gamma_th: float,
    noise: float,
    alpha: float,
    altitude: float,
    ref_gain: float = 1.0,
) -> float:
    """Ground radius where a lone aerial station at `altitude` still meets
    the SINR threshold: sqrt((ref P / (gamma n))^(2/alpha) - h^2).

    With ref_gain = noise = 1 this is the dimensionless textbook form.
    """
    q = (ref_gain * tx_power / (gamma_th * noise)) ** (2.0 / alpha)
    bracket = q - altitude * altitude
    if bracket <= 0:
        raise InfeasibleAltitudeError(
            f"altitude {altitude} m exceeds the feasible maximum {math.sqrt(q):.3f} m "
            "for this link budget",
            max_feasible_altitude=math.sqrt(q),
        )
    return math.sqrt(bracket)


def coverage_radius_swarm(r1: float, h_a: float, h_b: float) -> float:
    """Effective radius of a four-station swarm with apex at h_a and base
    triangle at h_b: the single-station radius widened by the base
    circumradius (sqrt(2)/2)(h_a - h_b)."""
    if h_a <= h_b:
        raise InvalidParameterError(f"apex altitude must exceed base altitude ({h_a} <= {h_b})")
    return r1 + (math.sqrt(2.0) / 2.0) * (h_a - h_b)


@dataclass
class CoverageMap:
    """SINR sampled on a regular grid over a region (linear values)."""

    sinr: np.ndarray  # (ny, nx), row-major, row 0 at origin-side edge
    resolution: float
    threshold: float
    origin: tuple[float, float]

    def __post_init__(self):
        self.sinr = np.asarray(self.sinr, dtype=float)

    @property
    def coverage_fraction(self) -> float:
        if self.sinr.size == 0:
            return 0.0
        return float(np.mean(self.sinr >= self.threshold))

    def percentiles(self, qs=(5, 25, 50, 75, 95)) -> dict[str, float]:
        flat = self.sinr.ravel()
        return {f"p{q}": float(np.percentile(flat, q)) for q in qs}

    def summary(self) -> dict:
        return {
            "coverage_fraction": self.coverage_fraction,
            "threshold_linear": self.threshold,
            "resolution_m": self.resolution,
            "origin": list(self.origin),
            "shape": list(self.sinr.shape),
            "percentiles": self.percentiles(),
        }

    def to_csv(self, path) -> None:
        """Dense grid, one row per grid row, with a metadata header line."""
        header = (
            f"# origin_x={self.origin[0]} origin_y={self.origin[1]} "
            f"resolution={self.resolution} threshold={self.threshold} "
            f"ny={self.sinr.shape[0]} nx={self.sinr.shape[1]}"
        )
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            for row in self.sinr:
                writer.writerow([repr(float(v)) for v in row])

    def summary_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "CoverageMap":
        with open(path) as fh:
            header = fh.readline().strip().lstrip("# ")
            meta = dict(kv.split("=") for kv in header.split())
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        return cls(
            sinr=np.asarray(rows),
            resolution=float(meta["resolution"]),
            threshold=float(meta["threshold"]),
            origin=(float(meta["origin_x"]), float(meta["origin_y"])),
        )


def grid_cell_centers(region: Region, resolution: float) -> tuple[np.ndarray, int, int]:
    """Cell-center coordinates for a map grid: (ny*nx, 2) plus shape."""
    if resolution <= 0:
        raise InvalidParameterError(f"resolution must be > 0, got {resolution}")
    nx = int(math.ceil(region.width / resolution))
    ny = int(math.ceil(region.height / resolution))
    xs = region.origin[0] + (np.arange(nx) + 0.5) * resolution
    ys = region.origin[1] + (np.arange(ny) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()]), ny, nx


def build_coverage_map(
    region: Region,
    bs_list: Sequence[Transmitter],
    aerial_units: Sequence[AerialGroup],
    params: ChannelParams,
    resolution: float,
    threshold: float,
    rx_height: float = 25.0,
    fading_mode: str | tuple = "mean",
    interference: Literal["full", "none"] = "full",
) -> CoverageMap:
    """Grid the region and evaluate SINR cell by cell.

    Each cell is served by whichever transmitter (terrestrial BS, or
    aerial unit with its members' powers pooled) delivers the largest
    mean received power. Terrestrial service uses the interfered SINR
    (or pure SNR when `interference` is "none"); aerial service is the
    interference-free joint-transmission SINR.

    fading_mode "mean" replaces the fading gain with its mean; the tuple
    ("sampled", count, seed) averages SINR over `count` independent draws
    with a per-cell seed derived from `seed`, so results do not depend on
    evaluation order.
    """
    centers, ny, nx = grid_cell_centers(region, resolution)
    ncell = len(centers)
    if len(bs_list) == 0 and len(aerial_units) == 0:
        return CoverageMap(np.zeros((ny, nx)), resolution, threshold, region.origin)

    rx = np.column_stack([centers, np.full(ncell, rx_height)])

    # mean received power per candidate server
    mean_power = []   # columns: terrestrial BSs then aerial units
    bs_rx_power = None
    if bs_list:
        bs_pos = np.array([t.position for t in bs_list], dtype=float)
        bs_pow = np.array([t.tx_power for t in bs_list], dtype=float)
        d_bs = np.linalg.norm(rx[:, None, :] - bs_pos[None, :, :], axis=2)
        if np.any(d_bs <= 0):
            raise InvalidGeometryError("grid cell coincides with a transmitter")
        bs_rx_power = bs_pow[None, :] * params.ref_gain * d_bs ** (-params.alpha_b)
        mean_power.append(bs_rx_power * params.omega)
    unit_rx_power = None
    if aerial_units:
        cols = []
        for unit in aerial_units:
            d_u = np.linalg.norm(rx[:, None, :] - unit.positions[None, :, :], axis=2)
            if np.any(d_u <= 0):
                raise InvalidGeometryError("grid cell coincides with an aerial station")
            cols.append(unit.tx_power * params.ref_gain * (d_u ** (-params.alpha_al)).sum(axis=1))
        unit_rx_power = np.column_stack(cols)
        mean_power.append(unit_rx_power)

    mean_power = np.hstack(mean_power)
    serving = np.argmax(mean_power, axis=1)
    n_bs = len(bs_list)

    sinr = np.zeros(ncell)
    bs_served = serving < n_bs
    if bs_rx_power is not None and bs_served.any():
        idx = np.flatnonzero(bs_served)
        srv = serving[idx]
        if fading_mode == "mean":
            signal = bs_rx_power[idx, srv] * params.omega
            if interference == "full":
                total = (bs_rx_power[idx] * params.omega).sum(axis=1)
                interf = total - signal
            else:
                interf = 0.0
            sinr[idx] = signal / (interf + params.noise_power)
        else:
            mode, count, seed = fading_mode
            if mode != "sampled":
                raise InvalidParameterError(f"unknown fading mode {fading_mode!r}")
            ss = np.random.SeedSequence(seed)
            # one child stream per cell keeps the map independent of
            # evaluation order and safe to parallelize
            children = ss.spawn(ncell)
            for cell, srv_i in zip(idx, serving[idx]):
                rng = np.random.default_rng(children[cell])
                g = rng.gamma(params.m, params.omega / params.m, size=(count, n_bs))
                per_draw_rx = bs_rx_power[cell][None, :] * g
                signal = per_draw_rx[:, srv_i]
                if interference == "full":
                    interf = per_draw_rx.sum(axis=1) - signal
                else:
                    interf = 0.0
                sinr[cell] = float(np.mean(signal / (interf + params.noise_power)))
    if unit_rx_power is not None and (~bs_served).any():
        idx = np.flatnonzero(~bs_served)
        sinr[idx] = unit_rx_power[idx, serving[idx] - n_bs] / params.noise_power

    return CoverageMap(sinr.reshape(ny, nx), resolution, threshold, region.origin)
