"""Checkpoint generation, patrol path planning, and red/blue labeling.

The patrol UAV hovers at hard-core-thinned random checkpoints, visits
them all along a greedy nearest-neighbor path, and marks each one red
(SINR below threshold, i.e. inside a hole) or blue. The labeled, ordered
graph is the contract consumed by the schedulers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from . import channel
from .channel import ChannelParams, Transmitter
from .errors import InvalidParameterError
from .geometry import PointSet, Region, matern_thin, sample_ppp

Label = Literal["unvisited", "red", "blue"]

START_POLICIES = ("left-most", "right-most", "top-most", "bottom-most", "random")


@dataclass(frozen=True)
class Checkpoint:
    id: int
    position: tuple[float, float]
    label: Label = "unvisited"


@dataclass
class CheckpointGraph:
    """Checkpoints plus the order the patrol visits them in.

    visit_order is a permutation of the checkpoint ids; path_length is
    the total Euclidean length of the corresponding open tour.
    """

    checkpoints: list[Checkpoint]
    visit_order: list[int] = field(default_factory=list)
    path_length: float = 0.0

    def by_id(self, cid: int) -> Checkpoint:
        return self._index()[cid]

    def _index(self) -> dict[int, Checkpoint]:
        return {c.id: c for c in self.checkpoints}

    def ordered(self) -> list[Checkpoint]:
        idx = self._index()
        return [idx[cid] for cid in self.visit_order]

    def labels_in_order(self) -> list[Label]:
        return [c.label for c in self.ordered()]

    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.checkpoints], dtype=float)

    def recompute_length(self) -> float:
        pts = [self.by_id(cid).position for cid in self.visit_order]
        return float(
            sum(math.dist(a, b) for a, b in zip(pts, pts[1:]))
        )

    def to_json(self) -> dict:
        return {
            "checkpoints": [
                {"id": c.id, "x": c.position[0], "y": c.position[1], "label": c.label}
                for c in self.checkpoints
            ],
            "visit_order": list(self.visit_order),
            "path_length": self.path_length,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, data: dict) -> "CheckpointGraph":
        cps = [
            Checkpoint(int(c["id"]), (float(c["x"]), float(c["y"])), c.get("label", "unvisited"))
            for c in data["checkpoints"]
        ]
        return cls(cps, [int(i) for i in data["visit_order"]], float(data["path_length"]))


def generate_checkpoints(
    region: Region, lambda_cp: float, exclusion: float, seed=None
) -> list[Checkpoint]:
    """Poisson field thinned to a hard core with distance `exclusion`.

    The Poisson field is sampled on the region dilated by the exclusion
    distance and survivors are clipped back to the region, so points near
    the boundary see full neighborhoods and the retained intensity matches
    the stationary closed form instead of being edge-inflated.
    """
    if exclusion <= 0:
        raise InvalidParameterError(f"exclusion distance must be > 0, got {exclusion}")
    buffered = region.dilated(exclusion)
    field_pts = sample_ppp(buffered, lambda_cp, seed)
    survivors = matern_thin(field_pts, exclusion)
    inside = survivors.points[region.contains(survivors.points)]
    return [Checkpoint(i + 1, (float(x), float(y))) for i, (x, y) in enumerate(inside)]


def _start_index(points: np.ndarray, start, rng) -> int:
    if isinstance(start, (int, np.integer)):
        return int(start)
    if start == "left-most":
        return int(np.argmin(points[:, 0]))
    if start == "right-most":
        return int(np.argmax(points[:, 0]))
    if start == "top-most":
        return int(np.argmax(points[:, 1]))
    if start == "bottom-most":
        return int(np.argmin(points[:, 1]))
    if start == "random":
        return int(rng.integers(len(points)))
    raise InvalidParameterError(f"unknown start policy {start!r}")


def _two_opt(order: list[int], pts: np.ndarray, max_rounds: int = 20) -> list[int]:
    """First-improvement 2-opt on an open path."""
    n = len(order)
    improved = True
    rounds = 0
    while improved and rounds < max_rounds:
        improved = False
        rounds += 1
        for i in range(n - 2):
            for j in range(i + 2, n):
                a, b = order[i], order[i + 1]
                c = order[j]
                d_new = np.linalg.norm(pts[a] - pts[c])
                old_edge = np.linalg.norm(pts[a] - pts[b])
                if j < n - 1:
                    e = order[j + 1]
                    d_new += np.linalg.norm(pts[b] - pts[e])
                    old_edge += np.linalg.norm(pts[c] - pts[e])
                if d_new + 1e-12 < old_edge:
                    order[i + 1 : j + 1] = order[i + 1 : j + 1][::-1]
                    improved = True
    return order


def plan_patrol_path(
    checkpoints: Sequence[Checkpoint],
    start="left-most",
    two_opt: bool = False,
    seed=None,
) -> CheckpointGraph:
    """Greedy nearest-neighbor traversal visiting every checkpoint once.

    `start` is a checkpoint id or one of the named policies. Distance ties
    break toward the lowest checkpoint id so the tour is reproducible;
    `two_opt` optionally refines the greedy tour.
    """
    cps = list(checkpoints)
    if not cps:
        raise InvalidParameterError("need at least one checkpoint")
    pts = np.array([c.position for c in cps], dtype=float)
    ids = np.array([c.id for c in cps])
    rng = np.random.default_rng(seed)

    if isinstance(start, (int, np.integer)):
        matches = np.flatnonzero(ids == int(start))
        if len(matches) == 0:
            raise InvalidParameterError(f"start id {start} not among checkpoints")
        current = int(matches[0])
    else:
        current = _start_index(pts, start, rng)

    remaining = set(range(len(cps)))
    remaining.discard(current)
    order = [current]
    while remaining:
        rem = sorted(remaining, key=lambda k: ids[k])  # low id wins ties
        d = [math.dist(pts[current], pts[k]) for k in rem]
        best = int(np.argmin(d))  # argmin returns the first (lowest-id) minimum
        current = rem[best]
        remaining.discard(current)
        order.append(current)

    if two_opt and len(order) > 3:
        order = _two_opt(order, pts)

    graph = CheckpointGraph(cps, [int(ids[k]) for k in order])
    graph.path_length = graph.recompute_length()
    return graph


def label_checkpoints(
    graph: CheckpointGraph,
    bs_field: Sequence[Transmitter],
    params: ChannelParams,
    gamma_th: float,
    patrol_height: float,
    interference: Literal["full", "none"] = "none",
    fading_mode: str | tuple = "mean",
) -> CheckpointGraph:
    """Walk the patrol order and mark each checkpoint red (SINR below the
    linear threshold gamma_th) or blue.

    Serving BS at a checkpoint is the one with the largest mean received
    power. Mean-fading mode labels deterministically with the gain at its
    mean; ("sampled", count, seed) averages SINR over repeated hovers.
    """
    for cp in graph.checkpoints:
        if cp.label != "unvisited":
            raise InvalidParameterError(f"checkpoint {cp.id} already labeled {cp.label}")

    labeled: dict[int, Checkpoint] = {}
    if bs_field:
        bs_pos = np.array([t.position for t in bs_field], dtype=float)
        bs_pow = np.array([t.tx_power for t in bs_field], dtype=float)

    for seq, cp in enumerate(graph.ordered()):
        if not bs_field:
            labeled[cp.id] = replace(cp, label="red")
            continue
        rx = np.array([cp.position[0], cp.position[1], patrol_height])
        d = np.linalg.norm(bs_pos - rx, axis=1)
        mean_rx = bs_pow * params.ref_gain * params.omega * d ** (-params.alpha_b)
        serving = int(np.argmax(mean_rx))
        active = bs_field if interference == "full" else [bs_field[serving]]
        srv = serving if interference == "full" else 0
        if fading_mode == "mean":
            gains = [params.omega] * len(active)
            sinr = channel.sinr_c2a(rx, active, srv, params, gains)
        else:
            mode, count, seed = fading_mode
            if mode != "sampled":
                raise InvalidParameterError(f"unknown fading mode {fading_mode!r}")
            rng = np.random.default_rng(np.random.SeedSequence((seed, cp.id)))
            draws = [
                channel.sinr_c2a(
                    rx, active, srv, params,
                    rng.gamma(params.m, params.omega / params.m, size=len(active)),
                )
                for _ in range(count)
            ]
            sinr = float(np.mean(draws))
        labeled[cp.id] = replace(cp, label="red" if sinr < gamma_th else "blue")

    out = CheckpointGraph(
        [labeled[c.id] for c in graph.checkpoints],
        list(graph.visit_order),
        graph.path_length,
    )
    return out
