"""Hole classification and aerial-station scheduling.

Two schedulers share the deployment vocabulary: the offline pass reads
the whole labeled patrol graph and recovers holes first-discovered-first
(isolated red checkpoint -> one station, run of consecutive reds -> a
four-station tetrahedral swarm per stretch); the online pass decides
from a sliding window of three consecutive labels while the patrol is
still flying. Fleet-size bounds and the discovery/completion delay
estimators live here too.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .detection import CheckpointGraph, Label
from .errors import InvalidParameterError
from .geometry import Region, covering_bounds

Action = Literal["config1", "config2", "none"]

# Window label triplets -> action. The decision belongs to the first two
# checkpoints of the window; the third only disambiguates hole size.
_CONFIG1_WINDOWS = {("red", "blue", "red"), ("red", "blue", "blue"), ("blue", "red", "blue")}
_CONFIG2_WINDOWS = {("red", "red", "red"), ("red", "red", "blue"), ("blue", "red", "red")}


def tetrahedron_offsets(h_a: float, h_b: float) -> np.ndarray:
    """Regular-tetrahedron member offsets relative to the unit centroid.

    Apex at altitude h_a above a base equilateral triangle at h_b; the
    tetrahedron altitude h_a - h_b fixes the edge e = (h_a - h_b)*sqrt(3/2)
    and base circumradius (sqrt(2)/2)(h_a - h_b).
    """
    if h_a <= h_b:
        raise InvalidParameterError(f"apex altitude must exceed base altitude ({h_a} <= {h_b})")
    dh = h_a - h_b
    base_r = math.sqrt(2.0) / 2.0 * dh
    z_centroid = (h_a + 3.0 * h_b) / 4.0
    offsets = [(0.0, 0.0, h_a - z_centroid)]
    for theta_deg in (90.0, 210.0, 330.0):
        t = math.radians(theta_deg)
        offsets.append((base_r * math.cos(t), base_r * math.sin(t), h_b - z_centroid))
    return np.array(offsets)


@dataclass(frozen=True)
class DeploymentUnit:
    """One scheduled recovery unit: a single station or a 4-station swarm.

    `anchor` is the ground point under the (centroid of the) unit;
    `covers` lists the checkpoint ids the decision was issued for;
    `decision_index` is the 1-based patrol index at dispatch (None for
    offline units, which all dispatch when the patrol completes).
    """

    kind: Literal["config1", "config2"]
    anchor: tuple[float, float]
    positions: np.ndarray  # (1, 3) or (4, 3)
    h_a: float | None = None
    h_b: float | None = None
    covers: tuple[int, ...] = ()
    decision_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float).reshape(-1, 3))

    @property
    def abs_count(self) -> int:
        return len(self.positions)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "anchor": list(self.anchor),
            "positions": self.positions.tolist(),
            "h_a": self.h_a,
            "h_b": self.h_b,
            "covers": list(self.covers),
            "decision_index": self.decision_index,
        }


def make_config1(anchor, altitude: float, covers=(), decision_index=None) -> DeploymentUnit:
    ax, ay = float(anchor[0]), float(anchor[1])
    return DeploymentUnit(
        "config1", (ax, ay), np.array([[ax, ay, altitude]]),
        covers=tuple(covers), decision_index=decision_index,
    )


def make_config2(anchor, h_a: float, h_b: float, covers=(), decision_index=None) -> DeploymentUnit:
    ax, ay = float(anchor[0]), float(anchor[1])
    offsets = tetrahedron_offsets(h_a, h_b)
    centroid = np.array([ax, ay, (h_a + 3.0 * h_b) / 4.0])
    return DeploymentUnit(
        "config2", (ax, ay), centroid[None, :] + offsets, h_a=h_a, h_b=h_b,
        covers=tuple(covers), decision_index=decision_index,
    )


def deployment_to_json(units: Sequence[DeploymentUnit]) -> dict:
    return {"units": [u.to_json() for u in units], "abs_count": sum(u.abs_count for u in units)}


def save_deployment(units: Sequence[DeploymentUnit], path) -> None:
    with open(path, "w") as fh:
        json.dump(deployment_to_json(units), fh, indent=2)
        fh.write("\n")


def classify_hole_offline(graph: CheckpointGraph) -> dict[int, str]:
    """Tag every red checkpoint small or big from its path neighbors.

    A red checkpoint with all path-adjacent checkpoints blue marks a small
    hole; a red checkpoint touching another red along the path marks a big
    one.
    """
    ordered = graph.ordered()
    if any(c.label == "unvisited" for c in ordered):
        raise InvalidParameterError("graph must be fully labeled before classification")
    tags: dict[int, str] = {}
    n = len(ordered)
    for k, cp in enumerate(ordered):
        if cp.label != "red":
            continue
        neighbors = []
        if k > 0:
            neighbors.append(ordered[k - 1].label)
        if k < n - 1:
            neighbors.append(ordered[k + 1].label)
        tags[cp.id] = "small" if all(lb == "blue" for lb in neighbors) else "big"
    return tags


def _red_runs(graph: CheckpointGraph) -> list[list[int]]:
    """Maximal stretches of consecutive red checkpoints, in patrol order."""
    runs: list[list[int]] = []
    current: list[int] = []
    for cp in graph.ordered():
        if cp.label == "red":
            current.append(cp.id)
        elif current:
            runs.append(current)
            current = []
    if current:
        runs.append(current)
    return runs


def schedule_offline(
    graph: CheckpointGraph,
    altitudes: tuple[float, float, float],
    r2: float = math.inf,
) -> list[DeploymentUnit]:
    """First-discovery-first-recovery over the completed patrol graph.

    Isolated reds get a single station directly above them; each maximal
    run of consecutive reds gets a swarm centered above its first member,
    plus another swarm each time the walk along the run moves 2*r2 past
    the last one, so stretches longer than a swarm's footprint still end
    up plausibly covered.
    """
    single_h, h_a, h_b = altitudes
    units: list[DeploymentUnit] = []
    for run in _red_runs(graph):
        if len(run) == 1:
            cp = graph.by_id(run[0])
            units.append(make_config1(cp.position, single_h, covers=(cp.id,)))
            continue
        anchor_cp = graph.by_id(run[0])
        walked = 0.0
        prev = anchor_cp.position
        covered = [anchor_cp.id]
        pending: list[int] = []
        for cid in run[1:]:
            cp = graph.by_id(cid)
            walked += math.dist(prev, cp.position)
            prev = cp.position
            if walked >= 2.0 * r2:
                units.append(make_config2(anchor_cp.position, h_a, h_b, covers=tuple(covered)))
                anchor_cp = cp
                walked = 0.0
                covered = [cp.id]
            else:
                covered.append(cid)
        units.append(make_config2(anchor_cp.position, h_a, h_b, covers=tuple(covered)))
    return units


@dataclass(frozen=True)
class ScheduleDecision:
    """Outcome of one three-label window."""

    window: tuple[Label, Label, Label]
    action: Action
    target_slots: tuple[int, ...]  # indices (0/1) of the red members among the first two

    @property
    def deploys(self) -> bool:
        return self.action != "none"


def window_policy(l1: Label, l2: Label, l3: Label) -> ScheduleDecision:
    """Sliding-window decision table over three consecutive labels.

    {RBR, RBB, BRB} deploy a single station, {RRR, RRB, BRR} deploy a
    swarm, {BBR, BBB} wait: the first two labels fully determine the
    decision, placed above the red member(s) among them.
    """
    window = (l1, l2, l3)
    for lb in window:
        if lb not in ("red", "blue"):
            raise InvalidParameterError(f"window labels must be red/blue, got {lb!r}")
    if window in _CONFIG1_WINDOWS:
        action: Action = "config1"
    elif window in _CONFIG2_WINDOWS:
        action = "config2"
    else:
        action = "none"
    slots = tuple(i for i in (0, 1) if window[i] == "red") if action != "none" else ()
    return ScheduleDecision(window, action, slots)


def schedule_online(
    stream: Sequence[tuple[int, tuple[float, float], Label]],
    altitudes: tuple[float, float, float],
    r1: float,
    r2: float,
    window: int = 3,
    virtual_tail: bool = True,
) -> list[tuple[int, DeploymentUnit]]:
    """Consume the label stream in patrol order and dispatch immediately.

    `stream` holds (checkpoint id, position, label) in visit order. At
    every index i >= window the policy is applied to the last `window`
    labels (the decision table reads the first three of the window);
    deployment anchors at the midpoint of the red members among the
    window's first two checkpoints. A decision is suppressed when all its
    target checkpoints already sit inside an issued unit's coverage disk
    (radius r1 or r2 by kind). With `virtual_tail`, one trailing blue
    sentinel closes the final window so reds at the very end of the
    patrol are not stranded.
    """
    if window < 3:
        raise InvalidParameterError(f"window length must be >= 3, got {window}")
    single_h, h_a, h_b = altitudes
    items = list(stream)
    if len(items) < window:
        return []
    if virtual_tail:
        items.append((-1, items[-1][1], "blue"))

    issued: list[tuple[int, DeploymentUnit]] = []

    def covered(pos) -> bool:
        for _, unit in issued:
            radius = r1 if unit.kind == "config1" else r2
            if math.dist(pos, unit.anchor) <= radius:
                return True
        return False

    for i in range(window, len(items) + 1):
        head = items[i - window : i - window + 3]
        decision = window_policy(head[0][2], head[1][2], head[2][2])
        if not decision.deploys:
            continue
        targets = [head[s] for s in decision.target_slots]
        if all(covered(t[1]) for t in targets):
            continue
        pts = np.array([t[1] for t in targets], dtype=float)
        anchor = pts.mean(axis=0)
        ids = tuple(t[0] for t in targets)
        if decision.action == "config1":
            unit = make_config1(anchor, single_h, covers=ids, decision_index=i)
        else:
            unit = make_config2(anchor, h_a, h_b, covers=ids, decision_index=i)
        issued.append((i, unit))
    return issued


def abs_count_bounds(region: Region, r1: float, r2: float) -> tuple[float, float]:
    """Fleet-size sandwich for seamless coverage of the region.

    Singles cover with radius r1 at one station per disk; swarms cover
    with radius r2 at four stations per disk. The station count for any
    mixed fleet then lies between min(lower(r1), 4 lower(r2)) and
    max(upper(r1), 4 upper(r2)).
    """
    b1 = covering_bounds(region, r1)
    b2 = covering_bounds(region, r2)
    return (
        min(b1.lower, 4.0 * b2.lower),
        max(b1.upper, 4.0 * b2.upper),
    )


@dataclass(frozen=True)
class DelayParams:
    """Constants for the tour-length and completion-time estimates."""

    beta: float = 0.7124   # planar shortest-tour constant estimate
    speed_v: float = 20.0  # m/s, patrol and dispatch speed
    side_a: float = 1000.0
    lambda_cp: float = 5.0e-5

    def __post_init__(self):
        for name in ("beta", "speed_v", "side_a"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be > 0")
        if self.lambda_cp < 0:
            raise InvalidParameterError("lambda_cp must be >= 0")


def expected_discovery_time(p: DelayParams) -> float:
    """Time to traverse the whole patrol: beta a^2 sqrt(lambda) / v."""
    return p.beta * p.side_a**2 * math.sqrt(p.lambda_cp) / p.speed_v


def expected_completion(
    p: DelayParams, mean_r: float, mode: Literal["offline", "online"]
) -> float:
    """Expected red-checkpoint completion time.

    Offline recovery starts after the full patrol (T + E[R]/v); online
    dispatch starts at discovery, and with discovery times uniform over
    the patrol the expectation halves the patrol term (T/2 + E[R]/v).
    """
    t_cp = expected_discovery_time(p)
    if mode == "offline":
        return t_cp + mean_r / p.speed_v
    if mode == "online":
        return t_cp / 2.0 + mean_r / p.speed_v
    raise InvalidParameterError(f"unknown mode {mode!r}")
