"""End-to-end pipeline: scene Monte Carlo, baselines, metrics.

One trial runs detection (checkpoints, patrol path, labels), scheduling
(offline or online), optional swarm flight, and coverage-map evaluation
before and after recovery. The Monte Carlo driver derives independent
per-trial seed streams from the master seed so results are reproducible
regardless of worker count or execution order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import channel, detection, scheduling, swarm
from .channel import AerialGroup, CoverageMap, Transmitter
from .config import ScenarioConfig
from .detection import Checkpoint, CheckpointGraph
from .errors import InvalidParameterError
from .geometry import Region, sample_ppp
from .scheduling import DeploymentUnit

# fixed roles for the per-trial seed stream
_SS_BS, _SS_CHECKPOINTS, _SS_PATH, _SS_FADING = range(4)


@dataclass
class Scene:
    """Sampled terrestrial network for one trial."""

    region: Region
    bs_positions: np.ndarray      # (n, 2)
    active: np.ndarray            # (n,) bool
    bs_height: float
    p_bs: float
    seed: int

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def active_transmitters(self) -> list[Transmitter]:
        return [
            Transmitter((float(x), float(y), self.bs_height), self.p_bs, "terrestrial")
            for (x, y), on in zip(self.bs_positions, self.active)
            if on
        ]

    def child_seed(self, role: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=(role,))

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "bs_height": self.bs_height,
            "p_bs": self.p_bs,
            "bs": [
                {"x": float(x), "y": float(y), "active": bool(on)}
                for (x, y), on in zip(self.bs_positions, self.active)
            ],
        }


def build_scenario(config: ScenarioConfig, seed: int) -> Scene:
    """Sample the BS field and knock out the configured failure fraction."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_SS_BS,)))
    pts = sample_ppp(config.region, config.lambda_b, rng)
    n = len(pts)
    active = np.ones(n, dtype=bool)
    n_fail = int(round(config.bs_failure_fraction * n))
    if n_fail > 0:
        failed = rng.choice(n, size=n_fail, replace=False)
        active[failed] = False
    return Scene(
        region=config.region,
        bs_positions=pts.points,
        active=active,
        bs_height=config.bs_height,
        p_bs=config.p_bs,
        seed=seed,
    )


@dataclass
class TrialMetrics:
    """Per-trial outcome row."""

    trial: int
    n_bs: int
    n_bs_active: int
    n_checkpoints: int
    n_red: int
    path_length: float
    coverage_before: float
    coverage_after: float
    abs_count: int
    n_config1: int
    n_config2: int
    per_abs_improvement: float          # m^2 per deployed station; nan if none
    red_completion_times: list[float] = field(default_factory=list)
    config_groupings: dict = field(default_factory=lambda: {"small": [], "big": []})

    @property
    def improvement(self) -> float:
        return self.coverage_after - self.coverage_before

    CSV_COLUMNS = (
        "trial,n_bs,n_bs_active,n_checkpoints,n_red,path_length_m,"
        "coverage_before,coverage_after,improvement,abs_count,n_config1,"
        "n_config2,per_abs_improvement_m2,completion_mean_s,completion_count"
    )

    def csv_row(self) -> str:
        mean_t = float(np.mean(self.red_completion_times)) if self.red_completion_times else math.nan
        vals = [
            str(self.trial), str(self.n_bs), str(self.n_bs_active),
            str(self.n_checkpoints), str(self.n_red), repr(float(self.path_length)),
            repr(float(self.coverage_before)), repr(float(self.coverage_after)),
            repr(float(self.improvement)), str(self.abs_count),
            str(self.n_config1), str(self.n_config2),
            repr(float(self.per_abs_improvement)), repr(mean_t),
            str(len(self.red_completion_times)),
        ]
        return ",".join(vals)


@dataclass
class TrialDetail:
    """Everything a trial produced, for plotting and inspection."""

    metrics: TrialMetrics
    graph: CheckpointGraph
    units: list[DeploymentUnit]
    map_before: CoverageMap
    map_after: CoverageMap


def _serpentine_grid(region: Region, dim: int) -> CheckpointGraph:
    """dim x dim cell-center checkpoints visited row by row from the top,
    alternating direction each row."""
    dx = region.width / dim
    dy = region.height / dim
    cps, order = [], []
    cid = 1
    grid_ids = {}
    for i in range(dim):
        for j in range(dim):
            x = region.origin[0] + (j + 0.5) * dx
            y = region.origin[1] + (i + 0.5) * dy
            cps.append(Checkpoint(cid, (float(x), float(y))))
            grid_ids[(i, j)] = cid
            cid += 1
    for k, i in enumerate(range(dim - 1, -1, -1)):  # top row first
        js = range(dim) if k % 2 == 0 else range(dim - 1, -1, -1)
        order.extend(grid_ids[(i, j)] for j in js)
    graph = CheckpointGraph(cps, order)
    graph.path_length = graph.recompute_length()
    return graph


def _checkpoint_graph(
    scene: Scene, config: ScenarioConfig, start: str | int | None = None
) -> CheckpointGraph:
    if config.method == "grid":
        return _serpentine_grid(scene.region, config.grid_dim)
    if config.method == "bsl":
        cps = [
            Checkpoint(i + 1, (float(x), float(y)))
            for i, (x, y) in enumerate(scene.bs_positions)
        ]
    else:
        cps = detection.generate_checkpoints(
            scene.region, config.lambda_cp, config.exclusion_d,
            scene.child_seed(_SS_CHECKPOINTS),
        )
    if not cps:
        return CheckpointGraph([], [])
    return detection.plan_patrol_path(
        cps,
        start=config.start_policy if start is None else start,
        seed=scene.child_seed(_SS_PATH),
    )


def _label(graph: CheckpointGraph, scene: Scene, config: ScenarioConfig) -> CheckpointGraph:
    fading = (
        "mean"
        if config.fading == "mean"
        else ("sampled", config.fading_draws, scene.child_seed(_SS_FADING).entropy)
    )
    return detection.label_checkpoints(
        graph,
        scene.active_transmitters(),
        config.channel_params,
        config.gamma_th,
        config.patrol_height,
        interference=config.interference,
        fading_mode=fading,
    )


def _schedule(
    graph: CheckpointGraph, config: ScenarioConfig
) -> list[tuple[int | None, DeploymentUnit]]:
    r1, r2 = config.coverage_radii()
    if config.mode == "offline":
        units = scheduling.schedule_offline(graph, config.altitudes, r2=r2)
        return [(None, u) for u in units]
    stream = [(c.id, c.position, c.label) for c in graph.ordered()]
    return [
        (idx, unit)
        for idx, unit in scheduling.schedule_online(
            stream, config.altitudes, r1, r2, window=config.window
        )
    ]


def _coverage_map(
    scene: Scene, config: ScenarioConfig, units: Sequence[DeploymentUnit]
) -> CoverageMap:
    groups = [AerialGroup(u.positions, config.p_abs) for u in units]
    return channel.build_coverage_map(
        scene.region,
        scene.active_transmitters(),
        groups,
        config.channel_params,
        config.grid_resolution,
        config.gamma_th,
        rx_height=config.rx_height,
        fading_mode="mean" if config.fading == "mean"
        else ("sampled", config.fading_draws, scene.child_seed(_SS_FADING).entropy),
        interference=config.interference,
    )


def _completion_times(
    graph: CheckpointGraph,
    scheduled: Sequence[tuple[int | None, DeploymentUnit]],
    config: ScenarioConfig,
) -> list[float]:
    """Per red checkpoint: time until a unit whose disk reaches it arrives.

    The patrol flies the tour at the configured speed; offline units all
    dispatch from the base (region corner) when the patrol completes,
    online units dispatch the moment their window closes.
    """
    ordered = graph.ordered()
    if not ordered:
        return []
    v = config.speed
    base = graph_region_base(config)
    cum = [0.0]
    for a, b in zip(ordered, ordered[1:]):
        cum.append(cum[-1] + math.dist(a.position, b.position))
    total_time = cum[-1] / v
    r1, r2 = config.coverage_radii()

    arrivals = []
    for idx, unit in scheduled:
        if idx is None:
            dispatch = total_time
        else:
            k = min(idx, len(cum)) - 1  # virtual tail decisions fire at patrol end
            dispatch = cum[k] / v
        flight = math.dist(base, unit.anchor) / v
        radius = r1 if unit.kind == "config1" else r2
        arrivals.append((unit, radius, dispatch + flight))

    times = []
    for cp in ordered:
        if cp.label != "red":
            continue
        best = math.inf
        for unit, radius, arrival in arrivals:
            if math.dist(cp.position, unit.anchor) <= radius:
                best = min(best, arrival)
        if math.isfinite(best):
            times.append(best)
    return times


def graph_region_base(config: ScenarioConfig) -> tuple[float, float]:
    """Dispatch base: the region corner where idle stations wait."""
    return config.region.origin


def run_trial(scene: Scene, config: ScenarioConfig, trial: int = 0) -> TrialDetail:
    """Full detection -> scheduling -> recovery pipeline on one scene."""
    graph = _checkpoint_graph(scene, config)
    if graph.checkpoints:
        graph = _label(graph, scene, config)
        scheduled = _schedule(graph, config)
    else:
        scheduled = []
    units = [u for _, u in scheduled]

    map_before = _coverage_map(scene, config, [])
    map_after = _coverage_map(scene, config, units) if units else map_before

    abs_count = sum(u.abs_count for u in units)
    improvement_area = (
        (map_after.coverage_fraction - map_before.coverage_fraction) * scene.region.area
    )
    groupings = {
        "small": [list(u.covers) for u in units if u.kind == "config1"],
        "big": [list(u.covers) for u in units if u.kind == "config2"],
    }
    metrics = TrialMetrics(
        trial=trial,
        n_bs=scene.n_bs,
        n_bs_active=scene.n_active,
        n_checkpoints=len(graph.checkpoints),
        n_red=sum(1 for c in graph.checkpoints if c.label == "red"),
        path_length=graph.path_length,
        coverage_before=map_before.coverage_fraction,
        coverage_after=map_after.coverage_fraction,
        abs_count=abs_count,
        n_config1=sum(1 for u in units if u.kind == "config1"),
        n_config2=sum(1 for u in units if u.kind == "config2"),
        per_abs_improvement=improvement_area / abs_count if abs_count else math.nan,
        red_completion_times=_completion_times(graph, scheduled, config),
        config_groupings=groupings,
    )
    return TrialDetail(metrics, graph, units, map_before, map_after)


def run_baseline_bsl(scene: Scene, config: ScenarioConfig, trial: int = 0) -> TrialDetail:
    """Detection with the BS sites themselves as checkpoints."""
    from dataclasses import replace

    return run_trial(scene, replace(config, method="bsl"), trial)


def run_baseline_grid(scene: Scene, config: ScenarioConfig, trial: int = 0) -> TrialDetail:
    """Detection over a uniform grid with serpentine traversal."""
    from dataclasses import replace

    return run_trial(scene, replace(config, method="grid"), trial)


def trial_seeds(master_seed: int, trials: int) -> list[int]:
    """Stable per-trial seeds derived from the master seed."""
    ss = np.random.SeedSequence(master_seed)
    return [int(child.generate_state(1, np.uint32)[0]) for child in ss.spawn(trials)]


def _one_trial(args) -> TrialMetrics:
    config, trial, seed = args
    scene = build_scenario(config, seed)
    return run_trial(scene, config, trial).metrics


@dataclass
class MonteCarloResult:
    config: ScenarioConfig
    metrics: list[TrialMetrics]

    _SCALARS = (
        "coverage_before",
        "coverage_after",
        "improvement",
        "abs_count",
        "per_abs_improvement",
        "n_red",
        "path_length",
    )

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.metrics], dtype=float)

    def aggregate(self) -> dict:
        out = {}
        for name in self._SCALARS:
            col = self.column(name)
            valid = col[~np.isnan(col)]
            if len(valid) == 0:
                stats = {k: math.nan for k in ("median", "q1", "q3", "min", "max")}
            else:
                stats = {
                    "median": float(np.median(valid)),
                    "q1": float(np.percentile(valid, 25)),
                    "q3": float(np.percentile(valid, 75)),
                    "min": float(valid.min()),
                    "max": float(valid.max()),
                }
            out[name] = stats
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(TrialMetrics.CSV_COLUMNS + "\n")
            for m in self.metrics:
                fh.write(m.csv_row() + "\n")

    def summary_json(self, path) -> None:
        payload = {
            "trials": len(self.metrics),
            "method": self.config.method,
            "mode": self.config.mode,
            "seed": self.config.seed,
            "aggregate": self.aggregate(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def monte_carlo(config: ScenarioConfig, workers: int = 1) -> MonteCarloResult:
    """Run the configured number of independent trials.

    Trial seeds derive from the master seed alone, and rows are ordered
    by trial index, so the output is identical for any worker count.
    """
    seeds = trial_seeds(config.seed, config.trials)
    jobs = [(config, t, s) for t, s in enumerate(seeds)]
    if workers <= 1 or config.trials == 1:
        rows = [_one_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_trial, jobs))
    rows.sort(key=lambda m: m.trial)
    return MonteCarloResult(config, rows)


def visiting_order_study(
    scene: Scene, config: ScenarioConfig, start_policies: Sequence[str | int]
) -> dict[str, TrialMetrics]:
    """Re-run scheduling over one fixed scene for several patrol starts.

    The red checkpoint set is label-determined and identical across
    policies; groupings and deployment counts differ with the traversal.
    """
    from dataclasses import replace

    if config.method == "grid":
        raise InvalidParameterError("the grid baseline has a fixed serpentine order")
    out = {}
    for policy in start_policies:
        cfg = replace(config, start_policy=policy) if isinstance(policy, str) else config
        detail = run_trial(scene, cfg, trial=0)
        out[str(policy)] = detail.metrics
    return out
