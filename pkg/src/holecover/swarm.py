"""Aerial-station dynamics and collision-free motion control.

Double-integrator agents with nonlinear drag fly to assigned
destinations under a potential-field controller: velocity damping, a
saturated proportional pull toward the destination, pairwise repulsion
that blows up at the collision radius, and (for swarm members) diffusive
coupling on formation disagreement over a weighted digraph. A discrete
energy functional evaluated along the trajectory certifies convergence
and collision avoidance at runtime.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CollisionDomainError,
    CollisionFaultError,
    InvalidParameterError,
    InvalidTopologyError,
)

# weighted interconnection of one 4-member swarm; the 0.01 keeps the
# formation term in the same order as the other control terms
DEFAULT_ADJACENCY = 0.01 * np.array(
    [
        [0, 1, 0, 1],
        [0, 0, 1, 0],
        [1, 1, 0, 0],
        [1, 1, 1, 0],
    ],
    dtype=float,
)


def _strongly_connected(adj: np.ndarray) -> bool:
    n = len(adj)
    reach = (adj > 0).astype(bool) | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | (reach @ reach)
    return bool(reach.all())


@dataclass(frozen=True)
class ControlParams:
    """Controller and platform constants shared by all agents."""

    b: float = 0.5          # velocity feedback gain
    c: float = 1.0          # adaptive (saturated proportional) gain
    eps: float = 10.0       # per-axis saturation width, m
    k1: float = 0.01        # linear drag, kg/s
    k2: float = 0.02        # quadratic drag, kg/m
    r_c: float = 10.0       # collision radius, m
    r_d: float = 30.0       # interaction radius, m
    v_max: float = 20.0     # speed cap, m/s
    adjacency: np.ndarray = field(default_factory=lambda: DEFAULT_ADJACENCY.copy())

    def __post_init__(self):
        if self.b < 0:
            raise InvalidParameterError("feedback gain must be >= 0")
        if self.c <= 0 or self.eps <= 0:
            raise InvalidParameterError("adaptive gain and saturation width must be > 0")
        if self.r_c > self.r_d:
            raise InvalidParameterError(f"collision radius {self.r_c} exceeds interaction radius {self.r_d}")
        adj = np.asarray(self.adjacency, dtype=float)
        if adj.shape != (4, 4) or np.any(np.diag(adj) != 0) or np.any(adj < 0):
            raise InvalidParameterError("adjacency must be 4x4, nonnegative, zero diagonal")
        if not _strongly_connected(adj):
            raise InvalidTopologyError("swarm adjacency graph must be strongly connected")
        object.__setattr__(self, "adjacency", adj)


@dataclass
class AgentState:
    """One agent: position, velocity, destination, formation offset.

    `group` partitions agents into units; singleton groups are single
    stations (zero formation offset), 4-member groups are swarms in the
    canonical adjacency order.
    """

    x: np.ndarray
    v: np.ndarray
    x_dest: np.ndarray
    x_star: np.ndarray | None = None
    mass: float = 1.0
    group: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.x_dest = np.asarray(self.x_dest, dtype=float).reshape(3)
        self.x_star = (
            np.zeros(3) if self.x_star is None else np.asarray(self.x_star, dtype=float).reshape(3)
        )
        if self.mass <= 0:
            raise InvalidParameterError("mass must be > 0")


@dataclass
class SwarmState:
    """Array-of-struct view of every airborne agent, ready to integrate."""

    x: np.ndarray       # (n, 3)
    v: np.ndarray       # (n, 3)
    x_dest: np.ndarray  # (n, 3)
    x_star: np.ndarray  # (n, 3)
    mass: np.ndarray    # (n,)
    group: np.ndarray   # (n,) int

    @classmethod
    def from_agents(cls, agents: Sequence[AgentState]) -> "SwarmState":
        return cls(
            x=np.array([a.x for a in agents]),
            v=np.array([a.v for a in agents]),
            x_dest=np.array([a.x_dest for a in agents]),
            x_star=np.array([a.x_star for a in agents]),
            mass=np.array([a.mass for a in agents]),
            group=np.array([a.group for a in agents], dtype=int),
        )

    @property
    def n(self) -> int:
        return len(self.x)

    def copy(self) -> "SwarmState":
        return SwarmState(
            self.x.copy(), self.v.copy(), self.x_dest.copy(),
            self.x_star.copy(), self.mass.copy(), self.group.copy(),
        )

    def position_errors(self) -> np.ndarray:
        return self.x - self.x_dest

    def velocity_errors(self) -> np.ndarray:
        return self.v

    def min_pairwise_distance(self) -> float:
        if self.n < 2:
            return math.inf
        d2 = _sq_distances(self.x)
        np.fill_diagonal(d2, np.inf)
        return float(math.sqrt(d2.min()))


def _sq_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def drag_accel(v, k1: float, k2: float, mass: float):
    """Aerodynamic deceleration -(k1 + k2 |v|) v / m; zero at rest."""
    if mass <= 0:
        raise InvalidParameterError("mass must be > 0")
    v = np.asarray(v, dtype=float)
    speed = np.linalg.norm(v, axis=-1, keepdims=v.ndim > 1)
    return -(k1 + k2 * speed) * v / mass


def potential(xi, xk, r_c: float, r_d: float) -> float:
    """Pairwise repulsion ((r_d^2 - s)/(s - r_c^2))^2 on the squared
    distance s, zero beyond r_d, divergent at the collision radius."""
    s = float(np.sum((np.asarray(xi, float) - np.asarray(xk, float)) ** 2))
    if s <= r_c * r_c:
        raise CollisionDomainError(
            f"separation {math.sqrt(s):.3f} m is inside the collision radius {r_c} m"
        )
    if s >= r_d * r_d:
        return 0.0
    return ((r_d * r_d - s) / (s - r_c * r_c)) ** 2


def potential_gradient(xi, xk, r_c: float, r_d: float) -> np.ndarray:
    """dV/dx_i of the pairwise repulsion; points toward the neighbor
    inside the interaction band (the controller applies its negative)."""
    xi = np.asarray(xi, dtype=float)
    xk = np.asarray(xk, dtype=float)
    s = float(np.sum((xi - xk) ** 2))
    if s <= r_c * r_c:
        raise CollisionDomainError(
            f"separation {math.sqrt(s):.3f} m is inside the collision radius {r_c} m"
        )
    if s >= r_d * r_d:
        return np.zeros_like(xi)
    coef = 4.0 * (r_d**2 - r_c**2) * (r_d**2 - s) / (s - r_c**2) ** 3
    return coef * (xk - xi)


def adaptive_term(x_tilde, c: float, eps: float):
    """Saturated proportional term: c*x per axis, clipped at +-c*eps."""
    x = np.asarray(x_tilde, dtype=float)
    return c * np.clip(x, -eps, eps)


def _formation_weights(group: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """Block weight matrix over all agents: each 4-member group carries the
    canonical adjacency in member order; singletons contribute nothing."""
    n = len(group)
    w = np.zeros((n, n))
    for g in np.unique(group):
        members = np.flatnonzero(group == g)
        if len(members) == 1:
            continue
        if len(members) != 4:
            raise InvalidParameterError(
                f"groups must have 1 or 4 members, group {g} has {len(members)}"
            )
        w[np.ix_(members, members)] = adjacency
    return w


def _pairwise_gradients(x: np.ndarray, r_c: float, r_d: float) -> np.ndarray:
    """Sum over neighbors of the repulsion gradient for every agent."""
    n = len(x)
    if n < 2:
        return np.zeros_like(x)
    d2 = _sq_distances(x)
    np.fill_diagonal(d2, np.inf)
    if np.any(d2 <= r_c * r_c):
        i, k = np.unravel_index(int(np.argmin(d2)), d2.shape)
        raise CollisionDomainError(
            f"agents {i} and {k} separated by {math.sqrt(d2[i, k]):.3f} m, "
            f"inside the collision radius {r_c} m"
        )
    band = d2 < r_d * r_d
    coef = np.zeros_like(d2)
    coef[band] = 4.0 * (r_d**2 - r_c**2) * (r_d**2 - d2[band]) / (d2[band] - r_c**2) ** 3
    diff = x[None, :, :] - x[:, None, :]  # x_k - x_i
    return np.einsum("ik,ikl->il", coef, diff)


def control_all(state: SwarmState, p: ControlParams) -> np.ndarray:
    """Controls for every agent against the same pre-step snapshot.

    u_i = -(formation coupling + b v_i + sum_k dV/dx_i + saturated pull),
    with the formation term active only inside 4-member groups. The
    destination pull uses the stabilizing sign (toward the destination).
    """
    w = _formation_weights(state.group, p.adjacency)
    y = state.x - state.x_star
    deg = w.sum(axis=1, keepdims=True)
    formation = deg * y - w @ y
    grad = _pairwise_gradients(state.x, p.r_c, p.r_d)
    adapt = adaptive_term(state.x - state.x_dest, p.c, p.eps)
    return -(formation + p.b * state.v + grad + adapt)


def control_config1(agent: AgentState, all_agents: Sequence[AgentState], p: ControlParams) -> np.ndarray:
    """Control of one single-station agent among the full agent set."""
    agents = list(all_agents)
    idx = next(i for i, a in enumerate(agents) if a is agent)
    state = SwarmState.from_agents(agents)
    members = np.flatnonzero(state.group == agent.group)
    if len(members) != 1:
        raise InvalidParameterError("agent is not in a singleton group")
    return control_all(state, p)[idx]


def control_config2(agent: AgentState, swarm: Sequence[AgentState], p: ControlParams) -> np.ndarray:
    """Control of one swarm member; `swarm` lists its 4-member group first
    in adjacency order, optionally followed by outside agents."""
    agents = list(swarm)
    idx = next(i for i, a in enumerate(agents) if a is agent)
    state = SwarmState.from_agents(agents)
    members = np.flatnonzero(state.group == agent.group)
    if len(members) != 4:
        raise InvalidParameterError("agent is not in a 4-member group")
    return control_all(state, p)[idx]


def drag_accel_mass(v: np.ndarray, k1: float, k2: float, mass: np.ndarray) -> np.ndarray:
    speed = np.linalg.norm(v, axis=-1, keepdims=True)
    return -(k1 + k2 * speed) * v / mass[:, None]


def clamp_speed(v: np.ndarray, v_max: float) -> np.ndarray:
    speed = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        scale = np.where(speed > v_max, v_max / np.where(speed > 0, speed, 1.0), 1.0)
    return v * scale


def step(
    state: SwarmState,
    p: ControlParams,
    dt: float,
    impulses: np.ndarray | None = None,
) -> SwarmState:
    """One fixed-step 4th-order update of the full fleet.

    Controls are recomputed at every stage from that stage's state; the
    speed cap applies after the update as a platform limit. An optional
    per-agent velocity impulse (n, 3) lands before the step. Ending a
    step at or inside the collision radius is a fault.
    """
    if dt <= 0:
        raise InvalidParameterError("dt must be > 0")
    x0 = state.x
    v0 = clamp_speed(state.v + impulses, p.v_max) if impulses is not None else state.v

    def f(x, v):
        snap = SwarmState(x, v, state.x_dest, state.x_star, state.mass, state.group)
        return v, drag_accel_mass(v, p.k1, p.k2, state.mass) + control_all(snap, p)

    k1x, k1v = f(x0, v0)
    k2x, k2v = f(x0 + 0.5 * dt * k1x, v0 + 0.5 * dt * k1v)
    k3x, k3v = f(x0 + 0.5 * dt * k2x, v0 + 0.5 * dt * k2v)
    k4x, k4v = f(x0 + dt * k3x, v0 + dt * k3v)

    x1 = x0 + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v1 = clamp_speed(v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v), p.v_max)

    out = SwarmState(x1, v1, state.x_dest, state.x_star, state.mass, state.group)
    if out.n >= 2 and out.min_pairwise_distance() <= p.r_c:
        raise CollisionFaultError(
            f"minimum separation {out.min_pairwise_distance():.3f} m fell to the "
            f"collision radius {p.r_c} m"
        )
    return out


def lyapunov_value(state: SwarmState, p: ControlParams) -> float:
    """Discrete energy of the fleet: formation disagreement + kinetic +
    pairwise repulsion + saturated destination-error potential.

    Nonnegative, zero exactly at the formation-consistent rest point, and
    non-increasing along disturbance-free trajectories of the controller
    (the coefficients are matched to the control law so the cross terms
    cancel; only the symmetrized adjacency enters the disagreement term).
    """
    w = _formation_weights(state.group, p.adjacency)
    w_sym = 0.5 * (w + w.T)
    xt = state.x - state.x_dest
    vt = state.v

    diff = xt[:, None, :] - xt[None, :, :]
    v1 = 0.25 * float(np.einsum("ij,ijk,ijk->", w_sym, diff, diff))

    v2 = 0.5 * float(np.einsum("ik,ik->", vt, vt))

    v3 = 0.0
    if state.n >= 2:
        d2 = _sq_distances(state.x)
        np.fill_diagonal(d2, np.inf)
        if np.any(d2 <= p.r_c * p.r_c):
            raise CollisionDomainError("a pair sits inside the collision radius")
        band = d2 < p.r_d * p.r_d
        vals = np.zeros_like(d2)
        vals[band] = ((p.r_d**2 - d2[band]) / (d2[band] - p.r_c**2)) ** 2
        v3 = 0.5 * float(vals.sum())

    a = np.abs(xt)
    g = np.where(a > p.eps, p.c * (p.eps * a - 0.5 * p.eps**2), 0.5 * p.c * a * a)
    v4 = float(g.sum())

    return v1 + v2 + v3 + v4


@dataclass
class TrajectoryLog:
    """Per-step diagnostics plus strided state snapshots of one run."""

    dt: float
    times: np.ndarray            # (n_steps + 1,)
    lyapunov: np.ndarray         # (n_steps + 1,)
    min_distance: np.ndarray     # (n_steps + 1,)
    snapshot_times: np.ndarray   # (n_snaps,)
    x: np.ndarray                # (n_snaps, n, 3)
    v: np.ndarray                # (n_snaps, n, 3)
    x_dest: np.ndarray           # (n, 3)
    group: np.ndarray            # (n,)
    events: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def position_error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.x - self.x_dest[None, :, :], axis=2)

    def velocity_error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=2)

    def to_csv(self, path) -> None:
        """Snapshot rows with a one-line JSON parameter header."""
        n = self.x.shape[1]
        header = {
            "dt": self.dt,
            "snapshot_stride": int(round(self.snapshot_times[1] / self.dt)) if len(self.snapshot_times) > 1 else 1,
            "n_agents": int(n),
            "groups": self.group.tolist(),
            "destinations": self.x_dest.tolist(),
            "events": self.events,
            **self.params,
        }
        cols = ["t"]
        for i in range(n):
            cols += [f"a{i}_x", f"a{i}_y", f"a{i}_z", f"a{i}_vx", f"a{i}_vy", f"a{i}_vz"]
        cols += ["lyapunov", "min_distance"]
        stride_idx = np.searchsorted(self.times, self.snapshot_times)
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            fh.write(",".join(cols) + "\n")
            for row, t in enumerate(self.snapshot_times):
                vals = [repr(float(t))]
                for i in range(n):
                    vals += [repr(float(c)) for c in self.x[row, i]]
                    vals += [repr(float(c)) for c in self.v[row, i]]
                k = min(stride_idx[row], len(self.lyapunov) - 1)
                vals += [repr(float(self.lyapunov[k])), repr(float(self.min_distance[k]))]
                fh.write(",".join(vals) + "\n")


def simulate(
    initial: SwarmState | Sequence[AgentState],
    p: ControlParams,
    duration: float,
    dt: float = 0.01,
    events: Sequence[tuple[float, np.ndarray]] = (),
    snapshot_stride: int = 10,
) -> TrajectoryLog:
    """Integrate the fleet for `duration` seconds with fixed step `dt`.

    `events` holds (time, impulse) pairs; an impulse is either one 3-vector
    applied to every agent (a gust) or an (n, 3) per-agent array. The log
    records the energy value and minimum pairwise separation at every step
    and full state snapshots every `snapshot_stride` steps.
    """
    state = initial if isinstance(initial, SwarmState) else SwarmState.from_agents(initial)
    state = state.copy()
    if state.min_pairwise_distance() <= p.r_c:
        raise CollisionFaultError("initial placement violates the collision radius")

    n_steps = int(round(duration / dt))
    pending = sorted(
        ((float(t), np.broadcast_to(np.asarray(imp, dtype=float), (state.n, 3)).copy())
         for t, imp in events),
        key=lambda e: e[0],
    )

    times = np.arange(n_steps + 1) * dt
    lyap = np.empty(n_steps + 1)
    mind = np.empty(n_steps + 1)
    snaps_x, snaps_v, snap_t = [state.x.copy()], [state.v.copy()], [0.0]
    lyap[0] = lyapunov_value(state, p)
    mind[0] = state.min_pairwise_distance()
    applied_events = []

    next_event = 0
    for k in range(1, n_steps + 1):
        t_prev = times[k - 1]
        impulse = None
        if next_event < len(pending) and pending[next_event][0] <= t_prev + 0.5 * dt:
            impulse = pending[next_event][1]
            applied_events.append({"time": float(times[k - 1]), "step": k})
            next_event += 1
        state = step(state, p, dt, impulses=impulse)
        lyap[k] = lyapunov_value(state, p)
        mind[k] = state.min_pairwise_distance()
        if k % snapshot_stride == 0 or k == n_steps:
            snaps_x.append(state.x.copy())
            snaps_v.append(state.v.copy())
            snap_t.append(times[k])

    return TrajectoryLog(
        dt=dt,
        times=times,
        lyapunov=lyap,
        min_distance=mind,
        snapshot_times=np.array(snap_t),
        x=np.array(snaps_x),
        v=np.array(snaps_v),
        x_dest=state.x_dest.copy(),
        group=state.group.copy(),
        events=applied_events,
        params={"r_c": p.r_c, "r_d": p.r_d, "v_max": p.v_max, "b": p.b, "c": p.c, "eps": p.eps},
    )
