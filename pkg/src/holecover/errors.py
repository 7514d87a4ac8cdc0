"""Shared exception types."""


class HolecoverError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(HolecoverError, ValueError):
    """A numeric argument is outside its documented domain."""


class InvalidGeometryError(HolecoverError, ValueError):
    """Degenerate geometry, e.g. a receiver co-located with a transmitter."""


class InfeasibleAltitudeError(HolecoverError, ValueError):
    """Aerial station flies too high to reach the SINR threshold on the ground.

    Carries the maximum feasible altitude for the given link budget.
    """

    def __init__(self, msg: str, max_feasible_altitude: float):
        super().__init__(msg)
        self.max_feasible_altitude = max_feasible_altitude


class InvalidTopologyError(HolecoverError, ValueError):
    """Swarm communication graph is not strongly connected."""


class CollisionDomainError(HolecoverError, ValueError):
    """Two agents are at or inside the collision radius; the repulsive
    potential is undefined there."""


class CollisionFaultError(HolecoverError, RuntimeError):
    """An integration step ended with two agents at or inside the collision
    radius. Treated as a simulation fault, not a recoverable condition."""


class ConfigError(HolecoverError, ValueError):
    """Scenario configuration failed validation."""
