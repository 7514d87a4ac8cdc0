"""Point-process sampling and circle-covering math.

Provides the spatial primitives the rest of the simulator is built on:
uniform Poisson fields over a rectangle, hard-core thinning with an
exclusion distance, dilation areas for rectangles, volumetric bounds on
the number of equal disks needed to cover a rectangle, and a hexagonal
lattice construction that exhibits an actual covering for the bound
checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle, dimensions in meters."""

    width: float
    height: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidParameterError(
                f"region extents must be positive, got {self.width} x {self.height}"
            )

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (self.origin[0] + self.width / 2.0, self.origin[1] + self.height / 2.0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points (N, 2) inside the closed rectangle."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x0, y0 = self.origin
        return (
            (pts[:, 0] >= x0)
            & (pts[:, 0] <= x0 + self.width)
            & (pts[:, 1] >= y0)
            & (pts[:, 1] <= y0 + self.height)
        )

    def dilated(self, margin: float) -> "Region":
        """Rectangle grown by `margin` on every side."""
        return Region(
            self.width + 2.0 * margin,
            self.height + 2.0 * margin,
            (self.origin[0] - margin, self.origin[1] - margin),
        )


@dataclass
class PointSet:
    """Planar points plus the intensity of the process that generated them."""

    points: np.ndarray  # (N, 2)
    generator_density: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class CoveringBounds:
    """Volumetric sandwich on the number of radius-R disks covering a region.

    `lower` is area / disk-area; `upper` comes from packing half-radius
    disks into the dilated region. The integer lower bound rounds outward
    (a cover cannot use fewer than ceil(lower) disks); the upper bound is
    reported raw because it limits a packing argument, with floor attached
    for convenience.
    """

    lower: float
    upper: float
    lower_int: int = field(init=False)
    upper_int: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lower_int", math.ceil(self.lower))
        object.__setattr__(self, "upper_int", math.floor(self.upper))


def sample_ppp(region: Region, density: float, seed=None) -> PointSet:
    """Homogeneous Poisson field: Poisson(density * area) uniform points.

    Deterministic for a fixed seed (accepts anything
    numpy.random.default_rng accepts, including a Generator).
    """
    if density < 0:
        raise InvalidParameterError(f"density must be >= 0, got {density}")
    rng = np.random.default_rng(seed)
    n = rng.poisson(density * region.area)
    xy = rng.uniform(size=(n, 2))
    xy[:, 0] = region.origin[0] + xy[:, 0] * region.width
    xy[:, 1] = region.origin[1] + xy[:, 1] * region.height
    return PointSet(xy, density)


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest inter-point distance; inf for fewer than two points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return math.inf
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    return float(math.sqrt(d2.min()))


def matern_thin(points: PointSet, exclusion: float) -> PointSet:
    """Dependent thinning: drop every point with a neighbor closer than
    `exclusion` in the original set (both members of a close pair go).

    The survivors have min pairwise distance >= exclusion.
    """
    if exclusion < 0:
        raise InvalidParameterError(f"exclusion distance must be >= 0, got {exclusion}")
    pts = points.points
    if exclusion == 0 or len(pts) < 2:
        return PointSet(pts.copy(), points.generator_density)
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    keep = d2.min(axis=1) >= exclusion * exclusion
    return PointSet(pts[keep], points.generator_density)


def matern_retained_intensity(density: float, exclusion: float) -> float:
    """Closed-form retained intensity of the thinning above for a Poisson
    input: lambda * exp(-lambda * pi * D^2)."""
    return density * math.exp(-density * math.pi * exclusion * exclusion)


def minkowski_area_rect_disk(region: Region, r: float) -> float:
    """Area of the rectangle dilated by a disk of radius r.

    Exact for a convex rectangle: A + P*r + pi*r^2.
    """
    if r < 0:
        raise InvalidParameterError(f"dilation radius must be >= 0, got {r}")
    return region.area + region.perimeter * r + math.pi * r * r


def covering_bounds(region: Region, radius: float) -> CoveringBounds:
    """Sandwich on how many radius-R disks a full cover of the region needs."""
    if radius <= 0:
        raise InvalidParameterError(f"covering radius must be > 0, got {radius}")
    lower = region.area / (math.pi * radius * radius)
    half = radius / 2.0
    upper = minkowski_area_rect_disk(region, half) / (math.pi * half * half)
    return CoveringBounds(lower, upper)


def _distance_to_rect(region: Region, pts: np.ndarray) -> np.ndarray:
    x0, y0 = region.origin
    dx = np.maximum(np.maximum(x0 - pts[:, 0], pts[:, 0] - (x0 + region.width)), 0.0)
    dy = np.maximum(np.maximum(y0 - pts[:, 1], pts[:, 1] - (y0 + region.height)), 0.0)
    return np.hypot(dx, dy)


def hex_cover(region: Region, radius: float) -> PointSet:
    """Disk centers on a hexagonal (triangular) lattice that cover the region.

    Lattice pitch sqrt(3)*R gives Voronoi hexagons with circumradius R, so
    keeping every lattice point whose cell can touch the rectangle yields a
    guaranteed cover. A region whose diagonal fits inside one disk is
    covered by a single center.
    """
    if radius <= 0:
        raise InvalidParameterError(f"covering radius must be > 0, got {radius}")
    if region.diagonal <= 2.0 * radius:
        return PointSet(np.array([region.center]), 0.0)

    pitch = math.sqrt(3.0) * radius
    row_step = 1.5 * radius
    cx, cy = region.center
    ni = int(math.ceil((region.width / 2.0 + radius) / pitch)) + 1
    nj = int(math.ceil((region.height / 2.0 + radius) / row_step)) + 1

    centers = []
    for j in range(-nj, nj + 1):
        off = 0.5 * pitch if (j % 2) else 0.0
        for i in range(-ni, ni + 1):
            centers.append((cx + i * pitch + off, cy + j * row_step))
    centers = np.asarray(centers)
    # every Voronoi cell meeting the rectangle has its center within R of it
    keep = _distance_to_rect(region, centers) <= radius
    return PointSet(centers[keep], 0.0)
