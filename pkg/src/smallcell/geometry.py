"""Spatial processes and occlusion predicates.

Base stations form a homogeneous PPP on a finite disc around the origin;
blockages are rectangles whose centers form an independent PPP and which all
carry the same length, width and orientation marks. A link is in line of
sight exactly when no rectangle intersects the closed segment between its
endpoints (a segment touching a rectangle boundary counts as blocked).

All samplers draw from an explicit ``numpy.random.Generator`` so results are
reproducible and safe to parallelize with per-task generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParameterError",
    "PointPolar",
    "Rectangle",
    "Realization",
    "TAU",
    "default_region_radius",
    "sample_bs_ppp",
    "sample_blockages",
    "segment_intersects_rectangle",
    "count_blocking",
]

TAU = 2.0 * math.pi


class ParameterError(ValueError):
    """Raised when an argument is outside the model's domain."""


@dataclass(frozen=True)
class PointPolar:
    """A point in polar coordinates about the origin (meters, radians)."""

    r: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r >= 0.0):
            raise ParameterError(f"radius must be finite and nonnegative, got {self.r}")
        object.__setattr__(self, "theta", float(self.theta) % TAU)

    def to_xy(self) -> tuple[float, float]:
        return self.r * math.cos(self.theta), self.r * math.sin(self.theta)


@dataclass(frozen=True)
class Rectangle:
    """A rectangle given by center, side lengths, and orientation.

    ``length`` runs along the orientation axis, ``width`` perpendicular to it.
    """

    center: tuple[float, float]
    length: float
    width: float
    orientation: float

    def __post_init__(self):
        if not (self.length > 0.0 and self.width > 0.0):
            raise ParameterError("rectangle sides must be positive")
        object.__setattr__(self, "orientation", float(self.orientation) % TAU)

    @property
    def half_diagonal(self) -> float:
        return 0.5 * math.hypot(self.length, self.width)


@dataclass
class Realization:
    """One sampled network: ordered base stations plus a blockage field."""

    base_stations: list[PointPolar]
    blockages: list[Rectangle] = field(default_factory=list)
    region_radius: float = 0.0


def default_region_radius(bs_intensity: float) -> float:
    """Sampling disc radius capturing all but e^-64 of the nearest-BS mass."""
    if not bs_intensity > 0.0:
        raise ParameterError("bs_intensity must be positive")
    return 8.0 / math.sqrt(math.pi * bs_intensity)


def _check_intensity(intensity: float, region_radius: float) -> None:
    if not (np.isfinite(intensity) and intensity >= 0.0):
        raise ParameterError(f"intensity must be finite and nonnegative, got {intensity}")
    if not (np.isfinite(region_radius) and region_radius > 0.0):
        raise ParameterError(f"region_radius must be positive, got {region_radius}")


def sample_disc_points(
    intensity: float, region_radius: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Poisson number of i.i.d. uniform points on the disc, as (r, theta) arrays."""
    _check_intensity(intensity, region_radius)
    n = rng.poisson(intensity * math.pi * region_radius**2)
    r = region_radius * np.sqrt(rng.random(n))
    theta = TAU * rng.random(n)
    return r, theta


def sample_bs_ppp(
    intensity: float, region_radius: float, rng: np.random.Generator
) -> list[PointPolar]:
    """Sample the base-station PPP, sorted by increasing distance.

    Equal radii (a probability-zero event) trigger a fresh draw so that the
    ordering is strict.
    """
    while True:
        r, theta = sample_disc_points(intensity, region_radius, rng)
        order = np.argsort(r, kind="stable")
        r, theta = r[order], theta[order]
        if r.size < 2 or np.all(np.diff(r) > 0.0):
            return [PointPolar(float(ri), float(ti)) for ri, ti in zip(r, theta)]


def sample_blockages(
    intensity: float,
    region_radius: float,
    length: float,
    width: float,
    orientation: float,
    rng: np.random.Generator,
) -> list[Rectangle]:
    """Sample the blockage field; every rectangle carries the same marks."""
    if not (length > 0.0 and width > 0.0):
        raise ParameterError("blockage sides must be positive")
    r, theta = sample_disc_points(intensity, region_radius, rng)
    xs, ys = r * np.cos(theta), r * np.sin(theta)
    return [
        Rectangle((float(x), float(y)), length, width, orientation)
        for x, y in zip(xs, ys)
    ]


def segments_intersect_rectangles(
    ax: float,
    ay: float,
    bx: float,
    by: float,
    cx: np.ndarray,
    cy: np.ndarray,
    length,
    width,
    orientation,
) -> np.ndarray:
    """Closed-set intersection test of one segment against many rectangles.

    ``orientation`` may be a scalar or a per-rectangle array. Returns a
    boolean array over rectangles.
    """
    cx = np.asarray(cx, dtype=float)
    cy = np.asarray(cy, dtype=float)
    cosp, sinp = np.cos(orientation), np.sin(orientation)
    # segment endpoints in each rectangle's frame
    px = (ax - cx) * cosp + (ay - cy) * sinp
    py = -(ax - cx) * sinp + (ay - cy) * cosp
    qx = (bx - cx) * cosp + (by - cy) * sinp
    qy = -(bx - cx) * sinp + (by - cy) * cosp
    dx, dy = qx - px, qy - py
    hl = 0.5 * np.asarray(length, dtype=float)
    hw = 0.5 * np.asarray(width, dtype=float)

    t0 = np.zeros_like(px)
    t1 = np.ones_like(px)
    for p, d, h in ((px, dx, hl), (py, dy, hw)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (-h - p) / d
            tb = (h - p) / d
        lo = np.minimum(ta, tb)
        hi = np.maximum(ta, tb)
        parallel = d == 0.0
        in_slab = np.abs(p) <= h
        # a parallel segment constrains nothing if inside the slab, else misses
        lo = np.where(parallel, np.where(in_slab, 0.0, np.inf), lo)
        hi = np.where(parallel, np.where(in_slab, 1.0, -np.inf), hi)
        t0 = np.maximum(t0, lo)
        t1 = np.minimum(t1, hi)
    return t0 <= t1


def segment_intersects_rectangle(a, b, rect: Rectangle) -> bool:
    """True iff the closed segment [a, b] meets the closed rectangle."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    if ax == bx and ay == by:
        raise ParameterError("segment endpoints must differ")
    if not (rect.length > 0.0 and rect.width > 0.0):
        raise ParameterError("rectangle is degenerate")
    hit = segments_intersect_rectangles(
        ax,
        ay,
        bx,
        by,
        np.array([rect.center[0]]),
        np.array([rect.center[1]]),
        rect.length,
        rect.width,
        rect.orientation,
    )
    return bool(hit[0])


def count_blocking(a, b, blockages: list[Rectangle]) -> int:
    """Number of rectangles intersecting segment [a, b]; 0 means line of sight."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    if ax == bx and ay == by:
        raise ParameterError("segment endpoints must differ")
    if not blockages:
        return 0
    cx = np.array([r.center[0] for r in blockages])
    cy = np.array([r.center[1] for r in blockages])
    length = np.array([r.length for r in blockages])
    width = np.array([r.width for r in blockages])
    orientation = np.array([r.orientation for r in blockages])
    hit = segments_intersect_rectangles(ax, ay, bx, by, cx, cy, length, width, orientation)
    return int(np.count_nonzero(hit))
