"""Deployments, sensing models, detection/influence ranges and the detection partition."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import shapely

from .errors import ConfigError, CoverageError, DomainError


class ModelKind(str, Enum):
    BOOLEAN = "boolean"
    POWER_LAW = "powerlaw"


@dataclass(frozen=True)
class SensingModel:
    """Distance-dependent signal loss ``rho(d)``.

    ``r_d`` is the Boolean cutoff radius and ``eta`` the path-loss exponent;
    each is only read for its own kind.
    """

    kind: ModelKind
    r_d: float = 1.0
    eta: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.kind is ModelKind.BOOLEAN and not self.r_d > 0:
            raise ConfigError("Boolean cutoff radius must be positive")
        if self.kind is ModelKind.POWER_LAW and not self.eta > 0:
            raise ConfigError("path-loss exponent eta must be positive")

    @classmethod
    def boolean(cls, r_d: float = 1.0) -> "SensingModel":
        return cls(ModelKind.BOOLEAN, r_d=r_d)

    @classmethod
    def power_law(cls, eta: float = 2.0) -> "SensingModel":
        return cls(ModelKind.POWER_LAW, eta=eta)

    def __call__(self, d):
        return rho(self, d)


def rho(model: SensingModel, d):
    """Signal attenuation at distance ``d``; works on scalars and arrays.

    The power law is clamped to ``min(1, d**-eta)`` so that ``rho(0) == 1``.
    Infinite distance gives 0 for both kinds.
    """
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("distance must be non-negative")
    if model.kind is ModelKind.BOOLEAN:
        out = (arr <= model.r_d).astype(float)
    else:
        with np.errstate(divide="ignore", over="ignore"):
            out = np.minimum(1.0, np.power(arr, -model.eta))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Deployment:
    sensors: np.ndarray
    roi: np.ndarray
    h_e: float
    sigma: float
    model: SensingModel
    name: str = "custom"

    def __post_init__(self):
        sensors = np.asarray(self.sensors, dtype=float).reshape(-1, 2)
        roi = np.asarray(self.roi, dtype=float).reshape(-1, 2)
        sensors.setflags(write=False)
        roi.setflags(write=False)
        object.__setattr__(self, "sensors", sensors)
        object.__setattr__(self, "roi", roi)
        if len(sensors) < 1:
            raise ConfigError("a deployment needs at least one sensor")
        if len(sensors) > 62:
            raise ConfigError("at most 62 sensors are supported")
        if len(roi) < 3:
            raise ConfigError("ROI polygon needs at least three vertices")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not self.h_e > 0:
            raise ConfigError("h_e must be positive")
        poly = self.polygon
        if not poly.is_valid or poly.area <= 0:
            raise ConfigError("ROI must be a simple polygon with positive area")
        # sensors on the boundary count as inside, up to rounding
        outside = shapely.distance(poly, shapely.points(sensors)) > 1e-9
        if outside.any():
            idx = int(np.argmax(outside)) + 1
            raise ConfigError(f"sensor {idx} at {tuple(sensors[idx - 1])} lies outside the ROI")

    @property
    def n(self) -> int:
        return len(self.sensors)

    @property
    def polygon(self) -> shapely.Polygon:
        return shapely.Polygon(self.roi)

    def contains(self, points) -> np.ndarray:
        """Boundary-inclusive membership test for an (m, 2) array of points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return shapely.covers(self.polygon, shapely.points(pts))

    def distances(self, x) -> np.ndarray:
        """Distance from every sensor to the point ``x``."""
        return np.hypot(*(self.sensors - np.asarray(x, dtype=float)).T)


@dataclass(frozen=True)
class RangeParams:
    mu1: float
    omega0_lower: float
    r_d: float
    r_i: float


def compute_ranges(dep: Deployment, mu1: float, omega0_lower: float) -> RangeParams:
    """Detection range ``sup{d : h_e rho(d) >= mu1}`` and influence range
    ``min{d : 2 rho(d) <= (1 - omega0_lower) rho(r_d)}``.

    For the Boolean model no finite influence distance satisfies the second
    condition inside the cutoff, so ``r_i = r_d``.
    """
    if not 0 < mu1 <= dep.h_e:
        raise ConfigError(f"mu1 must satisfy 0 < mu1 <= h_e (got mu1={mu1}, h_e={dep.h_e})")
    if not 0 < omega0_lower < 1:
        raise ConfigError("omega0_lower must lie in (0, 1)")
    model = dep.model
    if model.kind is ModelKind.BOOLEAN:
        return RangeParams(mu1, omega0_lower, model.r_d, model.r_d)
    # h_e / mu1 >= 1, so the solution always sits on the unclamped branch (d >= 1).
    r_d = (dep.h_e / mu1) ** (1.0 / model.eta)
    level = 0.5 * (1.0 - omega0_lower) * rho(model, r_d)
    r_i = level ** (-1.0 / model.eta)
    return RangeParams(mu1, omega0_lower, r_d, r_i)


def omega0_for_influence_range(model: SensingModel, r_d: float, r_i: float) -> float:
    """Invert the influence-range definition: the ``omega0_lower`` giving ``r_i``."""
    if model.kind is ModelKind.BOOLEAN:
        raise ConfigError("the Boolean model has r_i = r_d for every omega0_lower")
    if r_i < r_d:
        raise ConfigError("influence range cannot be smaller than the detection range")
    return 1.0 - 2.0 * rho(model, r_i) / rho(model, r_d)


def _bits_to_set(bits: int) -> frozenset:
    out = []
    s = 1
    while bits:
        if bits & 1:
            out.append(s)
        bits >>= 1
        s += 1
    return frozenset(out)


def set_to_mask(sensor_set: Iterable[int]) -> int:
    mask = 0
    for s in sensor_set:
        mask |= 1 << (int(s) - 1)
    return mask


@dataclass(frozen=True)
class Region:
    region_id: int
    sensors: frozenset
    points: np.ndarray = field(repr=False)
    reference: tuple
    area: float

    @property
    def mask(self) -> int:
        return set_to_mask(self.sensors)

    def label(self) -> str:
        return ",".join(str(s) for s in sorted(self.sensors))


@dataclass(frozen=True)
class DetectionPartition:
    """The subregions of the ROI, each detection-covered by a unique sensor set.

    Sensor labels and region ids are 1-based.
    """

    regions: tuple
    deployment: Deployment = field(repr=False)
    ranges: RangeParams
    grid_resolution: float

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def sets(self) -> list:
        return [r.sensors for r in self.regions]

    def region(self, region_id: int) -> Region:
        if not 1 <= region_id <= len(self.regions):
            raise DomainError(f"no region with id {region_id}")
        return self.regions[region_id - 1]

    def masks(self) -> np.ndarray:
        return np.array([r.mask for r in self.regions], dtype=np.int64)

    def locate(self, x) -> int:
        """Region id whose sensor set equals the detection cover of ``x``."""
        cover = detection_cover_set(self.deployment, self.ranges, x)
        for r in self.regions:
            if r.sensors == cover:
                return r.region_id
        raise DomainError(f"point {tuple(x)} has cover {sorted(cover)} not present in the partition")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["region_id", "sensor_set", "reference_x", "reference_y", "area_estimate"])
            for r in self.regions:
                w.writerow([r.region_id, r.label(), f"{r.reference[0]:.6f}",
                            f"{r.reference[1]:.6f}", f"{r.area:.6f}"])


def _grid(dep: Deployment, h: float) -> np.ndarray:
    lo = dep.roi.min(axis=0)
    hi = dep.roi.max(axis=0)
    # cell centres, so no sample sits on a grid-aligned boundary
    xs = lo[0] + (np.arange(int(np.ceil((hi[0] - lo[0]) / h))) + 0.5) * h
    ys = lo[1] + (np.arange(int(np.ceil((hi[1] - lo[1]) / h))) + 0.5) * h
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return pts[dep.contains(pts)]


def build_partition(
    dep: Deployment,
    ranges: RangeParams,
    grid_resolution: float | None = None,
    order: Sequence[Iterable[int]] | None = None,
) -> DetectionPartition:
    """Detection partition by sampling the ROI on a regular grid.

    Regions are numbered by lexicographic order of their sorted sensor sets
    unless ``order`` lists the sets in the desired numbering; sets found on
    the grid but absent from ``order`` are appended lexicographically.
    """
    h = ranges.r_d / 100.0 if grid_resolution is None else float(grid_resolution)
    if not h > 0:
        raise ConfigError("grid_resolution must be positive")
    pts = _grid(dep, h)
    if len(pts) == 0:
        raise ConfigError("grid_resolution is too coarse: no grid point falls inside the ROI")
    dist = np.hypot(pts[:, None, 0] - dep.sensors[None, :, 0], pts[:, None, 1] - dep.sensors[None, :, 1])
    covered = dist <= ranges.r_d
    empty = ~covered.any(axis=1)
    if empty.any():
        raise CoverageError(pts[int(np.argmax(empty))])
    weights = (1 << np.arange(dep.n, dtype=np.int64))
    codes = covered.astype(np.int64) @ weights
    uniq = np.unique(codes)
    found = {int(u): _bits_to_set(int(u)) for u in uniq}
    lex = sorted(found.values(), key=lambda s: tuple(sorted(s)))
    if order is not None:
        wanted = [frozenset(int(s) for s in grp) for grp in order]
        ordered = [s for s in wanted if s in found.values()]
        ordered += [s for s in lex if s not in ordered]
    else:
        ordered = lex
    clearance = np.abs(dist - ranges.r_d).min(axis=1)
    regions = []
    for rid, sset in enumerate(ordered, start=1):
        sel = codes == set_to_mask(sset)
        rpts = pts[sel]
        best = int(np.argmax(clearance[sel]))
        regions.append(Region(rid, sset, rpts, (float(rpts[best, 0]), float(rpts[best, 1])),
                              float(sel.sum()) * h * h))
    return DetectionPartition(tuple(regions), dep, ranges, h)


def detection_cover_set(dep: Deployment, ranges: RangeParams, x) -> frozenset:
    d = dep.distances(x)
    return frozenset(int(s) + 1 for s in np.nonzero(d <= ranges.r_d)[0])


def influence_cover_set(dep: Deployment, ranges: RangeParams, x) -> frozenset:
    """Sensors whose influence range reaches ``x`` (boundary inclusive)."""
    if not dep.contains(x)[0]:
        raise DomainError(f"point {tuple(np.asarray(x, float))} lies outside the ROI")
    d = dep.distances(x)
    return frozenset(int(s) + 1 for s in np.nonzero(d <= ranges.r_i)[0])


def worst_case_point(partition: DetectionPartition, region_id: int) -> tuple:
    """Sampled point of a region farthest (in min-distance) from the region's own sensors."""
    region = partition.region(region_id)
    members = np.array(sorted(region.sensors)) - 1
    sens = partition.deployment.sensors[members]
    d = np.hypot(region.points[:, None, 0] - sens[None, :, 0], region.points[:, None, 1] - sens[None, :, 1])
    best = int(np.argmax(d.min(axis=1)))
    return float(region.points[best, 0]), float(region.points[best, 1])


def regular_polygon(n_vertices: int, radius: float, center=(0.0, 0.0), rotation: float = 0.0) -> np.ndarray:
    k = np.arange(n_vertices)
    a = rotation + 2 * math.pi * k / n_vertices
    return np.column_stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)])


def read_points_csv(path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            rows.append([float(v) for v in line.split(",")[:2]])
    return np.array(rows)
