"""Synthetic sensing: scenes of spheres/boxes/planes, a panoramic LiDAR with
a non-repetitive golden-angle scan pattern, and a narrow-FOV pinhole depth
camera with depth-to-point-cloud conversion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Transform
from .pointcloud import PointCloudFrame

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


# --------------------------------------------------------------------------
# Scene primitives


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by min and max corners."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self) -> None:
        mins = np.asarray(self.mins, dtype=np.float64).reshape(3)
        maxs = np.asarray(self.maxs, dtype=np.float64).reshape(3)
        if np.any(maxs <= mins):
            raise ValueError("box extents must be strictly positive")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)


@dataclass(frozen=True)
class Plane:
    """Horizontal plane z = height (infinite, double-sided)."""

    height: float


Shape = Sphere | Box | Plane


@dataclass(frozen=True)
class SceneObject:
    shape: Shape
    object_id: int
    is_obstacle: bool = False
    is_target: bool = False


@dataclass
class Scene:
    objects: list[SceneObject] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object_ids must be unique")

    def obstacles(self) -> list[SceneObject]:
        return [o for o in self.objects if o.is_obstacle]

    def targets(self) -> list[SceneObject]:
        return [o for o in self.objects if o.is_target]


def _flags_token(obj: SceneObject) -> str:
    flags = [name for name, on in (("obstacle", obj.is_obstacle), ("target", obj.is_target)) if on]
    return ",".join(flags) if flags else "-"


def format_scene(scene: Scene) -> str:
    """Render the line-oriented scene description (inverse of parse_scene)."""
    lines = []
    for obj in scene.objects:
        s = obj.shape
        if isinstance(s, Sphere):
            head = "sphere %.17g %.17g %.17g %.17g" % (*s.center, s.radius)
        elif isinstance(s, Box):
            head = "box %.17g %.17g %.17g %.17g %.17g %.17g" % (*s.mins, *s.maxs)
        else:
            head = "plane %.17g" % s.height
        lines.append(f"{head} {obj.object_id} {_flags_token(obj)}")
    return "\n".join(lines) + "\n"


def parse_scene(text: str) -> Scene:
    """Parse the scene file format: one primitive per line.

    `sphere cx cy cz r id flags`, `box x0 y0 z0 x1 y1 z1 id flags`,
    `plane z id flags`; flags are comma-separated tokens from
    {obstacle, target}, `-` (or omission) for none; `#` starts a comment.
    """
    objects = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind, counts = tok[0], {"sphere": 4, "box": 6, "plane": 1}
        if kind not in counts:
            raise ValueError(f"line {lineno}: unknown primitive '{kind}'")
        n = counts[kind]
        if len(tok) not in (n + 2, n + 3):
            raise ValueError(f"line {lineno}: expected {n} numbers, id and optional flags")
        try:
            nums = [float(v) for v in tok[1 : 1 + n]]
            object_id = int(tok[1 + n])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        flags = tok[2 + n] if len(tok) == n + 3 else "-"
        flag_set = set() if flags == "-" else set(flags.split(","))
        if not flag_set <= {"obstacle", "target"}:
            raise ValueError(f"line {lineno}: bad flags '{flags}'")
        if kind == "sphere":
            shape: Shape = Sphere(nums[:3], nums[3])
        elif kind == "box":
            shape = Box(nums[:3], nums[3:])
        else:
            shape = Plane(nums[0])
        objects.append(
            SceneObject(shape, object_id, "obstacle" in flag_set, "target" in flag_set)
        )
    return Scene(objects)


# --------------------------------------------------------------------------
# Sensor models


@dataclass(frozen=True)
class LidarModel:
    """Panoramic LiDAR: 360 deg azimuth, bounded elevation span, and a
    seeded non-repetitive scan pattern."""

    elevation_deg: tuple[float, float] = (-7.0, 52.0)
    points_per_frame: int = 20_000
    max_range: float = 30.0
    pattern_seed: int = 0
    range_jitter: float = 0.0  # std of optional zero-mean range noise, meters

    def __post_init__(self) -> None:
        lo, hi = self.elevation_deg
        if not lo < hi:
            raise ValueError("elevation min must be below elevation max")
        if self.points_per_frame < 1:
            raise ValueError("points_per_frame must be at least 1")


@dataclass(frozen=True)
class DepthCameraModel:
    """Pinhole depth camera; image stores z-depth along the optical axis."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    max_range: float = 10.0

    def __post_init__(self) -> None:
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")
        if not (0.0 < self.cx < self.width and 0.0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


def scan_directions(model: LidarModel, frame_index: int) -> np.ndarray:
    """Unit directions for one frame of the non-repetitive pattern.

    Azimuths advance by the golden angle from a frame-dependent phase;
    elevations are stratified over the span with frame-dependent jitter, so
    consecutive frames never repeat a ray and the union of a few frames
    covers the whole field of view densely.
    """
    if frame_index < 0:
        raise ValueError("frame_index must be non-negative")
    n = model.points_per_frame
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([model.pattern_seed, frame_index]))
    )
    phase = rng.uniform(0.0, 2.0 * math.pi)
    az = np.mod(phase + GOLDEN_ANGLE * np.arange(n), 2.0 * math.pi)
    lo, hi = np.radians(model.elevation_deg)
    el = lo + (hi - lo) * (np.arange(n) + rng.uniform(0.0, 1.0, size=n)) / n
    cos_el = np.cos(el)
    return np.stack([cos_el * np.cos(az), cos_el * np.sin(az), np.sin(el)], axis=1)


# --------------------------------------------------------------------------
# Ray casting


@dataclass(frozen=True)
class RayHit:
    distance: float
    object_id: int


def _intersect_shape(shape: Shape, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Distances (n,) of the nearest positive intersection per ray, inf on miss."""
    eps = 1e-12
    out = np.full(dirs.shape[0], np.inf)
    if isinstance(shape, Sphere):
        oc = origin - shape.center
        b = dirs @ oc
        c = float(oc @ oc) - shape.radius**2
        disc = b * b - c
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t1 = -b - sq
        t2 = -b + sq
        t = np.where(t1 > eps, t1, np.where(t2 > eps, t2, np.inf))
        out = np.where(ok, t, np.inf)
    elif isinstance(shape, Box):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t0 = (shape.mins - origin) * inv
            t1 = (shape.maxs - origin) * inv
        near = np.nanmax(np.minimum(t0, t1), axis=1)
        far = np.nanmin(np.maximum(t0, t1), axis=1)
        # zero direction components: inside the slab iff origin within bounds
        for k in range(3):
            zero = dirs[:, k] == 0.0
            if np.any(zero):
                inside = (origin[k] >= shape.mins[k]) & (origin[k] <= shape.maxs[k])
                far[zero & ~inside] = -np.inf
        hit = (far >= near) & (far > eps)
        t = np.where(near > eps, near, far)
        out = np.where(hit & (t > eps), t, np.inf)
    else:
        dz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (shape.height - origin[2]) / dz
        out = np.where((dz != 0.0) & (t > eps), t, np.inf)
    return out


def raycast_batch(
    scene: Scene, origin: np.ndarray, dirs: np.ndarray, max_range: float
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit for each unit direction from a common origin.

    Returns (distances, object_ids); misses carry inf and id -1.
    """
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    best = np.full(dirs.shape[0], np.inf)
    ids = np.full(dirs.shape[0], -1, dtype=np.int64)
    for obj in scene.objects:
        t = _intersect_shape(obj.shape, origin, dirs)
        closer = t < best
        best = np.where(closer, t, best)
        ids = np.where(closer, obj.object_id, ids)
    out_of_range = best > max_range
    best[out_of_range] = np.inf
    ids[out_of_range] = -1
    return best, ids


def raycast(scene: Scene, origin, direction, max_range: float) -> Optional[RayHit]:
    """Single-ray convenience wrapper; direction must be unit-norm within 1e-9."""
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(float(np.linalg.norm(direction)) - 1.0) > 1e-9:
        raise ValueError("direction must be normalized")
    dist, oid = raycast_batch(scene, origin, direction[None, :], max_range)
    if not np.isfinite(dist[0]):
        return None
    return RayHit(float(dist[0]), int(oid[0]))


def lidar_frame(
    scene: Scene,
    sensor_pose: Transform,
    model: LidarModel,
    frame_index: int,
    timestamp: float,
) -> PointCloudFrame:
    """Cast one frame of the scan pattern; hits come back in the sensor's
    egocentric frame, misses are dropped."""
    dirs_sensor = scan_directions(model, frame_index)
    dirs_world = sensor_pose.rotation.apply(dirs_sensor)
    dist, _ = raycast_batch(scene, sensor_pose.translation, dirs_world, model.max_range)
    hit = np.isfinite(dist)
    ranges = dist[hit]
    if model.range_jitter > 0.0:
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([model.pattern_seed, frame_index, 1]))
        )
        ranges = np.maximum(ranges + rng.normal(0.0, model.range_jitter, ranges.shape), 0.0)
    return PointCloudFrame(timestamp, dirs_sensor[hit] * ranges[:, None])


def _pixel_rays(model: DepthCameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized camera-frame rays through every pixel (row-major) and
    their norms; camera frame is x right, y down, z along the optical axis."""
    u = np.arange(model.width, dtype=np.float64)
    v = np.arange(model.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)  # (H, W)
    rays = np.stack(
        [(uu - model.cx) / model.fx, (vv - model.cy) / model.fy, np.ones_like(uu)], axis=-1
    ).reshape(-1, 3)
    return rays, np.linalg.norm(rays, axis=1)


def depth_image(scene: Scene, cam_pose: Transform, model: DepthCameraModel) -> np.ndarray:
    """Render an (height, width) z-depth map; 0 marks no return."""
    rays, norms = _pixel_rays(model)
    dirs_world = cam_pose.rotation.apply(rays / norms[:, None])
    dist, _ = raycast_batch(scene, cam_pose.translation, dirs_world, model.max_range)
    depth = np.where(np.isfinite(dist), dist / norms, 0.0)
    return depth.reshape(model.height, model.width)


def depth_to_pointcloud(
    img: np.ndarray, model: DepthCameraModel, timestamp: float
) -> PointCloudFrame:
    """Back-project positive depths to camera-frame points
    ((u - cx) d / fx, (v - cy) d / fy, d), row-major pixel order."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (model.height, model.width):
        raise ValueError("depth image dimensions do not match the camera model")
    v, u = np.nonzero(img > 0.0)
    d = img[v, u]
    pts = np.stack([(u - model.cx) * d / model.fx, (v - model.cy) * d / model.fy, d], axis=1)
    return PointCloudFrame(timestamp, pts)
