"""Multizone time-of-flight imager model (VL53L5CX-class).

Each frame casts one center ray per zone of an nx x ny grid spanning the
configured field of view, returning the nearest surface distance up to
max_range with additive Gaussian range noise. Zones that hit nothing in
range report NO_TARGET (NaN distance, valid=False).
"""

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import Pose
from .raycast import Bvh, Ray, TriangleSet

NO_TARGET = float("nan")
_MIN_DISTANCE = 1e-6  # reported distances stay strictly positive


@dataclass(frozen=True)
class ToFSpec:
    nx: int = 8
    ny: int = 8
    fov_x: float = 45.0       # degrees
    fov_y: float = 45.0
    max_range: float = 4.0    # m
    rate: float = 12.0        # Hz
    range_noise_sigma: float = 0.01  # m

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("zone grid must be at least 1x1")
        if not 0.0 < self.fov_x < 180.0 or not 0.0 < self.fov_y < 180.0:
            raise ValueError("field of view must be in (0, 180) degrees")
        if self.max_range <= 0.0 or self.rate <= 0.0:
            raise ValueError("max_range and rate must be > 0")
        if self.range_noise_sigma < 0.0:
            raise ValueError("range_noise_sigma must be >= 0")


@dataclass
class ToFFrame:
    sensor_id: int
    timestamp: float
    distances: np.ndarray  # (nx, ny), NaN where no target
    valid: np.ndarray      # (nx, ny) bool

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.distances.shape != self.valid.shape:
            raise ValueError("distances and valid grids must have the same shape")


def zone_angles(i: int, j: int, spec: ToFSpec):
    """Boresight-relative zone angles (radians) for zone (i, j)."""
    if not (0 <= i < spec.nx and 0 <= j < spec.ny):
        raise IndexError(f"zone ({i}, {j}) outside {spec.nx}x{spec.ny} grid")
    theta_x = ((i + 0.5) / spec.nx - 0.5) * math.radians(spec.fov_x)
    theta_y = ((j + 0.5) / spec.ny - 0.5) * math.radians(spec.fov_y)
    return theta_x, theta_y


def zone_direction_local(i: int, j: int, spec: ToFSpec):
    """Unit ray direction in the sensor frame (boresight = +z)."""
    theta_x, theta_y = zone_angles(i, j, spec)
    d = np.array([math.tan(theta_x), math.tan(theta_y), 1.0])
    return d / np.linalg.norm(d)


def zone_ray(sensor_pose: Pose, i: int, j: int, spec: ToFSpec) -> Ray:
    d = sensor_pose.rotate(zone_direction_local(i, j, spec))
    d = d / np.linalg.norm(d)
    return Ray(origin=sensor_pose.translation, direction=tuple(d))


class SceneRaycaster:
    """BVH over the posed scene geometry at one instant."""

    def __init__(self, meshes):
        self.tris = TriangleSet.from_meshes(meshes)
        self.bvh = Bvh(self.tris)

    def cast(self, ray: Ray, max_range: float):
        hit = self.bvh.raycast(ray, max_range=max_range)
        return None if hit is None else hit[0]


def capture_frame(sensor_id: int, sensor_pose: Pose, raycaster: SceneRaycaster,
                  t: float, spec: ToFSpec, rng: np.random.Generator) -> ToFFrame:
    """One frame: 1 ray per zone, Gaussian range noise, clamp to (0, max_range].

    The noise grid is drawn once per frame regardless of hits, so the rng
    stream does not depend on scene content.
    """
    noise = rng.normal(0.0, spec.range_noise_sigma, size=(spec.nx, spec.ny)) \
        if spec.range_noise_sigma > 0.0 else np.zeros((spec.nx, spec.ny))
    distances = np.full((spec.nx, spec.ny), NO_TARGET)
    valid = np.zeros((spec.nx, spec.ny), dtype=bool)
    for i in range(spec.nx):
        for j in range(spec.ny):
            d = raycaster.cast(zone_ray(sensor_pose, i, j, spec), spec.max_range)
            if d is None:
                continue
            distances[i, j] = min(max(d + noise[i, j], _MIN_DISTANCE), spec.max_range)
            valid[i, j] = True
    return ToFFrame(sensor_id=sensor_id, timestamp=float(t),
                    distances=distances, valid=valid)


def frame_times(duration: float, spec: ToFSpec):
    """Strictly periodic frame timestamps k/rate in [0, duration)."""
    if duration <= 0.0:
        return np.zeros(0)
    n = int(math.ceil(duration * spec.rate - 1e-12))
    return np.arange(n, dtype=np.float64) / spec.rate
