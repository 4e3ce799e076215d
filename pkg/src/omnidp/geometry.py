"""SE(3) primitives: unit-quaternion rotations, rigid transforms, frame
mapping from operator devices to end-effector targets, and planar base
integration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Rotation3:
    """Rotation stored as a unit quaternion (w, x, y, z), canonicalized to w >= 0.

    The constructor normalizes, so any finite non-zero quaternion is accepted;
    composition re-normalizes, keeping drift below 1e-9 over long chains.
    """

    quat: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.quat, dtype=np.float64).reshape(4)
        n = float(np.linalg.norm(q))
        if not math.isfinite(n) or n < _NORM_TOL:
            raise ValueError("quaternion must be finite with positive norm")
        q /= n
        if q[0] < 0.0:
            q = -q
        q.setflags(write=False)
        object.__setattr__(self, "quat", q)

    @staticmethod
    def identity() -> "Rotation3":
        return Rotation3(np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Rotation3":
        axis = np.asarray(axis, dtype=np.float64).reshape(3)
        n = float(np.linalg.norm(axis))
        if n < _NORM_TOL:
            raise ValueError("rotation axis must have positive norm")
        half = 0.5 * float(angle)
        return Rotation3(np.concatenate(([math.cos(half)], math.sin(half) / n * axis)))

    @staticmethod
    def from_yaw(angle: float) -> "Rotation3":
        return Rotation3.from_axis_angle((0.0, 0.0, 1.0), angle)

    @staticmethod
    def from_rpy(roll: float, pitch: float, yaw: float) -> "Rotation3":
        """ZYX convention: yaw about z, then pitch about y, then roll about x."""
        rz = Rotation3.from_axis_angle((0.0, 0.0, 1.0), yaw)
        ry = Rotation3.from_axis_angle((0.0, 1.0, 0.0), pitch)
        rx = Rotation3.from_axis_angle((1.0, 0.0, 0.0), roll)
        return rz.compose(ry).compose(rx)

    def compose(self, other: "Rotation3") -> "Rotation3":
        """Quaternion product: applies `other` first, then `self`."""
        w1, x1, y1, z1 = self.quat
        w2, x2, y2, z2 = other.quat
        return Rotation3(
            np.array(
                [
                    w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                    w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                    w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                    w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
                ]
            )
        )

    def inverse(self) -> "Rotation3":
        w, x, y, z = self.quat
        return Rotation3(np.array([w, -x, -y, -z]))

    def matrix(self) -> np.ndarray:
        w, x, y, z = self.quat
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def apply(self, p) -> np.ndarray:
        """Rotate a 3-vector or an (n, 3) stack of vectors."""
        p = np.asarray(p, dtype=np.float64)
        return p @ self.matrix().T

    def angle(self) -> float:
        """Rotation angle in [0, pi] (w >= 0 canonicalization)."""
        w = min(1.0, float(self.quat[0]))
        return 2.0 * math.atan2(float(np.linalg.norm(self.quat[1:])), w)

    def angle_to(self, other: "Rotation3") -> float:
        """Geodesic angle between two rotations."""
        return self.inverse().compose(other).angle()

    def rotation_vector(self) -> np.ndarray:
        """Axis * angle; series expansion keeps it smooth through angle 0."""
        w = float(self.quat[0])
        v = self.quat[1:]
        s = float(np.linalg.norm(v))
        if s < 1e-12:
            return 2.0 * np.asarray(v)  # atan2(s, w)/s -> 1/w -> 1 as s -> 0
        return (2.0 * math.atan2(s, w) / s) * np.asarray(v)


@dataclass(frozen=True)
class Transform:
    """Rigid transform: p_out = R @ p_in + t."""

    rotation: Rotation3
    translation: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Transform":
        return Transform(Rotation3.identity(), np.zeros(3))

    @staticmethod
    def from_parts(rotation: Rotation3 | None = None, translation=None) -> "Transform":
        return Transform(
            rotation if rotation is not None else Rotation3.identity(),
            np.zeros(3) if translation is None else translation,
        )

    def compose(self, other: "Transform") -> "Transform":
        """Applies `other` first, then `self`."""
        return Transform(
            self.rotation.compose(other.rotation),
            self.rotation.apply(other.translation) + self.translation,
        )

    def inverse(self) -> "Transform":
        rinv = self.rotation.inverse()
        return Transform(rinv, -rinv.apply(self.translation))

    def apply(self, p) -> np.ndarray:
        """Transform a 3-vector or an (n, 3) stack of points."""
        return self.rotation.apply(p) + self.translation

    def yaw(self) -> float:
        """Heading of the rotated x axis, projected on the world xy plane."""
        m = self.rotation.matrix()
        return math.atan2(m[1, 0], m[0, 0])


def compose(a: Transform, b: Transform) -> Transform:
    """Composition a . b: applies b, then a."""
    return a.compose(b)


def apply(t: Transform, p) -> np.ndarray:
    return t.apply(p)


@dataclass(frozen=True)
class LocomotionCommand:
    """Planar base command: forward/lateral velocity, per-step yaw increment,
    and per-step torso height adjustment."""

    v_x: float
    v_y: float
    delta_theta: float
    h: float

    def __post_init__(self) -> None:
        for name in ("v_x", "v_y", "delta_theta", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def check_limits(self, max_speed: float, max_height: float) -> None:
        if abs(self.v_x) > max_speed or abs(self.v_y) > max_speed:
            raise ValueError("planar velocity exceeds configured max speed")
        if abs(self.h) > max_height:
            raise ValueError("height adjustment exceeds configured range")


def map_controller_to_target(
    hmd_in_world: Transform, controller_in_hmd: Transform, calib: Transform
) -> Transform:
    """Map a handheld-controller pose (expressed in the headset frame) to a
    world-frame end-effector target through a fixed calibration alignment."""
    return hmd_in_world.compose(calib.compose(controller_in_hmd))


def integrate_base(pose: Transform, u: LocomotionCommand, dt: float) -> Transform:
    """Advance a base pose by one command tick.

    Planar velocities act in the base's current yaw frame and scale with dt;
    the yaw and height terms are per-step increments applied once per call.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    yaw = pose.yaw()
    c, s = math.cos(yaw), math.sin(yaw)
    step = np.array(
        [
            (c * u.v_x - s * u.v_y) * dt,
            (s * u.v_x + c * u.v_y) * dt,
            u.h,
        ]
    )
    return Transform(
        Rotation3.from_yaw(u.delta_theta).compose(pose.rotation),
        pose.translation + step,
    )
