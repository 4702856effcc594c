"""Collision-sphere kinematics for point robots and planar serial arms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class BodySphere:
    link: int
    offset: float
    radius: float


@dataclass(frozen=True)
class RobotModel:
    """``kind`` is ``"point"`` or ``"planar_arm"``.

    ``base_pose`` is ``(x, y, heading)``; the heading is ignored for point robots.
    """

    kind: str
    body_spheres: Tuple[BodySphere, ...]
    link_lengths: Tuple[float, ...] = ()
    base_pose: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        spheres = tuple(
            s if isinstance(s, BodySphere) else BodySphere(*s) for s in self.body_spheres
        )
        # stacking order of obstacle residuals: link index, then offset
        spheres = tuple(sorted(spheres, key=lambda s: (s.link, s.offset)))
        object.__setattr__(self, "body_spheres", spheres)
        object.__setattr__(self, "link_lengths", tuple(float(l) for l in self.link_lengths))
        object.__setattr__(self, "base_pose", tuple(float(b) for b in self.base_pose))
        if not spheres:
            raise InvalidArgumentError("robot needs at least one body sphere")
        if any(not s.radius > 0 for s in spheres):
            raise InvalidArgumentError("sphere radii must be positive")
        if self.kind == "point":
            if len(spheres) != 1 or spheres[0].link != 0 or spheres[0].offset != 0:
                raise InvalidArgumentError("point robot has exactly one sphere on link 0 at offset 0")
        elif self.kind == "planar_arm":
            if not self.link_lengths or any(not l > 0 for l in self.link_lengths):
                raise InvalidArgumentError("planar arm link lengths must be positive")
            for s in spheres:
                if not 0 <= s.link < len(self.link_lengths):
                    raise InvalidArgumentError(f"sphere on unknown link {s.link}")
                if not 0 <= s.offset <= self.link_lengths[s.link]:
                    raise InvalidArgumentError(
                        f"sphere offset {s.offset} outside link {s.link} of length "
                        f"{self.link_lengths[s.link]}"
                    )
        else:
            raise InvalidArgumentError(f"unknown robot kind {self.kind!r}")

    @classmethod
    def point(cls, radius, base=(0.0, 0.0)):
        return cls("point", (BodySphere(0, 0.0, radius),), (), (base[0], base[1], 0.0))

    @property
    def d_cfg(self) -> int:
        return 2 if self.kind == "point" else len(self.link_lengths)

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.radius for s in self.body_spheres])


def sphere_centers(model: RobotModel, q) -> np.ndarray:
    """Sphere centers only, shape ``(n_spheres, 2)``; accepts a batch ``(..., d_cfg)``."""
    q = np.asarray(q, dtype=float)
    base = np.array(model.base_pose[:2])
    if model.kind == "point":
        return (base + q)[..., None, :]
    angles = model.base_pose[2] + np.cumsum(q, axis=-1)
    cos, sin = np.cos(angles), np.sin(angles)
    lengths = np.array(model.link_lengths)
    zero = np.zeros(q.shape[:-1] + (1,))
    jx = base[0] + np.concatenate([zero, np.cumsum(lengths * cos, axis=-1)], axis=-1)
    jy = base[1] + np.concatenate([zero, np.cumsum(lengths * sin, axis=-1)], axis=-1)
    centers = []
    for s in model.body_spheres:
        k = s.link
        centers.append(
            np.stack([jx[..., k] + s.offset * cos[..., k], jy[..., k] + s.offset * sin[..., k]], axis=-1)
        )
    return np.stack(centers, axis=-2)


def joint_positions(model: RobotModel, q) -> np.ndarray:
    """Base and link end points of an arm, ``(n_links + 1) x 2``; a point robot gives its centre."""
    q = np.asarray(q, dtype=float).ravel()
    if model.kind == "point":
        return (np.array(model.base_pose[:2]) + q)[None]
    angles = model.base_pose[2] + np.cumsum(q)
    steps = np.asarray(model.link_lengths)[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return np.vstack([np.array(model.base_pose[:2]), np.array(model.base_pose[:2]) + np.cumsum(steps, axis=0)])


def forward_kinematics(model: RobotModel, q):
    """List of ``(center, jacobian)`` per body sphere; jacobian is ``2 x d_cfg``."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size != model.d_cfg:
        raise InvalidArgumentError(f"expected {model.d_cfg} joint values, got {q.size}")
    if model.kind == "point":
        base = np.array(model.base_pose[:2])
        return [(base + q, np.eye(2))]

    angles = model.base_pose[2] + np.cumsum(q)
    joints = [np.array(model.base_pose[:2])]
    for length, a in zip(model.link_lengths, angles):
        joints.append(joints[-1] + length * np.array([np.cos(a), np.sin(a)]))
    out = []
    for s in model.body_spheres:
        a = angles[s.link]
        center = joints[s.link] + s.offset * np.array([np.cos(a), np.sin(a)])
        jac = np.zeros((2, q.size))
        for m in range(s.link + 1):
            lever = center - joints[m]
            jac[:, m] = (-lever[1], lever[0])
        out.append((center, jac))
    return out


def sphere_jacobians(model: RobotModel, q):
    """Batched ``(centers, jacobians)`` for configurations ``q`` of shape ``(M, d_cfg)``.

    Shapes are ``(M, n_spheres, 2)`` and ``(M, n_spheres, 2, d_cfg)``.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    m, d = q.shape
    if d != model.d_cfg:
        raise InvalidArgumentError(f"expected {model.d_cfg} joint values, got {d}")
    n_s = len(model.body_spheres)
    if model.kind == "point":
        centers = (q + np.array(model.base_pose[:2]))[:, None, :]
        jac = np.broadcast_to(np.eye(2), (m, 1, 2, 2)).copy()
        return centers, jac
    angles = model.base_pose[2] + np.cumsum(q, axis=1)
    cos, sin = np.cos(angles), np.sin(angles)
    lengths = np.array(model.link_lengths)
    joints = np.zeros((m, d + 1, 2))
    joints[:, :, 0] = model.base_pose[0]
    joints[:, :, 1] = model.base_pose[1]
    joints[:, 1:, 0] += np.cumsum(lengths * cos, axis=1)
    joints[:, 1:, 1] += np.cumsum(lengths * sin, axis=1)
    links = np.array([s.link for s in model.body_spheres])
    offsets = np.array([s.offset for s in model.body_spheres])
    centers = joints[:, links, :] + offsets[None, :, None] * np.stack(
        [cos[:, links], sin[:, links]], axis=-1
    )
    lever = centers[:, :, None, :] - joints[:, None, :d, :]  # (M, n_s, d, 2)
    mask = (np.arange(d)[None, :] <= links[:, None]).astype(float)  # (n_s, d)
    jac = np.empty((m, n_s, 2, d))
    jac[:, :, 0, :] = -lever[..., 1] * mask
    jac[:, :, 1, :] = lever[..., 0] * mask
    return centers, jac
