"""Spin-1/2 rotation algebra on unit quaternions.

A rotation is stored as a unit quaternion ``q = (w, x, y, z)`` which
maps one-to-one onto the SU(2) element ``U = w*1 - i (x, y, z) . sigma``.
Keeping the SU(2) sign (rather than only the SO(3) rotation) matters for
the sensor-conditioned propagators, whose relative sign is observable.

The vectorised helpers (``qmul``, ``qrotate``, ``axis_angle_quat``) act on
arrays with a trailing axis of length 4 (quaternions) or 3 (vectors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * np.pi
E_X = np.array([1.0, 0.0, 0.0])
E_Y = np.array([0.0, 1.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])


def axis_angle_quat(axis, angle):
    """Quaternion array for rotations by ``angle`` about ``axis``.

    Broadcasts over leading dimensions. No normalisation or range
    reduction is applied, so the SU(2) sign follows ``angle`` exactly.
    """
    axis = np.asarray(axis, dtype=float)
    half = 0.5 * np.asarray(angle, dtype=float)
    s = np.sin(half)[..., None]
    return np.concatenate([np.cos(half)[..., None], s * axis], axis=-1)


def qmul(a, b):
    """Hamilton product ``a * b`` (``b`` acts first)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qrotate(q, v):
    """Rotate vectors ``v`` by quaternions ``q`` (broadcasting)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_to_su2(q):
    """2x2 complex matrices ``w*1 - i v.sigma`` for quaternion array ``q``."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = w - 1j * z
    out[..., 0, 1] = -y - 1j * x
    out[..., 1, 0] = y - 1j * x
    out[..., 1, 1] = w + 1j * z
    return out


def su2_decompose(q, tol: float = 1e-12):
    """Axis and half-angle of SU(2) quaternions, sign-faithful.

    Returns ``(axis, half)`` with ``half = atan2(|v|, w)`` in [0, pi] so that
    ``q = (cos half, sin half * axis)``. Where ``|v| <= tol`` the axis is e_z.
    """
    q = np.asarray(q, dtype=float)
    v = q[..., 1:]
    nv = np.linalg.norm(v, axis=-1)
    half = np.arctan2(nv, q[..., 0])
    safe = np.where(nv > tol, nv, 1.0)
    axis = np.where((nv > tol)[..., None], v / safe[..., None], E_Z)
    return axis, half


@dataclass(frozen=True)
class SpinRotation:
    """Unit quaternion ``(w, x, y, z)`` representing an SU(2) rotation."""

    w: float
    x: float
    y: float
    z: float

    @classmethod
    def from_quat(cls, q) -> "SpinRotation":
        q = np.asarray(q, dtype=float)
        q = q / np.linalg.norm(q)
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @classmethod
    def identity(cls) -> "SpinRotation":
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def quat(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def angle(self) -> float:
        """Rotation angle in [0, 2*pi] (2*pi only for the -1 element)."""
        return float(2.0 * np.arctan2(np.linalg.norm(self.quat[1:]), self.w))

    @property
    def axis(self) -> np.ndarray:
        a, _ = su2_decompose(self.quat)
        return a

    def matrix(self) -> np.ndarray:
        """The 2x2 SU(2) matrix."""
        return quat_to_su2(self.quat)

    def apply(self, v):
        return apply(self, v)


def wrap_2pi(x):
    """Reduce angles to [0, 2pi); tiny negatives that round up to 2pi map to 0."""
    r = np.mod(x, TWO_PI)
    if np.ndim(r):
        return np.where(r >= TWO_PI, 0.0, r)
    return 0.0 if r >= TWO_PI else float(r)


def rotation_from_axis_angle(axis, angle: float) -> SpinRotation:
    """Rotation by ``angle`` (radians) about the unit vector ``axis``.

    The angle is reduced mod 2*pi before conversion.

    Raises
    ------
    DomainError
        If ``|axis|`` differs from 1 by more than 1e-9.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise DomainError(f"rotation axis must be a unit 3-vector, got {axis!r}")
    angle = wrap_2pi(angle)
    return SpinRotation.from_quat(axis_angle_quat(axis / np.linalg.norm(axis), angle))


def compose(a: SpinRotation, b: SpinRotation) -> SpinRotation:
    """Rotation equivalent to applying ``b`` first, then ``a``."""
    return SpinRotation.from_quat(qmul(a.quat, b.quat))


def inverse(r: SpinRotation) -> SpinRotation:
    return SpinRotation(r.w, -r.x, -r.y, -r.z)


def apply(r: SpinRotation, v):
    """Rotate a Bloch vector (or an ``(n, 3)`` array of them)."""
    return qrotate(r.quat, np.asarray(v, dtype=float))


def decompose(r: SpinRotation, tol: float = 1e-12):
    """Axis and Bloch-sphere angle in [0, pi] of a rotation.

    The rotation ``(n, a)`` and ``(-n, 2*pi - a)`` act identically on Bloch
    vectors; the branch with ``a <= pi`` is returned. Degenerate cases use
    fixed conventions: angle 0 gives axis e_z, angle pi gives the axis whose
    first nonzero component is positive.
    """
    q = r.quat
    if q[0] < 0.0:
        q = -q
    nv = np.linalg.norm(q[1:])
    if nv <= tol:
        return E_Z.copy(), 0.0
    angle = float(2.0 * np.arctan2(nv, q[0]))
    axis = q[1:] / nv
    if abs(q[0]) <= tol:
        angle = np.pi
        nz = axis[np.abs(axis) > tol]
        if nz.size and nz[0] < 0:
            axis = -axis
    return axis, angle
