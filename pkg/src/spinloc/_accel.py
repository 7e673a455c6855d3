"""Bloch-equation RK4 kernels with a numba backend and a numpy fallback.

The right-hand side is

    dv/ds = 2 pi v x (f_p e_p + B(s) e_rf),
    B(s) = 2 b cos(2 pi f_rf s + phase)   for s_on <= s <= s_off, else 0,

with frequencies in MHz and times in us. With ``rwa`` set, only the
co-rotating transverse part of the drive is kept.

The numba backend is used when numba imports and the environment variable
``SPINLOC_BACKEND`` is not ``numpy``. Both backends take batched inputs
(one row per trajectory) and return identical results to rounding.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # avoid probing an outdated TBB; workqueue ships with numba
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

TWO_PI = 2.0 * np.pi


def _backend_name() -> str:
    want = os.environ.get("SPINLOC_BACKEND", "numba").strip().lower()
    if want == "numpy" or not HAS_NUMBA:
        return "numpy"
    return "numba"


# ---------------------------------------------------------------------------
# numpy implementation (vectorised across trajectories)

def _field_np(s, ep, fp, erf, amp, frf, phase, s_on, s_off, rwa, u, w):
    om = fp[:, None] * ep
    if s_on <= s <= s_off:
        if rwa:
            arg = TWO_PI * frf * s + phase
            bt = amp[:, None] * (u * np.cos(arg)[:, None] - w * np.sin(arg)[:, None])
            om = om + bt
        else:
            b = 2.0 * amp * np.cos(TWO_PI * frf * s + phase)
            om = om + b[:, None] * erf
    return om


def _rhs_np(s, v, *args):
    return TWO_PI * np.cross(v, _field_np(s, *args))


def bloch_final_numpy(v0, ep, fp, erf, amp, frf, phase, s0, h, n_steps, s_on, s_off, rwa=False,
                      record=False):
    """numpy backend; with ``record`` returns all ``n_steps + 1`` states."""
    v = np.array(v0, dtype=float, copy=True)
    traj = [v.copy()] if record else None
    u, w = _rwa_basis(ep, erf)
    args = (ep, fp, erf, amp, frf, phase, s_on, s_off, rwa, u, w)
    for i in range(n_steps):
        s = s0 + i * h
        k1 = _rhs_np(s, v, *args)
        k2 = _rhs_np(s + 0.5 * h, v + 0.5 * h * k1, *args)
        k3 = _rhs_np(s + 0.5 * h, v + 0.5 * h * k2, *args)
        k4 = _rhs_np(s + h, v + h * k3, *args)
        nv = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norm0 = np.linalg.norm(v, axis=1)
        norm1 = np.linalg.norm(nv, axis=1)
        v = nv * np.where(norm1 > 0, norm0 / np.where(norm1 > 0, norm1, 1.0), 1.0)[:, None]
        if record:
            traj.append(v.copy())
    return np.stack(traj) if record else v


def _rwa_basis(ep, erf):
    """Co-rotating drive basis ``(e_t, e_p x e_t)``.

    ``e_t`` is the part of ``e_rf`` transverse to ``e_p``. The linear drive
    ``2b cos(x) e_t`` is the sum of two counter-rotating fields of amplitude
    ``b``; precession is clockwise about ``e_p``, so the co-rotating one is
    ``b (e_t cos x - (e_p x e_t) sin x)``.
    """
    et = erf - np.sum(erf * ep, axis=1, keepdims=True) * ep
    return et, np.cross(ep, et)


# ---------------------------------------------------------------------------
# numba implementation (one loop per trajectory)

if HAS_NUMBA:

    @numba.njit(cache=True, inline="always")
    def _omega_nb(s, fx, fy, fz, ex, ey, ez, ux, uy, uz, wx, wy, wz, amp, wrf, phase, s_on, s_off, rwa):
        if s_on <= s <= s_off:
            arg = wrf * s + phase
            if rwa:
                c = amp * np.cos(arg)
                d = amp * np.sin(arg)
                return fx + c * ux - d * wx, fy + c * uy - d * wy, fz + c * uz - d * wz
            b = 2.0 * amp * np.cos(arg)
            return fx + b * ex, fy + b * ey, fz + b * ez
        return fx, fy, fz

    @numba.njit(cache=True, inline="always")
    def _cross_nb(vx, vy, vz, ox, oy, oz):
        return TWO_PI * (vy * oz - vz * oy), TWO_PI * (vz * ox - vx * oz), TWO_PI * (vx * oy - vy * ox)

    @numba.njit(cache=True, parallel=True)
    def _bloch_final_nb(v0, ep, fp, erf, amp, frf, phase, s0, h, n_steps, s_on, s_off, rwa, u, w):
        m = v0.shape[0]
        out = np.empty_like(v0)
        for j in numba.prange(m):
            vx, vy, vz = v0[j, 0], v0[j, 1], v0[j, 2]
            fx, fy, fz = fp[j] * ep[j, 0], fp[j] * ep[j, 1], fp[j] * ep[j, 2]
            ex, ey, ez = erf[j, 0], erf[j, 1], erf[j, 2]
            ux, uy, uz = u[j, 0], u[j, 1], u[j, 2]
            wx, wy, wz = w[j, 0], w[j, 1], w[j, 2]
            a, wrf, ph = amp[j], TWO_PI * frf[j], phase[j]
            for i in range(n_steps):
                s = s0 + i * h
                ox, oy, oz = _omega_nb(s, fx, fy, fz, ex, ey, ez, ux, uy, uz, wx, wy, wz, a, wrf, ph, s_on, s_off, rwa)
                k1x, k1y, k1z = _cross_nb(vx, vy, vz, ox, oy, oz)
                ox, oy, oz = _omega_nb(s + 0.5 * h, fx, fy, fz, ex, ey, ez, ux, uy, uz, wx, wy, wz, a, wrf, ph,
                                       s_on, s_off, rwa)
                k2x, k2y, k2z = _cross_nb(vx + 0.5 * h * k1x, vy + 0.5 * h * k1y, vz + 0.5 * h * k1z, ox, oy, oz)
                k3x, k3y, k3z = _cross_nb(vx + 0.5 * h * k2x, vy + 0.5 * h * k2y, vz + 0.5 * h * k2z, ox, oy, oz)
                ox, oy, oz = _omega_nb(s + h, fx, fy, fz, ex, ey, ez, ux, uy, uz, wx, wy, wz, a, wrf, ph,
                                       s_on, s_off, rwa)
                k4x, k4y, k4z = _cross_nb(vx + h * k3x, vy + h * k3y, vz + h * k3z, ox, oy, oz)
                n0 = np.sqrt(vx * vx + vy * vy + vz * vz)
                nx = vx + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                ny = vy + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                nz = vz + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
                n1 = np.sqrt(nx * nx + ny * ny + nz * nz)
                scale = n0 / n1 if n1 > 0.0 else 1.0
                vx, vy, vz = nx * scale, ny * scale, nz * scale
            out[j, 0], out[j, 1], out[j, 2] = vx, vy, vz
        return out


def bloch_final_numba(v0, ep, fp, erf, amp, frf, phase, s0, h, n_steps, s_on, s_off, rwa=False):
    u, w = _rwa_basis(ep, erf)
    return _bloch_final_nb(
        np.ascontiguousarray(v0, dtype=float), np.ascontiguousarray(ep, dtype=float),
        np.ascontiguousarray(fp, dtype=float), np.ascontiguousarray(erf, dtype=float),
        np.ascontiguousarray(amp, dtype=float), np.ascontiguousarray(frf, dtype=float),
        np.ascontiguousarray(phase, dtype=float), float(s0), float(h), int(n_steps),
        float(s_on), float(s_off), bool(rwa), np.ascontiguousarray(u), np.ascontiguousarray(w),
    )


def bloch_final(*args, backend: str | None = None, **kwargs):
    """Integrate a batch of trajectories; returns final vectors ``(M, 3)``.

    Arguments (all per trajectory unless noted): ``v0 (M,3)``, ``ep (M,3)``,
    ``fp (M,)`` MHz, ``erf (M,3)``, ``amp (M,)`` MHz, ``frf (M,)`` MHz,
    ``phase (M,)`` rad, then scalars ``s0``, ``h``, ``n_steps``, ``s_on``,
    ``s_off`` in us, and ``rwa``.
    """
    name = backend or _backend_name()
    if name == "numba" and HAS_NUMBA:
        return bloch_final_numba(*args, **kwargs)
    return bloch_final_numpy(*args, **kwargs)
