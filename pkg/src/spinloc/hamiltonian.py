"""Conditional nuclear precession and NV resonance model.

Nuclear quantities are in kHz, electronic ones in MHz, fields in mT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAxisError, DomainError, InputError
from .spincore import E_Z


@dataclass(frozen=True)
class SensorConfig:
    """Physical constants of the sensor and the bias field.

    Attributes
    ----------
    D : zero-field splitting, MHz
    gamma_e : electron gyromagnetic ratio, MHz/mT
    gamma_c : 13C gyromagnetic ratio, kHz/mT
    B0 : bias field along the NV axis, mT
    n14_offset : optional additive shift of electronic transitions, MHz.
        Kept for bookkeeping only; no physics routine reads it.
    """

    D: float = 2870.4
    gamma_e: float = 28.0
    gamma_c: float = 10.705
    B0: float = 36.2
    nv_axis: tuple = (0.0, 0.0, 1.0)
    n14_offset: float = 0.0

    def __post_init__(self):
        if not (self.D > 0 and self.gamma_e > 0 and self.gamma_c > 0 and self.B0 >= 0):
            raise InputError("SensorConfig requires D, gamma_e, gamma_c > 0 and B0 >= 0")

    @property
    def f0(self) -> float:
        """Bare nuclear Larmor frequency, kHz."""
        return self.gamma_c * self.B0


@dataclass(frozen=True)
class HyperfineParams:
    """Secular hyperfine components in kHz."""

    a_parallel: float
    a_perp: float

    def __post_init__(self):
        if self.a_perp < 0:
            raise InputError(f"a_perp must be >= 0, got {self.a_perp}")


@dataclass(frozen=True)
class ConditionalPrecession:
    """Nuclear precession conditioned on the sensor state.

    ``f0`` about e_z for m_S = 0 and ``f1`` about ``e_p`` for m_S = -1.
    """

    f0: float
    f1: float
    e_p: np.ndarray
    theta_p: float
    e_perp: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    @property
    def f_target(self) -> float:
        """Mean of the two conditional frequencies, kHz."""
        return 0.5 * (self.f0 + self.f1)


def e_perp_direction(theta: float, phi: float) -> np.ndarray:
    """Direction of the transverse hyperfine field for a site at (theta, phi).

    The upper hemisphere (theta < pi/2) gives ``(cos phi, sin phi, 0)``; the
    lower one, including the equator, gives the opposite vector.
    """
    if not (0.0 <= theta <= np.pi):
        raise DomainError(f"theta must lie in [0, pi], got {theta}")
    sign = 1.0 if theta < np.pi / 2 else -1.0
    return sign * np.array([np.cos(phi), np.sin(phi), 0.0])


def precession_from_frequencies(f0: float, a_parallel: float, a_perp: float, e_perp) -> ConditionalPrecession:
    """Same as :func:`conditional_precession` with ``f0`` given directly."""
    lon = f0 + a_parallel
    if lon == 0.0 and a_perp == 0.0:
        raise DegenerateAxisError("f0 + a_parallel and a_perp both vanish; precession axis undefined")
    e_perp = np.asarray(e_perp, dtype=float)
    f1 = float(np.hypot(lon, a_perp))
    theta_p = float(np.arctan2(a_perp, lon))
    e_p = np.cos(theta_p) * E_Z + np.sin(theta_p) * e_perp
    return ConditionalPrecession(float(f0), f1, e_p, theta_p, e_perp)


def conditional_precession(cfg: SensorConfig, hf: HyperfineParams, e_perp) -> ConditionalPrecession:
    """Precession frequencies and axes from the sensor config and hyperfine.

    ``theta_p = atan2(a_perp, f0 + a_parallel)`` so strong negative coupling
    yields a tilt beyond pi/2 instead of a negative frequency.
    """
    return precession_from_frequencies(cfg.f0, hf.a_parallel, hf.a_perp, e_perp)


# spin-1 operators
_SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float) / np.sqrt(2.0)
_SZ = np.diag([1.0, 0.0, -1.0])


def nv_resonances_batch(D, gamma_e, b_par, b_perp, offset: float = 0.0):
    """Vectorised resonances for arrays of parallel/transverse field, MHz.

    The transverse field is put along the NV-frame x axis, which is
    sufficient because the spectrum is invariant under rotations about the
    NV axis.
    """
    b_par, b_perp = np.broadcast_arrays(np.asarray(b_par, float), np.asarray(b_perp, float))
    D = np.broadcast_to(np.asarray(D, float), b_par.shape)
    H = (
        D[..., None, None] * (_SZ @ _SZ)
        + gamma_e * b_par[..., None, None] * _SZ
        + gamma_e * b_perp[..., None, None] * _SX
    )
    vals, vecs = np.linalg.eigh(H)
    # ground level = the eigenvector with the largest m_S = 0 weight
    ground = np.argmax(np.abs(vecs[..., 1, :]), axis=-1)
    e0 = np.take_along_axis(vals, ground[..., None], axis=-1)
    mask = np.arange(3) != ground[..., None]
    others = vals[mask].reshape(vals.shape[:-1] + (2,)) - e0
    others = np.sort(others, axis=-1) + offset
    return others[..., 0], others[..., 1]


def nv_resonances(D: float, gamma_e: float, B_vec, nv_axis=(0.0, 0.0, 1.0), offset: float = 0.0):
    """Transition frequencies out of the m_S = 0-like level, MHz, ascending.

    Exact diagonalisation of ``D Sz^2 + gamma_e B.S`` in the NV frame.
    """
    if D <= 0:
        raise InputError("D must be positive")
    B = np.asarray(B_vec, dtype=float)
    z = np.asarray(nv_axis, dtype=float)
    z = z / np.linalg.norm(z)
    b_par = float(B @ z)
    b_perp = float(np.linalg.norm(B - b_par * z))
    fm, fp = nv_resonances_batch(D, gamma_e, b_par, b_perp, offset)
    return float(fm), float(fp)
