"""Coil-field vector magnetometry and RF delay calibration.

Field fit units: MHz, mT, radians in the lab frame. Delay calibration
units: us, kHz, mT.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import InputError, UnidentifiableError
from .hamiltonian import nv_resonances_batch
from .lattice import cartesian_of, crystal_to_lab
from .spincore import wrap_2pi

TWO_PI = 2 * np.pi
KHZ_US = 1e-3


def nv_axes_lab() -> np.ndarray:
    """The four NV orientations <111> as unit vectors in the lab frame."""
    c = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3.0)
    return crystal_to_lab(c)


@dataclass(frozen=True)
class FieldFit:
    d: float
    b_mag: float
    theta_lab: float
    phi_lab: float
    residual_rms: float

    @property
    def b_vec(self) -> np.ndarray:
        return self.b_mag * cartesian_of(1.0, self.theta_lab, self.phi_lab)


def _forward(params, axes, gamma_e):
    d, b, th, ph = params
    bvec = b * cartesian_of(1.0, th, ph)
    par = axes @ bvec
    perp = np.sqrt(np.clip(b * b - par * par, 0.0, None))
    fm, fp = nv_resonances_batch(d, gamma_e, par, perp)
    return np.concatenate([fm, fp])


def parse_observations(text: str, source: str = "<string>"):
    """Rows ``axis_x,axis_y,axis_z,f_minus_mhz,f_plus_mhz`` (header required)."""
    header = ("axis_x", "axis_y", "axis_z", "f_minus_mhz", "f_plus_mhz")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows or tuple(c.strip() for c in rows[0]) != header:
        raise InputError(f"{source}: expected header {','.join(header)}")
    out = []
    for line, row in enumerate(rows[1:], start=2):
        try:
            vals = [float(x) for x in row]
        except ValueError as exc:
            raise InputError(f"{source}:{line}: {exc}") from None
        if len(vals) != 5:
            raise InputError(f"{source}:{line}: expected 5 fields")
        out.append((np.array(vals[:3]), vals[3], vals[4]))
    return out


def fit_field(observations, gamma_e: float = 28.0, grid_step: float = np.radians(1.0), n_refine: int = 5) -> FieldFit:
    """Fit zero-field splitting and field vector to NV resonance pairs.

    A 1-degree grid over the upper hemisphere (the field sign is not
    observable) solves, per direction, for ``D`` and ``|B|`` from the linear
    model ``(f+ + f-)/2 = D`` and ``(f+ - f-)/2 = gamma_e |B| |cos a_i|``.
    The best grid directions are refined with a nonlinear least-squares fit
    on the exact resonance model.

    Parameters
    ----------
    observations : list of (axis, f_minus, f_plus)
        ``axis`` is a lab-frame unit vector; frequencies in MHz.

    Raises
    ------
    UnidentifiableError
        If fewer than two distinct axes are present.
    """
    axes = np.array([np.asarray(o[0], float) / np.linalg.norm(o[0]) for o in observations])
    fm = np.array([o[1] for o in observations], dtype=float)
    fp = np.array([o[2] for o in observations], dtype=float)
    distinct = []
    for a in axes:
        if not any(abs(abs(a @ b) - 1) < 1e-6 for b in distinct):
            distinct.append(a)
    if len(distinct) < 2:
        raise UnidentifiableError("field fit needs observations on at least two NV axes")
    data = np.concatenate([fm, fp])
    half = 0.5 * (fp - fm)
    if np.max(np.abs(half)) < 1e-9:
        d = float(np.mean(data))
        return FieldFit(d, 0.0, 0.0, 0.0, float(np.sqrt(np.mean((data - d) ** 2))))

    th = np.arange(0.0, np.pi / 2 + 1e-12, grid_step)
    ph = np.arange(0.0, TWO_PI, grid_step)
    T, P = np.meshgrid(th, ph, indexing="ij")
    dirs = cartesian_of(1.0, T, P).reshape(-1, 3)
    c = np.abs(dirs @ axes.T)
    b = (c @ half) / (gamma_e * np.sum(c * c, axis=1))
    d = np.mean(0.5 * (fp + fm))
    cost = np.sum((half[None, :] - gamma_e * b[:, None] * c) ** 2, axis=1)
    best = np.argsort(cost)[:n_refine]

    fits = []
    for k in best:
        t0, p0 = np.unravel_index(k, T.shape)
        x0 = [d, b[k], T[t0, p0], P[t0, p0]]
        sol = least_squares(lambda x: _forward(x, axes, gamma_e) - data, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14,
                            x_scale=[1.0, 0.01, 0.01, 0.01])
        fits.append(sol)
    sol = min(fits, key=lambda s: s.cost)
    dd, bb, tt, pp = sol.x
    if bb < 0:
        bb, tt, pp = -bb, np.pi - tt, pp + np.pi
    vec = cartesian_of(1.0, tt, pp)
    if vec[2] < 0:
        vec = -vec
    _, tt, pp = (np.linalg.norm(vec), np.arccos(np.clip(vec[2], -1, 1)), wrap_2pi(np.arctan2(vec[1], vec[0])))
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    return FieldFit(float(dd), float(bb), float(tt), float(pp), rms)


# ---------------------------------------------------------------------------
# delay calibration

@dataclass(frozen=True)
class SensingWindow:
    """CP sensing window of ``n_pulses`` pi pulses spaced by ``tau`` (us).

    The modulation ``y(t)`` is +1 on ``[0, tau/2)``, then alternates sign at
    ``tau/2 + k tau`` and ends at ``n_pulses tau``.
    """

    tau: float
    n_pulses: int = 4

    def __post_init__(self):
        if not self.tau > 0 or self.n_pulses < 1:
            raise InputError("window needs tau > 0 and n_pulses >= 1")

    def edges(self) -> np.ndarray:
        inner = self.tau * (0.5 + np.arange(self.n_pulses))
        return np.concatenate([[0.0], inner, [self.n_pulses * self.tau]])

    def signs(self) -> np.ndarray:
        return np.array([(-1.0) ** k for k in range(self.n_pulses + 1)])

    def y(self, t):
        """Modulation function sampled at ``t`` (window starting at 0)."""
        t = np.asarray(t, dtype=float)
        e = self.edges()
        k = np.searchsorted(e, t, side="right") - 1
        inside = (t >= 0) & (t < e[-1])
        return np.where(inside, self.signs()[np.clip(k, 0, self.n_pulses)], 0.0)


@dataclass(frozen=True)
class CosineBurst:
    """``W(t) = V_pp cos(2 pi f (t - t_start) + phase)`` on ``[t_start, t_start + duration]``.

    Amplitudes enter only through ``W / V_pp``, so ``v_pp`` is a nominal scale.
    """

    frequency: float
    duration: float
    t_start: float = 0.0
    phase: float = 0.0
    v_pp: float = 1.0


def _cos_integral(w, phase, a, b):
    """Integral of ``cos(w t + phase)`` over ``[a, b]``."""
    return (np.sin(w * b + phase) - np.sin(w * a + phase)) / w


def accumulated_phase(window: SensingWindow, waveform: CosineBurst, t_delay, t_wait, b_rf: float,
                      gamma_e: float = 28.0):
    """Phase ``2 pi gamma_e b_rf / V_pp * integral W(t - t_delay) y(t - t_wait) dt`` in radians.

    The integral is evaluated exactly segment by segment. Broadcasts over
    ``t_delay`` and ``t_wait``.
    """
    t_delay, t_wait = np.broadcast_arrays(np.asarray(t_delay, float), np.asarray(t_wait, float))
    w = TWO_PI * waveform.frequency * KHZ_US
    start = waveform.t_start + t_delay
    stop = start + waveform.duration
    # cos(w (t - start) + phase) = cos(w t + phase - w start)
    ph = waveform.phase - w * start
    total = np.zeros(t_delay.shape)
    e = window.edges()
    for k, sgn in enumerate(window.signs()):
        a = np.maximum(t_wait + e[k], start)
        b = np.minimum(t_wait + e[k + 1], stop)
        ok = b > a
        seg = np.where(ok, _cos_integral(w, ph, np.where(ok, a, 0.0), np.where(ok, b, 0.0)), 0.0)
        total = total + sgn * seg
    out = TWO_PI * gamma_e * b_rf * total
    return float(out) if out.ndim == 0 else out


def p_y_from_phase(phi):
    return 0.5 * (1.0 - np.sin(phi))


def parse_scan(text: str, source: str = "<string>"):
    """Rows ``t_wait_us,p_y`` (header required)."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows or tuple(c.strip() for c in rows[0]) != ("t_wait_us", "p_y"):
        raise InputError(f"{source}: expected header t_wait_us,p_y")
    out = []
    for line, row in enumerate(rows[1:], start=2):
        try:
            out.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError) as exc:
            raise InputError(f"{source}:{line}: {exc}") from None
    return out


def estimate_delay(scan, window: SensingWindow, waveform: CosineBurst, gamma_e: float = 28.0,
                   delay_bounds=(-5.0, 5.0)):
    """Fit the RF delay (and amplitude) to a ``P_Y(t_wait)`` scan.

    Grid search over ``(t_delay, b_rf)`` followed by nonlinear least
    squares. ``stderr`` comes from the Jacobian at the optimum scaled by the
    residual variance.

    Returns
    -------
    (t_delay, stderr) in us

    Raises
    ------
    UnidentifiableError
        If the scan shows no signal.
    """
    tw = np.array([s[0] for s in scan], dtype=float)
    py = np.array([s[1] for s in scan], dtype=float)
    if tw.size < 4:
        raise InputError("scan needs at least 4 points")
    if np.ptp(py) < 1e-9:
        raise UnidentifiableError("flat scan: no RF signal to locate")

    def model(x):
        return p_y_from_phase(accumulated_phase(window, waveform, x[0], tw, x[1], gamma_e))

    step = min(window.tau, 1.0 / (waveform.frequency * KHZ_US)) / 20.0
    delays = np.arange(delay_bounds[0], delay_bounds[1] + step / 2, step)
    best = (np.inf, 0.0, 0.0)
    for dly in delays:
        ph_unit = accumulated_phase(window, waveform, dly, tw, 1.0, gamma_e)
        peak = np.max(np.abs(ph_unit))
        if peak == 0:
            continue
        # amplitudes spanning accumulated phases up to +-2 pi
        bs = np.linspace(-TWO_PI, TWO_PI, 161) / peak
        pred = p_y_from_phase(np.outer(bs, ph_unit))
        cost = np.sum((pred - py) ** 2, axis=1)
        j = int(np.argmin(cost))
        if cost[j] < best[0]:
            best = (cost[j], dly, bs[j])
    sol = least_squares(lambda x: model(x) - py, [best[1], best[2]], xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        x_scale=[0.01, 0.001])
    dof = max(tw.size - 2, 1)
    s2 = float(sol.fun @ sol.fun) / dof
    try:
        cov = np.linalg.inv(sol.jac.T @ sol.jac) * s2
        err = float(np.sqrt(max(cov[0, 0], 0.0)))
    except np.linalg.LinAlgError:
        err = float("inf")
    return float(sol.x[0]), err
