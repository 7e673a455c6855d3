"""Nuclear Bloch-vector dynamics through the azimuth protocol.

Protocol time ``s`` is zero at the end of the RF pi/2 pulse. Before that:
the chirped sensor inversion (its midpoint at ``s = -t2``) switches the
nuclear precession axis from e_z to ``e_p``, the nucleus precesses about
``e_p`` until the RF pulse starts at ``s = -t1``, and the RF drive acts on
``[-t1, 0]``. The azimuth of the Bloch vector at ``s = 0`` is ``phi_n(0)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _accel
from .errors import DomainError, IllConditionedError, InputError, StepTooLargeError
from .hamiltonian import ConditionalPrecession, e_perp_direction
from .spincore import E_Z, axis_angle_quat, qrotate, wrap_2pi

TWO_PI = 2 * np.pi
KHZ_US = 1e-3


def wrap_pi(x):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


@dataclass(frozen=True)
class ProtocolTiming:
    """Protocol timestamps in us.

    ``t1`` is the RF pulse length and ``t2`` the time from the chirp midpoint
    to the end of the RF pulse. With ``f_rf`` given and ``strict`` set,
    ``t1`` must be a whole number of RF periods.
    """

    t0: float
    t1: float
    t2: float
    t_delay: float = 0.0
    f_rf: float | None = None
    strict: bool = False

    def __post_init__(self):
        if not (self.t2 > self.t1 > 0 and self.t0 > 0):
            raise InputError("timing requires t2 > t1 > 0 and t0 > 0")
        if self.strict and self.f_rf:
            periods = self.t1 * self.f_rf * KHZ_US
            if abs(periods - round(periods)) / (self.f_rf * KHZ_US) > 1e-6:
                raise InputError(f"t1 = {self.t1} us is not a whole number of RF periods")

    @classmethod
    def from_rf(cls, f_rf: float, n_periods: int = 22, t0: float = 6.872, chirp_half: float = 1.0,
                trigger: float = 0.2, t_delay: float = 1.088) -> "ProtocolTiming":
        t1 = n_periods / (f_rf * KHZ_US)
        return cls(t0, t1, t1 + chirp_half + trigger + t_delay, t_delay, f_rf, True)


@dataclass(frozen=True)
class RfDrive:
    """Linearly polarised RF field ``2 b cos(2 pi f s + phase) e_rf`` on ``[-t1, 0]``.

    ``amplitude`` is ``b`` in MHz (Bloch-equation units).
    """

    frequency: float
    phase: float
    e_rf: np.ndarray
    t1: float
    amplitude: float

    @classmethod
    def pi_half(cls, frequency: float, phase: float, e_rf, t1: float, e_p) -> "RfDrive":
        """Drive normalised to a pi/2 nutation about the tilted axis ``e_p``."""
        e_rf = np.asarray(e_rf, dtype=float)
        cross = np.linalg.norm(np.cross(e_rf, e_p))
        if cross < 1e-9:
            raise DomainError("RF axis parallel to the precession axis")
        return cls(frequency, phase, e_rf, t1, 1.0 / (4.0 * t1 * cross))

    @property
    def support(self):
        return (-self.t1, 0.0)


def step_bound(f_p: float, f_rf: float) -> float:
    """Largest allowed integrator step, us."""
    return 1.0 / (100.0 * max(abs(f_p), abs(f_rf)) * KHZ_US)


def _steps(span, step):
    n = int(np.ceil((span[1] - span[0]) / step - 1e-9))
    return max(n, 1), (span[1] - span[0]) / max(n, 1)


def integrate_bloch(initial, e_p, f_p: float, drive: RfDrive | None, span, step: float | None = None,
                    rwa: bool = False):
    """Fixed-step RK4 integration of ``dv/ds = 2 pi v x (f_p e_p + B(s) e_rf)``.

    The step is shrunk slightly so that it divides the span evenly; the
    Bloch-vector norm is restored after each step.

    Returns
    -------
    times : (n+1,) array, us
    trajectory : (n+1, 3) array

    Raises
    ------
    StepTooLargeError
        If ``step`` exceeds ``1 / (100 max(f_p, f_rf))``.
    """
    initial = np.asarray(initial, dtype=float)
    if np.linalg.norm(initial) > 1 + 1e-12:
        raise InputError("|initial| must not exceed 1")
    f_rf = drive.frequency if drive else 0.0
    bound = step_bound(f_p, f_rf)
    step = bound / 2 if step is None else step
    if step > bound * (1 + 1e-12):
        raise StepTooLargeError(f"step {step} us exceeds the bound {bound} us")
    n, h = _steps(span, step)
    if drive is None:
        erf, amp, phase, s_on, s_off = np.array([1.0, 0, 0]), 0.0, 0.0, 1.0, 0.0
    else:
        erf, amp, phase = drive.e_rf, drive.amplitude, drive.phase
        s_on, s_off = drive.support
    traj = _accel.bloch_final_numpy(
        initial[None], np.asarray(e_p, float)[None], np.array([f_p * KHZ_US]), np.asarray(erf, float)[None],
        np.array([amp]), np.array([f_rf * KHZ_US]), np.array([phase]), span[0], h, n, s_on, s_off, rwa,
        record=True,
    )
    return span[0] + h * np.arange(n + 1), traj[:, 0, :]


def phi_n_analytic(phi_rf: float, phi_c: float, f_p: float, f_rf: float, t1: float) -> float:
    """High-field azimuth ``-phi_rf + phi_c - pi/2 - 2 pi (f_p - f_rf) t1`` in [0, 2pi)."""
    return float(wrap_2pi(-phi_rf + phi_c - np.pi / 2 - TWO_PI * (f_p - f_rf) * KHZ_US * t1))


def determine_phi(phi_n0: float, phi_0: float, theta: float) -> float:
    """Site azimuth ``phi_n0 + phi_0 (+ pi for theta >= pi/2)`` in [0, 2pi)."""
    if not (0.0 <= theta <= np.pi):
        raise DomainError("theta must lie in [0, pi]")
    return float(wrap_2pi(phi_n0 + phi_0 + (np.pi if theta >= np.pi / 2 else 0.0)))


def _tilted_axis(theta_p, theta, phi):
    return np.cos(theta_p) * E_Z + np.sin(theta_p) * e_perp_direction(theta, phi)


def simulate_phi_n0_batch(phis, phi_rfs, f_ps, timing: ProtocolTiming, theta_p: float, theta: float,
                          e_rf, f_rf: float, variant: str = "PolY", step: float | None = None,
                          rwa: bool = False, backend: str | None = None, return_vectors: bool = False):
    """Vectorised :func:`simulate_phi_n0` over equal-length arrays."""
    phis, phi_rfs, f_ps = np.broadcast_arrays(
        np.atleast_1d(np.asarray(phis, float)), np.atleast_1d(np.asarray(phi_rfs, float)),
        np.atleast_1d(np.asarray(f_ps, float)),
    )
    m = phis.size
    sign = 1.0 if theta < np.pi / 2 else -1.0
    ep = np.empty((m, 3))
    ep[:, 0] = np.sin(theta_p) * sign * np.cos(phis)
    ep[:, 1] = np.sin(theta_p) * sign * np.sin(phis)
    ep[:, 2] = np.cos(theta_p)
    e_rf = np.asarray(e_rf, dtype=float)
    cross = np.linalg.norm(np.cross(e_rf, ep), axis=1)
    if np.any(cross < 1e-9):
        raise DomainError("RF axis parallel to the precession axis")
    amp = 1.0 / (4.0 * timing.t1 * cross)
    z = -1.0 if variant == "PolY" else 1.0
    # precession about e_z before the chirp midpoint leaves +-e_z unchanged;
    # afterwards the nucleus precesses about e_p until the RF starts
    v0 = qrotate(axis_angle_quat(ep, -TWO_PI * f_ps * KHZ_US * (timing.t2 - timing.t1)), np.array([0.0, 0.0, z]))
    bound = step_bound(float(np.max(f_ps)), f_rf)
    step = 1.0 / (200.0 * f_rf * KHZ_US) if step is None else step
    if step > bound * (1 + 1e-12):
        raise StepTooLargeError(f"step {step} us exceeds the bound {bound} us")
    n, h = _steps((-timing.t1, 0.0), step)
    v = _accel.bloch_final(
        v0, ep, f_ps * KHZ_US, np.broadcast_to(e_rf, (m, 3)).copy(), amp, np.full(m, f_rf * KHZ_US), phi_rfs,
        -timing.t1, h, n, -timing.t1, 0.0, rwa, backend=backend,
    )
    if return_vectors:
        return v
    rho = np.hypot(v[:, 0], v[:, 1])
    if np.any(rho < 1e-3):
        raise IllConditionedError("final Bloch vector is nearly along e_z; azimuth undefined")
    return wrap_2pi(np.arctan2(v[:, 1], v[:, 0]))


def simulate_phi_n0(phi: float, phi_rf: float, timing: ProtocolTiming, prec: ConditionalPrecession, e_rf,
                    f_rf: float, f_p: float, *, theta: float, variant: str = "PolY",
                    step: float | None = None, rwa: bool = False) -> float:
    """Simulated nuclear azimuth at the end of the RF pulse.

    Parameters
    ----------
    phi : float
        Site azimuth (rad); with ``theta`` it fixes the transverse direction
        of ``e_p`` while the tilt ``theta_p`` is taken from ``prec``.
    variant : {"PolY", "PolX"}
        Initial nuclear state ``-e_z`` or ``+e_z``.

    Raises
    ------
    IllConditionedError
        If the final transverse component is below 1e-3.
    """
    return float(simulate_phi_n0_batch(phi, phi_rf, f_p, timing, prec.theta_p, theta, e_rf, f_rf,
                                       variant, step, rwa)[0])


@dataclass(frozen=True)
class PhiFit:
    """Result of :func:`fit_phi`; angles in radians."""

    phi: float
    accuracy: float
    ambiguous: bool
    runner_up: float | None
    grid: np.ndarray
    cost: np.ndarray


def _phi_cost(phis, measured, f_list, timing, theta_p, theta, e_rf, f_rf, variant, step):
    phis = np.atleast_1d(phis)
    mr = np.array([m[0] for m in measured])
    m0 = np.array([m[1] for m in measured])
    fp = np.asarray(f_list, dtype=float)
    grid_phi = np.repeat(phis, len(mr))
    grid_rf = np.tile(mr, len(phis))
    grid_fp = np.tile(fp, len(phis))
    pn = simulate_phi_n0_batch(grid_phi, grid_rf, grid_fp, timing, theta_p, theta, e_rf, f_rf, variant, step)
    branch = np.pi if theta >= np.pi / 2 else 0.0
    pred = grid_phi - pn - branch
    d = wrap_pi(np.tile(m0, len(phis)) - pred).reshape(len(phis), len(mr))
    return np.sqrt(np.mean(d ** 2, axis=1))


def fit_phi(measured, timing: ProtocolTiming, prec: ConditionalPrecession, e_rf, f_list, *, theta: float,
            f_rf: float, grid_step: float = np.radians(0.1), variant: str = "PolY",
            step: float | None = None) -> PhiFit:
    """Azimuth that best reproduces measured ``(phi_rf, phi_0)`` pairs.

    For each candidate ``phi`` the predicted fit phase is
    ``phi - phi_n0(phi, phi_rf) (- pi in the lower hemisphere)``; the RMS of
    the wrapped differences is scanned on a grid over [0, 2pi) and refined
    locally. ``accuracy`` is the RMS at the optimum. The result is flagged
    ambiguous (with a warning) when another local minimum at least 1 deg
    away has an RMS within 1 deg of the best.
    """
    if len(measured) < 2:
        raise InputError("fit_phi needs at least two measurements")
    if len(f_list) != len(measured):
        raise InputError("f_list must give one f_p per measurement")
    args = (measured, f_list, timing, prec.theta_p, theta, e_rf, f_rf, variant, step)
    grid = np.arange(0.0, TWO_PI, grid_step)
    cost = _phi_cost(grid, *args)
    i = int(np.argmin(cost))
    res = minimize_scalar(lambda x: float(_phi_cost(x, *args)[0]),
                          bounds=(grid[i] - grid_step, grid[i] + grid_step), method="bounded",
                          options={"xatol": 1e-7})
    best = float(wrap_2pi(res.x))
    acc = float(res.fun)
    # circular local minima
    is_min = (cost <= np.roll(cost, 1)) & (cost <= np.roll(cost, -1))
    others = [j for j in np.flatnonzero(is_min) if abs(wrap_pi(grid[j] - best)) >= np.radians(1.0)]
    runner = min(others, key=lambda j: cost[j]) if others else None
    ambiguous = runner is not None and cost[runner] - acc < np.radians(1.0)
    if ambiguous:
        warnings.warn(
            f"azimuth fit ambiguous: minima at {np.degrees(best):.2f} and {np.degrees(grid[runner]):.2f} deg",
            RuntimeWarning, stacklevel=2,
        )
    return PhiFit(best, acc, bool(ambiguous), None if runner is None else float(grid[runner]), grid, cost)


def wurst_envelope(t, t_p: float, alpha_p: float):
    """WURST amplitude ``(1 - |cos(pi t / t_p)|)^alpha_p``, zero outside ``[0, t_p]``."""
    if alpha_p <= 0 or t_p <= 0:
        raise DomainError("t_p and alpha_p must be positive")
    t = np.asarray(t, dtype=float)
    inside = (t >= 0) & (t <= t_p)
    val = np.where(inside, (1.0 - np.abs(np.cos(np.pi * t / t_p))) ** alpha_p, 0.0)
    return float(val) if val.ndim == 0 else val
