"""Inverse pipeline: cosine fitting, hyperfine inversion, aliasing, spin combination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .errors import (
    DomainError,
    FitError,
    InconsistentInputsError,
    InputError,
    SingularGeometryError,
    UnsupportedAliasOrderError,
)
from .hamiltonian import HyperfineParams
from .spincore import wrap_2pi

TWO_PI = 2 * np.pi
KHZ_US = 1e-3


@dataclass(frozen=True)
class OscillationFit:
    """``A exp(-t/T) cos(2 pi f t + phi_0) + B`` with ``A >= 0``, phase in [0, 2pi)."""

    amplitude: float
    offset: float
    frequency: float
    phase: float
    decay_time: float | None = None
    residual_rms: float = 0.0

    def model(self, t):
        t = np.asarray(t, dtype=float)
        env = 1.0 if self.decay_time is None else np.exp(-t / self.decay_time)
        return self.amplitude * env * np.cos(TWO_PI * self.frequency * KHZ_US * t + self.phase) + self.offset


@dataclass(frozen=True)
class UndersamplingConfig:
    """Sampling interval ``dt`` (us), start time ``t0`` (us), even alias order ``m``."""

    dt: float
    t0: float
    m: int

    def __post_init__(self):
        if not self.dt > 0:
            raise InputError("dt must be positive")
        if self.m < 0:
            raise InputError("m must be non-negative")
        if self.m % 2:
            raise UnsupportedAliasOrderError(f"odd alias order m={self.m} is not supported")

    @property
    def f_nyquist(self) -> float:
        return 0.5 / (self.dt * KHZ_US)


def _linear_cosine(t, y, f, env):
    w = TWO_PI * f * KHZ_US
    X = np.column_stack([env * np.cos(w * t), env * np.sin(w * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return coef, float(r @ r)


def _golden_frequency(t, y, f_hint, env, rel_span=0.05, n_grid=201):
    grid = np.linspace(f_hint * (1 - rel_span), f_hint * (1 + rel_span), n_grid)
    cost = np.array([_linear_cosine(t, y, f, env)[1] for f in grid])
    i = int(np.argmin(cost))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    res = minimize_scalar(
        lambda f: _linear_cosine(t, y, f, env)[1], bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12 * max(f_hint, 1.0)},
    )
    return float(res.x)


def _params_from_linear(coef):
    a, b, off = coef
    amp = float(np.hypot(a, b))
    phase = wrap_2pi(np.arctan2(-b, a))
    return amp, off, phase


def fit_damped_cosine(times, values, f_hint: float, fit_decay: bool = False,
                      decay_hint: float | None = None, rel_span: float = 0.05) -> OscillationFit:
    """Least-squares fit of ``A [exp(-t/T)] cos(2 pi f t + phi_0) + B``.

    Grid search over ``f_hint * (1 +- rel_span)`` with the linear parameters
    solved exactly at each frequency, bounded scalar refinement, then a joint
    nonlinear polish. With ``fit_decay`` the decay time is refined in an
    outer loop. The phase refers to ``t = 0`` of the supplied time axis.

    Raises
    ------
    FitError
        If the refinement does not converge.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.size < 8:
        raise InputError("need at least 8 samples with matching times and values")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise InputError("times and values must be finite")
    if f_hint <= 0:
        raise InputError("f_hint must be positive")
    span = float(t.max() - t.min())
    if span * f_hint * KHZ_US < 1.0:
        raise InputError("samples must span at least one period at f_hint")

    tau = None
    env = np.ones_like(t)
    if fit_decay:
        tau = decay_hint or 2.0 * span
        for _ in range(30):
            env = np.exp(-t / tau)
            f = _golden_frequency(t, y, f_hint, env, rel_span)
            g = lambda T: _linear_cosine(t, y, f, np.exp(-t / T))[1]
            res = minimize_scalar(lambda lt: g(np.exp(lt)), bounds=(np.log(span / 50), np.log(span * 200)),
                                  method="bounded", options={"xatol": 1e-10})
            new = float(np.exp(res.x))
            done = abs(new - tau) < 1e-9 * tau
            tau = new
            if done:
                break
        env = np.exp(-t / tau)
    f = _golden_frequency(t, y, f_hint, env, rel_span)
    coef, _ = _linear_cosine(t, y, f, env)
    amp, off, phase = _params_from_linear(coef)

    def resid(x):
        e = np.exp(-t / x[4]) if fit_decay else 1.0
        return x[0] * e * np.cos(TWO_PI * x[2] * KHZ_US * t + x[3]) + x[1] - y

    x0 = [amp, off, f, phase] + ([tau] if fit_decay else [])
    sol = least_squares(resid, x0, x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    if not np.all(np.isfinite(sol.x)):
        raise FitError("fit diverged", best_residual=float(np.sqrt(np.mean(resid(x0) ** 2))))
    x = sol.x
    amp, phase = float(x[0]), float(x[3])
    if amp < 0:
        amp, phase = -amp, phase + np.pi
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    if sol.status <= 0:
        raise FitError("fit did not converge", best_residual=rms)
    return OscillationFit(amp, float(x[1]), float(x[2]), wrap_2pi(phase),
                          float(x[4]) if fit_decay else None, rms)


def estimate_hyperfine(f_cp: float, f0: float, f1: float, tau: float) -> HyperfineParams:
    """Invert ``(f_cp, f0, f1, tau)`` for the hyperfine components (kHz).

    Raises
    ------
    SingularGeometryError
        If ``sin(pi f0 tau) sin(pi f1 tau)`` vanishes.
    InconsistentInputsError
        If ``f1^2 < (f0 + A_par)^2``.
    """
    a = np.pi * f0 * KHZ_US * tau
    b = np.pi * f1 * KHZ_US * tau
    den = np.sin(a) * np.sin(b)
    if abs(den) < 1e-12:
        raise SingularGeometryError("sin(pi f0 tau) sin(pi f1 tau) is zero")
    cos_tp = (np.cos(a) * np.cos(b) - np.cos(np.pi - TWO_PI * f_cp * KHZ_US * tau)) / den
    a_par = cos_tp * f1 - f0
    rad = f1 ** 2 - (f0 + a_par) ** 2
    if rad < -1e-9 * max(f1 ** 2, 1.0):
        raise InconsistentInputsError(f"no real A_perp: f1^2 - (f0 + A_par)^2 = {rad:.6g}")
    return HyperfineParams(float(a_par), float(np.sqrt(max(rad, 0.0))))


def undersampling_map(f: float, dt: float):
    """Alias order and aliased frequency of ``f`` (kHz) sampled every ``dt`` (us).

    Raises
    ------
    UnsupportedAliasOrderError
        For odd alias orders.
    """
    if not dt > 0 or f < 0:
        raise DomainError("need dt > 0 and f >= 0")
    fn = 0.5 / (dt * KHZ_US)
    m = int(np.floor(f / fn))
    if m % 2:
        raise UnsupportedAliasOrderError(f"f={f} kHz falls in odd alias order m={m}")
    return m, f - m * fn


def recover_phase(eta_alias: float, cfg: UndersamplingConfig) -> float:
    """True phase ``eta_alias - m pi t0/dt`` in [0, 2pi)."""
    return wrap_2pi(eta_alias - cfg.m * np.pi * cfg.t0 / cfg.dt)


def alias_phase(eta: float, cfg: UndersamplingConfig) -> float:
    """Inverse of :func:`recover_phase`."""
    return wrap_2pi(eta + cfg.m * np.pi * cfg.t0 / cfg.dt)


def combine_independent(px_list) -> float:
    """``(1 + prod(2 P_i - 1)) / 2`` for independent spins."""
    p = np.asarray(px_list, dtype=float)
    if np.any((p < -1e-12) | (p > 1 + 1e-12)):
        raise DomainError("probabilities must lie in [0, 1]")
    return float(0.5 * (1.0 + np.prod(2.0 * p - 1.0, axis=0)))


def combine_independent_complex(px_list, py_list):
    """Joint (P_X, P_Y) for independent, possibly polarised spins.

    Each spin contributes the coherence ``c = (2 P_X - 1) + i (1 - 2 P_Y)``;
    the joint coherence is the product and maps back by the same relation.
    It reduces to :func:`combine_independent` for P_X when every P_Y is 1/2.
    """
    px = np.asarray(px_list, dtype=float)
    py = np.asarray(py_list, dtype=float)
    c = np.prod((2 * px - 1) + 1j * (1 - 2 * py), axis=0)
    return 0.5 * (1 + c.real), 0.5 * (1 - c.imag)


def dominant_frequencies(times, values, n_peaks: int = 2):
    """Frequencies (kHz) of the strongest DFT peaks of a uniformly sampled trace.

    Returns ``(peaks, bin_width)``, peaks sorted by decreasing magnitude.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    dt = float(np.mean(np.diff(t)))
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-9):
        raise InputError("times must be uniformly spaced")
    spec = np.abs(np.fft.rfft(y - y.mean()))
    freqs = np.fft.rfftfreq(y.size, dt * KHZ_US)
    interior = np.r_[False, (spec[1:-1] >= spec[:-2]) & (spec[1:-1] >= spec[2:]), False]
    idx = np.flatnonzero(interior)
    idx = idx[np.argsort(spec[idx])[::-1]][:n_peaks]
    return freqs[idx], float(freqs[1] - freqs[0])


def transfer_count_bound(f_t: float, a_perp: float, n_pol: int) -> float:
    """Lower bound ``pi f_t / (3 (2 + sqrt 2) A_perp N_pol)`` on transfer blocks."""
    return float(np.pi * f_t / (3 * (2 + np.sqrt(2)) * a_perp * n_pol))


def circular_mean(angles) -> float:
    a = np.asarray(angles, dtype=float)
    return wrap_2pi(np.arctan2(np.sin(a).mean(), np.cos(a).mean()))


def wrap_pi(x):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)

