"""Pulse-sequence simulation of the sensor-nucleus pair.

The sensor is a two-level system (|0> = m_S 0, |1> = m_S -1) and all
microwave pulses are ideal and instantaneous. Joint states are 4x4
density matrices in the ordering sensor (x) nucleus; the nuclear
propagators are built from quaternions so that every block stays exactly
unitary. Times are in us and frequencies in kHz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, InputError
from .estimation import combine_independent
from .hamiltonian import ConditionalPrecession
from .spincore import E_X, E_Y, E_Z, axis_angle_quat, qmul, qrotate, quat_to_su2, su2_decompose

KHZ_US = 1e-3  # kHz * us -> cycles

_PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)


@dataclass(frozen=True)
class CpParams:
    """Carr-Purcell block: ``n_pulses`` pi pulses spaced by ``tau`` (us)."""

    n_pulses: int
    tau: float
    readout_phase: str = "X"

    def __post_init__(self):
        if self.n_pulses <= 0 or self.n_pulses % 2:
            raise InputError(f"n_pulses must be even and positive, got {self.n_pulses}")
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")
        if self.readout_phase not in ("X", "Y"):
            raise InputError(f"readout_phase must be 'X' or 'Y', got {self.readout_phase!r}")


@dataclass(frozen=True)
class CpAxes:
    """Sensor-conditioned rotation axes of one CP cycle.

    ``phi_cp`` is the rotation angle per pulse; one two-pulse cycle rotates
    the nucleus by ``2*phi_cp`` about ``n0`` (sensor in |0>) or ``n1``.
    ``transparent`` marks cycles equal to +-identity, where the axes are
    set to e_z by convention.
    """

    n0: np.ndarray
    n1: np.ndarray
    phi_cp: float
    dot: float
    transparent: bool = False


@dataclass(frozen=True)
class PulsePolParams:
    """PulsePol settings.

    ``tau_pol`` is the half-cycle (one block) length in us, ``n_pol`` the
    number of two-block cycles per transfer block and ``n_rep`` the number
    of transfer blocks, each preceded by sensor re-initialisation.
    """

    tau_pol: float
    n_pol: int = 5
    n_rep: int = 5
    variant: str = "PolY"

    def __post_init__(self):
        if not self.tau_pol > 0:
            raise InputError("tau_pol must be positive")
        if self.n_pol < 1 or self.n_rep < 1:
            raise InputError("n_pol and n_rep must be positive")
        if self.variant not in ("PolX", "PolY"):
            raise InputError(f"variant must be 'PolX' or 'PolY', got {self.variant!r}")


@dataclass(frozen=True)
class NuclearSpinState:
    """Nuclear Bloch vector, ``rho = 1/2 + bloch . I`` with ``|bloch| <= 1``."""

    bloch: np.ndarray = field(default_factory=lambda: np.zeros(3))
    label: str = ""

    def __post_init__(self):
        b = np.asarray(self.bloch, dtype=float)
        if b.shape != (3,):
            raise InputError("bloch must be a 3-vector")
        if np.linalg.norm(b) > 1 + 1e-12:
            raise InputError(f"|bloch| must not exceed 1, got {np.linalg.norm(b)}")
        object.__setattr__(self, "bloch", b)

    @classmethod
    def mixed(cls, label: str = "") -> "NuclearSpinState":
        return cls(np.zeros(3), label)

    @property
    def iz(self) -> float:
        """<I_z> (between -1/2 and 1/2)."""
        return 0.5 * float(self.bloch[2])

    def density(self) -> np.ndarray:
        return bloch_to_rho(self.bloch)


def bloch_to_rho(bloch):
    """2x2 density matrix (broadcasting over leading axes)."""
    b = np.asarray(bloch, dtype=float)
    return 0.5 * (np.eye(2) + np.einsum("...k,kij->...ij", b, _PAULI))


def rho_to_bloch(rho):
    return np.real(np.einsum("...ij,kji->...k", rho, _PAULI))


# ---------------------------------------------------------------------------
# nuclear propagators

def nuclear_quats(prec: ConditionalPrecession, t):
    """Quaternions of free nuclear evolution for time(s) ``t`` in each branch.

    Returns ``(q0, q1)``: rotation by ``-2 pi f0 t`` about e_z and by
    ``-2 pi f1 t`` about ``e_p`` (clockwise precession).
    """
    t = np.asarray(t, dtype=float)
    q0 = axis_angle_quat(E_Z, -2 * np.pi * prec.f0 * KHZ_US * t)
    q1 = axis_angle_quat(prec.e_p, -2 * np.pi * prec.f1 * KHZ_US * t)
    return q0, q1


def _cp_cycle_quats(prec: ConditionalPrecession, tau):
    q0, q1 = nuclear_quats(prec, 0.5 * np.asarray(tau, dtype=float))
    c0 = qmul(qmul(q0, q1), qmul(q1, q0))
    c1 = qmul(qmul(q1, q0), qmul(q0, q1))
    return c0, c1


def cp_axes_arrays(prec: ConditionalPrecession, tau, tol: float = 1e-12):
    """Vectorised :func:`cp_axes` over an array of ``tau``.

    Returns ``(n0, n1, phi_cp, dot)`` arrays.
    """
    c0, c1 = _cp_cycle_quats(prec, tau)
    n0, phi = su2_decompose(c0, tol)
    n1, _ = su2_decompose(c1, tol)
    dot = np.clip(np.sum(n0 * n1, axis=-1), -1.0, 1.0)
    return n0, n1, phi, dot


def cp_axes(prec: ConditionalPrecession, p: CpParams) -> CpAxes:
    """Axes ``n0``, ``n1`` and angle ``phi_cp`` of the CP cycle.

    The cycle is ``U0 U1^2 U0`` (sensor in |0> first) and ``U1 U0^2 U1``,
    with ``U0``, ``U1`` the half-interval free evolutions. Both cycles share
    their scalar part, hence the common ``phi_cp``.
    """
    n0, n1, phi, dot = cp_axes_arrays(prec, p.tau)
    transparent = bool(abs(np.sin(phi)) < 1e-12)
    return CpAxes(n0, n1, float(phi), float(dot), transparent)


def cos_phi_cp(prec: ConditionalPrecession, tau):
    """Closed form ``cos a cos b - cos(theta_p) sin a sin b`` for the cycle."""
    a = np.pi * prec.f0 * KHZ_US * np.asarray(tau)
    b = np.pi * prec.f1 * KHZ_US * np.asarray(tau)
    return np.cos(a) * np.cos(b) - np.cos(prec.theta_p) * np.sin(a) * np.sin(b)


def cp_nutation_frequency(prec: ConditionalPrecession, tau) -> np.ndarray:
    """Nuclear nutation frequency ``f_cp`` (kHz) from ``phi_cp = pi - 2 pi f_cp tau``."""
    _, _, phi, _ = cp_axes_arrays(prec, tau)
    return (np.pi - phi) / (2 * np.pi * KHZ_US * np.asarray(tau))


def _px(dot, phi, n):
    return 1.0 - 0.5 * (1.0 - dot) * np.sin(0.5 * n * phi) ** 2


def _py(bloch, n0, n1, phi, n):
    s = np.sin(n * phi)
    s2 = np.sin(0.5 * n * phi) ** 2
    vec = (n0 - n1) * s[..., None] + 2.0 * np.cross(n0, n1) * s2[..., None]
    return 0.5 + 0.25 * np.sum(np.asarray(bloch) * vec, axis=-1)


def readout_y(bloch, n0, n1, phi_cp, n_pulses):
    """``P_Y`` for nuclear Bloch vector(s) given precomputed CP axes (broadcasting)."""
    return _py(bloch, n0, n1, phi_cp, n_pulses)


def transition_probability_x(axes: CpAxes, n_pulses: int) -> float:
    """Sensor transition probability with an X readout pulse."""
    return float(_px(axes.dot, axes.phi_cp, n_pulses))


def transition_probability_y(state: NuclearSpinState, axes: CpAxes, n_pulses: int) -> float:
    """Sensor transition probability with a Y readout pulse."""
    return float(_py(state.bloch, axes.n0, axes.n1, axes.phi_cp, n_pulses))


def cp_signal(prec: ConditionalPrecession, p: CpParams, state: NuclearSpinState | None = None) -> float:
    """Transition probability for ``p.readout_phase``."""
    axes = cp_axes(prec, p)
    if p.readout_phase == "X":
        return transition_probability_x(axes, p.n_pulses)
    return transition_probability_y(state or NuclearSpinState.mixed(), axes, p.n_pulses)


def cp_spectrum(prec: ConditionalPrecession, taus, n_pulses: int) -> np.ndarray:
    """P_X over a grid of pulse spacings (vectorised)."""
    _, _, phi, dot = cp_axes_arrays(prec, np.asarray(taus, dtype=float))
    return _px(dot, phi, n_pulses)


def cp_spectrum_y(prec: ConditionalPrecession, taus, n_pulses: int, bloch) -> np.ndarray:
    """P_Y over a grid of pulse spacings for a fixed nuclear Bloch vector."""
    n0, n1, phi, _ = cp_axes_arrays(prec, np.asarray(taus, dtype=float))
    return _py(bloch, n0, n1, phi, n_pulses)


def cp_nutation(prec: ConditionalPrecession, tau: float, n_values) -> np.ndarray:
    """P_X as a function of the number of pulses at fixed ``tau``."""
    _, _, phi, dot = cp_axes_arrays(prec, tau)
    return _px(dot, phi, np.asarray(n_values, dtype=float))


def resonance_tau(prec: ConditionalPrecession, tau_lo: float, tau_hi: float, n_grid: int = 2001) -> float:
    """Pulse spacing where ``n0 . n1`` is minimal (the line centre).

    This is where the contrast factor ``(1 - n0.n1)/2`` of the X readout
    peaks; the observed minimum of P_X at a given N is shifted from it by
    the ``sin^2(N phi_cp / 2)`` factor.
    """
    taus = np.linspace(tau_lo, tau_hi, n_grid)
    _, _, _, dot = cp_axes_arrays(prec, taus)
    i = int(np.argmin(dot))
    lo, hi = taus[max(i - 1, 0)], taus[min(i + 1, n_grid - 1)]
    res = minimize_scalar(
        lambda t: float(cp_axes_arrays(prec, t)[3]), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)


# ---------------------------------------------------------------------------
# joint 4x4 machinery

def _sensor_pulse(axis: str, angle: float) -> np.ndarray:
    vec = {"X": E_X, "Y": E_Y, "-X": -E_X, "-Y": -E_Y}[axis]
    return np.kron(quat_to_su2(axis_angle_quat(vec, angle)), np.eye(2))


def _block_diag(u0, u1):
    """Stack of 4x4 block-diagonal matrices from 2x2 stacks."""
    u0, u1 = np.broadcast_arrays(u0, u1)
    out = np.zeros(u0.shape[:-2] + (4, 4), dtype=complex)
    out[..., :2, :2] = u0
    out[..., 2:, 2:] = u1
    return out


def free_propagator(prec: ConditionalPrecession, t) -> np.ndarray:
    """Joint free evolution for time(s) ``t`` (sensor populations frozen)."""
    q0, q1 = nuclear_quats(prec, t)
    return _block_diag(quat_to_su2(q0), quat_to_su2(q1))


def cp_propagator(prec: ConditionalPrecession, p: CpParams) -> np.ndarray:
    """Joint CP propagator ``|0><0| (x) U_a + |1><1| (x) U_b`` (global phase dropped)."""
    c0, c1 = _cp_cycle_quats(prec, p.tau)
    k = p.n_pulses // 2
    n0, h0 = su2_decompose(c0)
    n1, h1 = su2_decompose(c1)
    ua = quat_to_su2(axis_angle_quat(n0, 2 * k * h0))
    ub = quat_to_su2(axis_angle_quat(n1, 2 * k * h1))
    return _block_diag(ua, ub)


def _evolve(u, rho):
    return u @ rho @ np.conj(np.swapaxes(u, -1, -2))


def _dephase(rho):
    out = np.zeros_like(rho)
    out[..., :2, :2] = rho[..., :2, :2]
    out[..., 2:, 2:] = rho[..., 2:, 2:]
    return out


def _pop1(rho):
    return np.real(np.trace(rho[..., 2:, 2:], axis1=-2, axis2=-1))


def _joint(rho_n, sensor: int = 0):
    proj = _P0 if sensor == 0 else _P1
    return np.einsum("ab,...ij->...aibj", proj, rho_n).reshape(rho_n.shape[:-2] + (4, 4))


def _nuclear(rho):
    return rho[..., :2, :2] + rho[..., 2:, 2:]


def correlation_trace(
    prec: ConditionalPrecession,
    p: CpParams,
    t_corr_grid,
    state: NuclearSpinState | None = None,
    readout_phase: str | None = None,
) -> np.ndarray:
    """Correlation spectroscopy trace.

    Sequence: (pi/2)_X - CP - (pi/2)_R stores the sensor phase as a
    population; sensor coherences are discarded during the free evolution
    ``t_corr`` where the nucleus precesses conditioned on the stored
    population; then (pi/2)_X - CP - (pi/2)_R reads out. ``R`` is the
    readout phase, ``"Y"`` by default since an X storage pulse carries no
    nuclear information for an unpolarised nucleus.

    Returns the probability of finding the sensor in |1> for each ``t_corr``.
    """
    t = np.asarray(t_corr_grid, dtype=float)
    if t.size == 0:
        raise DomainError("t_corr_grid is empty")
    r = readout_phase or "Y"
    ux = _sensor_pulse("X", np.pi / 2)
    ur = _sensor_pulse(r, np.pi / 2)
    block = ur @ cp_propagator(prec, p) @ ux
    rho_n = (state or NuclearSpinState.mixed()).density()
    rho = _dephase(_evolve(block, _joint(rho_n)))
    rho = _evolve(free_propagator(prec, t), rho[None])
    rho = _evolve(block, rho)
    return _pop1(rho)


# ---------------------------------------------------------------------------
# PulsePol

def pulsepol_cycle(prec: ConditionalPrecession, tau_pol, variant: str = "PolY") -> np.ndarray:
    """Joint propagator of one PulsePol cycle (two blocks, ``2 tau_pol``).

    Each block is ``a90 - b180 - a90 b90 - a180 - b90`` with free intervals
    of ``tau_pol/4`` around the pi pulses; (a, b) = (Y, X) for PolY and
    (X, Y) for PolX. Vectorised over ``tau_pol``.
    """
    a, b = ("Y", "X") if variant == "PolY" else ("X", "Y")
    tau_pol = np.asarray(tau_pol, dtype=float)
    f = free_propagator(prec, 0.25 * tau_pol)
    a90, b90 = _sensor_pulse(a, np.pi / 2), _sensor_pulse(b, np.pi / 2)
    a180, b180 = _sensor_pulse(a, np.pi), _sensor_pulse(b, np.pi)
    block = b90 @ f @ a180 @ f @ (b90 @ a90) @ f @ b180 @ f @ a90
    return block @ block


def _pulsepol_blocks(cyc, n_pol, n_rep, rho_n):
    """Run ``n_rep`` transfer blocks; returns (P0 of last block, rho_n)."""
    u = np.linalg.matrix_power(cyc, n_pol)
    p0 = np.ones(rho_n.shape[:-2])
    for _ in range(n_rep):
        rho = _evolve(u, _joint(rho_n))
        p0 = 1.0 - _pop1(rho)
        rho_n = _nuclear(rho)
    return p0, rho_n


def pulsepol_transfer(prec: ConditionalPrecession, pp: PulsePolParams, initial: NuclearSpinState | None = None):
    """Polarisation transfer by ``n_rep`` PulsePol blocks.

    The sensor is re-initialised to |0> before each block.

    Returns
    -------
    p0 : float
        Sensor survival probability in |0> after the last block.
    final : NuclearSpinState
    """
    rho_n = (initial or NuclearSpinState.mixed()).density()
    p0, rho_n = _pulsepol_blocks(pulsepol_cycle(prec, pp.tau_pol, pp.variant), pp.n_pol, pp.n_rep, rho_n)
    b = rho_to_bloch(rho_n)
    b = b / max(1.0, np.linalg.norm(b))
    return float(p0), NuclearSpinState(b)


def pulsepol_scan(prec: ConditionalPrecession, taus_pol, n_pol: int = 5, n_rep: int = 1,
                  variant: str = "PolY", initial=None):
    """Vectorised PulsePol over ``taus_pol``.

    Returns ``(p0, bloch)`` with shapes ``(M,)`` and ``(M, 3)``. ``initial``
    may be a single Bloch vector or one per ``tau_pol``.
    """
    taus = np.atleast_1d(np.asarray(taus_pol, dtype=float))
    b0 = np.zeros(3) if initial is None else np.asarray(initial, dtype=float)
    rho_n = np.broadcast_to(bloch_to_rho(b0), taus.shape + (2, 2)).copy()
    p0, rho_n = _pulsepol_blocks(pulsepol_cycle(prec, taus, variant), n_pol, n_rep, rho_n)
    return p0, rho_to_bloch(rho_n)


def rf_flip_mask(f1_values, rf_frequency: float, t_pi: float) -> np.ndarray:
    """Spins inside the RF pi-pulse bandwidth ``|f1 - f_rf| <= 1/(2 t_pi)``."""
    half = 0.5 / (t_pi * KHZ_US)
    return np.abs(np.asarray(f1_values, dtype=float) - rf_frequency) <= half


@dataclass
class SelectiveResult:
    """Outcome of :func:`selective_polarization` for one ``tau_pol``."""

    states: list
    p0_each: np.ndarray
    p0: float
    flipped: np.ndarray


def _selective_run_map(prec, taus, pp, flip, n_initial):
    """Affine map of the Bloch vector over one selective run.

    Returns ``(M, c, run)`` where ``bloch' = M bloch + c`` and ``run(b)``
    gives (p0 of the final block, bloch after the run) for ``b`` of shape
    ``(T, 3)``.
    """
    cyc = pulsepol_cycle(prec, taus, "PolY")

    def run(b):
        rho_n = bloch_to_rho(b)
        _, rho_n = _pulsepol_blocks(cyc, pp.n_pol, n_initial, rho_n)
        b1 = rho_to_bloch(rho_n)
        if flip:
            b1 = -b1
        p0, rho_n = _pulsepol_blocks(cyc, pp.n_pol, pp.n_rep, bloch_to_rho(b1))
        return p0, rho_to_bloch(rho_n)

    nt = taus.shape[0]
    basis = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    outs = [run(np.broadcast_to(v, (nt, 3)))[1] for v in basis]
    c = outs[0]
    m = np.stack([outs[k + 1] - c for k in range(3)], axis=-1)
    return m, c, run


def selective_polarization(
    prec_target: ConditionalPrecession,
    prec_others: list,
    pp: PulsePolParams,
    taus_pol=None,
    rf_frequency: float | None = None,
    t_pi: float = 199.443,
    n_initial: int = 9,
    n_runs: int | None = 1,
    rf_on: bool = True,
):
    """Selective polarisation of the target spin.

    Each run is: ``n_initial`` PolY blocks, an RF pi pulse that inverts the
    Bloch vector of every spin with ``|f1 - rf_frequency| <= 1/(2 t_pi)``,
    then ``pp.n_rep`` final PolY blocks whose sensor survival is recorded.
    All spins start mixed and are treated independently. With
    ``n_runs=None`` the repeated-run steady state is used, which is what a
    long signal average without a depolarising block converges to.

    Parameters
    ----------
    taus_pol : array, optional
        Block lengths to evaluate; defaults to ``[pp.tau_pol]``.
    rf_frequency : float, optional
        RF carrier in kHz, defaults to the target's ``f1``.

    Returns
    -------
    list of SelectiveResult, one per ``tau_pol``.
    """
    taus = np.atleast_1d(np.asarray(pp.tau_pol if taus_pol is None else taus_pol, dtype=float))
    spins = [prec_target] + list(prec_others)
    f_rf = prec_target.f1 if rf_frequency is None else rf_frequency
    flips = rf_flip_mask([s.f1 for s in spins], f_rf, t_pi) & rf_on
    p0s, blochs = [], []
    for prec, flip in zip(spins, flips):
        m, c, run = _selective_run_map(prec, taus, pp, bool(flip), n_initial)
        if n_runs is None:
            a = np.eye(3) - m
            b = np.stack([np.linalg.lstsq(a[i], c[i], rcond=1e-9)[0] for i in range(len(taus))])
            norm = np.linalg.norm(b, axis=-1, keepdims=True)
            b = b / np.maximum(norm, 1.0)
        else:
            b = np.zeros((len(taus), 3))
            for _ in range(n_runs - 1):
                b = run(b)[1]
        p0, b_end = run(b)
        p0s.append(p0)
        blochs.append(b_end)
    p0s = np.array(p0s)
    out = []
    for i in range(len(taus)):
        states = [NuclearSpinState(b[i] / max(1.0, np.linalg.norm(b[i]))) for b in blochs]
        out.append(SelectiveResult(states, p0s[:, i], float(combine_independent(p0s[:, i])), flips))
    return out


# ---------------------------------------------------------------------------
# coherent synchronized readout of a spin bath

def cp_coherence(prec: ConditionalPrecession, p: CpParams, bloch) -> np.ndarray:
    """Complex sensor coherence factor ``Tr[U_b^dag U_a rho]`` of one spin.

    With this factor ``P_X = (1 + Re c)/2`` and ``P_Y = (1 - Im c)/2``;
    for independent spins the factors multiply.
    """
    u = cp_propagator(prec, p)
    v = np.conj(np.swapaxes(u[..., 2:, 2:], -1, -2)) @ u[..., :2, :2]
    rho = bloch_to_rho(bloch)
    return np.trace(v @ rho, axis1=-2, axis2=-1)


def synchronized_readout(
    bath: list,
    t_L: float,
    m_blocks: int,
    p: CpParams,
    initial_states=None,
    variant: str = "PolY",
    rf_phase: float = 0.0,
    readout_phase: str = "Y",
):
    """Repeated CP readout of a polarised bath at interval ``t_L``.

    Unless ``initial_states`` are given, every spin starts polarised along
    ``-e_z`` (PolY) or ``+e_z`` (PolX) and is tipped by an ideal RF pi/2
    pulse about the in-plane axis at azimuth ``rf_phase``. Block ``k``
    starts at ``k t_L``; between blocks the sensor rests in |0> so the
    nuclei precess about e_z at ``f0``. Each block's back-action is kept on
    every spin (the sensor outcome is discarded).

    Returns
    -------
    ndarray of length ``m_blocks`` with the readout probability.
    """
    if m_blocks < 1:
        raise InputError("m_blocks must be positive")
    if t_L < p.n_pulses * p.tau:
        raise InputError("t_L shorter than one CP block")
    if initial_states is None:
        z = -1.0 if variant == "PolY" else 1.0
        axis = np.array([np.cos(rf_phase), np.sin(rf_phase), 0.0])
        b0 = qrotate(axis_angle_quat(axis, np.pi / 2), np.array([0.0, 0.0, z]))
        blochs = [b0.copy() for _ in bath]
    else:
        blochs = [np.asarray(s.bloch if hasattr(s, "bloch") else s, dtype=float) for s in initial_states]
    units = [cp_propagator(prec, p) for prec in bath]
    gaps = [free_propagator(prec, t_L - p.n_pulses * p.tau)[:2, :2] for prec in bath]
    rhos = [bloch_to_rho(b) for b in blochs]
    out = np.empty(m_blocks)
    for k in range(m_blocks):
        c = 1.0 + 0j
        for i, u in enumerate(units):
            ua, ub = u[:2, :2], u[2:, 2:]
            c *= np.trace(ub.conj().T @ ua @ rhos[i])
            rhos[i] = 0.5 * (ua @ rhos[i] @ ua.conj().T + ub @ rhos[i] @ ub.conj().T)
            rhos[i] = gaps[i] @ rhos[i] @ gaps[i].conj().T
        out[k] = 0.5 * (1 - c.imag) if readout_phase == "Y" else 0.5 * (1 + c.real)
    return out
