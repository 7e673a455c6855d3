"""Declarative experiment scenarios.

A scenario is a YAML mapping::

    name: my-run
    kind: cp-sweep            # see KINDS
    sensor: {D: 2870.4, gamma_e: 28.0, gamma_c: 10.705, B0: 36.2}
    targets:
      - {a_parallel: -173.1, a_perp: 22.3, theta: 94.8, phi: 248.8}
    bath:
      sample: {extent: 20.0, r_min: 10.0, abundance: 0.011, seed: 7}
      # or: spins: [{a_parallel: ..., a_perp: ..., theta: ..., phi: ...}]
    sequence: {...}           # kind-specific, see the _run_* functions

Angles are in degrees, times in us and frequencies in kHz unless a key
says otherwise. ``run`` returns a :class:`ScenarioResult` with labelled
columns and a summary dict; both are written deterministically.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import blochsim, calibration, estimation, lattice, sequences
from .errors import InputError
from .hamiltonian import (
    HyperfineParams,
    SensorConfig,
    conditional_precession,
    e_perp_direction,
    nv_resonances,
)
from .spincore import axis_angle_quat, qrotate

d2r = np.radians


class ScenarioError(InputError):
    """Invalid scenario file; the message names the offending field path."""


@dataclass
class ScenarioResult:
    name: str
    kind: str
    columns: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        keys = list(self.columns)
        n = max((len(v) for v in self.columns.values()), default=0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for i in range(n):
            w.writerow([_fmt(self.columns[k][i]) if i < len(self.columns[k]) else "" for k in keys])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {"name": self.name, "kind": self.kind, "summary": _jsonable(self.summary)}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def write(self, out_dir) -> tuple:
        """Write ``<name>.csv`` and ``<name>.summary.json`` into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        data, summ = out / f"{self.name}.csv", out / f"{self.name}.summary.json"
        data.write_text(self.to_csv())
        summ.write_text(self.to_json())
        return data, summ


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0:
        x = 0.0  # no negative zero
    return "%.10g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float("%.10g" % float(obj)) if np.isfinite(obj) else None
    return obj


# ---------------------------------------------------------------------------
# field access with paths

class _Cfg:
    """Read-only view of a nested mapping that reports missing keys by path."""

    def __init__(self, data, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ScenarioError(f"{path or '<root>'}: expected a mapping")
        self.data, self.path = data, path

    def _p(self, key):
        return f"{self.path}.{key}" if self.path else key

    def sub(self, key, required=False) -> "_Cfg":
        if required and key not in self.data:
            raise ScenarioError(f"{self._p(key)}: missing section")
        return _Cfg(self.data.get(key), self._p(key))

    def has(self, key) -> bool:
        return key in self.data

    def num(self, key, default=None, positive=False, integer=False):
        if key not in self.data:
            if default is None:
                raise ScenarioError(f"{self._p(key)}: missing required value")
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"{self._p(key)}: expected a number, got {v!r}")
        if integer and int(v) != v:
            raise ScenarioError(f"{self._p(key)}: expected an integer, got {v!r}")
        if positive and not v > 0:
            raise ScenarioError(f"{self._p(key)}: must be positive, got {v!r}")
        return int(v) if integer else float(v)

    def nums(self, key, default=None):
        if key not in self.data:
            if default is None:
                raise ScenarioError(f"{self._p(key)}: missing required list")
            return list(default)
        v = self.data[key]
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ScenarioError(f"{self._p(key)}: expected a list of numbers")
        return [float(x) for x in v]

    def choice(self, key, options, default=None):
        v = self.data.get(key, default)
        if v not in options:
            raise ScenarioError(f"{self._p(key)}: expected one of {', '.join(map(str, options))}, got {v!r}")
        return v

    def items(self, key) -> list:
        v = self.data.get(key, [])
        if not isinstance(v, list):
            raise ScenarioError(f"{self._p(key)}: expected a list")
        return [_Cfg(x, f"{self._p(key)}[{i}]") for i, x in enumerate(v)]


def _grid(c: _Cfg, start, stop, count):
    a, b, n = c.num(start), c.num(stop), c.num(count, positive=True, integer=True)
    if n < 2 or not b > a:
        raise ScenarioError(f"{c.path}: need {stop} > {start} and {count} >= 2")
    return np.linspace(a, b, n)


# ---------------------------------------------------------------------------
# physical setup

@dataclass
class Spin:
    hf: HyperfineParams
    theta: float  # rad
    phi: float  # rad

    def precession(self, cfg: SensorConfig):
        return conditional_precession(cfg, self.hf, e_perp_direction(self.theta, self.phi))


def _sensor(c: _Cfg) -> SensorConfig:
    s = c.sub("sensor")
    base = SensorConfig()
    try:
        return SensorConfig(
            D=s.num("D", base.D), gamma_e=s.num("gamma_e", base.gamma_e), gamma_c=s.num("gamma_c", base.gamma_c),
            B0=s.num("B0", base.B0), n14_offset=s.num("n14_offset", base.n14_offset),
        )
    except InputError as exc:
        raise ScenarioError(f"sensor: {exc}") from None


def _spin(c: _Cfg) -> Spin:
    try:
        hf = HyperfineParams(c.num("a_parallel"), c.num("a_perp"))
    except ScenarioError:
        raise
    except InputError as exc:
        raise ScenarioError(f"{c.path}: {exc}") from None
    theta = c.num("theta", 0.0)
    if not 0 <= theta <= 180:
        raise ScenarioError(f"{c.path}.theta: must lie in [0, 180] deg")
    return Spin(hf, d2r(theta), d2r(c.num("phi", 0.0)))


def _targets(c: _Cfg) -> list:
    return [_spin(t) for t in c.items("targets")]


def _bath(c: _Cfg) -> list:
    b = c.sub("bath")
    if b.has("sample") and b.has("spins"):
        raise ScenarioError("bath: give either sample or spins, not both")
    if b.has("sample"):
        s = b.sub("sample")
        if not s.has("seed"):
            raise ScenarioError("bath.sample.seed: random bath sampling requires an explicit seed")
        seed = s.num("seed", integer=True)
        pos, apar, aperp = lattice.sample_bath(
            s.num("extent", positive=True), seed, s.num("abundance", 0.011), s.num("r_min", 0.0)
        )
        _, th, ph = lattice.spherical_of(pos) if len(pos) else (None, [], [])
        return [Spin(HyperfineParams(float(a), float(q)), float(t), float(p))
                for a, q, t, p in zip(apar, aperp, np.atleast_1d(th), np.atleast_1d(ph))]
    return [_spin(x) for x in b.items("spins")]


def _precs(cfg, spins):
    return [s.precession(cfg) for s in spins]


# ---------------------------------------------------------------------------
# runners

def _run_cp_sweep(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    n = seq.num("n_pulses", positive=True, integer=True)
    taus = _grid(seq, "tau_start", "tau_stop", "n_points")
    precs = _precs(cfg, targets + bath)
    cols = {"tau_us": taus}
    if precs:
        each = np.array([sequences.cp_spectrum(p, taus, n) for p in precs])
        p_x = 0.5 * (1.0 + np.prod(2.0 * each - 1.0, axis=0))
    else:
        p_x = np.ones_like(taus)
    cols["p_x"] = p_x
    summary = {"n_pulses": n, "tau_at_min_us": float(taus[np.argmin(p_x)]), "p_x_min": float(p_x.min())}
    if targets:
        pt = precs[0]
        t_res = sequences.resonance_tau(pt, float(taus[0]), float(taus[-1]))
        summary.update({
            "f1_khz": pt.f1, "theta_p_deg": float(np.degrees(pt.theta_p)), "f_target_khz": pt.f_target,
            "tau_resonance_us": t_res, "tau_expected_us": 1.0 / (2.0 * pt.f_target * 1e-3),
        })
    return cols, summary


def _run_cp_nutation(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    tau = seq.num("tau", positive=True)
    n_max = seq.num("n_max", positive=True, integer=True)
    n_step = seq.num("n_step", 2, positive=True, integer=True)
    decay = seq.num("decay_time_us", 0.0)
    copies = [int(k) for k in seq.nums("copies", [1])]
    if n_step % 2:
        raise ScenarioError("sequence.n_step: must be even")
    if not targets:
        raise ScenarioError("targets: cp-nutation needs a target spin")
    ns = np.arange(n_step, n_max + 1, n_step)
    t = ns * tau
    prec = targets[0].precession(cfg)
    base = sequences.cp_nutation(prec, tau, ns)
    env = np.exp(-t / decay) if decay > 0 else np.ones_like(t)
    cols = {"n_pulses": ns, "time_us": t}
    for k in copies:
        cols[f"p_x_n{k}"] = 0.5 * (1 + env * (2 * base - 1) ** k)
    f_model = float(sequences.cp_nutation_frequency(prec, tau))
    peaks, _ = estimation.dominant_frequencies(t, cols[f"p_x_n{copies[0]}"], 1)
    fit = estimation.fit_damped_cosine(t, cols[f"p_x_n{copies[0]}"], float(peaks[0]), fit_decay=decay > 0,
                                       decay_hint=decay or None, rel_span=0.2)
    summary = {"tau_us": tau, "f_cp_model_khz": f_model, "f_cp_fit_khz": fit.frequency,
               "decay_fit_us": fit.decay_time, "amplitude": fit.amplitude}
    return cols, summary


def _run_correlation(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    p = sequences.CpParams(seq.num("n_pulses", positive=True, integer=True), seq.num("tau", positive=True))
    n = seq.num("n_points", positive=True, integer=True)
    dt = seq.num("dt", positive=True)
    t = seq.num("t_start", 0.0) + dt * np.arange(n)
    if not targets:
        raise ScenarioError("targets: correlation needs a target spin")
    prec = targets[0].precession(cfg)
    trace = sequences.correlation_trace(prec, p, t)
    peaks, width = estimation.dominant_frequencies(t, trace, 2)
    peaks = np.sort(peaks)
    summary = {"peaks_khz": peaks, "bin_khz": width, "midpoint_khz": float(peaks.mean()),
               "f0_khz": prec.f0, "f1_khz": prec.f1}
    return {"t_corr_us": t, "p": trace}, summary


def _pulsepol_grid(seq):
    f = _grid(seq, "f_start", "f_stop", "n_points")
    return f, 1.0 / (2.0 * f * 1e-3)


def _run_pulsepol(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    f, taus = _pulsepol_grid(seq)
    n_pol = seq.num("n_pol", 5, positive=True, integer=True)
    n_rep = seq.num("n_rep", 1, positive=True, integer=True)
    variants = [seq.choice("variant", ("PolX", "PolY"), "PolY")] if not seq.has("variants") else [
        v for v in seq.data["variants"] if v in ("PolX", "PolY")]
    if not variants:
        raise ScenarioError("sequence.variants: expected PolX and/or PolY")
    precs = _precs(cfg, targets + bath)
    if not precs:
        raise ScenarioError("targets: pulsepol-sweep needs at least one spin")
    cols = {"f_pol_khz": f, "tau_pol_us": taus}
    summary = {}
    pt = precs[0]
    for v in variants:
        runs = [sequences.pulsepol_scan(p, taus, n_pol, n_rep, v) for p in precs]
        p0 = 0.5 * (1.0 + np.prod([2.0 * r[0] - 1.0 for r in runs], axis=0))
        iz = 0.5 * runs[0][1][:, 2]
        cols[f"p0_{v}"] = p0
        cols[f"iz_{v}"] = iz
        for k in (3, 5):
            tau_k = k / (2.0 * pt.f_target * 1e-3)
            p0k, bk = sequences.pulsepol_scan(pt, [tau_k], n_pol, n_rep, v)
            near = np.abs(f - pt.f_target / k) <= 4.0
            summary[f"{v}_k{k}"] = {
                "f_expected_khz": pt.f_target / k,
                "f_dip_khz": float(f[near][np.argmin(p0[near])]) if near.any() else None,
                "p0_at_resonance": float(p0k[0]), "iz_at_resonance": float(0.5 * bk[0, 2]),
            }
    summary["f_target_khz"] = pt.f_target
    return cols, summary


def _dip_depth(p0, mask):
    return float(np.sum((1.0 - p0)[mask]))


def _run_selective(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    f, taus = _pulsepol_grid(seq)
    pp = sequences.PulsePolParams(float(taus[0]), seq.num("n_pol", 5, positive=True, integer=True),
                                  seq.num("n_rep", 1, positive=True, integer=True), "PolY")
    runs = seq.data.get("n_runs", "steady")
    if runs != "steady" and (not isinstance(runs, int) or runs < 1):
        raise ScenarioError("sequence.n_runs: expected a positive integer or 'steady'")
    n_runs = None if runs == "steady" else runs
    n_initial = seq.num("n_initial", 9, positive=True, integer=True)
    t_pi = seq.num("t_pi", 199.443, positive=True)
    window = seq.num("target_window_khz", 4.0, positive=True)
    if not targets:
        raise ScenarioError("targets: selective needs a target spin")
    pt = targets[0].precession(cfg)
    pbath = _precs(cfg, bath)
    res = sequences.selective_polarization(pt, pbath, pp, taus, t_pi=t_pi, n_initial=n_initial, n_runs=n_runs)
    sel_each = np.array([r.p0_each for r in res]).T  # (spins, M)
    unsel_each = np.array([sequences.pulsepol_scan(p, taus, pp.n_pol, 1, "PolY")[0] for p in [pt] + pbath])
    comb = lambda a: 0.5 * (1.0 + np.prod(2.0 * a - 1.0, axis=0))
    cols = {"f_pol_khz": f, "tau_pol_us": taus, "p0_unselective": comb(unsel_each), "p0_selective": comb(sel_each),
            "p0_target_selective": sel_each[0]}
    outside = np.ones_like(f, dtype=bool)
    for k in (3, 5):
        outside &= np.abs(f - pt.f_target / k) > window
    ratios = []
    for i in range(1, len(sel_each)):
        du, ds = _dip_depth(unsel_each[i], outside), _dip_depth(sel_each[i], outside)
        ratios.append(du / ds if ds > 0 else float("inf"))
    bu = comb(unsel_each[1:]) if len(pbath) else np.ones_like(f)
    bs = comb(sel_each[1:]) if len(pbath) else np.ones_like(f)
    summary = {
        "n_bath": len(pbath), "n_runs": runs,
        "min_dip_suppression": float(min(ratios)) if ratios else None,
        "median_dip_suppression": float(np.median(ratios)) if ratios else None,
        "combined_bath_suppression": _dip_depth(bu, outside) / max(_dip_depth(bs, outside), 1e-300),
        "target_p0_at_k3": float(np.interp(pt.f_target / 3, f[::-1], sel_each[0][::-1]))
        if f[0] > f[-1] else float(np.interp(pt.f_target / 3, f, sel_each[0])),
    }
    return cols, summary


def _coil(c: _Cfg):
    coil = c.sub("coil")
    return lattice.cartesian_of(1.0, d2r(coil.num("theta", 55.7)), d2r(coil.num("phi", 186.2)))


def azimuth_measurements(prec, spin: Spin, timing, e_rf, f_rf, phi_rfs, f_p, variant, n_pulses, tau, dt,
                         n_samples, step=None):
    """Synthesize, undersample and fit the free-precession readout for each RF phase.

    Returns ``(traces, fits, phi_0s, phi_n0s)`` with phases in radians.
    """
    n0, n1, phi_cp, _ = sequences.cp_axes_arrays(prec, tau)
    m, f_alias = estimation.undersampling_map(f_p, dt)
    ucfg = estimation.UndersamplingConfig(dt, timing.t0, m)
    t = timing.t0 + dt * np.arange(n_samples)
    v = blochsim.simulate_phi_n0_batch(np.full(len(phi_rfs), spin.phi), phi_rfs, f_p, timing, prec.theta_p,
                                       spin.theta, e_rf, f_rf, variant, step, return_vectors=True)
    traces, fits, phi0, phin = [], [], [], []
    for vk in v:
        b = qrotate(axis_angle_quat(prec.e_p, -2 * np.pi * f_p * 1e-3 * t), vk)
        py = sequences.readout_y(b, n0, n1, phi_cp, n_pulses)
        fit = estimation.fit_damped_cosine(t, py, f_alias)
        traces.append(py)
        fits.append(fit)
        phi0.append(estimation.recover_phase(fit.phase, ucfg))
        phin.append(float(np.arctan2(vk[1], vk[0]) % (2 * np.pi)))
    return t, traces, fits, np.array(phi0), np.array(phin), m


def _run_azimuth(c, cfg, targets, bath):
    pr = c.sub("protocol", True)
    rd = c.sub("readout", True)
    if not targets:
        raise ScenarioError("targets: azimuth-protocol needs a target spin")
    spin = targets[0]
    prec = spin.precession(cfg)
    f_rf = pr.num("f_rf", positive=True)
    timing = blochsim.ProtocolTiming.from_rf(
        f_rf, pr.num("n_periods", 22, positive=True, integer=True), pr.num("t0", 6.872, positive=True),
        pr.num("chirp_half", 1.0), pr.num("trigger", 0.2), pr.num("t_delay", 1.088),
    )
    e_rf = _coil(pr)
    phi_rfs = d2r(np.array(pr.nums("phi_rf", [0, 90, 180, 270])))
    f_p = pr.num("f_p", prec.f1)
    variant = pr.choice("variant", ("PolX", "PolY"), "PolY")
    n_pulses = rd.num("n_pulses", positive=True, integer=True)
    tau = rd.num("tau", positive=True)
    dt = rd.num("dt", positive=True)
    n_samples = rd.num("n_samples", positive=True, integer=True)
    t, traces, fits, phi0, phin, m = azimuth_measurements(
        prec, spin, timing, e_rf, f_rf, phi_rfs, f_p, variant, n_pulses, tau, dt, n_samples)
    cols = {"time_us": t}
    for r, tr in zip(np.degrees(phi_rfs), traces):
        cols[f"p_y_rf{int(round(r))}"] = tr
    phi_c = lattice.spherical_of(e_rf)[2]
    # PolX starts from +e_z, which shifts the high-field azimuth by pi
    shift = np.pi if variant == "PolX" else 0.0
    analytic = [blochsim.determine_phi(blochsim.phi_n_analytic(r, phi_c, f_p, f_rf, timing.t1) + shift, p0, spin.theta)
                for r, p0 in zip(phi_rfs, phi0)]
    summary = {
        "variant": variant, "alias_order": m, "f_p_khz": f_p,
        "phi_rf_deg": np.degrees(phi_rfs), "phi_0_deg": np.degrees(phi0), "phi_n0_deg": np.degrees(phin),
        "f_alias_khz": [f.frequency for f in fits],
        "phi_analytic_deg": float(np.degrees(estimation.circular_mean(analytic))),
        "phi_true_deg": float(np.degrees(spin.phi)),
    }
    if c.sub("fit").data.get("fit_phi", True):
        g = c.sub("fit").num("grid_step", 0.5, positive=True)
        fitres = blochsim.fit_phi(list(zip(phi_rfs, phi0)), timing, prec, e_rf, [f_p] * len(phi_rfs),
                                  theta=spin.theta, f_rf=f_rf, grid_step=d2r(g), variant=variant)
        summary["phi_fit_deg"] = float(np.degrees(fitres.phi))
        summary["phi_fit_accuracy_deg"] = float(np.degrees(fitres.accuracy))
        summary["phi_fit_ambiguous"] = fitres.ambiguous
    return cols, summary


def _run_sync(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    p = sequences.CpParams(seq.num("n_pulses", positive=True, integer=True), seq.num("tau", positive=True), "Y")
    t_l = seq.num("t_L", positive=True)
    m = seq.num("m_blocks", positive=True, integer=True)
    variant = seq.choice("variant", ("PolX", "PolY"), "PolY")
    spins = targets + bath
    if not spins:
        raise ScenarioError("targets: sync-readout needs at least one spin")
    precs = _precs(cfg, spins)
    trace = sequences.synchronized_readout(precs, t_l, m, p, variant=variant,
                                           rf_phase=d2r(seq.num("rf_phase", 0.0)))
    t = t_l * np.arange(m)
    peaks, width = estimation.dominant_frequencies(t, trace, 1)
    m_al, f_al = estimation.undersampling_map(precs[0].f0, t_l)
    summary = {"peak_khz": float(peaks[0]) if len(peaks) else None, "bin_khz": width,
               "expected_alias_khz": f_al, "alias_order": m_al}
    return {"block": np.arange(m), "time_us": t, "p_y": trace}, summary


def _run_delay(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    win = calibration.SensingWindow(seq.num("tau", positive=True), seq.num("n_pulses", 4, positive=True,
                                                                           integer=True))
    b_rf = seq.num("b_rf_mT", positive=True)
    t_delay = seq.num("t_delay")
    tw = _grid(seq, "t_wait_start", "t_wait_stop", "n_points")
    cols = {"t_wait_us": tw}
    summary = {"planted_delay_us": t_delay}
    for ph in seq.nums("phi_rf", [0.0]):
        wave = calibration.CosineBurst(seq.num("frequency", positive=True), seq.num("duration", positive=True),
                                       seq.num("t_start", 0.0), d2r(ph))
        py = calibration.p_y_from_phase(calibration.accumulated_phase(win, wave, t_delay, tw, b_rf, cfg.gamma_e))
        cols[f"p_y_rf{int(round(ph))}"] = py
        est, err = calibration.estimate_delay(list(zip(tw, py)), win, wave, cfg.gamma_e)
        summary[f"rf{int(round(ph))}"] = {"t_delay_us": est, "stderr_us": err}
    return cols, summary


def _run_field(c, cfg, targets, bath):
    seq = c.sub("sequence", True)
    b = seq.num("b_mT", positive=True)
    th, ph = d2r(seq.num("theta_lab")), d2r(seq.num("phi_lab"))
    noise = seq.num("noise_mhz", 0.0)
    seed = seq.num("seed", 0, integer=True)
    axes = calibration.nv_axes_lab()
    bvec = lattice.cartesian_of(b, th, ph)
    rng = np.random.default_rng(seed)
    fm, fp = [], []
    for a in axes:
        lo, hi = nv_resonances(cfg.D, cfg.gamma_e, bvec, a)
        fm.append(lo + noise * rng.uniform(-1, 1))
        fp.append(hi + noise * rng.uniform(-1, 1))
    fit = calibration.fit_field(list(zip(axes, fm, fp)), cfg.gamma_e)
    sensor = lattice.spherical_of(lattice.lab_to_sensor(fit.b_vec))
    cols = {"axis": np.arange(4), "axis_x": axes[:, 0], "axis_y": axes[:, 1], "axis_z": axes[:, 2],
            "f_minus_mhz": np.array(fm), "f_plus_mhz": np.array(fp)}
    summary = {"D_mhz": fit.d, "b_mT": fit.b_mag, "theta_lab_deg": float(np.degrees(fit.theta_lab)),
               "phi_lab_deg": float(np.degrees(fit.phi_lab)), "residual_mhz": fit.residual_rms,
               "theta_sensor_deg": float(np.degrees(sensor[1])), "phi_sensor_deg": float(np.degrees(sensor[2]))}
    return cols, summary


KINDS = {
    "cp-sweep": _run_cp_sweep,
    "cp-nutation": _run_cp_nutation,
    "correlation": _run_correlation,
    "pulsepol-sweep": _run_pulsepol,
    "selective": _run_selective,
    "azimuth-protocol": _run_azimuth,
    "sync-readout": _run_sync,
    "delay-scan": _run_delay,
    "field-fit": _run_field,
}


# ---------------------------------------------------------------------------
# public API

def parse_scenario(text: str, source: str = "<string>") -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: malformed YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    for key in ("name", "kind"):
        if not isinstance(data.get(key), str):
            raise ScenarioError(f"{source}: {key}: missing or not a string")
    if data["kind"] not in KINDS:
        raise ScenarioError(f"{source}: kind: unknown sequence kind {data['kind']!r}")
    return data


def load_scenario(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    return parse_scenario(text, str(path))


def bundled_scenarios() -> dict:
    """Map of bundled scenario name to file path."""
    root = resources.files("spinloc").joinpath("data/scenarios")
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".yaml")}


def run(scenario) -> ScenarioResult:
    """Run a parsed scenario (dict) or a scenario file path."""
    if not isinstance(scenario, dict):
        scenario = load_scenario(scenario)
    else:
        scenario = parse_scenario(yaml.safe_dump(scenario), scenario.get("name", "<dict>"))
    c = _Cfg(scenario, "")
    cfg = _sensor(c)
    targets = _targets(c)
    bath = _bath(c)
    cols, summary = KINDS[scenario["kind"]](c, cfg, targets, bath)
    return ScenarioResult(scenario["name"], scenario["kind"], cols, summary)
