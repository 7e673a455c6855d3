"""Command-line interface.

Units: angles in degrees, times in us, frequencies in kHz unless the flag
name says MHz. Exit status is 0 on success, 2 on input errors and 3 on
numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import blochsim, calibration, estimation, lattice, scenarios
from .errors import InputError, NumericalError
from .hamiltonian import HyperfineParams, SensorConfig, conditional_precession, e_perp_direction

OUTPUT_ENV = "SPINLOC_OUTPUT_DIR"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if not np.isfinite(v) else "%.4f" % (0.0 if v == 0 else v)
    return str(v)


def _emit(rows: list, fmt: str, out: str | None):
    """Write a list of flat dicts as CSV or JSON to ``out`` or stdout."""
    if fmt == "json":
        clean = [{k: (round(float(v), 10) if isinstance(v, (float, np.floating)) else
                      bool(v) if isinstance(v, np.bool_) else v) for k, v in r.items()} for r in rows]
        text = json.dumps(clean, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        keys = list(rows[0]) if rows else []
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])
        text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _pair(text: str, name: str):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"{name}: expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _read_table(path: str, columns: tuple, optional: tuple = ()):
    """Read a CSV with a header naming at least ``columns``; returns dict of arrays."""
    rows = [r for r in csv.reader(io.StringIO(_read(path))) if r and not r[0].startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in columns if c not in header]
    if missing:
        raise InputError(f"{path}:1: missing column(s) {', '.join(missing)}")
    keep = [c for c in columns + optional if c in header]
    out = {c: [] for c in keep}
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        for c in keep:
            try:
                out[c].append(float(row[header.index(c)]))
            except ValueError:
                raise InputError(f"{path}:{line}: field {c!r} is not a number: {row[header.index(c)]!r}") from None
    return {c: np.array(v) for c, v in out.items()}


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(a):
    target = a.scenario
    bundled = scenarios.bundled_scenarios()
    path = bundled[target] if target in bundled and not Path(target).exists() else target
    res = scenarios.run(path)
    out_dir = a.out or os.environ.get(OUTPUT_ENV) or "."
    data, summ = res.write(out_dir)
    if a.format == "json":
        sys.stdout.write(res.to_json())
    else:
        print(f"wrote {data}")
        print(f"wrote {summ}")


def cmd_list(a):
    _emit([{"name": k, "path": str(v)} for k, v in scenarios.bundled_scenarios().items()], a.format, a.out)


def cmd_fit(a):
    tab = _read_table(a.trace, ("time_us", "value"))
    f = estimation.fit_damped_cosine(tab["time_us"], tab["value"], a.f_hint, fit_decay=a.decay)
    row = {"amplitude": f.amplitude, "offset": f.offset, "frequency_khz": f.frequency,
           "phase_deg": float(np.degrees(f.phase)), "residual_rms": f.residual_rms}
    if a.decay:
        row["decay_time_us"] = f.decay_time
    _emit([row], a.format, a.out)


def cmd_invert(a):
    hf = estimation.estimate_hyperfine(a.fcp, a.f0, a.f1, a.tau)
    _emit([{"a_parallel_khz": hf.a_parallel, "a_perp_khz": hf.a_perp}], a.format, a.out)


def cmd_recover(a):
    cfg = estimation.UndersamplingConfig(a.dt, a.t0, a.m)
    eta = estimation.recover_phase(np.radians(a.eta), cfg)
    _emit([{"eta_deg": float(np.degrees(eta)), "m": a.m, "f_nyquist_khz": cfg.f_nyquist}], a.format, a.out)


def cmd_match(a):
    tol = _pair(a.tol, "--tol")
    table = lattice.load_candidates(a.table)
    hits = lattice.match_hyperfine(HyperfineParams(a.apar, a.aperp), table, tol)
    _emit([{"label": h.label, "a_parallel_khz": h.a_parallel, "a_perp_khz": h.a_perp} for h in hits],
          a.format, a.out)


def _timing(a):
    return blochsim.ProtocolTiming.from_rf(a.f_rf, a.n_periods, a.t0, a.chirp_half, a.trigger, a.t_delay)


def cmd_phi(a):
    tab = _read_table(a.measurements, ("phi_rf_deg", "phi_0_deg"), ("f_p_khz",))
    rf = np.radians(tab["phi_rf_deg"])
    p0 = np.radians(tab["phi_0_deg"])
    f_ps = tab.get("f_p_khz", np.full(rf.size, a.f_p if a.f_p else a.f_rf))
    theta = np.radians(a.theta)
    timing = _timing(a)
    e_rf = lattice.cartesian_of(1.0, np.radians(a.coil_theta), np.radians(a.coil_phi))
    if a.simulate:
        prec = conditional_precession(SensorConfig(B0=a.b0), HyperfineParams(a.apar, a.aperp),
                                      e_perp_direction(theta, 0.0))
        res = blochsim.fit_phi(list(zip(rf, p0)), timing, prec, e_rf, list(f_ps), theta=theta, f_rf=a.f_rf,
                               grid_step=np.radians(a.grid_step), variant=a.variant)
        row = {"method": "simulate", "phi_deg": float(np.degrees(res.phi)),
               "accuracy_deg": float(np.degrees(res.accuracy)), "ambiguous": res.ambiguous}
    else:
        phi_c = lattice.spherical_of(e_rf)[2]
        f_bar = float(np.mean(f_ps))
        shift = np.pi if a.variant == "PolX" else 0.0
        vals = [blochsim.determine_phi(blochsim.phi_n_analytic(r, phi_c, f_bar, a.f_rf, timing.t1) + shift, q, theta)
                for r, q in zip(rf, p0)]
        spread = np.degrees(np.sqrt(np.mean(estimation.wrap_pi(np.array(vals) - estimation.circular_mean(vals)) ** 2)))
        row = {"method": "analytic", "phi_deg": float(np.degrees(estimation.circular_mean(vals))),
               "accuracy_deg": float(spread), "ambiguous": False}
    _emit([row], a.format, a.out)


def cmd_calibrate(a):
    if a.what == "field":
        obs = calibration.parse_observations(_read(a.file), a.file)
        f = calibration.fit_field(obs, a.gamma_e)
        _emit([{"d_mhz": f.d, "b_mT": f.b_mag, "theta_lab_deg": float(np.degrees(f.theta_lab)),
                "phi_lab_deg": float(np.degrees(f.phi_lab)), "residual_mhz": f.residual_rms}], a.format, a.out)
    else:
        scan = calibration.parse_scan(_read(a.file), a.file)
        win = calibration.SensingWindow(a.tau, a.n_pulses)
        wave = calibration.CosineBurst(a.frequency, a.duration or 4 * a.tau, a.t_start, np.radians(a.phi_rf))
        t, err = calibration.estimate_delay(scan, win, wave, a.gamma_e)
        _emit([{"t_delay_us": t, "stderr_us": err}], a.format, a.out)


def cmd_lattice(a):
    sites = lattice.generate_sites(a.extent)
    if a.near:
        try:
            r, th, ph = (float(x) for x in a.near.split(","))
        except ValueError:
            raise InputError(f"--near: expected r,theta,phi, got {a.near!r}") from None
        ref = lattice.nearest_site(sites, r, np.radians(th), np.radians(ph))
        sites = lattice.equivalence_set(sites, ref)
    if a.phi_window:
        c, w = _pair(a.phi_window, "--phi-window")
        sites = lattice.sites_in_phi_range(sites, np.radians(c), np.radians(w))
    rows = [{"i": s.index[0], "j": s.index[1], "k": s.index[2], "sublattice": s.sublattice, "r_A": s.r,
             "theta_deg": float(np.degrees(s.theta)), "phi_deg": float(np.degrees(s.phi))} for s in sites]
    _emit(rows, a.format, a.out)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (a directory for 'run')")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default csv)")

    p = argparse.ArgumentParser(
        prog="spinloc",
        description="Single-nuclear-spin localisation toolkit. Angles in degrees, times in us, "
                    "frequencies in kHz unless the flag says MHz.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common], help="run a scenario file or bundled scenario name",
                       description=f"Writes <name>.csv and <name>.summary.json into --out, "
                                   f"${OUTPUT_ENV} or the current directory.")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("list", parents=[common], help="list bundled scenarios")
    s.set_defaults(func=cmd_list)

    s = sub.add_parser("fit", parents=[common], help="fit A cos(2 pi f t + phi0) + B to a trace",
                       description="Trace file: CSV with columns time_us,value.")
    s.add_argument("trace")
    s.add_argument("--f-hint", type=float, required=True, help="frequency guess, kHz")
    s.add_argument("--decay", action="store_true", help="also fit an exponential decay")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("invert-hyperfine", parents=[common], help="hyperfine parameters from f_cp")
    s.add_argument("--fcp", type=float, required=True, help="CP nutation frequency, kHz")
    s.add_argument("--f0", type=float, required=True, help="kHz")
    s.add_argument("--f1", type=float, required=True, help="kHz")
    s.add_argument("--tau", type=float, required=True, help="pulse spacing, us")
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("recover-phase", parents=[common], help="true phase from an undersampled fit phase")
    s.add_argument("--eta", type=float, required=True, help="fitted phase, deg")
    s.add_argument("--m", type=int, required=True, help="even alias order")
    s.add_argument("--t0", type=float, required=True, help="first sample time, us")
    s.add_argument("--dt", type=float, required=True, help="sampling interval, us")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("match-sites", parents=[common], help="candidate sites matching hyperfine values")
    s.add_argument("--apar", type=float, required=True, help="kHz")
    s.add_argument("--aperp", type=float, required=True, help="kHz")
    s.add_argument("--tol", default="5,1", help="tolerances 'par,perp' in kHz (default 5,1)")
    s.add_argument("--table", help="candidate CSV (label,a_parallel_khz,a_perp_khz); default bundled")
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("phi", parents=[common], help="azimuth from (phi_rf, phi_0) measurements",
                       description="Measurements: CSV with phi_rf_deg,phi_0_deg and optional f_p_khz.")
    s.add_argument("--measurements", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--analytic", action="store_true", help="high-field closed form (default)")
    g.add_argument("--simulate", action="store_true", help="fit with the Bloch-equation simulation")
    s.add_argument("--theta", type=float, required=True, help="polar angle of the site, deg")
    s.add_argument("--f-rf", type=float, default=215.6, help="RF frequency, kHz")
    s.add_argument("--f-p", type=float, help="mean precession frequency, kHz (default f_rf)")
    s.add_argument("--n-periods", type=int, default=22, help="RF pulse length in periods")
    s.add_argument("--t0", type=float, default=6.872, help="us")
    s.add_argument("--chirp-half", type=float, default=1.0, help="us")
    s.add_argument("--trigger", type=float, default=0.2, help="us")
    s.add_argument("--t-delay", type=float, default=1.088, help="us")
    s.add_argument("--coil-theta", type=float, default=55.7, help="deg")
    s.add_argument("--coil-phi", type=float, default=186.2, help="deg")
    s.add_argument("--apar", type=float, default=-173.1, help="kHz (simulate)")
    s.add_argument("--aperp", type=float, default=22.3, help="kHz (simulate)")
    s.add_argument("--b0", type=float, default=36.2, help="bias field, mT (simulate)")
    s.add_argument("--variant", choices=("PolY", "PolX"), default="PolY")
    s.add_argument("--grid-step", type=float, default=0.1, help="deg (simulate)")
    s.set_defaults(func=cmd_phi)

    s = sub.add_parser("calibrate", parents=[common], help="field or RF-delay calibration",
                       description="field: CSV axis_x,axis_y,axis_z,f_minus_mhz,f_plus_mhz. "
                                   "delay: CSV t_wait_us,p_y.")
    s.add_argument("what", choices=("field", "delay"))
    s.add_argument("file")
    s.add_argument("--gamma-e", type=float, default=28.0, help="MHz/mT")
    s.add_argument("--tau", type=float, default=2.319, help="delay: CP spacing, us")
    s.add_argument("--n-pulses", type=int, default=4, help="delay: CP pulses")
    s.add_argument("--frequency", type=float, default=215.6, help="delay: burst frequency, kHz")
    s.add_argument("--duration", type=float, help="delay: burst length, us (default 4 tau)")
    s.add_argument("--t-start", type=float, default=0.0, help="delay: nominal burst start, us")
    s.add_argument("--phi-rf", type=float, default=0.0, help="delay: burst phase, deg")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("lattice", parents=[common], help="list carbon sites in the sensor frame")
    s.add_argument("--extent", type=float, required=True, help="radius, Angstrom")
    s.add_argument("--near", help="'r,theta,phi': keep the equivalence set of the nearest site")
    s.add_argument("--phi-window", help="'center,halfwidth' in deg")
    s.set_defaults(func=cmd_lattice)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except InputError as exc:
        print(f"spinloc: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"spinloc: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
