"""Acceptance criteria 1-12, one check each.

Every check returns ``(ok, detail)``. Under pytest the lines are collected
and printed in the terminal summary; ``python3 tests/test_acceptance.py``
prints them directly.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from spinloc import scenarios  # noqa: E402
from spinloc.blochsim import (  # noqa: E402
    ProtocolTiming,
    determine_phi,
    fit_phi,
    simulate_phi_n0_batch,
)
from spinloc.calibration import (  # noqa: E402
    CosineBurst,
    SensingWindow,
    accumulated_phase,
    estimate_delay,
    fit_field,
    nv_axes_lab,
    p_y_from_phase,
)
from spinloc.estimation import (  # noqa: E402
    UndersamplingConfig,
    circular_mean,
    combine_independent,
    estimate_hyperfine,
    fit_damped_cosine,
    recover_phase,
    undersampling_map,
)
from spinloc.hamiltonian import (  # noqa: E402
    HyperfineParams,
    SensorConfig,
    conditional_precession,
    e_perp_direction,
    nv_resonances,
    precession_from_frequencies,
)
from spinloc.lattice import (  # noqa: E402
    cartesian_of,
    equivalence_set,
    generate_sites,
    lab_to_sensor,
    nearest_site,
    sites_in_phi_range,
    spherical_of,
)
from spinloc.sequences import (  # noqa: E402
    CpParams,
    NuclearSpinState,
    cp_nutation_frequency,
    cp_signal,
    resonance_tau,
)
from spinloc.spincore import apply, compose, decompose, rotation_from_axis_angle  # noqa: E402

r = np.radians
d = np.degrees
HF = HyperfineParams(-173.1, 22.3)
THETA = r(94.8)
F_RF = 215.6
TIMING = ProtocolTiming.from_rf(F_RF)
E_RF = cartesian_of(1.0, r(55.7), r(186.2))
PHI_RFS = r(np.array([0.0, 90.0, 180.0, 270.0]))
BUNDLED = scenarios.bundled_scenarios()


def target(phi_deg):
    return conditional_precession(SensorConfig(), HF, e_perp_direction(THETA, r(phi_deg)))


def adiff(a, b):
    """Smallest absolute angle difference in degrees between radian angles."""
    return abs((d(a) - d(b) + 180.0) % 360.0 - 180.0)


def random_spin(rng):
    return rng.uniform(-300, 300), rng.uniform(0, 150), e_perp_direction(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))


def random_ball(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v) * rng.uniform(0, 1)


# ---------------------------------------------------------------------------

def criterion_1():
    hf = estimate_hyperfine(10.2, 387.5, 215.6, 1.6875)
    ok = abs(hf.a_parallel + 173.1) <= 0.1 and abs(hf.a_perp - 22.3) <= 0.1
    return ok, f"A_par={hf.a_parallel:.3f} kHz, A_perp={hf.a_perp:.3f} kHz"


def criterion_2():
    prec = conditional_precession(SensorConfig(B0=36.2, gamma_c=10.705), HF, e_perp_direction(THETA, 0.0))
    ok = abs(prec.f1 - 215.6) <= 0.1 and abs(d(prec.theta_p) - 5.9) <= 0.1
    return ok, f"f1={prec.f1:.3f} kHz, theta_p={d(prec.theta_p):.3f} deg"


def criterion_3():
    rng = np.random.default_rng(2024)
    f0 = SensorConfig().f0
    worst = 0.0
    for _ in range(1000):
        spin = random_spin(rng)
        prec = precession_from_frequencies(f0, *spin)
        tau, n = rng.uniform(0.2, 5.0), int(rng.choice([2, 4, 8, 16, 32]))
        bloch = random_ball(rng)
        px = cp_signal(prec, CpParams(n, tau, "X"))
        py = cp_signal(prec, CpParams(n, tau, "Y"), NuclearSpinState(bloch))
        worst = max(worst, abs(px - oracles.cp_readout([spin], f0, tau, n, "X")),
                    abs(py - oracles.cp_readout([spin], f0, tau, n, "Y", [bloch])))
    return worst < 1e-9, f"1000 draws, max |P - oracle| = {worst:.2e}"


def criterion_4():
    prec = target(248.8)
    expected = 1 / (2 * 301.6e-3)
    tau_dip = resonance_tau(prec, 1.55, 1.80)
    rel = abs(tau_dip - expected) / expected
    nut = scenarios.run(BUNDLED["fig2b-nutation"]).summary["f_cp_fit_khz"]
    model = float(cp_nutation_frequency(prec, 1.6875))
    ok = rel <= 0.005 and abs(nut - 10.2) <= 0.3
    return ok, (f"dip tau={tau_dip:.4f} us vs {expected:.4f} ({100 * rel:.2f}%), "
                f"nutation fit={nut:.3f} kHz (model {model:.3f})")


def criterion_5():
    s = scenarios.run(BUNDLED["fig2c-correlation"]).summary
    lo, hi = sorted(s["peaks_khz"])
    mid = 0.5 * (s["f0_khz"] + s["f1_khz"])
    ok = abs(lo - 215.6) <= s["bin_khz"] and abs(hi - 387.5) <= s["bin_khz"] and abs(mid - 301.55) <= 0.01
    return ok, f"peaks {lo:.2f}, {hi:.2f} kHz (bin {s['bin_khz']:.3f}), midpoint {mid:.3f} kHz"


def criterion_6():
    pp = scenarios.run(BUNDLED["fig3-pulsepol"]).summary
    sel = scenarios.run(BUNDLED["fig3-selective"]).summary
    f_t = pp["f_target_khz"]
    dips_ok = all(abs(pp[f"{v}_k{k}"]["f_dip_khz"] - f_t / k) <= 0.005 * f_t / k
                  for v in ("PolY", "PolX") for k in (3, 5))
    iz = {key: pp[key]["iz_at_resonance"] for key in ("PolY_k3", "PolX_k3", "PolY_k5", "PolX_k5")}
    flips = (np.sign(iz["PolY_k3"]) == -np.sign(iz["PolX_k3"]) != 0
             and np.sign(iz["PolY_k5"]) == -np.sign(iz["PolX_k5"])
             and np.sign(iz["PolY_k3"]) == -np.sign(iz["PolY_k5"]))
    supp = sel["min_dip_suppression"]
    ok = dips_ok and flips and supp >= 10
    return ok, (f"dips at {pp['PolY_k3']['f_dip_khz']}/{pp['PolY_k5']['f_dip_khz']} kHz "
                f"(f_t/3={f_t / 3:.2f}, f_t/5={f_t / 5:.2f}), <Iz> PolY k3/k5 = "
                f"{iz['PolY_k3']:+.3f}/{iz['PolY_k5']:+.3f}, PolX = {iz['PolX_k3']:+.3f}/{iz['PolX_k5']:+.3f}, "
                f"min bath-dip suppression {supp:.1f}x over {sel['n_bath']} spins")


def criterion_7():
    m, fa = undersampling_map(215.8, 9.6)
    t0, dt = 6.872, 9.6
    t = t0 + dt * np.arange(200)
    worst = 0.0
    for eta in (0.0, 1.0, 2.5, 4.0, 6.0):
        y = 0.3 * np.cos(2 * np.pi * 215.8e-3 * t + eta) + 0.5
        fit = fit_damped_cosine(t, y, fa)
        worst = max(worst, r(adiff(recover_phase(fit.phase, UndersamplingConfig(dt, t0, m)), eta)))
    ok = m == 4 and abs(fa - 7.5) <= 0.05 and worst <= 1e-6
    return ok, f"m={m}, alias={fa:.4f} kHz, round-trip phase error {worst:.1e} rad"


def criterion_8():
    # analytic path on the measured relations
    vals = [determine_phi(r(89.2) - a, a + r(334.0), THETA) for a in PHI_RFS]
    phi_a = d(circular_mean(vals))
    ok_a = abs(phi_a - 243.2) <= 0.1
    # simulated phi_n(0) against the eight reference values
    worst = 0.0
    for phi, f_p, want in ((0.0, 215.6, [90.9, 4.8, 282.7, 188.1]), (248.8, 215.7908, [98.9, 358.4, 272.4, 189.9])):
        prec = target(phi)
        got = simulate_phi_n0_batch(r(phi), PHI_RFS, f_p, TIMING, prec.theta_p, THETA, E_RF, F_RF)
        worst = max(worst, max(adiff(g, r(w)) for g, w in zip(got, want)))
    ok_s = worst <= 0.5
    # fit on the four-point dataset with shared mean precession frequency
    prec = target(248.8)
    measured = [(a, (a + r(334.0)) % (2 * np.pi)) for a in PHI_RFS]
    fit = fit_phi(measured, TIMING, prec, E_RF, [215.7908] * 4, theta=THETA, f_rf=F_RF, grid_step=r(0.5))
    ok_f = adiff(fit.phi, r(248.8)) <= 1.0
    # planted round trip
    prec = target(250.9)
    f_p = [prec.f1] * 4
    pn = simulate_phi_n0_batch(r(250.9), PHI_RFS, f_p, TIMING, prec.theta_p, THETA, E_RF, F_RF)
    planted = [(a, (r(250.9) - p - np.pi) % (2 * np.pi)) for a, p in zip(PHI_RFS, pn)]
    back = fit_phi(planted, TIMING, prec, E_RF, f_p, theta=THETA, f_rf=F_RF, grid_step=r(0.5))
    ok_p = adiff(back.phi, r(250.9)) <= 0.2
    return ok_a and ok_s and ok_f and ok_p, (
        f"analytic {phi_a:.2f} deg; reference-value max dev {worst:.2f} deg; dataset fit {d(fit.phi):.2f} deg; "
        f"planted 250.9 -> {d(back.phi):.2f} deg")


def criterion_9():
    sites = generate_sites(12.0)
    ref = nearest_site(sites, 6.84, r(94.8), r(250.9))
    pos_ok = abs(ref.r - 6.84) <= 0.05 and abs(d(ref.theta) - 94.8) <= 0.5 and adiff(ref.phi, r(250.9)) <= 0.5
    eq = equivalence_set(sites, ref)
    w1 = ref not in sites_in_phi_range(eq, r(243.2), r(5.3))
    w2 = sites_in_phi_range(eq, r(248.8), r(2.7)) == [ref]
    w3 = sites_in_phi_range(eq, r(247.8), r(4.1)) == [ref]
    return pos_ok and w1 and w2 and w3, (
        f"nearest site ({ref.r:.4f} A, {d(ref.theta):.2f} deg, {d(ref.phi):.2f} deg) "
        f"[{'within' if pos_ok else 'outside'} tolerance]; windows 1/2/3 behave: {w1}/{w2}/{w3}")


def criterion_10():
    _, th, ph = spherical_of(lab_to_sensor(cartesian_of(1.0, r(5.2), r(81.6))))
    ok = abs(d(th) - 55.7) <= 0.1 and adiff(ph, r(186.2)) <= 0.1
    return ok, f"sensor frame ({d(th):.3f}, {d(ph):.3f}) deg"


def criterion_11():
    bvec = 1.47 * cartesian_of(1.0, r(5.2), r(81.6))
    obs = [(ax, *nv_resonances(2870.4, 28.0, bvec, ax)) for ax in nv_axes_lab()]
    f = fit_field(obs)
    ok_f = (abs(f.d - 2870.4) <= 0.01 and abs(f.b_mag - 1.47) <= 0.001
            and abs(d(f.theta_lab) - 5.2) <= 0.1 and abs(d(f.phi_lab) - 81.6) <= 0.1)
    win, burst = SensingWindow(2.319, 4), CosineBurst(215.6, 9.276)
    tw = np.linspace(-6.0, 14.0, 401)
    scan = list(zip(tw, p_y_from_phase(accumulated_phase(win, burst, 1.088, tw, 0.002))))
    t_delay, _ = estimate_delay(scan, win, burst)
    ok_d = abs(t_delay - 1.088) <= 0.003
    return ok_f and ok_d, (f"field fit D={f.d:.3f} MHz, B={f.b_mag:.4f} mT, ({d(f.theta_lab):.3f}, "
                           f"{d(f.phi_lab):.3f}) deg; delay {t_delay:.6f} us")


def criterion_12():
    rng = np.random.default_rng(12)
    # rotation algebra round trips and group action
    rot_err = 0.0
    for _ in range(500):
        ax1, ax2 = (v / np.linalg.norm(v) for v in rng.normal(size=(2, 3)))
        a1, a2 = rng.uniform(0, 4 * np.pi, 2)
        ra, rb = rotation_from_axis_angle(ax1, a1), rotation_from_axis_angle(ax2, a2)
        n, ang = decompose(ra)
        back = rotation_from_axis_angle(n, ang)
        v = rng.normal(size=3)
        rot_err = max(rot_err, min(np.abs(back.quat - ra.quat).max(), np.abs(back.quat + ra.quat).max()),
                      np.abs(apply(compose(ra, rb), v) - apply(ra, apply(rb, v))).max())
    # probability bounds
    f0 = SensorConfig().f0
    lo, hi = 1.0, 0.0
    for _ in range(500):
        prec = precession_from_frequencies(f0, *random_spin(rng))
        tau, n = rng.uniform(0.05, 10), int(rng.choice([2, 4, 16, 64]))
        for p in (cp_signal(prec, CpParams(n, tau, "X")),
                  cp_signal(prec, CpParams(n, tau, "Y"), NuclearSpinState(random_ball(rng)))):
            lo, hi = min(lo, p), max(hi, p)
    bounds_ok = lo >= -1e-12 and hi <= 1 + 1e-12
    # product rule against the two-spin tensor oracle
    prod_err = 0.0
    for _ in range(20):
        spins = [random_spin(rng) for _ in range(2)]
        tau = rng.uniform(0.5, 3.0)
        singles = [cp_signal(precession_from_frequencies(f0, *s), CpParams(16, tau)) for s in spins]
        prod_err = max(prod_err, abs(combine_independent(singles) - oracles.cp_readout(spins, f0, tau, 16, "X")))
    # integrator step halving
    prec = target(248.8)
    step = 1.0 / (200.0 * F_RF * 1e-3)
    a = simulate_phi_n0_batch(r(248.8), PHI_RFS, 215.7908, TIMING, prec.theta_p, THETA, E_RF, F_RF, step=step)
    b = simulate_phi_n0_batch(r(248.8), PHI_RFS, 215.7908, TIMING, prec.theta_p, THETA, E_RF, F_RF, step=step / 2)
    halving = max(adiff(x, y) for x, y in zip(a, b))
    ok = rot_err < 1e-10 and bounds_ok and prod_err < 1e-9 and halving < 0.01
    return ok, (f"rotation err {rot_err:.1e}; P in [{lo:.3g}, {hi:.3g}]; product rule err {prod_err:.1e}; "
                f"step halving {halving:.1e} deg")


CHECKS = {n: globals()[f"criterion_{n}"] for n in range(1, 13)}


def line(n, ok, detail):
    return f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("n", sorted(CHECKS))
def test_criterion(n, acceptance_log):
    ok, detail = CHECKS[n]()
    acceptance_log[n] = line(n, ok, detail)
    print(acceptance_log[n])
    assert ok, detail


if __name__ == "__main__":
    results = []
    for n, check in CHECKS.items():
        ok, detail = check()
        results.append(ok)
        print(line(n, ok, detail), flush=True)
    sys.exit(0 if all(results) else 1)
