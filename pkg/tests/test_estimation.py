import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from spinloc.errors import (
    DomainError,
    FitError,
    InconsistentInputsError,
    InputError,
    SingularGeometryError,
    UnsupportedAliasOrderError,
)
from spinloc.estimation import (
    UndersamplingConfig,
    alias_phase,
    combine_independent,
    combine_independent_complex,
    dominant_frequencies,
    estimate_hyperfine,
    fit_damped_cosine,
    recover_phase,
    transfer_count_bound,
    undersampling_map,
)
from spinloc.hamiltonian import e_perp_direction, precession_from_frequencies
from spinloc.sequences import cp_nutation_frequency, cp_signal, CpParams

TWO_PI = 2 * np.pi


def tone(t, amp, off, f, phase, decay=None):
    env = 1.0 if decay is None else np.exp(-t / decay)
    return amp * env * np.cos(TWO_PI * f * 1e-3 * t + phase) + off


def angle_diff(a, b):
    return abs((a - b + np.pi) % TWO_PI - np.pi)


# ---------------------------------------------------------------------------
# fitting

def test_fit_exact_round_trip():
    t = np.linspace(0, 50, 400)
    fit = fit_damped_cosine(t, tone(t, 0.4, 0.5, 215.6, 1.0), 214.0)
    assert fit.amplitude == pytest.approx(0.4, abs=1e-6)
    assert fit.offset == pytest.approx(0.5, abs=1e-6)
    assert fit.frequency == pytest.approx(215.6, abs=1e-6)
    assert fit.phase == pytest.approx(1.0, abs=1e-6)
    assert fit.decay_time is None
    assert fit.residual_rms < 1e-9


def test_fit_recovers_decay_time():
    t = np.linspace(0, 1000, 1500)
    y = tone(t, 0.3, 0.5, 10.0, 0.4, decay=5100.0)
    fit = fit_damped_cosine(t, y, 10.1, fit_decay=True)
    assert fit.decay_time == pytest.approx(5100.0, rel=0.1)
    assert fit.frequency == pytest.approx(10.0, abs=1e-4)


def test_fit_normalises_amplitude_and_phase():
    t = np.linspace(0, 50, 300)
    fit = fit_damped_cosine(t, tone(t, -0.2, 0.0, 100.0, 0.3), 100.0)
    assert fit.amplitude > 0
    assert 0 <= fit.phase < TWO_PI
    assert angle_diff(fit.phase, 0.3 + np.pi) < 1e-6


def test_fit_is_deterministic():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 50, 300)
    y = tone(t, 0.4, 0.5, 215.6, 2.0) + 0.02 * rng.normal(size=t.size)
    a = fit_damped_cosine(t, y, 215.0)
    b = fit_damped_cosine(t, y, 215.0)
    assert a == b


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 40), st.floats(0, TWO_PI))
def test_fit_phase_equivariant_under_time_shift(shift, phase):
    t = np.linspace(0, 60, 300)
    f = 215.6
    y = tone(t, 0.4, 0.5, f, phase)
    a = fit_damped_cosine(t, y, f)
    b = fit_damped_cosine(t - shift, y, f)
    # same samples on a time axis shifted by -shift: phase advances by 2 pi f shift
    assert angle_diff(b.phase, a.phase + TWO_PI * a.frequency * 1e-3 * shift) < 1e-6


@pytest.mark.parametrize(
    "t, y, hint",
    [
        (np.linspace(0, 10, 5), np.zeros(5), 10.0),
        (np.linspace(0, 10, 20), np.zeros(19), 10.0),
        (np.linspace(0, 10, 20), np.zeros(20), -1.0),
        (np.linspace(0, 1, 20), np.zeros(20), 10.0),
    ],
)
def test_fit_rejects_bad_input(t, y, hint):
    with pytest.raises(InputError):
        fit_damped_cosine(t, y, hint)


def test_fit_rejects_non_finite_samples():
    t = np.linspace(0, 50, 100)
    y = tone(t, 0.4, 0.5, 215.6, 1.0)
    y[3] = np.nan
    with pytest.raises(InputError):
        fit_damped_cosine(t, y, 215.0)


def test_fit_failure_carries_residual(monkeypatch):
    import spinloc.estimation as est

    real = est.least_squares

    def stalled(*args, **kwargs):
        sol = real(*args, **kwargs)
        sol.status = 0
        return sol

    monkeypatch.setattr(est, "least_squares", stalled)
    t = np.linspace(0, 50, 100)
    with pytest.raises(FitError) as info:
        fit_damped_cosine(t, tone(t, 0.4, 0.5, 215.6, 1.0), 215.0)
    assert info.value.best_residual < 1e-6


# ---------------------------------------------------------------------------
# hyperfine inversion

def test_inversion_of_measured_values():
    hf = estimate_hyperfine(10.2, 387.5, 215.6, 1.6875)
    assert hf.a_parallel == pytest.approx(-173.1, abs=0.1)
    assert hf.a_perp == pytest.approx(22.3, abs=0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(-250, 150), st.floats(2, 120), st.floats(0.3, 4.0))
def test_inversion_round_trip(a_par, a_perp, tau):
    f0 = 387.521
    prec = precession_from_frequencies(f0, a_par, a_perp, [1, 0, 0])
    a, b = np.pi * f0 * 1e-3 * tau, np.pi * prec.f1 * 1e-3 * tau
    if abs(np.sin(a) * np.sin(b)) < 1e-2:
        return
    f_cp = float(cp_nutation_frequency(prec, tau))
    hf = estimate_hyperfine(f_cp, f0, prec.f1, tau)
    assert hf.a_parallel == pytest.approx(a_par, abs=1e-6)
    assert hf.a_perp == pytest.approx(a_perp, abs=1e-6)


def test_inversion_uncoupled_limit():
    f0, tau = 387.5, 1.0
    hf = estimate_hyperfine(1 / (2 * tau * 1e-3) - f0, f0, f0, tau)
    assert hf.a_parallel == pytest.approx(0.0, abs=1e-9)
    assert hf.a_perp == pytest.approx(0.0, abs=1e-4)


def test_inversion_singular_geometry():
    with pytest.raises(SingularGeometryError):
        estimate_hyperfine(10.0, 500.0, 215.6, 2.0)  # sin(pi f0 tau) = 0


def test_inversion_inconsistent():
    with pytest.raises(InconsistentInputsError):
        estimate_hyperfine(2.0, 387.5, 215.6, 1.6875)


# ---------------------------------------------------------------------------
# undersampling

def test_undersampling_of_precession_frequency():
    m, fa = undersampling_map(215.8, 9.6)
    assert m == 4
    assert fa == pytest.approx(7.5, abs=0.05)


def test_undersampling_nyquist_satisfied():
    assert undersampling_map(10.0, 9.6) == (0, 10.0)


def test_undersampling_odd_order():
    with pytest.raises(UnsupportedAliasOrderError):
        undersampling_map(60.0, 9.6)  # f_N = 52.08, m = 1


@pytest.mark.parametrize("f, dt", [(-1.0, 9.6), (1.0, 0.0)])
def test_undersampling_domain(f, dt):
    with pytest.raises(DomainError):
        undersampling_map(f, dt)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2000), st.floats(0.5, 20))
def test_undersampling_reconstruction(f, dt):
    fn = 0.5 / (dt * 1e-3)
    if int(np.floor(f / fn)) % 2:
        return
    m, fa = undersampling_map(f, dt)
    assert 0 <= fa < fn
    assert fa + m * fn == pytest.approx(f, abs=1e-9)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0, t0=0.0, m=0), dict(dt=1.0, t0=0.0, m=-2)])
def test_undersampling_config_validation(kwargs):
    with pytest.raises(InputError):
        UndersamplingConfig(**kwargs)


def test_undersampling_config_odd_order():
    with pytest.raises(UnsupportedAliasOrderError):
        UndersamplingConfig(9.6, 6.872, 3)


def test_recover_phase_without_aliasing():
    cfg = UndersamplingConfig(9.6, 6.872, 0)
    assert recover_phase(1.234, cfg) == pytest.approx(1.234)


def test_recover_phase_direct_value():
    cfg = UndersamplingConfig(9.6, 6.872, 4)
    assert recover_phase(0.0, cfg) == pytest.approx((-4 * np.pi * 6.872 / 9.6) % TWO_PI, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, TWO_PI, exclude_max=True), st.sampled_from([0, 2, 4, 6]), st.floats(0, 30), st.floats(1, 15))
def test_recover_phase_bijection(eta, m, t0, dt):
    cfg = UndersamplingConfig(dt, t0, m)
    back = alias_phase(recover_phase(eta, cfg), cfg)
    assert angle_diff(back, eta) < 1e-9
    assert 0 <= recover_phase(eta, cfg) < TWO_PI


@pytest.mark.parametrize("eta", [0.0, 1.0, 3.5, 6.0])
def test_phase_recovery_pipeline(eta):
    f, dt, t0 = 215.8, 9.6, 6.872
    m, fa = undersampling_map(f, dt)
    t = t0 + dt * np.arange(200)
    fit = fit_damped_cosine(t, tone(t, 0.3, 0.5, f, eta), fa)
    assert fit.frequency == pytest.approx(fa, abs=1e-6)
    assert angle_diff(recover_phase(fit.phase, UndersamplingConfig(dt, t0, m)), eta) < 1e-6


# ---------------------------------------------------------------------------
# independent-spin combination

def test_combine_single_is_identity():
    for p in (0.0, 0.2, 0.7, 1.0):
        assert combine_independent([p]) == pytest.approx(p)


def test_combine_half_absorbs():
    assert combine_independent([0.1, 0.5, 0.93]) == pytest.approx(0.5)


probs = st.floats(0, 1)


@settings(max_examples=200, deadline=None)
@given(probs, probs, probs)
def test_combine_algebra(a, b, c):
    r = combine_independent([a, b, c])
    assert 0 <= r <= 1
    assert r == pytest.approx(combine_independent([c, a, b]), abs=1e-12)
    assert r == pytest.approx(combine_independent([combine_independent([a, b]), c]), abs=1e-12)
    assert r == pytest.approx(combine_independent([a, combine_independent([b, c])]), abs=1e-12)


def test_combine_rejects_out_of_range():
    with pytest.raises(DomainError):
        combine_independent([0.5, 1.2])


def test_combine_matches_two_spin_density_matrix():
    rng = np.random.default_rng(4)
    for _ in range(20):
        spins = [(rng.uniform(-200, 200), rng.uniform(0, 80), e_perp_direction(rng.uniform(0, np.pi), rng.uniform(0, TWO_PI)))
                 for _ in range(2)]
        tau, n = rng.uniform(0.5, 3.0), 16
        singles = [cp_signal(precession_from_frequencies(387.521, a, b, e), CpParams(n, tau)) for a, b, e in spins]
        joint = oracles.cp_readout(spins, 387.521, tau, n, "X")
        assert combine_independent(singles) == pytest.approx(joint, abs=1e-9)


def test_combine_complex_matches_polarised_two_spin_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        spins = [(rng.uniform(-200, 200), rng.uniform(0, 80), e_perp_direction(rng.uniform(0, np.pi), rng.uniform(0, TWO_PI)))
                 for _ in range(2)]
        blochs = [rng.normal(size=3) for _ in range(2)]
        blochs = [b / np.linalg.norm(b) * 0.8 for b in blochs]
        tau, n = rng.uniform(0.5, 3.0), 8
        from spinloc.sequences import NuclearSpinState
        px = [cp_signal(precession_from_frequencies(387.521, a, b, e), CpParams(n, tau, "X"), NuclearSpinState(v))
              for (a, b, e), v in zip(spins, blochs)]
        py = [cp_signal(precession_from_frequencies(387.521, a, b, e), CpParams(n, tau, "Y"), NuclearSpinState(v))
              for (a, b, e), v in zip(spins, blochs)]
        jx, jy = combine_independent_complex(px, py)
        assert jx == pytest.approx(oracles.cp_readout(spins, 387.521, tau, n, "X", blochs), abs=1e-9)
        assert jy == pytest.approx(oracles.cp_readout(spins, 387.521, tau, n, "Y", blochs), abs=1e-9)


# ---------------------------------------------------------------------------
# helpers

def test_dominant_frequencies():
    t = np.arange(1024) * 0.25
    y = 0.3 * np.cos(TWO_PI * 215.8e-3 * t) + 0.2 * np.cos(TWO_PI * 387.5e-3 * t)
    peaks, width = dominant_frequencies(t, y, 2)
    assert abs(peaks[0] - 215.8) <= width
    assert abs(peaks[1] - 387.5) <= width


def test_dominant_frequencies_needs_uniform_grid():
    with pytest.raises(InputError):
        dominant_frequencies([0, 1, 3, 4, 5], np.zeros(5))


def test_transfer_count_bound_value():
    f_t = 0.5 * (387.521 + 215.6)
    bound = transfer_count_bound(f_t, 22.3, 5)
    assert bound == pytest.approx(np.pi * f_t / (3 * (2 + np.sqrt(2)) * 22.3 * 5))
    assert bound > 0
