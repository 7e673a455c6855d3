import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from spinloc import scenarios
from spinloc.errors import InputError
from spinloc.scenarios import ScenarioError, parse_scenario, run

GOLDEN = Path(__file__).parent / "golden"
BUNDLED = scenarios.bundled_scenarios()


@pytest.fixture(scope="module")
def results():
    return {}


def result(name, cache):
    if name not in cache:
        cache[name] = run(BUNDLED[name])
    return cache[name]


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_golden_byte_identical(name, results, request):
    res = result(name, results)
    data, summ = GOLDEN / f"{name}.csv", GOLDEN / f"{name}.summary.json"
    if request.config.getoption("--update-golden"):
        res.write(GOLDEN)
    assert data.exists() and summ.exists(), "golden missing; regenerate with --update-golden"
    assert res.to_csv() == data.read_text()
    assert res.to_json() == summ.read_text()


@pytest.mark.parametrize("name", ["fig2a-cp-spectrum", "figS11-sync"])
def test_rerun_is_deterministic(name, results):
    assert run(BUNDLED[name]).to_csv() == result(name, results).to_csv()


def test_every_figure_has_a_scenario():
    for stem in ("fig2a", "fig2b", "fig2c", "fig3-pulsepol", "fig3-selective", "fig4-azimuth-poly",
                 "fig4-azimuth-polx", "figS2", "figS3", "figS10", "figS11"):
        assert any(n.startswith(stem) for n in BUNDLED), stem


def test_nutation_frequency(results):
    s = result("fig2b-nutation", results).summary
    assert s["f_cp_fit_khz"] == pytest.approx(10.2, abs=0.3)
    assert s["f_cp_model_khz"] == pytest.approx(10.2, abs=0.3)


def test_nutation_copies_follow_product_rule(results):
    cols = result("fig2b-nutation", results).columns
    env = np.exp(-np.asarray(cols["time_us"]) / 1230.0)
    base = (2 * np.asarray(cols["p_x_n1"]) - 1) / env
    for k in (2, 3):
        assert np.allclose((2 * np.asarray(cols[f"p_x_n{k}"]) - 1) / env, base ** k, atol=1e-12)


def test_polx_is_shifted_by_half_turn(results):
    y = result("fig4-azimuth-poly", results).summary["phi_0_deg"]
    x = result("fig4-azimuth-polx", results).summary["phi_0_deg"]
    d = (np.asarray(x) - np.asarray(y)) % 360
    assert np.allclose(d, 180.0, atol=1e-6)


def test_empty_bath_zero_coupling_is_flat():
    scen = {"name": "flat", "kind": "cp-sweep",
            "targets": [{"a_parallel": 0.0, "a_perp": 0.0}],
            "sequence": {"n_pulses": 16, "tau_start": 1.0, "tau_stop": 2.0, "n_points": 51}}
    res = run(scen)
    assert np.allclose(res.columns["p_x"], 1.0, atol=1e-12)


def test_csv_output_shape(results):
    res = result("fig2a-cp-spectrum", results)
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == ["tau_us", "p_x"]
    assert len(rows) == 1 + len(res.columns["tau_us"])
    assert json.loads(res.to_json())["kind"] == "cp-sweep"


def test_write_creates_both_files(tmp_path, results):
    data, summ = result("figS2-field", results).write(tmp_path / "out")
    assert data.read_text().startswith("axis,")
    assert json.loads(summ.read_text())["name"] == "figS2-field"


# ---------------------------------------------------------------------------
# errors carry field paths

BASE = "name: x\nkind: cp-sweep\ntargets:\n  - {a_parallel: 1.0, a_perp: 1.0}\n"


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("name: x\nkind: teleport\n", "kind"),
        ("kind: cp-sweep\n", "name"),
        ("[1, 2]\n", "mapping"),
        ("name: x\nkind: cp-sweep\n  bad: [\n", "malformed"),
        (BASE + "sequence: {n_pulses: 16, tau_start: 1.0, tau_stop: 2.0}\n", "sequence.n_points"),
        (BASE + "sequence: {n_pulses: x, tau_start: 1.0, tau_stop: 2.0, n_points: 5}\n", "sequence.n_pulses"),
        (BASE + "sequence: {n_pulses: 16, tau_start: 2.0, tau_stop: 1.0, n_points: 5}\n", "sequence"),
        ("name: x\nkind: cp-sweep\ntargets:\n  - {a_parallel: 1.0}\n"
         "sequence: {n_pulses: 16, tau_start: 1.0, tau_stop: 2.0, n_points: 5}\n", "a_perp"),
        ("name: x\nkind: cp-sweep\ntargets:\n  - {a_parallel: 1.0, a_perp: 1.0, theta: 200}\n"
         "sequence: {n_pulses: 16, tau_start: 1.0, tau_stop: 2.0, n_points: 5}\n", "theta"),
        (BASE + "bath: {sample: {extent: 10.0}}\n"
         "sequence: {n_pulses: 16, tau_start: 1.0, tau_stop: 2.0, n_points: 5}\n", "bath.sample.seed"),
    ],
)
def test_errors_name_field(text, fragment):
    with pytest.raises(ScenarioError, match=fragment.replace(".", r"\.")):
        run(parse_scenario(text))


def test_scenario_error_is_input_error():
    assert issubclass(ScenarioError, InputError)


def test_missing_file():
    with pytest.raises(ScenarioError):
        run("/nonexistent/scenario.yaml")


def test_seeded_bath_is_reproducible():
    text = (BASE + "bath: {sample: {extent: 12.0, seed: 4, r_min: 4.0}}\n"
            "sequence: {n_pulses: 16, tau_start: 1.5, tau_stop: 1.8, n_points: 21}\n")
    a, b = run(parse_scenario(text)), run(parse_scenario(text))
    assert a.to_csv() == b.to_csv()
