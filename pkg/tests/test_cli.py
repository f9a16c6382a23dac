import json
import math
import subprocess
import sys

import pytest

from bellframe import cli
from bellframe.scenario import (
    ScenarioError,
    bundled_path,
    bundled_scenarios,
    load_scenario_file,
    parse_scenario,
)

EXPECTED_BUNDLE = {
    "fig1_standard", "fig1_simultaneous_5ps", "fig1_preferred_lab_1e4c",
    "fig1_wheel_100mps_absorber", "fig1_wheel_detector_multipsi",
    "moving_beam_splitters", "loophole_detection",
}


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def base_doc():
    return json.loads(bundled_path("fig1_standard").read_text())


# -- scenario files --------------------------------------------------------------

def test_bundle_present():
    assert EXPECTED_BUNDLE <= set(bundled_scenarios())


@pytest.mark.parametrize("name", sorted(EXPECTED_BUNDLE))
def test_bundled_round_trip(name):
    sf = load_scenario_file(name)
    again = parse_scenario(sf.to_json())
    assert again.data == sf.data
    assert json.loads(again.to_json()) == json.loads(sf.to_json())
    sf.build()


def test_unknown_key_rejected():
    doc = base_doc()
    doc["geometry"]["colour"] = "blue"
    with pytest.raises(ScenarioError, match="geometry"):
        parse_scenario(json.dumps(doc))


def test_malformed_json_position():
    with pytest.raises(ScenarioError, match="line 1"):
        parse_scenario('{"state": ')


@pytest.mark.parametrize("path, value", [
    (("trials",), 0),
    (("geometry", "separation_m"), -1.0),
    (("efficiency", "A"), 1.5),
    (("state", "kind"), "bogus"),
])
def test_invalid_values_rejected(path, value):
    doc = base_doc()
    target = doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises((ScenarioError, ValueError)):
        parse_scenario(json.dumps(doc)).build()


def test_overrides():
    sf = load_scenario_file("fig1_standard").with_overrides(trials=10, seed=3)
    sc = sf.build()
    assert sc.trials == 10 and sc.seed == 3


def test_scenario_from_path(tmp_path):
    p = tmp_path / "custom.json"
    doc = base_doc()
    doc["trials"] = 1234
    p.write_text(json.dumps(doc))
    assert load_scenario_file(p).build().trials == 1234


# -- formatting -------------------------------------------------------------------

def test_float_format_six_significant():
    assert cli.fmt_float(2.8284271247) == "2.82843e+00"
    assert cli.fmt_float(math.inf) == "inf"


def test_json_emitter_sorted_and_deterministic():
    text = cli.to_json({"b": 1.0, "a": [True, None, 2]})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [True, None, 2], "b": 1.0}


# -- run ------------------------------------------------------------------------------

def test_run_standard_json(capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", "fig1_standard", "--format", "json")
    assert code == 0
    assert 2.80 <= json.loads(out)["abs_s"] <= 2.86


def test_run_preferred_json(capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", "fig1_preferred_lab_1e4c")
    assert code == 0
    assert json.loads(out)["abs_s"] < 0.02


def test_run_output_byte_identical(tmp_path):
    outs = []
    for workers in ("1", "4"):
        p = tmp_path / f"out{workers}.json"
        assert cli.main(["run", "--scenario", "fig1_wheel_detector_multipsi", "--trials", "50000",
                         "--workers", workers, "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_run_csv(capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", "fig1_standard", "--trials", "20000",
                           "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "key,value"
    assert 'correlations[0].pair,"a,b"' in lines


def test_run_missing_file(capsys):
    code, _, err = run_cli(capsys, "run", "--scenario", "/nowhere/scenario.json")
    assert code == 1
    assert "/nowhere/scenario.json" in err


def test_run_insufficient_statistics(capsys):
    code, _, err = run_cli(capsys, "run", "--scenario", "loophole_detection", "--trials", "3",
                           "--seed", "0")
    assert code == 2
    assert "a,b" in err


def test_run_invalid_override(capsys):
    code, _, _ = run_cli(capsys, "run", "--scenario", "fig1_standard", "--trials", "0")
    assert code == 1


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run"])
    assert exc.value.code == 1


# -- bound --------------------------------------------------------------------------

def test_bound_lab(capsys):
    code, out, _ = run_cli(capsys, "bound", "--length-m", "10600", "--jitter-s", "5e-12",
                           "--beta", "0", "--format", "json")
    assert code == 0
    assert json.loads(out)["bound_c"] == pytest.approx(7.07e6, rel=0.005)


def test_bound_cmb_parallel(capsys):
    code, out, _ = run_cli(capsys, "bound", "--length-m", "10600", "--jitter-s", "5e-12",
                           "--beta", "1.23e-3", "--rho", "0", "--format", "json")
    assert json.loads(out)["bound_c"] == pytest.approx(8.1e2, rel=0.01)


def test_bound_sweep_csv(capsys):
    code, out, err = run_cli(capsys, "bound", "--length-m", "10600", "--jitter-s", "5e-12",
                             "--beta", "1.23e-3", "--rho-sweep", "10000", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "rho_rad,bound_c,divergent"
    assert len(lines) == 10_001
    assert max(float(line.split(",")[1]) for line in lines[1:]) > 2e4
    assert "divergence window" in err


def test_bound_sweep_json(capsys):
    code, out, _ = run_cli(capsys, "bound", "--length-m", "10600", "--jitter-s", "5e-12",
                           "--beta", "1.23e-3", "--rho-sweep", "101", "--format", "json")
    doc = json.loads(out)
    assert doc["divergent_samples"] == 1  # rho = pi/2 is sampled
    lo, hi = doc["divergence_window_rad"]
    assert lo < math.pi / 2 < hi


def test_bound_rejects_luminal_frame(capsys):
    code, _, _ = run_cli(capsys, "bound", "--length-m", "10600", "--jitter-s", "5e-12",
                         "--beta", "1.0")
    assert code == 1


# -- before-before -----------------------------------------------------------------

def test_before_before_fig1(capsys):
    code, out, _ = run_cli(capsys, "before-before", "--length-m", "10600", "--speed-mps", "100",
                           "--alignment-m", "0.001", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["before_before"] is True
    assert doc["required_speed_mps"] == pytest.approx(28.3, abs=0.05)
    assert doc["alignment_uncertainty_s"] == pytest.approx(3.34e-12, rel=1e-3)


@pytest.mark.parametrize("speed", ["10", "0"])
def test_before_before_too_slow(capsys, speed):
    code, out, _ = run_cli(capsys, "before-before", "--length-m", "10600", "--speed-mps", speed,
                           "--alignment-m", "0.001")
    assert code == 0
    assert out.startswith("before-before: FALSE")


def test_before_before_explicit_offset(capsys):
    # B absorbs before A in the lab: A cannot come first in its own frame
    code, out, _ = run_cli(capsys, "before-before", "--length-m", "10600", "--speed-mps", "100",
                           "--alignment-m", "0.001", "--lab-offset-s=-1e-12", "--format", "json")
    assert json.loads(out)["before_before"] is False


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bellframe", "bound", "--length-m", "10600",
                           "--jitter-s", "5e-12"], capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("v_QI/c >= 7.07156e+06")
