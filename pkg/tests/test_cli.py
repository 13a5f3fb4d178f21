import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from polaritonkit import dispersion
from polaritonkit.cli import main
from polaritonkit.medium import lorentz

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

HEADERS = {
    "dispersion": ["k", "re_Omega", "im_Omega", "re_D", "im_D", "family", "m"],
    "propagator": ["tau", "H_residue", "H_numeric", "U_residue", "abs_err"],
    "sumrules": ["omega_alpha", "im_sum", "re_sum", "n_roots", "pass"],
    "green": ["re_omega", "im_omega", "pair", "separation", "component", "re", "im"],
    "hopfield": ["omega_alpha", "Omega_plus", "Omega_minus", "omega_L"],
    "quasimode": ["omega_alpha", "branch", "Omega", "integral", "target", "rel_err"],
    "verify": ["check", "value", "tolerance", "relation", "pass"],
}


def _write(tmp_path, obj, name="scn.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_bad_medium_names_the_field(tmp_path, capsys):
    scn = _write(tmp_path, {"version": 1, "medium": {"label": "x", "resonances": [{"f": 1, "omega": 1, "gamma": -1}]}})
    code, out, err = _run(["dispersion", "--scenario", scn], capsys)
    assert code == 1 and out == ""
    doc = json.loads(err)
    assert doc["error"] == "validation"
    assert doc["field"] == "medium.resonances[0].gamma"


def test_malformed_medium_file(tmp_path, capsys):
    (tmp_path / "m.json").write_text('{"label": "x", "resonances": [{"f": 1, "omega": "one", "gamma": 0.1}]}')
    scn = _write(tmp_path, {"version": 1, "medium_file": "m.json"})
    code, _, err = _run(["dispersion", "--scenario", scn], capsys)
    assert code == 1
    assert json.loads(err)["field"] == "medium.resonances[0].omega"


@pytest.mark.parametrize("scn, field", [
    ({"version": 1, "colour": "red"}, "colour"),
    ({"version": 1, "dispersion": {"omega_alfa": 1.0}}, "dispersion.omega_alfa"),
    ({"version": 2}, "version"),
    ({}, "version"),
    ({"version": 1, "seed": 1.5}, "seed"),
])
def test_scenario_validation(tmp_path, capsys, scn, field):
    scn.setdefault("medium", {"label": "m", "resonances": [{"f": 1.0, "omega": 1.0, "gamma": 0.1}]})
    code, _, err = _run(["dispersion", "--scenario", _write(tmp_path, scn)], capsys)
    assert code == 1
    assert json.loads(err)["field"] == field


def test_unreadable_scenario(tmp_path, capsys):
    code, _, err = _run(["verify", "--scenario", str(tmp_path / "missing.json")], capsys)
    assert code == 1 and json.loads(err)["field"] == "scenario"
    (tmp_path / "bad.json").write_text("{not json")
    code, _, _ = _run(["verify", "--scenario", str(tmp_path / "bad.json")], capsys)
    assert code == 1


def test_bad_arguments_exit_one(capsys):
    assert main(["nonsense"]) == 1
    assert main(["verify", "--threads", "0"]) == 1
    capsys.readouterr()


def _roots_csv(tmp_path, drop):
    med = lorentz(1.0, 1.0, 0.1)
    lines = [",".join(HEADERS["dispersion"])]
    roots = dispersion.transverse_roots(med, 1.0)
    for r in roots[: len(roots) - drop]:
        lines.append(",".join(map(repr, [1.0, r.omega.real, r.omega.imag, r.D.real, r.D.imag])) + f",transverse,{r.m}")
    p = tmp_path / f"roots{drop}.csv"
    p.write_text("\n".join(lines) + "\n")
    return p.name


def test_sumrules_from_complete_root_file(tmp_path, capsys):
    scn = _write(tmp_path, {"version": 1, "sumrules": {"roots_file": _roots_csv(tmp_path, 0)}})
    code, out, _ = _run(["sumrules", "--scenario", scn], capsys)
    assert code == 0
    assert out.strip().endswith("true")


def test_truncated_root_file_is_a_tolerance_failure(tmp_path, capsys):
    scn = _write(tmp_path, {"version": 1, "sumrules": {"roots_file": _roots_csv(tmp_path, 1)}})
    code, out, err = _run(["sumrules", "--scenario", scn], capsys)
    assert code == 2
    doc = json.loads(err)
    assert doc["error"] == "numerical"
    full = len(dispersion.transverse_roots(lorentz(1.0, 1.0, 0.1), 1.0))
    assert doc["details"]["failures"][0]["n_roots"] == full - 1
    assert out.strip().endswith("false")


def test_verify_quick_passes(capsys):
    code, out, err = _run(["verify", "--quick", "--scenario", str(SCENARIOS / "verify.json")], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and all(r["pass"] == "true" for r in rows)
    assert json.loads(err)["failed"] == 0


@pytest.mark.parametrize("name", ["dispersion", "propagator", "sumrules", "green", "hopfield", "quasimode"])
def test_headers_and_determinism(tmp_path, name):
    scn = str(SCENARIOS / f"{name}.json")
    outs = []
    for run in range(2):
        d = tmp_path / f"run{run}"
        assert main([name, "--scenario", scn, "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    text = outs[0][f"{name}.csv"].decode()
    assert text.splitlines()[0].split(",") == HEADERS[name]


def test_threads_do_not_change_output(tmp_path):
    scn = str(SCENARIOS / "dispersion.json")
    assert main(["dispersion", "--scenario", scn, "--out", str(tmp_path / "a")]) == 0
    assert main(["dispersion", "--scenario", scn, "--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    assert (tmp_path / "a/dispersion.csv").read_bytes() == (tmp_path / "b/dispersion.csv").read_bytes()


def test_sweep_output_is_sorted(tmp_path, capsys):
    scn = _write(tmp_path, {"version": 1, "medium": {"label": "m", "resonances": [{"f": 1.0, "omega": 1.0, "gamma": 0.1}]},
                            "dispersion": {"omega_alpha": [2.0, 0.5, 1.0], "longitudinal": False}})
    code, out, _ = _run(["dispersion", "--scenario", scn], capsys)
    ks = [float(r["k"]) for r in csv.DictReader(io.StringIO(out))]
    assert code == 0 and ks == sorted(ks)


def test_evolve_writes_trajectory_and_report(tmp_path):
    scn = str(SCENARIOS / "evolve_homogeneous.json")
    outs = []
    for run in range(2):
        d = tmp_path / f"run{run}"
        assert main(["evolve", "--scenario", scn, "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"trajectory.csv", "energy_report.json"}
    header = outs[0]["trajectory.csv"].decode().splitlines()[0].split(",")
    assert header[:4] == ["t", "energy", "electromagnetic", "material"]
    rep = json.loads(outs[0]["energy_report.json"])
    assert rep["drift"] < 1e-8 and rep["method"] == "order8"


def test_json_format(tmp_path, capsys):
    code, out, _ = _run(["hopfield", "--format", "json"], capsys)
    assert code == 0
    rows = json.loads(out)
    assert set(rows[0]) == set(HEADERS["hopfield"])


def test_full_precision_output(capsys):
    code, out, _ = _run(["hopfield", "--scenario", str(SCENARIOS / "hopfield.json")], capsys)
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["omega_L"]) == 2**0.5
    assert code == 0


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    res = subprocess.run([sys.executable, "-m", "polaritonkit", "hopfield", "--scenario",
                          str(SCENARIOS / "hopfield.json")], capture_output=True, text=True, env=env, timeout=120)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0].split(",") == HEADERS["hopfield"]
    res = subprocess.run([sys.executable, "-m", "polaritonkit", "sumrules", "--scenario",
                          str(tmp_path / "missing.json")], capture_output=True, text=True, timeout=120)
    assert res.returncode == 1 and res.stdout == ""
    assert json.loads(res.stderr)["error"] == "validation"
