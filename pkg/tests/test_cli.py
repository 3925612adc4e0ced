import csv
import hashlib
import json

import pytest

from shrinker_lab.cli import emit_report, main
from shrinker_lab.config import EXPERIMENTS, parse_config
from shrinker_lab.errors import InvalidArgumentError, SchemaError, UsageError


def write_cfg(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, text, out="bundle"):
    cfg = write_cfg(tmp_path, text)
    dest = tmp_path / out
    assert main(["run", cfg, "--out", str(dest)]) == 0
    return dest


SPECTRUM = "experiment = spectrum\nbase.kind = line\nbase.n = 1\nspectrum.count = 5\n"
FLOW = ("experiment = flow-run\nbase.kind = line\nbase.n = 1\nflow.dtau = 0.05\nflow.tau_end = 2\n"
        "init.kind = hermite\ninit.amplitude = 0.001\ninit.index = 2\n"
        "flow.stabilization = project-nonneg-modes\n")


def test_spectrum_bundle(tmp_path):
    dest = run(tmp_path, SPECTRUM)
    data = json.loads((dest / "spectrum.json").read_text())
    assert len(data["eigenvalues"]) == 5 and data["kernel_dimension"] == 1
    assert abs(data["eigenvalues"][0] - 0.5) < 1e-3


def test_flow_bundle_has_monotone_energy(tmp_path):
    dest = run(tmp_path, FLOW)
    with open(dest / "trace.csv") as fh:
        F = [float(r["F"]) for r in csv.DictReader(fh)]
    assert len(F) > 3 and all(b <= a + 1e-15 for a, b in zip(F, F[1:]))
    assert emit_report(dest) == ["report_fgap.csv"]


def test_unknown_experiment_and_key_are_usage_errors(tmp_path, capsys):
    assert main(["run", write_cfg(tmp_path, "experiment = frobnicate\n")]) == 2
    assert main(["run", write_cfg(tmp_path, SPECTRUM + "base.colour = red\n")]) == 2
    assert main(["frobnicate"]) == 2
    assert "UsageError" in capsys.readouterr().err


def test_config_parse_errors():
    with pytest.raises(UsageError):
        parse_config("experiment = spectrum\nspectrum.count = five\n")
    with pytest.raises(UsageError):
        parse_config("experiment = spectrum\nexperiment = spectrum\n")
    with pytest.raises(UsageError):
        parse_config("base.kind = line\n")
    with pytest.raises(InvalidArgumentError):
        parse_config("experiment = spectrum\nbase.kind = line\nbase.n = 2\n")


def test_constraint_violation_exits_one(tmp_path):
    cfg = write_cfg(tmp_path, "experiment = spectrum\nloja.theta = 0.7\n")
    assert main(["run", cfg]) == 1


def test_report_on_empty_bundle(tmp_path):
    with pytest.raises(SchemaError):
        emit_report(tmp_path)
    assert main(["report", str(tmp_path)]) == 1


def test_loja_fit_report_matches_stored_fit(tmp_path):
    dest = run(tmp_path, "experiment = loja-fit\nbase.kind = line\nbase.n = 1\n")
    emit_report(dest)
    rep = json.loads((dest / "report_fit.json").read_text())
    assert rep["slope_difference"] <= 1e-12


def test_list(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(EXPERIMENTS) == 8
    assert main(["list", "--json"]) == 0
    cat = json.loads(capsys.readouterr().out)
    assert {c["name"] for c in cat} == set(EXPERIMENTS)


def test_runs_are_deterministic(tmp_path):
    a = run(tmp_path, FLOW, "a")
    b = run(tmp_path, FLOW, "b")
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_manifest_hashes(tmp_path):
    dest = run(tmp_path, SPECTRUM)
    man = json.loads((dest / "manifest.json").read_text())
    assert man["experiment"] == "spectrum"
    for name, digest in man["artifacts"].items():
        assert hashlib.sha256((dest / name).read_bytes()).hexdigest() == digest
    assert parse_config(man["config_text"]).digest() == man["config_sha256"]


def test_default_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("SHRINKER_LAB_OUT", str(tmp_path / "root"))
    cfg = write_cfg(tmp_path, SPECTRUM)
    assert main(["run", cfg]) == 0
    made = list((tmp_path / "root").iterdir())
    assert len(made) == 1 and made[0].name.startswith("spectrum-")
