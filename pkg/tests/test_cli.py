import csv
import json
import math

import numpy as np
import pytest

from qcjdr._validation import ParameterError
from qcjdr.cli import main
from qcjdr.config import ExperimentConfig, apply_override
from qcjdr.decoder import Circuit, codeword_states, cost, make_codebook
from qcjdr.jc import transduce_bpsk
from qcjdr.limits import n_helstrom
from qcjdr.sweep import (
    load_model,
    row_seed,
    run_sweep,
    sweep_columns,
    sweep_tasks,
    csv_text,
)

FAST = ["--set", "optimizer.restarts=4", "--set", "optimizer.unitary_restarts=2",
        "--set", "jc.grid_points=401"]


def _read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema_version=")
    return list(csv.DictReader(lines[1:]))


def test_defaults_and_overrides():
    cfg = ExperimentConfig.load(overrides=["temperature=1.0", "codebook.n=4", "codebook.M=8",
                                           "rmpn.values=[0.1, 0.2]"])
    assert cfg["temperature"] == 1.0
    assert cfg["codebook"]["n"] == 4
    assert cfg.rmpn_values() == [0.1, 0.2]
    assert cfg.transducer(1e-3).omega1 == pytest.approx(2 * math.pi * 31e12)


@pytest.mark.parametrize("override", ["bogus=1", "transducer.nope=2", "codebook=3", "noequals"])
def test_bad_overrides_rejected(override):
    with pytest.raises(ParameterError):
        ExperimentConfig.load(overrides=[override])


@pytest.mark.parametrize("override", ["noise.p1=2", "codebook.M=9", "jobs=0", "chi=-1",
                                      "rmpn.values=[-0.1]", "codebook.kind=best"])
def test_invalid_values_rejected(override):
    with pytest.raises((ParameterError, ValueError)):
        ExperimentConfig.load(overrides=[override])


def test_yaml_file_and_unknown_key(tmp_path):
    good = tmp_path / "run.yaml"
    good.write_text("temperature: 1.0\ncodebook:\n  n: 2\n  M: 2\n")
    cfg = ExperimentConfig.load(good)
    assert cfg["codebook"]["M"] == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("transducer:\n  kappa9: 1\n")
    with pytest.raises(ParameterError):
        ExperimentConfig.load(bad)


def test_override_parsing():
    tree = {"a": {"b": 0, "c": None}}
    apply_override(tree, "a.b=1e-3")
    apply_override(tree, "a.c=[1, 2]")
    assert tree == {"a": {"b": 1e-3, "c": [1, 2]}}


def test_channel_command(capsys):
    assert main(["channel", "--set", "temperature=1.0"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["eta_tr"] == pytest.approx(0.924, abs=0.002)
    assert rec["nbar_tr"] == pytest.approx(1.8, abs=0.2)
    assert set(rec) >= {"eta_tr", "nbar_tr", "tau1", "tau3", "nbar0"}


def test_qubits_command(tmp_path):
    out = tmp_path / "q.json"
    assert main(["qubits", "--rmpn", "4", "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["tau"] > 0.95
    assert len(rec["bloch_plus"]) == 3 and rec["t_star"] > 0


def test_missing_config_exits_2(capsys):
    assert main(["sweep", "--config", "missing.file"]) == 2
    assert "missing.file" in capsys.readouterr().err


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["channel", "--no-such-flag"])
    assert info.value.code == 2
    assert main(["channel", "--set", "unknown=1"]) == 2
    assert main(["qubits", "--rmpn", "-1"]) == 2


def test_empty_grid(tmp_path):
    out = tmp_path / "empty.csv"
    assert main(["sweep", "--set", "rmpn.values=[]", "--out", str(out)]) == 0
    assert _read_csv(out) == []
    assert json.loads(out.with_suffix(".manifest.json").read_text())["rows"] == 0


def test_sweep_row_beats_helstrom(tmp_path):
    out = tmp_path / "s.csv"
    args = ["sweep", "--set", "rmpn.values=[0.2]", "--set", "circuit.layers=[3]",
            "--set", "circuit.include_unitary=false", "--out", str(out)]
    assert main(args) == 0
    (row,) = _read_csv(out)
    assert row["status"] == "ok" and row["L"] == "3"
    assert float(row["p_err"]) < n_helstrom(0.2, 3)
    assert float(row["p_err"]) == pytest.approx(1 - float(row["J"]), abs=1e-12)
    man = json.loads(out.with_suffix(".manifest.json").read_text())
    assert man["config"]["codebook"]["n"] == 3
    assert man["row_seeds"] == [int(row["seed"])]
    assert "numpy" in man["versions"]


def test_sweep_deterministic_and_parallel_equal(tmp_path):
    base = ["sweep", "--set", "rmpn.values=[0.1, 0.3]", "--set", "circuit.layers=[1, 2]",
            "--seed", "11"] + FAST
    outs = []
    for i, jobs in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{i}.csv"
        assert main(base + ["--jobs", jobs, "--out", str(out)]) == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    assert outs[0] == outs[2]
    assert len(outs[0].splitlines()) == 2 + 6


def test_seeds_are_position_derived():
    cfg = ExperimentConfig.load(overrides=["seed=5", "rmpn.values=[0.1, 0.2]"])
    tasks = sweep_tasks(cfg)
    assert [t["index"] for t in tasks] == list(range(len(tasks)))
    assert tasks[3]["seed"] == row_seed(5, 3)
    assert row_seed(5, 3) != row_seed(6, 3)


def test_row_level_error_capture(monkeypatch, tmp_path):
    import qcjdr.sweep as sweep

    real = sweep.evaluate_point

    def flaky(cfg, rmpn, *args, **kwargs):
        if rmpn > 0.25:
            raise FloatingPointError("synthetic failure")
        return real(cfg, rmpn, *args, **kwargs)

    monkeypatch.setattr(sweep, "evaluate_point", flaky)
    cfg = ExperimentConfig.load(overrides=["rmpn.values=[0.1, 0.3, 0.2]", "circuit.layers=[1]",
                                           "circuit.include_unitary=false"] + FAST[1::2])
    rows = run_sweep(cfg)
    assert [r.status for r in rows] == ["ok", "error", "ok"]
    assert "synthetic failure" in rows[1].message
    assert math.isnan(rows[1].p_err)
    text = csv_text(rows, sweep_columns(), "sweep")
    assert text.count("\n") == 5


def test_train_artifact_roundtrip(tmp_path, cold_channel):
    out = tmp_path / "model.json"
    assert main(["train", "--rmpn", "0.2", "--layers", "2", "--out", str(out)] + FAST) == 0
    decoder, rec = load_model(out)
    assert isinstance(decoder, Circuit) and rec["kind"] == "circuit"
    assert set(rec) >= {"layout", "angles", "J", "seed", "config_hash"}
    book = make_codebook(3, 4)
    cfg = ExperimentConfig.load(overrides=FAST[1::2])
    pair = transduce_bpsk(math.sqrt(0.2), cold_channel, cfg.jc_config())
    assert cost(decoder, codeword_states(book, pair), book) == pytest.approx(rec["J"], abs=1e-10)
    uout = tmp_path / "unitary.json"
    assert main(["train", "--rmpn", "0.2", "--unitary", "--out", str(uout)] + FAST) == 0
    U, urec = load_model(uout)
    assert urec["kind"] == "unitary"
    assert np.allclose(U @ U.conj().T, np.eye(8), atol=1e-10)
    assert urec["J"] >= rec["J"] - 1e-4


def test_capacity_command(tmp_path):
    out = tmp_path / "cap.csv"
    assert main(["capacity", "--set", "capacity.num=6", "--set", "jc.grid_points=801",
                 "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert len(rows) == 6
    assert list(rows[0]) == ["rmpn", "c1", "holevo_optical", "jdr_ideal", "jdr_channel"]
    c1 = [float(r["c1"]) for r in rows]
    opt = [float(r["holevo_optical"]) for r in rows]
    assert np.all(np.diff(c1) > 0) and np.all(np.diff(opt) > 0)
    for r in rows:
        assert float(r["jdr_ideal"]) <= float(r["holevo_optical"]) + 1e-12


def test_capacity_defaults_have_forty_rows(tmp_path):
    cfg = ExperimentConfig.load()
    c = cfg["capacity"]
    assert c["num"] == 40 and c["start"] == 1e-3 and c["stop"] == 10.0


def test_noise_command(tmp_path):
    out = tmp_path / "noise.csv"
    args = ["noise", "--set", "rmpn.values=[0.2]", "--set", "circuit.layers=[2]",
            "--set", "circuit.include_unitary=false", "--set", "noise.p1=0.001",
            "--set", "noise.p2=0.01", "--set", "noise.pm=0.01", "--out", str(out)] + FAST
    assert main(args) == 0
    (row,) = _read_csv(out)
    assert float(row["p_err_noisy"]) > float(row["p_err_ideal"])
