import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mixqas import export
from mixqas.cli import main as cli_main
from mixqas.densmat import DensityMatrix, PureState, apply_1q_mat, apply_cnot_mat
from mixqas.harness import (
    ConfigError,
    ExperimentConfig,
    emit_outputs,
    parse_override,
    read_metrics_csv,
    read_resolved_config,
    read_summary_csv,
    run_experiment,
    substream,
)
from mixqas.searchspace import SuperCircuitStructure, gate_set_for, simulate_discrete

TINY_GHZ = {"task": "ghz", "n": 2, "epochs": 25, "seeds": [0, 1]}


# --- export ---------------------------------------------------------------------


def sample_record():
    rng = np.random.default_rng(0)
    gs = gate_set_for(3)
    A = rng.integers(0, len(gs), size=(4, 3))
    theta = rng.uniform(-np.pi, np.pi, size=(4, 3))
    return export.architecture_record(A, theta, gs, 3)


def test_architecture_json_round_trip(tmp_path):
    rec = sample_record()
    path = tmp_path / "arch.json"
    export.save_architecture(rec, path)
    back = export.load_architecture(path)
    assert back == rec
    assert set(back) == {"n", "m", "gateset", "A", "theta"}


def test_micro_record_keeps_supercircuit():
    gs = gate_set_for(2)
    structure = SuperCircuitStructure(np.array([[0, 1], [1, 2]]), 3)
    rec = export.architecture_record(np.zeros((3, 2), dtype=int),
                                     np.zeros((2, 3, 2)), gs, 3, structure)
    assert rec["supercircuit"] == [[0, 1], [1, 2]]
    text = export.to_qasm(rec)
    assert text.startswith("OPENQASM 2.0;")


def test_qasm_simulates_to_same_state():
    # parse the emitted QASM and rebuild the density matrix from u3/cx ops
    rec = sample_record()
    n, ops = export.parse_qasm(export.to_qasm(rec))
    assert n == 3
    mat = DensityMatrix.basis(n, 0).mat
    for op in ops:
        if op[0] == "u3":
            (th, phi, lam), q = op[1], op[2]
            mat = apply_1q_mat(mat, export.u3_matrix(th, phi, lam), q, n)
        else:
            mat = apply_cnot_mat(mat, op[1], op[2], n)
    direct = simulate_discrete(np.array(rec["A"]), np.array(rec["theta"]),
                               PureState.basis(n, 0))
    from mixqas.densmat import pure_to_density

    assert np.abs(mat - pure_to_density(direct).mat).max() < 1e-10


def test_qasm_skips_identity_gates():
    gs = gate_set_for(2)
    rec = export.architecture_record(np.zeros((2, 2), dtype=int),
                                     np.ones((2, 2)), gs, 2)
    text = export.to_qasm(rec)
    assert "u3" not in text and "cx" not in text


# --- config -----------------------------------------------------------------------


def test_config_defaults_per_task():
    cfg = ExperimentConfig.from_dict({"task": "ghz", "n": 3})
    assert cfg.epochs == 1000
    assert cfg.learning_rate == pytest.approx(0.1)
    assert cfg.t_max == 100
    assert cfg.layers() == 6  # m = 2n
    cls = ExperimentConfig.from_dict({"task": "classify"})
    assert cls.epochs == 10
    assert cls.learning_rate == pytest.approx(0.01 * np.sqrt(128))
    assert cls.t_max == 10
    assert cls.layers() == 15


def test_config_rejects_unknown_keys_and_values():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"task": "ghz", "n": 2, "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"task": "nope"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"task": "ghz", "algorithm": "sgd"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"task": "ghz", "seeds": []})
    with pytest.raises(ConfigError, match="micro"):
        ExperimentConfig.from_dict({"task": "ghz", "algorithm": "rho_micro"})
    with pytest.raises(ConfigError, match="depolarizing"):
        ExperimentConfig.from_dict({"task": "ghz", "algorithm": "qdarts",
                                    "noise_kind": "depolarizing",
                                    "noise_grid": [0.1]})


def test_parse_override_types():
    assert parse_override("epochs=50") == ("epochs", 50)
    assert parse_override("noise_grid=[0.0,0.1]") == ("noise_grid", [0.0, 0.1])
    assert parse_override("dataset=synthetic") == ("dataset", "synthetic")
    with pytest.raises(ConfigError):
        parse_override("no-equals-sign")


def test_substream_independence_and_determinism():
    a = substream(5, "init").normal(size=4)
    b = substream(5, "init").normal(size=4)
    c = substream(5, "gumbel").normal(size=4)
    d = substream(6, "init").normal(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


# --- emit / readers -----------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    cfg = ExperimentConfig.from_dict(dict(TINY_GHZ, out_dir=str(out / "run")))
    records = run_experiment(cfg)
    return cfg, records


def test_emit_refuses_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_outputs([], tmp_path / "never", {})
    assert not (tmp_path / "never").exists()


def test_emitted_files_and_round_trip(tiny_run):
    cfg, records = tiny_run
    out = cfg.out_dir
    names = sorted(os.listdir(out))
    assert "metrics.csv" in names and "summary.csv" in names
    assert "config.resolved" in names and "timings.csv" in names
    for rec in records:
        assert f"architecture_{rec.run_id}.json" in names
        assert f"circuit_{rec.run_id}.qasm" in names

    rows = read_metrics_csv(os.path.join(out, "metrics.csv"))
    runs = {r["run"] for r in rows}
    assert runs == {"0", "1"}
    per_run = [r for r in rows if r["run"] == "0" and r["key"] == "loss"]
    assert len(per_run) == cfg.epochs
    finals = [r for r in rows if r["key"] == "final_fidelity"]
    assert len(finals) == 2

    summary = read_summary_csv(os.path.join(out, "summary.csv"))
    fid = [s for s in summary if s["metric"] == "fidelity"]
    assert len(fid) == 1 and fid[0]["n_runs"] == 2
    values = [r.final["fidelity"] for r in records]
    assert fid[0]["mean"] == pytest.approx(np.mean(values))
    assert fid[0]["std"] == pytest.approx(np.std(values, ddof=1))

    round_tripped = read_resolved_config(os.path.join(out, "config.resolved"))
    assert round_tripped.task == "ghz"
    assert round_tripped.epochs == cfg.epochs

    arch = export.load_architecture(os.path.join(out, "architecture_0.json"))
    export.parse_qasm((open(os.path.join(out, "circuit_0.qasm"))).read())
    assert arch["n"] == 2


def test_identical_runs_are_byte_identical(tmp_path):
    paths = []
    for name in ("a", "b"):
        cfg = ExperimentConfig.from_dict(dict(TINY_GHZ, out_dir=str(tmp_path / name)))
        run_experiment(cfg)
        paths.append(tmp_path / name / "metrics.csv")
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_run_records_series_lengths(tiny_run):
    cfg, records = tiny_run
    for rec in records:
        for key in ("loss", "task_loss", "entropy", "learning_rate"):
            assert len(rec.series[key]) == cfg.epochs


# --- CLI -------------------------------------------------------------------------


def test_cli_run_and_export(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(dict(TINY_GHZ, epochs=10)))
    out = tmp_path / "out"
    assert cli_main(["run", str(cfg_path), "--seeds", "0", "--out", str(out)]) == 0
    assert (out / "metrics.csv").exists()

    qasm_out = tmp_path / "circ.qasm"
    rc = cli_main(["export-circuit", str(out / "architecture_0.json"),
                   "--format", "qasm", "--out", str(qasm_out)])
    assert rc == 0
    assert qasm_out.read_text().startswith("OPENQASM 2.0;")
    rc = cli_main(["export-circuit", str(out / "architecture_0.json"),
                   "--format", "json", "--out", str(tmp_path / "a.json")])
    assert rc == 0


def test_cli_config_error_exit_code(tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"task": "ghz", "bogus": True}))
    assert cli_main(["run", str(cfg_path)]) == 2
    assert cli_main(["run", str(tmp_path / "missing.json")]) == 2


def test_cli_runtime_error_exit_code(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    # valid config, but the graph file it points to does not parse
    graph = tmp_path / "graph.txt"
    graph.write_text("not-a-number\n")
    cfg_path.write_text(json.dumps({"task": "maxcut", "n": 3, "epochs": 5,
                                    "graph_file": str(graph), "seeds": [0]}))
    assert cli_main(["run", str(cfg_path)]) == 3


def test_cli_entry_point_subprocess():
    proc = subprocess.run([sys.executable, "-m", "mixqas.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "export-circuit" in proc.stdout
