"""End-to-end command-line runs, in process, against real artifacts."""

import hashlib
import json
import os

import pytest

from prmlab.cli import main
from prmlab.evaluate import report_from_log
from prmlab.ingest import read_dataset, read_jsonl, write_jsonl


def _sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One gen -> train -> eval -> sweep -> bon pipeline shared by the module."""
    d = tmp_path_factory.mktemp("cli")
    data = d / "train.jsonl"
    eval_data = d / "eval.jsonl"
    ckpt = d / "scorer.json"
    assert main(["gen", "--num", "60", "--seed", "5", "--out", str(data)]) == 0
    assert main(["gen", "--num", "40", "--seed", "6", "--out", str(eval_data)]) == 0
    assert (
        main(
            [
                "train", "--data", str(data), "--out", str(ckpt),
                "--dim", "128", "--hidden", "0", "--epochs", "2",
                "--lr", "0.01", "--batch-size", "16", "--seed", "1",
            ]
        )
        == 0
    )
    assert (
        main(["eval", "--data", str(eval_data), "--ckpt", str(ckpt), "--out", str(d / "ev")])
        == 0
    )
    assert (
        main(["sweep", "--data", str(eval_data), "--ckpt", str(ckpt), "--out", str(d / "sw")])
        == 0
    )
    cands = d / "cands.jsonl"
    rows = []
    for q in range(4):
        for c in range(4):
            rows.append(
                {
                    "problem_id": f"q{q}",
                    "candidate_index": c,
                    "steps": [f"c00{c} c01{q}", f"x00{c} c02{q}"],
                    "is_correct": int(c == q % 2),
                }
            )
    write_jsonl(rows, str(cands))
    assert (
        main(
            [
                "bon", "--candidates", str(cands), "--ckpt", str(ckpt),
                "--n", "1,2,4", "--out", str(d / "bn"),
            ]
        )
        == 0
    )
    return d


def test_gen_artifacts(workdir):
    data = workdir / "train.jsonl"
    assert data.exists()
    traces = read_dataset(str(data))
    assert len(traces) == 60
    manifest = json.loads((workdir / "train.jsonl.manifest.json").read_text())
    assert manifest["command"] == "gen"
    assert manifest["config"]["gen.num_traces"] == 60
    assert manifest["config"]["gen.seed"] == 5
    assert manifest["backend"] in ("numpy", "numba")
    assert manifest["outputs"]["dataset"] == str(data)


def test_gen_is_reproducible(workdir, tmp_path):
    out = tmp_path / "again.jsonl"
    assert main(["gen", "--num", "60", "--seed", "5", "--out", str(out)]) == 0
    assert out.read_bytes() == (workdir / "train.jsonl").read_bytes()


def test_train_artifacts(workdir):
    ckpt = workdir / "scorer.json"
    assert ckpt.exists()
    loss = json.loads((workdir / "scorer.json.loss.json").read_text())
    assert len(loss["epoch_mean_loss"]) == 2
    manifest = json.loads((workdir / "scorer.json.manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["config"]["model.hidden_dim"] == 0
    assert manifest["inputs"]["dataset"]["sha256"] == _sha256(workdir / "train.jsonl")
    assert set(manifest["outputs"]) == {"checkpoint", "loss_trace"}


def test_eval_artifacts(workdir):
    report = json.loads((workdir / "ev.report.json").read_text())
    assert set(report) == {
        "error_accuracy", "correct_accuracy", "f1", "threshold", "n_error", "n_correct",
    }
    assert report["threshold"] == 0.9
    assert report["n_error"] + report["n_correct"] == 40
    log = read_jsonl(str(workdir / "ev.predictions.jsonl"))
    assert len(log) == 40
    assert set(log[0]) == {"id", "predicted", "gold", "last_step_right_score"}
    rebuilt = report_from_log(log, report["threshold"])
    assert rebuilt.f1 == pytest.approx(report["f1"], abs=0)
    assert rebuilt.n_error == report["n_error"]


def test_sweep_artifacts(workdir):
    table = json.loads((workdir / "sw.sweep.json").read_text())
    assert len(table["rows"]) == 19
    assert table["best_threshold"] in [r["threshold"] for r in table["rows"]]
    best_f1 = max(r["f1"] for r in table["rows"])
    best_row = next(r for r in table["rows"] if r["threshold"] == table["best_threshold"])
    assert best_row["f1"] == best_f1
    scores = read_jsonl(str(workdir / "sw.scores.jsonl"))
    assert len(scores) == 40
    assert all(set(r) == {"id", "gold", "right_scores"} for r in scores)


def test_sweep_rows_recompute_from_scores(workdir):
    # Every row of the sweep table must be derivable from the raw scores
    # log alone.
    table = json.loads((workdir / "sw.sweep.json").read_text())
    scores = read_jsonl(str(workdir / "sw.scores.jsonl"))
    for row in table["rows"]:
        th = row["threshold"]
        log = []
        for rec in scores:
            predicted = next(
                (i + 1 for i, v in enumerate(rec["right_scores"]) if v < th), None
            )
            log.append({"predicted": predicted, "gold": rec["gold"]})
        rebuilt = report_from_log(log, th)
        assert rebuilt.f1 == pytest.approx(row["f1"], abs=0)
        assert rebuilt.error_accuracy == row["error_accuracy"]
        assert rebuilt.correct_accuracy == row["correct_accuracy"]


def test_bon_artifacts(workdir):
    table = json.loads((workdir / "bn.bon.json").read_text())
    assert set(table["accuracy"]) == {"1", "2", "4"}
    for v in table["accuracy"].values():
        assert 0.0 <= v <= 1.0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gen.seed": 9, "gen.num_traces": 10}))
    out_file = tmp_path / "file.jsonl"
    assert main(["--config", str(cfg), "gen", "--out", str(out_file)]) == 0
    manifest = json.loads((tmp_path / "file.jsonl.manifest.json").read_text())
    assert manifest["config"]["gen.seed"] == 9
    out_flag = tmp_path / "flag.jsonl"
    assert main(["--config", str(cfg), "gen", "--seed", "11", "--out", str(out_flag)]) == 0
    manifest = json.loads((tmp_path / "flag.jsonl.manifest.json").read_text())
    assert manifest["config"]["gen.seed"] == 11
    assert manifest["config"]["gen.num_traces"] == 10


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gen.sed": 9}))
    code = main(["--config", str(cfg), "gen", "--out", str(tmp_path / "x.jsonl")])
    assert code == 2
    assert "unknown config key" in capsys.readouterr().err


def test_invalid_config_json_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{nope")
    assert main(["--config", str(cfg), "gen", "--out", str(tmp_path / "x.jsonl")]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_flag_value_exits_2(tmp_path, capsys):
    code = main(["gen", "--num", "0", "--out", str(tmp_path / "x.jsonl")])
    assert code == 2
    assert "num_traces" in capsys.readouterr().err


def test_bad_threshold_exits_2(workdir, tmp_path, capsys):
    code = main(
        [
            "eval", "--data", str(workdir / "eval.jsonl"),
            "--ckpt", str(workdir / "scorer.json"),
            "--threshold", "1.5", "--out", str(tmp_path / "ev"),
        ]
    )
    assert code == 2
    assert "eval.threshold" in capsys.readouterr().err


def test_missing_input_exits_1(tmp_path, capsys):
    code = main(
        [
            "train", "--data", str(tmp_path / "absent.jsonl"),
            "--out", str(tmp_path / "ck.json"),
        ]
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_command_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    capsys.readouterr()


def test_out_dir_env_redirects_relative_paths(tmp_path, monkeypatch):
    base = tmp_path / "artifacts"
    monkeypatch.setenv("PRMLAB_OUT_DIR", str(base))
    assert main(["gen", "--num", "5", "--seed", "0", "--out", "rel.jsonl"]) == 0
    assert (base / "rel.jsonl").exists()
    assert (base / "rel.jsonl.manifest.json").exists()
    # Absolute paths are left alone.
    abs_out = tmp_path / "abs.jsonl"
    assert main(["gen", "--num", "5", "--seed", "0", "--out", str(abs_out)]) == 0
    assert abs_out.exists()


def test_theory_check_passes(capsys):
    assert main(["theory-check", "--grid-resolution", "40"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["gradient_damping"]["passed"]
    assert doc["collapse_instability"]["passed"]
    assert doc["expected_grad_fd"]["passed"]


def test_mc_check_writes_report(tmp_path, capsys):
    out = tmp_path / "mc"
    assert main(
        ["mc-check", "--points", "20", "--samples", "10000", "--out", str(out)]
    ) == 0
    capsys.readouterr()
    report = json.loads((tmp_path / "mc.report.json").read_text())
    assert report["passed"]
    manifest = json.loads((tmp_path / "mc.manifest.json").read_text())
    assert manifest["command"] == "mc-check"


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--trials", "5"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


def test_ablate_artifact_shape(workdir, tmp_path, capsys):
    # A deliberately tiny grid run; the table structure is what matters
    # here, not the scores.
    out = tmp_path / "ab"
    code = main(
        [
            "ablate", "--data", str(workdir / "train.jsonl"),
            "--eval-data", str(workdir / "eval.jsonl"),
            "--seeds", "0", "--epochs", "1", "--hidden", "0",
            "--dim", "128", "--out", str(out),
        ]
    )
    assert code == 0
    capsys.readouterr()
    table = json.loads((tmp_path / "ab.ablation.json").read_text())
    cells = table["cells"]
    assert [[c["buffer_enabled"], c["last_step_weight"]] for c in cells] == [
        [False, 1.0], [False, 3.0], [True, 1.0], [True, 3.0],
    ]
    for c in cells:
        assert len(c["seed_f1"]) == 1
        assert len(c["seed_threshold"]) == 1
    assert table["always_clean_f1"] == 0.0
    assert table["always_first_f1"] == 0.0
    assert table["seeds"] == [0]
