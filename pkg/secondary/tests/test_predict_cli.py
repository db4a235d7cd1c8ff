"""Command line surface: flows, artifacts, and exit codes.

Exit codes partition failures the same way the retrieval tool does:
0 success, 1 usage, 2 malformed input, 3 model constraint violations.
"""

import json

import pytest

from ctxlm.cli import main

FAST_TRAIN = ["--steps", "4", "--d-model", "16", "--layers", "1",
              "--block-size", "96", "--entity-char-cap", "48",
              "--max-entities", "4"]


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows),
                    encoding="utf-8")
    return str(path)


def tiny_rows(with_truth=True):
    rows = [
        {"bundle_id": "a.py:3:0",
         "in_file_prefix": "import lib\n\ndef f(x):\n    ",
         "entities": [{"locale": "lib.clip",
                       "body": "#lib.clip\ndef clip(x):\n    return x[SUM]"}],
         "metadata": {}},
        {"bundle_id": "b.py:2:0",
         "in_file_prefix": "import lib\n\n",
         "entities": [],
         "metadata": {}},
    ]
    if with_truth:
        rows[0]["ground_truth"] = "y = lib.clip(x)"
        rows[1]["ground_truth"] = "z = lib.clip(2)"
    return rows


@pytest.fixture
def trained(tmp_path):
    bundles = write_jsonl(tmp_path / "bundles.jsonl", tiny_rows())
    model = str(tmp_path / "model.npz")
    assert main(["train", "--bundles", bundles, "--out", model,
                 *FAST_TRAIN]) == 0
    return bundles, model


def test_train_writes_checkpoint_and_loss_log(tmp_path, capsys):
    bundles = write_jsonl(tmp_path / "bundles.jsonl", tiny_rows())
    model = tmp_path / "model.npz"
    loss_log = tmp_path / "loss.jsonl"
    code = main(["train", "--bundles", bundles, "--out", str(model),
                 "--log-every", "2", "--loss-log", str(loss_log),
                 *FAST_TRAIN])
    assert code == 0
    assert model.exists()
    err = capsys.readouterr().err
    assert "trained 4 steps over 2 bundles" in err
    logged = [json.loads(line) for line in
              loss_log.read_text(encoding="utf-8").splitlines()]
    assert [row["step"] for row in logged] == [2, 4]
    assert all(row["loss"] > 0 for row in logged)


def test_predict_writes_one_row_per_bundle(tmp_path, trained):
    bundles, model = trained
    out = tmp_path / "preds.jsonl"
    assert main(["predict", "--bundles", bundles, "--model", model,
                 "--out", str(out), "--max-new-tokens", "8"]) == 0
    rows = [json.loads(line) for line in
            out.read_text(encoding="utf-8").splitlines()]
    assert [row["bundle_id"] for row in rows] == ["a.py:3:0", "b.py:2:0"]
    assert all(isinstance(row["prediction"], str) for row in rows)


def test_steps_option_reads_the_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CTXLM_TRAIN_STEPS", "3")
    bundles = write_jsonl(tmp_path / "bundles.jsonl", tiny_rows())
    code = main(["train", "--bundles", bundles,
                 "--out", str(tmp_path / "model.npz"),
                 "--d-model", "16", "--layers", "1"])
    assert code == 0
    assert "trained 3 steps" in capsys.readouterr().err


def test_missing_required_option_is_a_usage_error(capsys):
    assert main(["train"]) == 1
    assert "--bundles" in capsys.readouterr().err


def test_unknown_command_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_config_bounds_are_usage_errors(tmp_path, capsys):
    bundles = write_jsonl(tmp_path / "bundles.jsonl", tiny_rows())
    code = main(["train", "--bundles", bundles,
                 "--out", str(tmp_path / "m.npz"), "--layers", "3"])
    assert code == 1
    assert "n_layers" in capsys.readouterr().err


def test_malformed_bundles_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.jsonl"
    path.write_text("{broken\n", encoding="utf-8")
    code = main(["train", "--bundles", str(path),
                 "--out", str(tmp_path / "m.npz"), *FAST_TRAIN])
    assert code == 2
    assert "line 1" in capsys.readouterr().err


def test_entity_without_terminator_exits_2(tmp_path):
    rows = tiny_rows()
    rows[0]["entities"][0]["body"] = "#lib.clip\ndef clip(x): return x"
    bundles = write_jsonl(tmp_path / "bundles.jsonl", rows)
    code = main(["train", "--bundles", bundles,
                 "--out", str(tmp_path / "m.npz"), *FAST_TRAIN])
    assert code == 2


def test_corrupt_checkpoint_exits_2(tmp_path):
    bundles = write_jsonl(tmp_path / "bundles.jsonl", tiny_rows())
    junk = tmp_path / "model.npz"
    junk.write_text("not a checkpoint", encoding="utf-8")
    code = main(["predict", "--bundles", bundles, "--model", str(junk),
                 "--out", str(tmp_path / "p.jsonl")])
    assert code == 2


def test_unseen_characters_at_predict_time_exit_3(tmp_path, trained, capsys):
    _, model = trained
    rows = tiny_rows(with_truth=False)
    rows[0]["in_file_prefix"] = "import zoo?!\n"
    unseen = write_jsonl(tmp_path / "unseen.jsonl", rows)
    code = main(["predict", "--bundles", unseen, "--model", model,
                 "--out", str(tmp_path / "p.jsonl")])
    assert code == 3
    assert "not in vocabulary" in capsys.readouterr().err
