"""CLI surface: subcommands, exit codes, determinism, config snapshots."""

import csv
import json

import pytest

from blmvae.cli import main

TRAIN_FLAGS = ["--rows", "15", "--cols", "15", "--channels", "2",
               "--hidden", "48", "24", "--epochs", "1", "--batch", "16",
               "--runs", "1", "--seed", "0"]


def run_synth(tmp_path, name="synth", count=40, **extra):
    out = tmp_path / name
    argv = ["synth", "--count", str(count), "--noise", "0.01", "--seed", "1",
            "--dim", "225", "--out", str(out)]
    for k, v in extra.items():
        argv += [k] if v is True else [k, str(v)]
    assert main(argv) == 0
    return out


class TestSynth:
    def test_outputs_and_snapshot(self, tmp_path):
        out = run_synth(tmp_path)
        assert (out / "data.jsonl").exists()
        assert (out / "embeddings.emb").exists()
        assert (out / "embeddings.idx.json").exists()
        snap = json.loads((out / "config.json").read_text("utf-8"))
        assert snap["subcommand"] == "synth"
        assert snap["seed"] == 1

    def test_byte_identical_reruns(self, tmp_path):
        a = run_synth(tmp_path, "a")
        b = run_synth(tmp_path, "b")
        for name in ("data.jsonl", "embeddings.emb", "embeddings.idx.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestTrain:
    def test_full_train_run(self, tmp_path):
        data = run_synth(tmp_path)
        out = tmp_path / "run"
        code = main(["train", "--data", str(data / "data.jsonl"),
                     "--emb", str(data / "embeddings.emb"),
                     "--latent", "d1x2+c5", "--out", str(out)] + TRAIN_FLAGS)
        assert code == 0
        results = json.loads((out / "results.json").read_text("utf-8"))
        assert results["config"]["latent"] == "d1x2+c5"
        assert len(results["runs"]) == 1
        assert 0.0 <= results["f1_mean"] <= 1.0
        assert (out / "run0.ckpt").exists()
        assert (out / "run0.ckpt.json").exists()
        assert (out / "config.json").exists()

    def test_bad_latent_spec_is_usage_error(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        code = main(["train", "--data", str(data / "data.jsonl"),
                     "--emb", str(data / "embeddings.emb"),
                     "--latent", "q9", "--out", str(tmp_path / "x")] + TRAIN_FLAGS)
        assert code == 2
        err = capsys.readouterr().err
        assert "error:usage" in err
        assert "grammar" in err

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--count", "5", "--out", str(tmp_path / "s"), "--bogus"])
        assert exc.value.code == 2

    def test_missing_data_file_is_data_error(self, tmp_path, capsys):
        code = main(["train", "--data", str(tmp_path / "nope.jsonl"),
                     "--emb", str(tmp_path / "nope.emb"),
                     "--out", str(tmp_path / "x")] + TRAIN_FLAGS)
        assert code == 3
        assert "error:data" in capsys.readouterr().err


class TestEval:
    def test_eval_checkpoint(self, tmp_path):
        data = run_synth(tmp_path)
        run = tmp_path / "run"
        main(["train", "--data", str(data / "data.jsonl"),
              "--emb", str(data / "embeddings.emb"), "--latent", "d1x2+c5",
              "--out", str(run)] + TRAIN_FLAGS)
        out = tmp_path / "eval"
        code = main(["eval", "--ckpt", str(run / "run0.ckpt"),
                     "--data", str(data / "data.jsonl"),
                     "--emb", str(data / "embeddings.emb"),
                     "--split", "test", "--seed", "0", "--out", str(out)])
        assert code == 0
        res = json.loads((out / "eval.json").read_text("utf-8"))
        assert res["split"] == "test"
        assert res["n_instances"] == 4  # 10% of 40


class TestAnalysis:
    def make_run(self, tmp_path):
        data = run_synth(tmp_path)
        run = tmp_path / "run"
        main(["train", "--data", str(data / "data.jsonl"),
              "--emb", str(data / "embeddings.emb"), "--latent", "d1x2+c5",
              "--out", str(run)] + TRAIN_FLAGS)
        return data, run

    def test_analyze_errors(self, tmp_path):
        _, run = self.make_run(tmp_path)
        out = tmp_path / "errors"
        code = main(["analyze-errors", "--results", str(run / "results.json"),
                     "--out", str(out)])
        assert code == 0
        assert (out / "errors_encdec_d1x2+c5.csv").exists()
        assert (out / "f1_summary.csv").exists()
        assert (out / "summary.json").exists()

    def test_analyze_masking_and_report(self, tmp_path):
        data, run = self.make_run(tmp_path)
        out = tmp_path / "masking"
        code = main(["analyze-masking", "--ckpt", str(run / "run0.ckpt"),
                     "--data", str(data / "data.jsonl"),
                     "--emb", str(data / "embeddings.emb"),
                     "--split", "test", "--out", str(out)])
        assert code == 0
        with open(out / "kappa.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 8  # header + base + discrete + 5 continuous
        assert rows[0][1] == "base"
        for i in range(1, 8):
            assert float(rows[i][i]) == 1.0

        combined = tmp_path / "report"
        code = main(["report", "--results", str(run / "results.json"),
                     "--masking", str(out / "masking_runs.json"),
                     "--out", str(combined)])
        assert code == 0
        assert (combined / "kappa.csv").exists()
        assert (combined / "f1_summary.csv").exists()

    def test_masking_on_continuous_spec_is_usage_error(self, tmp_path, capsys):
        data = run_synth(tmp_path)
        run = tmp_path / "c5run"
        main(["train", "--data", str(data / "data.jsonl"),
              "--emb", str(data / "embeddings.emb"), "--latent", "c5",
              "--out", str(run)] + TRAIN_FLAGS)
        code = main(["analyze-masking", "--ckpt", str(run / "run0.ckpt"),
                     "--data", str(data / "data.jsonl"),
                     "--emb", str(data / "embeddings.emb"),
                     "--out", str(tmp_path / "m")])
        assert code == 2
        assert "joint spec" in capsys.readouterr().err
