"""CLI smoke tests: subcommands, exit codes, artifact layout."""

import json

import pytest

from rtsfuse.cli import main


@pytest.fixture(scope="module")
def gen_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "gen.json"
    path.write_text(json.dumps({
        "schema_version": 1,
        "n_subjects": 10,
        "sessions_per_subject": 2,
        "duration_range": [8.0, 8.5],
        "seed": 5,
    }))
    return path


@pytest.fixture(scope="module")
def cli_corpus(gen_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("clicorpus") / "corpus"
    assert main(["gen", "--config", str(gen_config), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def cli_work(cli_corpus, tmp_path_factory):
    work = tmp_path_factory.mktemp("cliwork") / "work"
    rc = main([
        "train", "--corpus", str(cli_corpus), "--out", str(work),
        "--variant", "b", "--epochs", "1", "--seed", "3",
    ])
    assert rc == 0
    return work


class TestGen:
    def test_prints_split_counts(self, gen_config, tmp_path, capsys):
        rc = main(["gen", "--config", str(gen_config), "--out", str(tmp_path / "c")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "train:" in out and "val:" in out and "test:" in out
        assert "positive sessions:" in out

    def test_same_seed_same_manifest(self, gen_config, tmp_path):
        main(["gen", "--config", str(gen_config), "--out", str(tmp_path / "a")])
        main(["gen", "--config", str(gen_config), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/manifest.jsonl").read_text() == (
            tmp_path / "b/manifest.jsonl"
        ).read_text()

    def test_refuses_nonempty_without_force(self, gen_config, tmp_path, capsys):
        target = tmp_path / "c"
        target.mkdir()
        (target / "stale.txt").write_text("x")
        rc = main(["gen", "--config", str(gen_config), "--out", str(target)])
        assert rc == 2
        assert "--force" in capsys.readouterr().err

    def test_invalid_split_config_is_usage_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"n_subjects": 10, "split": [0.5, 0.2, 0.2]}))
        rc = main(["gen", "--config", str(bad), "--out", str(tmp_path / "c")])
        assert rc == 2

    def test_unknown_config_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"subjects": 10}))
        assert main(["gen", "--config", str(bad), "--out", str(tmp_path / "c")]) == 2

    def test_writes_run_manifest(self, cli_corpus):
        manifest = json.loads((cli_corpus / "run_manifest.json").read_text())
        assert manifest["command"] == "gen"
        assert "config_hash" in manifest and "host" in manifest


class TestTrain:
    def test_artifacts_exist(self, cli_work):
        assert (cli_work / "detectors" / "speech_n1.rtsf").exists()
        assert (cli_work / "detectors" / "gesture_n1.rtsf").exists()
        assert (cli_work / "policies" / "b.rtsf").exists()
        assert (cli_work / "features" / "index.jsonl").exists()
        assert (cli_work / "run_manifest.json").exists()

    def test_missing_corpus_is_exit_3(self, tmp_path, capsys):
        rc = main([
            "train", "--corpus", str(tmp_path / "nope"), "--out", str(tmp_path / "w"),
            "--variant", "b", "--epochs", "1",
        ])
        assert rc == 3
        assert "nope" in capsys.readouterr().err

    def test_fsm_variant_redirected_to_tune(self, cli_corpus, tmp_path, capsys):
        rc = main([
            "train", "--corpus", str(cli_corpus), "--out", str(tmp_path / "w"),
            "--variant", "a", "--epochs", "1",
        ])
        assert rc == 2
        assert "tune-fsm" in capsys.readouterr().err


class TestTuneFsmAndEval:
    def test_tune_then_eval_fsm(self, cli_corpus, cli_work, capsys):
        rc = main([
            "tune-fsm", "--corpus", str(cli_corpus), "--out", str(cli_work),
            "--variant", "a", "--budget", "10", "--seed", "3",
        ])
        assert rc == 0
        assert (cli_work / "policies" / "a.fsm").exists()
        rc = main([
            "eval", "--corpus", str(cli_corpus), "--out", str(cli_work),
            "--variant", "a",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "FSM operating point" in out and "comparison number" in out
        report = json.loads((cli_work / "eval" / "a" / "report.json").read_text())
        assert "comparison_number" in report

    def test_eval_neural_produces_eer_and_det_outputs(self, cli_corpus, cli_work, capsys):
        rc = main([
            "eval", "--corpus", str(cli_corpus), "--out", str(cli_work),
            "--variant", "b",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "EER" in out and "det.csv" in out
        report = json.loads((cli_work / "eval" / "b" / "report.json").read_text())
        assert 0.0 <= report["eer"] <= 1.0
        assert report["policy_params"] == 3906
        det_csv = cli_work / "eval" / "b" / "det.csv"
        assert det_csv.exists()
        assert det_csv.read_text().splitlines()[0] == "theta,frr,far"
        assert (cli_work / "eval" / "b" / "det.svg").exists()

    def test_missing_policy_is_exit_3(self, cli_corpus, cli_work, capsys):
        rc = main([
            "eval", "--corpus", str(cli_corpus), "--out", str(cli_work),
            "--variant", "c",
        ])
        assert rc == 3

    def test_fp16_eval_runs(self, cli_corpus, cli_work):
        rc = main([
            "eval", "--corpus", str(cli_corpus), "--out", str(cli_work),
            "--variant", "b", "--precision", "fp16",
        ])
        assert rc == 0
        assert (cli_work / "policies" / "b.fp16.rtsf").exists()


class TestBench:
    def test_bench_records_iterations(self, cli_corpus, cli_work, capsys):
        rc = main([
            "bench", "--corpus", str(cli_corpus), "--out", str(cli_work),
            "--variant", "b", "--iters", "5",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "5 iterations" in out and "mean" in out
        result = json.loads((cli_work / "bench" / "b.json").read_text())
        assert len(result["latencies_ms"]) == 5
        assert result["host"]["cores"] >= 1

    def test_numeric_failure_exit_4(self, cli_corpus, cli_work, tmp_path, capsys):
        # corrupt a policy with fp16-overflowing weights, then ask for fp16
        import numpy as np

        from rtsfuse.fusion import NeuralPolicy

        policy = NeuralPolicy("softmax", 32, rng=np.random.default_rng(0))
        policy.head.W[0, 0] = 1e6
        policy.save(cli_work / "policies" / "ns1_ng1_softmax_h32.rtsf")
        rc = main([
            "bench", "--corpus", str(cli_corpus), "--out", str(cli_work),
            "--variant", "ns1_ng1_softmax_h32", "--precision", "fp16", "--iters", "2",
        ])
        assert rc == 4
        assert "fp16 overflow" in capsys.readouterr().err


class TestUsage:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "rtsfuse" in capsys.readouterr().out
