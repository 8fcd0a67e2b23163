import csv
import json

import numpy as np
import pytest

from elmkit.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, main


class TestExitCodes:
    def test_missing_data_dir_is_data_error(self, tmp_path):
        code = main(["sweep", "--data-dir", str(tmp_path / "nowhere"), "--out-dir", str(tmp_path)])
        assert code == EXIT_DATA

    def test_unknown_config_key_is_config_error(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"fanouts": [1]}))
        assert main(["sweep", "--config", str(config)]) == EXIT_CONFIG

    def test_bad_flag_value_is_config_error(self, tmp_path):
        code = main(["sweep", "--data-dir", str(tmp_path), "--fan-out", "one,two"])
        assert code == EXIT_CONFIG

    def test_bad_choice_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--normalize", "minmax"])
        assert exc.value.code == 2

    def test_selftest_subset_passes(self, capsys):
        assert main(["selftest", "--suite", "idx-fixtures"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "[PASS] idx-fixtures" in out

    def test_selftest_failure_exits_numerical(self, monkeypatch, capsys):
        monkeypatch.setitem(
            __import__("elmkit.selftest", fromlist=["SUITES"]).SUITES,
            "idx-fixtures",
            lambda: (False, "forced"),
        )
        assert main(["selftest", "--suite", "idx-fixtures"]) == EXIT_NUMERICAL


class TestFetchData:
    def test_fetch_via_fake_mirror(self, tmp_path, monkeypatch, capsys):
        import hashlib
        import io

        from elmkit.dataio import MNIST_FILES

        payloads = {fname: f"bytes of {fname}".encode() for fname in MNIST_FILES.values()}
        monkeypatch.setattr(
            "elmkit.dataio.MNIST_SHA256",
            {fname: hashlib.sha256(data).hexdigest() for fname, data in payloads.items()},
        )

        class Resp(io.BytesIO):
            def __enter__(self):
                return self

            def __exit__(self, *exc):
                return False

        monkeypatch.setattr(
            "elmkit.dataio.urllib.request.urlopen",
            lambda url, timeout=0: Resp(payloads[url.rsplit("/", 1)[1]]),
        )
        code = main(["fetch-data", "--data-dir", str(tmp_path), "--mirror", "http://m.example/mnist"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "train_images" in out
        assert len(list(tmp_path.glob("*.gz"))) == 4


class TestSweepCommands:
    def test_sweep_writes_artifacts(self, toy_idx_dir, tmp_path, capsys):
        out = tmp_path / "results"
        code = main([
            "sweep", "--data-dir", str(toy_idx_dir), "--out-dir", str(out),
            "--seed", "7", "--fan-out", "1,2", "--repeats", "2",
            "--normalize", "scale01", "--activation", "sigmoid",
            "--ridge", "0", "--priors", "uniform",
        ])
        assert code == EXIT_OK
        for name in ("trials.csv", "summary.csv", "plot_fanout.csv"):
            assert (out / name).exists()
        stdout = capsys.readouterr().out
        assert "fan_out" in stdout

    def test_ensemble_sweep_writes_artifacts(self, toy_idx_dir, tmp_path):
        out = tmp_path / "results"
        code = main([
            "ensemble-sweep", "--data-dir", str(toy_idx_dir), "--out-dir", str(out),
            "--seed", "7", "--fan-out", "3", "--ensemble-sizes", "1,2",
            "--ensemble-repeats", "2", "--priors", "uniform",
        ])
        assert code == EXIT_OK
        assert (out / "ensemble_trials.csv").exists()
        assert (out / "plot_ensemble.csv").exists()

    def test_config_file_with_flag_override(self, toy_idx_dir, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "data_dir": str(toy_idx_dir),
            "out_dir": str(tmp_path / "from_config"),
            "fan_outs": [1],
            "repeats": 1,
            "base_seed": 2,
        }))
        assert main(["sweep", "--config", str(config), "--repeats", "2"]) == EXIT_OK
        with open(tmp_path / "from_config" / "trials.csv") as f:
            assert sum(1 for _ in f) == 3  # header + 2 trials (override won)


class TestTrainPredict:
    def test_round_trip(self, toy_idx_dir, tmp_path, capsys):
        model = tmp_path / "model.elmw"
        assert main([
            "train", "--data-dir", str(toy_idx_dir), "--solver", "lda",
            "--fan-out", "3", "--seed", "11", "--output", str(model),
        ]) == EXIT_OK
        assert model.exists() and model.with_suffix(".elmw.json").exists()
        capsys.readouterr()

        preds = tmp_path / "preds.csv"
        assert main([
            "predict", "--model", str(model),
            "--images", str(toy_idx_dir / "t10k-images-idx3-ubyte"),
            "--labels", str(toy_idx_dir / "t10k-labels-idx1-ubyte"),
            "--output", str(preds), "--posteriors",
        ]) == EXIT_OK
        err = capsys.readouterr().err
        assert "error rate" in err
        with open(preds) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 400
        post = np.array([[float(r[f"posterior_{n}"]) for n in range(10)] for r in rows[:20]])
        np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)

    def test_corrupt_model_is_data_error(self, tmp_path, idx_fixture_dir):
        bad = tmp_path / "bad.elmw"
        bad.write_bytes(b"JUNK" + bytes(44))
        code = main(["predict", "--model", str(bad), "--images", str(idx_fixture_dir / "images.idx3")])
        assert code == EXIT_DATA

    def test_predict_wrong_dimensions_is_data_error(self, toy_idx_dir, tmp_path, idx_fixture_dir):
        model = tmp_path / "model.elmw"
        main([
            "train", "--data-dir", str(toy_idx_dir), "--solver", "pi",
            "--fan-out", "1", "--seed", "3", "--output", str(model),
        ])
        code = main(["predict", "--model", str(model), "--images", str(idx_fixture_dir / "images.idx3")])
        assert code == EXIT_DATA

    def test_predict_from_csv(self, toy_idx_dir, tmp_path, capsys):
        model = tmp_path / "model.elmw"
        main([
            "train", "--data-dir", str(toy_idx_dir), "--solver", "lda",
            "--fan-out", "2", "--seed", "5", "--output", str(model),
        ])
        capsys.readouterr()
        rng = np.random.default_rng(0)
        csv_path = tmp_path / "input.csv"
        header = ",".join(f"f{i}" for i in range(16)) + ",label"
        lines = [header]
        for _ in range(5):
            lines.append(",".join(f"{v:.4f}" for v in rng.uniform(0, 255, 16)) + ",0")
        csv_path.write_text("\n".join(lines) + "\n")
        assert main(["predict", "--model", str(model), "--csv", str(csv_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("sample_index,predicted_label")
