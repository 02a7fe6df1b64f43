"""CLI behavior: subcommands, exit codes, manifests, hermetic determinism."""

import json

import numpy as np
import pytest

from augtext.classifier import TrainConfig, save_params, train
from augtext.backends import HashedBowEncoder
from augtext.cli import main
from augtext.corpus import (
    AugmentedExample,
    dataset_from_rows,
    load_augmented,
    save_augmented,
)


@pytest.fixture
def dataset_file(tmp_path):
    rng = np.random.default_rng(0)
    vocab = [f"word{i}" for i in range(30)]
    path = tmp_path / "data.jsonl"
    with open(path, "w") as f:
        for i in range(24):
            text = " ".join(rng.choice(vocab, size=6))
            f.write(json.dumps({"text": text, "label": "x" if i % 2 else "y"}) + "\n")
    return path


@pytest.fixture
def test_file(tmp_path):
    rng = np.random.default_rng(1)
    vocab = [f"word{i}" for i in range(30)]
    path = tmp_path / "test.jsonl"
    with open(path, "w") as f:
        for i in range(10):
            text = " ".join(rng.choice(vocab, size=6))
            f.write(json.dumps({"text": text, "label": "x" if i % 2 else "y"}) + "\n")
    return path


class TestAugmentCommand:
    def test_mock_imf_deterministic(self, dataset_file, tmp_path):
        outs = []
        for run in range(2):
            out = tmp_path / f"aug{run}.jsonl"
            code = main([
                "augment", "--method", "imf", "--k", "5", "--input", str(dataset_file),
                "--output", str(out), "--backend", "mock", "--seed", "7",
            ])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        items = load_augmented(tmp_path / "aug0.jsonl")
        assert len(items) == 24  # one augmentation per example by default

    def test_manifest_written_alongside(self, dataset_file, tmp_path):
        out = tmp_path / "aug.jsonl"
        main(["augment", "--method", "rs", "--input", str(dataset_file),
              "--output", str(out), "--seed", "1"])
        manifest = json.loads((tmp_path / "aug.jsonl.manifest.json").read_text())
        assert manifest["command"] == "augment"
        assert manifest["global_seed"] == 1
        assert manifest["backend"]["kind"] == "mock"

    def test_unknown_method_exits_two_with_choices(self, dataset_file, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["augment", "--method", "gpt", "--input", str(dataset_file),
                  "--output", str(tmp_path / "x.jsonl")])
        assert exc.value.code == 2
        assert "imf" in capsys.readouterr().err

    def test_bt_without_endpoint_exits_three(self, dataset_file, tmp_path, monkeypatch):
        monkeypatch.delenv("AUGTEXT_SHIM_URL", raising=False)
        code = main(["augment", "--method", "bt", "--backend", "http",
                     "--input", str(dataset_file), "--output", str(tmp_path / "x.jsonl")])
        assert code == 3

    def test_unreachable_backend_exits_three(self, dataset_file, tmp_path):
        code = main(["augment", "--method", "imf", "--backend", "http",
                     "--shim-url", "http://127.0.0.1:9", "--retries", "0",
                     "--timeout", "0.5",
                     "--input", str(dataset_file), "--output", str(tmp_path / "x.jsonl")])
        assert code == 3

    def test_missing_input_exits_four(self, tmp_path):
        code = main(["augment", "--method", "rs", "--input", str(tmp_path / "nope.jsonl"),
                     "--output", str(tmp_path / "x.jsonl")])
        assert code == 4


class TestFilterCommand:
    def trained_model(self, tmp_path):
        enc = HashedBowEncoder()
        texts = [f"alpha t{i}" for i in range(6)] + [f"omega t{i}" for i in range(6)]
        labels = ["x"] * 6 + ["y"] * 6
        params = train(list(zip(enc.encode(texts), labels)), TrainConfig(epochs=40, seed=0))
        path = tmp_path / "model.npz"
        save_params(path, params)
        return path

    def scored_file(self, tmp_path, n=40):
        items = [
            AugmentedExample(i, "imf", f"text {i}", "x" if i % 2 else "y", loss=i / n)
            for i in range(n)
        ]
        path = tmp_path / "aug.jsonl"
        save_augmented(path, items)
        return path

    def test_keep_point_eight_on_forty(self, tmp_path, capsys):
        model = self.trained_model(tmp_path)
        aug = self.scored_file(tmp_path, 40)
        out = tmp_path / "kept.jsonl"
        code = main(["filter", "--keep", "0.8", "--vanilla-model", str(model),
                     "--aug", str(aug), "--output", str(out)])
        assert code == 0
        kept = load_augmented(out)
        assert len(kept) == 32
        assert "kept 32 of 40" in capsys.readouterr().out

    def test_keep_one_is_passthrough(self, tmp_path):
        model = self.trained_model(tmp_path)
        aug = self.scored_file(tmp_path, 12)
        out = tmp_path / "kept.jsonl"
        main(["filter", "--keep", "1.0", "--vanilla-model", str(model),
              "--aug", str(aug), "--output", str(out)])
        assert load_augmented(out) == load_augmented(aug)

    def test_unscored_items_scored_with_backend(self, tmp_path):
        model = self.trained_model(tmp_path)
        items = [AugmentedExample(i, "rs", f"alpha t{i}", "x") for i in range(10)]
        aug = tmp_path / "aug.jsonl"
        save_augmented(aug, items)
        out = tmp_path / "kept.jsonl"
        code = main(["filter", "--keep", "0.5", "--vanilla-model", str(model),
                     "--aug", str(aug), "--output", str(out)])
        assert code == 0
        kept = load_augmented(out)
        assert len(kept) == 5
        assert all(it.loss is not None for it in kept)

    def test_missing_model_exits_four(self, tmp_path):
        aug = self.scored_file(tmp_path)
        code = main(["filter", "--keep", "0.8", "--vanilla-model",
                     str(tmp_path / "ghost.npz"), "--aug", str(aug),
                     "--output", str(tmp_path / "o.jsonl")])
        assert code == 4

    def test_unscorable_label_exits_four(self, tmp_path):
        model = self.trained_model(tmp_path)  # knows labels x and y only
        items = [AugmentedExample(0, "rs", "alpha t0", "mystery")]
        aug = tmp_path / "aug.jsonl"
        save_augmented(aug, items)
        code = main(["filter", "--keep", "0.5", "--vanilla-model", str(model),
                     "--aug", str(aug), "--output", str(tmp_path / "o.jsonl")])
        assert code == 4


class TestCompareCommand:
    def test_two_row_table_and_manifest(self, dataset_file, test_file, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = main([
            "compare", "--input", str(dataset_file), "--test", str(test_file),
            "--train-size", "10", "--methods", "vanilla,imf", "--n-aug", "1",
            "--keep", "0.8", "--runs", "3", "--backend", "mock", "--seed", "5",
            "--epochs", "10", "--out-dir", str(out_dir),
        ])
        assert code == 0
        table = (out_dir / "compare.csv").read_text().splitlines()
        assert len(table) == 3  # header + vanilla + imf
        assert (out_dir / "compare.md").exists()
        assert (out_dir / "compare.png").exists()
        assert (out_dir / "compare.manifest.json").exists()
        assert "vanilla" in capsys.readouterr().out

    def test_rerun_byte_identical_tables(self, dataset_file, test_file, tmp_path):
        blobs = []
        for run in range(2):
            out_dir = tmp_path / f"out{run}"
            main(["compare", "--input", str(dataset_file), "--test", str(test_file),
                  "--train-size", "10", "--methods", "vanilla,rs", "--n-aug", "1",
                  "--keep", "0.8", "--runs", "2", "--seed", "9", "--epochs", "8",
                  "--out-dir", str(out_dir)])
            blobs.append((out_dir / "compare.csv").read_bytes())
        assert blobs[0] == blobs[1]


class TestCurveCommand:
    def test_artifacts(self, dataset_file, test_file, tmp_path):
        out_dir = tmp_path / "out"
        code = main(["curve", "--input", str(dataset_file), "--test", str(test_file),
                     "--sizes", "8,16", "--runs", "2", "--epochs", "8",
                     "--seed", "3", "--out-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "curve.csv").exists()
        assert (out_dir / "curve.png").exists()
        assert (out_dir / "curve.manifest.json").exists()


class TestTsneCommand:
    def test_deterministic_coordinates(self, dataset_file, tmp_path):
        blobs = []
        for run in range(2):
            out_dir = tmp_path / f"out{run}"
            code = main(["tsne", "--input", str(dataset_file), "--n", "12",
                         "--seed", "1", "--iterations", "150",
                         "--out-dir", str(out_dir)])
            assert code == 0
            blobs.append((out_dir / "tsne.csv").read_bytes())
        assert blobs[0] == blobs[1]
        header = blobs[0].decode().splitlines()[0]
        assert header == "id,is_augmented,x,y"


class TestBenchCommand:
    def test_one_timing_row(self, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = main(["bench", "--method", "imf", "--n", "20", "--backend", "mock",
                     "--out-dir", str(out_dir), "--seed", "2"])
        assert code == 0
        lines = (out_dir / "bench.csv").read_text().splitlines()
        assert len(lines) == 2
        assert "imf" in capsys.readouterr().out


class TestRerunCommand:
    def test_reproduces_outputs(self, dataset_file, tmp_path):
        out = tmp_path / "aug.jsonl"
        main(["augment", "--method", "sr", "--input", str(dataset_file),
              "--output", str(out), "--seed", "4"])
        first = out.read_bytes()
        out.unlink()
        code = main(["rerun", "--manifest", str(tmp_path / "aug.jsonl.manifest.json")])
        assert code == 0
        assert out.read_bytes() == first


class TestConfigFile:
    def test_defaults_applied_and_flags_override(self, dataset_file, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 11\nmethod = rs\n")
        out = tmp_path / "a.jsonl"
        code = main(["augment", "--config", str(cfg), "--input", str(dataset_file),
                     "--output", str(out)])
        assert code == 0
        manifest = json.loads((tmp_path / "a.jsonl.manifest.json").read_text())
        assert manifest["config"]["method"] == "rs"

        out2 = tmp_path / "b.jsonl"
        main(["augment", "--config", str(cfg), "--method", "rd",
              "--input", str(dataset_file), "--output", str(out2)])
        manifest2 = json.loads((tmp_path / "b.jsonl.manifest.json").read_text())
        assert manifest2["config"]["method"] == "rd"
