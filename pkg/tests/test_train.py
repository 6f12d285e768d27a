"""Dataset ingestion, AdamW, the LR schedule, training determinism, and the
CLI surface."""

import csv
import json

import numpy as np
import pytest

from pvg.cli import main as cli_main
from pvg.data import (
    Dataset,
    load_dataset,
    make_two_class_patches,
    oracle_linear_accuracy,
    save_dataset,
)
from pvg.errors import (
    ConfigError,
    CountMismatchError,
    FileFormatError,
    LabelRangeError,
    NonFiniteError,
)
from pvg.net import Model, ModelConfig
from pvg.optim import AdamWState, adamw_step, cosine_lr
from pvg.pvgt import write_tensor
from pvg.tensor import Tensor
from pvg.train import OptimizerConfig, RunConfig, ScheduleConfig, evaluate, train


def small_dataset(n=64, seed=0):
    return make_two_class_patches(n_images=n, size=32, seed=seed)


def quick_run(tmp_path, n=64, epochs=2, batch_size=16, seed=0, **model_kw):
    steps = (n + batch_size - 1) // batch_size * epochs
    model_kw.setdefault("num_classes", 2)
    return RunConfig(
        model=ModelConfig(**model_kw),
        optimizer=OptimizerConfig(),
        schedule=ScheduleConfig(warmup_steps=min(2, steps), total_steps=steps),
        batch_size=batch_size,
        seed=seed,
        output_dir=str(tmp_path),
    )


class TestDatasetIO:
    def test_roundtrip_bit_identical(self, tmp_path):
        ds = small_dataset(24, seed=1)
        save_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", ds)
        back = load_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", 2)
        assert np.array_equal(back.images, ds.images)
        assert np.array_equal(back.labels, ds.labels)

    def test_truncated_file_is_checked_error(self, tmp_path):
        ds = small_dataset(8)
        save_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", ds)
        raw = (tmp_path / "x.pvgt").read_bytes()
        (tmp_path / "x.pvgt").write_bytes(raw[: len(raw) // 2])
        with pytest.raises(FileFormatError):
            load_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", 2)

    def test_bad_rank(self, tmp_path):
        write_tensor(tmp_path / "x.pvgt", np.zeros((4, 8, 8), dtype=np.float32))
        (tmp_path / "y.csv").write_text("index,label\n0,0\n")
        with pytest.raises(FileFormatError):
            load_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", 2)

    def test_label_out_of_range_names_row(self, tmp_path):
        ds = small_dataset(3)
        save_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", ds)
        (tmp_path / "y.csv").write_text("index,label\n0,0\n1,2\n2,1\n")
        with pytest.raises(LabelRangeError, match="row 3"):
            load_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", 2)

    def test_count_mismatch(self, tmp_path):
        ds = small_dataset(4)
        save_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", ds)
        (tmp_path / "y.csv").write_text("index,label\n0,0\n1,1\n")
        with pytest.raises(CountMismatchError):
            load_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", 2)

    def test_pixels_outside_unit_interval(self, tmp_path):
        write_tensor(tmp_path / "x.pvgt", np.full((2, 8, 8, 3), 1.5, dtype=np.float32))
        (tmp_path / "y.csv").write_text("index,label\n0,0\n1,1\n")
        with pytest.raises(FileFormatError):
            load_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", 2)

    def test_oracle_certifies_learnability(self):
        assert oracle_linear_accuracy(make_two_class_patches(512, 32, seed=0)) >= 0.99


class TestAdamW:
    def test_zero_gradient_zero_decay_fixed_point(self):
        p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
        before = p["w"].data.copy()
        adamw_step(p, {"w": np.zeros(2)}, AdamWState(), lr_t=0.1, weight_decay=0.0)
        np.testing.assert_array_equal(p["w"].data, before)

    def test_descends_quadratic(self):
        w = Tensor(np.array([1.0]), requires_grad=True)
        params = {"w": w}
        state = AdamWState()
        adamw_step(params, {"w": 2.0 * w.data}, state, lr_t=0.01, weight_decay=0.0)
        assert w.data[0] < 1.0

    def test_matches_scalar_oracle(self):
        """Ten steps against an independent scalar re-implementation."""
        lr, b1, b2, eps, wd = 0.37, 0.9, 0.999, 1e-8, 0.04

        w = Tensor(np.array([[0.5]], dtype=np.float64), requires_grad=True)
        params = {"w": w}
        state = AdamWState()

        # scalar reference, written from the update equations
        sw, sm, sv = 0.5, 0.0, 0.0
        rng = np.random.default_rng(0)
        for t in range(1, 11):
            g = float(rng.normal())
            adamw_step(params, {"w": np.array([[g]])}, state, lr_t=lr, betas=(b1, b2), eps=eps, weight_decay=wd)
            sm = b1 * sm + (1 - b1) * g
            sv = b2 * sv + (1 - b2) * g * g
            mhat = sm / (1 - b1**t)
            vhat = sv / (1 - b2**t)
            sw *= 1 - lr * wd
            sw -= lr * mhat / (np.sqrt(vhat) + eps)
            assert abs(w.data[0, 0] - sw) <= 1e-10

    def test_decay_mask_exempts_vectors(self):
        from pvg.optim import decay_mask

        params = {
            "m": Tensor(np.ones((2, 2)), requires_grad=True),
            "v": Tensor(np.ones(2), requires_grad=True),
        }
        mask = decay_mask(params)
        assert mask == {"m": True, "v": False}


class TestCosineSchedule:
    def test_endpoints(self):
        base, warm, total = 1e-3, 10, 110
        assert cosine_lr(warm, base, warm, total) == pytest.approx(base)
        assert cosine_lr(total, base, warm, total) == pytest.approx(0.0, abs=1e-18)

    def test_warmup_is_linear(self):
        vals = [cosine_lr(s, 1.0, 4, 100) for s in range(4)]
        assert vals == pytest.approx([0.25, 0.5, 0.75, 1.0])

    def test_monotone_after_warmup(self):
        vals = [cosine_lr(s, 1.0, 5, 50) for s in range(5, 51)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_no_warmup(self):
        assert cosine_lr(0, 2.0, 0, 10) == pytest.approx(2.0)

    def test_invalid_span(self):
        with pytest.raises(ConfigError):
            cosine_lr(0, 1.0, 10, 5)


class TestTraining:
    def test_fixed_seed_bitwise_identical_metrics(self, tmp_path):
        ds = small_dataset(32, seed=2)
        outs = []
        for sub in ("a", "b"):
            run = quick_run(tmp_path / sub, n=32, epochs=2, seed=7)
            train(run, ds)
            outs.append((tmp_path / sub / "metrics.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_lr_zero_full_batch_loss_constant(self, tmp_path):
        ds = small_dataset(16, seed=3)
        run = RunConfig(
            model=ModelConfig(num_classes=2),
            optimizer=OptimizerConfig(lr=0.0),
            schedule=ScheduleConfig(warmup_steps=0, total_steps=3),
            batch_size=16,  # full batch: every step sees the same data
            seed=1,
            output_dir=str(tmp_path),
        )
        _, metrics = train(run, ds)
        losses = {m.train_loss for m in metrics}
        assert len(losses) == 1

    def test_evaluate_reproduces_final_train_acc(self, tmp_path):
        ds = small_dataset(32, seed=4)
        run = quick_run(tmp_path, n=32, epochs=2, seed=2)
        model, metrics = train(run, ds)
        acc, _ = evaluate(model, ds, batch_size=run.batch_size)
        assert acc == metrics[-1].train_acc
        acc_ckpt, _ = evaluate(tmp_path / "checkpoint", ds, batch_size=8)
        assert acc_ckpt == metrics[-1].train_acc

    def test_random_init_accuracy_near_chance(self):
        ds = small_dataset(256, seed=5)
        model = Model(ModelConfig(num_classes=2), seed=11)
        acc, _ = evaluate(model, ds, batch_size=64)
        # binomial: |acc - 0.5| <= 4.5 * sqrt(0.25/256) ~ 0.14
        assert abs(acc - 0.5) <= 0.15

    def test_outputs_written(self, tmp_path):
        ds = small_dataset(16, seed=6)
        run = quick_run(tmp_path, n=16, epochs=1, batch_size=8, seed=3)
        train(run, ds)
        assert (tmp_path / "metrics.csv").exists()
        assert (tmp_path / "diversity.csv").exists()
        assert (tmp_path / "checkpoint" / "manifest.json").exists()
        rows = list(csv.reader(open(tmp_path / "metrics.csv")))
        assert rows[0] == ["epoch", "step", "train_loss", "train_acc", "lr"]
        assert len(rows) == 2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # deliberate blow-up
    def test_non_finite_loss_aborts_with_step(self, tmp_path):
        ds = small_dataset(16, seed=7)
        run = RunConfig(
            model=ModelConfig(num_classes=2),
            optimizer=OptimizerConfig(lr=1e30),  # guaranteed blow-up
            schedule=ScheduleConfig(warmup_steps=0, total_steps=8),
            batch_size=8,
            seed=4,
            output_dir=str(tmp_path),
        )
        with pytest.raises(NonFiniteError, match="step"):
            train(run, ds)

    def test_class_count_mismatch(self, tmp_path):
        ds = small_dataset(16, seed=8)
        run = quick_run(tmp_path, n=16, epochs=1, num_classes=3)
        with pytest.raises(ConfigError):
            train(run, ds)

    def test_run_config_json_roundtrip(self, tmp_path):
        run = quick_run(tmp_path, n=16, epochs=1)
        path = tmp_path / "run.json"
        path.write_text(json.dumps(run.to_dict()))
        back = RunConfig.from_json(path)
        assert back.model == run.model
        assert back.optimizer == run.optimizer
        assert back.schedule == run.schedule

    def test_unknown_config_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"modle": {}})


class TestCli:
    @pytest.fixture()
    def workspace(self, tmp_path):
        ds = small_dataset(16, seed=9)
        save_dataset(tmp_path / "x.pvgt", tmp_path / "y.csv", ds)
        run = quick_run(tmp_path / "run", n=16, epochs=1, batch_size=8)
        (tmp_path / "run.json").write_text(json.dumps(run.to_dict()))
        return tmp_path

    def test_train_eval_diag_export_count(self, workspace, capsys):
        tp = workspace
        assert cli_main(["train", "--config", str(tp / "run.json"), "--data", str(tp / "x.pvgt"), "--labels", str(tp / "y.csv")]) == 0
        ckpt = tp / "run" / "checkpoint"

        assert cli_main(["eval", "--checkpoint", str(ckpt), "--data", str(tp / "x.pvgt"), "--labels", str(tp / "y.csv")]) == 0
        out = capsys.readouterr().out
        assert "accuracy=" in out

        assert cli_main(["diag", "--checkpoint", str(ckpt), "--data", str(tp / "x.pvgt"), "--out", str(tp / "trace.csv")]) == 0
        rows = list(csv.reader(open(tp / "trace.csv")))
        assert rows[0] == ["run_id", "block", "diversity"]
        assert len(rows) == 1 + 5  # five blocks in the tiny config

        assert cli_main([
            "export-graph", "--checkpoint", str(ckpt), "--data", str(tp / "x.pvgt"),
            "--image", "0", "--block", "2", "--out", str(tp / "edges.csv"),
        ]) == 0
        rows = list(csv.reader(open(tp / "edges.csv")))
        assert rows[0] == ["block", "node", "neighbor", "rank", "similarity"]
        assert all(r[0] == "2" for r in rows[1:])

        assert cli_main(["count", "--config", str(tp / "run.json")]) == 0
        out = capsys.readouterr().out
        assert "params=" in out

    def test_error_is_single_line_with_category(self, workspace, capsys):
        tp = workspace
        (tp / "bad.pvgt").write_bytes(b"JUNKJUNKJUNK")
        code = cli_main([
            "eval", "--checkpoint", str(tp / "nonexistent"), "--data", str(tp / "bad.pvgt"), "--labels", str(tp / "y.csv"),
        ])
        assert code == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("error:checkpoint:")
        assert "\n" not in err

    def test_bad_data_error_category(self, workspace, capsys):
        tp = workspace
        cli_main(["train", "--config", str(tp / "run.json"), "--data", str(tp / "x.pvgt"), "--labels", str(tp / "y.csv")])
        capsys.readouterr()
        (tp / "bad.pvgt").write_bytes(b"JUNKJUNKJUNKJUNK")
        code = cli_main([
            "eval", "--checkpoint", str(tp / "run" / "checkpoint"),
            "--data", str(tp / "bad.pvgt"), "--labels", str(tp / "y.csv"),
        ])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:file-format:")
