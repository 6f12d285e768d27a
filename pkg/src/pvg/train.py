"""Desk-scale training and evaluation harness.

One seed fixes everything: parameter init, batch shuffling, and therefore the
entire metrics CSV. Runs write ``metrics.csv`` (one row per epoch), a
per-epoch diversity trace, and a final checkpoint directory.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .diagnostics import DiversityTrace, trace_diversity, write_trace_csv
from .errors import ConfigError, NonFiniteError
from .net import Model, ModelConfig, load_checkpoint, save_checkpoint
from .optim import AdamWState, adamw_step, cosine_lr, decay_mask
from .tensor import softmax_cross_entropy


@dataclass
class OptimizerConfig:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.05

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise ConfigError("lr must be non-negative")
        self.betas = tuple(self.betas)  # type: ignore[assignment]


@dataclass
class ScheduleConfig:
    warmup_steps: int = 0
    total_steps: int = 0

    def __post_init__(self) -> None:
        if self.total_steps < self.warmup_steps:
            raise ConfigError("total_steps must be >= warmup_steps")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    batch_size: int = 32
    seed: int = 0
    output_dir: str = "run"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        d = dict(d)
        if "model" in d:
            d["model"] = ModelConfig.from_dict(d["model"])
        if "optimizer" in d:
            d["optimizer"] = OptimizerConfig(**d["optimizer"])
        if "schedule" in d:
            d["schedule"] = ScheduleConfig(**d["schedule"])
        return RunConfig(**d)

    @staticmethod
    def from_json(path: str | Path) -> "RunConfig":
        return RunConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass
class EpochMetrics:
    epoch: int
    step: int
    train_loss: float
    train_acc: float
    lr: float


def _forward_pass_metrics(model: Model, dataset: Dataset, batch_size: int) -> tuple[float, float]:
    """Mean loss and top-1 accuracy over a split, forward only."""
    n = len(dataset)
    total_loss = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        images = dataset.images[start:stop]
        labels = dataset.labels[start:stop]
        logits = model.forward(images)
        loss = softmax_cross_entropy(logits, labels)
        total_loss += loss.item() * (stop - start)
        correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
    return total_loss / n, correct / n


def evaluate(model_or_dir, dataset: Dataset, batch_size: int = 32) -> tuple[float, float]:
    """Top-1 accuracy and mean loss of a model (or checkpoint dir) on a split."""
    model = model_or_dir if isinstance(model_or_dir, Model) else load_checkpoint(model_or_dir)
    loss, acc = _forward_pass_metrics(model, dataset, batch_size)
    return acc, loss


def train(
    run: RunConfig,
    dataset: Dataset,
    trace_batch: int = 8,
    stop_accuracy: float | None = None,
) -> tuple[Model, list[EpochMetrics]]:
    """Optimize on ``dataset``, writing metrics.csv, diversity.csv, and a
    final checkpoint under ``run.output_dir``.

    train_acc is measured by a forward pass with the epoch-final weights, so
    evaluating the checkpoint on the train split reproduces the last row
    exactly. ``stop_accuracy`` ends the run early once that measurement
    reaches the threshold (still fully seed-deterministic). Aborts with a
    step-stamped error if the loss goes non-finite.
    """
    out_dir = Path(run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if run.model.num_classes != dataset.num_classes:
        raise ConfigError(
            f"model has {run.model.num_classes} classes, dataset {dataset.num_classes}"
        )

    model = Model(run.model, seed=run.seed)
    rng = np.random.default_rng(run.seed)
    wd_mask = decay_mask(model.params)
    state = AdamWState()

    n = len(dataset)
    total_steps = run.schedule.total_steps
    if total_steps <= 0:
        raise ConfigError("schedule.total_steps must be positive")

    metrics: list[EpochMetrics] = []
    traces: list[DiversityTrace] = []
    trace_images = dataset.images[:trace_batch]

    global_step = 0
    epoch = 0
    while global_step < total_steps:
        order = rng.permutation(n)
        epoch_losses: list[float] = []
        for start in range(0, n, run.batch_size):
            if global_step >= total_steps:
                break
            batch = order[start : start + run.batch_size]
            images = dataset.images[batch]
            labels = dataset.labels[batch]

            model.zero_grad()
            logits = model.forward(images)
            loss = softmax_cross_entropy(logits, labels)
            loss_value = loss.item()
            if not np.isfinite(loss_value):
                raise NonFiniteError(f"non-finite loss at step {global_step}")
            loss.backward()

            lr_t = cosine_lr(
                global_step,
                run.optimizer.lr,
                run.schedule.warmup_steps,
                total_steps,
            )
            grads = {
                name: t.grad for name, t in model.params.items() if t.grad is not None
            }
            adamw_step(
                model.params,
                grads,
                state,
                lr_t,
                betas=run.optimizer.betas,
                weight_decay=run.optimizer.weight_decay,
                apply_decay=wd_mask,
            )
            model.clamp_activation_params()
            epoch_losses.append(loss_value)
            global_step += 1

        _, train_acc = _forward_pass_metrics(model, dataset, run.batch_size)
        metrics.append(
            EpochMetrics(
                epoch=epoch,
                step=global_step,
                train_loss=float(np.mean(epoch_losses)),
                train_acc=train_acc,
                lr=lr_t,
            )
        )
        traces.append(trace_diversity(model, trace_images, run_id=f"epoch{epoch:03d}"))
        epoch += 1
        if stop_accuracy is not None and train_acc >= stop_accuracy:
            break

    _write_metrics_csv(out_dir / "metrics.csv", metrics)
    write_trace_csv(out_dir / "diversity.csv", traces)
    save_checkpoint(model, out_dir / "checkpoint")
    return model, metrics


def _write_metrics_csv(path: Path, metrics: list[EpochMetrics]) -> None:
    lines = ["epoch,step,train_loss,train_acc,lr"]
    for m in metrics:
        lines.append(
            f"{m.epoch},{m.step},{m.train_loss:.8e},{m.train_acc:.6f},{m.lr:.8e}"
        )
    path.write_text("\n".join(lines) + "\n")
