"""Toy MLP training harness comparing exact and stochastic weight updates.

The network stores weights, activations, and error signals in binary16.
Matrix products run through float32 accumulators and round back to binary16
at layer boundaries, so the stored tensors behave like a 16-bit datapath
without compounding rounding inside a dot product.

Weight gradients come from one of two per-batch routes, selected by mode:

* exact: float64 mean of per-sample outer products, quantized to binary16.
* stochastic(M): one outer-product job per sample through the bitstream
  engine, results averaged in binary16.

Bias gradients always take the exact route; the outer-product unit only
covers the weight grid. Updates are momentum SGD in binary16 either way.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset, generate_two_moons, load_digits_csv
from .engine import apply_update, derive_seed_pairs, outer_product_many
from .errors import DomainError

_MODE_RE = re.compile(r"^stochastic\((\d+)\)$")


def parse_mode(mode: str) -> tuple[str, int | None]:
    """'exact' -> ('exact', None); 'stochastic(M)' -> ('stochastic', M)."""
    if mode == "exact":
        return "exact", None
    m = _MODE_RE.match(mode)
    if m:
        seq_len = int(m.group(1))
        if seq_len < 1:
            raise DomainError("mode: stream length must be at least 1")
        return "stochastic", seq_len
    raise DomainError(f"mode: expected 'exact' or 'stochastic(M)', got {mode!r}")


@dataclass
class TrainingConfig:
    topology: tuple[int, ...] = (2, 16, 2)
    epochs: int = 200
    batch_size: int = 32
    lr: float = 0.1
    momentum: float = 0.9
    mode: str = "exact"
    dataset: str = "two-moons"
    dataset_path: str | None = None
    n_samples: int = 2000
    noise: float = 0.1
    lr_folded: bool = False
    seed_data: int = 7
    seed_init: int = 11
    seed_sc: int = 0xACE1

    def __post_init__(self):
        if len(self.topology) < 2 or any(n < 1 for n in self.topology):
            raise DomainError("topology: need at least two positive layer sizes")
        if self.epochs < 1:
            raise DomainError("epochs: must be at least 1")
        if self.batch_size < 1:
            raise DomainError("batch_size: must be at least 1")
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise DomainError("lr: must be finite and positive")
        if not 0 <= self.momentum < 1:
            raise DomainError("momentum: must be in [0, 1)")
        parse_mode(self.mode)
        if self.dataset not in ("two-moons", "digits8x8"):
            raise DomainError(f"dataset: unknown dataset {self.dataset!r}")
        if self.dataset == "digits8x8" and not self.dataset_path:
            raise DomainError("dataset_path: required for digits8x8")
        if self.n_samples < 4:
            raise DomainError("n_samples: must be at least 4")
        if self.noise < 0:
            raise DomainError("noise: must be nonnegative")
        if not 0 < self.seed_sc <= 0xFFFF:
            raise DomainError("seed_sc: must be a nonzero 16-bit word")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float


@dataclass
class RunMetrics:
    mode: str
    epochs: list[EpochMetrics] = field(default_factory=list)
    final_test_acc: float = 0.0
    diverged: bool = False


class Mlp:
    """Fully connected ReLU network with binary16 parameters."""

    def __init__(self, topology, seed_init: int):
        rng = np.random.default_rng(seed_init)
        self.weights = []
        self.biases = []
        for n_in, n_out in zip(topology[:-1], topology[1:]):
            std = math.sqrt(2.0 / n_in)
            w = rng.standard_normal((n_out, n_in)) * std
            self.weights.append(w.astype(np.float16))
            self.biases.append(np.zeros(n_out, dtype=np.float16))

    def forward(self, x: np.ndarray):
        """Returns (activations per layer, pre-activations per layer).

        activations[0] is the input; activations[-1] is the logits.
        """
        acts = [np.asarray(x, dtype=np.float16)]
        zs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z32 = acts[-1].astype(np.float32) @ w.astype(np.float32).T
            z = (z32 + b.astype(np.float32)).astype(np.float16)
            zs.append(z)
            acts.append(z if i == last else np.maximum(z, np.float16(0)))
        return acts, zs

    def backward(self, zs, delta_out: np.ndarray):
        """Per-layer error signals from the output error, in binary16."""
        deltas = [np.asarray(delta_out, dtype=np.float16)]
        for i in range(len(self.weights) - 1, 0, -1):
            back32 = deltas[0].astype(np.float32) @ self.weights[i].astype(np.float32)
            gate = zs[i - 1] > 0
            deltas.insert(0, (back32 * gate).astype(np.float16))
        return deltas


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """(loss, probabilities, output error), computed in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=1, keepdims=True)
    n = labels.shape[0]
    picked = probs[np.arange(n), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, probs, grad


def _load_dataset(config: TrainingConfig) -> Dataset:
    if config.dataset == "two-moons":
        return generate_two_moons(config.n_samples, config.noise, config.seed_data)
    return load_digits_csv(config.dataset_path, seed=config.seed_data)


def _lr_at(config: TrainingConfig, epoch: int) -> float:
    """Constant for two-moons; x0.1 steps at 60% and 85% for digits8x8."""
    if config.dataset != "digits8x8":
        return config.lr
    lr = config.lr
    if epoch >= math.floor(0.85 * config.epochs):
        lr *= 0.01
    elif epoch >= math.floor(0.6 * config.epochs):
        lr *= 0.1
    return lr


def evaluate(model: Mlp, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(accuracy, mean cross-entropy) over a split."""
    acts, _ = model.forward(x.astype(np.float16))
    loss, probs, _ = softmax_cross_entropy(acts[-1], y)
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return acc, loss


def train(config: TrainingConfig) -> RunMetrics:
    kind, seq_len = parse_mode(config.mode)
    data = _load_dataset(config)
    if data.n_features != config.topology[0]:
        raise DomainError(
            f"topology: first layer is {config.topology[0]}, "
            f"dataset has {data.n_features} features"
        )
    if data.n_classes != config.topology[-1]:
        raise DomainError(
            f"topology: last layer is {config.topology[-1]}, "
            f"dataset has {data.n_classes} classes"
        )

    model = Mlp(config.topology, config.seed_init)
    shuffle_rng = np.random.default_rng([config.seed_data, 0xC0FFEE])
    x_train = data.x_train.astype(np.float16)
    y_train = data.y_train
    n_train = x_train.shape[0]

    velocities_w = [None] * len(model.weights)
    velocities_b = [None] * len(model.biases)
    base_x = config.seed_sc
    base_d = (config.seed_sc ^ 0xA5A5) or 0xA5A5
    job_counter = 0

    metrics = RunMetrics(mode=config.mode)
    for epoch in range(config.epochs):
        lr = _lr_at(config, epoch)
        order = shuffle_rng.permutation(n_train)
        epoch_loss = 0.0
        epoch_hits = 0
        for lo in range(0, n_train, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            xb = x_train[idx]
            yb = y_train[idx]
            b = xb.shape[0]

            acts, zs = model.forward(xb)
            loss, probs, grad64 = softmax_cross_entropy(acts[-1], yb)
            epoch_loss += loss * b
            epoch_hits += int(np.sum(probs.argmax(axis=1) == yb))
            if not math.isfinite(loss):
                metrics.diverged = True
                break
            deltas = model.backward(zs, grad64.astype(np.float16))

            for layer in range(len(model.weights)):
                a_in = acts[layer]
                d_out = deltas[layer]
                folded = config.lr_folded and kind == "stochastic"
                if kind == "exact":
                    grad_w = (
                        d_out.astype(np.float64).T @ a_in.astype(np.float64) / b
                    ).astype(np.float16)
                else:
                    sx, sd = derive_seed_pairs(
                        base_x, base_d, job_counter + np.arange(b)
                    )
                    job_counter += b
                    entries, _ = outer_product_many(
                        a_in, d_out, seq_len, sx, sd, lr if folded else None
                    )
                    total = np.sum(entries, axis=0, dtype=np.float16)
                    grad_w = total * np.float16(1.0 / b)
                grad_b = d_out.astype(np.float64).mean(axis=0).astype(np.float16)

                model.weights[layer], velocities_w[layer] = apply_update(
                    model.weights[layer], grad_w, lr, folded,
                    config.momentum, velocities_w[layer],
                )
                model.biases[layer], velocities_b[layer] = apply_update(
                    model.biases[layer], grad_b, lr, False,
                    config.momentum, velocities_b[layer],
                )
        if metrics.diverged:
            break
        test_acc, _ = evaluate(model, data.x_test, data.y_test)
        metrics.epochs.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=epoch_loss / n_train,
                train_acc=epoch_hits / n_train,
                test_acc=test_acc,
            )
        )
    if metrics.epochs:
        metrics.final_test_acc = metrics.epochs[-1].test_acc
    return metrics


def write_metrics_csv(metrics: RunMetrics, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,train_acc,test_acc\n")
        for e in metrics.epochs:
            fh.write(
                f"{e.epoch},{e.train_loss:.6f},{e.train_acc:.6f},{e.test_acc:.6f}\n"
            )


def write_metrics_jsonl(metrics: RunMetrics, path: str) -> None:
    with open(path, "w") as fh:
        for e in metrics.epochs:
            fh.write(
                json.dumps(
                    {
                        "epoch": e.epoch,
                        "train_loss": e.train_loss,
                        "train_acc": e.train_acc,
                        "test_acc": e.test_acc,
                    }
                )
                + "\n"
            )


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False}


def parse_config(text: str) -> TrainingConfig:
    """key = value lines, # comments. Unknown or malformed keys are errors."""
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            kwargs[key] = _parse_field(key, value)
        except DomainError:
            raise
        except ValueError as exc:
            raise DomainError(f"{key}: {exc}") from exc
    return TrainingConfig(**kwargs)


def _parse_field(key: str, value: str):
    if key == "topology":
        return tuple(int(v) for v in value.split(","))
    if key in ("epochs", "batch_size", "n_samples", "seed_data", "seed_init"):
        return int(value)
    if key == "seed_sc":
        return int(value, 0)  # accepts hex like 0xACE1
    if key in ("lr", "momentum", "noise"):
        return float(value)
    if key in ("mode", "dataset", "dataset_path"):
        return value
    if key == "lr_folded":
        word = value.lower()
        if word not in _BOOL_WORDS:
            raise DomainError(f"lr_folded: expected true/false, got {value!r}")
        return _BOOL_WORDS[word]
    raise DomainError(f"{key}: unknown configuration key")


def load_config(path: str) -> TrainingConfig:
    with open(path) as fh:
        return parse_config(fh.read())
