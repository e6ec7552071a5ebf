"""Training loop: batched window sampling, Adam, clipping, early stop.

One epoch draws floor(|S|/L) windows (SBS or the fixed_split baseline),
groups them into batches of batch_size dropping a short trailing group,
and takes one optimizer step per batch. Validation runs on deterministic
eval windows so losses are comparable across epochs. The best-validation
parameter snapshot is what training returns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .errors import ConfigError, NonFiniteGradient, NumericFailure
from .metrics import (
    ConfusionCounts,
    EvalReport,
    confusion_counts,
    fmt1,
    report_from_counts,
    zero_counts,
)
from .model import FusionModel
from .sampler import SamplerConfig, epoch_sample_count, epoch_samples, eval_windows
from .subword import AlignedStream

SAMPLERS = ("sbs", "fixed_split")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters; validation collects every problem."""

    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip_norm: float = 5.0
    batch_size: int = 8
    max_epochs: int = 100
    patience: int = 8
    seed: int = 0
    sampler: str = "sbs"
    seq_len: int = 256

    def __post_init__(self):
        problems = []
        if self.learning_rate <= 0:
            problems.append(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.adam_beta1 < 1:
            problems.append(f"adam_beta1 must be in [0, 1), got {self.adam_beta1}")
        if not 0 <= self.adam_beta2 < 1:
            problems.append(f"adam_beta2 must be in [0, 1), got {self.adam_beta2}")
        if self.adam_eps <= 0:
            problems.append(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.grad_clip_norm <= 0:
            problems.append(
                f"grad_clip_norm must be > 0, got {self.grad_clip_norm}"
            )
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            problems.append(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            problems.append(f"patience must be >= 1, got {self.patience}")
        if self.sampler not in SAMPLERS:
            problems.append(
                f"sampler must be one of {SAMPLERS}, got {self.sampler!r}"
            )
        if self.seq_len < 2:
            problems.append(f"seq_len must be >= 2, got {self.seq_len}")
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TrainState:
    epoch: int = 0
    step: int = 0
    best_val_loss: float = math.inf
    epochs_since_best: int = 0
    moments: dict = field(default_factory=dict)


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    """Global L2 norm across all parameter groups, float64 accumulation."""
    sq = 0.0
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(name)
        sq += float(np.sum(g.astype(np.float64) ** 2))
    return math.sqrt(sq)


def clip_gradients(
    grads: dict[str, np.ndarray], max_norm: float
) -> dict[str, np.ndarray]:
    """Scale all gradients by max_norm/g when the global norm g exceeds it."""
    norm = global_grad_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return grads


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    moments: dict[str, tuple[np.ndarray, np.ndarray]],
    lr: float,
    betas: tuple[float, float],
    eps: float,
    t: int,
) -> tuple[dict, dict]:
    """Bias-corrected Adam update, in place; t counts from 1."""
    if t < 1:
        raise ValueError(f"Adam step count starts at 1, got {t}")
    b1, b2 = betas
    for name, p in params.items():
        g = grads[name].astype(np.float64)
        if name not in moments:
            moments[name] = (
                np.zeros(p.shape, dtype=np.float64),
                np.zeros(p.shape, dtype=np.float64),
            )
        m, v = moments[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype)
    return params, moments


def early_stop_check(state: TrainState, val_loss: float, patience: int) -> str:
    """Strictly lower loss resets the counter; stop once counter > patience."""
    if val_loss < state.best_val_loss:
        state.best_val_loss = val_loss
        state.epochs_since_best = 0
        return "continue"
    state.epochs_since_best += 1
    return "stop" if state.epochs_since_best > patience else "continue"


def evaluate_stream(
    model: FusionModel, stream: AlignedStream, L: int
) -> tuple[EvalReport, float]:
    """Report and per-position NLL over deterministic eval windows.

    Each stream position contributes to the loss exactly once (the
    remainder window's duplicated prefix is excluded), and only fresh
    masked-in positions feed the confusion counts. Streams shorter than
    L are processed as a single window of their own length.
    """
    n = stream.token_ids.size
    windows = eval_windows(stream, min(L, n))
    counts = zero_counts()
    nll_sum = 0.0
    n_positions = 0
    for w in windows:
        trace = model.fuse_forward(w.token_ids, w.pos_ids, mode="eval")
        pred = trace.probs.argmax(axis=1)
        counts = counts + confusion_counts(pred, w.labels, w.eval_mask())
        fresh = slice(w.fresh_from, None)
        picked = trace.probs[np.arange(len(w.labels)), w.labels][fresh]
        nll_sum += float(-np.log(picked.astype(np.float64)).sum())
        n_positions += len(w.labels) - w.fresh_from
    return report_from_counts(counts), nll_sum / max(n_positions, 1)


@dataclass
class TrainResult:
    model: FusionModel          # best-validation snapshot
    log: list[str]
    state: TrainState
    best_report: EvalReport | None


LOG_HEADER = "# epoch\ttrain_loss\tval_loss\tval_micro_f1\tval_mean_f1\tseconds"


def train_run(
    config: TrainConfig,
    model: FusionModel,
    train_stream: AlignedStream,
    val_stream: AlignedStream,
    log_fn: Callable[[str], None] | None = None,
) -> TrainResult:
    """Run the full loop and return the best-validation checkpoint.

    The per-epoch log line is `epoch  train_loss  val_loss  val_micro_f1
    val_mean_f1  seconds`, tab-separated.
    """
    L = config.seq_len
    draws = epoch_sample_count(train_stream.token_ids.size, L)
    if draws < config.batch_size:
        raise ConfigError(
            f"per-epoch draw count {draws} is below batch_size "
            f"{config.batch_size}; every batch would be dropped"
        )
    state = TrainState()
    best_params = model.clone_params()
    best_report: EvalReport | None = None
    log: list[str] = [LOG_HEADER]
    if log_fn:
        log_fn(LOG_HEADER)

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        state.epoch = epoch
        sampler_cfg = SamplerConfig(L=L, seed=config.seed, epoch_index=epoch)
        batch = []
        batch_losses: list[float] = []
        for sample in epoch_samples(train_stream, sampler_cfg, config.sampler):
            batch.append(sample)
            if len(batch) < config.batch_size:
                continue
            grads = model.zero_grads()
            loss_sum = 0.0
            for i, s in enumerate(batch):
                trace = model.fuse_forward(
                    s.token_ids, s.pos_ids, mode="train",
                    seed=config.seed,
                    step=state.step * config.batch_size + i,
                )
                loss, grads = model.loss_and_grads(
                    trace, s.labels, s.position_mask, grads=grads
                )
                loss_sum += loss
            if not math.isfinite(loss_sum):
                raise NumericFailure(
                    f"non-finite loss at epoch {epoch} step {state.step}"
                )
            for g in grads.values():
                g /= config.batch_size
            clip_gradients(grads, config.grad_clip_norm)
            state.step += 1
            adam_step(
                model.params, grads, state.moments,
                config.learning_rate,
                (config.adam_beta1, config.adam_beta2),
                config.adam_eps, state.step,
            )
            batch_losses.append(loss_sum / config.batch_size)
            batch = []

        train_loss = float(np.mean(batch_losses))
        report, val_loss = evaluate_stream(model, val_stream, L)
        seconds = time.perf_counter() - t0
        line = (
            f"{epoch}\t{train_loss:.6f}\t{val_loss:.6f}"
            f"\t{fmt1(report.micro_f1)}\t{fmt1(report.mean_f1)}\t{seconds:.2f}"
        )
        log.append(line)
        if log_fn:
            log_fn(line)

        verdict = early_stop_check(state, val_loss, config.patience)
        if state.epochs_since_best == 0:
            best_params = model.clone_params()
            best_report = report
        if verdict == "stop":
            break

    return TrainResult(
        model=FusionModel(model.config, best_params),
        log=log,
        state=state,
        best_report=best_report,
    )
