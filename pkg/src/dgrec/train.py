"""Minibatch training with Adam, per-epoch validation and early stopping."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .encoder import SessionContext
from .evaluation.evaluate import EvalResult, evaluate
from .graphstore import SocialGraph
from .ingest import SessionStore, merge_stores
from .model import DGRec, make_batch, training_sessions
from .rng import CounterRNG
from .tensorcore import AdamState, Tape, adam_step, backward, ops, save_checkpoint

log = logging.getLogger(__name__)

LOG_HEADER = "epoch,step,split,loss,recall@20,ndcg"


@dataclass
class TrainResult:
    model: DGRec
    adam: AdamState
    log_rows: list[str] = field(default_factory=list)
    best_epoch: int = 0
    best_recall: float = float("nan")
    last_valid: EvalResult | None = None

    @property
    def metric_log(self) -> str:
        return LOG_HEADER + "\n" + "".join(r + "\n" for r in self.log_rows)


def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def make_context(train: SessionStore, *others: SessionStore, strict: bool = False) -> SessionContext:
    """Friend-session lookup over all splits (or training only when strict)."""
    return SessionContext(train if strict else merge_stores(train, *others))


def train_step(model: DGRec, adam: AdamState, batch, rng: CounterRNG) -> float:
    params = model.parameters()
    with Tape() as tape:
        out = model.forward(batch, train=True, rng=rng)
        loss = ops.scale(ops.sum_all(out.loss_rows), 1.0 / max(out.n_positions, 1))
    backward(tape, loss, params)
    adam_step(adam, params)
    return float(loss.data)


def train(train_store: SessionStore, graph: SocialGraph | None, config: ModelConfig,
          n_items: int, n_users: int, valid_store: SessionStore | None = None,
          context: SessionContext | None = None, out_dir: str | os.PathLike | None = None,
          max_steps: int | None = None) -> TrainResult:
    """Fit a model; restores the parameters of the best validation epoch.

    Each epoch shuffles the target sessions (seeded) and walks them in
    batches of ``config.batch`` whole sessions. Without a validation store
    the final epoch is kept.
    """
    examples = training_sessions(train_store)
    if not examples:
        raise ValueError("training store has no sessions with targets (need t >= 2, length >= 2)")
    valid_store = valid_store if valid_store is not None else SessionStore()
    if context is None:
        context = make_context(train_store, valid_store, strict=config.strict_train_context)
    model = DGRec(config, n_items, n_users)
    adam = AdamState(config.base_lr, config.beta1, config.beta2, config.eps, config.decay,
                     config.decay_interval)
    result = TrainResult(model, adam)
    has_valid = any(len(s) >= 2 for s in valid_store)
    best = None
    stale = 0
    out = Path(out_dir) if out_dir is not None else None

    for epoch in range(1, config.epochs + 1):
        order = CounterRNG(config.seed, "shuffle", epoch).permutation(len(examples))
        losses, weights = [], []
        for b in range(0, len(order), config.batch):
            chunk = [examples[i] for i in order[b:b + config.batch]]
            batch = make_batch(chunk, context, graph, config, ("train", epoch))
            rng = CounterRNG(config.seed, "dropout", adam.step)
            losses.append(train_step(model, adam, batch, rng))
            weights.append(batch.n_positions)
            if max_steps is not None and adam.step >= max_steps:
                break
        train_loss = float(np.average(losses, weights=weights))
        result.log_rows.append(f"{epoch},{adam.step},train,{_fmt(train_loss)},,")
        log.info("epoch %d step %d train loss %.5f", epoch, adam.step, train_loss)

        if has_valid:
            ev = evaluate(model, valid_store, context, graph)
            result.last_valid = ev
            result.log_rows.append(f"{epoch},{adam.step},valid,{_fmt(ev.loss)},{_fmt(ev.recall)},{_fmt(ev.ndcg)}")
            log.info("epoch %d valid recall@%d %.4f ndcg %.4f", epoch, config.eval_k, ev.recall, ev.ndcg)
            if best is None or ev.recall > result.best_recall:
                best, result.best_recall, result.best_epoch, stale = model.snapshot(), ev.recall, epoch, 0
            else:
                stale += 1
        else:
            best, result.best_epoch = model.snapshot(), epoch
        if out is not None:
            _write_outputs(out, result, adam, model)
        if has_valid and stale >= config.patience:
            log.info("early stop after %d epochs without improvement", stale)
            break
        if max_steps is not None and adam.step >= max_steps:
            break

    if out is not None:
        with open(out / "last.ckpt", "wb") as fh:
            save_checkpoint(fh, model.state_arrays(), adam)
    if best is not None:
        model.load_arrays(best)
    if out is not None:
        with open(out / "best.ckpt", "wb") as fh:
            save_checkpoint(fh, model.state_arrays(), None)
        _write_outputs(out, result, adam, model)
    return result


def _write_outputs(out: Path, result: TrainResult, adam: AdamState, model: DGRec) -> None:
    out.mkdir(parents=True, exist_ok=True)
    tmp = out / "metrics.csv.tmp"
    tmp.write_text(result.metric_log, encoding="utf-8")
    os.replace(tmp, out / "metrics.csv")
