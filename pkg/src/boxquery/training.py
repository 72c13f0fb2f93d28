"""Negative-sampling loss, the Adam training loop, and checkpoints.

One training step works on one query instance: encode the query into a
box, gather the boxes of its answers and sampled non-answers, and push
answers inside the margin while pushing non-answers out.  Validation
pairwise ranking accuracy is measured every few steps and drives early
stopping; the parameters from the best evaluation are what the loop
ultimately returns.  Checkpoints are self-describing binary files that
restore parameters, optimizer state, and the step counter exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tensor2, adam_step
from .boxes import DEFAULT_ALPHA, Box, box_distance_t
from .encoder import (
    AGGREGATIONS,
    ParameterStore,
    encode,
    init_parameters,
)
from .evaluation import evaluate
from .graphs import KnowledgeGraph
from .queries import TEMPLATE_NAMES, QueryInstance

log = logging.getLogger(__name__)

_SHUFFLE_STREAM = 201


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run."""

    gamma: float = 1.0
    alpha: float = DEFAULT_ALPHA
    lr: float = 0.01
    max_steps: int = 1000
    eval_every: int = 100
    patience: int = 3
    aggregation: str = "sum"
    seed: int = 0
    dim: int = 32
    layers: int = 3

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation: {self.aggregation!r}")
        if self.dim < 1 or self.layers < 1:
            raise ValueError("dim and layers must be >= 1")


def loss_terms(
    q_center: Tensor2,
    q_offset: Tensor2,
    pos_centers: Tensor2,
    pos_offsets: Tensor2,
    neg_centers: Tensor2 | None = None,
    neg_offsets: Tensor2 | None = None,
    gamma: float = 1.0,
    alpha: float = DEFAULT_ALPHA,
) -> Tensor2:
    """Differentiable margin loss over box distances.

    Mean softplus(d_pos - gamma) over positives plus mean
    softplus(gamma - d_neg) over negatives; both terms are the negative
    log-sigmoid of the signed margin.  The negative term drops out when
    no negatives are given.
    """
    if pos_centers.rows == 0:
        raise ValueError("loss needs at least one positive")
    d_pos = box_distance_t(q_center, q_offset, pos_centers, pos_offsets, alpha)
    total = ad.mean_all(ad.softplus(d_pos - gamma))
    if neg_centers is not None and neg_centers.rows:
        d_neg = box_distance_t(q_center, q_offset, neg_centers, neg_offsets, alpha)
        total = total + ad.mean_all(ad.softplus(gamma - d_neg))
    return total


def _stack_boxes(boxes: Sequence[Box]) -> tuple[Tensor2, Tensor2]:
    centers = ad.tensor(np.stack([b.center for b in boxes]))
    offsets = ad.tensor(np.stack([b.offset for b in boxes]))
    return centers, offsets


def loss(
    qbox: Box,
    positives: Sequence[Box],
    negatives: Sequence[Box] = (),
    gamma: float = 1.0,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    """Plain-box front end to :func:`loss_terms`; returns a float."""
    if not positives:
        raise ValueError("loss needs at least one positive box")
    q_center = ad.tensor(qbox.center)
    q_offset = ad.tensor(qbox.offset)
    pos_c, pos_o = _stack_boxes(positives)
    neg_c = neg_o = None
    if negatives:
        neg_c, neg_o = _stack_boxes(negatives)
    return loss_terms(
        q_center, q_offset, pos_c, pos_o, neg_c, neg_o, gamma, alpha
    ).item()


def instance_loss(
    ps: ParameterStore,
    inst: QueryInstance,
    method: str | None = None,
    gamma: float = 1.0,
    alpha: float = DEFAULT_ALPHA,
) -> Tensor2:
    """Loss of one training instance, differentiable w.r.t. the store."""
    enc = encode(inst.query, ps, method)
    d = ps.dim
    rows = ad.gather_rows(ps.entity_embeddings, sorted(inst.targets))
    pos_c = ad.slice_cols(rows, 0, d)
    pos_o = ad.relu(ad.slice_cols(rows, d, 2 * d))
    neg_ids = list(inst.negatives) + list(inst.hard_negatives)
    neg_c = neg_o = None
    if neg_ids:
        neg_rows = ad.gather_rows(ps.entity_embeddings, neg_ids)
        neg_c = ad.slice_cols(neg_rows, 0, d)
        neg_o = ad.relu(ad.slice_cols(neg_rows, d, 2 * d))
    return loss_terms(enc.center, enc.offset, pos_c, pos_o, neg_c, neg_o, gamma, alpha)


@dataclass
class LogRow:
    """One line of the training log; validation columns only on eval steps."""

    step: int
    train_loss: float
    val_pairwise: float | None = None
    val_by_template: dict[str, float | None] | None = None


@dataclass
class TrainResult:
    ps: ParameterStore
    history: list[LogRow]
    steps: int
    best_step: int | None
    best_metric: float | None


def _check_dataset_ids(kg: KnowledgeGraph, instances: Sequence[QueryInstance]) -> None:
    for inst in instances:
        ids = set(inst.query.anchors) | inst.targets
        ids |= set(inst.negatives) | set(inst.hard_negatives)
        bad = [e for e in ids if not 0 <= e < kg.num_entities]
        if bad:
            raise ValueError(f"instance references unknown entity ids: {sorted(bad)}")
        bad_r = [r for r in inst.query.relations if not 0 <= r < kg.num_relations]
        if bad_r:
            raise ValueError(f"instance references unknown relation ids: {sorted(bad_r)}")


def _val_metric(
    ps: ParameterStore,
    val: Sequence[QueryInstance],
    method: str,
    alpha: float,
) -> tuple[float | None, dict[str, float | None] | None]:
    if not val:
        return None, None
    report = evaluate(ps, val, method=method, mode="ranking", alpha=alpha)
    per_template = {
        name: report.templates[name]["pairwise"] for name in TEMPLATE_NAMES
    }
    return report.overall["pairwise"], per_template


def train(
    kg: KnowledgeGraph,
    datasets: Mapping[str, Sequence[QueryInstance]],
    cfg: TrainConfig,
    checkpoint_path: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> TrainResult:
    """Run the training loop; return the best-validation parameters.

    Steps walk the train split in a fresh seeded shuffle per epoch, one
    instance per step.  Every ``eval_every`` steps the validation split
    is scored by pairwise ranking accuracy; after ``patience``
    evaluations without strict improvement the loop stops early.  With no
    validation data (or no negatives in it) training simply runs to
    ``max_steps``.  ``checkpoint_path`` saves the returned parameters;
    ``resume_from`` restores parameters, optimizer, step counter, and
    shuffle state from an earlier save.
    """
    train_set = list(datasets.get("train", []))
    val_set = list(datasets.get("val", []))
    if not train_set:
        raise ValueError("training requires a non-empty train split")
    _check_dataset_ids(kg, train_set)
    _check_dataset_ids(kg, val_set)

    start_step = 0
    if resume_from is not None:
        ps, adam, start_step, rng_state = load_checkpoint(
            resume_from, dim=cfg.dim, aggregation=cfg.aggregation
        )
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, _SHUFFLE_STREAM])
        )
        if rng_state is not None:
            rng.bit_generator.state = rng_state
    else:
        ps = init_parameters(
            kg, dim=cfg.dim, layers=cfg.layers, seed=cfg.seed, aggregation=cfg.aggregation
        )
        adam = AdamState(ps.parameters(), lr=cfg.lr)
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, _SHUFFLE_STREAM])
        )

    history: list[LogRow] = []
    best_snapshot: dict[str, np.ndarray] | None = None
    best_metric: float | None = None
    best_step: int | None = None
    bad_evals = 0
    step = start_step
    order: list[int] = []
    stop = False

    while step < cfg.max_steps and not stop:
        if not order:
            order = list(rng.permutation(len(train_set)))
        inst = train_set[order.pop(0)]
        step += 1
        total = instance_loss(ps, inst, cfg.aggregation, cfg.gamma, cfg.alpha)
        ps.zero_grads()
        total.backward()
        adam_step(ps.parameters(), None, adam)
        row = LogRow(step=step, train_loss=total.item())

        if step % cfg.eval_every == 0:
            metric, per_template = _val_metric(ps, val_set, cfg.aggregation, cfg.alpha)
            row.val_pairwise = metric
            row.val_by_template = per_template
            if metric is not None:
                if best_metric is None or metric > best_metric:
                    best_metric = metric
                    best_step = step
                    best_snapshot = {
                        name: ps[name].data.copy() for name in ps.names()
                    }
                    bad_evals = 0
                else:
                    bad_evals += 1
                    if bad_evals >= cfg.patience:
                        log.info(
                            "early stop at step %d (best %.2f at step %d)",
                            step,
                            best_metric,
                            best_step,
                        )
                        stop = True
        history.append(row)

    if best_snapshot is not None:
        for name, data in best_snapshot.items():
            ps[name].data[:] = data

    if checkpoint_path is not None:
        save_checkpoint(ps, adam, checkpoint_path, step=step, rng=rng)

    return TrainResult(
        ps=ps, history=history, steps=step, best_step=best_step, best_metric=best_metric
    )


def write_training_log(history: Sequence[LogRow], path: str | Path) -> Path:
    """CSV log: step, train loss, and validation accuracy per template."""
    path = Path(path)
    columns = ["step", "train_loss", "val_pairwise"] + [
        f"val_{name}" for name in TEMPLATE_NAMES
    ]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in history:
            record = [row.step, repr(row.train_loss)]
            record.append("" if row.val_pairwise is None else repr(row.val_pairwise))
            for name in TEMPLATE_NAMES:
                value = (row.val_by_template or {}).get(name)
                record.append("" if value is None else repr(value))
            writer.writerow(record)
    return path


# --- checkpoints ------------------------------------------------------------
#
# Layout: magic, version, header length, JSON header, then raw float64
# buffers in header order (parameter tensors, Adam first moments, Adam
# second moments).  Everything needed to rebuild the store is in the
# header, so loading does not need the graph.

_MAGIC = b"BOXQCKPT"
_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, or incompatible checkpoint file."""


def save_checkpoint(
    ps: ParameterStore,
    adam: AdamState,
    path: str | Path,
    step: int = 0,
    rng: np.random.Generator | None = None,
) -> Path:
    path = Path(path)
    names = ps.names()
    header = {
        "version": _VERSION,
        "dim": ps.dim,
        "layers": ps.layers,
        "aggregation": ps.aggregation,
        "num_entities": ps.num_entities,
        "num_relations": ps.num_relations,
        "num_types": ps.num_types,
        "variable_node_features": "entity-type embedding rows with an untyped fallback row",
        "tensors": [[name, *ps[name].shape] for name in names],
        "adam": {
            "lr": adam.lr,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "eps": adam.eps,
            "t": adam.t,
        },
        "step": step,
        "rng_state": None if rng is None else rng.bit_generator.state,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(ps[name].data).tobytes())
        for buf in adam.m:
            fh.write(np.ascontiguousarray(buf).tobytes())
        for buf in adam.v:
            fh.write(np.ascontiguousarray(buf).tobytes())
    return path


def load_checkpoint(
    path: str | Path,
    dim: int | None = None,
    aggregation: str | None = None,
) -> tuple[ParameterStore, AdamState, int, dict | None]:
    """Restore (store, optimizer, step, rng state) from a checkpoint file.

    ``dim`` and ``aggregation``, when given, must match what was saved;
    mismatches raise :class:`CheckpointError` rather than producing a
    silently incompatible model.
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    cursor = len(_MAGIC)
    (version,) = struct.unpack_from("<I", raw, cursor)
    cursor += 4
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", raw, cursor)
    cursor += 8
    try:
        header = json.loads(raw[cursor : cursor + header_len].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"corrupt checkpoint header in {path}") from exc
    cursor += header_len
    if dim is not None and header["dim"] != dim:
        raise CheckpointError(
            f"checkpoint has dim {header['dim']}, expected {dim}"
        )
    if aggregation is not None and header["aggregation"] != aggregation:
        raise CheckpointError(
            f"checkpoint was trained with aggregation {header['aggregation']!r},"
            f" expected {aggregation!r}"
        )

    def read_array(rows: int, cols: int) -> np.ndarray:
        nonlocal cursor
        count = rows * cols
        end = cursor + count * 8
        if end > len(raw):
            raise CheckpointError(f"truncated checkpoint: {path}")
        arr = np.frombuffer(raw[cursor:end], dtype=np.float64).reshape(rows, cols)
        cursor = end
        return arr.copy()

    tensors: dict[str, Tensor2] = {}
    shapes: list[tuple[int, int]] = []
    for name, rows, cols in header["tensors"]:
        tensors[name] = Tensor2(read_array(rows, cols), requires_grad=True)
        shapes.append((rows, cols))
    ps = ParameterStore(
        dim=header["dim"],
        layers=header["layers"],
        aggregation=header["aggregation"],
        num_entities=header["num_entities"],
        num_relations=header["num_relations"],
        num_types=header["num_types"],
        tensors=tensors,
    )
    meta = header["adam"]
    adam = AdamState(
        ps.parameters(),
        lr=meta["lr"],
        beta1=meta["beta1"],
        beta2=meta["beta2"],
        eps=meta["eps"],
    )
    adam.t = meta["t"]
    adam.m = [read_array(r, c) for r, c in shapes]
    adam.v = [read_array(r, c) for r, c in shapes]
    if cursor != len(raw):
        raise CheckpointError(f"trailing bytes in checkpoint: {path}")
    return ps, adam, header["step"], header.get("rng_state")
