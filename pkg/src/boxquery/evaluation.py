"""Classification and ranking evaluation, broken out per query template.

Two complementary views of model quality.  Classification treats the
query box as a crisp answer set: every entity whose box overlaps it is
predicted as an answer, and the prediction is scored against the stored
answer set with a confusion matrix, precision, recall, and F1.  Ranking
asks a weaker question, namely whether answers sit closer to the query
box than sampled non-answers, reported as the percentage of correctly
ordered (answer, non-answer) pairs with ties worth half a point.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boxes import DEFAULT_ALPHA
from .encoder import ParameterStore, QueryEncoding, encode
from .queries import TEMPLATE_NAMES, QueryInstance

MODES = ("classification", "ranking", "both")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of a binary decision against ground truth."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


def confusion(
    predicted: Iterable[int], truth: Iterable[int], universe: int
) -> ConfusionMatrix:
    """Score a predicted entity set against the true answer set."""
    predicted, truth = set(predicted), set(truth)
    for e in predicted | truth:
        if not 0 <= e < universe:
            raise ValueError(f"entity id {e} outside universe of size {universe}")
    tp = len(predicted & truth)
    fp = len(predicted - truth)
    fn = len(truth - predicted)
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=universe - tp - fp - fn)


def classify_box(
    q_center: np.ndarray,
    q_offset: np.ndarray,
    centers: np.ndarray,
    offsets: np.ndarray,
) -> np.ndarray:
    """Overlap mask of one query box against a stack of entity boxes.

    Boxes are closed, so touching counts as overlap; equivalently the
    outside distance is exactly zero.
    """
    return np.all(
        np.abs(centers - q_center) <= offsets + q_offset, axis=1
    )


def classify(ps: ParameterStore, q, method: str | None = None) -> frozenset[int]:
    """All entities whose box overlaps the encoded query box."""
    enc = encode(q, ps, method)
    centers, offsets = ps.entity_boxes()
    mask = classify_box(enc.box.center, enc.box.offset, centers, offsets)
    return frozenset(int(i) for i in np.nonzero(mask)[0])


def entity_distances(
    enc: QueryEncoding,
    centers: np.ndarray,
    offsets: np.ndarray,
    ids: Sequence[int],
    alpha: float = DEFAULT_ALPHA,
) -> np.ndarray:
    """Box distance from the query to each listed entity, vectorized."""
    rows = np.asarray(ids, dtype=int)
    delta = np.abs(centers[rows] - enc.box.center)
    span = offsets[rows] + enc.box.offset
    outside = np.maximum(delta - span, 0.0).sum(axis=1)
    inside = np.minimum(delta, span).sum(axis=1)
    return outside + alpha * inside


def _pair_wins(pos: np.ndarray, neg: np.ndarray) -> float:
    closer = (pos[:, None] < neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float(closer) + 0.5 * float(ties)


def pairwise_accuracy(
    pos_distances: Sequence[float], neg_distances: Sequence[float]
) -> float:
    """Percentage of (answer, non-answer) pairs ranked correctly.

    A pair counts when the answer is strictly closer; ties contribute
    half a win, so reversing the arguments complements the score to 100.
    """
    pos = np.asarray(pos_distances, dtype=float)
    neg = np.asarray(neg_distances, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("pairwise accuracy needs at least one distance per side")
    return 100.0 * _pair_wins(pos, neg) / (pos.size * neg.size)


@dataclass
class TemplateMetrics:
    """Accumulated evaluation results for one query template."""

    queries: int = 0
    confusion: ConfusionMatrix | None = None
    pair_wins: float = 0.0
    pairs: int = 0
    negative_pool: int = 0

    @property
    def pairwise(self) -> float | None:
        return 100.0 * self.pair_wins / self.pairs if self.pairs else None

    def to_dict(self) -> dict:
        row: dict = {"queries": self.queries}
        if self.confusion is not None:
            c = self.confusion
            row["confusion"] = {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}
            row["precision"] = c.precision
            row["recall"] = c.recall
            row["f1"] = c.f1
        else:
            row["confusion"] = None
            row["precision"] = row["recall"] = row["f1"] = None
        row["pairwise"] = self.pairwise
        row["pairs"] = self.pairs
        row["mean_negative_pool"] = (
            self.negative_pool / self.queries if self.queries else None
        )
        return row


@dataclass
class EvalReport:
    """Per-template metrics plus the evaluation settings that shaped them."""

    method: str
    mode: str
    alpha: float
    full_ranking: bool
    manifest_hash: str | None
    templates: dict[str, dict]
    overall: dict

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mode": self.mode,
            "alpha": self.alpha,
            "full_ranking": self.full_ranking,
            "manifest_hash": self.manifest_hash,
            "templates": self.templates,
            "overall": self.overall,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        return cls(
            method=obj["method"],
            mode=obj["mode"],
            alpha=obj["alpha"],
            full_ranking=obj["full_ranking"],
            manifest_hash=obj.get("manifest_hash"),
            templates=obj["templates"],
            overall=obj["overall"],
        )


def evaluate(
    ps: ParameterStore,
    instances: Sequence[QueryInstance],
    method: str | None = None,
    mode: str = "both",
    alpha: float = DEFAULT_ALPHA,
    manifest_hash: str | None = None,
    full_ranking: bool = False,
) -> EvalReport:
    """Evaluate a dataset split; the report always carries all 7 template rows.

    Classification scans the full entity universe per query; ranking uses
    each instance's stored negatives (uniform plus hard) unless
    ``full_ranking`` swaps in every non-answer.  Truth is the stored
    target set, which the sampler computed on the full graph.
    """
    if mode not in MODES:
        raise ValueError(f"unknown evaluation mode: {mode!r}")
    if not instances:
        raise ValueError("cannot evaluate an empty split")
    method = method or ps.aggregation
    want_cls = mode in ("classification", "both")
    want_rank = mode in ("ranking", "both")
    centers, offsets = ps.entity_boxes()
    universe = ps.num_entities
    per_template = {name: TemplateMetrics() for name in TEMPLATE_NAMES}
    if want_cls:
        for name in TEMPLATE_NAMES:
            per_template[name].confusion = ConfusionMatrix()

    for inst in instances:
        metrics = per_template[inst.query.template]
        metrics.queries += 1
        enc = encode(inst.query, ps, method)
        truth = inst.targets
        if want_cls:
            mask = classify_box(enc.box.center, enc.box.offset, centers, offsets)
            predicted = {int(i) for i in np.nonzero(mask)[0]}
            metrics.confusion = metrics.confusion + confusion(
                predicted, truth, universe
            )
        if want_rank:
            if full_ranking:
                neg_ids = [e for e in range(universe) if e not in truth]
            else:
                neg_ids = list(inst.negatives) + list(inst.hard_negatives)
            metrics.negative_pool += len(neg_ids)
            if neg_ids:
                pos = entity_distances(enc, centers, offsets, sorted(truth), alpha)
                neg = entity_distances(enc, centers, offsets, neg_ids, alpha)
                metrics.pair_wins += _pair_wins(pos, neg)
                metrics.pairs += pos.size * neg.size

    overall_conf = ConfusionMatrix()
    overall_wins, overall_pairs = 0.0, 0
    for m in per_template.values():
        if m.confusion is not None:
            overall_conf = overall_conf + m.confusion
        overall_wins += m.pair_wins
        overall_pairs += m.pairs
    overall: dict = {"queries": len(instances)}
    if want_cls:
        overall["confusion"] = {
            "tp": overall_conf.tp,
            "fp": overall_conf.fp,
            "fn": overall_conf.fn,
            "tn": overall_conf.tn,
        }
        overall["precision"] = overall_conf.precision
        overall["recall"] = overall_conf.recall
        overall["f1"] = overall_conf.f1
    overall["pairwise"] = (
        100.0 * overall_wins / overall_pairs if overall_pairs else None
    )
    overall["pairs"] = overall_pairs

    return EvalReport(
        method=method,
        mode=mode,
        alpha=alpha,
        full_ranking=full_ranking,
        manifest_hash=manifest_hash,
        templates={name: per_template[name].to_dict() for name in TEMPLATE_NAMES},
        overall=overall,
    )


def emit_report(report: EvalReport, path: str | Path, format: str = "json") -> Path:
    """Write a report as canonical JSON or long-form CSV."""
    path = Path(path)
    if format == "json":
        path.write_text(
            json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    elif format == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["template", "metric", "value"])
            for name in TEMPLATE_NAMES:
                row = report.templates[name]
                for metric in (
                    "queries",
                    "precision",
                    "recall",
                    "f1",
                    "pairwise",
                    "pairs",
                    "mean_negative_pool",
                ):
                    value = row.get(metric)
                    writer.writerow(
                        [name, metric, "" if value is None else value]
                    )
                conf = row.get("confusion")
                if conf:
                    for key in ("tp", "fp", "fn", "tn"):
                        writer.writerow([name, key, conf[key]])
    else:
        raise ValueError(f"unknown report format: {format!r}")
    return path


def load_report(path: str | Path) -> EvalReport:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return EvalReport.from_dict(obj)
