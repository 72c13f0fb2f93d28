"""Relational message passing that turns a query graph into a box.

Query nodes start from learned vectors: anchors copy the embedding of
their bound entity, variables and the target copy a per-entity-type
embedding (with an untyped fallback row).  Each message-passing step
updates every node from itself and its neighbors with per-relation,
per-direction weight matrices; inverse edges are included so information
reaches the target regardless of edge orientation.  A final aggregation
(sum, max, target read-out, or a shared per-node MLP) produces one raw
2d vector that is split into the center and clamped offset of the query
box.

All state lives in a :class:`ParameterStore` of named tensors so the
optimizer and the checkpoint format can enumerate every parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor2
from .boxes import Box, materialize, split_raw_box
from .graphs import KnowledgeGraph
from .queries import QueryGraph, diameter

AGGREGATIONS = ("sum", "max", "tm", "mlp")


class ConfigurationError(ValueError):
    """Model configuration inconsistent with the requested computation."""


@dataclass
class ParameterStore:
    """Named parameter tensors plus the hyperparameters that shape them."""

    dim: int
    layers: int
    aggregation: str
    num_entities: int
    num_relations: int
    num_types: int  # named types; the table holds one extra untyped row
    tensors: dict[str, Tensor2] = field(repr=False)

    def names(self) -> list[str]:
        return list(self.tensors)

    def parameters(self) -> list[Tensor2]:
        return list(self.tensors.values())

    def __getitem__(self, name: str) -> Tensor2:
        return self.tensors[name]

    @property
    def entity_embeddings(self) -> Tensor2:
        return self.tensors["entity_embeddings"]

    @property
    def type_embeddings(self) -> Tensor2:
        return self.tensors["type_embeddings"]

    def self_weight(self, layer: int) -> Tensor2:
        return self.tensors[f"msg{layer}_self"]

    def relation_weight(self, layer: int, relation: int, direction: str) -> Tensor2:
        return self.tensors[f"msg{layer}_rel{relation}_{direction}"]

    def entity_boxes(self) -> tuple[np.ndarray, np.ndarray]:
        """(centers, clamped offsets) of all entity boxes, as plain arrays."""
        table = self.entity_embeddings.data
        return table[:, : self.dim].copy(), np.maximum(table[:, self.dim :], 0.0)

    def entity_box(self, entity: int) -> Box:
        row = self.entity_embeddings.data[entity]
        return materialize(row[: self.dim], row[self.dim :])

    def zero_grads(self) -> None:
        ad.zero_grads(self.tensors.values())


def init_parameters(
    kg: KnowledgeGraph,
    dim: int = 32,
    layers: int = 3,
    seed: int = 0,
    aggregation: str = "sum",
) -> ParameterStore:
    """Fresh parameters: centers ~ U(0,10), raw offsets ~ N(3,1), message
    and MLP weights Glorot-uniform.  Deterministic per seed."""
    if dim < 1:
        raise ConfigurationError(f"embedding dimension must be >= 1, got {dim}")
    if layers < 1:
        raise ConfigurationError(f"layer count must be >= 1, got {layers}")
    if aggregation not in AGGREGATIONS:
        raise ConfigurationError(f"unknown aggregation: {aggregation!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0B0E]))
    width = 2 * dim

    def embedding_table(rows: int) -> Tensor2:
        centers = rng.uniform(0.0, 10.0, size=(rows, dim))
        offsets = rng.normal(3.0, 1.0, size=(rows, dim))
        return Tensor2(np.concatenate([centers, offsets], axis=1), requires_grad=True)

    def glorot(rows: int, cols: int) -> Tensor2:
        limit = np.sqrt(6.0 / (rows + cols))
        return Tensor2(rng.uniform(-limit, limit, size=(rows, cols)), requires_grad=True)

    tensors: dict[str, Tensor2] = {}
    tensors["entity_embeddings"] = embedding_table(kg.num_entities)
    tensors["type_embeddings"] = embedding_table(kg.num_types + 1)
    for layer in range(1, layers + 1):
        tensors[f"msg{layer}_self"] = glorot(width, width)
        for r in range(kg.num_relations):
            tensors[f"msg{layer}_rel{r}_fwd"] = glorot(width, width)
            tensors[f"msg{layer}_rel{r}_inv"] = glorot(width, width)
    if aggregation == "mlp":
        tensors["mlp_w1"] = glorot(width, width)
        tensors["mlp_b1"] = Tensor2(np.zeros((1, width)), requires_grad=True)
        tensors["mlp_w2"] = glorot(width, width)
        tensors["mlp_b2"] = Tensor2(np.zeros((1, width)), requires_grad=True)
    return ParameterStore(
        dim=dim,
        layers=layers,
        aggregation=aggregation,
        num_entities=kg.num_entities,
        num_relations=kg.num_relations,
        num_types=kg.num_types,
        tensors=tensors,
    )


def node_features(q: QueryGraph, ps: ParameterStore) -> list[Tensor2]:
    """Initial per-node states: entity rows for anchors, type rows otherwise."""
    tpl = q.shape
    bindings = q.node_bindings()
    untyped = ps.num_types
    states = []
    for node in range(tpl.num_nodes):
        if node in bindings:
            states.append(ad.gather_rows(ps.entity_embeddings, [bindings[node]]))
        else:
            hint = untyped
            if q.var_types is not None:
                hint = min(q.var_types[node], untyped)
            states.append(ad.gather_rows(ps.type_embeddings, [hint]))
    return states


def message_pass(
    states: list[Tensor2],
    q: QueryGraph,
    ps: ParameterStore,
    layer: int,
    last: bool = False,
) -> list[Tensor2]:
    """One update step over the query graph, inverse edges included.

    Each node combines a self-loop message with mean-normalized messages
    per (relation, direction).  The last layer stays linear so raw centers
    and offsets can take any sign.
    """
    if not 1 <= layer <= ps.layers:
        raise ConfigurationError(f"layer {layer} outside 1..{ps.layers}")
    edges = q.edge_list()
    n = q.shape.num_nodes
    incoming: list[list[tuple[int, int, str]]] = [[] for _ in range(n)]
    for s, r, d in edges:
        incoming[d].append((s, r, "fwd"))
        incoming[s].append((d, r, "inv"))
    out: list[Tensor2] = []
    for node in range(n):
        acc = ad.matmul(states[node], ps.self_weight(layer))
        counts: dict[tuple[int, str], int] = {}
        for _, r, direction in incoming[node]:
            counts[(r, direction)] = counts.get((r, direction), 0) + 1
        for src, r, direction in incoming[node]:
            msg = ad.matmul(states[src], ps.relation_weight(layer, r, direction))
            acc = acc + msg * (1.0 / counts[(r, direction)])
        out.append(acc if last else ad.relu(acc))
    return out


def aggregate(
    states: list[Tensor2],
    method: str,
    q: QueryGraph,
    ps: ParameterStore,
) -> Tensor2:
    """Reduce node states to one raw 2d vector."""
    if method == "sum":
        total = states[0]
        for s in states[1:]:
            total = total + s
        return total
    if method == "max":
        best = states[0]
        for s in states[1:]:
            best = ad.maximum(best, s)
        return best
    if method == "tm":
        return states[q.shape.target_node]
    if method == "mlp":
        total = None
        for s in states:
            hidden = ad.relu(ad.affine(s, ps["mlp_w1"], ps["mlp_b1"]))
            mapped = ad.affine(hidden, ps["mlp_w2"], ps["mlp_b2"])
            total = mapped if total is None else total + mapped
        return total
    raise ConfigurationError(f"unknown aggregation: {method!r}")


@dataclass
class QueryEncoding:
    """The query box plus the differentiable handles that produced it."""

    box: Box
    center: Tensor2
    offset: Tensor2
    node_states: list[np.ndarray]


def encode(
    q: QueryGraph,
    ps: ParameterStore,
    method: str | None = None,
    steps: int | None = None,
) -> QueryEncoding:
    """Full pipeline: features -> message passing -> aggregate -> box.

    The target read-out (``tm``) runs exactly ``diameter(q)`` steps; any
    explicit step count that disagrees is a configuration error.  Other
    aggregations run all ``ps.layers`` steps unless overridden.
    """
    method = method or ps.aggregation
    if method not in AGGREGATIONS:
        raise ConfigurationError(f"unknown aggregation: {method!r}")
    if method == "mlp" and "mlp_w1" not in ps.tensors:
        raise ConfigurationError("store was initialized without MLP weights")
    if method == "tm":
        needed = diameter(q)
        if steps is None:
            steps = needed
        if steps != needed:
            raise ConfigurationError(
                f"tm aggregation needs exactly {needed} steps for {q.template}, got {steps}"
            )
    elif steps is None:
        steps = ps.layers
    if steps > ps.layers:
        raise ConfigurationError(
            f"{steps} message-passing steps requested but store has {ps.layers} layers"
        )
    states = node_features(q, ps)
    # Shallow queries run the *deepest* layers so that each layer keeps a
    # fixed role (the final layer is always the linear read-out) no matter
    # how many steps a particular query needs.
    first = ps.layers - steps + 1
    for layer in range(first, ps.layers + 1):
        states = message_pass(states, q, ps, layer, last=(layer == ps.layers))
    raw = aggregate(states, method, q, ps)
    center, offset = split_raw_box(raw)
    return QueryEncoding(
        box=Box(center.data[0].copy(), offset.data[0].copy()),
        center=center,
        offset=offset,
        node_states=[s.data.copy() for s in states],
    )
