"""Train a box-embedding model on a planted graph and evaluate it.

The clustered synthetic graph routes each relation between fixed clusters,
so chain queries have cluster-shaped answer sets a small model can learn.
We train the target-node read-out ("tm") for a couple of thousand steps,
then look at both evaluation modes: pairwise ranking (answer vs non-answer)
and box-overlap classification.
"""

import time

import numpy as np

from boxquery.encoder import encode, init_parameters
from boxquery.evaluation import classify, evaluate
from boxquery.sampling import SamplerConfig, generate_datasets, split_edges
from boxquery.synthetic import clustered_graph
from boxquery.training import TrainConfig, train

kg = clustered_graph(np.random.default_rng(1), n_entities=200, n_relations=5)
split = split_edges(kg, 0.10, seed=1)
cfg = SamplerConfig(quotas={"1-chain": 400, "2-chain": 300}, seed=1, val_fraction=0.3)
instances, _ = generate_datasets(kg, split, cfg)
datasets = {"train": [], "val": [], "test": []}
for inst in instances:
    datasets[inst.split].append(inst)
print("instances:", {k: len(v) for k, v in datasets.items()})

tc = TrainConfig(
    aggregation="tm", dim=16, layers=2, lr=0.005,
    max_steps=8000, eval_every=500, patience=100, seed=1,
)

print()
print("== before training ==")
fresh = init_parameters(kg, dim=tc.dim, layers=tc.layers, seed=tc.seed, aggregation="tm")
before = evaluate(fresh, datasets["test"], method="tm", mode="ranking")
print(f"random-init pairwise: 1-chain {before.templates['1-chain']['pairwise']:.1f}%, "
      f"2-chain {before.templates['2-chain']['pairwise']:.1f}%  (~coin flip)")

print()
print("== training ==")
start = time.time()
result = train(kg, datasets, tc)
print(f"{result.steps} steps in {time.time() - start:.0f}s, "
      f"best val pairwise {result.best_metric:.1f}% at step {result.best_step}")

print()
print("== after training ==")
report = evaluate(result.ps, datasets["test"], method="tm", mode="both")
for name in ("1-chain", "2-chain"):
    row = report.templates[name]
    print(f"{name}: pairwise {row['pairwise']:.1f}%, "
          f"precision {row['precision']:.2f}, recall {row['recall']:.2f}, "
          f"f1 {row['f1']:.2f}")

print()
print("== the two modes measure different things ==")
inst = datasets["test"][0]
enc = encode(inst.query, result.ps, "tm")
predicted = classify(result.ps, inst.query, "tm")
print(f"query template {inst.query.template}: query box mean width "
      f"{2 * enc.box.offset.mean():.1f} across {enc.box.dim} dims")
print(f"box-overlap classification: {len(predicted)} predicted, "
      f"{len(inst.targets)} true, {len(predicted & set(inst.targets))} overlap")
print()
print("Pairwise ranking separates answers from non-answers long before the")
print("boxes tighten: with a small inside weight (alpha=0.02), a margin of 1")
print("is reachable through center misalignment alone, so boxes stay wide,")
print("the overlap classifier keeps perfect recall but weak precision, and")
print("the ranking metric is the informative one at this training budget.")
