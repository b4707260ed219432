#!/usr/bin/env python3
"""Merge three toy label spaces, then pick transfer data for a target set."""

import numpy as np

from gaiakit.labelspace import (
    EmbeddingTable,
    LabelSpace,
    build_unified,
    merge_new_dataset,
)
from gaiakit.tsds import InstanceFeature, MostSimilar, TopK, represent_vectors, select

TOKENS = {
    "car": (1.0, 0.0, 0.0),
    "automobile": (0.96, 0.28, 0.0),
    "dog": (0.0, 1.0, 0.0),
    "puppy": (0.28, 0.96, 0.0),
    "bus": (0.6, 0.8, 0.0),
    "tram": (0.8, 0.0, 0.6),
    "piano": (0.0, 0.0, 1.0),
}
table = EmbeddingTable(TOKENS)

spaces = [
    LabelSpace("streets", ("car", "dog", "bus")),
    LabelSpace("vehicles", ("automobile", "tram")),
    LabelSpace("pets", ("puppy",)),
]
unified, report = build_unified(spaces, table)
print(f"unified categories: {unified.categories}")
for m in report.matches:
    print(f"  {m.dataset}:{m.source} -> {m.unified} (similarity {m.similarity:.3f})")
for n in report.novel:
    print(f"  {n.dataset}:{n.source} appended at index {n.unified_index}")

grown, ext, _ = merge_new_dataset(unified, LabelSpace("music", ("piano",)), table)
print(f"\nmerging a fourth dataset keeps the first {ext.prefix_length} head rows"
      f" and appends {list(ext.appended)}")

# data selection: 12 source images, target features near category 0
rng = np.random.default_rng(7)
source = represent_vectors([
    InstanceFeature(f"img{i:02d}", "pool", int(cat), tuple(rng.normal(loc=cat, size=4)))
    for i in range(12)
    for cat in (0, 1)
])
target = represent_vectors([
    InstanceFeature(f"tgt{i}", "task", 0, tuple(rng.normal(loc=0.0, size=4)))
    for i in range(3)
])

for strategy in (MostSimilar(), TopK(k=1)):
    picked = select(strategy, source, target, budget=4)
    print(f"\n{strategy.label} picks (budget 4)")
    for line in picked.to_lines():
        print(f"  {line}")
