#!/usr/bin/env python3
"""Run the two-step search against the real stdio trainer instead of the simulator.

Needs node and a built adapter (cd adapter && npm install && npm run build).
"""
from __future__ import annotations

import shutil
from pathlib import Path

from gaiakit.archspace import subspace_by_name
from gaiakit.evaluator import ExternalEvaluator
from gaiakit.tsas import Constraint, SearchConfig, two_step_search

dist = Path(__file__).resolve().parents[1] / "adapter" / "dist" / "main.js"
if shutil.which("node") is None or not dist.exists():
    raise SystemExit("adapter not built; run: cd adapter && npm install && npm run build")

command = ["node", str(dist), "serve", "--epochs", "4", "--seed", "0"]
with ExternalEvaluator(command) as evaluator:
    winner, trace = two_step_search(
        subspace_by_name("ar50"),
        Constraint(scale=(480, 560)),
        evaluator,
        SearchConfig(seed=0),
        task="blobs",
    )

print(f"winner {winner.key}")
print(f"winner val accuracy {trace.winner_metric:.4f}")
print(f"budget: {trace.direct_evals} direct probes, {trace.fast_evals} fast finetunes")
print("\ntop of the shortlist")
for entry in trace.shortlist[:5]:
    print(f"  {entry.arch.key:44s} direct {entry.direct_metric:.3f}"
          f" fast {entry.fast_metric:.3f}")
