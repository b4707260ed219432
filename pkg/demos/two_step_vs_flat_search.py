#!/usr/bin/env python3
"""Two-step search against a flat random baseline at the same budget.

The flat baseline spends the whole budget on direct probes of uniformly
sampled candidates and returns the best-probed one; the two-step search
spends most of it on group probes and the rest on fast finetuning.
"""
from __future__ import annotations

import argparse

import numpy as np

from gaiakit.archspace import sample, subspace_by_name
from gaiakit.evaluator import (
    EvalRequest,
    Fidelity,
    SimulatedEvaluator,
    latent_quality,
)
from gaiakit.tsas import Constraint, SearchConfig, two_step_search

parser = argparse.ArgumentParser()
parser.add_argument("--space", default="ar50")
parser.add_argument("--trials", type=int, default=20)
args = parser.parse_args()

space = subspace_by_name(args.space)
constraint = Constraint(scale=(480, 640))
wins = 0
two_step_q = []
flat_q = []
for trial in range(args.trials):
    evaluator = SimulatedEvaluator(study_seed=trial)
    winner, trace = two_step_search(space, constraint, evaluator, SearchConfig(seed=trial))
    budget = trace.direct_evals * 0.01 + trace.fast_evals * 0.2

    # flat baseline: all-direct probing on the same budget
    n_flat = int(budget / 0.01)
    rng = np.random.default_rng(trial)
    best_flat, best_metric = None, -np.inf
    drawn = 0
    while drawn < n_flat:
        arch = sample(space, rng)
        if not constraint.satisfied(arch):
            continue
        drawn += 1
        req = EvalRequest(f"flat-{drawn}", arch, Fidelity.DIRECT, "search")
        metric = evaluator.evaluate(req).metric
        if metric > best_metric:
            best_flat, best_metric = arch, metric

    q_two = latent_quality(winner)
    q_flat = latent_quality(best_flat)
    two_step_q.append(q_two)
    flat_q.append(q_flat)
    wins += q_two > q_flat

print(f"{args.trials} trials on {args.space}, scale window 480:640")
print(f"  two-step mean latent quality {np.mean(two_step_q):.3f}")
print(f"  flat     mean latent quality {np.mean(flat_q):.3f}")
print(f"  two-step strictly better in {wins}/{args.trials} trials")
