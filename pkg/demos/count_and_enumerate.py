#!/usr/bin/env python3
"""Walk the built-in search spaces: counts, a few members, groups, schedule."""

from itertools import islice

from gaiakit.archspace import (
    builtin_subspaces,
    default_schedule,
    enumerate_space,
    subspace_by_name,
    union_cardinality,
)
from gaiakit.costmodel import total_gflops
from gaiakit.tsas import feasible_groups

spaces = builtin_subspaces()
print("sub-space cardinalities")
for space in spaces:
    print(f"  {space.name:6s} {space.cardinality():,}")
print(f"  union  {union_cardinality(spaces):,} (deduplicated)\n")

ar50 = subspace_by_name("ar50")
print("first members of ar50, in enumeration order")
for arch in islice(enumerate_space(ar50), 5):
    print(f"  {arch.key:44s} {total_gflops(arch):7.1f} GFLOPs")

groups = feasible_groups(ar50)
scales = sorted({key.scale for key in groups})
totals = sorted({key.total_depth for key in groups})
print(f"\n(scale, total depth) groups in ar50: {len(groups)}")
print(f"  scales {scales}")
print(f"  totals {totals}")

print("\ndefault shrinking schedule")
for phase in default_schedule().phases:
    warm = "warmup" if phase.warmup else "-"
    print(f"  {phase.space.name:6s} {phase.epochs:2d} epochs  {warm:6s} "
          f"anchor {phase.space.anchor.key}")
