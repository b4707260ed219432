"""Task-specific architecture selection.

Search runs in two steps over (scale, total depth) groups: per group, K
constraint-satisfying members are sampled and probed at Direct fidelity and
the per-group best survives; the top half of the group winners is then
re-scored with the fast-finetune fidelity and the best of those wins.  Ties
at any stage break by (higher metric, lower FLOPs, lexicographic arch key),
so a whole run is a pure function of its seeds.

Groups live inside one anchor sub-space; when several sub-spaces are
searched together, their groups are formed separately and pooled before the
shortlist cut.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .archspace import Architecture, SubSpace, _combos_by_total, sample
from .costmodel import DEFAULT_HEAD, HeadConfig, LatencyModel, latency_estimate, total_gflops
from .errors import AllTied, NoFeasibleGroup, SamplingExhausted
from .evaluator import (
    EvalRequest,
    Evaluator,
    Fidelity,
    FIDELITY_COST,
    evaluate_batch,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Constraint:
    """Conjunction of optional bounds; an empty constraint admits everything."""

    flops: tuple[float, float] | None = None  # [lo, hi) in GFLOPs
    latency: tuple[LatencyModel, float] | None = None  # (model, max ms)
    scale: tuple[int, int] | None = None  # inclusive
    member_of: SubSpace | None = None
    head: HeadConfig = DEFAULT_HEAD

    @property
    def trivial(self) -> bool:
        return (
            self.flops is None
            and self.latency is None
            and self.scale is None
            and self.member_of is None
        )

    def admits_scale(self, scale: int) -> bool:
        return self.scale is None or self.scale[0] <= scale <= self.scale[1]

    def satisfied(self, arch: Architecture) -> bool:
        if not self.admits_scale(arch.scale):
            return False
        if self.member_of is not None and not self.member_of.contains(arch):
            return False
        if self.flops is not None:
            g = total_gflops(arch, self.head)
            if not self.flops[0] <= g < self.flops[1]:
                return False
        if self.latency is not None:
            model, bound = self.latency
            if latency_estimate(model, arch, self.head) > bound:
                return False
        return True


@dataclass(frozen=True)
class GroupKey:
    scale: int
    total_depth: int


@dataclass(frozen=True)
class SearchConfig:
    k: int = 5
    keep: float = 0.5
    attempt_cap: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"K must be >= 1, got {self.k}")
        if not 0.0 < self.keep <= 1.0:
            raise ValueError(f"keep fraction must be in (0, 1], got {self.keep}")
        if self.attempt_cap < self.k:
            raise ValueError("attempt cap cannot be below K")


@dataclass(frozen=True)
class GroupRecord:
    space: str
    key: GroupKey
    samples: tuple[tuple[Architecture, float], ...]
    winner: Architecture
    winner_metric: float


@dataclass(frozen=True)
class ShortlistEntry:
    space: str
    key: GroupKey
    arch: Architecture
    direct_metric: float
    fast_metric: float


@dataclass(frozen=True)
class SearchTrace:
    groups: tuple[GroupRecord, ...]
    shortlist: tuple[ShortlistEntry, ...]
    winner: Architecture
    winner_metric: float
    direct_evals: int
    fast_evals: int
    budget_units: float

    def to_lines(self) -> list[str]:
        """Line-delimited trace: step-1 samples, shortlist, winner."""
        lines = []
        for g in self.groups:
            for arch, metric in g.samples:
                lines.append(
                    f"direct\t{g.space}\t{g.key.scale}x{g.key.total_depth}"
                    f"\t{arch.key}\t{metric!r}"
                )
        for e in self.shortlist:
            lines.append(
                f"fast\t{e.space}\t{e.key.scale}x{e.key.total_depth}"
                f"\t{e.arch.key}\t{e.fast_metric!r}"
            )
        lines.append(f"winner\t{self.winner.key}\t{self.winner_metric!r}")
        lines.append(
            f"budget\tdirect={self.direct_evals}\tfast={self.fast_evals}"
            f"\tunits={self.budget_units!r}"
        )
        return lines


def _group_rank_key(metric: float, arch: Architecture, head: HeadConfig):
    return (-metric, total_gflops(arch, head), arch.key)


def _sample_in_group(space: SubSpace, key: GroupKey, rng: np.random.Generator) -> Architecture:
    combos = _combos_by_total(space.depth)[key.total_depth]
    depths = combos[int(rng.integers(len(combos)))]
    widths = tuple(g.values()[int(rng.integers(g.size))] for g in space.width)
    return Architecture(depths, widths, key.scale)  # type: ignore[arg-type]


def _iter_group_members(space: SubSpace, key: GroupKey) -> Iterable[Architecture]:
    combos = _combos_by_total(space.depth)[key.total_depth]
    for depths in combos:
        for widths in itertools.product(*(g.values() for g in space.width)):
            yield Architecture(depths, widths, key.scale)  # type: ignore[arg-type]


def _group_cardinality(space: SubSpace, key: GroupKey) -> int:
    n = len(_combos_by_total(space.depth)[key.total_depth])
    for g in space.width:
        n *= g.size
    return n


def all_group_keys(space: SubSpace) -> tuple[GroupKey, ...]:
    return tuple(
        GroupKey(scale, total)
        for scale in space.scale.values()
        for total in space.totals()
    )


def feasible_groups(
    space: SubSpace,
    constraint: Constraint = Constraint(),
    probe_budget: int = 64,
    seed: int = 0,
) -> frozenset[GroupKey]:
    """Group keys with at least one constraint-satisfying member.

    Groups no larger than the probe budget are checked exhaustively; larger
    ones are probed with seeded samples, so a pathologically sparse group can
    in principle be missed; raise the budget to tighten the guarantee.
    """
    if probe_budget < 1:
        raise ValueError("probe budget must be >= 1")
    feasible = []
    for key in all_group_keys(space):
        if not constraint.admits_scale(key.scale):
            continue
        if constraint.trivial:
            feasible.append(key)
            continue
        if _group_cardinality(space, key) <= probe_budget:
            if any(constraint.satisfied(a) for a in _iter_group_members(space, key)):
                feasible.append(key)
            continue
        rng = np.random.default_rng((seed, key.scale, key.total_depth))
        for _ in range(probe_budget):
            if constraint.satisfied(_sample_in_group(space, key, rng)):
                feasible.append(key)
                break
    if not feasible:
        raise NoFeasibleGroup(f"no (scale, depth) group satisfies {constraint}")
    return frozenset(feasible)


def sample_group(
    space: SubSpace,
    key: GroupKey,
    constraint: Constraint,
    k: int,
    rng: np.random.Generator,
    attempt_cap: int,
) -> list[Architecture]:
    """Up to k distinct constraint-satisfying members of one group.

    Finding none within the attempt cap is an error; finding some but fewer
    than k is not (tight constraints may leave thin groups).
    """
    found: dict[str, Architecture] = {}
    for _ in range(attempt_cap):
        if len(found) == k:
            break
        cand = _sample_in_group(space, key, rng)
        if cand.key not in found and constraint.satisfied(cand):
            found[cand.key] = cand
    if not found:
        raise SamplingExhausted(
            f"group {key.scale}x{key.total_depth} of {space.name}: "
            f"no satisfying member in {attempt_cap} attempts"
        )
    return list(found.values())


def two_step_search(
    spaces: SubSpace | Sequence[SubSpace],
    constraint: Constraint,
    evaluator: Evaluator,
    cfg: SearchConfig = SearchConfig(),
    task: str = "search",
    jobs: int = 1,
) -> tuple[Architecture, SearchTrace]:
    """Group-wise direct probe, then fast-finetune the top half of winners."""
    space_list = [spaces] if isinstance(spaces, SubSpace) else list(spaces)
    head = constraint.head

    # step 1: sample per group, in deterministic (space, scale, depth) order
    plan: list[tuple[str, GroupKey, list[Architecture]]] = []
    for si, space in enumerate(space_list):
        for key in sorted(
            feasible_groups(space, constraint, seed=cfg.seed),
            key=lambda g: (g.scale, g.total_depth),
        ):
            rng = np.random.default_rng((cfg.seed, si, key.scale, key.total_depth))
            try:
                members = sample_group(
                    space, key, constraint, cfg.k, rng, cfg.attempt_cap
                )
            except SamplingExhausted as exc:
                log.warning("%s; group dropped", exc)
                continue
            plan.append((space.name, key, members))
    if not plan:
        raise NoFeasibleGroup("every feasible group was dropped during sampling")

    reqs = [
        EvalRequest(f"d:{name}:{key.scale}x{key.total_depth}:{i}", arch,
                    Fidelity.DIRECT, task)
        for name, key, members in plan
        for i, arch in enumerate(members)
    ]
    results = evaluate_batch(evaluator, reqs, jobs=jobs)
    metrics = {r.id: r.metric for r in results}

    groups = []
    for name, key, members in plan:
        scored = [
            (arch, metrics[f"d:{name}:{key.scale}x{key.total_depth}:{i}"])
            for i, arch in enumerate(members)
        ]
        win_arch, win_metric = min(
            scored, key=lambda t: _group_rank_key(t[1], t[0], head)
        )
        groups.append(GroupRecord(name, key, tuple(scored), win_arch, win_metric))

    # step 2: fast-finetune the top ceil(keep * G) group winners
    n_keep = max(1, math.ceil(cfg.keep * len(groups)))
    ranked = sorted(
        groups, key=lambda g: _group_rank_key(g.winner_metric, g.winner, head)
    )[:n_keep]
    fast_reqs = [
        EvalRequest(f"f:{g.space}:{g.key.scale}x{g.key.total_depth}", g.winner,
                    Fidelity.FAST, task)
        for g in ranked
    ]
    fast_results = evaluate_batch(evaluator, fast_reqs, jobs=jobs)
    shortlist = tuple(
        ShortlistEntry(g.space, g.key, g.winner, g.winner_metric, r.metric)
        for g, r in zip(ranked, fast_results)
    )
    best = min(shortlist, key=lambda e: _group_rank_key(e.fast_metric, e.arch, head))

    n_direct = len(reqs)
    n_fast = len(fast_reqs)
    trace = SearchTrace(
        groups=tuple(groups),
        shortlist=shortlist,
        winner=best.arch,
        winner_metric=best.fast_metric,
        direct_evals=n_direct,
        fast_evals=n_fast,
        budget_units=n_direct * FIDELITY_COST[Fidelity.DIRECT]
        + n_fast * FIDELITY_COST[Fidelity.FAST],
    )
    return best.arch, trace


# --- rank correlation ---------------------------------------------------------


def kendall_tau(pairs: Sequence[tuple[float, float]]) -> float:
    """Tie-corrected tau-b over all C(n, 2) index pairs."""
    if len(pairs) < 2:
        raise ValueError(f"need >= 2 pairs, got {len(pairs)}")
    arr = np.asarray(pairs, dtype=np.float64)
    x, y = arr[:, 0], arr[:, 1]
    n = len(x)
    iu = np.triu_indices(n, k=1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    prod = sx * sy
    concordant = int(np.sum(prod > 0))
    discordant = int(np.sum(prod < 0))
    n0 = n * (n - 1) // 2
    n1 = int(np.sum(sx == 0))
    n2 = int(np.sum(sy == 0))
    denom = math.sqrt(float(n0 - n1) * float(n0 - n2))
    if denom == 0.0:
        raise AllTied("tau undefined: a list is entirely tied")
    return (concordant - discordant) / denom


# --- ranking studies ------------------------------------------------------------


EvaluatorFactory = Callable[[int], Evaluator]


@dataclass(frozen=True)
class StudyRow:
    seed: int
    arch: Architecture
    reference: float
    proxies: tuple[float, ...]  # aligned with StudyReport.fidelities


@dataclass(frozen=True)
class StudyReport:
    fidelities: tuple[Fidelity, ...]
    seeds: tuple[int, ...]
    rows: tuple[StudyRow, ...]
    taus: Mapping[Fidelity, tuple[float, ...]]

    def mean_tau(self, fidelity: Fidelity) -> float:
        return float(np.mean(self.taus[fidelity]))

    def scatter_points(self, fidelity: Fidelity) -> list[tuple[float, float]]:
        j = self.fidelities.index(fidelity)
        return [(r.reference, r.proxies[j]) for r in self.rows]

    def to_csv_lines(self) -> list[str]:
        cols = ["seed", "arch", "full"] + [f.wire for f in self.fidelities]
        lines = [",".join(cols)]
        for r in self.rows:
            vals = [str(r.seed), r.arch.key, f"{r.reference!r}"]
            vals += [f"{p!r}" for p in r.proxies]
            lines.append(",".join(vals))
        return lines


def ranking_study(
    evaluator: Evaluator | EvaluatorFactory,
    space: SubSpace,
    n_models: int,
    fidelities: tuple[Fidelity, ...] = (Fidelity.DIRECT, Fidelity.FAST),
    seeds: Sequence[int] = (0,),
    task: str = "study",
    jobs: int = 1,
) -> StudyReport:
    """Rank-correlate proxy fidelities against the full schedule, per seed."""
    if n_models < 10:
        raise ValueError(f"a ranking study needs >= 10 models, got {n_models}")
    if not seeds:
        raise ValueError("need at least one seed")
    rows: list[StudyRow] = []
    taus: dict[Fidelity, list[float]] = {f: [] for f in fidelities}
    for seed in seeds:
        if callable(evaluator) and not hasattr(evaluator, "evaluate"):
            ev = evaluator(seed)
        else:
            ev = evaluator  # type: ignore[assignment]
        rng = np.random.default_rng(seed)
        archs = [sample(space, rng) for _ in range(n_models)]
        reqs = [
            EvalRequest(f"s{seed}:{i}:full", a, Fidelity.FULL, task)
            for i, a in enumerate(archs)
        ]
        for fid in fidelities:
            reqs += [
                EvalRequest(f"s{seed}:{i}:{fid.wire}", a, fid, task)
                for i, a in enumerate(archs)
            ]
        metrics = {r.id: r.metric for r in evaluate_batch(ev, reqs, jobs=jobs)}
        refs = [metrics[f"s{seed}:{i}:full"] for i in range(n_models)]
        proxy_cols = {
            fid: [metrics[f"s{seed}:{i}:{fid.wire}"] for i in range(n_models)]
            for fid in fidelities
        }
        for i, a in enumerate(archs):
            rows.append(
                StudyRow(seed, a, refs[i], tuple(proxy_cols[f][i] for f in fidelities))
            )
        for fid in fidelities:
            taus[fid].append(kendall_tau(list(zip(refs, proxy_cols[fid]))))
    return StudyReport(
        fidelities=tuple(fidelities),
        seeds=tuple(seeds),
        rows=tuple(rows),
        taus={f: tuple(v) for f, v in taus.items()},
    )
