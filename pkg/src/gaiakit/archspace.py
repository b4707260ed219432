"""Elastic architecture spaces around model anchors.

An architecture is (per-stage depths, per-slot widths, input scale).  A
sub-space pins a grid for every coordinate plus an anchor that must lie on
the grids.  Three built-in sub-spaces surround progressively deeper anchors;
their stage-3 depth grids are disjoint, so their union deduplicates cleanly.

Sampling follows a rule pool: five total-depth quantile rules at 1/8 each
and a fully random rule at 3/8.  Draws are pure functions of (space, rule
pool, seed): rule, then depths, then widths slot by slot, then scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import EmptySpace, EpochOutOfRange, InvalidPhase, SpaceTooLarge

# Materialization guard for enumerate_space / union_cardinality.
ENUM_CAP = 2_000_000


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Grid:
    """Closed arithmetic range lo..hi whose step divides hi - lo."""

    lo: int
    hi: int
    step: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise EmptySpace(f"grid lo {self.lo} exceeds hi {self.hi}")
        if self.step < 1:
            raise EmptySpace(f"grid step must be positive, got {self.step}")
        if (self.hi - self.lo) % self.step:
            raise EmptySpace(
                f"grid ({self.lo}, {self.hi}, {self.step}) does not land on its hi"
            )

    @property
    def size(self) -> int:
        return (self.hi - self.lo) // self.step + 1

    def values(self) -> tuple[int, ...]:
        return tuple(range(self.lo, self.hi + 1, self.step))

    def __contains__(self, value: int) -> bool:
        return self.lo <= value <= self.hi and (value - self.lo) % self.step == 0


@dataclass(frozen=True)
class Architecture:
    """A concrete network: 4 stage depths, 5 widths (stem first), input scale."""

    depths: tuple[int, int, int, int]
    widths: tuple[int, int, int, int, int]
    scale: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "scale", int(self.scale))
        if len(self.depths) != 4:
            raise ValueError(f"expected 4 stage depths, got {len(self.depths)}")
        if len(self.widths) != 5:
            raise ValueError(f"expected 5 widths, got {len(self.widths)}")
        if any(d < 1 for d in self.depths):
            raise ValueError(f"stage depths must be >= 1: {self.depths}")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"widths must be >= 1: {self.widths}")
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1: {self.scale}")

    @property
    def total_depth(self) -> int:
        return sum(self.depths)

    @property
    def key(self) -> str:
        """Canonical string form, stable across processes; see parse_arch_key."""
        d = ".".join(str(v) for v in self.depths)
        w = ".".join(str(v) for v in self.widths)
        return f"s{self.scale}-d{d}-w{w}"


def parse_arch_key(key: str) -> Architecture:
    """Inverse of Architecture.key."""
    try:
        s_part, d_part, w_part = key.split("-")
        scale = int(s_part.removeprefix("s"))
        depths = tuple(int(v) for v in d_part.removeprefix("d").split("."))
        widths = tuple(int(v) for v in w_part.removeprefix("w").split("."))
        return Architecture(depths, widths, scale)  # type: ignore[arg-type]
    except (ValueError, AttributeError) as exc:
        raise ValueError(f"bad architecture key {key!r}") from exc


@dataclass(frozen=True)
class SubSpace:
    """Grids for every architecture coordinate plus an on-grid anchor."""

    name: str
    depth: tuple[Grid, Grid, Grid, Grid]
    width: tuple[Grid, Grid, Grid, Grid, Grid]
    scale: Grid
    anchor: Architecture

    def __post_init__(self) -> None:
        object.__setattr__(self, "depth", tuple(self.depth))
        object.__setattr__(self, "width", tuple(self.width))
        if len(self.depth) != 4:
            raise ValueError("a sub-space needs exactly 4 depth grids")
        if len(self.width) != 5:
            raise ValueError("a sub-space needs exactly 5 width grids")
        if not self.contains(self.anchor):
            raise ValueError(f"anchor {self.anchor.key} is off the {self.name} grids")

    def contains(self, arch: Architecture) -> bool:
        return (
            all(d in g for d, g in zip(arch.depths, self.depth))
            and all(w in g for w, g in zip(arch.widths, self.width))
            and arch.scale in self.scale
        )

    def cardinality(self) -> int:
        n = self.scale.size
        for g in self.depth:
            n *= g.size
        for g in self.width:
            n *= g.size
        return n

    @property
    def min_total_depth(self) -> int:
        return sum(g.lo for g in self.depth)

    @property
    def max_total_depth(self) -> int:
        return sum(g.hi for g in self.depth)

    def totals(self) -> tuple[int, ...]:
        """Achievable total depths, ascending."""
        return tuple(sorted(_combos_by_total(self.depth)))

    def depth_targets(self) -> tuple[int, int, int, int, int]:
        """Nearest achievable totals for the five quantile rules."""
        return tuple(  # type: ignore[return-value]
            _nearest_total(self, q) for q in (0.0, 0.25, 0.5, 0.75, 1.0)
        )


@lru_cache(maxsize=None)
def _combos_by_total(
    depth_grids: tuple[Grid, ...],
) -> dict[int, tuple[tuple[int, ...], ...]]:
    """Depth combinations grouped by total, each group in lexicographic order."""
    count = 1
    for g in depth_grids:
        count *= g.size
    if count > ENUM_CAP:
        raise SpaceTooLarge(f"{count} depth combinations exceed cap {ENUM_CAP}")
    groups: dict[int, list[tuple[int, ...]]] = {}
    for combo in itertools.product(*(g.values() for g in depth_grids)):
        groups.setdefault(sum(combo), []).append(combo)
    return {t: tuple(v) for t, v in groups.items()}


def _nearest_total(space: SubSpace, q: float) -> int:
    target = _round_half_up(
        space.min_total_depth + q * (space.max_total_depth - space.min_total_depth)
    )
    return min(space.totals(), key=lambda t: (abs(t - target), t))


def enumerate_space(space: SubSpace, cap: int = ENUM_CAP) -> Iterator[Architecture]:
    """Yield every member in (scale, depths, widths) lexicographic order."""
    if space.cardinality() > cap:
        raise SpaceTooLarge(
            f"{space.name} holds {space.cardinality()} members, cap is {cap}"
        )
    for scale in space.scale.values():
        for depths in itertools.product(*(g.values() for g in space.depth)):
            for widths in itertools.product(*(g.values() for g in space.width)):
                yield Architecture(depths, widths, scale)  # type: ignore[arg-type]


def union_cardinality(spaces: Sequence[SubSpace], cap: int = ENUM_CAP) -> int:
    """Size of the deduplicated union of several sub-spaces."""
    total = sum(sp.cardinality() for sp in spaces)
    if total > cap:
        raise SpaceTooLarge(f"union enumeration of {total} members exceeds cap {cap}")
    seen: set[tuple] = set()
    for sp in spaces:
        for scale in sp.scale.values():
            for depths in itertools.product(*(g.values() for g in sp.depth)):
                for widths in itertools.product(*(g.values() for g in sp.width)):
                    seen.add((scale, depths, widths))
    return len(seen)


# --- built-in sub-spaces ---------------------------------------------------

_WIDTH_GRIDS = (
    Grid(32, 64, 16),
    Grid(48, 80, 16),
    Grid(96, 160, 32),
    Grid(192, 320, 64),
    Grid(384, 640, 128),
)
_ANCHOR_WIDTHS = (64, 64, 128, 256, 512)


def _builtin(name: str, stage3: Grid, anchor3: int, scale: Grid, anchor_scale: int) -> SubSpace:
    return SubSpace(
        name=name,
        depth=(Grid(2, 4, 1), Grid(2, 6, 2), stage3, Grid(2, 4, 1)),
        width=_WIDTH_GRIDS,
        scale=scale,
        anchor=Architecture((3, 4, anchor3, 3), _ANCHOR_WIDTHS, anchor_scale),
    )


AR50 = _builtin("ar50", Grid(4, 8, 2), 6, Grid(400, 720, 80), 560)
AR77 = _builtin("ar77", Grid(11, 19, 4), 15, Grid(480, 800, 80), 640)
AR101 = _builtin("ar101", Grid(17, 29, 6), 23, Grid(560, 880, 80), 720)


def builtin_subspaces() -> tuple[SubSpace, SubSpace, SubSpace]:
    """The three anchor sub-spaces, largest anchor last."""
    return (AR50, AR77, AR101)


def subspace_by_name(name: str) -> SubSpace:
    table = {sp.name: sp for sp in builtin_subspaces()}
    key = name.strip().lower()
    if key not in table:
        raise ValueError(f"unknown sub-space {name!r}; choose from {sorted(table)}")
    return table[key]


# --- sampling rules --------------------------------------------------------


@dataclass(frozen=True)
class DepthQuantile:
    """Pin total depth to the quantile-q target; everything else uniform."""

    q: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"quantile must lie in [0, 1], got {self.q}")

    @property
    def label(self) -> str:
        return f"quantile-{self.q:g}"


@dataclass(frozen=True)
class UniformRandom:
    """Every coordinate uniform on its grid."""

    @property
    def label(self) -> str:
        return "uniform"


Rule = Union[DepthQuantile, UniformRandom]

DEFAULT_RULE_POOL: tuple[tuple[Rule, float], ...] = (
    (DepthQuantile(0.0), 1 / 8),
    (DepthQuantile(0.25), 1 / 8),
    (DepthQuantile(0.5), 1 / 8),
    (DepthQuantile(0.75), 1 / 8),
    (DepthQuantile(1.0), 1 / 8),
    (UniformRandom(), 3 / 8),
)


def _as_rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_rule(
    rng_or_seed: int | np.random.Generator,
    pool: Sequence[tuple[Rule, float]] = DEFAULT_RULE_POOL,
) -> Rule:
    """Draw one rule from the pool; probabilities must sum to 1."""
    if not pool:
        raise ValueError("rule pool is empty")
    probs = [p for _, p in pool]
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"rule probabilities must be >= 0 and sum to 1: {probs}")
    rng = _as_rng(rng_or_seed)
    u = rng.random()
    acc = 0.0
    for rule, p in pool:
        acc += p
        if u < acc:
            return rule
    return pool[-1][0]


def sample_with_rule(
    space: SubSpace, rule: Rule, rng_or_seed: int | np.random.Generator
) -> Architecture:
    """Draw an architecture under a fixed rule: depths, widths, then scale."""
    rng = _as_rng(rng_or_seed)
    if isinstance(rule, DepthQuantile):
        combos = _combos_by_total(space.depth)[_nearest_total(space, rule.q)]
        depths = combos[int(rng.integers(len(combos)))]
    else:
        depths = tuple(
            g.values()[int(rng.integers(g.size))] for g in space.depth
        )
    widths = tuple(g.values()[int(rng.integers(g.size))] for g in space.width)
    scale = space.scale.values()[int(rng.integers(space.scale.size))]
    return Architecture(depths, widths, scale)  # type: ignore[arg-type]


def sample(
    space: SubSpace,
    rng_or_seed: int | np.random.Generator,
    pool: Sequence[tuple[Rule, float]] = DEFAULT_RULE_POOL,
) -> Architecture:
    """Draw rule then architecture; deterministic for a given seed and pool."""
    rng = _as_rng(rng_or_seed)
    return sample_with_rule(space, sample_rule(rng, pool), rng)


# --- progressive-shrinking schedule ----------------------------------------


@dataclass(frozen=True)
class Phase:
    """One training phase: a sub-space, its epoch count, warmup on/off."""

    space: SubSpace
    epochs: int
    warmup: bool = False


@dataclass(frozen=True)
class ABPSchedule:
    phases: tuple[Phase, ...]

    @property
    def total_epochs(self) -> int:
        return sum(p.epochs for p in self.phases)


def abps_schedule(phases: Sequence[Phase]) -> ABPSchedule:
    """Validate and freeze a shrinking schedule.

    Anchors must strictly shrink in total depth from phase to phase, and every
    phase needs at least one epoch (warmup, when set, is the phase's first).
    """
    if not phases:
        raise InvalidPhase("a schedule needs at least one phase")
    for ph in phases:
        if ph.epochs < 1:
            raise InvalidPhase(f"phase on {ph.space.name} has epochs {ph.epochs}")
    anchors = [ph.space.anchor.total_depth for ph in phases]
    for a, b in zip(anchors, anchors[1:]):
        if b >= a:
            raise InvalidPhase(
                f"anchor total depth must strictly shrink, got {anchors}"
            )
    return ABPSchedule(tuple(phases))


def default_schedule() -> ABPSchedule:
    """24 epochs on the largest anchor, then 13 + 13 on the shrunk ones."""
    return abps_schedule(
        [Phase(AR101, 24, False), Phase(AR77, 13, True), Phase(AR50, 13, True)]
    )


def epoch_subspace(schedule: ABPSchedule, epoch: int) -> tuple[SubSpace, bool]:
    """Map a 0-indexed global epoch to (active sub-space, warmup epoch?)."""
    if epoch < 0 or epoch >= schedule.total_epochs:
        raise EpochOutOfRange(
            f"epoch {epoch} outside 0..{schedule.total_epochs - 1}"
        )
    start = 0
    for ph in schedule.phases:
        if epoch < start + ph.epochs:
            return ph.space, ph.warmup and epoch == start
        start += ph.epochs
    raise AssertionError("unreachable")
