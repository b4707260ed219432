"""Unified label spaces across datasets via word-embedding similarity.

Merging starts from the largest label space and folds the rest in descending
size.  A source category joins an existing unified category when their
embedding cosine exceeds a strict threshold (default 0.8); otherwise it is
appended as novel.  Every decision lands in a mapping report so a human can
accept, reject, or redirect it.  Surgery plans map a downstream label set
onto unified classifier rows: Exact above the threshold, Nearest (with the
realized similarity) below it.

Two categories of one dataset never share a unified index: the later one
falls back to its next-best candidate above the threshold, or to a novel
append, and the event is flagged as a collision in the report.

All values are immutable after construction and all operations are pure, so
everything here is safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateDataset,
    EmptyInput,
    MissingToken,
    UnknownCategoryInOverride,
    ZeroVector,
)

DEFAULT_THRESHOLD = 0.8


def _unit(vec: np.ndarray, what: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroVector(f"{what} has zero norm")
    out = vec / norm
    out.flags.writeable = False
    return out


class EmbeddingTable:
    """token -> unit-norm vector, all of one dimension.

    An optional fallback vector stands in for unknown tokens; without one,
    lookups of unknown tokens are an error.
    """

    def __init__(
        self,
        vectors: Mapping[str, Sequence[float]],
        fallback: Sequence[float] | None = None,
    ) -> None:
        if not vectors:
            raise EmptyInput("embedding table has no vectors")
        self._vectors: dict[str, np.ndarray] = {}
        dim = None
        for token, raw in vectors.items():
            v = np.asarray(raw, dtype=np.float64)
            if v.ndim != 1:
                raise DimensionMismatch(f"vector for {token!r} is not 1-D")
            if dim is None:
                dim = v.shape[0]
            elif v.shape[0] != dim:
                raise DimensionMismatch(
                    f"vector for {token!r} has dim {v.shape[0]}, expected {dim}"
                )
            self._vectors[token] = _unit(v, f"vector for {token!r}")
        assert dim is not None
        self.dim: int = int(dim)
        self.fallback: np.ndarray | None = None
        if fallback is not None:
            fb = np.asarray(fallback, dtype=np.float64)
            if fb.shape != (self.dim,):
                raise DimensionMismatch("fallback dimension differs from table")
            self.fallback = _unit(fb, "fallback vector")

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, token: str) -> np.ndarray | None:
        v = self._vectors.get(token)
        if v is None:
            return self.fallback
        return v

    @classmethod
    def from_lines(
        cls, lines: Iterable[str], fallback: Sequence[float] | None = None
    ) -> "EmbeddingTable":
        """Parse word2vec text format; an optional '<count> <dim>' header."""
        vectors: dict[str, list[float]] = {}
        header: tuple[int, int] | None = None
        for i, raw in enumerate(lines):
            parts = raw.split()
            if not parts:
                continue
            if i == 0 and len(parts) == 2:
                try:
                    header = (int(parts[0]), int(parts[1]))
                    continue
                except ValueError:
                    pass
            token = parts[0]
            if token in vectors:
                raise ValueError(f"duplicate embedding for token {token!r}")
            try:
                vectors[token] = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise ValueError(f"bad embedding line {i + 1}: {raw!r}") from exc
        if header is not None:
            count, dim = header
            if count != len(vectors):
                raise ValueError(
                    f"header promises {count} vectors, file has {len(vectors)}"
                )
            if vectors and any(len(v) != dim for v in vectors.values()):
                raise DimensionMismatch(f"header dim {dim} does not match records")
        return cls(vectors, fallback=fallback)


def embed_category(name: str, table: EmbeddingTable) -> np.ndarray:
    """Unit vector for a category: renormalized mean of its token vectors."""
    tokens = name.lower().split()
    if not tokens:
        raise MissingToken(f"category name {name!r} has no tokens")
    acc = np.zeros(table.dim)
    for tok in tokens:
        v = table.get(tok)
        if v is None:
            raise MissingToken(f"token {tok!r} of category {name!r} is unknown")
        acc += v
    return _unit(acc / len(tokens), f"embedding of {name!r}")


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"shapes {u.shape} and {v.shape} differ")
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class LabelSpace:
    dataset_id: str
    categories: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", tuple(self.categories))
        if not self.dataset_id:
            raise ValueError("dataset_id must be non-empty")
        if not self.categories:
            raise EmptyInput(f"label space {self.dataset_id!r} has no categories")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"duplicate categories in {self.dataset_id!r}")


@dataclass(frozen=True)
class UnifiedLabelSpace:
    """Ordered unified categories plus (dataset, source) -> index provenance."""

    categories: tuple[str, ...]
    provenance: Mapping[tuple[str, str], int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "provenance", dict(self.provenance))

    def __len__(self) -> int:
        return len(self.categories)

    @property
    def datasets(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for ds, _ in self.provenance:
            seen.setdefault(ds, None)
        return tuple(seen)

    def index_of(self, category: str) -> int:
        try:
            return self.categories.index(category)
        except ValueError:
            raise UnknownCategoryInOverride(
                f"{category!r} is not a unified category"
            ) from None


@dataclass(frozen=True)
class Match:
    dataset: str
    source: str
    unified: str
    unified_index: int
    similarity: float


@dataclass(frozen=True)
class Novel:
    dataset: str
    source: str
    unified_index: int


@dataclass(frozen=True)
class Ambiguity:
    """A source category with >= 2 above-threshold candidates."""

    dataset: str
    source: str
    candidates: tuple[tuple[str, float], ...]  # (unified name, sim), sim desc


@dataclass(frozen=True)
class Collision:
    """Same-dataset argmax landed on an index already taken by a sibling."""

    dataset: str
    source: str
    blocked: str
    resolution: str  # unified name actually used, or "novel:<name>"


@dataclass(frozen=True)
class MappingReport:
    matches: tuple[Match, ...] = ()
    novel: tuple[Novel, ...] = ()
    ambiguous: tuple[Ambiguity, ...] = ()
    collisions: tuple[Collision, ...] = ()


@dataclass(frozen=True)
class HeadExtension:
    """What a merge did to the classifier head: kept prefix, appended names."""

    prefix_length: int
    appended: tuple[str, ...]


@dataclass(frozen=True)
class Exact:
    index: int


@dataclass(frozen=True)
class Nearest:
    index: int
    similarity: float


Decision = Union[Exact, Nearest]


@dataclass(frozen=True)
class SurgeryEntry:
    category: str
    decision: Decision


@dataclass(frozen=True)
class HeadSurgeryPlan:
    entries: tuple[SurgeryEntry, ...]

    def indices(self) -> tuple[int, ...]:
        return tuple(e.decision.index for e in self.entries)


class _Builder:
    """Mutable merge state; frozen into public values when done."""

    def __init__(self, categories: Sequence[str], provenance: Mapping, table: EmbeddingTable):
        self.categories = list(categories)
        self.provenance = dict(provenance)
        self.table = table
        self.vectors = [embed_category(c, table) for c in self.categories]
        self.matches: list[Match] = []
        self.novel: list[Novel] = []
        self.ambiguous: list[Ambiguity] = []
        self.collisions: list[Collision] = []

    def merge_space(self, space: LabelSpace, threshold: float) -> list[str]:
        """Fold one dataset in against the current snapshot; returns appends."""
        snapshot = len(self.categories)
        snap_vecs = np.stack(self.vectors) if snapshot else None
        used: set[int] = set()
        appended: list[str] = []
        for cat in space.categories:
            vec = embed_category(cat, self.table)
            sims = snap_vecs @ vec if snapshot else np.zeros(0)
            above = sorted(
                ((float(s), i) for i, s in enumerate(sims) if s > threshold),
                key=lambda t: (-t[0], t[1]),
            )
            if len(above) >= 2:
                self.ambiguous.append(
                    Ambiguity(
                        space.dataset_id,
                        cat,
                        tuple((self.categories[i], s) for s, i in above),
                    )
                )
            choice = next(((s, i) for s, i in above if i not in used), None)
            if above and choice != above[0]:
                blocked = self.categories[above[0][1]]
                resolution = (
                    self.categories[choice[1]] if choice else f"novel:{cat}"
                )
                self.collisions.append(
                    Collision(space.dataset_id, cat, blocked, resolution)
                )
            if choice is not None:
                sim, idx = choice
                used.add(idx)
                self.provenance[(space.dataset_id, cat)] = idx
                self.matches.append(
                    Match(space.dataset_id, cat, self.categories[idx], idx, sim)
                )
            else:
                idx = len(self.categories)
                self.categories.append(cat)
                self.vectors.append(vec)
                used.add(idx)
                self.provenance[(space.dataset_id, cat)] = idx
                self.novel.append(Novel(space.dataset_id, cat, idx))
                appended.append(cat)
        return appended

    def unified(self) -> UnifiedLabelSpace:
        return UnifiedLabelSpace(tuple(self.categories), dict(self.provenance))

    def report(self) -> MappingReport:
        return MappingReport(
            tuple(self.matches),
            tuple(self.novel),
            tuple(self.ambiguous),
            tuple(self.collisions),
        )


def build_unified(
    spaces: Sequence[LabelSpace],
    table: EmbeddingTable,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[UnifiedLabelSpace, MappingReport]:
    """Initialize from the largest space, then merge the rest by size."""
    if not spaces:
        raise EmptyInput("need at least one label space")
    ids = [s.dataset_id for s in spaces]
    if len(set(ids)) != len(ids):
        raise DuplicateDataset(f"dataset ids repeat: {sorted(ids)}")
    ordered = sorted(spaces, key=lambda s: (-len(s.categories), s.dataset_id))
    first = ordered[0]
    builder = _Builder(
        first.categories,
        {(first.dataset_id, c): i for i, c in enumerate(first.categories)},
        table,
    )
    for space in ordered[1:]:
        builder.merge_space(space, threshold)
    return builder.unified(), builder.report()


def merge_new_dataset(
    unified: UnifiedLabelSpace,
    space: LabelSpace,
    table: EmbeddingTable,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[UnifiedLabelSpace, HeadExtension, MappingReport]:
    """Fold one unseen dataset into an existing unified space."""
    if space.dataset_id in unified.datasets:
        raise DuplicateDataset(f"dataset {space.dataset_id!r} already merged")
    builder = _Builder(unified.categories, unified.provenance, table)
    appended = builder.merge_space(space, threshold)
    ext = HeadExtension(prefix_length=len(unified.categories), appended=tuple(appended))
    return builder.unified(), ext, builder.report()


def head_surgery_plan(
    unified: UnifiedLabelSpace,
    target: LabelSpace,
    table: EmbeddingTable,
    threshold: float = DEFAULT_THRESHOLD,
) -> HeadSurgeryPlan:
    """Map target categories onto unified head rows.

    Above the threshold the row is taken as-is (Exact); below it the nearest
    row is borrowed and the realized similarity recorded.  Ties go to the
    lowest unified index.
    """
    if not unified.categories:
        raise EmptyInput("unified space is empty")
    uvecs = np.stack([embed_category(c, table) for c in unified.categories])
    entries = []
    for cat in target.categories:
        sims = uvecs @ embed_category(cat, table)
        best = int(np.argmax(sims))  # argmax returns the lowest index on ties
        sim = float(sims[best])
        decision: Decision = Exact(best) if sim > threshold else Nearest(best, sim)
        entries.append(SurgeryEntry(cat, decision))
    return HeadSurgeryPlan(tuple(entries))


# --- override workflow -------------------------------------------------------


@dataclass(frozen=True)
class Override:
    action: str  # accept | reject | redirect
    dataset: str
    category: str
    target: str | None = None


def parse_overrides(lines: Iterable[str]) -> tuple[Override, ...]:
    """Parse 'accept|reject|redirect <dataset>:<category> [-> <target>]'."""
    out = []
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, target = line.partition("->")
        parts = head.split(None, 1)
        if len(parts) != 2 or ":" not in parts[1]:
            raise ValueError(f"bad override on line {i + 1}: {raw!r}")
        action = parts[0].lower()
        if action not in ("accept", "reject", "redirect"):
            raise ValueError(f"unknown override action {action!r} on line {i + 1}")
        dataset, _, category = parts[1].strip().partition(":")
        target_name = target.strip() or None
        if action == "redirect" and target_name is None:
            raise ValueError(f"redirect needs a '-> target' on line {i + 1}")
        out.append(Override(action, dataset.strip(), category.strip(), target_name))
    return tuple(out)


def _shift_after_removal(index: int, removed: int) -> int:
    return index - 1 if index > removed else index


def apply_overrides(
    unified: UnifiedLabelSpace,
    report: MappingReport,
    overrides: Sequence[Override],
    table: EmbeddingTable,
) -> tuple[UnifiedLabelSpace, MappingReport]:
    """Apply human decisions to a mapping in file order.

    accept keeps a decision as-is; reject turns a match into a novel append;
    redirect points a source category at a named unified category (the
    realized similarity is recomputed for the report).  A redirected novel
    category whose appended row is left unreferenced is removed again.
    """
    categories = list(unified.categories)
    provenance = dict(unified.provenance)
    matches = {(m.dataset, m.source): m for m in report.matches}
    novel = {(n.dataset, n.source): n for n in report.novel}

    def locate(ov: Override) -> str:
        key = (ov.dataset, ov.category)
        if key in matches:
            return "match"
        if key in novel:
            return "novel"
        raise UnknownCategoryInOverride(
            f"{ov.dataset}:{ov.category} does not appear in the report"
        )

    for ov in overrides:
        kind = locate(ov)
        key = (ov.dataset, ov.category)
        if ov.action == "accept":
            continue
        if ov.action == "reject":
            if kind == "novel":
                continue
            if ov.category in categories:
                raise ValueError(
                    f"rejecting {ov.dataset}:{ov.category} would duplicate a name"
                )
            del matches[key]
            idx = len(categories)
            categories.append(ov.category)
            provenance[key] = idx
            novel[key] = Novel(ov.dataset, ov.category, idx)
            continue
        # redirect
        assert ov.target is not None
        if ov.target not in categories:
            raise UnknownCategoryInOverride(
                f"redirect target {ov.target!r} is not a unified category"
            )
        new_idx = categories.index(ov.target)
        sim = cosine_similarity(
            embed_category(ov.category, table), embed_category(ov.target, table)
        )
        if kind == "match":
            old = matches[key]
            matches[key] = replace(
                old, unified=ov.target, unified_index=new_idx, similarity=sim
            )
            provenance[key] = new_idx
        else:
            removed = novel.pop(key).unified_index
            provenance[key] = new_idx
            if removed not in provenance.values():
                del categories[removed]
                provenance = {
                    k: _shift_after_removal(v, removed) for k, v in provenance.items()
                }
                matches = {
                    k: replace(
                        m, unified_index=_shift_after_removal(m.unified_index, removed)
                    )
                    for k, m in matches.items()
                }
                novel = {
                    k: replace(
                        n, unified_index=_shift_after_removal(n.unified_index, removed)
                    )
                    for k, n in novel.items()
                }
                matches = {
                    k: replace(m, unified=categories[m.unified_index])
                    for k, m in matches.items()
                }
            matches[key] = Match(ov.dataset, ov.category, ov.target, provenance[key], sim)

    revised = MappingReport(
        tuple(matches.values()),
        tuple(novel.values()),
        report.ambiguous,
        report.collisions,
    )
    return UnifiedLabelSpace(tuple(categories), provenance), revised


# --- line-delimited serialization --------------------------------------------


def unified_to_lines(unified: UnifiedLabelSpace) -> list[str]:
    """Tab-separated category and provenance rows, stable order."""
    lines = [f"C\t{i}\t{c}" for i, c in enumerate(unified.categories)]
    for (ds, src), idx in sorted(unified.provenance.items()):
        lines.append(f"P\t{ds}\t{src}\t{idx}")
    return lines


def unified_from_lines(lines: Iterable[str]) -> UnifiedLabelSpace:
    categories: dict[int, str] = {}
    provenance: dict[tuple[str, str], int] = {}
    for i, raw in enumerate(lines):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if parts[0] == "C" and len(parts) == 3:
            categories[int(parts[1])] = parts[2]
        elif parts[0] == "P" and len(parts) == 4:
            provenance[(parts[1], parts[2])] = int(parts[3])
        else:
            raise ValueError(f"bad unified-space line {i + 1}: {raw!r}")
    if sorted(categories) != list(range(len(categories))):
        raise ValueError("unified-space category indices are not 0..n-1")
    return UnifiedLabelSpace(
        tuple(categories[i] for i in range(len(categories))), provenance
    )


def report_to_lines(report: MappingReport) -> list[str]:
    lines = []
    for m in report.matches:
        lines.append(
            f"match\t{m.dataset}\t{m.source}\t{m.unified}\t{m.unified_index}\t{m.similarity:.6f}"
        )
    for n in report.novel:
        lines.append(f"novel\t{n.dataset}\t{n.source}\t{n.unified_index}")
    for a in report.ambiguous:
        cands = ",".join(f"{name}:{sim:.6f}" for name, sim in a.candidates)
        lines.append(f"ambiguous\t{a.dataset}\t{a.source}\t{cands}")
    for c in report.collisions:
        lines.append(f"collision\t{c.dataset}\t{c.source}\t{c.blocked}\t{c.resolution}")
    return lines


def surgery_to_lines(plan: HeadSurgeryPlan) -> list[str]:
    lines = []
    for e in plan.entries:
        if isinstance(e.decision, Exact):
            lines.append(f"{e.category}\texact\t{e.decision.index}")
        else:
            lines.append(
                f"{e.category}\tnearest\t{e.decision.index}\t{e.decision.similarity:.6f}"
            )
    return lines


def label_space_from_lines(lines: Iterable[str], default_id: str) -> LabelSpace:
    """One category per line; optional '#dataset: <id>' header; # comments."""
    dataset = default_id
    categories = []
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if i == 0 and body.lower().startswith("dataset:"):
                dataset = body.split(":", 1)[1].strip()
            continue
        categories.append(line)
    return LabelSpace(dataset, tuple(categories))
