"""Task-specific data selection: per-(image, category) represent vectors and retrieval."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Iterable, Mapping

import numpy as np

from .errors import BadRecord, DimensionMismatch, EmptySource, NoSharedCategory
from .labelspace import cosine_similarity

MAGIC = b"GAIAFEAT"
FORMAT_VERSION = 1
DEFAULT_BUDGET = 1000


@dataclass(frozen=True)
class InstanceFeature:
    """One detected instance: its image, source dataset, unified category, feature."""

    image_id: str
    dataset_id: str
    category_id: int
    vector: tuple[float, ...]


def _read_str(raw: bytes, off: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<H", raw, off)
    off += 2
    if off + n > len(raw):
        raise struct.error("string runs past end of buffer")
    return raw[off:off + n].decode("utf-8"), off + n


def _parse_binary(raw: bytes) -> list[InstanceFeature]:
    off = len(MAGIC)
    try:
        version, dim = struct.unpack_from("<II", raw, off)
        (count,) = struct.unpack_from("<Q", raw, off + 8)
    except struct.error:
        raise BadRecord("truncated feature file header") from None
    if version != FORMAT_VERSION:
        raise BadRecord(f"unsupported feature file version {version}")
    off += 16
    features = []
    for i in range(count):
        try:
            image_id, off = _read_str(raw, off)
            dataset_id, off = _read_str(raw, off)
            (category,) = struct.unpack_from("<I", raw, off)
            vec = struct.unpack_from(f"<{dim}f", raw, off + 4)
            off += 4 + 4 * dim
        except (struct.error, UnicodeDecodeError) as exc:
            raise BadRecord(f"record {i}: {exc}") from None
        if not all(math.isfinite(v) for v in vec):
            raise BadRecord(f"record {i}: non-finite value")
        features.append(InstanceFeature(
            image_id, dataset_id, int(category), tuple(float(v) for v in vec)))
    if off != len(raw):
        raise BadRecord(f"{len(raw) - off} trailing bytes after {count} records")
    return features


def _parse_csv(text: str) -> list[InstanceFeature]:
    features: list[InstanceFeature] = []
    dim: int | None = None
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row:
            continue
        if lineno == 1 and row[:3] == ["image", "dataset", "category"]:
            continue
        if len(row) < 4:
            raise BadRecord(f"line {lineno}: expected image,dataset,category,v1,...")
        try:
            category = int(row[2])
            vec = tuple(float(v) for v in row[3:])
        except ValueError:
            raise BadRecord(f"line {lineno}: {row!r}") from None
        if category < 0:
            raise BadRecord(f"line {lineno}: negative category id")
        if not all(math.isfinite(v) for v in vec):
            raise BadRecord(f"line {lineno}: non-finite value")
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise DimensionMismatch(
                f"line {lineno}: {len(vec)} dims among {dim}-dim records")
        features.append(InstanceFeature(row[0], row[1], category, vec))
    return features


def load_features(path: str | Path) -> list[InstanceFeature]:
    """Parse a feature file, binary or CSV.

    Binary layout, little-endian: magic "GAIAFEAT", version u32, dimension u32,
    record count u64, then per record two length-prefixed (u16) UTF-8 strings
    (image id, dataset id), category id u32, and the vector as 32-bit floats.
    Anything not starting with the magic is treated as the CSV fallback
    "image,dataset,category,v1,...,vd" (header line optional).
    """
    raw = Path(path).read_bytes()
    if raw.startswith(MAGIC):
        return _parse_binary(raw)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise BadRecord("not a feature file: bad magic and not UTF-8") from None
    return _parse_csv(text)


def write_features(features: Iterable[InstanceFeature], path: str | Path) -> None:
    """Write the binary feature format. Vectors are stored as 32-bit floats."""
    features = list(features)
    dims = {len(f.vector) for f in features}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed vector dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    out = bytearray(MAGIC)
    out += struct.pack("<IIQ", FORMAT_VERSION, dim, len(features))
    for f in features:
        for s in (f.image_id, f.dataset_id):
            b = s.encode("utf-8")
            out += struct.pack("<H", len(b)) + b
        out += struct.pack("<I", f.category_id)
        out += struct.pack(f"<{dim}f", *f.vector)
    Path(path).write_bytes(bytes(out))


@dataclass(frozen=True, eq=False)
class RepresentMap:
    """V(image, category): the mean of that image's instance vectors per category.

    `vectors` preserves first-appearance order of (image id, category id) keys;
    `images` lists distinct image ids in first-appearance order.
    """

    vectors: Mapping[tuple[str, int], np.ndarray]
    images: tuple[str, ...]

    @property
    def categories(self) -> frozenset[int]:
        return frozenset(c for _, c in self.vectors)


def represent_vectors(features: Iterable[InstanceFeature]) -> RepresentMap:
    sums: dict[tuple[str, int], np.ndarray] = {}
    counts: dict[tuple[str, int], int] = {}
    images: list[str] = []
    seen_images: set[str] = set()
    dim: int | None = None
    for f in features:
        if dim is None:
            dim = len(f.vector)
        elif len(f.vector) != dim:
            raise DimensionMismatch(
                f"{f.image_id}: {len(f.vector)} dims among {dim}-dim features")
        key = (f.image_id, f.category_id)
        vec = np.asarray(f.vector, dtype=float)
        if key in sums:
            sums[key] = sums[key] + vec
            counts[key] += 1
        else:
            sums[key] = vec
            counts[key] = 1
        if f.image_id not in seen_images:
            seen_images.add(f.image_id)
            images.append(f.image_id)
    vectors = {key: sums[key] / counts[key] for key in sums}
    return RepresentMap(vectors, tuple(images))


@dataclass(frozen=True)
class TopK:
    """Per-unit top-k retrieval, cycled round-robin over units.

    A unit is a (target image, category) pair, or a whole target image when
    per_image is set (a source image then ranks by its best category match).
    k defaults to ceil(budget / number of units).
    """

    k: int | None = None
    per_image: bool = False
    label: ClassVar[str] = "top-k"

    def __post_init__(self) -> None:
        if self.k is not None and self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class MostSimilar:
    """Sweep all same-category (source, target) pairs by similarity descending."""

    label: ClassVar[str] = "most-similar"


@dataclass(frozen=True)
class Random:
    """Uniform draw without replacement from the source image ids."""

    label: ClassVar[str] = "random"


Strategy = TopK | MostSimilar | Random


@dataclass(frozen=True)
class SelectionEntry:
    """A selected source image with the match that admitted it (None for Random)."""

    image_id: str
    score: float | None
    target_image: str | None
    category: int | None


@dataclass(frozen=True)
class SelectionResult:
    entries: tuple[SelectionEntry, ...]
    strategy: str
    budget: int

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(e.image_id for e in self.entries)

    def to_lines(self) -> list[str]:
        lines = []
        for rank, e in enumerate(self.entries, start=1):
            score = "-" if e.score is None else f"{e.score:.6f}"
            target = "-" if e.target_image is None else e.target_image
            category = "-" if e.category is None else str(e.category)
            lines.append(f"{rank}\t{e.image_id}\t{score}\t{target}\t{category}")
        return lines


def _by_category(source: RepresentMap) -> dict[int, list[tuple[str, np.ndarray]]]:
    grouped: dict[int, list[tuple[str, np.ndarray]]] = {}
    for (img, cat), vec in source.vectors.items():
        grouped.setdefault(cat, []).append((img, vec))
    return grouped


def _select_most_similar(source: RepresentMap, target: RepresentMap,
                         shared: frozenset[int], budget: int) -> tuple[SelectionEntry, ...]:
    by_cat = _by_category(source)
    rows = []
    for (t_img, cat), t_vec in target.vectors.items():
        if cat not in shared:
            continue
        for s_img, s_vec in by_cat[cat]:
            rows.append((cosine_similarity(s_vec, t_vec), s_img, t_img, cat))
    rows.sort(key=lambda r: (-r[0], r[1], r[2], r[3]))
    picked: list[SelectionEntry] = []
    seen: set[str] = set()
    for sim, s_img, t_img, cat in rows:
        if s_img in seen:
            continue
        seen.add(s_img)
        picked.append(SelectionEntry(s_img, float(sim), t_img, cat))
        if len(picked) == budget:
            break
    return tuple(picked)


def _topk_units(source: RepresentMap, target: RepresentMap, shared: frozenset[int],
                per_image: bool) -> list[tuple[str, list[tuple[float, str, int]]]]:
    by_cat = _by_category(source)
    units: list[tuple[str, list[tuple[float, str, int]]]] = []
    for (t_img, cat), t_vec in target.vectors.items():
        if cat not in shared:
            continue
        entries = sorted(
            ((cosine_similarity(s_vec, t_vec), s_img, cat) for s_img, s_vec in by_cat[cat]),
            key=lambda e: (-e[0], e[1]))
        units.append((t_img, entries))
    if not per_image:
        return units
    merged: dict[str, list[tuple[float, str, int]]] = {}
    for t_img, entries in units:
        merged.setdefault(t_img, []).extend(entries)
    image_units = []
    for t_img, entries in merged.items():
        entries.sort(key=lambda e: (-e[0], e[1], e[2]))
        deduped, seen = [], set()
        for e in entries:
            if e[1] not in seen:
                seen.add(e[1])
                deduped.append(e)
        image_units.append((t_img, deduped))
    return image_units


def _select_topk(strategy: TopK, source: RepresentMap, target: RepresentMap,
                 shared: frozenset[int], budget: int) -> tuple[SelectionEntry, ...]:
    units = _topk_units(source, target, shared, strategy.per_image)
    k = strategy.k if strategy.k is not None else max(1, math.ceil(budget / len(units)))
    picked: list[SelectionEntry] = []
    seen: set[str] = set()
    for r in range(k):
        any_left = False
        for t_img, entries in units:
            if r >= len(entries):
                continue
            any_left = True
            sim, s_img, cat = entries[r]
            if s_img in seen:
                continue
            seen.add(s_img)
            picked.append(SelectionEntry(s_img, float(sim), t_img, cat))
            if len(picked) == budget:
                return tuple(picked)
        if not any_left:
            break
    return tuple(picked)


def _select_random(source: RepresentMap, budget: int, seed: int) -> tuple[SelectionEntry, ...]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(source.images))[:budget]
    return tuple(SelectionEntry(source.images[i], None, None, None) for i in order)


def select(strategy: Strategy, source: RepresentMap, target: RepresentMap,
           budget: int = DEFAULT_BUDGET, seed: int = 0) -> SelectionResult:
    """Pick up to `budget` distinct source images for the target data."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if not source.images:
        raise EmptySource("no source images to select from")
    if isinstance(strategy, Random):
        return SelectionResult(_select_random(source, budget, seed), strategy.label, budget)
    shared = source.categories & target.categories
    if not shared:
        raise NoSharedCategory(
            f"source categories {sorted(source.categories)} and target categories "
            f"{sorted(target.categories)} are disjoint")
    if isinstance(strategy, MostSimilar):
        entries = _select_most_similar(source, target, shared, budget)
    elif isinstance(strategy, TopK):
        entries = _select_topk(strategy, source, target, shared, budget)
    else:
        raise TypeError(f"unknown strategy {strategy!r}")
    return SelectionResult(entries, strategy.label, budget)
