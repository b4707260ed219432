"""Analytic compute cost for elastic detection backbones.

Counting convention: one multiply-accumulate is one FLOP (FLOPS_PER_MAC; a
2x convention is a pure scalar on every output).  Spatial sizes use ceiling
division: the stem halves the input, stage s runs at scale / (4 * 2^s), and
every convolution in a stage is billed at the stage resolution.  Bottleneck
blocks cost reduce (1x1) + spatial (3x3) + expand (1x1), and each stage's
first block adds a 1x1 projection for the channel/stride change.

The detector head on top is a pyramid-and-proposal stack: lateral 1x1 convs
from the four stage outputs, 3x3 output convs on every pyramid level, a
shared 3x3 + objectness/box 1x1 proposal head per level, and a two-FC
region head over a fixed proposal budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .archspace import Architecture
from .errors import BandOverlap, DegenerateFit, EmptyInput

FLOPS_PER_MAC = 1.0


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def conv_flops(k: int, cin: int, cout: int, hout: int, wout: int) -> int:
    """MACs of a k x k convolution producing an hout x wout x cout map."""
    return k * k * cin * cout * hout * wout


@dataclass(frozen=True)
class BackboneCost:
    """Exact MAC counts: stem, the four stages, and their sum."""

    stem: int
    stages: tuple[int, int, int, int]
    total: int

    def gflops(self, flops_per_mac: float = FLOPS_PER_MAC) -> float:
        return self.total * flops_per_mac / 1e9


def backbone_flops(arch: Architecture) -> BackboneCost:
    """Per-stage MAC breakdown of the elastic bottleneck backbone."""
    stem_w = arch.widths[0]
    half = _ceil_div(arch.scale, 2)
    stem = conv_flops(7, 3, stem_w, half, half)
    stages = []
    cin = stem_w
    for s in range(4):
        r = _ceil_div(arch.scale, 4 << s)
        w = arch.widths[1 + s]
        cost = 0
        for b in range(arch.depths[s]):
            c_in = cin if b == 0 else 4 * w
            cost += conv_flops(1, c_in, w, r, r)
            cost += conv_flops(3, w, w, r, r)
            cost += conv_flops(1, w, 4 * w, r, r)
            if b == 0:
                cost += conv_flops(1, c_in, 4 * w, r, r)
        stages.append(cost)
        cin = 4 * w
    return BackboneCost(stem, tuple(stages), stem + sum(stages))


@dataclass(frozen=True)
class HeadConfig:
    """Detector-head hyper-parameters; defaults match the common recipe."""

    fpn_channels: int = 256
    levels: int = 5
    anchors_per_loc: int = 3
    rois: int = 1000
    pooled: int = 7
    fc_dims: tuple[int, int] = (1024, 1024)
    classes: int = 80

    def __post_init__(self) -> None:
        fields = (self.fpn_channels, self.levels, self.anchors_per_loc,
                  self.rois, self.pooled, self.classes, *self.fc_dims)
        if any(v < 1 for v in fields):
            raise ValueError("head config fields must be positive")
        if self.levels < 4:
            raise ValueError("pyramid needs at least the four stage levels")


DEFAULT_HEAD = HeadConfig()


@dataclass(frozen=True)
class CostBreakdown:
    """Detector cost in GFLOPs; total is the exact sum of the parts."""

    backbone: float
    fpn: float
    rpn: float
    roi_head: float
    total: float


def detector_flops(
    arch: Architecture,
    head: HeadConfig = DEFAULT_HEAD,
    flops_per_mac: float = FLOPS_PER_MAC,
) -> CostBreakdown:
    """Backbone + pyramid + proposal + region-head cost in GFLOPs."""
    bb = backbone_flops(arch).total
    res = [_ceil_div(arch.scale, 4 << lv) for lv in range(head.levels)]
    c = head.fpn_channels

    fpn = 0
    for s in range(4):
        fpn += conv_flops(1, 4 * arch.widths[1 + s], c, res[s], res[s])
    for lv in range(head.levels):
        fpn += conv_flops(3, c, c, res[lv], res[lv])

    rpn = 0
    a = head.anchors_per_loc
    for lv in range(head.levels):
        rpn += conv_flops(3, c, c, res[lv], res[lv])
        rpn += conv_flops(1, c, a, res[lv], res[lv])
        rpn += conv_flops(1, c, 4 * a, res[lv], res[lv])

    f1, f2 = head.fc_dims
    per_roi = head.pooled * head.pooled * c * f1 + f1 * f2
    per_roi += f2 * (head.classes + 1) + f2 * 4 * head.classes
    roi = head.rois * per_roi

    scale = flops_per_mac / 1e9
    parts = (bb * scale, fpn * scale, rpn * scale, roi * scale)
    return CostBreakdown(*parts, total=sum(parts))


def total_gflops(arch: Architecture, head: HeadConfig = DEFAULT_HEAD) -> float:
    return detector_flops(arch, head).total


# --- FLOPs bands ------------------------------------------------------------


@dataclass(frozen=True)
class Band:
    """Half-open GFLOPs interval [lo, hi) with a display label."""

    label: str
    lo: float
    hi: float

    def __contains__(self, gflops: float) -> bool:
        return self.lo <= gflops < self.hi


DEFAULT_BANDS: tuple[Band, ...] = tuple(
    Band(f"{lo}-{hi}B", float(lo), float(hi))
    for lo, hi in (
        (30, 45), (45, 60), (60, 75), (75, 90), (90, 105),
        (105, 120), (120, 135), (135, 150), (150, 180), (180, 210),
    )
)


def validate_bands(bands: Sequence[Band]) -> tuple[Band, ...]:
    """Sort by lower edge and reject empty or overlapping intervals."""
    ordered = tuple(sorted(bands, key=lambda b: (b.lo, b.hi)))
    for b in ordered:
        if not b.lo < b.hi:
            raise BandOverlap(f"band {b.label} is empty: [{b.lo}, {b.hi})")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.lo < prev.hi:
            raise BandOverlap(f"bands {prev.label} and {cur.label} overlap")
    return ordered


def flops_band(gflops: float, bands: Sequence[Band] = DEFAULT_BANDS) -> str | None:
    """Label of the band containing gflops, or None when uncovered."""
    for b in validate_bands(bands):
        if gflops in b:
            return b.label
    return None


def band_by_label(label: str, bands: Sequence[Band] = DEFAULT_BANDS) -> Band:
    for b in bands:
        if b.label == label:
            return b
    raise ValueError(f"no band labeled {label!r}")


def parse_bands(lines: Sequence[str]) -> tuple[Band, ...]:
    """Read 'label lo hi' rows, ignoring blanks and # comments."""
    bands = []
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"expected 'label lo hi', got {raw!r}")
        bands.append(Band(parts[0], float(parts[1]), float(parts[2])))
    if not bands:
        raise EmptyInput("band file defines no bands")
    return validate_bands(bands)


# --- latency model ----------------------------------------------------------


@dataclass(frozen=True)
class LatencyModel:
    """Affine fit over (1, GFLOPs, scale^2, total depth)."""

    coef: tuple[float, float, float, float]
    residual_std: float
    residual_max: float
    n_samples: int


def latency_features(arch: Architecture, head: HeadConfig = DEFAULT_HEAD) -> np.ndarray:
    return np.array(
        [1.0, total_gflops(arch, head), float(arch.scale) ** 2, float(arch.total_depth)]
    )


def latency_fit(
    samples: Sequence[tuple[Architecture, float]],
    head: HeadConfig = DEFAULT_HEAD,
) -> LatencyModel:
    """Least-squares latency fit; raises DegenerateFit below full rank."""
    if len(samples) < 4:
        raise DegenerateFit(f"need >= 4 samples to fit 4 coefficients, got {len(samples)}")
    x = np.stack([latency_features(a, head) for a, _ in samples])
    y = np.array([ms for _, ms in samples], dtype=float)
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < 4:
        raise DegenerateFit(f"design matrix rank {rank} < 4; vary the samples")
    resid = y - x @ coef
    return LatencyModel(
        coef=tuple(float(c) for c in coef),
        residual_std=float(np.sqrt(np.mean(resid**2))),
        residual_max=float(np.max(np.abs(resid))),
        n_samples=len(samples),
    )


def latency_estimate(
    model: LatencyModel, arch: Architecture, head: HeadConfig = DEFAULT_HEAD
) -> float:
    return float(latency_features(arch, head) @ np.asarray(model.coef))
