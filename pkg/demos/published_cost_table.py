#!/usr/bin/env python3
"""Rebuild the reference cost table analytically and compare row by row.

Writes cost_table.csv under --outdir and prints the error column.
"""
from __future__ import annotations

import argparse
from pathlib import Path

from gaiakit.archspace import Architecture
from gaiakit.costmodel import detector_flops, flops_band

# (name, scale, depths, widths, published GFLOPs)
ROWS = [
    ("resnet50", 800, (3, 4, 6, 3), (64, 64, 128, 256, 512), 137.4),
    ("resnet101", 800, (3, 4, 23, 3), (64, 64, 128, 256, 512), 188.5),
    ("30-45B", 400, (4, 4, 8, 4), (48, 48, 96, 192, 384), 44.3),
    ("45-60B", 480, (4, 6, 8, 4), (48, 48, 96, 256, 384), 59.4),
    ("60-75B", 560, (4, 6, 15, 4), (48, 80, 96, 192, 512), 74.4),
    ("75-90B", 560, (4, 6, 21, 4), (64, 80, 96, 192, 512), 88.1),
    ("90-105B", 560, (4, 6, 21, 4), (64, 80, 160, 192, 512), 101.1),
    ("105-120B", 640, (4, 6, 21, 4), (64, 80, 160, 192, 512), 119.2),
    ("120-135B", 720, (3, 4, 23, 3), (64, 64, 128, 192, 640), 133.9),
    ("135-150B", 800, (4, 6, 23, 3), (48, 48, 96, 192, 640), 149.1),
    ("150-180B", 800, (3, 4, 23, 3), (64, 64, 96, 256, 512), 178.7),
    ("180-210B", 880, (3, 4, 25, 4), (48, 48, 96, 256, 384), 209.8),
]

parser = argparse.ArgumentParser()
parser.add_argument("--outdir", default="demo_out")
args = parser.parse_args()
outdir = Path(args.outdir)
outdir.mkdir(parents=True, exist_ok=True)

lines = ["name,scale,analytic_gflops,published_gflops,rel_err,band"]
print(f"{'name':10s} {'analytic':>9s} {'published':>9s} {'err':>7s}  band")
for name, scale, depths, widths, published in ROWS:
    arch = Architecture(depths, widths, scale)
    cost = detector_flops(arch)
    rel = (cost.total - published) / published
    band = flops_band(cost.total) or "uncovered"
    print(f"{name:10s} {cost.total:9.1f} {published:9.1f} {rel:+7.1%}  {band}")
    lines.append(f"{name},{scale},{cost.total:.3f},{published},{rel:.4f},{band}")

path = outdir / "cost_table.csv"
path.write_text("\n".join(lines) + "\n")
print(f"\nwrote {path}")

r50 = detector_flops(Architecture((3, 4, 6, 3), (64, 64, 128, 256, 512), 800))
print("\nresnet50@800 breakdown (GFLOPs)")
for part in ("backbone", "fpn", "rpn", "roi_head"):
    print(f"  {part:9s} {getattr(r50, part):7.1f}")
print(f"  {'total':9s} {r50.total:7.1f}")
