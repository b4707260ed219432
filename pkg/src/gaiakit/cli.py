"""Command-line front end.

One executable, one subcommand per pipeline stage.  Exit codes: 0 on success,
1 on a domain error (printed to stderr as "TypeName: message"), 2 on usage
errors.  Every subcommand takes --seed and is reproducible; artifacts land
under --out only.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .archspace import (
    Architecture,
    Phase,
    abps_schedule,
    builtin_subspaces,
    default_schedule,
    enumerate_space,
    parse_arch_key,
    sample,
    subspace_by_name,
    union_cardinality,
)
from .config import RunConfig, build_run_config
from .costmodel import (
    DEFAULT_BANDS,
    DEFAULT_HEAD,
    HeadConfig,
    detector_flops,
    flops_band,
    latency_fit,
    parse_bands,
    total_gflops,
)
from .errors import BadCSV, GaiaError
from .evaluator import (
    CachingEvaluator,
    EvalCache,
    ExternalEvaluator,
    Fidelity,
    SimulatedEvaluator,
)
from .labelspace import (
    EmbeddingTable,
    Exact,
    apply_overrides,
    build_unified,
    head_surgery_plan,
    label_space_from_lines,
    merge_new_dataset,
    parse_overrides,
    report_to_lines,
    surgery_to_lines,
    unified_from_lines,
    unified_to_lines,
)
from .report import points_to_csv_lines, read_csv_columns, render_plot
from .supernet import (
    Selector,
    ToyConfig,
    ToyPhase,
    ToyTask,
    TrainHyper,
    extract_subnet,
    gradient_check,
    init_supernet,
    load_checkpoint,
    save_checkpoint,
    train_abps,
)
from .tsas import Constraint, SearchConfig, kendall_tau, ranking_study, two_step_search
from .tsds import MostSimilar, Random, TopK, load_features, represent_vectors, select

PRESETS = ("ar50", "ar77", "ar101")


# --- shared plumbing ---------------------------------------------------------


def _read_lines(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _out_path(rc: RunConfig, name: str) -> Path:
    p = Path(name)
    if p.is_absolute() or ".." in p.parts:
        raise ValueError(f"output name {name!r} must stay inside --out")
    full = rc.out / p
    full.parent.mkdir(parents=True, exist_ok=True)
    return full


def _write_lines(path: Path, lines: Sequence[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _opt(value, rc: RunConfig, section: str, key: str, default, cast):
    """Flag value if given, else config-file value, else the default."""
    if value is not None:
        return value
    return rc.get(section, key, default, cast)


def _csv_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from None


def _range_of(text: str, cast) -> tuple:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError(f"expected lo:hi, got {text!r}")
    return cast(lo), cast(hi)


def _spaces_arg(text: str):
    if text == "union":
        return list(builtin_subspaces())
    return [subspace_by_name(name) for name in text.split(",")]


def _arch_from_args(args) -> Architecture:
    if args.arch:
        return parse_arch_key(args.arch)
    if args.scale is None or args.depths is None or args.widths is None:
        raise ValueError("give --arch or all of --scale/--depths/--widths")
    return Architecture(_csv_ints(args.depths), _csv_ints(args.widths), args.scale)


def _head_from_args(args) -> HeadConfig:
    if getattr(args, "classes", None) is None:
        return DEFAULT_HEAD
    return HeadConfig(classes=args.classes)


def _make_evaluator(spec: str, rc: RunConfig):
    """(evaluator, closer) for an `--evaluator sim|exec:<command>` value."""
    if spec == "sim":
        inner = SimulatedEvaluator(study_seed=rc.seed)
        closer: Callable[[], None] = lambda: None
    elif spec.startswith("exec:"):
        ext = ExternalEvaluator(spec[len("exec:"):])
        inner, closer = ext, ext.close
    else:
        raise ValueError(f"--evaluator must be sim or exec:<command>, got {spec!r}")
    if rc.cache is not None:
        return CachingEvaluator(inner, EvalCache(rc.cache)), closer
    return inner, closer


def _latency_samples(path: str | Path) -> list[tuple[Architecture, float]]:
    rows = [r for r in csv.reader(_read_lines(path)) if r]
    if not rows:
        raise BadCSV("empty CSV")
    header = rows[0]
    try:
        ai, mi = header.index("arch"), header.index("ms")
    except ValueError:
        raise BadCSV(f"need 'arch' and 'ms' columns, got {header}") from None
    samples = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) <= max(ai, mi):
            raise BadCSV(f"line {lineno}: too few fields")
        try:
            samples.append((parse_arch_key(row[ai]), float(row[mi])))
        except ValueError as exc:
            raise BadCSV(f"line {lineno}: {exc}") from None
    if not samples:
        raise BadCSV("no data rows")
    return samples


# --- labels ------------------------------------------------------------------


def _cmd_labels_unify(args, rc: RunConfig) -> int:
    table = EmbeddingTable.from_lines(_read_lines(args.embeddings))
    spaces = [
        label_space_from_lines(_read_lines(p), default_id=Path(p).stem)
        for p in args.space
    ]
    threshold = _opt(args.threshold, rc, "labels", "threshold", 0.8, float)
    unified, rep = build_unified(spaces, table, threshold)
    if args.overrides:
        ovs = parse_overrides(_read_lines(args.overrides))
        unified, rep = apply_overrides(unified, rep, ovs, table)
    _write_lines(_out_path(rc, args.name + ".tsv"), unified_to_lines(unified))
    _write_lines(_out_path(rc, args.name + "_report.tsv"), report_to_lines(rep))
    print(f"categories {len(unified)}")
    print(f"datasets {len(unified.datasets)}")
    return 0


def _cmd_labels_merge(args, rc: RunConfig) -> int:
    table = EmbeddingTable.from_lines(_read_lines(args.embeddings))
    unified = unified_from_lines(_read_lines(args.unified))
    space = label_space_from_lines(_read_lines(args.space), default_id=Path(args.space).stem)
    threshold = _opt(args.threshold, rc, "labels", "threshold", 0.8, float)
    merged, ext, rep = merge_new_dataset(unified, space, table, threshold)
    _write_lines(_out_path(rc, args.name + ".tsv"), unified_to_lines(merged))
    _write_lines(_out_path(rc, args.name + "_report.tsv"), report_to_lines(rep))
    print(f"categories {len(merged)}")
    print(f"reused_head_rows {ext.prefix_length}")
    print(f"appended {len(ext.appended)}")
    return 0


def _cmd_labels_surgery(args, rc: RunConfig) -> int:
    table = EmbeddingTable.from_lines(_read_lines(args.embeddings))
    unified = unified_from_lines(_read_lines(args.unified))
    target = label_space_from_lines(_read_lines(args.target), default_id=Path(args.target).stem)
    threshold = _opt(args.threshold, rc, "labels", "threshold", 0.8, float)
    plan = head_surgery_plan(unified, target, table, threshold)
    _write_lines(_out_path(rc, args.name + ".tsv"), surgery_to_lines(plan))
    exact = sum(isinstance(e.decision, Exact) for e in plan.entries)
    print(f"exact {exact}")
    print(f"nearest {len(plan.entries) - exact}")
    return 0


# --- space -------------------------------------------------------------------


def _cmd_space_count(args, rc: RunConfig) -> int:
    if args.preset == "union":
        print(union_cardinality(builtin_subspaces()))
    else:
        print(subspace_by_name(args.preset).cardinality())
    return 0


def _cmd_space_enum(args, rc: RunConfig) -> int:
    space = subspace_by_name(args.preset)
    members = enumerate_space(space)
    if args.limit is not None:
        members = itertools.islice(members, args.limit)
    for arch in members:
        print(arch.key)
    return 0


def _cmd_space_sample(args, rc: RunConfig) -> int:
    space = subspace_by_name(args.preset)
    rng = np.random.default_rng(rc.seed)
    for _ in range(args.n):
        print(sample(space, rng).key)
    return 0


def _cmd_space_schedule(args, rc: RunConfig) -> int:
    if args.phases:
        phases = []
        for part in args.phases.split(","):
            bits = part.split(":")
            if len(bits) not in (2, 3) or (len(bits) == 3 and bits[2] != "w"):
                raise ValueError(f"expected name:epochs[:w], got {part!r}")
            phases.append(Phase(subspace_by_name(bits[0]), int(bits[1]), len(bits) == 3))
        schedule = abps_schedule(phases)
    else:
        schedule = default_schedule()
    for ph in schedule.phases:
        warm = "warmup" if ph.warmup else "-"
        print(f"{ph.space.name}\t{ph.epochs}\t{warm}\t{ph.space.anchor.key}")
    print(f"total\t{schedule.total_epochs}")
    return 0


# --- cost --------------------------------------------------------------------


def _cmd_cost_flops(args, rc: RunConfig) -> int:
    arch = _arch_from_args(args)
    cost = detector_flops(arch, _head_from_args(args))
    for name in ("backbone", "fpn", "rpn", "roi_head", "total"):
        print(f"{name}\t{getattr(cost, name):.3f}")
    return 0


def _cmd_cost_band(args, rc: RunConfig) -> int:
    if args.gflops is not None:
        gflops = args.gflops
    else:
        gflops = total_gflops(_arch_from_args(args), _head_from_args(args))
    bands = parse_bands(_read_lines(args.bands)) if args.bands else DEFAULT_BANDS
    label = flops_band(gflops, bands)
    print(label if label is not None else "uncovered")
    return 0


def _cmd_cost_latency_fit(args, rc: RunConfig) -> int:
    model = latency_fit(_latency_samples(args.csv))
    print("coef\t" + "\t".join(repr(c) for c in model.coef))
    print(f"residual_std\t{model.residual_std!r}")
    print(f"residual_max\t{model.residual_max!r}")
    print(f"samples\t{model.n_samples}")
    return 0


# --- search ------------------------------------------------------------------


def _cmd_search_run(args, rc: RunConfig) -> int:
    spaces = _spaces_arg(args.spaces)
    latency = None
    if args.max_ms is not None:
        if not args.latency_csv:
            raise ValueError("--max-ms needs --latency-csv to fit a latency model")
        latency = (latency_fit(_latency_samples(args.latency_csv)), args.max_ms)
    constraint = Constraint(
        flops=_range_of(args.flops, float) if args.flops else None,
        latency=latency,
        scale=_range_of(args.scale, int) if args.scale else None,
    )
    cfg = SearchConfig(
        k=_opt(args.k, rc, "search", "k", 5, int),
        keep=_opt(args.keep, rc, "search", "keep", 0.5, float),
        attempt_cap=_opt(args.attempt_cap, rc, "search", "attempt-cap", 200, int),
        seed=rc.seed,
    )
    ev, close = _make_evaluator(args.evaluator, rc)
    try:
        winner, trace = two_step_search(spaces, constraint, ev, cfg,
                                        task=args.task, jobs=args.jobs)
    finally:
        close()
    _write_lines(_out_path(rc, args.name + ".tsv"), trace.to_lines())
    print(f"winner {winner.key} {trace.winner_metric!r}")
    print(
        f"budget direct={trace.direct_evals} fast={trace.fast_evals}"
        f" units={trace.budget_units!r}"
    )
    return 0


def _cmd_search_rank_study(args, rc: RunConfig) -> int:
    space = subspace_by_name(args.preset)
    seeds = _csv_ints(args.seeds) if args.seeds else (rc.seed,)
    fidelities = tuple(Fidelity.from_wire(w) for w in args.fidelities.split(","))
    n_models = _opt(args.n_models, rc, "search", "n-models", 50, int)
    close: Callable[[], None] = lambda: None
    if args.evaluator == "sim":
        ev = lambda seed: SimulatedEvaluator(study_seed=seed)
    else:
        ev, close = _make_evaluator(args.evaluator, rc)
    try:
        rep = ranking_study(ev, space, n_models, fidelities, seeds,
                            task=args.task, jobs=args.jobs)
    finally:
        close()
    _write_lines(_out_path(rc, args.name + ".csv"), rep.to_csv_lines())
    for fid in fidelities:
        tau = rep.mean_tau(fid)
        svg = render_plot(
            rep.scatter_points(fid),
            "scatter",
            title=f"{fid.wire} vs full, tau={tau:.4f}",
            xlabel="full metric",
            ylabel=f"{fid.wire} metric",
        )
        _out_path(rc, f"{args.name}_{fid.wire}.svg").write_text(svg, encoding="utf-8")
        print(f"tau {fid.wire} {tau!r}")
    return 0


def _cmd_search_tau(args, rc: RunConfig) -> int:
    pairs = read_csv_columns(_read_lines(args.csv), args.x, args.y)
    print(repr(kendall_tau(pairs)))
    return 0


# --- data --------------------------------------------------------------------


def _cmd_data_select(args, rc: RunConfig) -> int:
    source = represent_vectors(load_features(args.source))
    target = represent_vectors(load_features(args.target))
    if args.strategy == "top-k":
        strategy = TopK(k=args.k, per_image=args.per_image)
    elif args.strategy == "most-similar":
        strategy = MostSimilar()
    else:
        strategy = Random()
    budget = _opt(args.budget, rc, "data", "budget", 1000, int)
    result = select(strategy, source, target, budget=budget, seed=rc.seed)
    _write_lines(_out_path(rc, args.name + ".tsv"), result.to_lines())
    print(f"selected {len(result.entries)}")
    return 0


# --- supernet ----------------------------------------------------------------


def _toy_config(args) -> ToyConfig:
    stages = []
    for part in args.stages.split(","):
        d, sep, w = part.partition(":")
        if not sep:
            raise ValueError(f"expected depth:width per stage, got {part!r}")
        stages.append((int(d), int(w)))
    return ToyConfig(args.input_dim, args.stem, tuple(stages), args.classes)


def _parse_phases(spec: str, config: ToyConfig) -> list[ToyPhase]:
    phases = []
    for part in spec.split(","):
        bits = part.split(":")
        if len(bits) not in (2, 3) or (len(bits) == 3 and bits[2] != "w"):
            raise ValueError(f"expected cap:epochs[:w], got {part!r}")
        if bits[0] == "max":
            cap = config.max_selector
        else:
            d_s, sep, w_s = bits[0].partition("-")
            if not sep:
                raise ValueError(f"expected d.d.d-w.w.w or max, got {bits[0]!r}")
            cap = Selector(
                tuple(int(v) for v in d_s.split(".")),
                tuple(int(v) for v in w_s.split(".")),
            )
        phases.append(ToyPhase(cap, int(bits[1]), len(bits) == 3))
    return phases


def _synthetic_task(config: ToyConfig, kind: str, n: int, seed: int) -> ToyTask:
    rng = np.random.default_rng((seed, 3))
    inputs = rng.normal(size=(n, config.input_dim))
    if kind == "classify":
        labels = rng.integers(0, config.n_categories, size=n)
    else:
        labels = rng.normal(size=(n, config.n_categories))
    return ToyTask(inputs, labels, kind)


def _cmd_supernet_init(args, rc: RunConfig) -> int:
    config = _toy_config(args)
    ckpt = init_supernet(config, rc.seed)
    save_checkpoint(ckpt, _out_path(rc, args.name + ".ckpt"))
    print(f"tensors {len(ckpt.tensors)}")
    return 0


def _cmd_supernet_train(args, rc: RunConfig) -> int:
    config = _toy_config(args)
    schedule = _parse_phases(args.phases, config)
    task = _synthetic_task(config, args.kind, args.n_samples, rc.seed)
    init = load_checkpoint(args.init) if args.init else None
    hyper = TrainHyper(lr=args.lr, batch_size=args.batch_size,
                       iters_per_epoch=args.iters)
    ckpt, log = train_abps(config, schedule, task, hyper=hyper, seed=rc.seed, init=init)
    save_checkpoint(ckpt, _out_path(rc, args.name + ".ckpt"))
    _write_lines(_out_path(rc, args.name + "_log.csv"), log.to_csv_lines())
    means = log.epoch_mean_losses()
    print(f"first_epoch_loss {means[0]!r}")
    print(f"final_epoch_loss {means[-1]!r}")
    return 0


def _cmd_supernet_extract(args, rc: RunConfig) -> int:
    config = _toy_config(args)
    ckpt = load_checkpoint(args.ckpt)
    sel = Selector(_csv_ints(args.depths), _csv_ints(args.widths))
    sub, plan = extract_subnet(config, ckpt, sel)
    save_checkpoint(sub, _out_path(rc, args.name + ".ckpt"))
    print(f"tensors {len(sub.tensors)}")
    print(f"head_rows {plan.ranges['head.weight'][0][1]}")
    return 0


def _cmd_supernet_grad_check(args, rc: RunConfig) -> int:
    config = _toy_config(args)
    ckpt = init_supernet(config, rc.seed)
    rng = np.random.default_rng((rc.seed, 1))
    sel = Selector(
        tuple(int(rng.integers(1, d + 1)) for d, _ in config.stages),
        tuple(int(rng.integers(1, w + 1)) for _, w in config.stages),
    )
    x = rng.normal(size=(args.batch_size, config.input_dim))
    if args.kind == "classify":
        labels = rng.integers(0, config.n_categories, size=args.batch_size)
    else:
        labels = rng.normal(size=(args.batch_size, config.n_categories))
    err = gradient_check(config, ckpt, sel, (x, labels), args.kind,
                         n_params=args.n_params, seed=rc.seed)
    print(f"max_rel_err {err!r}")
    if err > args.tol:
        raise ValueError(f"gradient check failed: {err!r} > {args.tol!r}")
    return 0


# --- report ------------------------------------------------------------------


def _cmd_report(args, rc: RunConfig) -> int:
    points = read_csv_columns(_read_lines(args.csv), args.x, args.y)
    svg = render_plot(points, args.kind, title=args.title,
                      xlabel=args.xlabel or args.x, ylabel=args.ylabel or args.y)
    svg_path = _out_path(rc, args.name + ".svg")
    svg_path.write_text(svg, encoding="utf-8")
    _write_lines(_out_path(rc, args.name + ".csv"),
                 points_to_csv_lines(points, args.x, args.y))
    print(f"points {len(points)}")
    return 0


# --- parser ------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 2021)")
    p.add_argument("--out", default=None, help="output directory (default gaia_out)")
    p.add_argument("--cache", default=None,
                   help="evaluation cache file (default: GAIA_CACHE env, else off)")
    p.add_argument("--config", type=Path, default=None, help="INI-style config file")
    p.add_argument("--jobs", type=int, default=1, help="parallel evaluation workers")
    p.add_argument("--verbose", action="store_true", default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaia", description="Transfer-learning toolkit for detection backbones."
    )
    common = [_common()]
    top = parser.add_subparsers(dest="command", metavar="command", required=True)

    labels = top.add_parser("labels", help="label space unification and head surgery")
    lsub = labels.add_subparsers(dest="subcommand", metavar="subcommand", required=True)
    p = lsub.add_parser("unify", parents=common, help="build a unified label space")
    p.add_argument("--space", action="append", required=True,
                   help="label space file; repeat per dataset")
    p.add_argument("--embeddings", required=True, help="word embedding text file")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--overrides", default=None, help="manual override file")
    p.add_argument("--name", default="unified")
    p.set_defaults(func=_cmd_labels_unify)
    p = lsub.add_parser("merge", parents=common, help="fold one dataset into a unified space")
    p.add_argument("--unified", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--name", default="merged")
    p.set_defaults(func=_cmd_labels_merge)
    p = lsub.add_parser("surgery", parents=common, help="map a target head onto unified rows")
    p.add_argument("--unified", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--name", default="surgery")
    p.set_defaults(func=_cmd_labels_surgery)

    space = top.add_parser("space", help="architecture spaces")
    ssub = space.add_subparsers(dest="subcommand", metavar="subcommand", required=True)
    p = ssub.add_parser("count", parents=common, help="member count of a preset space")
    p.add_argument("--preset", default="ar50", choices=PRESETS + ("union",))
    p.set_defaults(func=_cmd_space_count)
    p = ssub.add_parser("enum", parents=common, help="list members in grid order")
    p.add_argument("--preset", default="ar50", choices=PRESETS)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=_cmd_space_enum)
    p = ssub.add_parser("sample", parents=common, help="draw members with the rule pool")
    p.add_argument("--preset", default="ar50", choices=PRESETS)
    p.add_argument("--n", type=int, default=10)
    p.set_defaults(func=_cmd_space_sample)
    p = ssub.add_parser("schedule", parents=common, help="progressive shrinking phases")
    p.add_argument("--phases", default=None,
                   help="comma list of name:epochs[:w]; default built-in 24+13+13")
    p.set_defaults(func=_cmd_space_schedule)

    cost = top.add_parser("cost", help="analytic FLOPs and latency")
    csub = cost.add_subparsers(dest="subcommand", metavar="subcommand", required=True)
    arch_flags = argparse.ArgumentParser(add_help=False)
    arch_flags.add_argument("--arch", default=None, help="architecture key sS-dD.D.D.D-wW...")
    arch_flags.add_argument("--scale", type=int, default=None)
    arch_flags.add_argument("--depths", default=None, help="comma list, one per stage")
    arch_flags.add_argument("--widths", default=None, help="comma list, stem first")
    arch_flags.add_argument("--classes", type=int, default=None, help="detector classes")
    p = csub.add_parser("flops", parents=common + [arch_flags],
                        help="GFLOPs breakdown of one architecture")
    p.set_defaults(func=_cmd_cost_flops)
    p = csub.add_parser("band", parents=common + [arch_flags], help="FLOPs band label")
    p.add_argument("--gflops", type=float, default=None)
    p.add_argument("--bands", default=None, help="band file: label lo hi per line")
    p.set_defaults(func=_cmd_cost_band)
    p = csub.add_parser("latency-fit", parents=common, help="fit latency from arch,ms CSV")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_cost_latency_fit)

    search = top.add_parser("search", help="two-step architecture search")
    rsub = search.add_subparsers(dest="subcommand", metavar="subcommand", required=True)
    p = rsub.add_parser("run", parents=common, help="group sweep then shortlist finetune")
    p.add_argument("--spaces", default="ar50", help="comma list of presets, or union")
    p.add_argument("--flops", default=None, help="GFLOPs window lo:hi")
    p.add_argument("--scale", default=None, help="test scale window lo:hi")
    p.add_argument("--max-ms", type=float, default=None)
    p.add_argument("--latency-csv", default=None)
    p.add_argument("--evaluator", default="sim", help="sim or exec:<command>")
    p.add_argument("--k", type=int, default=None, help="samples per group")
    p.add_argument("--keep", type=float, default=None, help="shortlist fraction")
    p.add_argument("--attempt-cap", type=int, default=None)
    p.add_argument("--task", default="search")
    p.add_argument("--name", default="search")
    p.set_defaults(func=_cmd_search_run)
    p = rsub.add_parser("rank-study", parents=common,
                        help="proxy-vs-full rank correlation study")
    p.add_argument("--preset", default="ar50", choices=PRESETS)
    p.add_argument("--n-models", type=int, default=None)
    p.add_argument("--seeds", default=None, help="comma list; default the global seed")
    p.add_argument("--fidelities", default="direct,fast")
    p.add_argument("--evaluator", default="sim", help="sim or exec:<command>")
    p.add_argument("--task", default="study")
    p.add_argument("--name", default="study")
    p.set_defaults(func=_cmd_search_rank_study)
    p = rsub.add_parser("tau", parents=common, help="rank correlation of two CSV columns")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", default="full")
    p.add_argument("--y", default="fast")
    p.set_defaults(func=_cmd_search_tau)

    data = top.add_parser("data", help="transfer data selection")
    dsub = data.add_subparsers(dest="subcommand", metavar="subcommand", required=True)
    p = dsub.add_parser("select", parents=common, help="pick source images for a target")
    p.add_argument("--source", required=True, help="feature file (binary or CSV)")
    p.add_argument("--target", required=True)
    p.add_argument("--strategy", default="top-k",
                   choices=("top-k", "most-similar", "random"))
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="per-unit take for top-k")
    p.add_argument("--per-image", action="store_true")
    p.add_argument("--name", default="selection")
    p.set_defaults(func=_cmd_data_select)

    supernet = top.add_parser("supernet", help="weight-sharing toy supernet")
    usub = supernet.add_subparsers(dest="subcommand", metavar="subcommand", required=True)
    net_flags = argparse.ArgumentParser(add_help=False)
    net_flags.add_argument("--input-dim", type=int, default=8)
    net_flags.add_argument("--stem", type=int, default=8)
    net_flags.add_argument("--stages", default="2:8,2:8",
                           help="comma list of maxdepth:maxwidth")
    net_flags.add_argument("--classes", type=int, default=4)
    p = usub.add_parser("init", parents=common + [net_flags],
                        help="seeded shared-weight checkpoint")
    p.add_argument("--name", default="supernet")
    p.set_defaults(func=_cmd_supernet_init)
    p = usub.add_parser("train", parents=common + [net_flags],
                        help="progressive shrinking on a synthetic task")
    p.add_argument("--phases", default="max:4", help="comma list of cap:epochs[:w]")
    p.add_argument("--kind", default="classify", choices=("classify", "regress"))
    p.add_argument("--n-samples", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--init", default=None, help="start from this checkpoint")
    p.add_argument("--name", default="supernet")
    p.set_defaults(func=_cmd_supernet_train)
    p = usub.add_parser("extract", parents=common + [net_flags],
                        help="slice a stand-alone subnet out")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--depths", required=True, help="comma list, one per stage")
    p.add_argument("--widths", required=True, help="comma list, one per stage")
    p.add_argument("--name", default="subnet")
    p.set_defaults(func=_cmd_supernet_extract)
    p = usub.add_parser("grad-check", parents=common + [net_flags],
                        help="analytic vs finite-difference gradients")
    p.add_argument("--kind", default="classify", choices=("classify", "regress"))
    p.add_argument("--batch-size", type=int, default=6)
    p.add_argument("--n-params", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_supernet_grad_check)

    p = top.add_parser("report", parents=common, help="CSV to deterministic SVG plot")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", default="x")
    p.add_argument("--y", default="y")
    p.add_argument("--kind", default="scatter", choices=("scatter", "line"))
    p.add_argument("--title", default="")
    p.add_argument("--xlabel", default=None)
    p.add_argument("--ylabel", default=None)
    p.add_argument("--name", default="plot")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    try:
        rc = build_run_config(args.config, seed=args.seed, out=args.out,
                              cache=args.cache, verbose=args.verbose)
        logging.basicConfig(level=logging.DEBUG if rc.verbose else logging.WARNING)
        return int(args.func(args, rc) or 0)
    except GaiaError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
