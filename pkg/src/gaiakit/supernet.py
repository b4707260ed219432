"""Weight-sharing toy supernet: stage-structured net, progressive-shrinking training,
subnet extraction, and classifier-head weight surgery.

The net is fully connected.  Sharing keeps rows and columns of the lower
index: a subnet of stage width w uses the leading w rows/columns of every
stage tensor, and depth d uses the first d blocks.  All storage and training
compute is 32-bit, and forward restricts each matrix to a fresh contiguous
slice before multiplying, so an extracted subnet reproduces the shared
forward bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .archspace import (
    DEFAULT_RULE_POOL,
    DepthQuantile,
    Grid,
    Rule,
    _combos_by_total,
    _round_half_up,
    sample_rule,
)
from .errors import (
    CheckpointCorrupt,
    IndexOutOfRange,
    InvalidPhase,
    ShapeMismatch,
)
from .labelspace import HeadSurgeryPlan

CKPT_MAGIC = b"GAIACKPT"
CKPT_VERSION = 1


@dataclass(frozen=True)
class Selector:
    """Active per-stage depths and widths of a subnet."""

    depths: tuple[int, ...]
    widths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.depths) != len(self.widths):
            raise ShapeMismatch(
                f"{len(self.depths)} depths vs {len(self.widths)} widths")


@dataclass(frozen=True)
class ToyConfig:
    """Maxima of the shared net: input width, stem width, per-stage caps, classes."""

    input_dim: int
    stem_width: int
    stages: tuple[tuple[int, int], ...]  # (max depth, max width) per stage
    n_categories: int

    def __post_init__(self) -> None:
        if min(self.input_dim, self.stem_width, self.n_categories) < 1:
            raise ValueError("dimensions must be positive")
        if not self.stages:
            raise ValueError("at least one stage is required")
        if any(d < 1 or w < 1 for d, w in self.stages):
            raise ValueError(f"stage caps must be positive: {self.stages}")

    @property
    def max_selector(self) -> Selector:
        return Selector(tuple(d for d, _ in self.stages), tuple(w for _, w in self.stages))

    def check_selector(self, sel: Selector) -> None:
        if len(sel.depths) != len(self.stages):
            raise ShapeMismatch(
                f"selector has {len(sel.depths)} stages, net has {len(self.stages)}")
        for s, ((dmax, wmax), d, w) in enumerate(zip(self.stages, sel.depths, sel.widths)):
            if not 1 <= d <= dmax or not 1 <= w <= wmax:
                raise ShapeMismatch(
                    f"stage {s}: selector ({d}, {w}) outside caps ({dmax}, {wmax})")

    def restrict(self, sel: Selector) -> "ToyConfig":
        """The stand-alone config whose maxima are the selector's active values."""
        self.check_selector(sel)
        return ToyConfig(self.input_dim, self.stem_width,
                         tuple(zip(sel.depths, sel.widths)), self.n_categories)


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Named float32 tensors, insertion-ordered."""

    tensors: Mapping[str, np.ndarray]


@dataclass(frozen=True, eq=False)
class SlicingPlan:
    """Kept index ranges per tensor dimension, always starting at 0."""

    ranges: Mapping[str, tuple[tuple[int, int], ...]]


def _tensor_specs(config: ToyConfig) -> Iterator[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan-in) in definition order."""
    yield "stem.weight", (config.stem_width, config.input_dim), config.input_dim
    yield "stem.bias", (config.stem_width,), config.input_dim
    prev = config.stem_width
    for s, (dmax, wmax) in enumerate(config.stages):
        yield f"stage{s}.transition.weight", (wmax, prev), prev
        yield f"stage{s}.transition.bias", (wmax,), prev
        for k in range(dmax):
            yield f"stage{s}.block{k}.weight", (wmax, wmax), wmax
            yield f"stage{s}.block{k}.bias", (wmax,), wmax
        prev = wmax
    yield "head.weight", (config.n_categories, prev), prev
    yield "head.bias", (config.n_categories,), prev


def init_supernet(config: ToyConfig, seed: int) -> Checkpoint:
    """Scaled-uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape, fan_in in _tensor_specs(config):
        bound = 1.0 / np.sqrt(fan_in)
        tensors[name] = rng.uniform(-bound, bound, shape).astype(np.float32)
    return Checkpoint(tensors)


def _slice(ckpt: Checkpoint, name: str, shape: tuple[int, ...], dtype) -> np.ndarray:
    try:
        full = ckpt.tensors[name]
    except KeyError:
        raise ShapeMismatch(f"checkpoint is missing tensor {name}") from None
    if full.ndim != len(shape) or any(f < s for f, s in zip(full.shape, shape)):
        raise ShapeMismatch(f"{name}: cannot take {shape} from {full.shape}")
    view = full[tuple(slice(0, s) for s in shape)]
    return np.ascontiguousarray(view, dtype=dtype)


def _run_forward(config: ToyConfig, ckpt: Checkpoint, sel: Selector,
                 x: np.ndarray, dtype) -> tuple[np.ndarray, dict, list]:
    """Restricted forward; returns (logits, sliced tensors, per-stage caches)."""
    config.check_selector(sel)
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise ShapeMismatch(f"inputs {x.shape} do not match input dim {config.input_dim}")
    x = np.ascontiguousarray(x, dtype=dtype)
    sliced: dict[str, np.ndarray] = {}

    def take(name: str, *shape: int) -> np.ndarray:
        sliced[name] = _slice(ckpt, name, shape, dtype)
        return sliced[name]

    h = x @ take("stem.weight", config.stem_width, config.input_dim).T
    h = h + take("stem.bias", config.stem_width)
    caches = []
    prev_width = config.stem_width
    for s, (d, w) in enumerate(zip(sel.depths, sel.widths)):
        zt = h @ take(f"stage{s}.transition.weight", w, prev_width).T
        zt = zt + take(f"stage{s}.transition.bias", w)
        a = np.maximum(zt, 0)
        blocks = []
        out = a
        for k in range(d):
            z = out @ take(f"stage{s}.block{k}.weight", w, w).T
            z = z + take(f"stage{s}.block{k}.bias", w)
            blocks.append((out, z))
            out = out + np.maximum(z, 0)
        caches.append((h, zt, blocks))
        h = out
        prev_width = w
    logits = h @ take("head.weight", config.n_categories, prev_width).T
    logits = logits + take("head.bias", config.n_categories)
    caches.append(h)
    return logits, sliced, caches


def forward(config: ToyConfig, ckpt: Checkpoint, sel: Selector,
            inputs: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Logits of the active subnet. A single vector input yields a single row."""
    x = np.asarray(inputs)
    if x.ndim == 1:
        return forward(config, ckpt, sel, x[None, :], dtype)[0]
    logits, _, _ = _run_forward(config, ckpt, sel, x, dtype)
    return logits


def _loss_and_dlogits(logits: np.ndarray, labels: np.ndarray,
                      kind: str) -> tuple[float, np.ndarray]:
    n, c = logits.shape
    if kind == "classify":
        y = np.asarray(labels)
        if y.shape != (n,) or not np.issubdtype(y.dtype, np.integer):
            raise ShapeMismatch(f"classify labels must be {n} integers, got {y.shape}")
        if y.min() < 0 or y.max() >= c:
            raise ShapeMismatch(f"labels outside [0, {c})")
        m = logits.max(axis=1, keepdims=True)
        e = np.exp(logits - m)
        total = e.sum(axis=1, keepdims=True)
        lse = m + np.log(total)
        loss = float(np.mean(lse[:, 0] - logits[np.arange(n), y]))
        dz = e / total
        dz[np.arange(n), y] -= 1
        return loss, dz / n
    if kind == "regress":
        t = np.asarray(labels, dtype=logits.dtype)
        if t.shape != logits.shape:
            raise ShapeMismatch(f"regress targets {t.shape} vs logits {logits.shape}")
        diff = logits - t
        return float(np.mean(diff * diff)), 2 * diff / diff.size
    raise ValueError(f"unknown task kind {kind!r}")


def loss_and_grads(config: ToyConfig, ckpt: Checkpoint, sel: Selector,
                   batch: tuple[np.ndarray, np.ndarray], kind: str,
                   dtype=np.float32) -> tuple[float, dict[str, np.ndarray]]:
    """Loss plus exact reverse-mode gradients, zero outside the active slices."""
    x, labels = batch
    logits, sliced, caches = _run_forward(config, ckpt, sel, np.asarray(x), dtype)
    loss, d = _loss_and_dlogits(logits, labels, kind)

    grads = {name: np.zeros(t.shape, dtype=dtype) for name, t in ckpt.tensors.items()}

    def put(name: str, g: np.ndarray) -> None:
        grads[name][tuple(slice(0, s) for s in g.shape)] = g

    h_last = caches[-1]
    put("head.weight", d.T @ h_last)
    put("head.bias", d.sum(axis=0))
    d = d @ sliced["head.weight"]
    for s in reversed(range(len(sel.depths))):
        h_in, zt, blocks = caches[s]
        for k in reversed(range(len(blocks))):
            b_in, z = blocks[k]
            dz = d * (z > 0)
            put(f"stage{s}.block{k}.weight", dz.T @ b_in)
            put(f"stage{s}.block{k}.bias", dz.sum(axis=0))
            d = d + dz @ sliced[f"stage{s}.block{k}.weight"]
        dzt = d * (zt > 0)
        put(f"stage{s}.transition.weight", dzt.T @ h_in)
        put(f"stage{s}.transition.bias", dzt.sum(axis=0))
        d = dzt @ sliced[f"stage{s}.transition.weight"]
    x_used = np.ascontiguousarray(np.asarray(x), dtype=dtype)
    put("stem.weight", d.T @ x_used)
    put("stem.bias", d.sum(axis=0))
    return loss, grads


@dataclass(frozen=True, eq=False)
class ToyTask:
    inputs: np.ndarray
    labels: np.ndarray
    kind: str  # "classify" or "regress"


def evaluate_loss(config: ToyConfig, ckpt: Checkpoint, sel: Selector, task: ToyTask) -> float:
    logits = forward(config, ckpt, sel, task.inputs)
    loss, _ = _loss_and_dlogits(np.atleast_2d(logits), task.labels, task.kind)
    return loss


def gradient_check(config: ToyConfig, ckpt: Checkpoint, sel: Selector,
                   batch: tuple[np.ndarray, np.ndarray], kind: str,
                   n_params: int = 20, seed: int = 0) -> float:
    """Worst relative error of analytic gradients against central differences.

    Probes n_params randomly chosen coordinates; the step is 1e-3 snapped to
    float32 so the perturbed values are exactly representable, the losses are
    evaluated in float64.  The checkpoint is left untouched.
    """
    work = Checkpoint({n: t.copy() for n, t in ckpt.tensors.items()})
    rng = np.random.default_rng(seed)
    _, grads = loss_and_grads(config, work, sel, batch, kind, dtype=np.float64)
    names = list(work.tensors)
    worst = 0.0
    for _ in range(n_params):
        name = names[int(rng.integers(len(names)))]
        t = work.tensors[name]
        idx = tuple(int(rng.integers(s)) for s in t.shape)
        orig = t[idx]
        plus, minus = np.float32(orig + 1e-3), np.float32(orig - 1e-3)
        t[idx] = plus
        lp, _ = loss_and_grads(config, work, sel, batch, kind, dtype=np.float64)
        t[idx] = minus
        lm, _ = loss_and_grads(config, work, sel, batch, kind, dtype=np.float64)
        t[idx] = orig
        fd = (lp - lm) / (float(plus) - float(minus))
        g = float(grads[name][idx])
        worst = max(worst, abs(fd - g) / max(abs(g), abs(fd), 1e-8))
    return worst


# --- progressive-shrinking training ----------------------------------------


@dataclass(frozen=True)
class ToyPhase:
    """One shrinking step: sampling caps, epoch count, optional warmup epoch."""

    cap: Selector
    epochs: int
    warmup: bool = False


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 0.1
    batch_size: int = 8
    iters_per_epoch: int = 50

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.batch_size < 1 or self.iters_per_epoch < 1:
            raise ValueError("bad hyperparameters")


@dataclass(frozen=True)
class TrainLog:
    """Per-iteration (epoch, phase index, rule label, loss) records."""

    records: tuple[tuple[int, int, str, float], ...]

    def to_csv_lines(self) -> list[str]:
        lines = ["epoch,phase,rule,loss"]
        lines += [f"{e},{p},{r},{loss!r}" for e, p, r, loss in self.records]
        return lines

    def rule_histogram(self, epoch: int | None = None) -> dict[str, int]:
        hist: dict[str, int] = {}
        for e, _, rule, _ in self.records:
            if epoch is None or e == epoch:
                hist[rule] = hist.get(rule, 0) + 1
        return hist

    def epoch_mean_losses(self) -> tuple[float, ...]:
        sums: dict[int, list[float]] = {}
        for e, _, _, loss in self.records:
            sums.setdefault(e, []).append(loss)
        return tuple(float(np.mean(sums[e])) for e in sorted(sums))


def sample_selector(cap: Selector, rule: Rule, rng: np.random.Generator) -> Selector:
    """Appendix-style draw inside the caps: rule pins depths, widths uniform."""
    if isinstance(rule, DepthQuantile):
        grids = tuple(Grid(1, d, 1) for d in cap.depths)
        combos = _combos_by_total(grids)
        lo, hi = len(cap.depths), sum(cap.depths)
        target = _round_half_up(lo + rule.q * (hi - lo))
        total = min(combos, key=lambda t: (abs(t - target), t))
        group = combos[total]
        depths = group[int(rng.integers(len(group)))]
    else:
        depths = tuple(int(rng.integers(1, d + 1)) for d in cap.depths)
    widths = tuple(int(rng.integers(1, w + 1)) for w in cap.widths)
    return Selector(depths, widths)


def _phase_of(schedule: Sequence[ToyPhase], epoch: int) -> tuple[int, bool]:
    start = 0
    for i, phase in enumerate(schedule):
        if epoch < start + phase.epochs:
            return i, phase.warmup and epoch == start
        start += phase.epochs
    raise InvalidPhase(f"epoch {epoch} beyond schedule")


def train_abps(config: ToyConfig, schedule: Sequence[ToyPhase], task: ToyTask,
               pool: Sequence[tuple[Rule, float]] = DEFAULT_RULE_POOL,
               hyper: TrainHyper = TrainHyper(), seed: int = 0,
               init: Checkpoint | None = None) -> tuple[Checkpoint, TrainLog]:
    """SGD on shared weights, one sampled subnet per iteration.

    Streams: the checkpoint init uses `seed`, subnet draws use (seed, 1) and
    batch draws use (seed, 2), so runs are bit-reproducible and two schedules
    can share identical batches.  Warmup ramps the rate linearly across the
    phase's first epoch.
    """
    if not schedule:
        raise InvalidPhase("schedule is empty")
    for phase in schedule:
        if phase.epochs < 1:
            raise InvalidPhase(f"phase epochs must be >= 1, got {phase.epochs}")
        config.check_selector(phase.cap)
    ckpt = init if init is not None else init_supernet(config, seed)
    tensors = {name: t.copy() for name, t in ckpt.tensors.items()}
    work = Checkpoint(tensors)
    rng_arch = np.random.default_rng((seed, 1))
    rng_data = np.random.default_rng((seed, 2))
    n = len(task.inputs)
    records = []
    total_epochs = sum(p.epochs for p in schedule)
    for epoch in range(total_epochs):
        phase_idx, warmup = _phase_of(schedule, epoch)
        cap = schedule[phase_idx].cap
        for it in range(hyper.iters_per_epoch):
            idx = rng_data.integers(0, n, size=hyper.batch_size)
            rule = sample_rule(rng_arch, pool)
            sel = sample_selector(cap, rule, rng_arch)
            lr = hyper.lr * (it + 1) / hyper.iters_per_epoch if warmup else hyper.lr
            loss, grads = loss_and_grads(
                config, work, sel, (task.inputs[idx], task.labels[idx]), task.kind)
            for name in tensors:
                tensors[name] -= np.float32(lr) * grads[name]
            records.append((epoch, phase_idx, rule.label, loss))
    return work, TrainLog(tuple(records))


# --- extraction and surgery -------------------------------------------------


def extract_subnet(config: ToyConfig, ckpt: Checkpoint,
                   sel: Selector) -> tuple[Checkpoint, SlicingPlan]:
    """Copy out the kept slices; with the maxima selector this is the identity."""
    config.check_selector(sel)
    sub_config = config.restrict(sel)
    tensors = {}
    ranges = {}
    for name, shape, _ in _tensor_specs(sub_config):
        tensors[name] = _slice(ckpt, name, shape, np.float32)
        ranges[name] = tuple((0, s) for s in shape)
    return Checkpoint(tensors), SlicingPlan(ranges)


def head_surgery(ckpt: Checkpoint, plan: HeadSurgeryPlan) -> Checkpoint:
    """Re-gather head rows (and bias entries) per the plan; rest untouched."""
    try:
        weight = ckpt.tensors["head.weight"]
        bias = ckpt.tensors["head.bias"]
    except KeyError as missing:
        raise ShapeMismatch(f"checkpoint has no {missing} tensor") from None
    rows = weight.shape[0]
    indices = plan.indices()
    for i in indices:
        if not 0 <= i < rows:
            raise IndexOutOfRange(f"head row {i} outside [0, {rows})")
    tensors = dict(ckpt.tensors)
    gather = np.array(indices, dtype=int)
    tensors["head.weight"] = weight[gather, :].copy()
    tensors["head.bias"] = bias[gather].copy()
    return Checkpoint(tensors)


# --- checkpoint files -------------------------------------------------------


def checkpoint_to_bytes(ckpt: Checkpoint) -> bytes:
    out = bytearray(CKPT_MAGIC)
    out += struct.pack("<II", CKPT_VERSION, len(ckpt.tensors))
    for name, tensor in ckpt.tensors.items():
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded)) + encoded
        out += struct.pack("<B", tensor.ndim)
        out += struct.pack(f"<{tensor.ndim}Q", *tensor.shape)
        out += np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    return bytes(out)


def checkpoint_from_bytes(raw: bytes) -> Checkpoint:
    if not raw.startswith(CKPT_MAGIC):
        raise CheckpointCorrupt("bad magic")
    off = len(CKPT_MAGIC)
    try:
        version, count = struct.unpack_from("<II", raw, off)
        off += 8
        if version != CKPT_VERSION:
            raise CheckpointCorrupt(f"unsupported version {version}")
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", raw, off)
            off += 1
            shape = struct.unpack_from(f"<{rank}Q", raw, off)
            off += 8 * rank
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            data = raw[off:off + 4 * size]
            if len(data) != 4 * size:
                raise CheckpointCorrupt(f"{name}: truncated data")
            off += 4 * size
            if name in tensors:
                raise CheckpointCorrupt(f"duplicate tensor {name}")
            tensors[name] = np.frombuffer(data, dtype="<f4").reshape(shape).copy()
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointCorrupt(str(exc)) from None
    if off != len(raw):
        raise CheckpointCorrupt(f"{len(raw) - off} trailing bytes")
    return Checkpoint(tensors)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_to_bytes(ckpt))


def load_checkpoint(path: str | Path) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())
