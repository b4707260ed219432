"""Evaluation of candidate architectures at three fidelities.

A request names an architecture, a fidelity (direct probe, fast finetune at
a 0.2x schedule, or the full schedule), and a task.  Results come from one
of three sources with one interface: a deterministic simulator, an external
trainer process speaking line-delimited JSON over stdio, or a persistent
append-only cache in front of either.

The simulator's latent quality rises with log-FLOPs and carries a bump where
input scale and total depth are compatible (scale/depth near rho_star).
Fidelities differ in noise: the full schedule is nearly exact, the fast
schedule slightly noisier, and the direct probe both noisy and biased toward
wide models.  Noise is a pure function of (arch key, fidelity, study seed),
so results never depend on call order or parallelism.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .archspace import Architecture, parse_arch_key
from .costmodel import DEFAULT_HEAD, HeadConfig, total_gflops
from .errors import (
    ConflictingResult,
    EndpointDown,
    ProtocolError,
    RemoteError,
)

log = logging.getLogger(__name__)

PROTOCOL_NAME = "gaia-eval"
PROTOCOL_VERSION = 1


class Fidelity(Enum):
    DIRECT = "direct"
    FAST = "fast"
    FULL = "full"

    @property
    def wire(self) -> str:
        return self.value

    @classmethod
    def from_wire(cls, s: str) -> "Fidelity":
        for f in cls:
            if f.value == s:
                return f
        raise ValueError(f"unknown fidelity {s!r}")


# Relative cost units for search budget accounting (full schedule = 1).
FIDELITY_COST = {Fidelity.DIRECT: 0.01, Fidelity.FAST: 0.2, Fidelity.FULL: 1.0}


@dataclass(frozen=True)
class EvalRequest:
    id: str
    arch: Architecture
    fidelity: Fidelity
    task: str


@dataclass(frozen=True)
class EvalResult:
    id: str
    metric: float
    metric_name: str
    cost_s: float
    provenance: str  # simulated | external | cached

    def __post_init__(self) -> None:
        if not math.isfinite(self.metric):
            raise ValueError(f"metric must be finite, got {self.metric}")


class Evaluator(Protocol):
    def evaluate(self, req: EvalRequest) -> EvalResult: ...


# --- simulator ---------------------------------------------------------------


@dataclass(frozen=True)
class SimulatorConfig:
    """Latent-quality and noise constants; see module docstring."""

    beta0: float = 38.0
    beta1: float = 6.0
    beta2: float = 2.0
    rho_star: float = 40.0
    sigma_rho: float = 15.0
    sigma_full: float = 0.2
    sigma_fast: float = 0.5
    sigma_direct: float = 3.0
    direct_bias: float = 4.0
    f0_gflops: float = 30.0
    width_ref: tuple[int, int, int, int, int] = (64, 80, 160, 320, 640)
    head: HeadConfig = DEFAULT_HEAD
    metric_name: str = "sim-ap"

    @classmethod
    def noiseless(cls, **kw) -> "SimulatorConfig":
        """All noise and bias off: every fidelity returns q* exactly."""
        base = dict(sigma_full=0.0, sigma_fast=0.0, sigma_direct=0.0, direct_bias=0.0)
        base.update(kw)
        return cls(**base)


DEFAULT_SIM = SimulatorConfig()


def latent_quality(arch: Architecture, config: SimulatorConfig = DEFAULT_SIM) -> float:
    """q*(a): log-FLOPs trend plus a scale/depth compatibility bump."""
    flops = total_gflops(arch, config.head)
    rho = arch.scale / arch.total_depth
    bump = math.exp(-(((rho - config.rho_star) / config.sigma_rho) ** 2))
    return config.beta0 + config.beta1 * math.log10(flops / config.f0_gflops) \
        + config.beta2 * bump


def _stable_normal(tag: str) -> float:
    """Standard normal drawn from a seed that is a pure function of the tag."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    return float(np.random.default_rng(seed).standard_normal())


def simulate(
    req: EvalRequest,
    study_seed: int = 0,
    config: SimulatorConfig = DEFAULT_SIM,
) -> EvalResult:
    """Deterministic simulated evaluation; order-independent by construction."""
    q = latent_quality(req.arch, config)
    sigma = {
        Fidelity.FULL: config.sigma_full,
        Fidelity.FAST: config.sigma_fast,
        Fidelity.DIRECT: config.sigma_direct,
    }[req.fidelity]
    if req.fidelity is Fidelity.DIRECT:
        frac = [w / r for w, r in zip(req.arch.widths, config.width_ref)]
        q += config.direct_bias * (sum(frac) / len(frac))
    if sigma > 0.0:
        q += sigma * _stable_normal(f"{req.arch.key}|{req.fidelity.wire}|{study_seed}")
    return EvalResult(
        id=req.id,
        metric=q,
        metric_name=config.metric_name,
        cost_s=FIDELITY_COST[req.fidelity],
        provenance="simulated",
    )


class SimulatedEvaluator:
    def __init__(self, config: SimulatorConfig = DEFAULT_SIM, study_seed: int = 0):
        self.config = config
        self.study_seed = study_seed

    def evaluate(self, req: EvalRequest) -> EvalResult:
        return simulate(req, self.study_seed, self.config)


def evaluate_batch(
    evaluator: Evaluator, requests: Sequence[EvalRequest], jobs: int = 1
) -> list[EvalResult]:
    """Evaluate in request order; with jobs > 1, concurrently but bit-identically."""
    if jobs <= 1 or len(requests) <= 1:
        return [evaluator.evaluate(r) for r in requests]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(evaluator.evaluate, requests))


# --- wire protocol -----------------------------------------------------------


def handshake_json() -> str:
    return json.dumps({"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION})


def request_to_json(req: EvalRequest) -> str:
    return json.dumps(
        {
            "id": req.id,
            "arch": {
                "depths": list(req.arch.depths),
                "widths": list(req.arch.widths),
                "scale": req.arch.scale,
            },
            "fidelity": req.fidelity.wire,
            "task": req.task,
        }
    )


def request_from_json(obj: dict) -> EvalRequest:
    """Parse a request object, ignoring unknown fields."""
    try:
        arch = obj["arch"]
        return EvalRequest(
            id=str(obj["id"]),
            arch=Architecture(
                tuple(arch["depths"]), tuple(arch["widths"]), int(arch["scale"])
            ),
            fidelity=Fidelity.from_wire(obj["fidelity"]),
            task=str(obj["task"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad request object: {exc}") from exc


def result_from_json(obj: dict, expected_id: str) -> EvalResult:
    """Parse a response object; unknown fields ignored; errors surfaced."""
    if not isinstance(obj, dict) or "id" not in obj:
        raise ProtocolError(f"response is not a result object: {obj!r}")
    if "error" in obj:
        raise RemoteError(str(obj["error"]))
    if str(obj["id"]) != expected_id:
        raise ProtocolError(
            f"response id {obj.get('id')!r} does not match request {expected_id!r}"
        )
    try:
        metric = float(obj["metric"])
        name = str(obj.get("metric_name", "metric"))
        cost = float(obj.get("cost_s", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad response fields: {obj!r}") from exc
    if not math.isfinite(metric):
        raise ProtocolError(f"non-finite metric in response: {obj!r}")
    return EvalResult(expected_id, metric, name, cost, provenance="external")


class ExternalEvaluator:
    """Client for a trainer process speaking the gaia-eval stdio protocol.

    The child emits one handshake line, then answers each request line with
    one response line.  A malformed response line triggers a single resend.
    """

    def __init__(self, command: str | Sequence[str]):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def start(self) -> "ExternalEvaluator":
        if self._proc is not None:
            return self
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EndpointDown(f"cannot spawn {self.command}: {exc}") from exc
        line = self._read_line()
        try:
            hello = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad handshake line: {line!r}") from exc
        if hello.get("protocol") != PROTOCOL_NAME:
            raise ProtocolError(f"unexpected protocol in handshake: {hello!r}")
        if hello.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version: {hello!r}")
        return self

    def __enter__(self) -> "ExternalEvaluator":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    def _read_line(self) -> str:
        assert self._proc is not None and self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if line == "":
            code = self._proc.poll()
            raise EndpointDown(f"endpoint closed its stream (exit code {code})")
        return line

    def _send_line(self, line: str) -> None:
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EndpointDown(f"endpoint pipe closed: {exc}") from exc

    def evaluate(self, req: EvalRequest) -> EvalResult:
        if self._proc is None:
            self.start()
        payload = request_to_json(req)
        with self._lock:
            self._send_line(payload)
            line = self._read_line()
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                log.warning("malformed response line %r; resending once", line.strip())
                self._send_line(payload)
                line = self._read_line()
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ProtocolError(f"malformed response line: {line!r}") from exc
            return result_from_json(obj, expected_id=req.id)

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin is not None:
                proc.stdin.close()
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


def evaluate_external(req: EvalRequest, endpoint: ExternalEvaluator) -> EvalResult:
    """Forward one request to a started endpoint."""
    return endpoint.evaluate(req)


# --- persistent cache --------------------------------------------------------


class EvalCache:
    """Append-only (arch key, fidelity, task) -> (metric, cost_s) store.

    Lines are 'key<TAB>fidelity<TAB>task<TAB>metric<TAB>cost_s'.  Unreadable
    lines are skipped with a warning.  Re-putting an identical metric is a
    no-op; putting a different metric for a stored key is an error.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._mem: dict[tuple[str, str, str], tuple[float, float]] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        for i, raw in enumerate(self.path.read_text(encoding="utf-8").splitlines()):
            if not raw.strip():
                continue
            parts = raw.split("\t")
            ok = len(parts) == 5
            if ok:
                key, fid, task, metric_s, cost_s = parts
                try:
                    metric, cost = float(metric_s), float(cost_s)
                    parse_arch_key(key)
                    Fidelity.from_wire(fid)
                except ValueError:
                    ok = False
            if not ok:
                log.warning(
                    "cache corrupt: skipping line %d of %s: %r", i + 1, self.path, raw
                )
                continue
            self._mem[(key, fid, task)] = (metric, cost)

    def __len__(self) -> int:
        return len(self._mem)

    def get(
        self, arch: Architecture, fidelity: Fidelity, task: str
    ) -> EvalResult | None:
        hit = self._mem.get((arch.key, fidelity.wire, task))
        if hit is None:
            return None
        metric, cost = hit
        return EvalResult("", metric, "metric", cost, provenance="cached")

    def put(
        self,
        arch: Architecture,
        fidelity: Fidelity,
        task: str,
        metric: float,
        cost_s: float,
    ) -> None:
        if "\t" in task or "\n" in task:
            raise ValueError("task ids may not contain tabs or newlines")
        key = (arch.key, fidelity.wire, task)
        with self._lock:
            stored = self._mem.get(key)
            if stored is not None:
                if stored[0] == metric:
                    return
                raise ConflictingResult(
                    f"{key} already stored with metric {stored[0]!r}, got {metric!r}"
                )
            self._mem[key] = (metric, cost_s)
            if self.path is not None:
                line = f"{key[0]}\t{key[1]}\t{key[2]}\t{metric!r}\t{cost_s!r}\n"
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line)


class CachingEvaluator:
    """Cache wrapper: hits short-circuit, misses are stored after evaluation."""

    def __init__(self, inner: Evaluator, cache: EvalCache):
        self.inner = inner
        self.cache = cache

    def evaluate(self, req: EvalRequest) -> EvalResult:
        hit = self.cache.get(req.arch, req.fidelity, req.task)
        if hit is not None:
            return replace(hit, id=req.id)
        res = self.inner.evaluate(req)
        self.cache.put(req.arch, req.fidelity, req.task, res.metric, res.cost_s)
        return res
