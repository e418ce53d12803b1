"""Accuracy evaluation: surrogate landscape, external workers, cache, parallelism.

Search needs an accuracy number per sampled block.  Real evaluation trains
a network per block, so this module keeps that behind a narrow interface
with three implementations: a deterministic synthetic landscape for
desk-scale experiments, a line-protocol bridge to external worker
processes, and a caching wrapper.  ``parallel_window`` fans evaluations
out over a bounded number of concurrent requests.

The external wire protocol, one JSON object per line over stdin/stdout:

    -> {"id": 7, "arch": {"layers": [...]}}
    <- {"id": 7, "accuracy": 63.1}          on success
    <- {"id": 7, "error": "description"}    on per-architecture failure

Workers must answer every request with exactly one line carrying the
request id, flush after each line, and exit when stdin closes.  A reply
carrying "error" fails that architecture only; transport problems (dead
process, unparseable line, timeout) abort the run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import select
import shlex
import subprocess
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from .arch import BlockArch, canonical_serialize, to_trajectory
from .features import FeatureCount, cosine_similarity, feature_count

logger = logging.getLogger(__name__)

ACC_MIN = 0.0
ACC_MAX = 100.0


class EvaluationError(Exception):
    """A single architecture failed to evaluate; the run may continue."""


class TransportError(Exception):
    """The evaluator itself is broken (dead worker, protocol garbage);
    the run cannot continue."""


@dataclass(frozen=True)
class SurrogateParams:
    """Synthetic accuracy landscape.

    Accuracy rises with cosine similarity between the block's feature
    count and a reference feature count, falls with block length, and
    carries deterministic per-block noise.  The constants are artifacts of
    this codebase, chosen so the landscape spans a plausible range and the
    similarity term dominates the length term.
    """

    reference: FeatureCount
    base: float = 50.0
    sim_weight: float = 40.0
    len_penalty: float = 0.8
    noise_amp: float = 1.0
    noise_seed: int = 0


def _arch_noise(arch: BlockArch, seed: int, amp: float) -> float:
    """Deterministic noise in [-amp, amp], stable across runs and platforms."""
    if amp == 0.0:
        return 0.0
    digest = hashlib.sha256(f"{seed}:{canonical_serialize(arch)}".encode()).digest()
    unit = int.from_bytes(digest[:8], "big") / float(2**64)  # [0, 1)
    return (2.0 * unit - 1.0) * amp


def surrogate_accuracy(arch: BlockArch, params: SurrogateParams) -> float:
    """Deterministic synthetic accuracy in [0, 100]."""
    mu = feature_count(to_trajectory(arch), params.reference.gamma).mu
    sim = cosine_similarity(mu, params.reference.mu)
    raw = (
        params.base
        + params.sim_weight * sim
        - params.len_penalty * len(arch.layers)
        + _arch_noise(arch, params.noise_seed, params.noise_amp)
    )
    return float(np.clip(raw, ACC_MIN, ACC_MAX))


class SurrogateEvaluator:
    """Callable evaluator over the synthetic landscape."""

    def __init__(self, params: SurrogateParams):
        self.params = params

    def __call__(self, arch: BlockArch) -> float:
        return surrogate_accuracy(arch, self.params)

    def close(self) -> None:
        pass


class _Worker:
    """One external evaluator process, spoken to serially."""

    def __init__(self, command: str, timeout: float):
        self.timeout = timeout
        self.lock = threading.Lock()
        self.next_id = 0
        self.dead = False
        self._buf = b""
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
                bufsize=0,
            )
        except OSError as exc:
            raise TransportError(f"could not start evaluator {command!r}: {exc}") from exc

    def evaluate(self, arch: BlockArch) -> float:
        with self.lock:
            self.next_id += 1
            req_id = self.next_id
            request = json.dumps(
                {"id": req_id, "arch": json.loads(canonical_serialize(arch))},
                separators=(",", ":"),
            )
            if self.proc.poll() is not None:
                self.dead = True
                raise TransportError(
                    f"evaluator exited with code {self.proc.returncode}"
                )
            try:
                self.proc.stdin.write(request.encode() + b"\n")
            except (BrokenPipeError, OSError) as exc:
                self.dead = True
                raise TransportError(f"evaluator pipe closed: {exc}") from exc
            return self._read_response(req_id)

    def _read_line(self, deadline: float) -> str | None:
        """Next stdout line, None on timeout, TransportError on EOF."""
        fd = self.proc.stdout.fileno()
        while True:
            newline = self._buf.find(b"\n")
            if newline >= 0:
                line, self._buf = self._buf[:newline], self._buf[newline + 1:]
                return line.decode("utf-8", errors="replace")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                return None
            chunk = os.read(fd, 65536)
            if chunk == b"":
                code = self.proc.wait()
                self.dead = True
                raise TransportError(
                    f"evaluator closed its output mid-request (exit code {code})"
                )
            self._buf += chunk

    def _read_response(self, req_id: int) -> float:
        # responses arrive in request order per worker; lines with an
        # unexpected id are logged and skipped
        deadline = time.monotonic() + self.timeout
        while True:
            line = self._read_line(deadline)
            if line is None:
                # stuck plugin: give up on it and fail this arch only; a
                # fresh worker replaces it on the next request
                self.dead = True
                self.proc.kill()
                raise EvaluationError(f"evaluation timed out after {self.timeout}s")
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                self.dead = True
                self.proc.kill()
                raise TransportError(f"non-JSON evaluator line: {line[:200]!r}")
            if not isinstance(obj, dict) or obj.get("id") != req_id:
                logger.warning("ignoring stray evaluator line: %r", line[:200])
                continue
            if "error" in obj:
                raise EvaluationError(str(obj["error"]))
            try:
                acc = float(obj["accuracy"])
            except (KeyError, TypeError, ValueError):
                self.dead = True
                self.proc.kill()
                raise TransportError(f"malformed evaluator response: {line[:200]!r}")
            return acc

    def close(self) -> None:
        with self.lock:
            if self.proc.poll() is None:
                try:
                    self.proc.stdin.close()
                except OSError:
                    pass
                try:
                    self.proc.wait(timeout=10)
                except subprocess.TimeoutExpired:
                    self.proc.kill()


class ExternalEvaluator:
    """Bridge to external worker processes speaking the line protocol.

    Each calling thread gets its own worker process, so the evaluator can
    sit behind ``parallel_window`` without multiplexing responses.
    """

    def __init__(self, command: str, timeout: float = 600.0):
        self.command = command
        self.timeout = timeout
        self._local = threading.local()
        self._workers: list[_Worker] = []
        self._workers_lock = threading.Lock()

    def _worker(self) -> _Worker:
        worker = getattr(self._local, "worker", None)
        if worker is None or worker.dead:
            worker = _Worker(self.command, self.timeout)
            self._local.worker = worker
            with self._workers_lock:
                self._workers.append(worker)
        return worker

    def __call__(self, arch: BlockArch) -> float:
        return self._worker().evaluate(arch)

    def close(self) -> None:
        with self._workers_lock:
            workers, self._workers = self._workers, []
        for worker in workers:
            worker.close()


class CachedEvaluator:
    """Memoizes an evaluator on the canonical serialization.

    Concurrent requests for the same architecture share one underlying
    evaluation (per-key future).  Failures are not cached: a retry after
    an EvaluationError reaches the underlying evaluator again.
    """

    def __init__(self, inner):
        self.inner = inner
        self._futures: dict[str, Future] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __call__(self, arch: BlockArch) -> float:
        key = canonical_serialize(arch)
        with self._lock:
            fut = self._futures.get(key)
            if fut is None:
                fut = Future()
                self._futures[key] = fut
                owner = True
                self.misses += 1
            else:
                owner = False
                self.hits += 1
        if owner:
            try:
                result = self.inner(arch)
            except BaseException as exc:
                with self._lock:
                    del self._futures[key]
                fut.set_exception(exc)
                raise
            fut.set_result(result)
            return result
        return fut.result()

    def close(self) -> None:
        self.inner.close()


@dataclass
class EvalOutcome:
    arch: BlockArch
    accuracy: float | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.accuracy is not None


def parallel_window(
    evaluator,
    archs: list[BlockArch],
    window: int = 1,
) -> list[EvalOutcome]:
    """Evaluate a batch with at most ``window`` concurrent requests.

    Results come back in completion order (for window=1 that is the input
    order, so single-window runs stay deterministic end to end).
    Per-architecture failures become error outcomes; a TransportError
    aborts the whole batch.
    """
    if window < 1:
        raise ValueError("window must be at least 1")

    def one(arch: BlockArch) -> EvalOutcome:
        try:
            return EvalOutcome(arch, evaluator(arch))
        except EvaluationError as exc:
            logger.warning("architecture skipped: %s", exc)
            return EvalOutcome(arch, None, error=str(exc))

    if window == 1:
        return [one(arch) for arch in archs]

    outcomes = []
    with ThreadPoolExecutor(max_workers=window) as pool:
        futures = [pool.submit(one, a) for a in archs]
        for fut in as_completed(futures):
            outcomes.append(fut.result())  # re-raises TransportError
    return outcomes
