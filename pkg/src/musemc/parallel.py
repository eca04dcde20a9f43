"""Deterministic multi-process replication harness.

Replicate ``i`` always runs on the stream keyed ``(master_seed, (i,))``,
so the merged output is a function of the seed alone -- bit-identical for
any worker count or chunk size.  Work is dealt to a process pool in
contiguous chunks; a failing replicate aborts the run and reports its
index.
"""

from __future__ import annotations

import os
import time
import json
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from .streams import derive_substream

DEFAULT_CHUNK = 64
WORKERS_ENV = "MUSE_WORKERS"


class ReplicateError(RuntimeError):
    """A replicate task raised; carries the failing replicate index."""

    def __init__(self, index: int, detail: str = ""):
        self.index = int(index)
        self.detail = detail
        message = f"replicate {self.index} failed"
        if detail:
            message += f": {detail}"
        super().__init__(message)

    def __reduce__(self):
        return (ReplicateError, (self.index, self.detail))


@dataclass(frozen=True)
class SeedSpec:
    """Root seed of a run; replicate ``i`` draws from substream ``(i,)``."""

    master_seed: int

    def stream_for(self, index: int):
        return derive_substream(self.master_seed, (index,))


@dataclass
class RunManifest:
    """Audit record of one harness run, serializable to JSON."""

    master_seed: int
    total_replicates: int
    workers: int
    chunk_size: int
    wall_time: float = 0.0
    worker_wall_times: dict = field(default_factory=dict)
    worker_replicates: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "total_replicates": self.total_replicates,
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "wall_time_s": self.wall_time,
            "worker_wall_times": self.worker_wall_times,
            "worker_replicates": self.worker_replicates,
            "config": self.config,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: the MUSE_WORKERS environment variable wins, then the
    explicit request, then the machine's CPU count."""
    env = os.environ.get(WORKERS_ENV)
    if env is not None and env.strip():
        return max(1, int(env))
    if requested is not None:
        return max(1, int(requested))
    return os.cpu_count() or 1


def _run_chunk(task, master_seed, start, stop):
    t0 = time.perf_counter()
    out = []
    for i in range(start, stop):
        try:
            out.append(task(i, derive_substream(master_seed, (i,))))
        except Exception as exc:  # noqa: BLE001 - reported with the replicate index
            raise ReplicateError(i, f"{type(exc).__name__}: {exc}") from exc
    return start, out, os.getpid(), time.perf_counter() - t0


def _auto_chunk(n: int, workers: int) -> int:
    # small enough that workers stay busy, large enough to amortize dispatch
    return max(1, min(DEFAULT_CHUNK, -(-n // (4 * workers))))


def map_replicated(task, n_replicates: int, seed, workers: int | None = None, chunk_size: int | None = None, config: dict | None = None):
    """Run ``task(i, stream_i)`` for i in 0..n-1; returns (results, manifest).

    Results are ordered by replicate index regardless of completion order.
    ``task`` must be picklable when more than one worker is used.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be a positive integer")
    seed_spec = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    workers = resolve_workers(workers)
    chunk = int(chunk_size) if chunk_size else _auto_chunk(n_replicates, workers)
    if chunk < 1:
        raise ValueError("chunk_size must be a positive integer")

    starts = list(range(0, n_replicates, chunk))
    results: list = [None] * n_replicates
    filled = np.zeros(n_replicates, dtype=bool)
    worker_times: dict[int, float] = {}
    worker_counts: dict[int, int] = {}
    t0 = time.perf_counter()

    def absorb(start, out, pid, elapsed):
        stop = start + len(out)
        if filled[start:stop].any():
            raise RuntimeError(f"replicates {start}..{stop - 1} merged twice")
        results[start:stop] = out
        filled[start:stop] = True
        worker_times[pid] = worker_times.get(pid, 0.0) + elapsed
        worker_counts[pid] = worker_counts.get(pid, 0) + len(out)

    if workers == 1:
        for start in starts:
            absorb(*_run_chunk(task, seed_spec.master_seed, start, min(start + chunk, n_replicates)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_chunk, task, seed_spec.master_seed, start, min(start + chunk, n_replicates))
                for start in starts
            ]
            pending = set(futures)
            while pending:
                done, pending = wait(pending, return_when=FIRST_EXCEPTION)
                for fut in done:
                    exc = fut.exception()
                    if exc is not None:
                        for other in pending:
                            other.cancel()
                        raise exc
                    absorb(*fut.result())

    if not filled.all():
        missing = int(np.flatnonzero(~filled)[0])
        raise RuntimeError(f"replicate {missing} was never produced")

    pids = sorted(worker_times)
    manifest = RunManifest(
        master_seed=seed_spec.master_seed,
        total_replicates=n_replicates,
        workers=workers,
        chunk_size=chunk,
        wall_time=time.perf_counter() - t0,
        worker_wall_times={f"worker-{rank}": worker_times[pid] for rank, pid in enumerate(pids)},
        worker_replicates={f"worker-{rank}": worker_counts[pid] for rank, pid in enumerate(pids)},
        config=dict(config or {}),
    )
    if sum(manifest.worker_replicates.values()) != n_replicates:
        raise RuntimeError("per-worker replicate counts do not sum to the requested total")
    return results, manifest


def run_replicated(task, n_replicates: int, seed, workers: int | None = None, chunk_size: int | None = None, config: dict | None = None):
    """``map_replicated`` for estimator-style tasks; returns (samples, values, costs, manifest)."""
    samples, manifest = map_replicated(task, n_replicates, seed, workers=workers, chunk_size=chunk_size, config=config)
    values = np.array([s.value for s in samples], dtype=float)
    costs = np.array([s.cost for s in samples], dtype=np.int64)
    return samples, values, costs, manifest
