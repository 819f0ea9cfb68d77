"""Trial scheduling: per-trial seeding, deterministic parallel execution,
binomial intervals, and checkpoint/resume.

Trials are grouped into fixed-size batches by trial index.  Worker threads
may finish batches in any order, but batch aggregates are merged in batch
order, so the result is bit-identical for any worker count and across
checkpoint/resume boundaries.  Trial functions only release the GIL inside
the numba kernels, which is where virtually all the time goes.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import CheckpointError, DomainError, LppError
from .weights import mix64, GOLDEN_GAMMA

_U64 = (1 << 64) - 1

CHECKPOINT_VERSION = 1


def trial_seed(base_seed: int, t: int) -> int:
    """Field seed for trial t: a stateless mix, independent of scheduling."""
    h = mix64((base_seed + GOLDEN_GAMMA) & _U64)
    return mix64(((h ^ (t & _U64)) + GOLDEN_GAMMA) & _U64)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clipped to [0, 1]."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes {successes} outside [0, {trials}]")
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    p = successes / trials
    z2n = z * z / trials
    center = (p + z2n / 2.0) / (1.0 + z2n)
    half = z * ((p * (1.0 - p) / trials + z2n / (4.0 * trials)) ** 0.5) / (1.0 + z2n)
    # rounding must not push p_hat outside its own interval
    lo = min(max(0.0, center - half), p)
    hi = max(min(1.0, center + half), p)
    return (lo, hi)


def merge_aggregates(a: dict, b: dict) -> dict:
    """Key-wise sum; list values are added elementwise.

    Missing keys count as zero, so any record dict is also an aggregate.
    """
    out = dict(a)
    for k, v in b.items():
        if k not in out:
            out[k] = list(v) if isinstance(v, list) else v
        elif isinstance(v, list):
            out[k] = [x + y for x, y in zip(out[k], v)]
        else:
            out[k] = out[k] + v
    return out


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON of a config dict."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class TrialPlan:
    base_seed: int
    total_trials: int
    batch_size: int = 64
    completed: int = 0

    def __post_init__(self):
        if self.total_trials < 0:
            raise DomainError("total_trials must be >= 0")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")

    def batches(self):
        t = self.completed
        while t < self.total_trials:
            hi = min(t + self.batch_size, self.total_trials)
            yield (t, hi)
            t = hi


@dataclass
class Checkpoint:
    """Where and how often to persist partial aggregates."""

    path: str
    every_batches: int = 16
    cfg_hash: str = ""


def _write_checkpoint(ck: Checkpoint, completed: int, aggregate: dict) -> None:
    blob = json.dumps(
        {
            "version": CHECKPOINT_VERSION,
            "config_hash": ck.cfg_hash,
            "completed_trials": completed,
            "aggregate": aggregate,
        }
    )
    tmp = ck.path + ".tmp"
    with open(tmp, "w") as f:
        f.write(blob)
    os.replace(tmp, ck.path)


def _load_checkpoint(ck: Checkpoint) -> tuple[int, dict] | None:
    if not os.path.exists(ck.path):
        return None
    with open(ck.path) as f:
        data = json.load(f)
    if data.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unknown checkpoint version in {ck.path}")
    if data.get("config_hash") != ck.cfg_hash:
        raise CheckpointError(
            f"checkpoint {ck.path} belongs to a different configuration"
        )
    return int(data["completed_trials"]), data["aggregate"]


def run_trials(plan: TrialPlan, trial_fn, workers: int = 1, *,
               checkpoint: Checkpoint | None = None,
               progress: bool = False) -> dict:
    """Run all remaining trials and fold their records into one aggregate.

    trial_fn maps a trial index to a record dict; records are merged with
    merge_aggregates in strict trial order.  The result is independent of
    the worker count and of any checkpoint/resume interruption.
    """
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")

    aggregate: dict = {}
    if checkpoint is not None:
        resumed = _load_checkpoint(checkpoint)
        if resumed is not None:
            done, aggregate = resumed
            if done % plan.batch_size != 0 and done != plan.total_trials:
                raise CheckpointError(
                    f"checkpoint trial count {done} is not a batch boundary"
                )
            plan.completed = done

    def run_batch(span):
        t0, t1 = span
        agg: dict = {}
        for t in range(t0, t1):
            try:
                rec = trial_fn(t)
            except LppError as e:
                raise type(e)(
                    f"trial {t} (field seed {trial_seed(plan.base_seed, t)}): {e}"
                ) from e
            agg = merge_aggregates(agg, rec)
        return agg

    spans = list(plan.batches())
    t_start = time.perf_counter()
    done_batches = 0

    def note_progress():
        if progress:
            frac = plan.completed / plan.total_trials if plan.total_trials else 1.0
            sys.stderr.write(
                f"\r{plan.completed}/{plan.total_trials} trials "
                f"({frac:6.1%}, {time.perf_counter() - t_start:.1f}s)"
            )
            sys.stderr.flush()

    if workers == 1:
        for span in spans:
            aggregate = merge_aggregates(aggregate, run_batch(span))
            plan.completed = span[1]
            done_batches += 1
            if checkpoint and done_batches % checkpoint.every_batches == 0:
                _write_checkpoint(checkpoint, plan.completed, aggregate)
            note_progress()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_batch, span) for span in spans]
            for fut, span in zip(futures, spans):
                aggregate = merge_aggregates(aggregate, fut.result())
                plan.completed = span[1]
                done_batches += 1
                if checkpoint and done_batches % checkpoint.every_batches == 0:
                    _write_checkpoint(checkpoint, plan.completed, aggregate)
                note_progress()

    if progress and plan.total_trials:
        sys.stderr.write("\n")
    if checkpoint is not None:
        _write_checkpoint(checkpoint, plan.completed, aggregate)
    return aggregate
