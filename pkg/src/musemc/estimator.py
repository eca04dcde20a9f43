"""Unbiased randomized-multilevel estimators for optimal-stopping values.

The target is U_T = sup over stopping rules of E[f(tau, X_tau)] for a
discrete-time process observed at stages 1..T.  A single replicate draws a
geometric level N, expands 2^N conditional continuations, and combines the
full average with the two half-sample averages into an antithetic
difference whose expectation telescopes across levels; dividing by the
geometric mass P(N) makes the replicate exactly unbiased with finite
expected cost.  Deeper stages recurse: each continuation sample is itself
an independent replicate of the next stage's value.

Within one replicate the tree is expanded level by level and reduced with
vectorized segment sums, so per-node Python overhead is paid per *level*,
not per sample.  Child blocks wider than ``_MAX_BATCH`` are accumulated in
even-sized chunks, keeping memory bounded by the cap rather than by 2^N.
All randomness comes from the caller's stream; one replicate consumes its
generator in a fixed deterministic order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .inference import BatchSummary, summarize
from .processes import ProcessSpec, TrajectoryHistory, compile_stepper, validate_history
from .rewards import RewardSpec, compile_reward
from .streams import RandomStream, as_generator

UNTRUNCATED = "untruncated"
TRUNCATED = "truncated"

_MAX_BATCH = 1 << 16  # cap on a vectorized child block; must stay even
_BIG_EXP = 16         # levels at or above this are reduced in chunks


def theoretical_rate(delta_mom: float) -> float:
    """Geometric rate with provably finite variance and expected cost.

    Valid for a reward with 2 + delta_mom finite moments, 0 < delta_mom < 1/4.
    The rate always lands in (1/2, 1): far enough above 1/2 that expected
    cost r/(2r-1) is finite, close enough that the variance series converges.
    """
    if not 0.0 < delta_mom < 0.25:
        raise ValueError("delta_mom must lie in (0, 1/4)")
    exponent = (2.0 + 9.0 * delta_mom / (80.0 + 40.0 * delta_mom)) / (2.0 + delta_mom / 10.0)
    return 1.0 - 2.0 ** (-exponent)


@dataclass(frozen=True)
class RateSchedule:
    """Per-stage geometric rates; ``rates[k]`` drives the level drawn at stage k.

    A schedule for horizon T has T-1 entries (no level is drawn at the last
    stage).  All entries must lie in (1/2, 1) so every level's expected cost
    and variance stay finite.
    """

    rates: tuple[float, ...]
    source: str = "manual"
    delta_mom: float | None = None

    def __post_init__(self):
        for r in self.rates:
            if not (0.5 < r < 1.0):
                raise ValueError(f"geometric rates must lie in (1/2, 1), got {r}")

    @property
    def horizon(self) -> int:
        return len(self.rates) + 1

    @classmethod
    def constant(cls, r: float, horizon: int) -> "RateSchedule":
        if horizon < 1:
            raise ValueError("horizon must be a positive integer")
        return cls(rates=(float(r),) * (horizon - 1))


def theoretical_rate_schedule(delta_mom: float, horizon: int) -> RateSchedule:
    """Stage-dependent schedule r_i = theoretical_rate(delta_mom * 10^(i+1-T)).

    Early stages see smaller moment budgets (their integrands stack more
    suprema), hence rates closer to 1/2.  At horizon 2 the schedule reduces
    to the single two-stage rate.
    """
    if horizon < 2:
        raise ValueError("a rate schedule needs horizon >= 2")
    rates = tuple(theoretical_rate(delta_mom * 10.0 ** (i + 1 - horizon)) for i in range(1, horizon))
    return RateSchedule(rates=rates, source="theoretical", delta_mom=delta_mom)


@dataclass(frozen=True)
class LevelPolicy:
    """How levels are drawn: the exact geometric law, or truncated to 0..max_level.

    Truncation renormalizes the mass on the kept levels; the estimator is
    then biased, and samples produced under it say so.
    """

    mode: str = UNTRUNCATED
    max_level: int | None = None

    def __post_init__(self):
        if self.mode not in (UNTRUNCATED, TRUNCATED):
            raise ValueError(f"unknown level policy mode {self.mode!r}")
        if self.mode == TRUNCATED:
            if self.max_level is None or self.max_level < 0:
                raise ValueError("truncated level policy requires max_level >= 0")
        elif self.max_level is not None:
            raise ValueError("max_level only applies to the truncated mode")

    @property
    def is_truncated(self) -> bool:
        return self.mode == TRUNCATED

    @classmethod
    def truncated(cls, max_level: int) -> "LevelPolicy":
        return cls(mode=TRUNCATED, max_level=int(max_level))


@dataclass(frozen=True)
class EstimatorSample:
    """One replicate: its value, the first-level draw, and the exact cost.

    ``cost`` counts base-process state draws, including the first one.
    ``biased`` marks samples produced under a truncated level policy.
    """

    value: float
    top_level: int
    cost: int
    biased: bool = False


def sample_geometric_level(r: float, stream) -> int:
    """Draw N with P(N = n) = r (1-r)^n on {0, 1, 2, ...}."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    gen = as_generator(stream)
    return int(gen.geometric(r)) - 1


def antithetic_delta(anchor: float, values) -> float:
    """Difference between the full-average and half-average stopping values.

    ``values`` must have power-of-two length 2^n.  For n = 0 the correction
    degenerates to max(anchor, values[0]); otherwise it is
    max(anchor, mean(values)) minus the average of the same expression over
    the odd- and even-indexed halves (1-based: children 1,3,... and 2,4,...).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a nonempty 1-d array")
    m = v.size
    if m & (m - 1):
        raise ValueError(f"values length must be a power of two, got {m}")
    anchor = float(anchor)
    if m == 1:
        return max(anchor, float(v[0]))
    h = m // 2
    return _delta_scalar(anchor, float(v[0::2].sum()) / h, float(v[1::2].sum()) / h)


def _delta_scalar(anchor, odd_avg, even_avg):
    # the full average is formed from the half-averages so that the
    # correction is *exactly* zero when both halves fall weakly on one
    # side of the anchor, not just zero up to rounding
    full = 0.5 * (odd_avg + even_avg)
    return max(anchor, full) - 0.5 * (max(anchor, odd_avg) + max(anchor, even_avg))


def _sample_levels(gen, r, count, policy):
    if not policy.is_truncated:
        return gen.geometric(r, size=count).astype(np.int64) - 1
    cap = policy.max_level
    # invert the renormalized geometric CDF on {0..cap}
    norm = -math.expm1((cap + 1) * math.log1p(-r))
    u = gen.random(count)
    lev = np.ceil(np.log1p(-u * norm) / math.log1p(-r)).astype(np.int64) - 1
    return np.clip(lev, 0, cap)


def _log_norm(r, policy):
    if policy.is_truncated:
        return math.log(-math.expm1((policy.max_level + 1) * math.log1p(-r)))
    return 0.0


def _pmf(r, levels, policy):
    """P(N = level) under the policy, evaluated in log space."""
    logp = math.log(r) + np.asarray(levels, dtype=float) * math.log1p(-r) - _log_norm(r, policy)
    return np.exp(logp)


def _pmf_scalar(r, level, policy):
    return math.exp(math.log(r) + level * math.log1p(-r) - _log_norm(r, policy))


@dataclass
class _Context:
    horizon: int
    rates: tuple[float, ...]
    policy: LevelPolicy
    step: Callable
    rew: Callable


def _compile_context(process: ProcessSpec, reward_spec: RewardSpec, schedule: RateSchedule, policy: LevelPolicy) -> _Context:
    if schedule.horizon != process.horizon:
        raise ValueError(
            f"rate schedule covers horizon {schedule.horizon} but the process has horizon {process.horizon}"
        )
    return _Context(
        horizon=process.horizon,
        rates=schedule.rates,
        policy=policy,
        step=compile_stepper(process),
        rew=compile_reward(reward_spec),
    )


def _run_batch(k, parents, count, gen, ctx):
    """``count`` independent stage-k replicates conditioned row-wise on ``parents``.

    Returns (values, costs, levels) arrays of length ``count``.  ``parents``
    is ``None`` only at stage 0.  Children of all rows are expanded together
    and reduced by segment, so the per-level work is a handful of vector ops.
    """
    x = ctx.step(k + 1, parents, count, gen)
    if k == ctx.horizon - 1:
        vals = np.asarray(ctx.rew(k + 1, x), dtype=float)
        return vals, np.ones(count, dtype=np.int64), np.zeros(count, dtype=np.int64)

    anchors = np.asarray(ctx.rew(k + 1, x), dtype=float)
    r = ctx.rates[k]
    levels = _sample_levels(gen, r, count, ctx.policy)
    values = np.empty(count)
    costs = np.empty(count, dtype=np.int64)

    big = levels >= _BIG_EXP
    small = np.nonzero(~big)[0]
    if small.size:
        m = np.int64(1) << levels[small]
        for a, b in _group_bounds(m, _MAX_BATCH):
            rows = small[a:b]
            _reduce_rows(k, x, anchors, levels, m[a:b], rows, values, costs, gen, ctx, r)
    for i in np.nonzero(big)[0]:
        values[i], costs[i] = _reduce_big_row(k, x[i], anchors[i], int(levels[i]), gen, ctx, r)
    return values, costs, levels


def _group_bounds(m, cap):
    """Split consecutive rows into groups whose child counts sum to <= cap."""
    total = int(m.sum())
    if total <= cap:
        return [(0, m.size)]
    bounds = []
    a = 0
    acc = 0
    for i, mi in enumerate(m):
        if acc + mi > cap and i > a:
            bounds.append((a, i))
            a = i
            acc = 0
        acc += int(mi)
    bounds.append((a, m.size))
    return bounds


def _reduce_rows(k, x, anchors, levels, m, rows, values, costs, gen, ctx, r):
    child_parents = np.repeat(x[rows], m, axis=0)
    cv, cc, _ = _run_batch(k + 1, child_parents, int(m.sum()), gen, ctx)

    g = rows.size
    seg = np.repeat(np.arange(g), m)
    starts = np.concatenate(([0], np.cumsum(m)[:-1]))
    pos = np.arange(cv.size, dtype=np.int64) - starts[seg]
    odd_mask = (pos & 1) == 0  # children 1, 3, 5, ... within each block
    tot = np.bincount(seg, weights=cv, minlength=g)
    odd = np.bincount(seg[odd_mask], weights=cv[odd_mask], minlength=g)
    even = tot - odd
    child_cost = np.bincount(seg, weights=cc, minlength=g)

    a = anchors[rows]
    delta = np.empty(g)
    single = m == 1
    if single.any():
        delta[single] = np.maximum(a[single], tot[single])
    multi = ~single
    if multi.any():
        h = 0.5 * m[multi].astype(float)
        am = a[multi]
        odd_avg = odd[multi] / h
        even_avg = even[multi] / h
        full = np.maximum(am, 0.5 * (odd_avg + even_avg))
        delta[multi] = full - 0.5 * (np.maximum(am, odd_avg) + np.maximum(am, even_avg))

    values[rows] = delta / _pmf(r, levels[rows], ctx.policy)
    costs[rows] = 1 + np.rint(child_cost).astype(np.int64)


def _reduce_big_row(k, xi, anchor, level, gen, ctx, r):
    """One row with 2^level children, accumulated in even-sized chunks."""
    m = 1 << level
    parent = xi[None, :]
    tot = odd = 0.0
    cost = 1
    remaining = m
    while remaining:
        c = min(remaining, _MAX_BATCH)
        cv, cc, _ = _run_batch(k + 1, np.broadcast_to(parent, (c, xi.size)), c, gen, ctx)
        tot += float(cv.sum())
        odd += float(cv[0::2].sum())  # chunks stay even, so parity survives chunking
        cost += int(cc.sum())
        remaining -= c
    h = m // 2
    delta = _delta_scalar(float(anchor), odd / h, (tot - odd) / h)
    return delta / _pmf_scalar(r, level, ctx.policy), cost


def two_stage_muse(process: ProcessSpec, reward_spec: RewardSpec, r: float, stream) -> EstimatorSample:
    """One unbiased replicate of the two-stage value U_2.

    Draws the level N first, then X_1, then the 2^N conditional second-stage
    samples, and forms the antithetic difference around max(f(X_1), .).
    """
    if process.horizon != 2:
        raise ValueError(f"two-stage estimation needs horizon 2, got {process.horizon}")
    if not 0.5 < r < 1.0:
        raise ValueError("r must lie in (1/2, 1)")
    gen = as_generator(stream)
    step = compile_stepper(process)
    rew = compile_reward(reward_spec)

    level = int(gen.geometric(r)) - 1
    x1 = step(1, None, 1, gen)
    anchor = float(rew(1, x1)[0])

    m = 1 << level
    tot = odd = 0.0
    remaining = m
    while remaining:
        c = min(remaining, _MAX_BATCH)
        leaves = step(2, np.broadcast_to(x1, (c, process.dimension)), c, gen)
        fv = np.asarray(rew(2, leaves), dtype=float)
        tot += float(fv.sum())
        odd += float(fv[0::2].sum())
        remaining -= c
    if m == 1:
        delta = max(anchor, tot)
    else:
        h = m // 2
        delta = _delta_scalar(anchor, odd / h, (tot - odd) / h)
    value = delta / _pmf_scalar(r, level, LevelPolicy())
    return EstimatorSample(value=float(value), top_level=level, cost=1 + m)


def multi_stage_muse(
    stage: int,
    history: TrajectoryHistory,
    process: ProcessSpec,
    reward_spec: RewardSpec,
    schedule: RateSchedule,
    policy: LevelPolicy = LevelPolicy(),
    stream=None,
) -> EstimatorSample:
    """One replicate of the tail value U_{T-k} given a realized stage-k history.

    Unbiased under the untruncated level policy; under a truncated policy the
    sample is flagged ``biased``.
    """
    if history.stage != stage:
        raise ValueError(f"history is at stage {history.stage}, expected {stage}")
    validate_history(process, history)
    if not 0 <= stage <= process.horizon - 1:
        raise ValueError(f"stage must lie in [0, {process.horizon - 1}], got {stage}")
    ctx = _compile_context(process, reward_spec, schedule, policy)
    gen = as_generator(stream)
    if stage == 0:
        parents = None
    else:
        parents = np.asarray(history.last(), dtype=float)[None, :]
    v, c, lv = _run_batch(stage, parents, 1, gen, ctx)
    return EstimatorSample(value=float(v[0]), top_level=int(lv[0]), cost=int(c[0]), biased=policy.is_truncated)


def estimate_utility(
    process: ProcessSpec,
    reward_spec: RewardSpec,
    schedule: RateSchedule,
    policy: LevelPolicy = LevelPolicy(),
    n_replicates: int = 1,
    stream=None,
) -> BatchSummary:
    """Average ``n_replicates`` independent full-horizon replicates.

    Replicate ``i`` uses the substream at path ``(i,)`` of ``stream``, the
    same keying the parallel harness uses, so sequential and parallel runs
    of one seed agree replicate for replicate.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be a positive integer")
    if isinstance(stream, (int, np.integer)):
        stream = RandomStream(int(stream))
    if not isinstance(stream, RandomStream):
        raise TypeError("estimate_utility needs a RandomStream (or int seed) to key replicates")
    ctx = _compile_context(process, reward_spec, schedule, policy)
    values = np.empty(n_replicates)
    costs = np.empty(n_replicates, dtype=np.int64)
    t0 = time.perf_counter()
    for i in range(n_replicates):
        v, c, _ = _run_batch(0, None, 1, stream.child(i).generator, ctx)
        values[i] = v[0]
        costs[i] = c[0]
    wall = time.perf_counter() - t0
    return summarize(values, costs, wall_time=wall)


class MuseReplicateTask:
    """Picklable ``(index, stream) -> EstimatorSample`` job for the harness."""

    def __init__(self, process, reward_spec, schedule, policy=LevelPolicy()):
        self.process = process
        self.reward_spec = reward_spec
        self.schedule = schedule
        self.policy = policy
        self._ctx = None

    def __call__(self, index, stream) -> EstimatorSample:
        if self._ctx is None:
            self._ctx = _compile_context(self.process, self.reward_spec, self.schedule, self.policy)
        v, c, lv = _run_batch(0, None, 1, stream.generator, self._ctx)
        return EstimatorSample(value=float(v[0]), top_level=int(lv[0]), cost=int(c[0]), biased=self.policy.is_truncated)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_ctx"] = None
        return state
