"""Annealing front-end: temperature schedules and the solve loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .arith import Temperature
from .machine import (
    DEFAULT_FXP,
    DT_EXP,
    CbmState,
    FxpParams,
    WeightMatrix,
    dense_fields,
    energy,
    init_state,
    machine_step,
    machine_step_sequential,
)
from .maxcut import Graph, cut_value
from .scheduler import MacCounters, apply_flips


@dataclass
class Schedule:
    """Ordered (step_count, Temperature) segments, nonincreasing effective T."""

    segments: list[tuple[int, Temperature]]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule must have at least one segment")
        prev = None
        for count, temp in self.segments:
            if count < 1:
                raise ValueError("segment step counts must be >= 1")
            t = temp.effective_exact()
            if prev is not None and t > prev:
                raise ValueError("effective temperature must be nonincreasing")
            prev = t

    @property
    def total_steps(self) -> int:
        return sum(c for c, _ in self.segments)

    def temps_per_step(self):
        for count, temp in self.segments:
            for _ in range(count):
                yield temp


def make_schedule(t_start: float, t_end: float, steps: int) -> Schedule:
    """Geometric temperature ramp snapped to the representable T0/alpha grid.

    Produces one snapped temperature per step (endpoints inclusive), merged
    into segments of equal temperature; monotonicity is enforced after
    snapping.
    """
    if not (t_start >= t_end and t_end > 0):
        raise ValueError(f"need t_start >= t_end > 0, got {t_start}, {t_end}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1 or t_start == t_end:
        targets = [t_start] * steps
    else:
        ratio = (t_end / t_start) ** (1.0 / (steps - 1))
        targets = [t_start * ratio**i for i in range(steps)]
    segments: list[tuple[int, Temperature]] = []
    prev_exact = None
    for t in targets:
        temp = Temperature.from_real(t)
        if prev_exact is not None and temp.effective_exact() > prev_exact:
            temp = segments[-1][1]
        if segments and segments[-1][1] == temp:
            segments[-1] = (segments[-1][0] + 1, temp)
        else:
            segments.append((1, temp))
        prev_exact = temp.effective_exact()
    return Schedule(segments)


@dataclass
class TracePoint:
    step: int
    flip_count: int
    energy: int
    best_score: int  # running best of -energy * scale


@dataclass
class SaSolution:
    assignment: np.ndarray
    cut_value: Optional[int]
    best_energy: int
    best_step: int
    trace: list[TracePoint]
    counters: MacCounters
    counters_after_burnin: MacCounters
    seed: int
    n: int
    final_energy: int = 0
    initial_energy: int = 0

    @property
    def best_score(self) -> int:
        return -self.best_energy


def _flip_energy_delta(state: CbmState, weights: WeightMatrix, flips) -> int:
    """Exact energy change for a batch of simultaneous flips.

    Uses the step-entry fields (Z not yet patched) plus the pairwise
    correction between flipped neurons.
    """
    if not flips:
        return 0
    cols = np.fromiter((ev.neuron for ev in flips), dtype=np.int64, count=len(flips))
    d = np.fromiter((2 * ev.new_s - 1 for ev in flips), dtype=np.int64, count=len(flips))
    delta = -int(d @ state.z[cols])
    if len(flips) > 1:
        wsub = weights.weights[np.ix_(cols, cols)]
        delta -= int(d @ (wsub @ d)) // 2
    return delta


def anneal(
    weights: WeightMatrix,
    schedule: Schedule,
    seed: int,
    sample_every: int = 100,
    burnin_frac: float = 0.1,
    graph: Optional[Graph] = None,
    dt_exp: int = DT_EXP,
    fxp: FxpParams = DEFAULT_FXP,
    update_order: str = "synchronous",
) -> SaSolution:
    """Run the full schedule, tracking the best assignment seen by energy.

    Energy is maintained incrementally (exact integers) and cross-checked
    densely at the end.  With a max-cut mapping, -energy * scale is the cut,
    so best-by-energy is best-by-cut; the returned cut is recomputed
    independently from the assignment and verified against the tracked one.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    n = weights.n
    state = init_state(n, seed, weights, x_bits=fxp.x_bits)
    counters = MacCounters()
    total = schedule.total_steps
    burnin_steps = int(total * burnin_frac)
    burnin_snapshot = counters.copy()

    e = energy(state, weights)
    initial_energy = e
    best_e = e
    best_s = state.s.copy()
    best_step = 0
    trace: list[TracePoint] = []
    scale = weights.scale

    for temp in schedule.temps_per_step():
        if update_order == "sequential":
            flips = machine_step_sequential(state, weights, temp, dt_exp, fxp, counters)
            e = energy(state, weights)  # z propagated in-sweep; recompute
        else:
            flips = machine_step(state, weights, temp, dt_exp, fxp)
            e += _flip_energy_delta(state, weights, flips)
            apply_flips(state, weights, flips, counters)
        if e < best_e:
            best_e = e
            best_s = state.s.copy()
            best_step = state.step
        if state.step == burnin_steps:
            burnin_snapshot = counters.copy()
        if state.step % sample_every == 0 or state.step == total:
            trace.append(TracePoint(state.step, len(flips), e, -best_e * scale))

    e_dense = energy(state, weights)
    if e != e_dense:
        raise AssertionError(
            f"incremental energy {e} diverged from dense recomputation {e_dense}"
        )
    if not np.array_equal(state.z, dense_fields(weights, state.s)):
        raise AssertionError("incrementally maintained fields diverged from dense")

    cut: Optional[int] = None
    if graph is not None:
        cut = cut_value(graph, best_s)
        if cut != -best_e * scale:
            raise AssertionError(
                f"recomputed cut {cut} != tracked {-best_e * scale}"
            )
    return SaSolution(
        assignment=best_s,
        cut_value=cut,
        best_energy=best_e,
        best_step=best_step,
        trace=trace,
        counters=counters,
        counters_after_burnin=counters.since(burnin_snapshot),
        seed=seed,
        n=n,
        final_energy=e,
        initial_energy=initial_energy,
    )


def default_temp_range(weights: WeightMatrix) -> tuple[float, float]:
    """Heuristic schedule endpoints: start near the field scale, end cold.

    The field of a random assignment has standard deviation about
    sqrt(sum_j W_ij^2); starting T there keeps early exponents of order one,
    and ending well below one freezes the assignment.
    """
    w2 = (weights.weights.astype(np.float64) ** 2).sum(axis=1)
    sigma = float(np.sqrt(max(w2.mean(), 1.0)))
    t_start = 2.0 ** math.ceil(math.log2(max(sigma, 1.0)))
    return max(t_start, 1.0), 0.25


def solve_maxcut(
    graph: Graph,
    steps: int,
    seed: int,
    t_start: Optional[float] = None,
    t_end: Optional[float] = None,
    weight_bits: int = 2,
    sample_every: int = 100,
    replicas: int = 1,
    max_workers: Optional[int] = None,
    update_order: str = "synchronous",
) -> SaSolution:
    """Map, anneal (optionally over several seed replicas), return the best.

    Replica seeds are ``seed + r``; the merge picks the highest cut with the
    lowest seed as a deterministic tie-break.
    """
    from .maxcut import maxcut_to_cbm

    weights = maxcut_to_cbm(graph, weight_bits=weight_bits)
    auto_start, auto_end = default_temp_range(weights)
    schedule = make_schedule(
        t_start if t_start is not None else auto_start,
        t_end if t_end is not None else auto_end,
        steps,
    )

    def run_one(s: int) -> SaSolution:
        return anneal(
            weights,
            schedule,
            s,
            sample_every=sample_every,
            graph=graph,
            update_order=update_order,
        )

    if replicas <= 1:
        return run_one(seed)
    seeds = [seed + r for r in range(replicas)]
    if max_workers is None or max_workers <= 1:
        results = [run_one(s) for s in seeds]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run_one, seeds))
    results.sort(key=lambda r: (-(r.cut_value or 0), r.seed))
    return results[0]
