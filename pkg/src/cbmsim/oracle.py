"""Independent references for testing: dense simulation and brute force.

Nothing here is used by the engine.  The dense simulator recomputes fields
from scratch every step and evaluates the exponential on the fly, so it
shares no incremental bookkeeping (and, in "real" mode, no precomputed
table) with the main path it checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arith import ALPHA_DENOM_BITS, Temperature
from .machine import DEFAULT_FXP, DT_EXP, FxpParams, WeightMatrix, init_state
from .maxcut import Graph, cut_value
from .sa import Schedule

MAX_DENSE_N = 4096


@dataclass
class DenseTrace:
    """Per-step snapshots from the dense reference run."""

    x: list[np.ndarray] = field(default_factory=list)
    s: list[np.ndarray] = field(default_factory=list)
    z: list[np.ndarray] = field(default_factory=list)
    flips: list[list[int]] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.s)


def _real_mantissas(f: np.ndarray, frac_bits: int, mant_bits: int) -> np.ndarray:
    # Fresh float64 evaluation of 2^(f / 2^frac_bits), quantized to the
    # mantissa grid.  Independent of the engine's cached table.
    return np.rint(
        np.exp2(f.astype(np.float64) / (1 << frac_bits)) * (1 << mant_bits)
    ).astype(np.int64)


def dense_simulate(
    weights: WeightMatrix,
    schedule: Schedule,
    seed: int,
    steps: int | None = None,
    profile: str = "mirror",
    dt_exp: int = DT_EXP,
    fxp: FxpParams = DEFAULT_FXP,
    record: bool = True,
) -> DenseTrace:
    """Reference trajectory with Z recomputed densely every step.

    profile="mirror" uses the same cached mantissa table as the engine;
    profile="real" recomputes the base-2 exponential in float64 each step and
    quantizes it to the same output grid.  Both run the update rule on the
    exact fixed-point grid, so a correct engine matches them bit for bit.
    """
    n = weights.n
    if n > MAX_DENSE_N:
        raise ValueError(f"dense reference capped at N={MAX_DENSE_N}")
    if profile not in ("mirror", "real"):
        raise ValueError(f"unknown profile {profile!r}")
    from .arith import exp2_table

    state = init_state(n, seed, weights, x_bits=fxp.x_bits)
    one = fxp.x_one
    limit = fxp.exp_max << fxp.frac_bits
    fmask = (1 << fxp.frac_bits) - 1
    table = exp2_table(fxp.frac_bits, fxp.mant_bits)
    trace = DenseTrace()
    temps = schedule.temps_per_step()
    total = schedule.total_steps if steps is None else min(steps, schedule.total_steps)
    for _ in range(total):
        temp = next(temps)
        z = weights.biases + weights.weights @ state.s.astype(np.int64)
        sigma = 1 - 2 * state.s.astype(np.int64)
        p = sigma * z * temp.alpha_code
        sh = temp.t0_exp + ALPHA_DENOM_BITS - fxp.frac_bits
        raw = p >> sh if sh >= 0 else p << -sh
        raw = np.clip(raw, -limit, limit)
        k = raw >> fxp.frac_bits
        f = raw & fmask
        if profile == "mirror":
            mant = table[f]
        else:
            mant = _real_mantissas(f, fxp.frac_bits, fxp.mant_bits)
        shift = k + (dt_exp + fxp.x_bits - fxp.mant_bits)
        inc = np.where(shift >= 0, mant << np.maximum(shift, 0), mant >> np.maximum(-shift, 0))
        x_new = state.x + sigma * inc
        up = (state.s == 0) & (x_new >= one)
        down = (state.s == 1) & (x_new <= 0)
        flipped = np.nonzero(up | down)[0]
        state.x = np.clip(x_new, 0, one)
        state.s[flipped] ^= 1
        state.z = weights.biases + weights.weights @ state.s.astype(np.int64)
        state.step += 1
        if record:
            trace.x.append(state.x.copy())
            trace.s.append(state.s.copy())
            trace.z.append(state.z.copy())
        trace.flips.append([int(i) for i in flipped])
    return trace


def anneal_float_reference(
    weights: WeightMatrix,
    temps: list[float],
    seed: int,
    dt_exp: int = DT_EXP,
    x_bits: int = 16,
    exp_max: int = 16,
    graph: Graph | None = None,
) -> tuple[np.ndarray, int]:
    """High-precision annealer: real-valued scaling and exponential.

    Same update structure and seeding as the engine, but X is float64 in
    [0, 1], the temperature is used unsnapped, and 2^(sigma * z / T) is
    evaluated in full precision.  Serves as the no-quantization baseline
    when measuring what the 6-bit alpha datapath costs in solution quality.
    Returns (best assignment, best score) where score is the cut if a graph
    is given, else -energy.
    """
    n = weights.n
    state = init_state(n, seed, weights, x_bits=x_bits)
    x = state.x.astype(np.float64) / (1 << x_bits)
    s = state.s.copy()
    w = weights.weights.astype(np.float64)
    b = weights.biases.astype(np.float64)
    dt = 2.0**dt_exp

    def score(assign) -> int:
        if graph is not None:
            return cut_value(graph, assign)
        sv = assign.astype(np.int64)
        quad = int(sv @ (weights.weights @ sv)) // 2
        return quad + int(weights.biases @ sv)  # -energy

    best = score(s)
    best_s = s.copy()
    for t in temps:
        z = b + w @ s
        sigma = 1.0 - 2.0 * s
        e = np.clip(sigma * z / t, -exp_max, exp_max)
        x = x + sigma * dt * np.exp2(e)
        up = (s == 0) & (x >= 1.0)
        down = (s == 1) & (x <= 0.0)
        x = np.clip(x, 0.0, 1.0)
        s = s.copy()
        s[up | down] ^= 1
        sc = score(s)
        if sc > best:
            best = sc
            best_s = s.copy()
    return best_s, best


def brute_force_maxcut(graph: Graph, chunk_bits: int = 20) -> tuple[int, np.ndarray]:
    """Exhaustive max-cut by enumeration, vertex 0 fixed by symmetry.

    Works up to n = 24 (2^23 assignments, evaluated in chunks).
    """
    n = graph.n
    if n > 24:
        raise ValueError("brute force capped at n=24")
    if n < 1:
        raise ValueError("empty graph")
    total = 1 << max(n - 1, 0)
    best_val = None
    best_code = 0
    for start in range(0, total, 1 << chunk_bits):
        stop = min(start + (1 << chunk_bits), total)
        codes = np.arange(start, stop, dtype=np.int64)
        cuts = np.zeros(stop - start, dtype=np.int64)
        for i, j, w in graph.edges:
            # vertex 0 is fixed at side 0; bit k-1 encodes vertex k
            bi = (codes >> (i - 1)) & 1 if i > 0 else np.zeros_like(codes)
            bj = (codes >> (j - 1)) & 1
            cuts += w * (bi != bj)
        k = int(np.argmax(cuts))
        if best_val is None or cuts[k] > best_val:
            best_val = int(cuts[k])
            best_code = int(codes[k])
    assignment = np.zeros(n, dtype=np.int8)
    for v in range(1, n):
        assignment[v] = (best_code >> (v - 1)) & 1
    return best_val, assignment
