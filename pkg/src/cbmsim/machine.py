"""Discrete-time chaotic Boltzmann machine core.

Each neuron carries an internal state X on a Q0.x_bits grid in [0, 1] and a
binary external state S.  Per step, X drifts by ``(1-2S) * 2^dt_exp * 2^E``
where E is the temperature-scaled local field from :mod:`cbmsim.arith`.
Hitting a boundary of [0, 1] clamps X there and flips S.  The local field
``Z = b + W @ S`` is owned by the state but maintained incrementally by the
scheduler; this module only reads it.

All state is integer, so trajectories are exactly reproducible from
(weights, seed, schedule).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .arith import (
    EXP_MAX,
    FRAC_BITS,
    MANT_BITS,
    Temperature,
    exp2_increment_units,
    exp2_increment_units_vec,
    scale_field,
    scale_field_vec,
)

X_BITS = 16
DT_EXP = -8


@dataclass(frozen=True)
class FxpParams:
    """Fixed-point widths of the datapath (artifact defaults, configurable)."""

    x_bits: int = X_BITS
    frac_bits: int = FRAC_BITS
    exp_max: int = EXP_MAX
    mant_bits: int = MANT_BITS

    @property
    def x_one(self) -> int:
        return 1 << self.x_bits


DEFAULT_FXP = FxpParams()


@dataclass
class WeightMatrix:
    """Symmetric quantized couplings plus biases and a connectivity mask.

    ``scale`` records the integer factor relating energy units back to the
    original objective (1 unless a problem mapping divided weights down).
    """

    n: int
    weights: np.ndarray
    biases: np.ndarray
    mask: np.ndarray
    weight_bits: int = 2
    scale: int = 1

    @classmethod
    def from_dense(cls, weights, biases=None, weight_bits=None, scale=1):
        w = np.asarray(weights, dtype=np.int64)
        n = w.shape[0]
        b = (
            np.zeros(n, dtype=np.int64)
            if biases is None
            else np.asarray(biases, dtype=np.int64)
        )
        mask = w != 0
        if weight_bits is None:
            wmax = int(np.abs(w).max()) if n else 0
            weight_bits = max(2, wmax.bit_length() + 1)
        m = cls(n, w, b, mask, weight_bits, scale)
        m.validate()
        return m

    def validate(self):
        w, n = self.weights, self.n
        if w.shape != (n, n) or self.biases.shape != (n,) or self.mask.shape != (n, n):
            raise ValueError("weight matrix dimensions inconsistent")
        if np.any(w != w.T):
            raise ValueError("weights must be symmetric")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-couplings must be zero")
        if np.any(w[~self.mask] != 0):
            raise ValueError("masked-out couplings must be exactly zero")
        limit = 1 << (self.weight_bits - 1)
        if np.any(np.abs(w) >= limit):
            raise ValueError(
                f"|weights| must be < 2^{self.weight_bits - 1} "
                f"for weight_bits={self.weight_bits}"
            )


@dataclass
class CbmState:
    """Internal states (grid units), binary states, local fields, step count."""

    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    step: int = 0

    @property
    def n(self) -> int:
        return len(self.x)

    def copy(self) -> "CbmState":
        return CbmState(self.x.copy(), self.s.copy(), self.z.copy(), self.step)


@dataclass(frozen=True)
class FlipEvent:
    neuron: int
    new_s: int
    step: int


@dataclass(frozen=True)
class TemperatureField:
    """Per-neuron temperature split, for heterogeneous (partitioned) machines."""

    t0_exp: np.ndarray
    alpha_code: np.ndarray

    @classmethod
    def from_scalar(cls, temp: Temperature, n: int) -> "TemperatureField":
        return cls(
            np.full(n, temp.t0_exp, dtype=np.int64),
            np.full(n, temp.alpha_code, dtype=np.int64),
        )


TempLike = Union[Temperature, TemperatureField]


def dense_fields(weights: WeightMatrix, s: np.ndarray) -> np.ndarray:
    """Z = b + W @ S recomputed from scratch (the scheduler's ground truth)."""
    return weights.biases + weights.weights @ s.astype(np.int64)


def init_state(
    n: int,
    seed: int,
    weights: Optional[WeightMatrix] = None,
    x_bits: int = X_BITS,
) -> CbmState:
    """Seeded initial state: X uniform on the grid over [0, 1), S a fair coin.

    S is decided by a second, independent draw exceeding 0.5 on the same
    grid.  Z is recomputed densely once if weights are supplied (startup is
    the only dense pass; afterwards flips maintain it).
    """
    if n < 1:
        raise ValueError("machine must have at least one neuron")
    rng = np.random.default_rng(seed)
    one = 1 << x_bits
    x = rng.integers(0, one, size=n, dtype=np.int64)
    s_draw = rng.integers(0, one, size=n, dtype=np.int64)
    s = (s_draw > (one >> 1)).astype(np.int8)
    if weights is not None:
        if weights.n != n:
            raise ValueError(f"weights are {weights.n}x{weights.n}, state has n={n}")
        z = dense_fields(weights, s)
    else:
        z = np.zeros(n, dtype=np.int64)
    return CbmState(x=x, s=s, z=z, step=0)


def neuron_step(
    state: CbmState,
    i: int,
    temp: Temperature,
    dt_exp: int = DT_EXP,
    fxp: FxpParams = DEFAULT_FXP,
    z_bias: int = 0,
) -> Optional[FlipEvent]:
    """Integrate one neuron against its current field; flip on boundary hit.

    Mutates X[i] only.  S is committed by the caller (the sweep), so the
    frozen-field synchronous semantics hold when looping over neurons.
    """
    if i >= state.n:
        raise IndexError(f"neuron {i} out of range for n={state.n}")
    s_i = int(state.s[i])
    e = scale_field(
        int(state.z[i]) + z_bias, s_i, temp, fxp.frac_bits, fxp.exp_max
    )
    inc = exp2_increment_units(e, dt_exp, fxp.x_bits, fxp.mant_bits)
    x_new = int(state.x[i]) + (1 - 2 * s_i) * inc
    one = fxp.x_one
    if s_i == 0 and x_new >= one:
        state.x[i] = one
        return FlipEvent(neuron=i, new_s=1, step=state.step)
    if s_i == 1 and x_new <= 0:
        state.x[i] = 0
        return FlipEvent(neuron=i, new_s=0, step=state.step)
    state.x[i] = x_new
    return None


def machine_step(
    state: CbmState,
    weights: WeightMatrix,
    temp: TempLike,
    dt_exp: int = DT_EXP,
    fxp: FxpParams = DEFAULT_FXP,
    input_bias: Optional[np.ndarray] = None,
) -> list[FlipEvent]:
    """One synchronous sweep: integrate all neurons against the step-entry Z.

    Commits all S flips at the end of the sweep and advances the step count.
    Does not touch Z; the scheduler applies the returned flips.
    ``input_bias`` is a transient additive term on Z (pulse input), never
    committed to the stored fields.
    """
    if weights.n != state.n:
        raise ValueError(f"weights are {weights.n}x{weights.n}, state has n={state.n}")
    t0, alpha = temp.t0_exp, temp.alpha_code  # scalar or per-neuron arrays
    z_eff = state.z if input_bias is None else state.z + input_bias
    raw = scale_field_vec(z_eff, state.s, t0, alpha, fxp.frac_bits, fxp.exp_max)
    inc = exp2_increment_units_vec(raw, dt_exp, fxp.x_bits, fxp.frac_bits, fxp.mant_bits)
    sigma = 1 - 2 * state.s.astype(np.int64)
    x_new = state.x + sigma * inc
    one = fxp.x_one
    up = (state.s == 0) & (x_new >= one)
    down = (state.s == 1) & (x_new <= 0)
    flipped = up | down
    np.clip(x_new, 0, one, out=x_new)
    state.x = x_new
    idx = np.nonzero(flipped)[0]
    events = [
        FlipEvent(neuron=int(i), new_s=1 - int(state.s[i]), step=state.step)
        for i in idx
    ]
    state.s[idx] ^= 1
    state.step += 1
    return events


def machine_step_sequential(
    state: CbmState,
    weights: WeightMatrix,
    temp: Temperature,
    dt_exp: int = DT_EXP,
    fxp: FxpParams = DEFAULT_FXP,
    counters=None,
) -> list[FlipEvent]:
    """In-order sweep variant: each flip commits and propagates Z immediately.

    Exposed for experiments only; no fidelity claim over the synchronous
    default.  Z stays exact throughout, so no separate apply pass is needed
    (accounting, if requested, happens here instead).
    """
    events = []
    for i in range(state.n):
        ev = neuron_step(state, i, temp, dt_exp, fxp)
        if ev is None:
            continue
        state.s[i] = ev.new_s
        d = 2 * ev.new_s - 1
        state.z += d * weights.weights[:, i]
        events.append(ev)
    if counters is not None:
        counters.steps += 1
        counters.flips_total += len(events)
        counters.macs_total += len(events) * state.n
        counters.macs_dense_equivalent += state.n * state.n
    state.step += 1
    return events


def energy(state: CbmState, weights: WeightMatrix) -> int:
    """E = -sum_{i<j} W_ij S_i S_j - sum_i b_i S_i, exact in integers."""
    if weights.n != state.n:
        raise ValueError("dimension mismatch")
    s = state.s.astype(np.int64)
    quad = int(s @ (weights.weights @ s)) // 2  # W symmetric, zero diagonal
    lin = int(weights.biases @ s)
    return -quad - lin
