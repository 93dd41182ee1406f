"""Reservoir computing front-end.

Inputs are pulse-width encoded: an 8-bit value u becomes a 256-step binary
pulse with u leading ones, injected as a transient additive field term
during integration.  Per input frame the machine runs frame_steps steps and
the feature is each neuron's time-averaged binary state over the frame —
an exact rational k/frame_steps, accumulated from flip events alone so the
event-driven output path and a dense per-step sum agree bit for bit.
Only a linear ridge readout on those features is ever trained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .arith import Temperature
from .machine import (
    DEFAULT_FXP,
    DT_EXP,
    FxpParams,
    WeightMatrix,
    init_state,
    machine_step,
)
from .scheduler import MacCounters, apply_flips
from .util import derive_seed


@dataclass
class RcConfig:
    reservoir_size: int
    weights: WeightMatrix
    input_weights: np.ndarray
    temp: Temperature
    frame_steps: int = 256
    washout_frames: int = 16
    dt_exp: int = DT_EXP
    fxp: FxpParams = DEFAULT_FXP

    def __post_init__(self):
        if self.reservoir_size < 1:
            raise ValueError("reservoir_size must be >= 1")
        k = self.frame_steps
        if k < 2 or (k & (k - 1)) != 0:
            raise ValueError("frame_steps must be a power of two >= 2")
        win = np.asarray(self.input_weights, dtype=np.int64)
        if win.shape != (self.reservoir_size,):
            raise ValueError(
                f"input weights shape {win.shape} does not match "
                f"reservoir size {self.reservoir_size}"
            )
        self.input_weights = win


def random_symmetric_weights(
    n: int, seed: int, weight_bits: int = 4, density: float = 1.0
) -> WeightMatrix:
    """Dense symmetric random couplings, uniform over the signed range."""
    rng = np.random.default_rng(seed)
    limit = (1 << (weight_bits - 1)) - 1
    w = rng.integers(-limit, limit + 1, size=(n, n), dtype=np.int64)
    w = np.triu(w, k=1)
    if density < 1.0:
        keep = rng.random((n, n)) < density
        w *= np.triu(keep, k=1)
    w = w + w.T
    return WeightMatrix(
        n=n,
        weights=w,
        biases=np.zeros(n, dtype=np.int64),
        mask=w != 0,
        weight_bits=weight_bits,
    )


def make_rc_config(
    reservoir_size: int,
    seed: int,
    frame_steps: int = 256,
    weight_bits: int = 4,
    density: float = 1.0,
    win_range: int = 8,
    t0_exp: int = 0,
    alpha_code: int = 32,
    washout_frames: int = 16,
) -> RcConfig:
    """Generate reservoir weights and input weights from derived sub-seeds."""
    weights = random_symmetric_weights(
        reservoir_size, derive_seed(seed, 0), weight_bits, density
    )
    rng = np.random.default_rng(derive_seed(seed, 1))
    win = rng.integers(-win_range, win_range + 1, size=reservoir_size, dtype=np.int64)
    return RcConfig(
        reservoir_size=reservoir_size,
        weights=weights,
        input_weights=win,
        temp=Temperature(t0_exp, alpha_code),
        frame_steps=frame_steps,
        washout_frames=washout_frames,
    )


def pwm_encode(u: int, frame_steps: int = 256) -> np.ndarray:
    """Pulse-width encoding: ones for the first u steps of the frame."""
    u = int(u)
    if not (0 <= u <= frame_steps):
        raise ValueError(f"input {u} outside [0, {frame_steps}]")
    pulse = np.zeros(frame_steps, dtype=np.uint8)
    pulse[:u] = 1
    return pulse


def run_reservoir(
    config: RcConfig,
    inputs,
    seed: int,
    counters: Optional[MacCounters] = None,
) -> np.ndarray:
    """Drive the reservoir with a sequence of encoded inputs.

    Returns the feature matrix: one row per post-washout frame, columns are
    the per-neuron frame averages of S plus a trailing constant 1.  Features
    are accumulated event-driven (time-weighted flips), and the pulse-input
    adds are charged to the MAC counters' input bucket.
    """
    inputs = np.asarray(inputs, dtype=np.int64)
    if inputs.ndim != 1 or len(inputs) == 0:
        raise ValueError("inputs must be a nonempty 1-D sequence")
    n = config.reservoir_size
    t = config.frame_steps
    if np.any((inputs < 0) | (inputs > t)):
        raise ValueError(f"inputs must lie in [0, {t}]")
    win = config.input_weights
    nnz_win = int(np.count_nonzero(win))
    state = init_state(n, seed, config.weights, x_bits=config.fxp.x_bits)
    rows = np.empty((len(inputs), n), dtype=np.int64)
    acc = np.zeros(n, dtype=np.int64)
    last = np.zeros(n, dtype=np.int64)
    for fi, u in enumerate(inputs):
        acc[:] = 0
        last[:] = 0
        for tau in range(t):
            bias = win if tau < u else None
            flips = machine_step(
                state, config.weights, config.temp, config.dt_exp, config.fxp,
                input_bias=bias,
            )
            apply_flips(state, config.weights, flips, counters)
            if counters is not None and tau < u:
                counters.macs_input_total += nnz_win
            if flips:
                cols = np.fromiter(
                    (ev.neuron for ev in flips), dtype=np.int64, count=len(flips)
                )
                old = np.fromiter(
                    (1 - ev.new_s for ev in flips), dtype=np.int64, count=len(flips)
                )
                acc[cols] += old * (tau + 1 - last[cols])
                last[cols] = tau + 1
                if counters is not None:
                    counters.macs_output_total += len(flips)
        acc += state.s.astype(np.int64) * (t - last)
        rows[fi] = acc
    feats = rows[config.washout_frames :].astype(np.float64) / t
    return np.hstack([feats, np.ones((feats.shape[0], 1))])


@dataclass
class Readout:
    weights: np.ndarray
    lam: float
    residual: float

    def predict(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights


def train_readout(features: np.ndarray, targets, lam: float) -> Readout:
    """Closed-form ridge regression W = (F'F + lam I)^-1 F'Y."""
    f = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    if f.shape[0] != y.shape[0]:
        raise ValueError(f"row mismatch: features {f.shape[0]}, targets {y.shape[0]}")
    if not (lam > 0):
        raise ValueError("ridge parameter must be positive")
    if not (np.isfinite(f).all() and np.isfinite(y).all()):
        raise ValueError("features/targets must be finite")
    gram = f.T @ f + lam * np.eye(f.shape[1])
    w = np.linalg.solve(gram, f.T @ y)
    residual = float(((f @ w - y) ** 2).sum())
    if squeeze:
        w = w[:, 0]
    return Readout(weights=w, lam=lam, residual=residual)


def metric_nrmse(pred, target) -> float:
    """Root-mean-square error normalized by the target standard deviation."""
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if p.shape != y.shape or len(y) == 0:
        raise ValueError("pred/target must be equal-length and nonempty")
    var = float(y.var())
    if var <= 0:
        raise ValueError("target variance must be positive")
    return math.sqrt(float(((p - y) ** 2).mean()) / var)


def narma10_gen(length: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Tenth-order NARMA sequence with u_t ~ U[0, 0.5] and zero history.

    y[t+1] = 0.3 y[t] + 0.05 y[t] * sum(y[t-9..t]) + 1.5 u[t-9] u[t] + 0.1
    """
    if length <= 10:
        raise ValueError("length must exceed the recurrence order (10)")
    rng = np.random.default_rng(seed)
    u = rng.random(length) * 0.5
    y = np.zeros(length, dtype=np.float64)
    for t in range(length - 1):
        window = y[max(t - 9, 0) : t + 1].sum()
        u_old = u[t - 9] if t >= 9 else 0.0
        y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * window + 1.5 * u_old * u[t] + 0.1
    return u, y


def _pearson_r(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


DEFAULT_LAM_GRID = tuple(10.0**k for k in range(-6, 1))


def _select_ridge(
    f_train, y_train, f_val, y_val, lam_grid, score
) -> tuple[float, float]:
    """Pick the grid lambda with the best validation score (score, lam)."""
    best_lam, best_score = None, None
    for lam in lam_grid:
        r = train_readout(f_train, y_train, lam)
        s = score(r.predict(f_val), y_val)
        if best_score is None or s > best_score:
            best_lam, best_score = lam, s
    return best_lam, best_score


@dataclass
class McResult:
    mc: float
    r2: np.ndarray  # per-delay squared test correlations, index 0 = delay 1
    lams: np.ndarray
    task: str
    counters: MacCounters


def memory_stream(length: int, seed: int) -> np.ndarray:
    """Fair binary input stream for the memory benchmarks."""
    return np.random.default_rng(seed).integers(0, 2, size=length, dtype=np.int64)


def memory_targets(u: np.ndarray, kind: str, max_delay: int) -> np.ndarray:
    """Per-delay targets: delayed recall (stm) or windowed parity (pc).

    Row t, column k-1 holds u[t-k] for stm, or parity of u[t-k..t] for pc;
    positions with t < k are zero (callers slice them away via washout).
    """
    if kind not in ("stm", "pc"):
        raise ValueError(f"unknown memory task {kind!r}")
    n = len(u)
    out = np.zeros((n, max_delay), dtype=np.float64)
    if kind == "stm":
        for k in range(1, max_delay + 1):
            out[k:, k - 1] = u[:-k]
    else:
        # parity over the k+1 inputs u[t-k..t], via prefix xors
        prefix = np.bitwise_xor.accumulate(u)
        for k in range(1, max_delay + 1):
            if n > k + 1:
                out[k + 1 :, k - 1] = prefix[k + 1 :] ^ prefix[: -(k + 1)]
            out[k, k - 1] = prefix[k]  # window starting at index 0
    return out


def metric_memory_capacity(
    task: str,
    config: RcConfig,
    max_delay: int,
    seed: int,
    train_frames: int = 800,
    val_frames: int = 200,
    test_frames: int = 500,
    lam_grid=DEFAULT_LAM_GRID,
    counters: Optional[MacCounters] = None,
) -> McResult:
    """Memory capacity: sum over delays of squared test correlations.

    One reservoir run serves every delay; readouts are independent ridge
    problems sharing the feature matrix, with the ridge parameter picked per
    delay on the validation block (splits are disjoint in time).
    """
    if max_delay < 1:
        raise ValueError("max_delay must be >= 1")
    if config.washout_frames < max_delay:
        raise ValueError("washout must cover max_delay so every target exists")
    total = config.washout_frames + train_frames + val_frames + test_frames
    u = memory_stream(total, derive_seed(seed, 101))
    feats = run_reservoir(config, u * 255, derive_seed(seed, 102), counters=counters)
    targets = memory_targets(u, task, max_delay)[config.washout_frames :]
    if len(feats) < train_frames + val_frames + test_frames:
        raise ValueError("insufficient frames for the requested split")
    tr = slice(0, train_frames)
    va = slice(train_frames, train_frames + val_frames)
    te = slice(train_frames + val_frames, train_frames + val_frames + test_frames)
    r2 = np.zeros(max_delay)
    lams = np.zeros(max_delay)
    fits = {lam: train_readout(feats[tr], targets[tr], lam) for lam in lam_grid}
    for k in range(max_delay):
        best_lam, best_r = None, -1.0
        for lam in lam_grid:
            pred = feats[va] @ fits[lam].weights[:, k]
            r = abs(_pearson_r(pred, targets[va, k]))
            if r > best_r:
                best_lam, best_r = lam, r
        pred = feats[te] @ fits[best_lam].weights[:, k]
        r = _pearson_r(pred, targets[te, k])
        r2[k] = r * r
        lams[k] = best_lam
    return McResult(
        mc=float(r2.sum()),
        r2=r2,
        lams=lams,
        task=task,
        counters=counters if counters is not None else MacCounters(),
    )
