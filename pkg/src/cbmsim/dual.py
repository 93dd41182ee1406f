"""Partitioned execution: disjoint annealing and reservoir clusters on one machine.

Clusters are contiguous neuron ranges with all cross-cluster couplings
exactly zero (mask false), each seeded from its own derived stream.  One
global step advances every cluster; annealing clusters follow their own
temperature schedules while reservoir clusters hold a fixed temperature.
Because the coupling blocks are disjoint and integer arithmetic is exact,
every cluster's trajectory is bit-identical to running it standalone with
the same derived seed — which is what the isolation tests assert.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .arith import Temperature
from .machine import (
    DEFAULT_FXP,
    CbmState,
    TemperatureField,
    WeightMatrix,
    dense_fields,
    init_state,
    machine_step,
)
from .maxcut import Graph, cut_value
from .reservoir import RcConfig
from .sa import SaSolution, Schedule, TracePoint, _flip_energy_delta
from .scheduler import MacCounters, apply_flips
from .util import derive_seed

SA = "sa"
RC = "rc"


@dataclass(frozen=True)
class Cluster:
    kind: str
    start: int
    size: int

    @property
    def stop(self) -> int:
        return self.start + self.size


@dataclass
class Partition:
    clusters: list[Cluster]
    n_total: int

    def __post_init__(self):
        used = np.zeros(self.n_total, dtype=bool)
        for c in self.clusters:
            if c.kind not in (SA, RC):
                raise ValueError(f"unknown cluster kind {c.kind!r}")
            if c.size < 1 or c.start < 0 or c.stop > self.n_total:
                raise ValueError(f"cluster range [{c.start}, {c.stop}) out of bounds")
            if used[c.start : c.stop].any():
                raise ValueError("clusters overlap")
            used[c.start : c.stop] = True

    @classmethod
    def from_sizes(cls, kinds_sizes: list[tuple[str, int]]) -> "Partition":
        clusters, start = [], 0
        for kind, size in kinds_sizes:
            clusters.append(Cluster(kind, start, size))
            start += size
        return cls(clusters, start)


def build_masked_weights(
    partition: Partition, sources: list[WeightMatrix]
) -> WeightMatrix:
    """Block-diagonal weights: intra-cluster blocks from the sources,
    cross-cluster entries exactly zero and masked out."""
    if len(sources) != len(partition.clusters):
        raise ValueError("one weight source required per cluster")
    n = partition.n_total
    w = np.zeros((n, n), dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)
    mask = np.zeros((n, n), dtype=bool)
    for cluster, src in zip(partition.clusters, sources):
        if src.n != cluster.size:
            raise ValueError(
                f"cluster of size {cluster.size} given {src.n}x{src.n} weights"
            )
        sl = slice(cluster.start, cluster.stop)
        w[sl, sl] = src.weights
        b[sl] = src.biases
        mask[sl, sl] = src.mask
    bits = max((src.weight_bits for src in sources), default=2)
    return WeightMatrix(n=n, weights=w, biases=b, mask=mask, weight_bits=bits)


@dataclass
class SaClusterSpec:
    weights: WeightMatrix
    schedule: Schedule
    graph: Optional[Graph] = None
    sample_every: int = 100
    burnin_frac: float = 0.1

    @property
    def kind(self) -> str:
        return SA

    @property
    def size(self) -> int:
        return self.weights.n


@dataclass
class RcClusterSpec:
    config: RcConfig
    inputs: np.ndarray

    @property
    def kind(self) -> str:
        return RC

    @property
    def size(self) -> int:
        return self.config.reservoir_size


ClusterSpec = Union[SaClusterSpec, RcClusterSpec]


@dataclass
class DualResult:
    partition: Partition
    results: list  # SaSolution per SA cluster, feature matrix per RC cluster
    cluster_counters: list[MacCounters]
    counters: MacCounters  # shared, whole-machine accounting
    seed: int


class _SaTracker:
    def __init__(self, spec: SaClusterSpec, cluster: Cluster, state: CbmState, seed: int):
        self.spec = spec
        self.cluster = cluster
        self.seed = seed
        self.temps = spec.schedule.temps_per_step()
        self.total = spec.schedule.total_steps
        self.burnin_steps = int(self.total * spec.burnin_frac)
        self.counters = MacCounters()
        self.burnin_snapshot = self.counters.copy()
        sl = slice(cluster.start, cluster.stop)
        s = state.s[sl].astype(np.int64)
        quad = int(s @ (spec.weights.weights @ s)) // 2
        self.e = -quad - int(spec.weights.biases @ s)
        self.initial_energy = self.e
        self.best_e = self.e
        self.best_s = state.s[sl].copy()
        self.best_step = 0
        self.trace: list[TracePoint] = []
        self.current_temp = None

    def next_temp(self, step_done: int):
        if step_done < self.total:
            self.current_temp = next(self.temps)
        return self.current_temp

    def after_step(self, state: CbmState, flips, step: int):
        if step > self.total:
            return
        c = self.cluster
        mine = [f for f in flips if c.start <= f.neuron < c.stop]
        self.e += _flip_energy_delta(state, state_weights_view(self.spec), mine)
        self.counters.steps += 1
        self.counters.flips_total += len(mine)
        self.counters.macs_total += len(mine) * c.size
        self.counters.macs_dense_equivalent += c.size * c.size
        if self.e < self.best_e:
            self.best_e = self.e
            self.best_s = state.s[c.start : c.stop].copy()
            self.best_step = step
        if step == self.burnin_steps:
            self.burnin_snapshot = self.counters.copy()
        if step % self.spec.sample_every == 0 or step == self.total:
            self.trace.append(
                TracePoint(step, len(mine), self.e, -self.best_e * self.spec.weights.scale)
            )

    def finish(self, state: CbmState) -> SaSolution:
        c = self.cluster
        cut = None
        if self.spec.graph is not None:
            cut = cut_value(self.spec.graph, self.best_s)
            if cut != -self.best_e * self.spec.weights.scale:
                raise AssertionError("dual-run cut tracking diverged")
        return SaSolution(
            assignment=self.best_s,
            cut_value=cut,
            best_energy=self.best_e,
            best_step=self.best_step,
            trace=self.trace,
            counters=self.counters,
            counters_after_burnin=self.counters.since(self.burnin_snapshot),
            seed=self.seed,
            n=c.size,
            final_energy=self.final_energy,
            initial_energy=self.initial_energy,
        )


class _FlipDeltaView:
    """Adapter so the shared energy-delta helper can index cluster flips
    (global neuron ids) against a cluster-local weight block."""

    def __init__(self, weights: WeightMatrix, start: int):
        self.weights = weights
        self.start = start


def state_weights_view(spec: SaClusterSpec):
    return spec.weights


def run_dual(specs: list[ClusterSpec], master_seed: int) -> DualResult:
    """Step one partitioned machine until every cluster's program completes.

    Cluster i draws its initial state from ``derive_seed(master_seed, i)``;
    running the same cluster standalone with that seed reproduces its results
    bit for bit.  Annealing clusters that finish early hold their final
    temperature (their reported results freeze at schedule end); reservoir
    clusters idle without input once their frames are consumed.
    """
    partition = Partition.from_sizes([(s.kind, s.size) for s in specs])
    sources = [
        s.weights if isinstance(s, SaClusterSpec) else s.config.weights for s in specs
    ]
    weights = build_masked_weights(partition, sources)
    n = partition.n_total
    fxp = DEFAULT_FXP
    for s in specs:
        if isinstance(s, RcClusterSpec) and s.config.fxp != fxp:
            raise ValueError("all clusters must share the fixed-point datapath")

    # per-cluster seeded init, concatenated
    xs, ss = [], []
    seeds = []
    for idx, (spec, cluster) in enumerate(zip(specs, partition.clusters)):
        seed = derive_seed(master_seed, idx)
        seeds.append(seed)
        sub = init_state(cluster.size, seed, sources[idx], x_bits=fxp.x_bits)
        xs.append(sub.x)
        ss.append(sub.s)
    state = CbmState(np.concatenate(xs), np.concatenate(ss), np.zeros(n, np.int64))
    state.z = dense_fields(weights, state.s)

    t0_arr = np.zeros(n, dtype=np.int64)
    alpha_arr = np.full(n, 32, dtype=np.int64)
    temp_field = TemperatureField(t0_arr, alpha_arr)
    bias = np.zeros(n, dtype=np.int64)

    sa_trackers: dict[int, _SaTracker] = {}
    rc_state: dict[int, dict] = {}
    durations = []
    for idx, (spec, cluster) in enumerate(zip(specs, partition.clusters)):
        sl = slice(cluster.start, cluster.stop)
        if isinstance(spec, SaClusterSpec):
            tr = _SaTracker(spec, cluster, state, seeds[idx])
            sa_trackers[idx] = tr
            durations.append(tr.total)
        else:
            cfg = spec.config
            inputs = np.asarray(spec.inputs, dtype=np.int64)
            if np.any((inputs < 0) | (inputs > cfg.frame_steps)):
                raise ValueError(f"inputs must lie in [0, {cfg.frame_steps}]")
            rc_state[idx] = {
                "cfg": cfg,
                "inputs": inputs,
                "frame": 0,
                "tau": 0,
                "acc": np.zeros(cluster.size, np.int64),
                "last": np.zeros(cluster.size, np.int64),
                "rows": np.empty((len(inputs), cluster.size), np.int64),
                "counters": MacCounters(),
                "nnz_win": int(np.count_nonzero(cfg.input_weights)),
            }
            t0_arr[sl] = cfg.temp.t0_exp
            alpha_arr[sl] = cfg.temp.alpha_code
            durations.append(len(inputs) * cfg.frame_steps)

    total_steps = max(durations) if durations else 0
    shared = MacCounters()

    for _ in range(total_steps):
        step_done = state.step  # steps completed so far
        for idx, tr in sa_trackers.items():
            temp = tr.next_temp(step_done)
            sl = slice(tr.cluster.start, tr.cluster.stop)
            t0_arr[sl] = temp.t0_exp
            alpha_arr[sl] = temp.alpha_code
        bias[:] = 0
        for idx, rc in rc_state.items():
            cfg, cluster = rc["cfg"], partition.clusters[idx]
            if rc["frame"] < len(rc["inputs"]):
                u = rc["inputs"][rc["frame"]]
                if rc["tau"] < u:
                    bias[cluster.start : cluster.stop] = cfg.input_weights

        flips = machine_step(state, weights, temp_field, fxp=fxp, input_bias=bias)

        for idx, tr in sa_trackers.items():
            tr.after_step(state, flips, state.step)
            if state.step == tr.total:
                tr.final_energy = tr.e
        apply_flips(state, weights, flips, shared)

        for idx, rc in rc_state.items():
            if rc["frame"] >= len(rc["inputs"]):
                continue
            cfg, cluster = rc["cfg"], partition.clusters[idx]
            cnt = rc["counters"]
            u = rc["inputs"][rc["frame"]]
            tau = rc["tau"]
            mine = [f for f in flips if cluster.start <= f.neuron < cluster.stop]
            cnt.steps += 1
            cnt.flips_total += len(mine)
            cnt.macs_total += len(mine) * cluster.size
            cnt.macs_dense_equivalent += cluster.size * cluster.size
            if tau < u:
                cnt.macs_input_total += rc["nnz_win"]
            if mine:
                cols = np.array([f.neuron - cluster.start for f in mine], np.int64)
                old = np.array([1 - f.new_s for f in mine], np.int64)
                rc["acc"][cols] += old * (tau + 1 - rc["last"][cols])
                rc["last"][cols] = tau + 1
                cnt.macs_output_total += len(mine)
            rc["tau"] += 1
            if rc["tau"] == cfg.frame_steps:
                sl = slice(cluster.start, cluster.stop)
                rc["acc"] += state.s[sl].astype(np.int64) * (cfg.frame_steps - rc["last"])
                rc["rows"][rc["frame"]] = rc["acc"]
                rc["frame"] += 1
                rc["tau"] = 0
                rc["acc"][:] = 0
                rc["last"][:] = 0

    results = []
    cluster_counters = []
    for idx, spec in enumerate(specs):
        if idx in sa_trackers:
            sol = sa_trackers[idx].finish(state)
            results.append(sol)
            cluster_counters.append(sol.counters)
        else:
            rc = rc_state[idx]
            cfg = rc["cfg"]
            feats = rc["rows"][cfg.washout_frames :].astype(np.float64) / cfg.frame_steps
            feats = np.hstack([feats, np.ones((feats.shape[0], 1))])
            results.append(feats)
            cluster_counters.append(rc["counters"])
    return DualResult(
        partition=partition,
        results=results,
        cluster_counters=cluster_counters,
        counters=shared,
        seed=master_seed,
    )
