"""Max-cut and QUBO instances and their mapping onto machine weights."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .machine import WeightMatrix


class InstanceParseError(ValueError):
    pass


@dataclass
class Graph:
    n: int
    edges: list[tuple[int, int, int]]  # (i, j, w) with 0 <= i < j < n

    def total_weight(self) -> int:
        return sum(w for _, _, w in self.edges)


def parse_maxcut(text: str) -> Graph:
    """Parse an edge-list instance: header ``n m`` then m lines ``i j w``.

    Vertices are 1-indexed in the file and 0-indexed in the returned graph.
    Malformed input is rejected with the offending line number.
    """
    lines = [
        (no, line.strip())
        for no, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    if not lines:
        raise InstanceParseError("empty instance file")
    header_no, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise InstanceParseError(f"line {header_no}: header must be 'n m'")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise InstanceParseError(f"line {header_no}: non-integer header") from None
    if n < 1 or m < 0:
        raise InstanceParseError(f"line {header_no}: invalid sizes n={n} m={m}")
    body = lines[1:]
    if len(body) != m:
        raise InstanceParseError(
            f"edge count mismatch: header says {m}, found {len(body)} edge lines"
        )
    edges: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int]] = set()
    for no, line in body:
        toks = line.split()
        if len(toks) != 3:
            raise InstanceParseError(f"line {no}: expected 'i j w', got {line!r}")
        try:
            i, j, w = int(toks[0]), int(toks[1]), int(toks[2])
        except ValueError:
            raise InstanceParseError(f"line {no}: non-integer token in {line!r}") from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise InstanceParseError(f"line {no}: vertex out of range 1..{n}")
        if i == j:
            raise InstanceParseError(f"line {no}: self-loop on vertex {i}")
        a, b = min(i, j) - 1, max(i, j) - 1
        if (a, b) in seen:
            raise InstanceParseError(f"line {no}: duplicate edge ({i}, {j})")
        seen.add((a, b))
        edges.append((a, b, w))
    return Graph(n=n, edges=edges)


def cut_value(graph: Graph, assignment) -> int:
    """Sum of edge weights crossing the partition."""
    a = np.asarray(assignment)
    if len(a) != graph.n:
        raise ValueError(f"assignment length {len(a)} != n {graph.n}")
    total = 0
    for i, j, w in graph.edges:
        if a[i] != a[j]:
            total += w
    return total


def maxcut_to_cbm(graph: Graph, weight_bits: int = 2) -> WeightMatrix:
    """Map a max-cut instance to couplings so that E(S) = -scale * cut(S).

    Encoding: W_ij = -2 w_ij on edges, b_i = sum of incident w_ij.  Then
    E(S) = -sum W S S - sum b S equals -cut(S) exactly in integers, so
    minimizing energy maximizes the cut with no approximation.  If the edge
    weights share a common divisor they are divided down first and the
    factor is recorded in ``scale``.

    ``weight_bits`` bounds the magnitude of the (scaled) edge weights — the
    quantity a weight memory stores.  The stored couplings carry one extra
    bit for the structural factor 2, which is a shift, not added precision.
    """
    n = graph.n
    g = 0
    for _, _, w in graph.edges:
        g = math.gcd(g, abs(w))
    g = max(g, 1)
    limit = 1 << (weight_bits - 1)
    if any(abs(w) // g >= limit for _, _, w in graph.edges):
        raise ValueError(
            f"edge weights do not fit {weight_bits}-bit precision "
            f"even after dividing by gcd {g}"
        )
    w_mat = np.zeros((n, n), dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)
    mask = np.zeros((n, n), dtype=bool)
    for i, j, w in graph.edges:
        ws = w // g
        w_mat[i, j] = w_mat[j, i] = -2 * ws
        mask[i, j] = mask[j, i] = True
        b[i] += ws
        b[j] += ws
    return WeightMatrix(
        n=n,
        weights=w_mat,
        biases=b,
        mask=mask,
        weight_bits=weight_bits + 1,
        scale=g,
    )


@dataclass
class Qubo:
    n: int
    linear: np.ndarray
    quadratic: list[tuple[int, int, int]]


def parse_qubo_json(text: str) -> Qubo:
    """QUBO as JSON {"n": ..., "linear": [...], "quadratic": [[i,j,v], ...]}."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"invalid QUBO JSON: {exc}") from None
    try:
        n = int(obj["n"])
        linear = np.asarray(obj.get("linear", [0] * n), dtype=np.int64)
        quad = [(int(i), int(j), int(v)) for i, j, v in obj.get("quadratic", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceParseError(f"malformed QUBO fields: {exc}") from None
    if n < 1 or len(linear) != n:
        raise InstanceParseError("QUBO linear vector must have length n >= 1")
    for i, j, _ in quad:
        if not (0 <= i < n and 0 <= j < n):
            raise InstanceParseError(f"QUBO index ({i}, {j}) out of range")
    return Qubo(n=n, linear=linear, quadratic=quad)


def qubo_to_cbm(qubo: Qubo) -> WeightMatrix:
    """Map minimize(x' Q x + L' x) so machine energy equals the objective.

    E = -sum W S S - sum b S, so W_ij = -Q_ij (i != j, both triangles
    summed), b_i = -(L_i + Q_ii); the diagonal folds into the linear term
    since S^2 = S.
    """
    n = qubo.n
    w = np.zeros((n, n), dtype=np.int64)
    b = -qubo.linear.astype(np.int64).copy()
    for i, j, v in qubo.quadratic:
        if i == j:
            b[i] -= v
        else:
            w[i, j] -= v
            w[j, i] -= v
    mask = w != 0
    wmax = int(np.abs(w).max()) if n else 0
    return WeightMatrix(
        n=n,
        weights=w,
        biases=b,
        mask=mask,
        weight_bits=max(2, wmax.bit_length() + 1),
        scale=1,
    )


def qubo_objective(qubo: Qubo, assignment) -> int:
    a = np.asarray(assignment, dtype=np.int64)
    total = int(qubo.linear @ a)
    for i, j, v in qubo.quadratic:
        total += v * int(a[i] * a[j])
    return total


def random_pm1_graph(n: int, seed: int, density: float = 1.0) -> Graph:
    """Complete (or thinned) graph with i.i.d. +-1 edge weights.

    With density 1.0 and n = 1000 this is the fully connected 1000-node
    benchmark family used for flip-rate and MAC studies.
    """
    if n < 2:
        raise ValueError("need at least two vertices")
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n - 1):
        m = n - 1 - i
        w = rng.integers(0, 2, size=m, dtype=np.int64) * 2 - 1
        if density < 1.0:
            keep = rng.random(m) < density
        else:
            keep = np.ones(m, dtype=bool)
        for k in range(m):
            if keep[k]:
                edges.append((i, i + 1 + k, int(w[k])))
    return Graph(n=n, edges=edges)
