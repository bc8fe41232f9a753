"""Directed graphs, interaction weight matrices, and hop-neighbor ground truth.

Conventions: ``adjacency[i, j] == 1`` means node ``i`` uses information from
node ``j``, so information flows along ``j -> i``.  The in-neighbor set of
``i`` is the support of row ``i``; the 1-hop out-neighbors of ``j`` are the
support of column ``j``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

# Eigensolver noise allowance for spectral-radius comparisons.
SPECTRAL_TOL = 1e-9
ROW_SUM_TOL = 1e-12


class StabilityClass(enum.Enum):
    ASYMPTOTICALLY_STABLE = "asymptotically_stable"
    MARGINALLY_STABLE = "marginally_stable"
    UNSTABLE = "unstable"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class WeightedDigraph:
    """Directed graph given by a 0/1 adjacency matrix with zero diagonal."""

    adjacency: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if np.diagonal(a).any():
            raise ValueError("adjacency diagonal must be zero (no self-loops)")
        object.__setattr__(self, "adjacency", _frozen(a.astype(np.int64)))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def in_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def in_neighbors(self, node: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.adjacency[node]).tolist())

    def out_neighbors(self, node: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.adjacency[:, node]).tolist())

    def edge_count(self) -> int:
        return int(self.adjacency.sum())


@dataclass(frozen=True)
class TopologyMatrix:
    """Nonnegative interaction matrix together with its declared stability.

    ``weight_floor`` is the smallest strictly positive entry (0.0 for an
    all-zero matrix); it is the least interaction weight the hypothesis
    tests can be asked to discriminate.
    """

    matrix: np.ndarray
    stability: StabilityClass
    weight_floor: float = field(init=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("matrix must be square")
        if (w < 0).any():
            raise ValueError("matrix entries must be non-negative")
        positive = w[w > 0]
        floor = float(positive.min()) if positive.size else 0.0
        object.__setattr__(self, "weight_floor", floor)
        object.__setattr__(self, "matrix", _frozen(w))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.matrix)).max())


@dataclass(frozen=True)
class HopSets:
    """Exact-hop and cumulative reachable node sets from a source node.

    ``per_hop[h-1]`` holds the nodes whose shortest information-flow path
    from the source has exactly ``h`` edges; ``reachable[h-1]`` holds every
    node reachable within ``h`` hops.  Sets at different hops are disjoint.
    """

    source: int
    per_hop: tuple[frozenset[int], ...]
    reachable: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for level in self.per_hop:
            if level & seen:
                raise ValueError("per-hop sets must be pairwise disjoint")
            seen |= level

    @property
    def max_hop(self) -> int:
        return len(self.per_hop)

    def at_hop(self, h: int) -> frozenset[int]:
        if not 1 <= h <= self.max_hop:
            raise IndexError(f"hop {h} outside 1..{self.max_hop}")
        return self.per_hop[h - 1]

    def within(self, h: int) -> frozenset[int]:
        if not 1 <= h <= self.max_hop:
            raise IndexError(f"hop {h} outside 1..{self.max_hop}")
        return self.reachable[h - 1]

    def hop_of(self, node: int) -> int | None:
        """Exact hop count of ``node`` from the source, or None if unreached."""
        for h, level in enumerate(self.per_hop, start=1):
            if node in level:
                return h
        return None


def generate_random_digraph(n: int, edge_probability: float, seed=None) -> WeightedDigraph:
    """Random directed graph with independent Bernoulli(p) off-diagonal edges.

    Rows left without any in-edge get one uniformly random in-edge, so every
    node has in-degree >= 1.  Reproducible for a fixed seed.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if not 0 < edge_probability <= 1:
        raise ValueError(f"edge probability must be in (0, 1], got {edge_probability}")
    rng = np.random.default_rng(seed)
    a = (rng.random((n, n)) < edge_probability).astype(np.int64)
    np.fill_diagonal(a, 0)
    for i in np.flatnonzero(a.sum(axis=1) == 0):
        choices = [j for j in range(n) if j != i]
        a[i, rng.choice(choices)] = 1
    return WeightedDigraph(a)


def _closing_diagonal(w: np.ndarray) -> np.ndarray:
    """Diagonal entries closing each row to sum one.

    Values within the row-sum tolerance of zero are snapped to exact zero so
    a rounding residue never becomes the matrix's smallest positive weight.
    """
    closing = 1.0 - w.sum(axis=1)
    if (closing < -ROW_SUM_TOL).any():
        raise AssertionError("negative diagonal entry; weight rule violated")
    return np.where(closing > ROW_SUM_TOL, closing, 0.0)


def _check_row_stochastic(w: np.ndarray) -> None:
    rows = w.sum(axis=1)
    if np.abs(rows - 1.0).max() > ROW_SUM_TOL:
        raise AssertionError("weight rule produced a non-row-stochastic matrix")
    radius = float(np.abs(np.linalg.eigvals(w)).max())
    if abs(radius - 1.0) > SPECTRAL_TOL:
        raise AssertionError(f"row-stochastic matrix has spectral radius {radius}")


def laplacian_weights(graph: WeightedDigraph, gamma: float = 1.0) -> TopologyMatrix:
    """Uniform-weight rule: off-diagonal w_ij = gamma * a_ij / max in-degree.

    The diagonal closes each row to sum one, which makes the matrix
    row-stochastic with spectral radius one.
    """
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    degrees = graph.in_degrees()
    max_degree = int(degrees.max())
    if max_degree < 1:
        raise ValueError("graph has no edges")
    w = gamma * graph.adjacency.astype(float) / max_degree
    np.fill_diagonal(w, _closing_diagonal(w))
    _check_row_stochastic(w)
    return TopologyMatrix(w, StabilityClass.MARGINALLY_STABLE)


def metropolis_weights(graph: WeightedDigraph) -> TopologyMatrix:
    """Degree-pair rule: off-diagonal w_ij = a_ij / max(d_i, d_j)."""
    degrees = graph.in_degrees()
    if degrees.max() < 1:
        raise ValueError("graph has no edges")
    pair_max = np.maximum.outer(degrees, degrees)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(graph.adjacency > 0, graph.adjacency / pair_max, 0.0)
    np.fill_diagonal(w, _closing_diagonal(w))
    _check_row_stochastic(w)
    return TopologyMatrix(w, StabilityClass.MARGINALLY_STABLE)


def scale_to_asymptotic(tm: TopologyMatrix, alpha: float) -> TopologyMatrix:
    """Shrink a marginally stable matrix by 0 < alpha < 1.

    The result has spectral radius alpha < 1 and is therefore
    asymptotically stable.
    """
    if tm.stability is not StabilityClass.MARGINALLY_STABLE:
        raise ValueError("input must be marginally stable")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return TopologyMatrix(alpha * tm.matrix, StabilityClass.ASYMPTOTICALLY_STABLE)


def classify_stability(w: np.ndarray, tol: float = SPECTRAL_TOL) -> StabilityClass:
    """Classify a square matrix from its spectrum.

    Asymptotically stable when the spectral radius is below 1 - tol;
    marginally stable when the radius is 1 within tol and eigenvalue 1 has
    geometric multiplicity one; unstable otherwise.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("matrix must be square")
    radius = float(np.abs(np.linalg.eigvals(w)).max())
    if radius < 1.0 - tol:
        return StabilityClass.ASYMPTOTICALLY_STABLE
    if abs(radius - 1.0) <= tol:
        n = w.shape[0]
        multiplicity = n - np.linalg.matrix_rank(w - np.eye(n))
        if multiplicity == 1:
            return StabilityClass.MARGINALLY_STABLE
    return StabilityClass.UNSTABLE


def true_hop_sets(graph: WeightedDigraph, source: int, max_hop: int) -> HopSets:
    """Ground-truth hop sets by breadth-first search along information flow.

    Hop 1 from ``source`` is the support of adjacency column ``source``;
    hop h holds nodes first reached at BFS level h.  The source itself is
    never a member, even on cycles returning to it.
    """
    n = graph.n
    if not 0 <= source < n:
        raise ValueError(f"source {source} outside 0..{n - 1}")
    if max_hop < 1:
        raise ValueError("max_hop must be >= 1")
    visited = {source}
    frontier = {source}
    per_hop: list[frozenset[int]] = []
    reachable: list[frozenset[int]] = []
    cumulative: set[int] = set()
    for _ in range(max_hop):
        nxt: set[int] = set()
        for j in frontier:
            nxt.update(np.flatnonzero(graph.adjacency[:, j]).tolist())
        level = nxt - visited
        visited |= level
        frontier = level
        per_hop.append(frozenset(level))
        cumulative |= level
        reachable.append(frozenset(cumulative))
    return HopSets(source, tuple(per_hop), tuple(reachable))


def save_matrix(path, matrix: np.ndarray, integer: bool = False) -> None:
    """Write a square matrix as a header line ``n`` plus n whitespace rows."""
    m = np.asarray(matrix)
    n = m.shape[0]
    fmt = "%d" if integer else "%.17g"
    with open(path, "w") as fh:
        fh.write(f"{n}\n")
        for row in m:
            fh.write(" ".join(fmt % v for v in row) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        n = int(fh.readline().strip())
        m = np.loadtxt(fh, ndmin=2)
    if m.shape != (n, n):
        raise ValueError(f"expected {n}x{n} matrix, got {m.shape}")
    return m


def save_adjacency(path, graph: WeightedDigraph) -> None:
    save_matrix(path, graph.adjacency, integer=True)


def load_adjacency(path) -> WeightedDigraph:
    return WeightedDigraph(load_matrix(path).astype(np.int64))


def save_weights(path, tm: TopologyMatrix) -> None:
    save_matrix(path, tm.matrix)


def load_weights(path) -> TopologyMatrix:
    """Load a weight matrix, re-deriving its stability class spectrally."""
    w = load_matrix(path)
    return TopologyMatrix(w, classify_stability(w))
