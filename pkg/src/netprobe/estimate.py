"""Global least-squares topology estimation and excitation-derived constraints.

The interaction matrix is estimated row by row from consecutive observation
pairs.  An excitation round supplies sign information for one column: entries
decided present are constrained nonnegative, entries decided absent are fixed
to zero.  Rows with nonnegativity constraints are solved exactly by an
active-set method (Lawson-Hanson with the free variables pre-seeded into the
passive set), which is exact and fast at these sizes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from netprobe.infer import NeighborDecision


class EntryConstraint(enum.Enum):
    FREE = "free"
    POSITIVE = "pos"
    ZERO = "zero"


@dataclass(frozen=True)
class LsProblem:
    """Observation pairs (y_{t-1}, y_t) plus optional per-entry constraints."""

    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    constraints: dict[tuple[int, int], EntryConstraint] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.pairs:
            raise ValueError("need at least one observation pair")
        pairs = tuple(
            (np.asarray(a, dtype=float), np.asarray(b, dtype=float))
            for a, b in self.pairs
        )
        n = pairs[0][0].shape[0]
        for a, b in pairs:
            if a.shape != (n,) or b.shape != (n,):
                raise ValueError("all observation pairs must be length-n vectors")
        for i, j in self.constraints:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"constraint index ({i}, {j}) outside the matrix")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n(self) -> int:
        return self.pairs[0][0].shape[0]

    def regressors(self) -> np.ndarray:
        return np.array([a for a, _ in self.pairs])

    def targets(self) -> np.ndarray:
        return np.array([b for _, b in self.pairs])

    def constraint(self, i: int, j: int) -> EntryConstraint:
        return self.constraints.get((i, j), EntryConstraint.FREE)


@dataclass(frozen=True)
class LsSolution:
    """Estimated matrix plus rank diagnostics of the stacked regressors.

    ``clipped_positive`` lists constrained-positive entries that came out
    exactly zero, where the estimate sits on the constraint boundary.
    """

    matrix: np.ndarray
    rank: int
    rank_deficient: bool
    clipped_positive: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ErrorMetrics:
    """Structure error (sign mismatches / n^2) and relative Frobenius error."""

    structure_error: float
    magnitude_error: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.structure_error <= 1.0:
            raise ValueError("structure error must lie in [0, 1]")
        if self.magnitude_error < 0.0:
            raise ValueError("magnitude error must be >= 0")


def ols_estimate(problem: LsProblem) -> LsSolution:
    """Row-wise least squares over all observation pairs.

    Rank-deficient regressors yield the minimum-norm solution, flagged via
    ``rank_deficient``; constraints on the problem are ignored here.
    """
    x = problem.regressors()
    y = problem.targets()
    sol, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    return LsSolution(sol.T, int(rank), int(rank) < problem.n)


def _nonneg_row_lstsq(a: np.ndarray, b: np.ndarray, positive: np.ndarray) -> np.ndarray:
    """min ||a @ x - b|| with x[k] >= 0 where positive[k], other x free.

    Lawson-Hanson active set; free variables start (and stay) passive.
    """
    m, n = a.shape
    x = np.zeros(n)
    passive = ~positive

    def solve_passive() -> np.ndarray:
        z = np.zeros(n)
        if passive.any():
            z[passive] = np.linalg.lstsq(a[:, passive], b, rcond=None)[0]
        return z

    # Optimize the initially passive (free) variables before touching the
    # constrained ones; no feasibility issue since none of them is bounded.
    z = solve_passive()
    x = z
    grad_tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, float(np.abs(a.T @ b).max(initial=0.0)))
    for _ in range(3 * n + 10):
        w = a.T @ (b - a @ x)
        candidates = ~passive & (w > grad_tol)
        if not candidates.any():
            break
        entering = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[entering] = True
        while True:
            z = solve_passive()
            violating = passive & positive & (z <= 0.0)
            if not violating.any():
                x = z
                break
            ratios = np.full(n, np.inf)
            gaps = x[violating] - z[violating]
            # x >= 0 and z <= 0 on violating entries; a zero gap means both
            # are zero, and a zero step just drops that variable again
            ratios[violating] = np.where(gaps > 0.0, x[violating] / np.where(gaps > 0.0, gaps, 1.0), 0.0)
            leaving = int(np.argmin(ratios))
            x = x + float(ratios[leaving]) * (z - x)
            # The leaving variable hits zero by construction; clear any
            # rounding residue so it re-enters the active set cleanly.
            drop = violating & (x <= 1e-14 * max(1.0, float(np.abs(x).max())))
            drop[leaving] = True
            x[drop] = 0.0
            passive[drop] = False
    else:
        raise RuntimeError("active-set iteration limit exceeded")
    x[positive] = np.maximum(x[positive], 0.0)
    return x


def constrained_estimate(problem: LsProblem) -> LsSolution:
    """Row-wise least squares honoring the problem's entry constraints.

    Zero-constrained entries are eliminated from the row's variables,
    positive-constrained entries are solved under nonnegativity, and fully
    unconstrained rows reproduce the plain least-squares rows bit for bit.
    """
    x = problem.regressors()
    y = problem.targets()
    n = problem.n
    base, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    w = np.zeros((n, n))
    clipped: list[tuple[int, int]] = []
    for i in range(n):
        kinds = [problem.constraint(i, j) for j in range(n)]
        if all(k is EntryConstraint.FREE for k in kinds):
            w[i] = base[:, i]
            continue
        keep = [j for j in range(n) if kinds[j] is not EntryConstraint.ZERO]
        if not keep:
            continue
        positive = np.array([kinds[j] is EntryConstraint.POSITIVE for j in keep], dtype=bool)
        row = _nonneg_row_lstsq(x[:, keep], y[:, i], positive)
        w[i, keep] = row
        clipped.extend((i, j) for j, v in zip(keep, row) if kinds[j] is EntryConstraint.POSITIVE and v == 0.0)
    return LsSolution(w, int(rank), int(rank) < n, tuple(clipped))


def _thresholded_sign(m: np.ndarray, tol: float) -> np.ndarray:
    s = np.sign(m)
    s[np.abs(m) <= tol] = 0.0
    return s


def error_metrics(estimate: np.ndarray, truth: np.ndarray, sign_tol: float = 1e-6) -> ErrorMetrics:
    """Structure and magnitude errors of an estimated interaction matrix.

    The structure error counts entries whose thresholded sign differs from
    the truth's, normalized by the entry count; the magnitude error is the
    Frobenius distance relative to the truth's Frobenius norm.
    """
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError("estimate and truth must have the same shape")
    denom = float(np.linalg.norm(tru))
    if denom == 0.0:
        raise ValueError("truth matrix must be nonzero")
    mismatches = (_thresholded_sign(est, sign_tol) != _thresholded_sign(tru, sign_tol)).sum()
    structure = float(mismatches) / est.size
    magnitude = float(np.linalg.norm(est - tru)) / denom
    return ErrorMetrics(structure, magnitude)


def constraints_from_decision(decision: NeighborDecision, n: int) -> dict[tuple[int, int], EntryConstraint]:
    """Column constraints for the excited node from a one-hop decision.

    Accepted nodes force W[i, source] nonnegative-active, rejected nodes
    force it to zero; the diagonal entry stays free.
    """
    j = decision.source
    accepted = decision.one_hop()
    out: dict[tuple[int, int], EntryConstraint] = {}
    for i in range(n):
        if i == j:
            continue
        out[(i, j)] = EntryConstraint.POSITIVE if i in accepted else EntryConstraint.ZERO
    return out


def save_constraints(path, constraints: dict[tuple[int, int], EntryConstraint]) -> None:
    """Write non-free constraints as lines ``i j {pos|zero}``."""
    with open(path, "w") as fh:
        for (i, j), kind in sorted(constraints.items()):
            if kind is not EntryConstraint.FREE:
                fh.write(f"{i} {j} {kind.value}\n")


def load_constraints(path) -> dict[tuple[int, int], EntryConstraint]:
    out: dict[tuple[int, int], EntryConstraint] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            si, sj, kind = line.split()
            out[(int(si), int(sj))] = EntryConstraint(kind)
    return out
