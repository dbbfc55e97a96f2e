"""Pairing structure of a coupling matrix.

Two questions are answered for a ferromagnetic ``K`` on ``2N`` sites:

* condition (i): the largest ``kappa > 0`` such that some perfect matching of
  the sites uses only couplings ``>= kappa`` (a bottleneck matching);
* condition (ii): a pairing in which both members of every pair couple
  identically to every site outside the pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# largest site count handled by the subset search
MAX_SITES = 24

# absolute tolerance for the column-equality test of condition (ii)
EQUALITY_TOL = 1e-12

Pairs = list[tuple[int, int]]


class InstanceTooLarge(ValueError):
    pass


@dataclass
class MatchingReport:
    has_perfect_matching: bool
    bottleneck_kappa: float
    matching: Pairs
    condition_ii_partition: Pairs | None = None
    # best bottleneck over pairings that also satisfy condition (ii)
    kappa_ii: float = 0.0
    joint_partition: Pairs | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def condition_i(self) -> bool:
        return self.has_perfect_matching and self.bottleneck_kappa > 0

    @property
    def condition_ii(self) -> bool:
        return self.condition_ii_partition is not None

    @property
    def both_conditions(self) -> bool:
        """A single pairing satisfies (ii) and has every paired coupling positive."""
        return self.joint_partition is not None and self.kappa_ii > 0

    def to_dict(self) -> dict:
        as_lists = lambda pairs: None if pairs is None else [list(p) for p in pairs]
        return {
            "has_perfect_matching": self.has_perfect_matching,
            "bottleneck_kappa": self.bottleneck_kappa,
            "matching": as_lists(self.matching),
            "condition_ii_partition": as_lists(self.condition_ii_partition),
            "kappa_ii": self.kappa_ii,
            "joint_partition": as_lists(self.joint_partition),
            "both_conditions": self.both_conditions,
        }


def _entries(K) -> np.ndarray:
    return np.asarray(getattr(K, "entries", K), dtype=float)


def find_perfect_matching(adjacent: np.ndarray) -> Pairs | None:
    """Lexicographically smallest perfect matching of a graph, or ``None``.

    Subsets are explored lowest-free-vertex first, with the partner chosen in
    increasing order, so the first complete matching reached is the smallest
    sorted pair list.  Dead subsets are memoized as bitmasks.
    """
    n = len(adjacent)
    if n % 2:
        return None
    if n > MAX_SITES:
        raise InstanceTooLarge(f"{n} sites exceeds the matching search cap {MAX_SITES}")
    nbrs = [[j for j in range(n) if j != i and adjacent[i, j]] for i in range(n)]
    full = (1 << n) - 1
    dead: set[int] = set()
    chosen: Pairs = []

    def solve(used: int) -> bool:
        if used == full:
            return True
        if used in dead:
            return False
        i = 0
        while used >> i & 1:
            i += 1
        for j in nbrs[i]:
            if not used >> j & 1:
                chosen.append((i, j))
                if solve(used | 1 << i | 1 << j):
                    return True
                chosen.pop()
        dead.add(used)
        return False

    return list(chosen) if solve(0) else None


def _bottleneck(K: np.ndarray, allowed: np.ndarray) -> tuple[float, Pairs | None]:
    """Binary search over distinct positive entries for the best feasible threshold."""
    n = len(K)
    if n % 2 or n == 0:
        return 0.0, None
    iu = np.triu_indices(n, 1)
    values = np.unique(K[iu][allowed[iu] & (K[iu] > 0)])
    best = find_perfect_matching(allowed & (K > 0)) if len(values) else None
    if best is None:
        return 0.0, None
    lo, hi = 0, len(values) - 1  # values[lo] is always feasible
    while lo < hi:
        mid = (lo + hi + 1) // 2
        m = find_perfect_matching(allowed & (K >= values[mid]))
        if m is None:
            hi = mid - 1
        else:
            lo, best = mid, m
    return float(values[lo]), best


def bottleneck_matching(K) -> MatchingReport:
    """Condition (i): maximum over perfect matchings of the minimum matched coupling.

    Zero couplings are non-edges.  Also fills in the condition-(ii) fields.
    """
    Karr = _entries(K)
    n = len(Karr)
    if n > MAX_SITES:
        raise InstanceTooLarge(f"{n} sites exceeds the matching search cap {MAX_SITES}")
    everything = np.ones_like(Karr, dtype=bool)
    kappa, matching = _bottleneck(Karr, everything)
    report = MatchingReport(matching is not None, kappa, matching or [])
    if n % 2 == 0:
        compat = compatibility_graph(Karr)
        report.condition_ii_partition = find_perfect_matching(compat)
        if report.condition_ii_partition is not None:
            report.kappa_ii, report.joint_partition = _bottleneck(Karr, compat)
    else:
        report.notes.append("odd site count: no perfect matching")
    return report


def compatibility_graph(K, tol: float = EQUALITY_TOL) -> np.ndarray:
    """``C[i, j]`` is true when rows ``i`` and ``j`` agree off ``{i, j}``.

    A compatible pair must have equal sorted rows (each row holds one 0 on
    the diagonal and the shared entry ``K_ij``), which prunes most pairs
    before the column comparison.
    """
    Karr = _entries(K)
    n = len(Karr)
    signature = np.sort(Karr, axis=1)
    same_sig = np.all(np.abs(signature[:, None, :] - signature[None, :, :]) <= tol, axis=2)
    compat = np.zeros((n, n), dtype=bool)
    for i, j in zip(*np.nonzero(np.triu(same_sig, 1))):
        mask = np.ones(n, dtype=bool)
        mask[[i, j]] = False
        if np.all(np.abs(Karr[i, mask] - Karr[j, mask]) <= tol):
            compat[i, j] = compat[j, i] = True
    return compat


def pair_partition_condition_ii(K, tol: float = EQUALITY_TOL) -> Pairs | None:
    """Condition (ii): a pairing whose pairs couple identically to all outside sites."""
    Karr = _entries(K)
    if len(Karr) % 2:
        return None
    return find_perfect_matching(compatibility_graph(Karr, tol))


def verify_condition_ii(K, pairs: Pairs, tol: float = EQUALITY_TOL) -> bool:
    """Independent re-check of a condition-(ii) pairing over every (pair, outside site)."""
    Karr = _entries(K)
    n = len(Karr)
    seen = sorted(v for p in pairs for v in p)
    if seen != list(range(n)):
        return False
    for i, j in pairs:
        for k in range(n):
            if k not in (i, j) and abs(Karr[k, i] - Karr[k, j]) > tol:
                return False
    return True
