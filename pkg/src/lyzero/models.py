"""Single-spin measures, parameter maps and coupling-matrix generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import _precision as P

ISING = "ising"
BLUME_CAPEL = "blume_capel"
DILUTE = "dilute"


@dataclass(frozen=True)
class SpinMeasure:
    """Symmetric atomic distribution of one spin.

    ``atoms`` are ``(position, weight)`` pairs with integer positions and
    weights summing to one.  ``theta`` is the weight ratio of the zero atom
    to the pair of +-1 atoms, so that ``phi(x) = (cosh x + theta) / (1 + theta)``;
    it is 0 for the pure Ising measure.
    """

    atoms: tuple[tuple[int, float], ...]
    label: str
    theta: float = 0.0

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("measure needs at least one atom")
        if any(w <= 0 for _, w in self.atoms):
            raise ValueError("atom weights must be positive")
        total = math.fsum(w for _, w in self.atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"atom weights sum to {total}, expected 1")
        weights = dict(self.atoms)
        for pos, w in self.atoms:
            if abs(weights.get(-pos, 0.0) - w) > 1e-15:
                raise ValueError("measure must be symmetric under spin flip")

    @property
    def p(self) -> float:
        """Occupation probability in the dilute-ferromagnet reading."""
        return 1.0 / (1.0 + self.theta)

    @property
    def q(self) -> float:
        return self.theta / (1.0 + self.theta)

    def phi(self, x):
        """Normalized Laplace transform ``E[exp(x sigma)]`` at scalar ``x``."""
        return sum(w * np.exp(pos * x) for pos, w in self.atoms)

    def arrays(self, precision: str = P.DOUBLE) -> tuple[np.ndarray, np.ndarray]:
        """Positions and weights; in extended mode weights are recomputed from ``theta``."""
        positions = np.array([a[0] for a in self.atoms], dtype=np.int64)
        if precision != P.EXTENDED:
            return positions, np.array([a[1] for a in self.atoms], dtype=float)
        with P.working():
            th = mpmath.mpf(self.theta)
            w = {1: 1 / (2 * (1 + th)), -1: 1 / (2 * (1 + th)), 0: th / (1 + th)}
            weights = np.array([w[int(p)] for p in positions], dtype=object)
        return positions, weights


def ising_measure() -> SpinMeasure:
    return SpinMeasure(((-1, 0.5), (1, 0.5)), ISING, 0.0)


def blume_capel_measure(theta: float, label: str = BLUME_CAPEL) -> SpinMeasure:
    """Spin-1 measure with weights ``{1, 2 theta, 1} / (2 (1 + theta))`` on ``{-1, 0, +1}``."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    edge = 1.0 / (2.0 * (1.0 + theta))
    return SpinMeasure(((-1, edge), (0, theta / (1.0 + theta)), (1, edge)), label, float(theta))


def dilute_measure(q: float) -> SpinMeasure:
    """Annealed site dilution: a spin is deleted with probability ``q``.

    Equivalent to the Blume-Capel measure with ``theta = q / (1 - q)``; at
    ``q = 0`` the zero atom disappears and the Ising measure remains.
    """
    if not 0 <= q < 1:
        raise ValueError(f"thinning probability must lie in [0, 1), got {q}")
    if q == 0:
        return SpinMeasure(((-1, 0.5), (1, 0.5)), DILUTE, 0.0)
    return blume_capel_measure(q / (1.0 - q), label=DILUTE)


def theta_from_delta(beta: float, delta: float) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    return math.exp(beta * delta) / 2.0


def delta_from_theta(beta: float, theta: float) -> float:
    return math.log(2.0 * theta) / beta


def theta_from_q(q: float) -> float:
    return q / (1.0 - q)


def q_from_theta(theta: float) -> float:
    return theta / (1.0 + theta)


def dilution_beta_threshold(q: float, kappa: float) -> float:
    """Smallest ``beta`` at which the thinning bound ``q/(1-q) <= sqrt(cosh(beta kappa))`` holds.

    Returns 0 when the bound holds at every temperature (``q <= 1/2``).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    t = theta_from_q(q)
    if t <= 1.0:
        return 0.0
    return math.acosh(t * t) / kappa


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric, nonnegative interaction matrix with zero diagonal (unit beta)."""

    entries: np.ndarray

    def __post_init__(self):
        K = np.array(self.entries, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("coupling matrix must be square")
        if not np.all(np.isfinite(K)):
            raise ValueError("coupling entries must be finite")
        if np.any(K < 0):
            raise ValueError("couplings must be nonnegative (ferromagnetic)")
        if not np.array_equal(K, K.T):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(K) != 0):
            raise ValueError("coupling matrix must have zero diagonal")
        K.setflags(write=False)
        object.__setattr__(self, "entries", K)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other):
        return isinstance(other, CouplingMatrix) and np.array_equal(self.entries, other.entries)

    __hash__ = None


def coupling_dense(matrix) -> CouplingMatrix:
    return CouplingMatrix(np.asarray(matrix, dtype=float))


def coupling_chain(n: int, J: float, periodic: bool = False) -> CouplingMatrix:
    """Nearest-neighbour chain.  For ``n == 2`` the wrap bond is the same entry."""
    if n < 2:
        raise ValueError("a chain needs at least two sites")
    if J <= 0:
        raise ValueError("chain coupling must be positive")
    K = np.zeros((n, n))
    idx = np.arange(n - 1)
    K[idx, idx + 1] = K[idx + 1, idx] = J
    if periodic:
        K[0, n - 1] = K[n - 1, 0] = J
    return CouplingMatrix(K)


@dataclass(frozen=True)
class HierarchySpec:
    """Dyson-type hierarchy on ``2**n`` sites.

    ``levels[m-1]`` couples sites that first share a block at level ``m``.
    ``permutation[i]`` is the physical label of canonical site ``i``.
    """

    levels: tuple[float, ...]
    permutation: tuple[int, ...] | None = None
    n: int = field(init=False)

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if not levels:
            raise ValueError("hierarchy needs at least one level")
        if any(not v > 0 for v in levels):
            raise ValueError("level couplings must be strictly positive")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "n", len(levels))
        if self.permutation is not None:
            perm = tuple(int(i) for i in self.permutation)
            if sorted(perm) != list(range(2**self.n)):
                raise ValueError("permutation must be a rearrangement of range(2**n)")
            object.__setattr__(self, "permutation", perm)

    @property
    def site_count(self) -> int:
        return 2**self.n


def hierarchy_level(i: int, j: int) -> int:
    """Lowest level whose dyadic block holds both canonical sites (0-based)."""
    return (i ^ j).bit_length()


def coupling_hierarchical(spec: HierarchySpec) -> CouplingMatrix:
    size = spec.site_count
    idx = np.arange(size)
    level = np.frompyfunc(hierarchy_level, 2, 1)(idx[:, None], idx[None, :]).astype(int)
    table = np.concatenate([[0.0], spec.levels])
    K = table[level]
    if spec.permutation is not None:
        perm = np.asarray(spec.permutation)
        out = np.zeros_like(K)
        out[np.ix_(perm, perm)] = K
        K = out
    return CouplingMatrix(K)


@dataclass(frozen=True)
class ModelInstance:
    measure: SpinMeasure
    coupling: CouplingMatrix
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def n(self) -> int:
        return self.coupling.n

    @property
    def theta(self) -> float:
        return self.measure.theta

    def with_theta(self, theta: float) -> ModelInstance:
        label = BLUME_CAPEL if self.measure.label == ISING else self.measure.label
        measure = ising_measure() if theta == 0 else blume_capel_measure(theta, label)
        return ModelInstance(measure, self.coupling, self.beta)

    def log_prefactor(self) -> float:
        """Log of the factor dropped by probability-normalizing the measure.

        The unnormalized partition function equals ``exp(log_prefactor) * Z``.
        """
        if self.measure.label == BLUME_CAPEL:
            per_site = (1.0 + self.theta) / self.theta
        else:
            per_site = 2.0
        return self.n * math.log(per_site)
