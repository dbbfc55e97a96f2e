"""Exact constructions of the fugacity polynomial ``Z_N(h)``.

Four routes are provided and are expected to agree coefficient by
coefficient: direct Gibbs enumeration, the Gaussian operator acting on the
expanded product of single-site transforms, a transfer matrix for chains and
a block-magnetization recursion for Dyson-type hierarchies.

All engines use the probability-normalized single-spin measure, so the
coefficients sum to ``Z_N(0)`` relative to total measure mass 1.  Couplings
are stored at unit beta and multiplied by ``beta`` here.
"""

from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np

from . import _precision as P
from .expsum import (
    DEFAULT_TERM_CAP,
    ExpansionTooLarge,
    FugacityPolynomial,
    apply_quadratic_exponential,
    expsum_from_measure,
    restrict_to_diagonal,
)
from .models import HierarchySpec, ModelInstance, coupling_hierarchical

ENGINES = ("auto", "brute", "operator", "transfer", "hierarchical")

# states per vectorized block in the brute-force loop
_BLOCK = 1 << 16

# |log| range inside which a tracked log-scale is folded back into the coefficients
_FOLD_LIMIT = 600.0


class EngineMismatch(ValueError):
    """The requested engine does not fit the coupling structure."""


def _finish(coeffs: np.ndarray, log_scale, beta: float) -> FugacityPolynomial:
    """Fold the tracked log-scale back when the result stays in range."""
    log_scale = float(log_scale)
    if coeffs.dtype == object:
        with P.working():
            coeffs = coeffs * mpmath.exp(log_scale)
        return FugacityPolynomial(coeffs, beta=beta)
    top = float(coeffs.max())
    if top > 0 and abs(log_scale + math.log(top)) < _FOLD_LIMIT and abs(log_scale) < _FOLD_LIMIT:
        return FugacityPolynomial(coeffs * math.exp(log_scale), beta=beta)
    return FugacityPolynomial(coeffs, beta=beta, log_scale=log_scale)


def _energy_shift(m: ModelInstance) -> float:
    # all-aligned energy bounds 1/2 beta s^T K s for |s_i| <= 1 and K >= 0
    return 0.5 * m.beta * float(m.coupling.entries.sum())


def brute_force_partition(
    m: ModelInstance, cap: int = DEFAULT_TERM_CAP, precision: str = P.DOUBLE
) -> FugacityPolynomial:
    """Sum ``prod w(s_i) exp(beta/2 s^T K s) z^{sum s}`` over every configuration."""
    P.check_precision(precision)
    positions, weights = m.measure.arrays(precision)
    n_atoms, n = len(positions), m.n
    if n_atoms**n > cap:
        raise ExpansionTooLarge(f"{n_atoms}^{n} states exceeds cap {cap}")
    extended = precision == P.EXTENDED
    K = m.coupling.entries
    deg = n * int(np.abs(positions).max())

    # split sites into an outer loop and a vectorized inner block
    inner = min(n, max(1, int(math.log(_BLOCK) / math.log(max(n_atoms, 2)))))
    outer = n - inner
    idx_in = np.array(list(itertools.product(range(n_atoms), repeat=inner)), dtype=np.int64)
    s_in = positions[idx_in]
    mag_in = s_in.sum(axis=1)

    with P.working(precision):
        if extended:
            beta = mpmath.mpf(m.beta)
            Kx = P.asarray(K, P.EXTENDED)
            shift = 0
        else:
            beta = m.beta
            Kx = K
            shift = _energy_shift(m)
        K_oo, K_oi, K_ii = Kx[:outer, :outer], Kx[:outer, outer:], Kx[outer:, outer:]
        s_in_x = s_in.astype(object) if extended else s_in.astype(float)
        w_in = np.prod(weights[idx_in], axis=1)
        q_in = ((s_in_x @ K_ii) * s_in_x).sum(axis=1)

        coeffs = np.zeros(2 * deg + 1, dtype=object if extended else float)
        for idx_out in itertools.product(range(n_atoms), repeat=outer):
            s_out = positions[list(idx_out)]
            s_out_x = s_out.astype(object) if extended else s_out.astype(float)
            w_out = np.prod(weights[list(idx_out)]) if outer else 1
            q_out = s_out_x @ K_oo @ s_out_x if outer else 0
            cross = s_in_x @ (s_out_x @ K_oi) if outer else 0
            expo = beta * (0.5 * q_in + cross) + (beta * 0.5 * q_out - shift)
            terms = w_out * w_in * P.exp(expo, precision)
            bins = mag_in + int(s_out.sum()) + deg
            if extended:
                np.add.at(coeffs, bins, terms)
            else:
                coeffs += np.bincount(bins, weights=terms, minlength=2 * deg + 1)
    return _finish(coeffs, shift, m.beta)


def operator_partition(
    m: ModelInstance, cap: int = DEFAULT_TERM_CAP, precision: str = P.DOUBLE
) -> FugacityPolynomial:
    """Expand ``prod phi(x_i)``, apply the Gaussian operator, restrict to the diagonal."""
    s = expsum_from_measure(m.measure, m.n, cap=cap, precision=precision)
    if precision == P.EXTENDED:
        with P.working():
            return restrict_to_diagonal(apply_quadratic_exponential(s, m.coupling, m.beta), m.beta)
    shift = _energy_shift(m)
    s = apply_quadratic_exponential(s, m.coupling, m.beta, log_shift=shift)
    p = restrict_to_diagonal(s, m.beta)
    return _finish(p.coeffs, shift, m.beta)


def chain_bonds(K, periodic: bool | None = None) -> tuple[np.ndarray, float, bool]:
    """Bond strengths ``K[i, i+1]``, the wrap bond and the periodicity flag.

    ``periodic=None`` detects the wrap bond.  Raises :class:`EngineMismatch`
    for any coupling outside the (possibly periodic) nearest-neighbour pattern.
    """
    K = np.asarray(getattr(K, "entries", K))
    n = len(K)
    if n < 2:
        raise EngineMismatch("a chain needs at least two sites")
    bonds = np.array([K[i, i + 1] for i in range(n - 1)])
    wrap = float(K[0, n - 1]) if n >= 3 else 0.0
    if periodic is None:
        periodic = wrap > 0
    pattern = np.zeros_like(K)
    idx = np.arange(n - 1)
    pattern[idx, idx + 1] = pattern[idx + 1, idx] = bonds
    if periodic and n >= 3:
        pattern[0, n - 1] = pattern[n - 1, 0] = wrap
    if not np.array_equal(pattern, K):
        raise EngineMismatch("coupling is not a nearest-neighbour chain")
    return bonds, wrap, bool(periodic and n >= 3)


def _transfer_sweep(v, bonds, positions, weights, beta, precision):
    """Propagate polynomial-valued state vectors ``v[state, power]`` along the bonds."""
    log_scale = 0.0
    outer = np.multiply.outer(positions, positions)
    for J in bonds:
        T = P.exp(outer * (beta * J), precision)
        new = T.T @ v
        out = np.zeros_like(new)
        for t, sig in enumerate(positions):
            if sig > 0:
                out[t, sig:] = new[t, :-sig] * weights[t]
            elif sig < 0:
                out[t, :sig] = new[t, -sig:] * weights[t]
            else:
                out[t] = new[t] * weights[t]
        if precision == P.DOUBLE:
            top = out.max()
            out = out / top
            log_scale += math.log(top)
        v = out
    return v, log_scale


def chain_transfer_partition(
    m: ModelInstance, periodic: bool | None = None, precision: str = P.DOUBLE
) -> FugacityPolynomial:
    """Transfer matrix with Laurent-polynomial entries; open ends or a trace."""
    P.check_precision(precision)
    bonds, wrap, periodic = chain_bonds(m.coupling, periodic)
    positions, weights = m.measure.arrays(precision)
    deg = m.n * int(np.abs(positions).max())
    dtype = object if precision == P.EXTENDED else float
    with P.working(precision):
        beta = mpmath.mpf(m.beta) if precision == P.EXTENDED else m.beta
        zero = np.zeros((len(positions), 2 * deg + 1), dtype=dtype)

        def start(states):
            v = zero.copy()
            for t in states:
                v[t, positions[t] + deg] = weights[t]
            return v

        if not periodic:
            v, log_scale = _transfer_sweep(
                start(range(len(positions))), bonds, positions, weights, beta, precision
            )
            return _finish(v.sum(axis=0), log_scale, m.beta)

        total = np.zeros(2 * deg + 1, dtype=dtype)
        scales = []
        parts = []
        for s0, sig0 in enumerate(positions):
            v, log_scale = _transfer_sweep(start([s0]), bonds, positions, weights, beta, precision)
            closing = P.exp(positions * (sig0 * beta * wrap), precision)
            parts.append(closing @ v)
            scales.append(log_scale)
        ref = max(scales)
        for part, sc in zip(parts, scales):
            total = total + part * (P.scalar_exp(sc - ref, precision))
        return _finish(total, ref, m.beta)


def detect_hierarchy(K) -> HierarchySpec | None:
    """Recognize a canonical-layout dyadic hierarchy (no relabeling)."""
    K = np.asarray(getattr(K, "entries", K))
    n_sites = len(K)
    if n_sites < 2 or n_sites & (n_sites - 1):
        return None
    levels = [float(K[0, 1 << (m - 1)]) for m in range(1, n_sites.bit_length())]
    if any(v <= 0 for v in levels):
        return None
    spec = HierarchySpec(tuple(levels))
    return spec if np.array_equal(coupling_hierarchical(spec).entries, K) else None


def merge_blocks(W1, W2, beta_kappa, precision: str = P.DOUBLE):
    """Join two blocks whose cross energy is ``beta_kappa * M1 * M2``.

    Tables are indexed by block magnetization ``M`` from ``-B`` to ``B``.
    Returns the merged table and the log of the factor divided out of it.
    """
    B1, B2 = (len(W1) - 1) // 2, (len(W2) - 1) // 2
    M1 = np.arange(-B1, B1 + 1)
    M2 = np.arange(-B2, B2 + 1)
    if precision == P.EXTENDED:
        kernel = P.exp(np.multiply.outer(M1, M2).astype(object) * beta_kappa, precision)
        log_scale = 0.0
    else:
        # max of M1*M2 is B1*B2, so the shifted kernel stays <= 1
        kernel = np.exp((np.multiply.outer(M1, M2) - B1 * B2) * beta_kappa)
        log_scale = beta_kappa * B1 * B2
    outer = np.multiply.outer(W1, W2) * kernel
    out = np.zeros(2 * (B1 + B2) + 1, dtype=outer.dtype)
    for k in range(len(W1)):
        out[k : k + len(W2)] += outer[k]
    if precision == P.DOUBLE:
        top = out.max()
        out = out / top
        log_scale += math.log(top)
    return out, log_scale


def hierarchical_partition(
    m: ModelInstance, spec: HierarchySpec | None = None, precision: str = P.DOUBLE
) -> FugacityPolynomial:
    """Bottom-up merge of block-magnetization tables, one merge per level.

    Every block at a given level carries the same table, so a hierarchy of
    ``2**n`` sites costs ``n`` merges.
    """
    P.check_precision(precision)
    if spec is None:
        spec = detect_hierarchy(m.coupling)
        if spec is None:
            raise EngineMismatch("coupling is not a canonical dyadic hierarchy")
    if coupling_hierarchical(spec) != m.coupling:
        raise EngineMismatch("coupling matrix does not match the hierarchy spec")
    positions, weights = m.measure.arrays(precision)
    if set(np.abs(positions).tolist()) - {0, 1}:
        raise EngineMismatch("block tables assume spins in {-1, 0, +1}")
    with P.working(precision):
        table = np.zeros(3, dtype=object if precision == P.EXTENDED else float)
        for pos, w in zip(positions, weights):
            table[pos + 1] = w
        log_scale = 0.0
        beta = mpmath.mpf(m.beta) if precision == P.EXTENDED else m.beta
        for kappa in spec.levels:
            table, ls = merge_blocks(table, table, beta * kappa, precision)
            # both halves carry the same scale
            log_scale = 2 * log_scale + ls
    return _finish(table, log_scale, m.beta)


def partition(
    m: ModelInstance,
    engine: str = "auto",
    spec: HierarchySpec | None = None,
    precision: str = P.DOUBLE,
    cap: int = DEFAULT_TERM_CAP,
) -> FugacityPolynomial:
    """Dispatch to an engine; ``auto`` prefers hierarchy, then chain, then enumeration."""
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    if engine == "auto":
        if spec is not None or detect_hierarchy(m.coupling) is not None:
            engine = "hierarchical"
        else:
            try:
                chain_bonds(m.coupling)
                engine = "transfer"
            except EngineMismatch:
                engine = "brute"
    if engine == "brute":
        return brute_force_partition(m, cap=cap, precision=precision)
    if engine == "operator":
        return operator_partition(m, cap=cap, precision=precision)
    if engine == "transfer":
        return chain_transfer_partition(m, precision=precision)
    return hierarchical_partition(m, spec, precision=precision)
