"""Shared oracles and random-instance generators.

The oracles here deliberately avoid the package's own machinery: Gibbs sums
are plain ``itertools.product`` loops with ``math.exp``, and matchings are
enumerated pairing by pairing.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from lyzero.models import (
    ModelInstance,
    blume_capel_measure,
    coupling_dense,
    ising_measure,
)

# criterion number -> (passed, one-line detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


# ---------------------------------------------------------------- oracles

def gibbs_coefficients(atoms, K, beta):
    """Coefficient list ``c_{-D..D}`` of the normalized Gibbs sum, by enumeration.

    ``atoms`` is a list of ``(position, weight)`` with integer positions.
    """
    K = np.asarray(K, dtype=float)
    n = len(K)
    deg = n * max(abs(int(a)) for a, _ in atoms)
    out = [0.0] * (2 * deg + 1)
    for state in itertools.product(atoms, repeat=n):
        s = [int(a) for a, _ in state]
        w = math.prod(wt for _, wt in state)
        e = 0.0
        for i in range(n):
            for j in range(n):
                e += K[i, j] * s[i] * s[j]
        out[sum(s) + deg] += w * math.exp(0.5 * beta * e)
    return np.array(out)


def pairings(items):
    """All perfect pairings of ``items`` (a list of even length)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for k, partner in enumerate(rest):
        for tail in pairings(rest[:k] + rest[k + 1:]):
            yield [(first, partner)] + tail


def exhaustive_bottleneck(K):
    """``max over pairings of min matched entry``, only over positive entries; 0 if none."""
    K = np.asarray(K)
    n = len(K)
    if n % 2:
        return 0.0
    best = 0.0
    for pr in pairings(list(range(n))):
        v = min(K[i, j] for i, j in pr)
        if v > 0:
            best = max(best, float(v))
    return best


def ising_chain_value(n, beta_j):
    """Zero-field open-chain Ising sum with weights 1/2 per spin: ``cosh(beta J)^(n-1)``."""
    return math.cosh(beta_j) ** (n - 1)


def max_rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = np.maximum(np.abs(a), np.abs(b))
    mask = scale > 0
    return float(np.max(np.abs(a - b)[mask] / scale[mask]))


def poly_rel_err(poly, coeffs):
    """Relative coefficient error of a FugacityPolynomial against a raw oracle vector."""
    c = np.asarray(coeffs, float)
    nz = np.nonzero(c)[0]
    trim = min(nz[0], len(c) - 1 - nz[-1])
    c = c[trim: len(c) - trim]
    got = poly.as_float() * math.exp(poly.log_scale)
    if len(got) != len(c):
        return math.inf
    return max_rel_err(got, c)


# ------------------------------------------------------------- generators

def random_dense(rng, n, kmax=1.0, density=0.7):
    A = rng.uniform(0, kmax, (n, n)) * (rng.random((n, n)) < density)
    A = np.triu(A, 1)
    return A + A.T


def random_measure(rng, theta_max=3.0, ising_prob=0.2):
    if rng.random() < ising_prob:
        return ising_measure()
    return blume_capel_measure(float(rng.uniform(0.05, theta_max)))


def random_instance(rng, n, theta_max=3.0, beta_max=2.0):
    return ModelInstance(random_measure(rng, theta_max), coupling_dense(random_dense(rng, n)),
                         float(rng.uniform(0.05, beta_max)))


def atoms_of(measure):
    return [(float(a), float(w)) for a, w in measure.atoms]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
