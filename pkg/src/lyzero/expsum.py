"""Exponential sums and the fugacity polynomials obtained from them.

An atomic single-spin measure turns ``phi(x) = E[exp(x * sigma)]`` into a finite
sum of exponentials.  On such sums the Gaussian differential operator
``exp(1/2 * sum_ij K_ij D_i D_j)`` acts diagonally, because
``D_i exp(a . x) = a_i exp(a . x)``.  Everything in this module is therefore
exact up to floating-point rounding; no series is truncated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from . import _precision as P

DEFAULT_TERM_CAP = 3**16

# rows processed per block when evaluating quadratic forms
_CHUNK = 1 << 18


class ExpansionTooLarge(ValueError):
    """Raised when an exact expansion would exceed the configured term cap."""


@dataclass(frozen=True, eq=False)
class ExpSum:
    """``sum_t coeffs[t] * exp(freqs[t] . x)`` over ``x`` in ``C^n``.

    ``freqs`` is an integer array of shape ``(terms, n)``.  Instances built
    through :func:`canonical` have distinct frequency rows sorted
    lexicographically and strictly positive coefficients.
    """

    coeffs: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        if self.freqs.ndim != 2 or self.freqs.shape[0] != len(self.coeffs):
            raise ValueError("freqs must have shape (len(coeffs), n_vars)")
        if not np.issubdtype(self.freqs.dtype, np.integer):
            raise TypeError("frequencies must be integers")

    @property
    def n_vars(self) -> int:
        return self.freqs.shape[1]

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def precision(self) -> str:
        return P.EXTENDED if self.coeffs.dtype == object else P.DOUBLE

    def terms(self):
        for c, a in zip(self.coeffs, self.freqs):
            yield c, tuple(int(v) for v in a)

    def total(self):
        """Value at the origin, i.e. the sum of all coefficients."""
        with P.working(self.precision):
            return self.coeffs.sum()

    def tensor(self, other: ExpSum, cap: int = DEFAULT_TERM_CAP) -> ExpSum:
        """Product of two sums in disjoint variables (``self`` first)."""
        n_terms = len(self) * len(other)
        if n_terms > cap:
            raise ExpansionTooLarge(f"{n_terms} terms exceeds cap {cap}")
        with P.working(self.precision):
            coeffs = np.outer(self.coeffs, other.coeffs).ravel()
        freqs = np.hstack(
            [
                np.repeat(self.freqs, len(other), axis=0),
                np.tile(other.freqs, (len(self), 1)),
            ]
        )
        return ExpSum(coeffs, freqs)


def canonical(coeffs, freqs) -> ExpSum:
    """Merge equal frequency rows, drop zero terms, sort rows."""
    freqs = np.asarray(freqs)
    if freqs.ndim == 1:
        freqs = freqs[:, None]
    coeffs = np.asarray(coeffs)
    if coeffs.dtype != object:
        coeffs = coeffs.astype(float)
    if np.any(coeffs < 0):
        raise ValueError("exponential-sum coefficients must be nonnegative")
    ifreqs = np.rint(freqs).astype(np.int64)
    if not np.array_equal(ifreqs, freqs):
        raise ValueError("only integer frequencies are supported")
    uniq, inverse = np.unique(ifreqs, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    if coeffs.dtype == object:
        merged = np.zeros(len(uniq), dtype=object)
        with P.working():
            np.add.at(merged, inverse, coeffs)
    else:
        merged = np.bincount(inverse, weights=coeffs, minlength=len(uniq))
    keep = merged > 0
    return ExpSum(merged[keep], uniq[keep])


def single_site(measure, precision: str = P.DOUBLE) -> ExpSum:
    """Laplace transform of one atomic measure as a one-variable sum."""
    positions, weights = measure.arrays(precision)
    order = np.argsort(positions)
    return ExpSum(weights[order], positions[order].astype(np.int8)[:, None])


def expsum_from_measure(
    measure, site_count: int, cap: int = DEFAULT_TERM_CAP, precision: str = P.DOUBLE
) -> ExpSum:
    """Expand ``prod_i phi(x_i)`` for ``site_count`` i.i.d. sites."""
    P.check_precision(precision)
    if site_count < 1:
        raise ValueError("site_count must be >= 1")
    n_atoms = len(measure.atoms)
    if n_atoms**site_count > cap:
        raise ExpansionTooLarge(
            f"{n_atoms}^{site_count} terms exceeds cap {cap}; problem too large for exact expansion"
        )
    site = single_site(measure, precision)
    out = site
    for _ in range(site_count - 1):
        out = out.tensor(site, cap=cap)
    return out


def _coupling_array(K) -> np.ndarray:
    return np.asarray(getattr(K, "entries", K), dtype=float)


def quadratic_form(freqs: np.ndarray, K, precision: str = P.DOUBLE) -> np.ndarray:
    """``a^T K a`` for each frequency row ``a``."""
    Karr = _coupling_array(K)
    if precision == P.EXTENDED:
        Kobj = P.asarray(Karr, P.EXTENDED)
        out = np.empty(len(freqs), dtype=object)
        for start in range(0, len(freqs), _CHUNK):
            f = freqs[start : start + _CHUNK].astype(object)
            out[start : start + _CHUNK] = ((f @ Kobj) * f).sum(axis=1)
        return out
    out = np.empty(len(freqs), dtype=float)
    for start in range(0, len(freqs), _CHUNK):
        f = freqs[start : start + _CHUNK].astype(float)
        out[start : start + _CHUNK] = np.einsum("ti,ij,tj->t", f, Karr, f)
    return out


def apply_quadratic_exponential(
    s: ExpSum, K, scale: float = 1.0, log_shift: float = 0.0
) -> ExpSum:
    """Apply ``exp(scale/2 * sum_ij K_ij D_i D_j)`` to ``s``.

    ``K`` may be a :class:`~lyzero.models.CouplingMatrix` or any square
    array; a nonzero diagonal is allowed here and simply rescales terms.
    The result is divided by ``exp(log_shift)`` to keep large couplings in
    floating-point range.
    """
    Karr = _coupling_array(K)
    if Karr.shape != (s.n_vars, s.n_vars):
        raise ValueError(
            f"coupling has shape {Karr.shape}, expected {(s.n_vars, s.n_vars)}"
        )
    if scale <= 0:
        raise ValueError("scale must be positive")
    prec = s.precision
    if prec == P.EXTENDED:
        with P.working():
            q = quadratic_form(s.freqs, Karr, prec)
            factor = P.exp(q * (mpmath.mpf(scale) / 2) - log_shift, prec)
            return ExpSum(s.coeffs * factor, s.freqs)
    q = quadratic_form(s.freqs, Karr, prec)
    return ExpSum(s.coeffs * np.exp(0.5 * scale * q - log_shift), s.freqs)


def eval_expsum(s: ExpSum, point) -> complex:
    """Evaluate ``s`` at a complex point."""
    point = np.asarray(point, dtype=complex).ravel()
    if point.shape != (s.n_vars,):
        raise ValueError(f"point has {point.size} entries, expected {s.n_vars}")
    phases = s.freqs.astype(float) @ point
    return complex(np.exp(phases) @ P.to_float(s.coeffs).astype(complex))


def restrict_to_diagonal(s: ExpSum, beta: float = 1.0) -> FugacityPolynomial:
    """Set every variable equal to ``x = beta * h`` and collect powers of ``z = e^x``."""
    totals = s.freqs.sum(axis=1, dtype=np.int64)
    if len(totals) == 0:
        raise ValueError("empty exponential sum")
    degree = int(np.abs(totals).max())
    idx = totals + degree
    if s.coeffs.dtype == object:
        coeffs = np.zeros(2 * degree + 1, dtype=object)
        with P.working():
            np.add.at(coeffs, idx, s.coeffs)
    else:
        coeffs = np.bincount(idx, weights=s.coeffs, minlength=2 * degree + 1)
    return FugacityPolynomial(coeffs, beta=beta)


@dataclass(frozen=True, eq=False)
class FugacityPolynomial:
    """Laurent polynomial ``exp(log_scale) * sum_m c_m z^m`` with ``z = e^{beta h}``.

    ``coeffs[k]`` holds ``c_{k - degree}``.  Outer zero pairs are trimmed so
    that the extreme coefficients are positive.
    """

    coeffs: np.ndarray
    beta: float = 1.0
    log_scale: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.dtype != object:
            c = c.astype(float)
        if c.ndim != 1 or len(c) % 2 == 0:
            raise ValueError("coefficient array must have odd length 2N+1")
        if np.any(c < 0):
            raise ValueError("fugacity coefficients must be nonnegative")
        nz = np.nonzero(c > 0)[0]
        if len(nz) == 0:
            raise ValueError("polynomial is identically zero")
        trim = min(nz[0], len(c) - 1 - nz[-1])
        if trim:
            c = c[trim : len(c) - trim]
        cf = P.to_float(c)
        if np.any(np.abs(cf - cf[::-1]) > 1e-9 * cf.max()):
            raise ValueError("fugacity polynomial is not palindromic")
        object.__setattr__(self, "coeffs", c)
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def degree(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def precision(self) -> str:
        return P.EXTENDED if self.coeffs.dtype == object else P.DOUBLE

    def coefficient(self, m: int):
        k = m + self.degree
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return 0.0

    def as_float(self) -> np.ndarray:
        return P.to_float(self.coeffs)

    def is_palindromic(self, rtol: float = 1e-12) -> bool:
        c = self.as_float()
        return bool(np.all(np.abs(c - c[::-1]) <= rtol * c.max()))

    def symmetrized(self) -> FugacityPolynomial:
        c = self.coeffs
        with P.working(self.precision):
            return FugacityPolynomial((c + c[::-1]) / 2, self.beta, self.log_scale)

    def __call__(self, z) -> complex:
        m = np.arange(-self.degree, self.degree + 1)
        z = complex(z)
        return complex(np.sum(self.as_float() * z ** m.astype(float)) * np.exp(self.log_scale))

    def value_at_one(self) -> float:
        """``Z_N(0)`` in the probability-normalized convention."""
        return float(np.sum(self.as_float()) * np.exp(self.log_scale))

    def log_value_at_one(self) -> float:
        return float(np.log(np.sum(self.as_float())) + self.log_scale)

    def descending(self) -> np.ndarray:
        """Coefficients of ``Q(z) = z^N P(z)``, highest power first, max scaled to 1."""
        c = self.coeffs[::-1]
        with P.working(self.precision):
            return c / max(c)

    def relative_error(self, other: FugacityPolynomial) -> float:
        """Max relative coefficient difference after bringing both to one scale."""
        if self.degree != other.degree:
            return float("inf")
        a, b = self.as_float(), other.as_float()
        la = self.log_scale + math.log(a.max())
        lb = other.log_scale + math.log(b.max())
        a = a / a.max()
        b = b / b.max() * math.exp(lb - la)
        mask = (a > 0) | (b > 0)
        return float(np.max(np.abs(a[mask] - b[mask]) / np.maximum(a[mask], b[mask])))

    def to_dict(self) -> dict:
        out = {"beta": float(self.beta), "coeffs": [float(v) for v in self.coeffs]}
        if self.log_scale:
            out["log_scale"] = float(self.log_scale)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> FugacityPolynomial:
        return cls(
            np.asarray(data["coeffs"], dtype=float),
            beta=float(data["beta"]),
            log_scale=float(data.get("log_scale", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> FugacityPolynomial:
        return cls.from_dict(json.loads(text))
