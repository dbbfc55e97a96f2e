"""Zeros of fugacity polynomials and the Lee-Yang verdict.

Roots are computed in the fugacity plane ``z = exp(beta h)`` for the ordinary
polynomial ``Q(z) = z^N P(z)`` of degree ``2N``.  The Lee-Yang property holds
when every root lies on the unit circle, i.e. every zero in ``beta h`` is
purely imaginary.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _precision as P
from .expsum import FugacityPolynomial

DEFAULT_TOL = 1e-8
# relative accuracy of engine coefficients computed in double precision
COEFF_ROUNDING = 1e-13
# headroom on the rounding level when deciding that roots form one multiple root
CLUSTER_SLACK = 10.0
# groups up to this size are searched for a multiple root among nearest neighbours
SUBSET_SEARCH_MAX = 32
MAX_ITER = 1000
# |Q/Q'| target; double-precision results above it are refined at EXTENDED_DPS
NEWTON_TARGET = 1e-10


class RootFindingError(RuntimeError):
    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class TrajectoryError(RuntimeError):
    def __init__(self, index, param, cause):
        super().__init__(f"grid point {index} (param={param}): {cause}")
        self.index = index
        self.param = param
        self.cause = cause


@dataclass
class ZeroSet:
    """Roots of ``Q(z) = z^N P(z)`` with multiplicity, plus diagnostics."""

    roots: np.ndarray
    residual: float
    newton_step: float
    radial_deviation: np.ndarray
    clusters: list[tuple[complex, int]] = field(default_factory=list)
    precision: str = P.DOUBLE
    iterations: int = 0
    # roots the coefficient rounding cannot separate from their neighbours
    # (merged into a multiple root or not): their distance to the circle is
    # only known to about rounding**(1/multiplicity)
    unresolved: list[int] = field(default_factory=list)

    @property
    def beta_h(self) -> np.ndarray:
        """Zeros in the ``beta h`` plane, principal branch (imaginary part in (-pi, pi])."""
        w = np.log(self.roots)
        # a negative real root stored with imaginary part -0.0 lands on -pi
        return np.where(w.imag <= -np.pi, w.real + 1j * np.pi, w)

    def __len__(self):
        return len(self.roots)


@dataclass
class LeeYangVerdict:
    holds: bool
    max_radial_deviation: float
    tol: float
    first_zero_phase: float | None = None
    phases: np.ndarray | None = None
    gammas: np.ndarray | None = None
    borderline: list[int] = field(default_factory=list)
    unresolved: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "max_radial_deviation": self.max_radial_deviation,
            "tol": self.tol,
            "first_zero_phase": self.first_zero_phase,
            "gammas": None if self.gammas is None else [float(g) for g in self.gammas],
            "borderline": self.borderline,
            "unresolved": self.unresolved,
        }


def _aberth_double(c: np.ndarray, z: np.ndarray, maxiter: int):
    """Simultaneous Aberth-Ehrlich iteration; ``c`` highest power first.

    Returns the iterate with the smallest backward error seen, which matters
    for multiple roots: their approximations keep jittering at the size of the
    rounding-induced split long after the polynomial values bottom out.
    """
    dc = np.polyder(c)
    absc = np.abs(c)
    step = best = best_bw = np.inf
    best_z = z
    stalled = bw_stalled = 0
    for it in range(1, maxiter + 1):
        pv = np.polyval(c, z)
        dv = np.polyval(dc, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dv != 0, pv / dv, 0)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            repulsion = (1.0 / diff).sum(axis=1)
            w = ratio / (1.0 - ratio * repulsion)
        w = np.where(np.isfinite(w), w, 0)
        z = z - w
        step = np.max(np.abs(w) / np.maximum(1.0, np.abs(z)))
        with np.errstate(invalid="ignore", over="ignore"):
            bw = np.max(np.abs(np.polyval(c, z)) / np.polyval(absc, np.abs(z)))
        if bw < best_bw:
            best_z, best_bw, bw_stalled = z, bw, 0
        else:
            bw_stalled += 1
        if step < 1e-15:
            return z, it, step
        # once close, rounding noise in Q keeps the step from shrinking further
        stalled = stalled + 1 if step >= best else 0
        best = min(best, step)
        if best < 1e-9 and stalled >= 25:
            return z, it, best
        if best_bw < 1e-13 and bw_stalled >= 50:
            return best_z, it, step
    return best_z, maxiter, step


def _aberth_mp(c: list, z: list, maxiter: int, eps):
    n = len(z)
    dc = _mp_polyder(c)
    absc = [abs(v) for v in c]
    floor = mpmath.mpf(10) ** (2 - P.EXTENDED_DPS)
    step = None
    best, stalled = mpmath.inf, 0
    for it in range(1, maxiter + 1):
        step = backward = mpmath.mpf(0)
        for i in range(n):
            zi = z[i]
            pv = mpmath.polyval(c, zi)
            dv = mpmath.polyval(dc, zi)
            backward = max(backward, abs(pv) / mpmath.polyval(absc, abs(zi)))
            if pv == 0 or dv == 0:
                continue
            ratio = pv / dv
            rep = mpmath.fsum(1 / (zi - z[j]) for j in range(n) if j != i and z[j] != zi)
            w = ratio / (1 - ratio * rep)
            z[i] = zi - w
            step = max(step, abs(w) / max(1, abs(z[i])))
        if step < eps:
            return z, it, step
        # multiple roots only settle to about eps**(1/m); stop once that stalls
        stalled = stalled + 1 if step >= best else 0
        best = min(best, step)
        if backward < floor and stalled >= 25:
            return z, it, step
    return z, maxiter, step


def _initial_guesses(degree: int) -> np.ndarray:
    # just outside the unit circle, rotated off the real axis
    k = np.arange(degree)
    return 1.1 * np.exp(1j * (2 * np.pi * (k + 0.25) / degree + 0.1))


def _components(n: int, edges) -> list[list[int]]:
    """Connected components with more than one member."""
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    return [g for g in groups.values() if len(g) > 1]


def _bisect(zc: np.ndarray, members: list[int]) -> list[list[int]]:
    """Split a group at its largest single-linkage gap; singletons drop out."""
    pts = np.column_stack([zc[members].real, zc[members].imag])
    if len(members) < 3 or np.ptp(pts, axis=0).max() == 0:
        return []
    labels = fcluster(linkage(pts, "single"), 2, "maxclust")
    groups = [[members[i] for i in np.nonzero(labels == lab)[0]] for lab in (1, 2)]
    if min(map(len, groups)) == 0:
        return []  # no gap to split at
    return [g for g in groups if len(g) > 1]


def _sub_multiple(arith, z, zc: np.ndarray, members: list[int], rounding):
    """Largest subset of nearest neighbours in ``members`` that is one multiple root.

    A genuine multiple root next to simple roots makes the whole group fail;
    its blurred copies are the ``m`` members closest to any one of them.
    Returns ``(subset, centre)`` or ``None``.
    """
    order = {i: sorted(members, key=lambda j: abs(zc[j] - zc[i])) for i in members}
    tried = set()
    for m in range(len(members) - 1, 1, -1):
        for i in members:
            subset = tuple(sorted(order[i][:m]))
            if subset in tried:
                continue
            tried.add(subset)
            centre = _multiple_root(arith, [z[j] for j in subset], rounding)
            if centre is not None:
                return list(subset), centre
    return None


def _split_radius(m: int, rounding, scale, qm):
    """Spread of an ``m``-fold root under relative coefficient perturbation."""
    return (math.factorial(m) * rounding * scale / qm) ** (1.0 / m)


class _DoubleArith:
    """float64 polynomial evaluations used by the cluster test."""

    def __init__(self, c: np.ndarray):
        self.ders = [c]

    def der(self, k: int):
        while len(self.ders) <= k:
            self.ders.append(np.polyder(self.ders[-1]))
        return self.ders[k]

    def value(self, k, x):
        return abs(np.polyval(self.der(k), x))

    def scale(self, k, x):
        return np.polyval(np.abs(self.der(k)), abs(x))

    def mean(self, pts):
        return complex(np.mean(pts))

    def polish(self, x, m):
        x = _polish_multiple(self.ders[0], x, m)
        return x if np.isfinite(x) else None

    def radii(self, z, rounding):
        """Weierstrass inclusion radii ``d |Q(z_i)| / |c_0 prod_j (z_i - z_j)|``.

        ``|Q(z_i)|`` is padded by the coefficient rounding, so roots that the
        coefficients cannot tell apart get overlapping disks.
        """
        c = self.ders[0]
        z = np.asarray(z)
        dist = np.abs(z[:, None] - z[None, :])
        np.fill_diagonal(dist, 1.0)
        dist = np.maximum(dist, np.finfo(float).eps * np.maximum(1.0, np.abs(z))[:, None])
        num = np.abs(np.polyval(c, z)) + rounding * np.polyval(np.abs(c), np.abs(z))
        with np.errstate(over="ignore", divide="ignore"):
            return len(z) * np.exp(np.log(num) - math.log(abs(c[0])) - np.log(dist).sum(axis=1))


class _MpArith(_DoubleArith):
    """The same evaluations on mpmath lists, inside :func:`P.working`."""

    def der(self, k: int):
        while len(self.ders) <= k:
            self.ders.append(_mp_polyder(self.ders[-1]))
        return self.ders[k]

    def value(self, k, x):
        return abs(mpmath.polyval(self.der(k), x))

    def scale(self, k, x):
        return mpmath.polyval([abs(v) for v in self.der(k)], abs(x))

    def mean(self, pts):
        return mpmath.fsum(pts) / len(pts)

    def polish(self, x, m):
        g, dg = self.der(m - 1), self.der(m)
        tiny = mpmath.mpf(10) ** (5 - P.EXTENDED_DPS)
        for _ in range(50):
            dv = mpmath.polyval(dg, x)
            if dv == 0:
                break
            step = mpmath.polyval(g, x) / dv
            x -= step
            if abs(step) < tiny * max(1, abs(x)):
                break
        return x

    def radii(self, z, rounding):
        c = self.ders[0]
        absc = [abs(v) for v in c]
        out = []
        for i in range(len(z)):
            prod = abs(mpmath.fprod(z[i] - z[j] for j in range(len(z)) if j != i))
            num = abs(mpmath.polyval(c, z[i])) + rounding * mpmath.polyval(absc, abs(z[i]))
            out.append(len(z) * num / (abs(c[0]) * prod) if prod else mpmath.inf)
        return out


def _multiple_root(arith, pts: list, rounding):
    """The ``len(pts)``-fold root the points blur, or ``None`` if they are not one.

    At an ``m``-fold root of a polynomial within relative ``rounding`` of
    ``Q``, the derivatives ``Q^(k)``, ``k < m``, are at rounding level while
    ``Q^(m)`` is not, and the points lie within the spread such a
    perturbation causes.
    """
    m = len(pts)
    centre = arith.polish(arith.mean(pts), m)
    if centre is None:
        return None
    for k in range(m):
        if arith.value(k, centre) > CLUSTER_SLACK * rounding * arith.scale(k, centre):
            return None
    qm = arith.value(m, centre)
    if qm <= CLUSTER_SLACK * rounding * arith.scale(m, centre):
        return None  # higher multiplicity here: the centre belongs to a larger root
    limit = _split_radius(m, CLUSTER_SLACK * rounding, arith.scale(0, centre), qm)
    if max(abs(p - centre) for p in pts) > limit:
        return None
    return centre


def _cluster(arith, z, rounding):
    """Merge roots that are one multiple root blurred by coefficient rounding.

    Candidates are groups of overlapping inclusion disks; a group that fails
    :func:`_multiple_root` is searched for a multiple root among nearest
    neighbours (large groups are split at their largest gap instead).  Every
    member of a candidate group is flagged unresolved.
    Returns ``(roots, simple_mask, unresolved_mask, clusters)``.
    """
    d = len(z)
    radii = arith.radii(z, rounding)
    # screen pairs in double (with a rounding margin), confirm in working precision
    zc = np.array([complex(v) for v in z])
    rc = np.array([float(r) for r in radii]) + 1e-12 * np.maximum(1.0, np.abs(zc))
    near = np.abs(zc[:, None] - zc[None, :]) <= rc[:, None] + rc[None, :]
    edges = [(i, j) for i, j in np.argwhere(np.triu(near, 1)) if abs(z[i] - z[j]) <= radii[i] + radii[j]]
    out = list(z)
    simple = np.ones(d, dtype=bool)
    clusters = []
    pending = _components(d, edges)
    unresolved = np.zeros(d, dtype=bool)
    for members in pending:
        unresolved[members] = True
    while pending:
        members = pending.pop()
        centre = _multiple_root(arith, [z[i] for i in members], rounding)
        if centre is None:
            if len(members) > SUBSET_SEARCH_MAX:
                pending.extend(_bisect(zc, members))
                continue
            found = _sub_multiple(arith, z, zc, members, rounding)
            if found is None:
                continue
            subset, centre = found
            # what is left regroups through its own overlapping disks
            rest = [i for i in members if i not in subset]
            local = {i: k for k, i in enumerate(rest)}
            sub = [(local[i], local[j]) for i, j in edges if i in local and j in local]
            pending.extend([[rest[k] for k in g] for g in _components(len(rest), sub)])
            members = subset
        for i in members:
            out[i] = centre
        simple[members] = False
        clusters.append((complex(centre), len(members)))
    return out, simple, unresolved, clusters


def _polish_multiple(c: np.ndarray, centre: complex, mult: int) -> complex:
    """Newton on ``Q^(mult-1)``, for which a root of multiplicity ``mult`` is simple."""
    g = np.polyder(c, mult - 1)
    dg = np.polyder(g)
    for _ in range(5):
        gv, dv = np.polyval(g, centre), np.polyval(dg, centre)
        if dv == 0:
            break
        cand = centre - gv / dv
        if not abs(np.polyval(g, cand)) < abs(gv):
            break
        centre = cand
    return centre


def _mp_polyder(c: list, k: int = 1) -> list:
    for _ in range(k):
        n = len(c) - 1
        c = [c[i] * (n - i) for i in range(n)]
    return c


def find_zeros(
    p: FugacityPolynomial, precision: str = P.DOUBLE, maxiter: int = MAX_ITER
) -> ZeroSet:
    """All ``2N`` roots of ``z^N P(z)`` by Aberth iteration and Newton polishing.

    In extended precision the double-precision iterates are refined with the
    same iteration at :data:`~lyzero._precision.EXTENDED_DPS` digits, using
    coefficients carried at that precision when ``p`` has them.  A double
    run whose Newton step exceeds :data:`NEWTON_TARGET` is refined the same
    way; ``precision`` on the result records which path produced it.
    """
    P.check_precision(precision)
    if p.degree < 1:
        raise ValueError("polynomial has no zeros (degree 0)")
    sym = p.symmetrized()
    c = sym.as_float()[::-1]
    c = c / c.max()
    d = len(c) - 1

    z, iters, step = _aberth_double(c, _initial_guesses(d), maxiter)
    absc = np.abs(c)
    backward = np.abs(np.polyval(c, z)) / np.polyval(absc, np.abs(z))
    if not np.all(np.isfinite(z)) or (step > 1e-8 and backward.max() > 1e-12):
        raise RootFindingError(
            f"Aberth iteration did not converge in {maxiter} steps",
            best=z,
            residual=float(np.nanmax(backward)),
        )

    if precision == P.EXTENDED:
        return _refine_extended(sym, z, maxiter, iters)

    roots, simple, unresolved, clusters = _cluster(_DoubleArith(c), z, COEFF_ROUNDING)
    roots = np.array(roots)
    dc = np.polyder(c)
    for _ in range(3):
        pv, dv = np.polyval(c, roots), np.polyval(dc, roots)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = roots - pv / dv
        ok = simple & np.isfinite(cand)
        cand = np.where(ok, cand, roots)
        better = ok & (np.abs(np.polyval(c, cand)) <= np.abs(pv))
        roots = np.where(better, cand, roots)
    pv, dv = np.polyval(c, roots), np.polyval(dc, roots)
    with np.errstate(divide="ignore", invalid="ignore"):
        newton = np.where(simple, np.abs(pv) / np.abs(dv), 0.0)
    if np.nanmax(newton) > NEWTON_TARGET:
        # ill-conditioned roots (e.g. bunched near z = -1): finish at higher precision
        return _refine_extended(sym, roots, maxiter, iters)
    order = np.lexsort((roots.imag, np.angle(roots)))
    roots = roots[order]
    return ZeroSet(
        roots=roots,
        residual=float(np.abs(np.polyval(c, roots)).max()),
        newton_step=float(np.nanmax(newton)),
        radial_deviation=np.abs(np.abs(roots) - 1.0),
        clusters=clusters,
        precision=P.DOUBLE,
        iterations=iters,
        unresolved=[int(i) for i in np.nonzero(unresolved[order])[0]],
    )


def _refine_extended(sym: FugacityPolynomial, z0: np.ndarray, maxiter: int, iters: int) -> ZeroSet:
    with P.working():
        coeffs = [mpmath.mpf(v) for v in sym.coeffs[::-1]]
        top = max(coeffs)
        c = [v / top for v in coeffs]
        # nudge exact duplicates apart so the repulsion term stays finite
        z = [mpmath.mpc(complex(v)) * (1 + mpmath.mpf(k + 1) * mpmath.mpf("1e-12")) for k, v in enumerate(z0)]
        eps = mpmath.mpf(10) ** (-(P.EXTENDED_DPS - 10))
        z, more, step = _aberth_mp(c, z, maxiter, eps)
        # extended arithmetic cannot undo the split that rounded coefficients cause
        rounding = COEFF_ROUNDING if sym.precision == P.DOUBLE else mpmath.mpf(10) ** (5 - P.EXTENDED_DPS)
        z, simple, unresolved, clusters = _cluster(_MpArith(c), z, rounding)
        dev = np.array([float(abs(abs(r) - 1)) for r in z])
        resid = max(float(abs(mpmath.polyval(c, r))) for r in z)
        dc = _mp_polyder(c)
        newton = []
        for r, s in zip(z, simple):
            dv = mpmath.polyval(dc, r)
            newton.append(float(abs(mpmath.polyval(c, r) / dv)) if s and dv != 0 else 0.0)
    roots = np.array([complex(r) for r in z])
    order = np.lexsort((roots.imag, np.angle(roots)))
    return ZeroSet(
        roots=roots[order],
        residual=resid,
        newton_step=max(newton),
        radial_deviation=dev[order],
        clusters=clusters,
        precision=P.EXTENDED,
        iterations=iters + more,
        unresolved=[int(i) for i in np.nonzero(unresolved[order])[0]],
    )


def classify(zs: ZeroSet, p: FugacityPolynomial | None = None, tol: float = DEFAULT_TOL) -> LeeYangVerdict:
    """Unit-circle test with tolerance ``tol`` on ``||z| - 1|``.

    When the property holds the ``N`` phases ``0 < phi_1 <= ... <= phi_N <= pi``
    are read off the conjugate pairs, and ``gamma_j = 1 / phi_j**2``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    dev = zs.radial_deviation
    max_dev = float(dev.max())
    borderline = [int(i) for i in np.nonzero((dev > tol / 10) & (dev < 10 * tol))[0]]
    verdict = LeeYangVerdict(max_dev <= tol, max_dev, tol, borderline=borderline,
                             unresolved=list(zs.unresolved))
    if not verdict.holds:
        return verdict
    absphase = np.sort(np.abs(np.angle(zs.roots)))
    # conjugate pairs (and the even-multiplicity root at z = -1) give equal |phase|
    phases = 0.5 * (absphase[0::2] + absphase[1::2])
    verdict.phases = phases
    verdict.gammas = 1.0 / phases**2
    verdict.first_zero_phase = float(phases[0])
    return verdict


def lee_yang(p: FugacityPolynomial, tol: float = DEFAULT_TOL, precision: str = P.DOUBLE):
    zs = find_zeros(p, precision=precision)
    return zs, classify(zs, p, tol)


def continuation_order(prev: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """Permutation of ``roots`` minimizing total displacement from ``prev``."""
    if len(prev) != len(roots):
        return np.arange(len(roots))
    _, cols = linear_sum_assignment(np.abs(prev[:, None] - roots[None, :]))
    return cols


def zero_trajectory(
    family,
    param_grid,
    tol: float = DEFAULT_TOL,
    precision: str = P.DOUBLE,
    threads: int = 1,
    engine: str = "auto",
) -> list[tuple[float, ZeroSet, LeeYangVerdict]]:
    """Zeros along a one-parameter family, roots continued by nearest assignment.

    ``family(param)`` returns a :class:`~lyzero.models.ModelInstance` or a
    :class:`FugacityPolynomial`.
    """
    from .engines import partition

    grid = [float(v) for v in param_grid]
    if not grid:
        raise ValueError("parameter grid is empty")
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("parameter grid must be strictly monotone")

    def one(args):
        index, param = args
        try:
            obj = family(param)
            poly = obj if isinstance(obj, FugacityPolynomial) else partition(obj, engine, precision=precision)
            zs = find_zeros(poly, precision=precision)
            return param, zs, classify(zs, poly, tol)
        except Exception as exc:
            raise TrajectoryError(index, param, exc) from exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, enumerate(grid)))
    prev = None
    for param, zs, _ in results:
        if prev is not None:
            idx = continuation_order(prev, zs.roots)
            zs.roots = zs.roots[idx]
            zs.radial_deviation = zs.radial_deviation[idx]
        prev = zs.roots
    return results
