"""Sufficient bounds for the Lee-Yang property at theta > 1, and their checks.

The single-spin transform ``phi(x) = (cosh x + theta) / (1 + theta)`` has only
imaginary zeros when ``theta <= 1``.  A ferromagnetic coupling that admits a
perfect matching with every matched coupling ``>= kappa`` extends this to

    theta <= sqrt(cosh(beta kappa))                 (any such matching)
    theta <= sqrt((exp(beta kappa) + 1) / 2)        (pairs with equal outside couplings)

This module evaluates those bounds, the closed-form two-spin kernel used to
derive them, and runs the exact engines to confirm or probe them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _precision as P
from .engines import partition
from .models import ModelInstance
from .structure import MatchingReport, bottleneck_matching
from .zeros import DEFAULT_TOL, LeeYangVerdict, classify, find_zeros

LIEB_SOKAL = "lieb_sokal"
BRANCH_I = "i"
BRANCH_II = "ii"


def bound_condition_i(beta_kappa: float) -> float:
    if beta_kappa < 0:
        raise ValueError("beta * kappa must be nonnegative")
    return math.sqrt(math.cosh(beta_kappa))


def bound_condition_ii(beta_kappa: float) -> float:
    if beta_kappa < 0:
        raise ValueError("beta * kappa must be nonnegative")
    return math.sqrt((math.exp(beta_kappa) + 1.0) / 2.0)


@dataclass
class BoundReport:
    kappa: float
    beta: float
    theta_bound_i: float
    theta_bound_ii: float | None = None
    kappa_ii: float = 0.0
    applicable: str | None = None

    @property
    def best_bound(self) -> float:
        return max(1.0, self.theta_bound_i, self.theta_bound_ii or 0.0)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "kappa_ii": self.kappa_ii,
            "beta": self.beta,
            "theta_bound_i": self.theta_bound_i,
            "theta_bound_ii": self.theta_bound_ii,
            "applicable": self.applicable,
        }


def bound_report(coupling, beta: float, theta: float | None = None,
                 structure: MatchingReport | None = None) -> BoundReport:
    """Bounds implied by the pairing structure of ``coupling`` at inverse temperature ``beta``.

    ``applicable`` names the weakest hypothesis that covers ``theta``: the
    single-spin regime, branch (i), branch (ii), or ``None``.
    """
    rep = structure or bottleneck_matching(coupling)
    kappa = rep.bottleneck_kappa if rep.condition_i else 0.0
    out = BoundReport(kappa=kappa, beta=beta, theta_bound_i=bound_condition_i(beta * kappa))
    if rep.both_conditions:
        out.kappa_ii = rep.kappa_ii
        out.theta_bound_ii = bound_condition_ii(beta * rep.kappa_ii)
    if theta is not None:
        if theta <= 1.0:
            out.applicable = LIEB_SOKAL
        elif kappa > 0 and theta <= out.theta_bound_i:
            out.applicable = BRANCH_I
        elif out.theta_bound_ii is not None and theta <= out.theta_bound_ii:
            out.applicable = BRANCH_II
    return out


@dataclass(frozen=True)
class TwoSpinKernel:
    """``exp(kappa D_x D_y) phi(x) phi(y)`` for the Blume-Capel transform."""

    kappa: float
    theta: float

    def __post_init__(self):
        if self.kappa < 0 or self.theta <= 0:
            raise ValueError("kernel needs kappa >= 0 and theta > 0")

    def psi(self, x, y):
        cu = np.cosh((x + y) / 2)
        cv = np.cosh((x - y) / 2)
        k, th = self.kappa, self.theta
        return (th * th - math.cosh(k) + 2 * th * cu * cv
                + math.exp(k) * cu * cu + math.exp(-k) * cv * cv)

    def __call__(self, x, y):
        return self.psi(x, y) / (1 + self.theta) ** 2

    def diagonal(self, y):
        """Kernel at ``x = y``: ``(e^k cosh^2 y + 2 theta cosh y + theta^2 - sinh k) / (1+theta)^2``."""
        c = np.cosh(y)
        k, th = self.kappa, self.theta
        return (math.exp(k) * c * c + 2 * th * c + th * th - math.sinh(k)) / (1 + th) ** 2


def two_spin_kernel_value(k: TwoSpinKernel, x: complex, y: complex) -> complex:
    return complex(k(complex(x), complex(y)))


def omega_pm(kappa: float) -> tuple[float, float]:
    """Factorization weights ``(omega_-, omega_+)`` on the slice ``theta^2 = cosh kappa``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    a = math.sqrt(math.cosh(kappa))
    b = math.sqrt(2.0) * math.sinh(kappa / 2)
    return math.exp(-kappa) * (a - b), math.exp(-kappa) * (a + b)


def omega_pm_theta(kappa: float, theta: float) -> tuple[float, float]:
    """``exp(-kappa) (theta -+ sqrt(theta^2 - 1))`` for ``theta >= 1``."""
    r = math.sqrt(theta * theta - 1.0)
    return math.exp(-kappa) * (theta - r), math.exp(-kappa) * (theta + r)


class BoundViolated(ValueError):
    pass


def epsilon_pm(K_ij: float, theta: float) -> tuple[float, float]:
    """Values ``(eps^-, eps^+)`` of ``cosh y`` at which the merged pair kernel vanishes.

    Requires ``theta^2 <= (e^K + 1) / 2`` so that the discriminant is real.
    """
    if K_ij <= 0:
        raise ValueError("pair coupling must be positive")
    eK = math.exp(K_ij)
    disc = (eK - 1.0) * ((eK + 1.0) / 2.0 - theta * theta)
    if disc < 0:
        # allow rounding at the boundary of the bound
        if disc < -1e-12 * (eK - 1.0) * theta * theta:
            raise BoundViolated("delta imaginary; bound violated")
        disc = 0.0
    delta = math.sqrt(disc)
    return (-theta - delta) / eK, (-theta + delta) / eK


def pair_zero_locations(K_ij: float, theta: float) -> np.ndarray:
    """Zeros ``y`` of the merged pair kernel in the strip ``0 <= Im y <= pi``."""
    eps = epsilon_pm(K_ij, theta)
    return np.array([1j * math.acos(e) for e in eps])


@dataclass
class CorollaryBounds:
    delta_max: float
    q_max: float
    half_kappa: float

    @property
    def delta_max_exceeds_half_kappa(self) -> bool:
        return self.delta_max > self.half_kappa


def corollary_bounds(beta: float, kappa: float) -> CorollaryBounds:
    """Largest anisotropy ``Delta`` and thinning probability ``q`` covered by branch (i)."""
    if beta <= 0 or kappa <= 0:
        raise ValueError("beta and kappa must be positive")
    bk = beta * kappa
    # log(e^a + e^-a) computed without overflow
    log_sum = bk + math.log1p(math.exp(-2 * bk))
    delta_max = (math.log(2.0) + log_sum) / (2.0 * beta)
    t = bound_condition_i(bk) if bk < 700 else math.inf
    q_max = 1.0 if math.isinf(t) else t / (1.0 + t)
    return CorollaryBounds(delta_max, q_max, kappa / 2.0)


@dataclass
class TheoremRecord:
    theta: float
    kappa: float
    kappa_ii: float
    beta: float
    branch: str | None
    bound_used: float | None
    predicted: bool | None
    observed: bool
    max_radial_deviation: float
    precision: str = P.DOUBLE
    notes: list[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.predicted is None or self.predicted == self.observed

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "kappa": self.kappa,
            "kappa_ii": self.kappa_ii,
            "beta": self.beta,
            "branch": self.branch,
            "bound_used": self.bound_used,
            "predicted": "theorem silent" if self.predicted is None else self.predicted,
            "observed": self.observed,
            "max_radial_deviation": self.max_radial_deviation,
            "precision": self.precision,
            "consistent": self.consistent,
            "notes": self.notes,
        }


def _verdict(m: ModelInstance, tol: float, engine: str, precision: str, spec=None) -> LeeYangVerdict:
    poly = partition(m, engine, spec=spec, precision=precision)
    return classify(find_zeros(poly, precision=precision), poly, tol)


def verify_theorem1(
    m: ModelInstance,
    tol: float = DEFAULT_TOL,
    engine: str = "auto",
    precision: str = "auto",
    spec=None,
) -> TheoremRecord:
    """Compare the predicted Lee-Yang property with the computed zeros.

    ``precision="auto"`` works in double precision and repeats the computation
    in extended precision when the verdict is borderline, has zeros the
    double coefficients cannot resolve, or contradicts the prediction.
    """
    report = bound_report(m.coupling, m.beta, m.theta)
    branch = report.applicable
    bound_used = {
        LIEB_SOKAL: 1.0,
        BRANCH_I: report.theta_bound_i,
        BRANCH_II: report.theta_bound_ii,
        None: None,
    }[branch]
    predicted = True if branch is not None else None
    used = P.DOUBLE if precision == "auto" else precision
    verdict = _verdict(m, tol, engine, used, spec)
    notes = []
    if precision == "auto" and (verdict.borderline or verdict.unresolved or (predicted and not verdict.holds)):
        used = P.EXTENDED
        verdict = _verdict(m, tol, engine, used, spec)
        notes.append("recomputed in extended precision")
    if branch is None:
        notes.append("hypotheses not met: theorem silent")
    return TheoremRecord(
        theta=m.theta,
        kappa=report.kappa,
        kappa_ii=report.kappa_ii,
        beta=m.beta,
        branch=branch,
        bound_used=bound_used,
        predicted=predicted,
        observed=verdict.holds,
        max_radial_deviation=verdict.max_radial_deviation,
        precision=used,
        notes=notes,
    )


@dataclass
class SharpnessResult:
    theta_lo: float | None
    theta_hi: float | None
    theta_bound: float
    grid: list[float]
    holds: list[bool]
    monotone: bool

    @property
    def width(self) -> float | None:
        return None if self.theta_lo is None or self.theta_hi is None else self.theta_hi - self.theta_lo

    @property
    def gap(self) -> float | None:
        """Slack between the empirical threshold and the bound."""
        return None if self.theta_lo is None else self.theta_lo - self.theta_bound

    @property
    def consistent(self) -> bool:
        """False only if the property provably fails below the bound.

        A sharp bound sits inside the final bracket, so the test is against
        the upper end.
        """
        return self.theta_hi is None or self.theta_bound <= self.theta_hi

    @property
    def bound_below_bracket(self) -> bool:
        return self.theta_lo is not None and self.theta_bound <= self.theta_lo

    def to_dict(self) -> dict:
        return {
            "theta_crit_interval": [self.theta_lo, self.theta_hi],
            "theta_bound": self.theta_bound,
            "gap": self.gap,
            "width": self.width,
            "monotone": self.monotone,
            "consistent": self.consistent,
            "bound_below_bracket": self.bound_below_bracket,
            "grid": self.grid,
            "holds": self.holds,
        }


def sharpness_scan(
    family,
    grid,
    theta_bound: float | None = None,
    tol: float = DEFAULT_TOL,
    width: float = 1e-4,
    engine: str = "auto",
) -> SharpnessResult:
    """Locate where the Lee-Yang property is lost along ``theta -> family(theta)``.

    The grid is scanned in double precision; the bracket between the last
    grid point that holds and the first that fails is then bisected to
    ``width`` in extended precision.  A verdict that is not monotone in theta
    is reported through ``monotone``, not raised.
    """
    grid = sorted(float(t) for t in grid)
    holds = [_verdict(family(t), tol, engine, P.DOUBLE).holds for t in grid]
    if theta_bound is None:
        m0 = family(grid[0])
        theta_bound = bound_report(m0.coupling, m0.beta).best_bound
    first_fail = next((i for i, h in enumerate(holds) if not h), None)
    monotone = first_fail is None or not any(holds[first_fail:])
    if first_fail is None:
        return SharpnessResult(grid[-1], None, theta_bound, grid, holds, monotone)
    if first_fail == 0:
        return SharpnessResult(None, grid[0], theta_bound, grid, holds, monotone)
    lo, hi = grid[first_fail - 1], grid[first_fail]
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if _verdict(family(mid), tol, engine, P.EXTENDED).holds:
            lo = mid
        else:
            hi = mid
    return SharpnessResult(lo, hi, theta_bound, grid, holds, monotone)


def kernel_nonvanishing_margin(kappa: float, samples: int = 10_000, seed: int = 0,
                               re_max: float = 5.0, im_max: float = 2 * math.pi) -> float:
    """Smallest ``|Psi| / (sum of term moduli)`` over random points with positive real parts.

    Uses ``theta^2 = cosh kappa``.  The kernel is ``2 pi i``-periodic in each
    variable, so bounding the imaginary parts loses nothing; large real parts
    are dominated by the positive ``e^kappa c_u^2`` term.
    """
    rng = np.random.default_rng(seed)
    theta = math.sqrt(math.cosh(kappa))
    x = rng.uniform(1e-6, re_max, samples) + 1j * rng.uniform(-im_max, im_max, samples)
    y = rng.uniform(1e-6, re_max, samples) + 1j * rng.uniform(-im_max, im_max, samples)
    psi = TwoSpinKernel(kappa, theta).psi(x, y)
    cu, cv = np.cosh((x + y) / 2), np.cosh((x - y) / 2)
    scale = (math.exp(kappa) * np.abs(cu) ** 2 + math.exp(-kappa) * np.abs(cv) ** 2
             + 2 * theta * np.abs(cu * cv))
    return float(np.min(np.abs(psi) / scale))
