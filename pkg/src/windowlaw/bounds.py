"""Exponential bounds, Borel-Cantelli diagnostics, exact inequality checks and
Cramér / Erdős-Rényi rates.

The two exponential expressions are

    upper(d) = exp(-eps^2 (1-delta)^3 / sigma^2 * d)
    lower(d) = exp(-eps^2 (1+delta)^2 (1+gamma) / (sigma^2 (1-delta)) * d)

The symmetrisation inequality checked exactly is

    P(|S_n| > 2x + y) <= sum_k P(|X_k| > y) + 4 P(|S_n| > x)^2,

and the maximal inequality is P(max_{k<=n} S_k > x) <= 2 P(S_n > x), both for
independent symmetric summands.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import optimize

from .distributions import DistributionSpec, TwoPoint
from .errors import DomainError, InequalityViolation
from .norming import BoundParams, SubsequenceSpec
from .svf import psi_log_many

__all__ = [
    "BoundParams",
    "kolmogorov_upper_bound",
    "kolmogorov_lower_bound",
    "BorelCantelliReport",
    "borel_cantelli_diagnostic",
    "KHJReport",
    "khj_check",
    "khj_sweep",
    "LevyReport",
    "levy_check",
    "levy_sweep",
    "RateFunctionModel",
    "cramer_rate",
    "er_rho",
    "ERSimulation",
    "er_simulate",
]


# -- exponential bound expressions ------------------------------------------------------


def kolmogorov_upper_bound(params: BoundParams, d_n):
    """exp{-(eps^2 (1-delta)^3 / sigma^2) d_n}."""
    k = params.epsilon**2 * (1.0 - params.delta) ** 3 / params.sigma**2
    return np.exp(-k * np.asarray(d_n, dtype=float))


def kolmogorov_lower_bound(params: BoundParams, d_n):
    """exp{-(eps^2 (1+delta)^2 (1+gamma) / (sigma^2 (1-delta))) d_n}."""
    k = (
        params.epsilon**2
        * (1.0 + params.delta) ** 2
        * (1.0 + params.gamma)
        / (params.sigma**2 * (1.0 - params.delta))
    )
    return np.exp(-k * np.asarray(d_n, dtype=float))


# -- Borel-Cantelli -----------------------------------------------------------------------

BC_MARGIN = 0.1


@dataclass
class BorelCantelliReport:
    alpha: float
    k_checkpoints: tuple[int, int, int]
    partial_sums: tuple[float, float, float]
    decay_exponent: float  # fitted nu in summand ~ k^-nu
    verdict: str  # Converges | Diverges | Borderline


def borel_cantelli_diagnostic(sub: SubsequenceSpec, alpha: float, k_max: int = 100_000) -> BorelCantelliReport:
    """Classify sum_k exp(-alpha d_{n_k}) along n_k = psi(c k).

    The decay exponent is the least-squares slope of log summand against
    log k over [k_max/4, k_max]; it is compared with 1 +- BC_MARGIN.
    """
    if k_max < 100:
        raise DomainError("k_max must be at least 100")
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    k = np.arange(sub.k_start, k_max + 1, dtype=float)
    s = psi_log_many(sub.spec, sub.c * k)  # log n_k
    d = sub.spec.log_L(s) + np.log(s)
    log_term = -alpha * d
    term = np.exp(log_term)
    csum = np.cumsum(term)
    ks = (k_max // 4, k_max // 2, k_max)
    sums = tuple(float(csum[K - sub.k_start]) for K in ks)
    sel = k >= k_max / 4
    slope = np.polyfit(np.log(k[sel]), log_term[sel], 1)[0]
    nu = float(-slope)
    if nu > 1.0 + BC_MARGIN:
        verdict = "Converges"
    elif nu < 1.0 - BC_MARGIN:
        verdict = "Diverges"
    else:
        verdict = "Borderline"
    return BorelCantelliReport(alpha, ks, sums, nu, verdict)


# -- exact enumeration ------------------------------------------------------------------


def _exact_atoms(dist: DistributionSpec) -> list[tuple[Fraction, Fraction]]:
    if not dist.discrete:
        raise DomainError(f"{dist} is not discrete; exact enumeration needs atoms")
    return dist.atoms()


def _convolve(a: dict, b: list[tuple[Fraction, Fraction]]) -> dict:
    out: dict = {}
    for x, p in a.items():
        for y, q in b:
            out[x + y] = out.get(x + y, 0) + p * q
    return out


class _SumLaw:
    """Exact law of S_n as sorted values with suffix sums of |S_n| masses."""

    def __init__(self, dist: DistributionSpec, n: int):
        atoms = _exact_atoms(dist)
        law: dict = {Fraction(0): Fraction(1)}
        for _ in range(n):
            law = _convolve(law, atoms)
        self.law = law
        fold: dict = {}
        for x, p in law.items():
            fold[abs(x)] = fold.get(abs(x), 0) + p
        self.abs_vals = sorted(fold)
        masses = [fold[v] for v in self.abs_vals]
        suffix = [Fraction(0)] * (len(masses) + 1)
        for i in range(len(masses) - 1, -1, -1):
            suffix[i] = suffix[i + 1] + masses[i]
        self._suffix = suffix
        self.atoms = atoms

    def p_abs_gt(self, t: Fraction) -> Fraction:
        return self._suffix[bisect_right(self.abs_vals, t)]

    def p_gt(self, t: Fraction) -> Fraction:
        return sum((p for x, p in self.law.items() if x > t), Fraction(0))


@dataclass(frozen=True)
class KHJReport:
    n: int
    x: float
    y: float
    lhs: Fraction
    sum_single: Fraction
    squared: Fraction  # 4 P(|S_n| > x)^2

    @property
    def rhs(self) -> Fraction:
        return self.sum_single + self.squared

    @property
    def slack(self) -> Fraction:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def _check_symmetric(dist: DistributionSpec) -> None:
    if not dist.symmetric:
        raise DomainError(f"{dist} is not symmetric; the inequality is stated for symmetric summands")


def _khj_from_law(sl: _SumLaw, n: int, x, y, strict: bool) -> KHJReport:
    fx, fy = Fraction(x), Fraction(y)
    single = sum((p for v, p in sl.atoms if abs(v) > fy), Fraction(0))
    rep = KHJReport(n, float(x), float(y), sl.p_abs_gt(2 * fx + fy), n * single, 4 * sl.p_abs_gt(fx) ** 2)
    if strict and not rep.holds:
        raise InequalityViolation(
            f"symmetrisation inequality fails at n={n}, x={x}, y={y}: {rep.lhs} > {rep.rhs}"
        )
    return rep


def khj_check(n: int, x: float, y: float, dist: DistributionSpec, strict: bool = True) -> KHJReport:
    """Exact P(|S_n| > 2x+y) against n P(|X| > y) + 4 P(|S_n| > x)^2."""
    if not 1 <= n <= 22:
        raise DomainError("n must lie in 1..22 for exact enumeration")
    _check_symmetric(dist)
    return _khj_from_law(_SumLaw(dist, n), n, x, y, strict)


@dataclass
class SweepReport:
    checked: int
    failures: list = field(default_factory=list)
    min_slack: Fraction | None = None

    @property
    def passed(self) -> bool:
        return not self.failures


def khj_sweep(n_values, dist: DistributionSpec, step: float = 0.5) -> SweepReport:
    """Check every (x, y) in {step, 2 step, ..., n}^2 for each n."""
    _check_symmetric(dist)
    rep = SweepReport(0)
    for n in n_values:
        sl = _SumLaw(dist, int(n))
        grid = [step * j for j in range(1, int(round(n / step)) + 1)]
        for x in grid:
            for y in grid:
                r = _khj_from_law(sl, int(n), x, y, strict=False)
                rep.checked += 1
                if rep.min_slack is None or r.slack < rep.min_slack:
                    rep.min_slack = r.slack
                if not r.holds:
                    rep.failures.append(r)
    return rep


@dataclass(frozen=True)
class LevyReport:
    n: int
    x: float
    p_max: Fraction  # P(max_{k<=n} S_k > x)
    twice_end: Fraction  # 2 P(S_n > x)

    @property
    def holds(self) -> bool:
        return self.p_max <= self.twice_end


def _levy_from(atoms, n: int, x, strict: bool) -> LevyReport:
    fx = Fraction(x)
    alive: dict = {Fraction(0): Fraction(1)}  # paths whose maximum has not exceeded x
    absorbed = Fraction(0)
    law: dict = {Fraction(0): Fraction(1)}
    for _ in range(n):
        alive = _convolve(alive, atoms)
        law = _convolve(law, atoms)
        for v in [v for v in alive if v > fx]:
            absorbed += alive.pop(v)
    end = sum((p for v, p in law.items() if v > fx), Fraction(0))
    rep = LevyReport(n, float(x), absorbed, 2 * end)
    if strict and not rep.holds:
        raise InequalityViolation(f"maximal inequality fails at n={n}, x={x}: {rep.p_max} > {rep.twice_end}")
    return rep


def levy_check(n: int, x: float, dist: DistributionSpec, strict: bool = True) -> LevyReport:
    """Exact P(max_{k<=n} S_k > x) against 2 P(S_n > x) for symmetric summands."""
    if not 1 <= n <= 22:
        raise DomainError("n must lie in 1..22 for exact enumeration")
    _check_symmetric(dist)
    return _levy_from(_exact_atoms(dist), n, x, strict)


def levy_sweep(n_values, dist: DistributionSpec) -> SweepReport:
    _check_symmetric(dist)
    atoms = _exact_atoms(dist)
    rep = SweepReport(0)
    for n in n_values:
        for x in range(0, int(n) + 1):
            r = _levy_from(atoms, int(n), x, strict=False)
            rep.checked += 1
            slack = r.twice_end - r.p_max
            if rep.min_slack is None or slack < rep.min_slack:
                rep.min_slack = slack
            if not r.holds:
                rep.failures.append(r)
    return rep


# -- rate functions ------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFunctionModel:
    """A law with a moment generating function, for Cramér-rate computations."""

    dist: DistributionSpec

    def __post_init__(self):
        if not self.dist.mgf_available:
            raise DomainError(f"{self.dist} has no moment generating function")

    @property
    def t_domain(self) -> tuple[float, float]:
        return self.dist.t_domain

    @property
    def x_max(self) -> float:
        return self.dist.x_max

    def log_mgf(self, t):
        return self.dist.log_mgf(t)

    @cached_property
    def rate_at_max(self) -> float:
        """lim_{x -> x_max} I(x) = -log P(X = x_max) (inf if no atom there)."""
        m = self.dist.mass_at_max
        return -math.log(m) if m > 0 else math.inf


_T_TOL = 1e-12


def cramer_rate(model: RateFunctionModel, x: float) -> float:
    """I(x) = sup_t (t x - log E e^{tX}) for 0 <= x <= x_max.

    x >= 0 exceeds the mean, so the optimum lies at t >= 0.  The convex map
    t -> log E e^{tX} - t x is bracketed by doubling t until it stops
    decreasing (or the domain ends), then minimised by bounded Brent search.
    """
    if x < 0:
        raise DomainError("rate is evaluated on x >= 0 (right of the mean)")
    if x == 0:
        return 0.0
    if x > model.x_max:
        raise DomainError(f"x = {x} exceeds the essential supremum {model.x_max}")
    if x == model.x_max:
        return model.rate_at_max
    obj = lambda t: float(model.log_mgf(t)) - t * x
    t_max = model.t_domain[1]
    t_hi = min(1.0, t_max)
    while t_hi < t_max and obj(min(2.0 * t_hi, t_max)) < obj(t_hi):
        t_hi = min(2.0 * t_hi, t_max)
    t_hi = min(2.0 * t_hi, t_max)
    res = optimize.minimize_scalar(
        obj,
        bounds=(0.0, t_hi),
        method="bounded",
        options={"xatol": _T_TOL, "maxiter": 2000},
    )
    return max(0.0, -float(res.fun))


def er_rho(model: RateFunctionModel, c: float) -> float:
    """rho(c) = sup{x >= 0 : I(x) <= 1/c}; x_max when the rate saturates below 1/c."""
    if not c > 0:
        raise DomainError("c must be positive")
    target = 1.0 / c
    xm = model.x_max
    if math.isfinite(xm):
        if model.rate_at_max <= target:
            return xm
        hi = xm
    else:
        hi = 1.0
        while cramer_rate(model, hi) <= target:
            hi *= 2.0
    return optimize.brentq(lambda x: cramer_rate(model, x) - target, 0.0, hi, xtol=1e-14, rtol=1e-14)


# -- Erdős-Rényi simulation ------------------------------------------------------------------


@dataclass(frozen=True)
class ERSimulation:
    variant_a: float  # width ceil(c log k), normaliser c log k
    variant_b: float  # width ceil(c log n), normaliser c log n
    seed: int
    n: int
    c: float


def er_simulate(model: RateFunctionModel, c: float, n: int, seed: int) -> ERSimulation:
    """Maximal normalised window sums for both readings of the window width.

    Variant A takes T_{k, k+ceil(c log k)} / (c log k) over k >= 2 with the
    window inside 1..n; variant B takes T_{k, k+ceil(c log n)} / (c log n).
    The stream is drawn from a PCG64 generator seeded with ``seed``.
    """
    if n < 100:
        raise DomainError("n must be at least 100")
    if not c > 0:
        raise DomainError("c must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    x = model.dist.sample(rng, n)
    s = np.concatenate(([0.0], np.cumsum(x)))

    k = np.arange(2, n, dtype=np.int64)
    width = np.ceil(c * np.log(k)).astype(np.int64)
    ok = k + width <= n
    k, width = k[ok], width[ok]
    va = float(np.max((s[k + width] - s[k]) / (c * np.log(k)))) if k.size else 0.0

    wb = int(math.ceil(c * math.log(n)))
    vb = float(np.max(s[wb:] - s[:-wb]) / (c * math.log(n)))
    return ERSimulation(va, vb, seed, n, c)
