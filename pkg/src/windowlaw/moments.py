"""Moment conditions E f^{-1}(X^2) < inf and E b^{-1}(|X|) < inf.

Three routes, chosen by the law:

* discrete laws: exact finite sums over atoms;
* continuous laws: the tail-sum identity

      E g(|X|) = n_min + sum_{m >= n_min} P(|X| > h(m)),

  where g is the step inverse of a threshold sequence h (sqrt f or the
  running maximum of b).  The first ``_HEAD`` terms are summed exactly; the
  remainder is bracketed by integrals over a floor-free threshold, evaluated
  in log coordinates so arbitrarily heavy polylog tails are reachable.
* ``LogTailPareto``: the verdict comes from comparing growth exponents,
  which is exact for that family; quadrature only supplies the estimate.

Growth forms describe functions of |x| as

    x^e (log x)^alpha (log log x)^beta exp(kappa (log x)^theta) [* log_m x]

with the optional iterated-log factor used by deep ``IterLog`` members.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from .distributions import DistributionSpec, LogTailPareto
from .errors import DomainError
from .norming import b_envelope, b_inverse, b_seq, f_envelope, f_inverse, f_seq, n_min
from .svf import (
    ExpLogBeta,
    ExpSqrtLog,
    IterLog,
    LogLogPow,
    LogPow,
    LogPowOverLogLogPow,
    SlowlyVarying,
)

CRITICAL_TOL = 1e-9
_HEAD = 1 << 16


class Mode(str, Enum):
    F_INVERSE = "FInverse"  # E f^{-1}(X^2)
    B_INVERSE = "BInverse"  # E b^{-1}(|X|)


class Verdict(str, Enum):
    FINITE = "Finite"
    INFINITE = "Infinite"
    UNDETERMINED = "Undetermined"


class Method(str, Enum):
    CLOSED_FORM = "ClosedForm"
    QUADRATURE = "Quadrature"
    TAIL_COMPARISON = "TailComparison"


@dataclass(frozen=True)
class MomentVerdict:
    condition: str
    estimate: float
    verdict: Verdict
    method: Method
    error_bound: float

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "estimate": self.estimate,
            "verdict": self.verdict.value,
            "method": self.method.value,
            "error_bound": self.error_bound,
        }


# -- growth forms ------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthForm:
    e: float
    alpha: float = 0.0
    beta: float = 0.0
    kappa: float = 0.0
    theta: float = 0.0
    iter_log: int = 0  # extra factor log_m x (m-fold iterated log); 0 = none

    def log_plus(self, x) -> np.ndarray:
        """log G(x) with every logarithm replaced by log+ = max(log, 1)."""
        with np.errstate(divide="ignore"):
            return self.log_plus_w(np.log(np.asarray(x, dtype=float)))

    def log_plus_w(self, lx) -> np.ndarray:
        """log G(e^lx), usable far beyond float range of x."""
        lx = np.asarray(lx, dtype=float)
        lp = np.maximum(lx, 1.0)
        llp = np.maximum(np.log(lp), 1.0)
        out = self.e * lx + self.alpha * np.log(lp) + self.beta * np.log(llp)
        if self.kappa:
            out = out + self.kappa * lp**self.theta
        if self.iter_log:
            v = lp
            for _ in range(self.iter_log - 1):
                v = np.maximum(np.log(v), 1.0)
            out = out + np.log(v)
        return out

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, np.exp(self.log_plus(np.where(x > 0, x, 1.0))), 0.0 if self.e > 0 else 1.0)


def growth_form(spec: SlowlyVarying, mode: Mode | str) -> GrowthForm:
    """Growth of f^{-1}(x^2) (FInverse) or b^{-1}(x) (BInverse) in x = |X|.

    f^{-1}(y) is asymptotic to y L(y)/d(y) when a d < n and to y otherwise;
    b^{-1}(y) is of exact order y^2 L(y^2) d(y^2).  Constants are dropped:
    they cannot change finiteness of an expectation.
    """
    mode = Mode(mode)
    f = mode is Mode.F_INVERSE
    if isinstance(spec, LogPow):
        return GrowthForm(2.0, spec.p, -1.0 if f else 1.0)
    if isinstance(spec, IterLog):
        if spec.m == 1:
            return GrowthForm(2.0, 1.0, -1.0 if f else 1.0)
        if f:
            return GrowthForm(2.0)
        if spec.m == 2:
            return GrowthForm(2.0, 0.0, 2.0)
        return GrowthForm(2.0, 0.0, 1.0, iter_log=spec.m)
    if isinstance(spec, LogPowOverLogLogPow):
        return GrowthForm(2.0, spec.p, -(spec.q + 1.0) if f else 1.0 - spec.q)
    if isinstance(spec, LogLogPow):
        return GrowthForm(2.0, 0.0, spec.q - 1.0 if f else spec.q + 1.0)
    if isinstance(spec, ExpSqrtLog):
        return GrowthForm(2.0, -0.5 if f else 0.5, 0.0, math.sqrt(2.0), 0.5)
    if isinstance(spec, ExpLogBeta):
        bt, g = spec.beta, spec.gamma_exp
        return GrowthForm(2.0, -(bt + g) if f else bt - g, 0.0, 2.0**bt, bt)
    raise DomainError(f"no growth form for {spec}")


def _cmp(diff: float) -> int | None:
    """Sign of diff, 0 for an exact tie, None for an unresolvable near-tie."""
    if diff == 0.0:
        return 0
    if abs(diff) <= CRITICAL_TOL:
        return None
    return 1 if diff > 0 else -1


def classify_tail(form: GrowthForm, dist: LogTailPareto) -> tuple[Verdict, str]:
    """Finiteness of E G(|X|) for a LogTailPareto law, by exponent comparison.

    In w = log x the integrand is e^{s w} w^{alpha - a} (log w)^{beta - b}
    exp(kappa w^theta) [* log_{m-2} w], s = e + 1 - tail_a.  Levels are
    compared in order of dominance; an exact tie at the last level diverges
    (the integral of 1/(w log w)).
    """
    s = form.e + 1.0 - dist.tail_a
    c = _cmp(s)
    if c is None:
        return Verdict.UNDETERMINED, f"power exponent s = {s!r} within {CRITICAL_TOL} of 0"
    if c:
        return (Verdict.INFINITE if c > 0 else Verdict.FINITE), f"power exponent s = {s:g}"
    if form.kappa and form.theta > 0:
        v = Verdict.INFINITE if form.kappa > 0 else Verdict.FINITE
        return v, f"s = 0, exp((log x)^{form.theta:g}) factor with kappa = {form.kappa:g}"
    da = form.alpha - dist.log_exp + 1.0
    c = _cmp(da)
    if c is None:
        return Verdict.UNDETERMINED, f"log exponent {da - 1.0!r} within {CRITICAL_TOL} of -1"
    if c:
        return (Verdict.INFINITE if c > 0 else Verdict.FINITE), f"s = 0, log exponent {da - 1.0:g}"
    db = form.beta - dist.loglog_exp + 1.0
    c = _cmp(db)
    if c is None:
        return Verdict.UNDETERMINED, f"loglog exponent {db - 1.0!r} within {CRITICAL_TOL} of -1"
    if c:
        return (Verdict.INFINITE if c > 0 else Verdict.FINITE), f"log tie, loglog exponent {db - 1.0:g}"
    return Verdict.INFINITE, "log and loglog ties: integral of 1/(w log w) diverges"


# -- expectation of step inverses ----------------------------------------------------


def _threshold_head(spec: SlowlyVarying, mode: Mode, lo: int, count: int) -> np.ndarray:
    m = np.arange(lo, lo + count, dtype=float)
    if mode is Mode.F_INVERSE:
        return np.sqrt(f_seq(spec, m))
    return np.maximum.accumulate(b_seq(spec, m))


def _log_envelope_threshold(spec: SlowlyVarying, mode: Mode, u):
    """log of the floor-free threshold at m = e^u (no overflow for large u)."""
    u = np.asarray(u, dtype=float)
    d = spec.log_L(u) + np.log(u)
    if mode is Mode.F_INVERSE:
        return 0.5 * np.minimum(u - spec.log_L(u) + np.log(d), u)
    return 0.5 * (u - spec.log_L(u) - np.log(d))


# beyond log-coordinate 1e10 the exponent of the integrands cancels too much to evaluate
_Z_MAX = math.log(1e10)


def _log_integral(log_j, z0: float, points=None) -> tuple[float, float]:
    """integral_{z0}^inf exp(log_j(z)) dz with the piece past ``_Z_MAX`` extrapolated.

    The extrapolation assumes J(z) ~ z^-nu from the local slope (conservative:
    exponential decay gives less); its full size is added to the error.
    """

    def integrand(z):
        lj = log_j(z)
        return math.exp(lj) if lj > -745.0 else 0.0

    if z0 >= _Z_MAX:
        raise DomainError("integration start beyond the evaluable range")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(integrand, z0, _Z_MAX, points=points, limit=400, epsabs=1e-14, epsrel=1e-10)
    lj1 = log_j(_Z_MAX)
    if lj1 > -745.0:
        h = 0.05
        nu = -(lj1 - log_j(_Z_MAX - h)) / h * _Z_MAX
        tail = math.exp(lj1) * _Z_MAX / (nu - 1.0) if nu > 1.0 else math.inf
        val += tail
        err += tail
    return val, err


def _remainder(spec, mode, dist: DistributionSpec, u0: float, shift: float) -> tuple[float, float]:
    """integral_{m > e^u0} P(|X| > threshold(m) * e^shift) dm, in z = log log m."""

    def log_j(z):
        u = math.exp(z)
        return z + u + float(dist.log_tail_abs(_log_envelope_threshold(spec, mode, u) + shift))

    return _log_integral(log_j, math.log(u0))


def _tail_sum(spec: SlowlyVarying, dist: DistributionSpec, mode: Mode) -> tuple[float, float]:
    """(estimate, error bound) of E g(|X|) through the tail-sum identity."""
    lo = n_min(spec)
    h = _threshold_head(spec, mode, lo, _HEAD)
    head = math.fsum(dist.tail_abs(h))
    M = lo + _HEAD
    uM = math.log(M)
    # floor effects and the running maximum move the threshold by at most this factor
    eps = 2.0 * float(spec.L_u(uM)) / M
    shift = math.log1p(eps)
    r_lo, e_lo = _remainder(spec, mode, dist, uM, shift)
    r_hi, e_hi = _remainder(spec, mode, dist, uM, -shift)
    r_hi += float(dist.tail_abs(h[-1]))
    est = lo + head + 0.5 * (r_lo + r_hi)
    err = 0.5 * (r_hi - r_lo) + e_lo + e_hi + 1e-15 * _HEAD * max(head, 1.0)
    return est, err


def _discrete_expectation(spec: SlowlyVarying, dist: DistributionSpec, mode: Mode) -> float:
    total = 0.0
    for v, p in dist.atoms():
        x = abs(float(v))
        g = f_inverse(spec, x * x) if mode is Mode.F_INVERSE else b_inverse(spec, x)
        total += float(p) * g
    return total


def moment_condition(spec: SlowlyVarying, dist: DistributionSpec, mode: Mode | str) -> MomentVerdict:
    """Decide and estimate E f^{-1}(X^2) (FInverse) or E b^{-1}(|X|) (BInverse)."""
    mode = Mode(mode)
    cond = mode.value
    if dist.discrete:
        est = _discrete_expectation(spec, dist, mode)
        return MomentVerdict(cond, est, Verdict.FINITE, Method.CLOSED_FORM, 0.0)
    if isinstance(dist, LogTailPareto):
        verdict, _ = classify_tail(growth_form(spec, mode), dist)
        if verdict is not Verdict.FINITE:
            return MomentVerdict(cond, math.inf, verdict, Method.TAIL_COMPARISON, math.inf)
        est, err = _tail_sum(spec, dist, mode)
        return MomentVerdict(cond, est, verdict, Method.TAIL_COMPARISON, err)
    est, err = _tail_sum(spec, dist, mode)
    return MomentVerdict(cond, est, Verdict.FINITE, Method.QUADRATURE, err)


# -- closed-form growth conditions --------------------------------------------------


def condition_label(spec: SlowlyVarying, variant: str) -> str:
    """Human-readable form of the closed-form condition E G(|X|) < inf."""
    form = growth_form(spec, Mode.F_INVERSE if variant == "f" else Mode.B_INVERSE)
    parts = ["X^2"]
    if form.alpha:
        parts.append(f"(log+|X|)^{form.alpha:g}")
    if form.beta:
        parts.append(f"(log+log+|X|)^{form.beta:g}")
    if form.kappa:
        parts.append(f"exp({form.kappa:g} (log+|X|)^{form.theta:g})")
    if form.iter_log:
        parts.append(f"log+_{form.iter_log}|X|")
    return "E " + " ".join(parts)


def _expect_continuous(form: GrowthForm, dist: DistributionSpec) -> tuple[float, float]:
    """E G(|X|) = integral of G'(x) P(|X| > x) dx (G(0) = 0), in log coordinates.

    With w = log x the integrand is G(e^w) P(|X| > e^w) dlogG/dw; below w = 3
    it is integrated in w, above in z = log w so polylog tails stay in reach.
    """
    def dlog_g(w):
        h = 1e-6 * max(1.0, abs(w))
        return (float(form.log_plus_w(w + h)) - float(form.log_plus_w(w - h))) / (2 * h)

    def log_j_w(w):
        return float(form.log_plus_w(w)) + float(dist.log_tail_abs(w)) + math.log(dlog_g(w))

    w1 = 3.0
    kinks = [1.0, math.e]
    if isinstance(dist, LogTailPareto):
        kinks.append(math.log(dist.x_cut * dist.scale))
    kinks = sorted(k for k in kinks if -50.0 < k < w1)

    def low(w):
        lj = log_j_w(w)
        return math.exp(lj) if lj > -745.0 else 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        lo_val, lo_err = integrate.quad(low, -50.0, w1, points=kinks or None, limit=400, epsrel=1e-11)
    hi_val, hi_err = _log_integral(lambda z: z + log_j_w(math.exp(z)), math.log(w1))
    return lo_val + hi_val, lo_err + hi_err


def growth_condition(spec: SlowlyVarying, dist: DistributionSpec, variant: str = "f") -> MomentVerdict:
    """Closed-form moment condition attached to a family.

    variant "f" is the explicit form of E f^{-1}(X^2) < inf, variant "b" that
    of E b^{-1}(|X|) < inf, both with log replaced by log+ = max(log, 1).
    """
    if variant not in ("f", "b"):
        raise ValueError("variant must be 'f' or 'b'")
    form = growth_form(spec, Mode.F_INVERSE if variant == "f" else Mode.B_INVERSE)
    label = condition_label(spec, variant)
    if dist.discrete:
        est = math.fsum(float(p) * float(form(abs(float(v)))) for v, p in dist.atoms())
        return MomentVerdict(label, est, Verdict.FINITE, Method.CLOSED_FORM, 0.0)
    if isinstance(dist, LogTailPareto):
        verdict, _ = classify_tail(form, dist)
        if verdict is not Verdict.FINITE:
            return MomentVerdict(label, math.inf, verdict, Method.TAIL_COMPARISON, math.inf)
        est, err = _expect_continuous(form, dist)
        return MomentVerdict(label, est, verdict, Method.TAIL_COMPARISON, err)
    est, err = _expect_continuous(form, dist)
    return MomentVerdict(label, est, Verdict.FINITE, Method.QUADRATURE, err)


# -- comparator --------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparatorRow:
    log_exp: float
    loglog_exp: float
    f_verdict: Verdict
    b_verdict: Verdict


def condition_comparator(
    spec: SlowlyVarying,
    log_exps=None,
    loglog_exps=(0.0, 0.5, 1.0, 2.0, 3.0, 4.0),
    tail_a: float = 3.0,
) -> list[ComparatorRow]:
    """Sweep LogTailPareto laws and classify them under both conditions."""
    if log_exps is None:
        log_exps = np.round(np.arange(0.0, 5.01, 0.25), 10)
    rows = []
    ff = growth_form(spec, Mode.F_INVERSE)
    fb = growth_form(spec, Mode.B_INVERSE)
    for a in log_exps:
        for b in loglog_exps:
            dist = LogTailPareto(tail_a=tail_a, log_exp=float(a), loglog_exp=float(b))
            rows.append(
                ComparatorRow(float(a), float(b), classify_tail(ff, dist)[0], classify_tail(fb, dist)[0])
            )
    return rows


def gap_rows(rows: list[ComparatorRow]) -> list[ComparatorRow]:
    """Rows where the f-condition holds but the b-condition fails."""
    return [r for r in rows if r.f_verdict is Verdict.FINITE and r.b_verdict is Verdict.INFINITE]
