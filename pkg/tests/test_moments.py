import math

import numpy as np
import pytest
from scipy import integrate, special

from windowlaw.distributions import LogTailPareto, Normal, Rademacher, TwoPoint, UniformSym
from windowlaw.moments import (
    CRITICAL_TOL,
    Method,
    Mode,
    Verdict,
    classify_tail,
    condition_comparator,
    growth_condition,
    gap_rows,
    growth_form,
    moment_condition,
)
from windowlaw.norming import b_inverse, f_inverse, f_seq, n_min
from windowlaw.svf import ExpSqrtLog, IterLog, LogPow, LogPowOverLogLogPow

from conftest import FAMILIES


def _verdict_invariant(v):
    if v.verdict is Verdict.FINITE:
        assert math.isfinite(v.estimate) and v.error_bound < v.estimate


# -- light tails -------------------------------------------------------------------------


def test_normal_f_inverse_against_running_max_oracle():
    # E g(|X|) with g(x) = first m whose running max of f reaches x^2, summed exactly
    spec = LogPow(1.0)
    n0 = n_min(spec)
    m = np.arange(n0, 5000)
    F = np.maximum.accumulate(f_seq(spec, m))
    cdf = special.erf(np.sqrt(F) / math.sqrt(2))  # P(X^2 <= F(m))
    probs = np.diff(np.concatenate(([0.0], cdf)))
    oracle = float(np.sum(m * probs))
    v = moment_condition(spec, Normal(1.0), Mode.F_INVERSE)
    assert v.verdict is Verdict.FINITE and v.method is Method.QUADRATURE
    assert v.estimate == pytest.approx(oracle, rel=1e-9)
    _verdict_invariant(v)


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_bounded_laws_finite_at_inverse_of_one(spec):
    fv = moment_condition(spec, Rademacher(), Mode.F_INVERSE)
    bv = moment_condition(spec, Rademacher(), Mode.B_INVERSE)
    assert fv.verdict is bv.verdict is Verdict.FINITE
    assert fv.estimate == f_inverse(spec, 1.0)
    assert bv.estimate == b_inverse(spec, 1.0)
    for law in (UniformSym(), TwoPoint(1.0, 0.3)):
        for mode in Mode:
            v = moment_condition(spec, law, mode)
            assert v.verdict is Verdict.FINITE
            _verdict_invariant(v)


def test_logtail_logpow_examples():
    spec = LogPow(1.0)
    v3 = moment_condition(spec, LogTailPareto(log_exp=3.0), Mode.F_INVERSE)
    v1 = moment_condition(spec, LogTailPareto(log_exp=1.0), Mode.F_INVERSE)
    assert v3.verdict is Verdict.FINITE and v3.method is Method.TAIL_COMPARISON
    assert v1.verdict is Verdict.INFINITE and math.isinf(v1.estimate)
    _verdict_invariant(v3)


# -- closed-form growth conditions -----------------------------------------------------------


def test_growth_rademacher_logpow3():
    v = growth_condition(LogPow(3.0), Rademacher(), "f")
    assert v.estimate == 1.0 and v.verdict is Verdict.FINITE


def test_growth_logpowloglog_finite_at_a_equal_two():
    v = growth_condition(LogPowOverLogLogPow(1.0, 1.0), LogTailPareto(log_exp=2.0), "f")
    assert v.verdict is Verdict.FINITE


def _normal_growth_oracle(sigma, g):
    dens = lambda x: 2 * math.exp(-x * x / (2 * sigma * sigma)) / (sigma * math.sqrt(2 * math.pi))
    pieces = [(0, 1), (1, math.e), (math.e, math.exp(math.e)), (math.exp(math.e), 60 * sigma)]
    return sum(integrate.quad(lambda x: g(x) * dens(x), a, b, epsabs=0, epsrel=1e-13, limit=200)[0] for a, b in pieces)


def test_growth_expsqrtlog_normal2():
    lp = lambda x: max(math.log(x), 1.0) if x > 0 else 1.0
    g = lambda x: x * x * lp(x) ** -0.5 * math.exp(math.sqrt(2 * lp(x)))
    v = growth_condition(ExpSqrtLog(), Normal(2.0), "f")
    assert v.verdict is Verdict.FINITE
    assert v.estimate == pytest.approx(_normal_growth_oracle(2.0, g), rel=1e-8)


def test_growth_logpow3_normal2():
    lp = lambda x: max(math.log(x), 1.0) if x > 0 else 1.0
    llp = lambda x: max(math.log(lp(x)), 1.0)
    g = lambda x: x * x * lp(x) ** 3 / llp(x)
    v = growth_condition(LogPow(3.0), Normal(2.0), "f")
    assert v.estimate == pytest.approx(_normal_growth_oracle(2.0, g), rel=1e-8)


# -- tail comparison versus direct integration --------------------------------------------------


def _partial_integral(form, d, v_hi):
    """int_{log x_cut}^{v_hi} G(e^v) h(e^v) e^v dv up to the density constant, in v = log x."""

    def integrand(v):
        lv = math.log(v)
        val = (form.e + 1 - d.tail_a) * v + (form.alpha - d.log_exp) * lv
        val += (form.beta - d.loglog_exp) * math.log(lv) + form.kappa * v**form.theta
        if form.iter_log:
            w = v
            for _ in range(form.iter_log - 1):
                w = math.log(w)
            val += math.log(w)
        return math.exp(val)

    lo = math.log(d.x_cut)
    edges = np.geomspace(lo, v_hi, 40)
    return sum(integrate.quad(integrand, a, b, epsrel=1e-10)[0] for a, b in zip(edges[:-1], edges[1:]))


@pytest.mark.parametrize("spec", [LogPow(1.0), LogPow(2.0), IterLog(2), LogPowOverLogLogPow(1.0, 1.0)], ids=str)
@pytest.mark.parametrize("mode", list(Mode))
def test_tail_comparison_agrees_with_expanding_quadrature(spec, mode):
    form = growth_form(spec, mode)
    for a in np.arange(0.0, 5.01, 0.5):
        d = LogTailPareto(log_exp=float(a))
        crit = a - form.alpha  # power of 1/log x left over (form.e = 2 = tail_a - 1)
        if abs(crit - 1) < 0.5:
            continue
        verdict, _ = classify_tail(form, d)
        i1, i2 = _partial_integral(form, d, 1e3), _partial_integral(form, d, 1e6)
        grows = i2 > 1.5 * i1
        assert grows == (verdict is Verdict.INFINITE), (a, i1, i2)


# -- critical exponent handling -----------------------------------------------------------------


def test_undetermined_only_near_the_critical_exponent():
    spec = LogPow(1.0)  # f-form x^2 (log x) / (log log x): critical at a = 2, b = 0
    near = moment_condition(spec, LogTailPareto(log_exp=2.0 + CRITICAL_TOL / 2), Mode.F_INVERSE)
    assert near.verdict is Verdict.UNDETERMINED
    exact = moment_condition(spec, LogTailPareto(log_exp=2.0), Mode.F_INVERSE)
    assert exact.verdict is Verdict.INFINITE  # exact tie: integral of 1/(v log v) diverges
    off = moment_condition(spec, LogTailPareto(log_exp=2.0 + 1e-6), Mode.F_INVERSE)
    assert off.verdict is Verdict.FINITE


# -- sweeps -----------------------------------------------------------------------------------


def test_comparator_logpow_gap_window():
    rows = condition_comparator(LogPow(1.0))
    gaps = gap_rows(rows)
    assert gaps
    assert all(r.f_verdict is Verdict.FINITE and r.b_verdict is Verdict.INFINITE for r in gaps)
    assert {r.log_exp for r in gaps} == {2.0}


def test_comparator_iterlog_needs_loglog_squared():
    rows = condition_comparator(IterLog(2))
    gaps = gap_rows(rows)
    # f-condition: finite variance (a > 1, or a = 1 and b > 1); b-condition: E X^2 (log log X)^2
    assert all(r.log_exp == 1.0 and 1.0 < r.loglog_exp <= 3.0 for r in gaps)
    assert {(r.log_exp, r.loglog_exp) for r in gaps} == {(1.0, 2.0), (1.0, 3.0)}


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_dominance_and_monotonicity(spec):
    rows = condition_comparator(spec)
    for r in rows:
        if r.b_verdict is Verdict.FINITE:
            assert r.f_verdict is Verdict.FINITE
    for b in {r.loglog_exp for r in rows}:
        col = sorted((r for r in rows if r.loglog_exp == b), key=lambda r: r.log_exp)
        for attr in ("f_verdict", "b_verdict"):
            seen_finite = False
            for r in col:
                if getattr(r, attr) is Verdict.FINITE:
                    seen_finite = True
                elif seen_finite:
                    assert getattr(r, attr) is not Verdict.INFINITE


@pytest.mark.parametrize("law", [LogTailPareto(log_exp=3.0), LogTailPareto(log_exp=1.5), Normal(1.0), Rademacher()], ids=str)
@pytest.mark.parametrize("mode", list(Mode))
def test_scale_equivariance(law, mode):
    spec = LogPow(1.0)
    assert moment_condition(spec, law, mode).verdict is moment_condition(spec, law.scaled(2.0), mode).verdict


def test_verdict_serialises():
    v = moment_condition(LogPow(1.0), Normal(1.0), Mode.F_INVERSE)
    assert set(v.to_dict()) == {"condition", "estimate", "verdict", "method", "error_bound"}
