import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from windowlaw.distributions import (
    Degenerate,
    LogTailPareto,
    Normal,
    Rademacher,
    TwoPoint,
    UniformSym,
    parse_dist,
)
from windowlaw.errors import DomainError

LAWS = [Normal(1.0), Normal(2.5), Rademacher(), UniformSym(), TwoPoint(1.0, 0.3), LogTailPareto()]


def _tail_integral(d: LogTailPareto, k: float, x_from: float) -> float:
    """int_{x_from}^inf x^k h(x) dx for x_from >= x_cut, with v = log log x.

    In v the integrand is exp((k + 1 - tail) e^v + (1 - a) v) v^-b, which
    quad handles well even when the x-integrand decays like 1/(x log^a x).
    """
    s = k + 1.0 - d.tail_a

    def f(v):
        if s < 0 and v > 7.0:  # exp(s e^v) < e^-1000
            return 0.0
        pw = s * math.exp(v) if s else 0.0
        return math.exp(pw + (1.0 - d.log_exp) * v - d.loglog_exp * math.log(v))

    return integrate.quad(f, math.log(math.log(x_from)), np.inf, limit=500, epsabs=0, epsrel=1e-12)[0]


def _body_height(d: LogTailPareto) -> float:
    lc = math.log(d.x_cut)
    return d.x_cut ** -d.tail_a * lc ** -d.log_exp * math.log(lc) ** -d.loglog_exp


@pytest.mark.parametrize("law", LAWS, ids=str)
def test_sample_mean_and_variance(law):
    x = law.sample(np.random.default_rng(5), 400_000)
    se = math.sqrt(law.variance / x.size)
    assert abs(x.mean()) < 5 * se
    if not isinstance(law, LogTailPareto):  # heavy fourth moment: variance estimate too noisy
        assert np.var(x) == pytest.approx(law.variance, rel=0.02)


def test_exact_means_of_discrete_laws():
    for law in (Rademacher(), TwoPoint(1.0, 0.3), TwoPoint(2.0, 0.5)):
        assert sum(v * p for v, p in law.atoms()) == 0
        assert sum(p for _, p in law.atoms()) == 1
        # atoms are the exact rationals of the float parameters
        assert float(sum(v * v * p for v, p in law.atoms())) == pytest.approx(law.variance, rel=1e-15)


def test_closed_form_variances():
    assert Normal(2.5).variance == 6.25
    assert Rademacher().variance == 1.0
    assert UniformSym().variance == pytest.approx(1.0, rel=1e-15)
    assert TwoPoint(1.0, 0.3).variance == pytest.approx(0.3 + 0.7 * (0.3 / 0.7) ** 2, rel=1e-14)


@pytest.mark.parametrize("a,b", [(3.0, 0.0), (1.5, 0.0), (2.0, 2.0), (1.0, 2.0)])
def test_logtail_variance_and_tail_against_quadrature(a, b):
    d = LogTailPareto(log_exp=a, loglog_exp=b)
    hc = _body_height(d)
    z = 2 * (d.x_cut * hc + _tail_integral(d, 0.0, d.x_cut))
    var = 2 * (hc * d.x_cut**3 / 3 + _tail_integral(d, 2.0, d.x_cut)) / z
    assert d.variance == pytest.approx(var, rel=1e-8)
    for x in (1.0, d.x_cut, 20.0, 1e3, 1e6, 1e30):
        tail = 2 * _tail_integral(d, 0.0, x) / z if x >= d.x_cut else 1 - 2 * x * hc / z
        assert float(d.tail_abs(x)) == pytest.approx(tail, rel=1e-9)


def test_logtail_infinite_variance_boundary():
    assert math.isinf(LogTailPareto(log_exp=1.0).variance)
    assert math.isfinite(LogTailPareto(log_exp=1.0, loglog_exp=2.0).variance)


def test_logtail_sampler_tail_frequency():
    d = LogTailPareto(log_exp=1.5)
    x = np.abs(d.sample(np.random.default_rng(2), 500_000))
    for t in (3.0, 10.0, 50.0):
        p = float(d.tail_abs(t))
        assert abs(np.mean(x > t) - p) < 5 * math.sqrt(p * (1 - p) / x.size)


def test_normal_log_tail_far_out():
    # log P(|X| > x) ~ -x^2/2 - log(x) + log(sqrt(2/pi))
    x = 200.0
    approx = -x * x / 2 - math.log(x) + 0.5 * math.log(2 / math.pi)
    assert float(Normal(1.0).log_tail_abs(math.log(x))) == pytest.approx(approx, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20))
def test_log_mgfs_match_closed_forms(t):
    assert float(Rademacher().log_mgf(t)) == pytest.approx(math.log(math.cosh(t)), rel=1e-12, abs=1e-15)
    assert float(Normal(1.5).log_mgf(t)) == pytest.approx(1.125 * t * t, rel=1e-14, abs=1e-300)
    a = math.sqrt(3.0)
    expect = 0.0 if t == 0 else math.log(math.sinh(a * t) / (a * t))
    assert float(UniformSym().log_mgf(t)) == pytest.approx(expect, rel=1e-10, abs=1e-14)


def test_logtail_has_no_mgf():
    with pytest.raises(DomainError):
        LogTailPareto().log_mgf(0.1)


def test_scaling():
    assert Rademacher().scaled(2.0).variance == 4.0
    assert LogTailPareto().scaled(2.0).variance == pytest.approx(4 * LogTailPareto().variance)
    assert Normal(1.0).scaled(-3.0) == Normal(3.0)


@pytest.mark.parametrize("law", LAWS + [Degenerate()], ids=str)
def test_text_round_trip(law):
    assert parse_dist(law.to_text()) == law


def test_text_forms():
    assert parse_dist("normal(sigma=1)") == Normal(1.0)
    assert parse_dist("Rademacher") == Rademacher()
    assert parse_dist("logtail(a=3,cut=7.39)") == LogTailPareto(log_exp=3.0, x_cut=7.39)
    with pytest.raises(ValueError):
        parse_dist("normal(mu=1)")


def test_mean_zero_two_point_other_value():
    d = TwoPoint(2.0, 0.2)
    (w, pw), (v, pv) = sorted(d.atoms())
    assert v == 2 and float(w) == pytest.approx(-0.5, rel=1e-15) and float(pv) == 0.2
    assert w * (1 - pv) + v * pv == 0
