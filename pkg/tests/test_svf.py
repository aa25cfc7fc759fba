import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from windowlaw.errors import DomainError
from windowlaw.svf import (
    ExpLogBeta,
    ExpSqrtLog,
    IterLog,
    LogPow,
    LogPowOverLogLogPow,
    de_bruijn_conjugate,
    eval_L,
    eval_ratio,
    parse_spec,
    phi,
    phi_log,
    phi_log_ratio,
    psi,
    psi_log,
    second_conjugate_relation,
    verify_ratio_condition,
)

from conftest import FAMILIES

E = math.e


# -- evaluation ------------------------------------------------------------------


def test_eval_L_closed_forms():
    assert eval_L(LogPow(1.0), E**E) == pytest.approx(E, rel=1e-14)
    assert eval_L(IterLog(2), math.exp(math.exp(3))) == pytest.approx(3.0, rel=1e-14)
    assert eval_L(ExpSqrtLog(), math.exp(25)) == pytest.approx(math.exp(5), rel=1e-14)


def test_eval_L_below_x0_is_domain_error():
    with pytest.raises(DomainError):
        eval_L(IterLog(2), 10.0)  # x0 = e^e
    with pytest.raises(DomainError):
        eval_ratio(LogPow(1.0), 2.0)


def test_ratio_examples():
    # p / log x
    assert eval_ratio(LogPow(2.0), math.exp(10)) == pytest.approx(0.2, rel=1e-14)
    # 1 / (log x * log log x)
    x = math.exp(E**2)
    assert eval_ratio(IterLog(2), x) == pytest.approx(1 / (2 * E**2), rel=1e-13)
    # p / log x - q / (log x log log x)
    assert eval_ratio(LogPowOverLogLogPow(1.0, 1.0), x) == pytest.approx(1 / E**2 - 1 / (2 * E**2), rel=1e-13)


def test_ratio_matches_finite_difference(family):
    # the closed-form derivative against a central difference in log coordinates
    for u in (family.log_x0 + 5.0, 50.0, 400.0):
        h = 1e-5 * u
        fd = (family.log_L(u + h) - family.log_L(u - h)) / (2 * h)
        assert float(family.ratio_u(u)) == pytest.approx(fd, rel=1e-6)


def test_condition_verdicts():
    rep = verify_ratio_condition(LogPow(1.0))
    assert rep.verdict and rep.monotone_from == pytest.approx(LogPow(1.0).x0)
    assert verify_ratio_condition(ExpSqrtLog()).verdict
    rep = verify_ratio_condition(ExpLogBeta(0.4, 1.0))
    assert rep.verdict and rep.monotone_from > ExpLogBeta(0.4, 1.0).x0


def test_condition_report_consistent(family):
    rep = verify_ratio_condition(family)
    r = np.array(rep.ratios)
    g = np.array(rep.grid)
    tail = r[g >= rep.monotone_from]
    assert rep.verdict == bool(np.all(np.diff(tail) <= 1e-13 * np.abs(tail[1:])))
    assert rep.verdict


def _doubling_gap(spec, j):
    return abs(math.exp(spec.log_L(math.log(2 * 10.0**j)) - spec.log_L(math.log(10.0**j))) - 1)


def test_slow_variation_at_1e12(family):
    assert _doubling_gap(family, 12) < 0.2
    # decreasing over decades once x L'/L itself decreases (explogbeta has an early hump)
    j0 = max(12, math.ceil(math.log10(verify_ratio_condition(family).monotone_from)))
    vals = [_doubling_gap(family, j) for j in range(j0, j0 + 4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# -- phi and psi --------------------------------------------------------------------------


def test_phi_examples():
    assert phi(LogPow(1.0), E**3) == pytest.approx(4.0, rel=1e-14)
    for f in FAMILIES:
        assert phi(f, f.x0) == 0.0


def test_phi_iterlog_trapezoid_oracle():
    # 10^6-panel trapezoid in w = log v on [e, e^2] of L(e^w) = log w
    w = np.linspace(E, E**2, 1_000_001)
    oracle = np.trapezoid(np.log(w), w)
    got = phi(IterLog(2), math.exp(E**2))
    assert got == pytest.approx(oracle, rel=1e-8)
    assert got == pytest.approx(E**2, rel=1e-13)  # [w log w - w] from e to e^2


def test_phi_quadrature_families_against_quad(family):
    s = family.log_x0 + 30.0
    oracle, _ = integrate.quad(lambda w: math.exp(family.log_L(w)), family.log_x0, s, epsabs=0, epsrel=1e-13, limit=200)
    assert phi_log(family, s) == pytest.approx(oracle, rel=1e-10)


def test_phi_logpow_closed_form_against_quadrature():
    for p in (0.5, 1.0, 2.0, 3.0):
        spec = LogPow(p)
        for s in np.geomspace(1.5, 5e3, 20):
            oracle, _ = integrate.quad(lambda w: w**p, 1.0, s, epsabs=0, epsrel=1e-13, limit=200)
            assert phi_log(spec, s) == pytest.approx(oracle, rel=1e-10)


def test_psi_examples():
    assert psi(LogPow(1.0), 4.0) == pytest.approx(E**3, rel=1e-10)
    assert psi(LogPow(1.0), 60.5) == pytest.approx(math.exp(math.sqrt(122.0)), rel=1e-10)
    for f in FAMILIES:
        assert psi(f, 0.0) == pytest.approx(f.x0, rel=1e-12)


def test_phi_psi_round_trip(family):
    # log coordinates: psi(t) leaves the float range well before t = 1e6
    for t in np.geomspace(1e-2, 1e6, 50):
        assert abs(phi_log(family, psi_log(family, t)) - t) <= 1e-8 * max(1.0, t)


def test_phi_psi_round_trip_plain_coordinates(family):
    for t in np.geomspace(1e-2, 50.0, 20):
        assert abs(phi(family, psi(family, t)) - t) <= 1e-8 * max(1.0, t)


def test_phi_psi_monotone(family):
    t = np.geomspace(1e-2, 1e5, 40)
    s = np.array([psi_log(family, v) for v in t])
    assert np.all(np.diff(s) > 0)
    assert np.all(np.diff([phi_log(family, v) for v in s]) > 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1e5), st.floats(1e-6, 1e3))
def test_psi_increasing_property(t, dt):
    spec = LogPow(1.0)
    assert psi(spec, t + dt) > psi(spec, t)


# -- conjugates -------------------------------------------------------------------------------


def test_conjugate_logpow_1e30():
    x = 1e30
    c = de_bruijn_conjugate(LogPow(1.0), x)
    oracle = optimize.brentq(lambda y: (math.log(x) + math.log(y)) * y - 1.0, 1e-4, 1.0, xtol=1e-16)
    assert c.value == pytest.approx(oracle, rel=1e-10)
    assert c.value == pytest.approx(0.015408, abs=1e-6)
    assert c.residual <= 1e-6
    assert 0.9 <= c.value * math.log(x) <= 1.1


def test_conjugate_of_constant_is_one():
    c = de_bruijn_conjugate(LogPow(0.0), 1e10)
    assert c.value == 1.0 and c.residual == 0.0


@pytest.mark.parametrize("spec", [LogPow(1.0), LogPow(2.0), IterLog(2), IterLog(3)], ids=str)
@pytest.mark.parametrize("x", [1e20, 1e30, 1e40])
def test_conjugate_relations(spec, x):
    assert de_bruijn_conjugate(spec, x).residual <= 1e-6
    assert abs(second_conjugate_relation(spec, x) - 1) <= 1e-3


# -- ratio of logs ---------------------------------------------------------------------------


def test_phi_log_ratio_examples():
    t = 1e12
    lt = math.log(t)
    oracle = math.log(lt * lt) / math.log((lt**2 - 1) / 2)
    assert phi_log_ratio(LogPow(1.0), t) == pytest.approx(oracle, rel=1e-12)
    assert phi_log_ratio(LogPow(1.0), t) == pytest.approx(1.117, abs=1e-3)
    assert abs(phi_log_ratio(LogPow(1.0), 1e100) - 1) < abs(phi_log_ratio(LogPow(1.0), t) - 1)
    vals = [phi_log_ratio(IterLog(2), 10.0**e) for e in (12, 22, 32)]
    assert 1 < vals[0] < 2 and vals[0] > vals[1] > vals[2]


# -- text form -------------------------------------------------------------------------------


def test_parse_round_trip(family):
    assert parse_spec(family.to_text()) == family
    assert parse_spec(family.to_text().upper()) == family


def test_parse_examples():
    assert parse_spec("logpow(p=1.5)") == LogPow(1.5)
    assert parse_spec("IterLog(m=3)") == IterLog(3)
    assert parse_spec("explogbeta(beta=0.4,gamma=1)") == ExpLogBeta(0.4, 1.0)
    with pytest.raises(ValueError):
        parse_spec("nosuch(p=1)")
