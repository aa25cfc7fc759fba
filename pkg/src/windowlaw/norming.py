"""Window widths, norming sequences and their step inverses.

For an index n >= n_min:

    a_n = max(1, floor(n / L(n)))         window width
    d_n = log L(n) + log log n             extra norming factor
    f_n = min(a_n d_n, n)
    b_n = sqrt(a_n / d_n)                  single-truncation level
    normalizer = sqrt(2 a_n d_n)

Non-integer arguments are read as f(x) = f_[x].  All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, IndexTooSmallError, UnsupportedRegimeError
from .svf import (
    ExpLogBeta,
    ExpSqrtLog,
    IterLog,
    LogLogPow,
    LogPow,
    LogPowOverLogLogPow,
    SlowlyVarying,
    psi,
    psi_log_many,
)

_EXACT_INT = 2.0**53


@dataclass(frozen=True)
class BoundParams:
    """Slack parameters of the exponential bounds and of the first truncation."""

    sigma: float = 1.0
    delta: float = 0.1
    epsilon: float = 1.0
    gamma: float = 0.1

    def __post_init__(self):
        for name in ("sigma", "delta", "epsilon", "gamma"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not self.delta < 1:
            raise ValueError(f"delta must be < 1, got {self.delta}")


@dataclass(frozen=True)
class WindowSchedulePoint:
    n: int
    a_n: int
    d_n: float
    f_n: float
    b_truncation: float | None
    b_n: float
    normalizer: float


def n_min(spec: SlowlyVarying) -> int:
    """Smallest integer n >= 16 with L(n) > 1 and log log n > 0."""
    x0 = spec.x0
    if not math.isfinite(x0):
        raise DomainError(f"{spec}: x0 overflows, no integer schedule")
    start = max(16, math.ceil(x0))

    def ok(n: int) -> bool:
        u = math.log(n)
        return float(spec.log_L(u)) > 0 and math.log(u) > 0

    if ok(start):
        return start
    lo, hi = start, 2 * start
    while not ok(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# -- vectorised sequences -----------------------------------------------------


def _as_index(n) -> np.ndarray:
    return np.floor(np.asarray(n, dtype=float))


def width(spec: SlowlyVarying, n) -> np.ndarray:
    n = _as_index(n)
    u = np.log(n)
    return np.maximum(1.0, np.floor(n / spec.L_u(u)))


def d_seq(spec: SlowlyVarying, n) -> np.ndarray:
    u = np.log(_as_index(n))
    return spec.log_L(u) + np.log(u)


def f_seq(spec: SlowlyVarying, n) -> np.ndarray:
    n = _as_index(n)
    return np.minimum(width(spec, n) * d_seq(spec, n), n)


def b_seq(spec: SlowlyVarying, n) -> np.ndarray:
    return np.sqrt(width(spec, n) / d_seq(spec, n))


def truncation_level(spec: SlowlyVarying, n, params: BoundParams) -> np.ndarray:
    """First truncation level (sigma delta / epsilon) sqrt(a_n / d_n)."""
    return params.sigma * params.delta / params.epsilon * b_seq(spec, n)


def schedule_point(spec: SlowlyVarying, n: int, bound_params: BoundParams | None = None) -> WindowSchedulePoint:
    n = int(n)
    lo = n_min(spec)
    if n < lo:
        raise IndexTooSmallError(f"{spec}: n = {n} below n_min = {lo}")
    a = int(width(spec, n))
    d = float(d_seq(spec, n))
    b_trunc = None
    if bound_params is not None:
        b_trunc = float(truncation_level(spec, n, bound_params))
    return WindowSchedulePoint(
        n=n,
        a_n=a,
        d_n=d,
        f_n=min(a * d, float(n)),
        b_truncation=b_trunc,
        b_n=math.sqrt(a / d),
        normalizer=math.sqrt(2.0 * a * d),
    )


def schedule_table(spec: SlowlyVarying, ns) -> dict[str, np.ndarray]:
    """Columns n, a_n, d_n, f_n, b_n, normalizer for an index grid."""
    n = _as_index(ns)
    if np.any(n < n_min(spec)):
        raise IndexTooSmallError(f"{spec}: grid reaches below n_min = {n_min(spec)}")
    a = width(spec, n)
    d = d_seq(spec, n)
    return {
        "n": n,
        "a_n": a,
        "d_n": d,
        "f_n": np.minimum(a * d, n),
        "b_n": np.sqrt(a / d),
        "normalizer": np.sqrt(2.0 * a * d),
    }


# -- step inverses --------------------------------------------------------------


def _step_inverse(seq, y: float, lo: int) -> float:
    """inf{n >= lo : seq(n) >= y} by bisection over integers (relative precision past 2^53)."""
    if float(seq(lo)) >= y:
        return float(lo)
    hi = 2 * lo
    while float(seq(hi)) < y:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        if hi > _EXACT_INT and hi - lo <= hi * 4e-16:
            break
        mid = (lo + hi) // 2
        if float(seq(mid)) >= y:
            hi = mid
        else:
            lo = mid
    return float(hi)


def f_envelope(spec: SlowlyVarying, x) -> np.ndarray:
    """min(x d(x)/L(x), x): the floor-free version of f, so f <= f_envelope."""
    x = np.asarray(x, dtype=float)
    u = np.log(x)
    return np.minimum(x / spec.L_u(u) * (spec.log_L(u) + np.log(u)), x)


def b_envelope(spec: SlowlyVarying, x) -> np.ndarray:
    """sqrt(x / (L(x) d(x))): the floor-free version of b, so b <= b_envelope."""
    x = np.asarray(x, dtype=float)
    u = np.log(x)
    return np.sqrt(x / spec.L_u(u) / (spec.log_L(u) + np.log(u)))


_SCAN_LIMIT = 1 << 22


def _first_reaching(seq, envelope, y: float, lo: int) -> float:
    """inf{n >= lo : seq(n) >= y} for a sequence with small downward ripples.

    A bisection crossing m_hi bounds the infimum from above.  Since
    seq <= envelope and the envelope is increasing, the first envelope
    crossing bounds it from below; the short gap is scanned exactly.
    Past 2^53 the bisection crossing is returned (relative precision only).
    """
    m_hi = int(_step_inverse(seq, y, lo))
    if m_hi == lo or m_hi > _EXACT_INT:
        return float(m_hi)
    m_lo = int(_step_inverse(envelope, y, lo))
    m_lo = max(lo, min(m_lo, m_hi))
    start = m_lo
    if m_hi - start > _SCAN_LIMIT:
        start = m_hi - _SCAN_LIMIT
    while start <= m_hi:
        stop = min(m_hi, start + (1 << 16))
        idx = np.arange(start, stop + 1, dtype=float)
        hit = np.flatnonzero(seq(idx) >= y)
        if len(hit):
            return float(idx[hit[0]])
        start = stop + 1
    return float(m_hi)


def f_inverse(spec: SlowlyVarying, y: float) -> float:
    """inf{x >= n_min : f(x) >= y}; integer valued."""
    return _first_reaching(
        lambda n: f_seq(spec, n), lambda n: f_envelope(spec, n), float(y), n_min(spec)
    )


def b_inverse(spec: SlowlyVarying, y: float) -> float:
    """inf{x >= n_min : b(x) >= y} where b_n = sqrt(a_n/d_n); integer valued.

    b dips slightly just before each width increment, so plain bisection
    would only locate *a* crossing; the envelope bracket makes it the first.
    """
    return _first_reaching(
        lambda n: b_seq(spec, n), lambda n: b_envelope(spec, n), float(y), n_min(spec)
    )


def f_inverse_many(spec: SlowlyVarying, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.array([f_inverse(spec, v) for v in y.ravel()]).reshape(y.shape)


def b_inverse_many(spec: SlowlyVarying, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.array([b_inverse(spec, v) for v in y.ravel()]).reshape(y.shape)


def asymptotic_f_inverse(spec: SlowlyVarying, y: float) -> float:
    """Closed-form leading behaviour of f^{-1}(y), multiplicative constants set to 1
    except where the formula displays them."""
    if not y >= 1e3:
        raise DomainError(f"asymptote needs y >= 1e3, got {y}")
    ly = math.log(y)
    lly = math.log(ly)
    if isinstance(spec, LogPow):
        return y * ly**spec.p / ((spec.p + 1.0) * lly)
    if isinstance(spec, IterLog):
        return y
    if isinstance(spec, LogPowOverLogLogPow):
        return y * ly**spec.p / lly ** (spec.q + 1.0)
    if isinstance(spec, LogLogPow):
        return y * lly ** (spec.q - 1.0)
    if isinstance(spec, ExpSqrtLog):
        return y * math.exp(math.sqrt(ly + 0.5)) / math.sqrt(ly)
    if isinstance(spec, ExpLogBeta):
        if spec.beta >= 0.5:
            raise UnsupportedRegimeError(
                f"no closed-form inverse asymptote for beta = {spec.beta} >= 1/2"
            )
        return y * math.exp(ly**spec.beta) / ly ** (spec.beta + spec.gamma_exp)
    raise UnsupportedRegimeError(f"no asymptote for {spec}")


# -- subsequences ----------------------------------------------------------------


@dataclass(frozen=True)
class SubsequenceSpec:
    """Checkpoints n_k = psi(c k); c > 1 makes consecutive windows eventually disjoint."""

    spec: SlowlyVarying
    c: float
    k_start: int = 1

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be positive, got {self.c}")
        if self.k_start < 1:
            raise ValueError("k_start must be >= 1")

    @cached_property
    def disjoint_from(self) -> int | None:
        """First k after which n_{k+1} > n_k + a_{n_k} holds up to k_start + 1000."""
        return subsequence_diagnostics(self, self.k_start + 1000).disjoint_from


def subsequence(sub: SubsequenceSpec, k: int) -> int:
    if k < sub.k_start:
        raise DomainError(f"k = {k} below k_start = {sub.k_start}")
    return int(round(psi(sub.spec, sub.c * k)))


@dataclass
class SubsequenceReport:
    k: np.ndarray
    log_n: np.ndarray
    d_over_log_k: np.ndarray
    growth: np.ndarray  # n_{k+1} / n_k, one shorter than k
    disjoint: np.ndarray  # n_{k+1} > n_k + a_{n_k}, one shorter than k
    disjoint_from: int | None


def subsequence_diagnostics(sub: SubsequenceSpec, k_max: int) -> SubsequenceReport:
    """d_{n_k}/log k, n_{k+1}/n_k and window disjointness along n_k = psi(c k).

    Works in log coordinates so that k_max can be large enough for n_k to
    overflow a float; below 2^53 the integer rounding of n_k and a_n is exact.
    """
    k0 = max(sub.k_start, 2)
    if k_max < k0 + 10:
        raise DomainError("k_max must exceed k_start by at least 10")
    spec = sub.spec
    k = np.arange(k0, k_max + 2, dtype=float)
    s = psi_log_many(spec, sub.c * k)
    log_l = spec.log_L(s)
    d = log_l + np.log(s)

    disjoint = np.empty(len(k) - 1, dtype=bool)
    small = s[1:] < math.log(_EXACT_INT) - 1
    if np.any(small):
        idx = np.nonzero(small)[0]
        n_here = np.round(np.exp(s[idx]))
        n_next = np.round(np.exp(s[idx + 1]))
        a = width(spec, n_here)
        disjoint[idx] = n_next > n_here + a
    big = ~small
    if np.any(big):
        idx = np.nonzero(big)[0]
        disjoint[idx] = np.expm1(s[idx + 1] - s[idx]) > np.exp(-log_l[idx])

    first = None
    if disjoint[-1]:
        bad = np.nonzero(~disjoint)[0]
        first = int(k[bad[-1] + 1]) if len(bad) else int(k[0])
    return SubsequenceReport(
        k=k[:-1],
        log_n=s[:-1],
        d_over_log_k=d[:-1] / np.log(k[:-1]),
        growth=np.exp(np.diff(s)),
        disjoint=disjoint,
        disjoint_from=first,
    )
