"""Mean-zero laws used as stream summands.

Every law here has mean exactly zero.  Bounded and Gaussian laws carry a
moment generating function; the heavy-tailed ``LogTailPareto`` does not.

``LogTailPareto`` has the symmetric density

    g(x) = c * h(x_cut)   for |x| <= x_cut
    g(x) = c * h(|x|)     for |x| >  x_cut,
    h(x) = x^-tail_a (log x)^-log_exp (log log x)^-loglog_exp,

scaled by ``scale``.  The flat body keeps the density continuous; with the
default tail_a = 3 the variance is finite iff log_exp > 1, or log_exp = 1 and
loglog_exp > 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import ClassVar

import numpy as np
from scipy import integrate, special

from .errors import DomainError
from .svf import parse_call


class DistributionSpec:
    """Common interface; concrete laws are frozen dataclasses below."""

    name: ClassVar[str] = ""
    mean: ClassVar[float] = 0.0
    mgf_available: ClassVar[bool] = True
    symmetric: ClassVar[bool] = True
    discrete: ClassVar[bool] = False

    # -- description -------------------------------------------------------
    def params(self) -> dict:
        return {}

    def to_text(self) -> str:
        p = self.params()
        if not p:
            return self.name
        return f"{self.name}(" + ",".join(f"{k}={_fmt(v)}" for k, v in p.items()) + ")"

    def __str__(self) -> str:
        return self.to_text()

    @property
    def variance(self) -> float:
        raise NotImplementedError

    @property
    def x_max(self) -> float:
        """Essential supremum of X."""
        return math.inf

    @property
    def mass_at_max(self) -> float:
        """P(X = x_max); zero for continuous laws."""
        return 0.0

    def tail_abs(self, x) -> np.ndarray:
        """P(|X| > x), vectorised."""
        raise NotImplementedError

    def log_tail_abs(self, log_x) -> np.ndarray:
        """log P(|X| > e^log_x), vectorised; accurate far into the tail."""
        with np.errstate(divide="ignore"):
            return np.log(self.tail_abs(np.exp(np.minimum(np.asarray(log_x, dtype=float), 700.0))))

    def atoms(self) -> list[tuple[Fraction, Fraction]]:
        """Exact (value, probability) pairs for discrete laws."""
        raise DomainError(f"{self} is not discrete")

    # -- transforms --------------------------------------------------------
    def log_mgf(self, t) -> np.ndarray:
        raise DomainError(f"{self} has no moment generating function")

    def mgf(self, t) -> np.ndarray:
        return np.exp(self.log_mgf(t))

    @property
    def t_domain(self) -> tuple[float, float]:
        raise DomainError(f"{self} has no moment generating function")

    # -- sampling and scaling ----------------------------------------------
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, k: float) -> "DistributionSpec":
        raise NotImplementedError


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if v != int(v) or abs(v) >= 1e16 else str(int(v))
    return str(v)


def _check_pos(name: str, v: float) -> None:
    if not (v > 0 and math.isfinite(v)):
        raise DomainError(f"{name} must be positive and finite, got {v}")


# -- light-tailed laws -----------------------------------------------------------


@dataclass(frozen=True)
class Normal(DistributionSpec):
    sigma: float = 1.0
    name: ClassVar[str] = "normal"

    def __post_init__(self):
        _check_pos("sigma", self.sigma)

    def params(self):
        return {"sigma": self.sigma}

    @property
    def variance(self):
        return self.sigma**2

    def tail_abs(self, x):
        return special.erfc(np.asarray(x, dtype=float) / (self.sigma * math.sqrt(2.0)))

    def log_tail_abs(self, log_x):
        x = np.exp(np.minimum(np.asarray(log_x, dtype=float), 700.0)) / self.sigma
        return math.log(2.0) + special.log_ndtr(-x)

    def log_mgf(self, t):
        return 0.5 * (self.sigma * np.asarray(t, dtype=float)) ** 2

    @property
    def t_domain(self):
        return (-50.0 / self.sigma, 50.0 / self.sigma)

    def sample(self, rng, size):
        return self.sigma * rng.standard_normal(size)

    def scaled(self, k):
        return Normal(self.sigma * abs(k))


@dataclass(frozen=True)
class TwoPoint(DistributionSpec):
    """X = v with probability prob, and -v*prob/(1-prob) otherwise (mean zero)."""

    v: float = 1.0
    prob: float = 0.5
    name: ClassVar[str] = "twopoint"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        _check_pos("v", self.v)
        if not 0.0 < self.prob < 1.0:
            raise DomainError(f"prob must lie in (0, 1), got {self.prob}")

    def params(self):
        return {"v": self.v, "prob": self.prob}

    @property
    def symmetric(self):  # type: ignore[override]
        return self.prob == 0.5

    @property
    def w(self) -> float:
        return -self.v * self.prob / (1.0 - self.prob)

    def atoms(self):
        p = Fraction(self.prob)
        v = Fraction(self.v)
        return [(v, p), (-v * p / (1 - p), 1 - p)]

    @property
    def variance(self):
        return self.v**2 * self.prob / (1.0 - self.prob)

    @property
    def x_max(self):
        return self.v

    @property
    def mass_at_max(self):
        return self.prob

    def tail_abs(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.v, self.prob, 0.0) + np.where(x < -self.w, 1.0 - self.prob, 0.0)

    def log_mgf(self, t):
        t = np.asarray(t, dtype=float)
        return np.logaddexp(math.log(self.prob) + t * self.v, math.log1p(-self.prob) + t * self.w)

    @property
    def t_domain(self):
        s = max(self.v, -self.w)
        return (-1e4 / s, 1e4 / s)

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.prob, self.v, self.w)

    def scaled(self, k):
        if k > 0:
            return TwoPoint(self.v * k, self.prob)
        if k < 0:
            return TwoPoint(-self.w * -k, 1.0 - self.prob)
        return Degenerate()


@dataclass(frozen=True)
class Rademacher(TwoPoint):
    """Symmetric +-1 signs."""

    v: float = 1.0
    prob: float = 0.5
    name: ClassVar[str] = "rademacher"

    def __post_init__(self):
        if self.v != 1.0 or self.prob != 0.5:
            raise DomainError("rademacher takes no parameters")

    def params(self):
        return {}

    def log_mgf(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)

    def sample(self, rng, size):
        bits = np.unpackbits(np.frombuffer(rng.bytes((size + 7) // 8), dtype=np.uint8), count=size)
        return 2.0 * bits - 1.0

    def scaled(self, k):
        return TwoPoint(abs(k), 0.5) if k else Degenerate()


@dataclass(frozen=True)
class UniformSym(DistributionSpec):
    """Uniform on [-a, a]."""

    a: float = math.sqrt(3.0)
    name: ClassVar[str] = "uniform"

    def __post_init__(self):
        _check_pos("a", self.a)

    def params(self):
        return {"a": self.a}

    @property
    def variance(self):
        return self.a**2 / 3.0

    @property
    def x_max(self):
        return self.a

    def tail_abs(self, x):
        return np.clip(1.0 - np.asarray(x, dtype=float) / self.a, 0.0, 1.0)

    def log_mgf(self, t):
        z = np.abs(self.a * np.asarray(t, dtype=float))
        small = z < 0.5
        zs = np.where(small, 1.0, z)
        big = zs - np.log(2.0 * zs) + np.log1p(-np.exp(-2.0 * zs))
        # sinh(z)/z - 1 = sum_k z^2k / (2k+1)!: positive terms, no cancellation
        zz = np.where(small, z, 0.0) ** 2
        term, excess = np.ones_like(zz), np.zeros_like(zz)
        for k in range(1, 12):
            term = term * zz / ((2 * k) * (2 * k + 1))
            excess = excess + term
        return np.where(small, np.log1p(excess), big)

    @property
    def t_domain(self):
        return (-math.inf, math.inf)

    def sample(self, rng, size):
        return self.a * (2.0 * rng.random(size) - 1.0)

    def scaled(self, k):
        return UniformSym(self.a * abs(k)) if k else Degenerate()


@dataclass(frozen=True)
class Degenerate(DistributionSpec):
    """X = 0 identically; exists for boundary tests."""

    name: ClassVar[str] = "zero"
    discrete: ClassVar[bool] = True

    @property
    def variance(self):
        return 0.0

    @property
    def x_max(self):
        return 0.0

    @property
    def mass_at_max(self):
        return 1.0

    def atoms(self):
        return [(Fraction(0), Fraction(1))]

    def tail_abs(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def log_mgf(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    @property
    def t_domain(self):
        return (-50.0, 50.0)

    def sample(self, rng, size):
        return np.zeros(size)

    def scaled(self, k):
        return self


# -- heavy tail ------------------------------------------------------------------


@dataclass(frozen=True)
class LogTailPareto(DistributionSpec):
    tail_a: float = 3.0
    log_exp: float = 3.0
    x_cut: float = math.e**2
    loglog_exp: float = 0.0
    scale: float = 1.0
    name: ClassVar[str] = "logtail"
    mgf_available: ClassVar[bool] = False

    def __post_init__(self):
        if not self.tail_a > 1:
            raise DomainError(f"tail_a must exceed 1 for a proper density, got {self.tail_a}")
        if not self.x_cut > math.e:
            raise DomainError("x_cut must exceed e so that log log x > 0 on the tail")
        _check_pos("scale", self.scale)
        for v in (self.log_exp, self.loglog_exp):
            if not math.isfinite(v):
                raise DomainError("tail exponents must be finite")

    def params(self):
        return {
            "tail": self.tail_a,
            "a": self.log_exp,
            "b": self.loglog_exp,
            "cut": self.x_cut,
            "scale": self.scale,
        }

    @property
    def w_cut(self) -> float:
        return math.log(self.x_cut)

    def log_h_w(self, w):
        """log h(e^w) for the unscaled law."""
        w = np.asarray(w, dtype=float)
        return -self.tail_a * w - self.log_exp * np.log(w) - self.loglog_exp * np.log(np.log(w))

    def _tail_moment_w(self, k: float) -> float:
        """integral over x > x_cut of x^k h(x) dx, in w = log x; may be +inf."""
        s = k + 1.0 - self.tail_a
        a, b, w0 = self.log_exp, self.loglog_exp, self.w_cut
        if s > 0 or (s == 0 and (a < 1 or (a == 1 and b <= 1))):
            return math.inf
        scale = math.exp(s * w0 - a * math.log(w0) - b * math.log(math.log(w0)))
        lw0 = math.log(w0)
        if s == 0:
            # substitute v = log w: integrand e^{(1-a) v} v^-b
            if a == 1:
                return scale * w0 * lw0 / (b - 1.0)
            if b == 0:
                return scale * w0 / (a - 1.0)
            val, _ = integrate.quad(
                lambda v: math.exp((1.0 - a) * (v - lw0) - b * math.log(v / lw0)),
                lw0, math.inf, limit=400, epsabs=0.0, epsrel=1e-11,
            )
            return scale * w0 * val

        def rel(w):
            return math.exp(s * (w - w0) - a * math.log(w / w0) - b * math.log(math.log(w) / lw0))

        val, _ = integrate.quad(rel, w0, math.inf, limit=400, epsabs=0.0, epsrel=1e-11)
        return scale * val

    @cached_property
    def _norm(self) -> tuple[float, float]:
        """(c, body probability) for the unscaled law."""
        xc = self.x_cut
        hc = math.exp(float(self.log_h_w(self.w_cut)))
        body = xc * hc
        tail = self._tail_moment_w(0.0)
        c = 1.0 / (2.0 * (body + tail))
        return c, 2.0 * c * body

    @property
    def body_prob(self) -> float:
        return self._norm[1]

    def log_density_w(self, w):
        """Log-density of W = log|X/scale| on the tail w > log x_cut (both signs folded)."""
        c, _ = self._norm
        w = np.asarray(w, dtype=float)
        return math.log(2.0 * c) + w + self.log_h_w(w)

    @property
    def variance(self):
        c, _ = self._norm
        xc = self.x_cut
        hc = math.exp(float(self.log_h_w(self.w_cut)))
        body = 2.0 * c * hc * xc**3 / 3.0
        tail = 2.0 * c * self._tail_moment_w(2.0)
        return self.scale**2 * (body + tail)

    def _log_tail_w(self, w) -> np.ndarray:
        """log P(|X| > e^w) for the unscaled law."""
        w = np.asarray(w, dtype=float)
        c, pb = self._norm
        out = np.empty_like(w)
        flat = w <= self.w_cut
        with np.errstate(divide="ignore"):
            out[flat] = np.log1p(-pb * np.exp(w[flat] - self.w_cut))
        wt = w[~flat]
        if wt.size:
            lam = self.tail_a - 1.0
            a, b = self.log_exp, self.loglog_exp
            lw = np.log(wt)[:, None]

            def rel(t):  # log density ratio at w + t versus w, with e^{-lam t} removed
                return -a * np.log1p(t / wt[:, None]) - b * np.log(np.log(wt[:, None] + t) / lw)

            near = np.exp(rel(_GL_T[None, :]) - lam * _GL_T[None, :]) @ _GL_W
            far_t = _NEAR + _LAG_X / lam
            far = np.exp(rel(far_t[None, :]) - lam * _NEAR) @ _LAG_W / lam
            log_p = np.log(2.0 * c) + wt + self.log_h_w(wt)
            out[~flat] = log_p + np.log(near + far)
        return out

    def log_tail_abs(self, log_x):
        return self._log_tail_w(np.asarray(log_x, dtype=float) - math.log(self.scale))

    def tail_abs(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp(self.log_tail_abs(np.log(x)))

    def sample(self, rng, size):
        if self.log_exp < 0 or self.loglog_exp < 0:
            raise DomainError("sampling needs non-negative log exponents")
        _, pb = self._norm
        out = np.empty(size)
        body = rng.random(size) < pb
        nb = int(body.sum())
        out[body] = self.x_cut * rng.random(nb)
        # tail: W = w0 + Exp(tail_a - 1), accepted with prob (w0/W)^a (log w0/log W)^b
        need = size - nb
        w0 = self.w_cut
        lam = self.tail_a - 1.0
        got = []
        while need > 0:
            m = max(64, int(need * 1.3))
            w = w0 + rng.exponential(1.0 / lam, m)
            logacc = -self.log_exp * np.log(w / w0) - self.loglog_exp * np.log(np.log(w) / math.log(w0))
            keep = w[np.log(rng.random(m)) < logacc][:need]
            got.append(keep)
            need -= len(keep)
        if got:
            out[~body] = np.exp(np.concatenate(got))
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return self.scale * sign * out

    def scaled(self, k):
        return replace(self, scale=self.scale * abs(k)) if k else Degenerate()


# composite Gauss-Legendre on [0, _NEAR] plus Gauss-Laguerre beyond, for tails
_NEAR = 6.0
_gx, _gw = np.polynomial.legendre.leggauss(16)
_GL_T = np.concatenate([j + 0.5 * (_gx + 1.0) for j in range(int(_NEAR))])
_GL_W = np.concatenate([0.5 * _gw for _ in range(int(_NEAR))])
_LAG_X, _LAG_W = np.polynomial.laguerre.laggauss(40)


# -- text form -------------------------------------------------------------------

_KINDS = {
    "normal": (Normal, {"sigma": "sigma"}),
    "rademacher": (Rademacher, {}),
    "uniform": (UniformSym, {"a": "a"}),
    "twopoint": (TwoPoint, {"v": "v", "prob": "prob", "p": "prob"}),
    "zero": (Degenerate, {}),
    "logtail": (
        LogTailPareto,
        {"tail": "tail_a", "a": "log_exp", "b": "loglog_exp", "cut": "x_cut", "scale": "scale"},
    ),
}


def parse_dist(text: str) -> DistributionSpec:
    """Parse e.g. ``normal(sigma=1)``, ``rademacher``, ``logtail(a=3,cut=7.39)``."""
    name, kw = parse_call(text)
    if name not in _KINDS:
        raise ValueError(f"unknown distribution {name!r}; expected one of {sorted(_KINDS)}")
    cls, keys = _KINDS[name]
    args = {}
    for k, v in kw.items():
        if k not in keys:
            raise ValueError(f"{name}: unknown parameter {k!r}")
        args[keys[k]] = float(v)
    return cls(**args)
