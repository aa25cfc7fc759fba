"""Slowly varying functions L used as window-width divisors.

Every family is evaluated in logarithmic coordinates: callers pass
``u = log x`` to the private hooks, which keeps huge abscissae (x ~ e^600
and beyond, as reached by long subsequences) representable.  The public
functions accept plain abscissae ``x`` where that is natural.

The Karamata-type integral used throughout is

    phi(y) = int_{x0}^{y} L(v) dv / v = int_{log x0}^{log y} L(e^w) dw,

and ``psi`` is its inverse.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import ClassVar, NamedTuple

import numpy as np
from scipy import integrate

from .errors import DomainError, NonConvergenceError

__all__ = [
    "SlowlyVarying",
    "LogPow",
    "IterLog",
    "LogPowOverLogLogPow",
    "LogLogPow",
    "ExpSqrtLog",
    "ExpLogBeta",
    "ConditionReport",
    "Conjugate",
    "parse_spec",
    "eval_L",
    "eval_ratio",
    "verify_ratio_condition",
    "phi",
    "phi_log",
    "phi_log_many",
    "psi",
    "psi_log",
    "psi_log_many",
    "de_bruijn_conjugate",
    "second_conjugate_relation",
    "phi_log_ratio",
]

_DOMAIN_RTOL = 1e-12
_QUAD_RTOL = 1e-10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class SlowlyVarying:
    """Base class; subclasses fill in the closed forms in log coordinates."""

    name: ClassVar[str] = ""

    # -- hooks, all in terms of u = log x ---------------------------------
    def log_L(self, u):
        raise NotImplementedError

    def ratio_u(self, u):
        """x L'(x) / L(x) written as a function of u = log x."""
        raise NotImplementedError

    @property
    def log_x0(self) -> float:
        raise NotImplementedError

    def _phi_closed(self, s):
        """Closed-form phi at log-abscissa s, or None when unavailable."""
        return None

    def params(self) -> dict:
        return {}

    # -- conveniences -----------------------------------------------------
    @property
    def x0(self) -> float:
        try:
            return math.exp(self.log_x0)
        except OverflowError:
            return math.inf

    @property
    def has_closed_phi(self) -> bool:
        return self._phi_closed(np.array([self.log_x0])) is not None

    def L_u(self, u):
        """L at e^u; overridden where a direct form avoids exp(log(.)) round-off."""
        return np.exp(self.log_L(u))

    def to_text(self) -> str:
        args = ",".join(f"{k}={_fmt(v)}" for k, v in self.params().items())
        return f"{self.name}({args})" if args else self.name

    def __str__(self) -> str:
        return self.to_text()


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return repr(float(v)).removesuffix(".0") if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class LogPow(SlowlyVarying):
    """L(x) = (log x)^p.  ``p = 0`` gives the constant function (test use only)."""

    p: float = 1.0
    name: ClassVar[str] = "logpow"

    def __post_init__(self):
        if not self.p >= 0 or not math.isfinite(self.p):
            raise ValueError(f"logpow needs p >= 0, got {self.p}")

    def log_L(self, u):
        return self.p * np.log(u)

    def L_u(self, u):
        return np.power(np.asarray(u, dtype=float), self.p)

    def ratio_u(self, u):
        return self.p / np.asarray(u, dtype=float)

    @property
    def log_x0(self) -> float:
        return 1.0

    def _phi_closed(self, s):
        q = self.p + 1.0
        return (np.power(s, q) - 1.0) / q

    def params(self):
        return {"p": self.p}


@dataclass(frozen=True)
class IterLog(SlowlyVarying):
    """L(x) = log_m x, the m-fold iterated logarithm."""

    m: int = 2
    name: ClassVar[str] = "iterlog"

    def __post_init__(self):
        if int(self.m) != self.m or not 1 <= self.m <= 4:
            raise ValueError(f"iterlog needs integer 1 <= m <= 4, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    def _inner(self, u):
        v = np.asarray(u, dtype=float)
        for _ in range(self.m - 1):
            v = np.log(v)
        return v

    def log_L(self, u):
        return np.log(self._inner(u))

    def L_u(self, u):
        return self._inner(u)

    def ratio_u(self, u):
        v = np.asarray(u, dtype=float)
        denom = v.copy()
        for _ in range(self.m - 1):
            v = np.log(v)
            denom = denom * v
        return 1.0 / denom

    @property
    def log_x0(self) -> float:
        # log of e^^m, i.e. e^^(m-1)
        v = 1.0
        for _ in range(self.m - 1):
            v = math.exp(v)
        return v

    def _phi_closed(self, s):
        if self.m == 1:
            return (np.power(s, 2.0) - 1.0) / 2.0
        if self.m == 2:
            # u0 = e makes the constant of integration vanish
            return s * np.log(s) - s
        return None

    def params(self):
        return {"m": self.m}


@dataclass(frozen=True)
class LogPowOverLogLogPow(SlowlyVarying):
    """L(x) = (log x)^p / (log log x)^q."""

    p: float = 1.0
    q: float = 1.0
    name: ClassVar[str] = "logpowloglog"

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("logpowloglog needs p > 0 and q > 0")

    def log_L(self, u):
        u = np.asarray(u, dtype=float)
        return self.p * np.log(u) - self.q * np.log(np.log(u))

    def ratio_u(self, u):
        u = np.asarray(u, dtype=float)
        return self.p / u - self.q / (u * np.log(u))

    @property
    def log_x0(self) -> float:
        # increasing iff log log x > q/p
        return float(math.floor(math.exp(self.q / self.p)) + 1)

    def params(self):
        return {"p": self.p, "q": self.q}


@dataclass(frozen=True)
class LogLogPow(SlowlyVarying):
    """L(x) = (log log x)^q with q > 1."""

    q: float = 2.0
    name: ClassVar[str] = "loglogpow"

    def __post_init__(self):
        if not self.q > 1:
            raise ValueError(f"loglogpow needs q > 1, got {self.q}")

    def log_L(self, u):
        return self.q * np.log(np.log(u))

    def L_u(self, u):
        return np.power(np.log(u), self.q)

    def ratio_u(self, u):
        u = np.asarray(u, dtype=float)
        return self.q / (u * np.log(u))

    @property
    def log_x0(self) -> float:
        return math.e

    def params(self):
        return {"q": self.q}


@dataclass(frozen=True)
class ExpSqrtLog(SlowlyVarying):
    """L(x) = exp(sqrt(log x))."""

    name: ClassVar[str] = "expsqrtlog"

    def log_L(self, u):
        return np.sqrt(u)

    def ratio_u(self, u):
        return 0.5 / np.sqrt(u)

    @property
    def log_x0(self) -> float:
        return 1.0

    def _phi_closed(self, s):
        r = np.sqrt(s)
        return 2.0 * np.exp(r) * (r - 1.0)


@dataclass(frozen=True)
class ExpLogBeta(SlowlyVarying):
    """L(x) = (log x)^(-gamma_exp) exp((log x)^beta), 0 < beta < 1."""

    beta: float = 0.4
    gamma_exp: float = 1.0
    name: ClassVar[str] = "explogbeta"

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"explogbeta needs 0 < beta < 1, got {self.beta}")
        if not math.isfinite(self.gamma_exp):
            raise ValueError("gamma must be finite")

    def log_L(self, u):
        u = np.asarray(u, dtype=float)
        return np.power(u, self.beta) - self.gamma_exp * np.log(u)

    def ratio_u(self, u):
        u = np.asarray(u, dtype=float)
        return self.beta * np.power(u, self.beta - 1.0) - self.gamma_exp / u

    @property
    def log_x0(self) -> float:
        if self.gamma_exp <= 0:
            return 1.0
        return float(math.floor((self.gamma_exp / self.beta) ** (1.0 / self.beta)) + 1)

    def params(self):
        return {"beta": self.beta, "gamma": self.gamma_exp}


# ---------------------------------------------------------------------------
# text form

_FAMILIES = {
    "logpow": (LogPow, {"p": "p"}),
    "iterlog": (IterLog, {"m": "m"}),
    "logpowloglog": (LogPowOverLogLogPow, {"p": "p", "q": "q"}),
    "logpowoverloglogpow": (LogPowOverLogLogPow, {"p": "p", "q": "q"}),
    "loglogpow": (LogLogPow, {"q": "q"}),
    "expsqrtlog": (ExpSqrtLog, {}),
    "explogbeta": (ExpLogBeta, {"beta": "beta", "gamma": "gamma_exp", "gamma_exp": "gamma_exp"}),
}

_CALL_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_call(text: str) -> tuple[str, dict[str, str]]:
    """Split ``name(k=v, ...)`` into a lower-cased name and raw keyword strings."""
    m = _CALL_RE.match(text.strip().lower())
    if not m:
        raise ValueError(f"cannot parse {text!r}")
    name, body = m.group(1).replace("_", ""), m.group(2)
    kwargs: dict[str, str] = {}
    if body and body.strip():
        for part in body.split(","):
            if "=" not in part:
                raise ValueError(f"expected key=value in {text!r}, got {part!r}")
            k, v = part.split("=", 1)
            kwargs[k.strip()] = v.strip()
    return name, kwargs


def parse_spec(text: str) -> SlowlyVarying:
    """Parse ``logpow(p=1.5)``, ``iterlog(m=3)``, ``explogbeta(beta=0.4,gamma=1)``..."""
    name, raw = parse_call(text)
    if name not in _FAMILIES:
        raise ValueError(f"unknown slowly varying family {name!r}")
    cls, keys = _FAMILIES[name]
    kwargs = {}
    for k, v in raw.items():
        if k not in keys:
            raise ValueError(f"{name} does not take parameter {k!r}")
        kwargs[keys[k]] = int(v) if keys[k] == "m" else float(v)
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# pointwise evaluation


def _log_arg(spec: SlowlyVarying, x: float) -> float:
    if not x > 0:
        raise DomainError(f"{spec}: x must be positive, got {x}")
    u = math.log(x)
    _check_u(spec, u)
    return u


def _check_u(spec: SlowlyVarying, u: float) -> None:
    u0 = spec.log_x0
    if u < u0 - _DOMAIN_RTOL * max(1.0, u0):
        raise DomainError(f"{spec}: abscissa e^{u:.6g} below x0 = e^{u0:.6g}")


def eval_L(spec: SlowlyVarying, x: float) -> float:
    """L(x) for x >= x0."""
    return float(np.exp(spec.log_L(_log_arg(spec, x))))


def eval_ratio(spec: SlowlyVarying, x: float) -> float:
    """x L'(x) / L(x) from the hard-coded derivative of each family."""
    return float(spec.ratio_u(_log_arg(spec, x)))


@dataclass(frozen=True)
class ConditionReport:
    family: SlowlyVarying
    grid: list[float]
    ratios: list[float]
    monotone_from: float
    verdict: bool


# a non-increasing tail shorter than this is not evidence of eventual monotonicity
MIN_MONOTONE_TAIL = 10


def verify_ratio_condition(spec: SlowlyVarying, n_grid: int = 61) -> ConditionReport:
    """Check that x L'(x)/L(x) is ultimately non-increasing on x0 * 2^j."""
    u = spec.log_x0 + math.log(2.0) * np.arange(n_grid)
    r = np.asarray(spec.ratio_u(u), dtype=float)
    start = len(r) - 1
    while start > 0 and r[start - 1] >= r[start] * (1 - 1e-13):
        start -= 1
    tail = r[start:]
    verdict = bool(len(tail) >= MIN_MONOTONE_TAIL and np.all(tail > 0))
    with np.errstate(over="ignore"):
        grid = np.exp(u)
    return ConditionReport(
        family=spec,
        grid=grid.tolist(),
        ratios=r.tolist(),
        monotone_from=float(grid[start]),
        verdict=verdict,
    )


# ---------------------------------------------------------------------------
# phi and its inverse


def phi_log(spec: SlowlyVarying, s: float) -> float:
    """phi at y = e^s.  Closed form where one exists, adaptive quadrature otherwise."""
    _check_u(spec, s)
    u0 = spec.log_x0
    s = max(s, u0)
    closed = spec._phi_closed(np.asarray(s, dtype=float))
    if closed is not None:
        return float(closed)
    if s == u0:
        return 0.0
    # split at a geometric ladder so quad sees panels of comparable scale
    edges = _panel_edges(spec, s)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(
            lambda w: math.exp(float(spec.log_L(w))), a, b, epsabs=0.0, epsrel=_QUAD_RTOL, limit=200
        )
        total += val
    return total


def phi(spec: SlowlyVarying, y: float) -> float:
    """Integral of L(v)/v from x0 to y."""
    return phi_log(spec, _log_arg(spec, y))


def psi_log(spec: SlowlyVarying, t: float) -> float:
    """log of psi(t), the inverse of phi.  Safe for arguments whose psi overflows."""
    if not t >= 0:
        raise DomainError(f"psi needs t >= 0, got {t}")
    u0 = spec.log_x0
    if t == 0:
        return u0
    tol = 1e-12 * max(1.0, t)
    lo, width = u0, 1.0
    hi = u0 + width
    while phi_log(spec, hi) < t:
        lo = hi
        width *= 2.0
        hi = u0 + width
    s = 0.5 * (lo + hi)
    for _ in range(200):
        g = phi_log(spec, s) - t
        if abs(g) <= tol:
            return s
        if g > 0:
            hi = s
        else:
            lo = s
        step = s - g / math.exp(float(spec.log_L(s)))
        s = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * math.ulp(hi):
            return s
    raise NonConvergenceError(f"psi({t}) for {spec} did not converge")


def psi(spec: SlowlyVarying, t: float) -> float:
    """Unique y >= x0 with phi(y) = t."""
    s = psi_log(spec, t)
    if s > 709.0:
        raise OverflowError(f"psi({t}) = e^{s:.6g} exceeds float range; use psi_log")
    return math.exp(s)


# -- bulk versions ----------------------------------------------------------


def _panel_edges(spec: SlowlyVarying, s_max: float) -> np.ndarray:
    """Panel ladder on [u0, s_max]: width <= s/8 and <= 1/(2 r), so log L moves by < 1/2."""
    u0 = spec.log_x0
    edges = [u0]
    s = u0
    while s < s_max:
        r = float(spec.ratio_u(s))
        h = s / 8.0
        if r > 0:
            h = min(h, 0.5 / r)
        s = min(s + h, s_max)
        edges.append(s)
    return np.asarray(edges)


def _gl(spec: SlowlyVarying, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GL_X
    vals = np.exp(spec.log_L(nodes))
    return half * (vals @ _GL_W)


class _PhiTable:
    """Cumulative Gauss-Legendre table of phi on a panel ladder."""

    def __init__(self, spec: SlowlyVarying, s_max: float | None = None, t_max: float | None = None):
        self.spec = spec
        u0 = spec.log_x0
        if t_max is not None:
            # grow the ladder until it covers t_max
            hi = u0 + 1.0
            while True:
                edges = _panel_edges(spec, hi)
                cum = np.concatenate([[0.0], np.cumsum(_gl(spec, edges[:-1], edges[1:]))])
                if cum[-1] >= t_max:
                    break
                hi = u0 + 2.0 * (hi - u0)
        else:
            edges = _panel_edges(spec, max(s_max, u0 + 1e-9))
            cum = np.concatenate([[0.0], np.cumsum(_gl(spec, edges[:-1], edges[1:]))])
        self.edges = edges
        self.cum = cum

    def panel(self, s):
        j = np.searchsorted(self.edges, s, side="right") - 1
        return np.clip(j, 0, len(self.edges) - 2)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        j = self.panel(s)
        return self.cum[j] + _gl(self.spec, self.edges[j], s)


def phi_log_many(spec: SlowlyVarying, s) -> np.ndarray:
    """Vectorised phi at log-abscissae s (composite Gauss-Legendre when no closed form)."""
    s = np.asarray(s, dtype=float)
    if np.any(s < spec.log_x0 - _DOMAIN_RTOL * max(1.0, spec.log_x0)):
        raise DomainError(f"{spec}: abscissa below x0")
    s = np.maximum(s, spec.log_x0)
    closed = spec._phi_closed(s)
    if closed is not None:
        return np.asarray(closed, dtype=float)
    return _PhiTable(spec, s_max=float(s.max()))(s)


def psi_log_many(spec: SlowlyVarying, t) -> np.ndarray:
    """Vectorised log psi(t): chord guess on the phi table, then clipped Newton steps."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("psi needs t >= 0")
    u0 = spec.log_x0
    out = np.full(t.shape, u0)
    live = t > 0
    if not np.any(live):
        return out
    tt = t[live]
    table = _PhiTable(spec, t_max=float(tt.max()))
    closed = spec.has_closed_phi
    fn = (lambda s: spec._phi_closed(s)) if closed else table
    k = np.clip(np.searchsorted(table.cum, tt, side="right") - 1, 0, len(table.edges) - 2)
    lo = table.edges[k].copy()
    hi = table.edges[k + 1].copy()
    s = np.interp(tt, table.cum, table.edges)
    tol = 1e-13 * np.maximum(1.0, tt)
    for _ in range(60):
        g = fn(s) - tt
        done = np.abs(g) <= tol
        if np.all(done):
            break
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        step = s - g / np.exp(spec.log_L(s))
        bad = ~((step > lo) & (step < hi))
        step = np.where(bad, 0.5 * (lo + hi), step)
        s = np.where(done, s, step)
    out[live] = s
    return out


# ---------------------------------------------------------------------------
# de Bruijn conjugate


class Conjugate(NamedTuple):
    value: float
    residual: float
    iterations: int


def de_bruijn_conjugate(spec: SlowlyVarying, x: float, tol: float = 1e-12, max_iter: int = 200) -> Conjugate:
    """L#(x) as the fixed point of y -> 1/L(x y), with residual |L(x L#) L# - 1|."""
    lx = math.log(x)
    if lx < 2.0 * spec.log_x0 * (1 - _DOMAIN_RTOL):
        raise DomainError(f"{spec}: conjugate needs x >= x0^2")
    ly = -float(spec.log_L(lx))
    for it in range(1, max_iter + 1):
        arg = lx + ly
        _check_u(spec, arg)
        new = -float(spec.log_L(arg))
        step = abs(math.expm1(new - ly))
        ly = new
        if step <= tol:
            break
    else:
        raise NonConvergenceError(f"conjugate of {spec} at {x:g} after {max_iter} iterations")
    residual = abs(math.expm1(float(spec.log_L(lx + ly)) + ly))
    return Conjugate(math.exp(ly), residual, it)


def second_conjugate_relation(spec: SlowlyVarying, x: float) -> float:
    """L(x) L#(x L(x)), which tends to 1."""
    lx = math.log(x)
    log_l = float(spec.log_L(lx))
    conj = de_bruijn_conjugate(spec, math.exp(lx + log_l)) if lx + log_l < 709 else None
    if conj is None:
        raise OverflowError("x L(x) exceeds float range")
    return math.exp(log_l) * conj.value


# ---------------------------------------------------------------------------


def phi_log_ratio(spec: SlowlyVarying, t: float) -> float:
    """log(L(t) log t) / log(phi(t)); tends to 1 for every admissible L."""
    u = _log_arg(spec, t)
    num = float(spec.log_L(u)) + math.log(u)
    ph = phi_log(spec, u)
    if num <= 0 or ph <= 1:
        raise DomainError(f"{spec}: need L(t) log t > 1 and phi(t) > 1 at t = {t:g}")
    return num / math.log(ph)
