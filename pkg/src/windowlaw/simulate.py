"""Streaming Monte Carlo for normalised window sums.

A replicate is one i.i.d. stream X_1, ..., X_N.  Checkpoints sit at
n_k = round(psi(c k)) and carry

    R_k = (S_{n_k + a_{n_k}} - S_{n_k}) / sqrt(2 a_{n_k} d_{n_k}).

Random numbers
--------------
The stream is cut into fixed chunks of ``chunk_size`` draws.  Chunk j of
replicate r is drawn from ``PCG64(SeedSequence(entropy=seed, spawn_key=(r, j)))``
and always drawn in full, so every prefix of the stream is the same whatever
``n_total`` is, replicates are independent, and a run can resume at any
chunk boundary.  This derivation is part of the stable output contract.

Summation
---------
Prefix sums are only materialised at window boundaries: each chunk is cut at
the boundaries that fall inside it, the pieces are summed with numpy's
pairwise summation, and pieces are accumulated with Neumaier compensation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from statistics import median

import numpy as np

from .distributions import DistributionSpec, parse_dist
from .errors import DomainError
from .norming import (
    BoundParams,
    SubsequenceSpec,
    d_seq,
    f_seq,
    n_min,
    subsequence,
    truncation_level,
    width,
)
from .svf import SlowlyVarying, parse_spec, phi

STATE_FORMAT_VERSION = 1
DEFAULT_CHUNK = 1 << 20


class Mode(str, Enum):
    CHECKPOINTS = "CheckpointsOnly"
    DENSE = "DenseMax"


@dataclass(frozen=True)
class StreamConfig:
    dist: DistributionSpec
    spec: SlowlyVarying
    c: float
    n_total: int
    seed: int
    mode: Mode = Mode.CHECKPOINTS
    replicates: int = 1
    chunk_size: int = DEFAULT_CHUNK
    truncation: BoundParams | None = None

    def __post_init__(self):
        if not self.c > 1:
            raise DomainError(f"c must exceed 1 so checkpoint windows separate, got {self.c}")
        if self.n_total < n_min(self.spec):
            raise DomainError(f"n_total = {self.n_total} below n_min = {n_min(self.spec)}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if self.chunk_size < 1:
            raise DomainError("chunk_size must be >= 1")
        object.__setattr__(self, "mode", Mode(self.mode))

    def canonical(self) -> str:
        tr = "none"
        if self.truncation is not None:
            t = self.truncation
            tr = f"{t.sigma!r},{t.delta!r},{t.epsilon!r},{t.gamma!r}"
        return (
            f"dist={self.dist.to_text()};spec={self.spec.to_text()};c={self.c!r};"
            f"n_total={self.n_total};seed={self.seed};mode={self.mode.value};"
            f"chunk={self.chunk_size};truncation={tr}"
        )

    @property
    def config_hash(self) -> str:
        """Hash of everything that determines a replicate's output (not the replicate count)."""
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CheckpointRecord:
    k: int
    n_k: int
    a: int
    d: float
    R: float


@dataclass
class TruncationStats:
    """Per-checkpoint window sums of the three truncation components."""

    k: np.ndarray
    a: np.ndarray
    d: np.ndarray
    lower: np.ndarray  # b-level (sigma delta / eps) sqrt(a/d)
    upper: np.ndarray  # delta sqrt(f(n))
    t1: np.ndarray  # |X| <= lower
    t2: np.ndarray  # lower < |X| < upper
    t3: np.ndarray  # |X| >= upper
    total: np.ndarray  # plain window sum over the same elements
    count3: np.ndarray  # number of nonzero third-component terms
    abs_sum: np.ndarray  # sum |X| over the window, for rounding bounds

    def partition_residual(self) -> np.ndarray:
        """|T' + T'' + T''' - T| per window; zero up to summation rounding."""
        return np.abs(self.t1 + self.t2 + self.t3 - self.total)

    def rounding_bound(self) -> np.ndarray:
        """A generous bound for the residual: 4 * a * eps * sum |X|."""
        return 4.0 * self.a * np.finfo(float).eps * self.abs_sum + 1e-300

    def __eq__(self, other):
        if not isinstance(other, TruncationStats):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("k", "a", "d", "lower", "upper", "t1", "t2", "t3", "total", "count3", "abs_sum")
        )


@dataclass
class SimulationResult:
    checkpoints: list[CheckpointRecord]
    running_max: float
    running_min: float
    dense_max: float | None
    truncation_stats: TruncationStats | None
    seed: int
    replicate: int
    config_hash: str
    n_total: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def R(self) -> np.ndarray:
        return np.array([c.R for c in self.checkpoints])

    @property
    def d(self) -> np.ndarray:
        return np.array([c.d for c in self.checkpoints])


# -- schedule ---------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    k: np.ndarray
    n: np.ndarray
    a: np.ndarray
    d: np.ndarray

    @property
    def end(self) -> np.ndarray:
        return self.n + self.a

    def __len__(self) -> int:
        return len(self.k)


def checkpoint_schedule(spec: SlowlyVarying, c: float, n_total: int) -> Schedule:
    """Checkpoints n_k = round(psi(c k)) >= n_min whose windows end by n_total."""
    sub = SubsequenceSpec(spec, c)
    lo = n_min(spec)
    k_top = int(phi(spec, float(n_total)) / c) + 2
    ks, ns = [], []
    for k in range(1, k_top + 1):
        n = subsequence(sub, k)
        if n >= lo and (not ns or n > ns[-1]):
            ks.append(k)
            ns.append(n)
    n_arr = np.array(ns, dtype=np.int64)
    a_arr = width(spec, n_arr).astype(np.int64)
    keep = n_arr + a_arr <= n_total
    n_arr, a_arr = n_arr[keep], a_arr[keep]
    return Schedule(np.array(ks, dtype=np.int64)[keep], n_arr, a_arr, d_seq(spec, n_arr))


# -- stream primitives -----------------------------------------------------------------


def chunk_rng(seed: int, replicate: int, chunk: int) -> np.random.Generator:
    """Generator for chunk ``chunk`` of replicate ``replicate`` (the stable RNG contract)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replicate, chunk))
    return np.random.Generator(np.random.PCG64(ss))


class _Neumaier:
    __slots__ = ("s", "c")

    def __init__(self, s: float = 0.0, c: float = 0.0):
        self.s, self.c = s, c

    def add(self, x: float) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


# -- the single-replicate engine --------------------------------------------------------


class _Runner:
    def __init__(self, config: StreamConfig, replicate: int):
        self.cfg = config
        self.rep = replicate
        self.sched = checkpoint_schedule(config.spec, config.c, config.n_total)
        if len(self.sched) == 0:
            raise DomainError("n_total is shorter than the first checkpoint window")
        ends = self.sched.end
        self.boundaries = np.unique(np.concatenate([self.sched.n, ends]))
        self.start_of = {int(n): i for i, n in enumerate(self.sched.n)}
        self.end_of: dict[int, list[int]] = {}
        for i, e in enumerate(ends):
            self.end_of.setdefault(int(e), []).append(i)
        self.norm = np.sqrt(2.0 * self.sched.a * self.sched.d)
        # mutable state
        self.pos = 0
        self.acc = _Neumaier()
        self.pending: dict[int, float] = {}  # checkpoint index -> S_{n_k}
        self.R = np.full(len(self.sched), np.nan)
        self.dense_max = -math.inf if config.mode is Mode.DENSE else None
        self.dense_next = n_min(config.spec)
        if config.truncation is not None:
            t = config.truncation
            n = self.sched.n
            self.t_lower = truncation_level(config.spec, n, t)
            self.t_upper = t.delta * np.sqrt(f_seq(config.spec, n))
            self.t_acc = np.zeros((len(self.sched), 5))  # t1, t2, t3, total, abs
            self.t_comp = np.zeros((len(self.sched), 5))
            self.t_count = np.zeros(len(self.sched), dtype=np.int64)
        if config.mode is Mode.DENSE:
            self.a_max = int(np.max(width(config.spec, np.array([config.n_total], dtype=float))))
            self.buf = np.zeros(0)  # prefix sums S_j for j in [buf_start, pos]
            self.buf_start = 0

    # -- state file -----------------------------------------------------------
    def state_dict(self) -> dict:
        st = {
            "format_version": STATE_FORMAT_VERSION,
            "config_hash": self.cfg.config_hash,
            "seed": self.cfg.seed,
            "replicate": self.rep,
            "position": self.pos,
            "sum": [self.acc.s, self.acc.c],
            "pending": {str(k): v for k, v in self.pending.items()},
            "R": [None if math.isnan(r) else r for r in self.R],
        }
        if self.cfg.truncation is not None:
            st["trunc_acc"] = self.t_acc.tolist()
            st["trunc_comp"] = self.t_comp.tolist()
            st["trunc_count"] = self.t_count.tolist()
        if self.cfg.mode is Mode.DENSE:
            st["dense_max"] = self.dense_max
            st["dense_next"] = self.dense_next
            st["buf_start"] = self.buf_start
        return st

    def load_state(self, st: dict, buf: np.ndarray | None) -> None:
        if st.get("format_version") != STATE_FORMAT_VERSION:
            raise DomainError("state file format version mismatch")
        if st["config_hash"] != self.cfg.config_hash or st["replicate"] != self.rep:
            raise DomainError("state file belongs to a different configuration or replicate")
        self.pos = int(st["position"])
        self.acc = _Neumaier(*st["sum"])
        self.pending = {int(k): float(v) for k, v in st["pending"].items()}
        self.R = np.array([np.nan if r is None else r for r in st["R"]], dtype=float)
        if self.cfg.truncation is not None:
            self.t_acc = np.array(st["trunc_acc"], dtype=float).reshape(len(self.sched), 5)
            self.t_comp = np.array(st["trunc_comp"], dtype=float).reshape(len(self.sched), 5)
            self.t_count = np.array(st["trunc_count"], dtype=np.int64)
        if self.cfg.mode is Mode.DENSE:
            self.dense_max = float(st["dense_max"])
            self.dense_next = int(st["dense_next"])
            self.buf_start = int(st["buf_start"])
            self.buf = buf if buf is not None else np.zeros(0)

    # -- one chunk ------------------------------------------------------------
    def step(self, chunk_index: int) -> None:
        cfg = self.cfg
        C = cfg.chunk_size
        base = chunk_index * C
        x = cfg.dist.sample(chunk_rng(cfg.seed, self.rep, chunk_index), C)
        use = min(C, cfg.n_total - base)
        x = x[:use]
        prefix_before = self.acc.value

        lo = np.searchsorted(self.boundaries, base, side="right")
        hi = np.searchsorted(self.boundaries, base + use, side="right")
        cuts = (self.boundaries[lo:hi] - base).astype(np.int64)
        edges = np.concatenate(([0], cuts[cuts < use], [use]))
        pieces = np.add.reduceat(x, edges[:-1]) if use else np.zeros(0)
        at_cut = set(cuts.tolist())
        for j, cut in enumerate(edges[1:]):
            self.acc.add(float(pieces[j]))
            if int(cut) in at_cut:
                self._at_boundary(int(base + cut), self.acc.value)

        if cfg.truncation is not None:
            self._truncation_chunk(x, base)
        if cfg.mode is Mode.DENSE:
            self._dense_chunk(x, base, prefix_before)
        self.pos = base + use

    def _at_boundary(self, p: int, S: float) -> None:
        i = self.start_of.get(p)
        if i is not None:
            self.pending[i] = S
        for j in self.end_of.get(p, ()):
            self.R[j] = (S - self.pending.pop(j)) / self.norm[j]

    def _truncation_chunk(self, x: np.ndarray, base: int) -> None:
        # windows cover indices n_k + 1 .. n_k + a, i.e. offsets n_k - base .. n_k + a - base - 1
        s0 = self.sched.n - base
        s1 = self.sched.end - base
        live = np.flatnonzero((s1 > 0) & (s0 < len(x)))
        for i in live:
            seg = x[max(0, s0[i]) : min(len(x), s1[i])]
            ax = np.abs(seg)
            m1 = ax <= self.t_lower[i]
            m3 = (ax >= self.t_upper[i]) & ~m1
            m2 = ~(m1 | m3)
            vals = (
                np.sum(np.where(m1, seg, 0.0)),
                np.sum(np.where(m2, seg, 0.0)),
                np.sum(np.where(m3, seg, 0.0)),
                np.sum(seg),
                np.sum(ax),
            )
            for j, v in enumerate(vals):
                acc = _Neumaier(self.t_acc[i, j], self.t_comp[i, j])
                acc.add(float(v))
                self.t_acc[i, j], self.t_comp[i, j] = acc.s, acc.c
            self.t_count[i] += int(np.count_nonzero(m3 & (seg != 0)))

    def _dense_chunk(self, x: np.ndarray, base: int, prefix_before: float) -> None:
        spec = self.cfg.spec
        # prefix sums for this chunk, anchored on the compensated total before the chunk
        local = prefix_before + np.cumsum(x)
        if self.buf.size == 0:
            self.buf = np.concatenate(([0.0], local))
            self.buf_start = 0
        else:
            self.buf = np.concatenate((self.buf, local))
        top = base + len(x)  # S known for indices buf_start .. top
        # all starts n with n + a_n <= top that were not handled yet
        n_hi = top
        cand = np.arange(self.dense_next, n_hi + 1, dtype=np.int64)
        if cand.size:
            a = width(spec, cand).astype(np.int64)
            ok = cand + a <= min(top, self.cfg.n_total)
            m = int(np.argmin(ok)) if not ok.all() else len(ok)
            if m:
                n = cand[:m]
                aa = a[:m]
                S_end = self.buf[n + aa - self.buf_start]
                S_beg = self.buf[n - self.buf_start]
                r = (S_end - S_beg) / np.sqrt(2.0 * aa * d_seq(spec, n))
                self.dense_max = max(self.dense_max, float(np.max(r)))
                self.dense_next = int(n[-1]) + 1
        keep_from = max(self.buf_start, self.dense_next - 1)
        drop = keep_from - self.buf_start
        if drop > 0:
            self.buf = self.buf[drop:].copy()
            self.buf_start = keep_from

    def result(self, wall: float) -> SimulationResult:
        sched = self.sched
        recs = [
            CheckpointRecord(int(sched.k[i]), int(sched.n[i]), int(sched.a[i]), float(sched.d[i]), float(self.R[i]))
            for i in range(len(sched))
        ]
        trunc = None
        if self.cfg.truncation is not None:
            tot = self.t_acc + self.t_comp
            trunc = TruncationStats(
                k=sched.k.copy(), a=sched.a.copy(), d=sched.d.copy(),
                lower=self.t_lower, upper=self.t_upper,
                t1=tot[:, 0], t2=tot[:, 1], t3=tot[:, 2], total=tot[:, 3],
                count3=self.t_count.copy(), abs_sum=tot[:, 4],
            )
        return SimulationResult(
            checkpoints=recs,
            running_max=float(np.max(self.R)),
            running_min=float(np.min(self.R)),
            dense_max=self.dense_max,
            truncation_stats=trunc,
            seed=self.cfg.seed,
            replicate=self.rep,
            config_hash=self.cfg.config_hash,
            n_total=self.cfg.n_total,
            wall_time=wall,
        )


def run_windows(
    config: StreamConfig,
    replicate: int = 0,
    state_path: str | os.PathLike | None = None,
    save_every: int = 8,
    stop_after: int | None = None,
) -> SimulationResult | None:
    """Single pass over one replicate's stream.

    With ``state_path`` the run saves its state every ``save_every`` chunks and
    resumes from an existing compatible state file.  ``stop_after`` halts after
    that many chunks of this call (simulating a killed run) and returns None.
    """
    t0 = time.perf_counter()
    run = _Runner(config, replicate)
    if state_path is not None and os.path.exists(state_path):
        with open(state_path) as fh:
            st = json.load(fh)
        buf = None
        if config.mode is Mode.DENSE and os.path.exists(_buf_path(state_path)):
            buf = np.load(_buf_path(state_path))
        run.load_state(st, buf)
    C = config.chunk_size
    n_chunks = -(-config.n_total // C)
    first = run.pos // C
    done_here = 0
    for j in range(first, n_chunks):
        run.step(j)
        done_here += 1
        if state_path is not None and (done_here % save_every == 0 or j == n_chunks - 1):
            _save_state(run, state_path)
        if stop_after is not None and done_here >= stop_after and j < n_chunks - 1:
            if state_path is not None:
                _save_state(run, state_path)
            return None
    return run.result(time.perf_counter() - t0)


def _buf_path(state_path) -> str:
    return os.fspath(state_path) + ".buf.npy"


def _save_state(run: _Runner, state_path) -> None:
    tmp = os.fspath(state_path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(run.state_dict(), fh)
    os.replace(tmp, state_path)
    if run.cfg.mode is Mode.DENSE:
        np.save(_buf_path(state_path), run.buf)


def _run_one(args):
    config, r = args
    return run_windows(config, r)


def run_replicates(config: StreamConfig, jobs: int = 1) -> list[SimulationResult]:
    """All replicates 0..replicates-1, returned in replicate order whatever ``jobs`` is."""
    tasks = [(config, r) for r in range(config.replicates)]
    if jobs <= 1 or config.replicates == 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_one, tasks))


# -- reports -------------------------------------------------------------------------------


def write_checkpoints_csv(result: SimulationResult, path) -> None:
    """Columns k,n_k,a,d,R,running_max; reals with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "n_k", "a", "d", "R", "running_max"])
        run = -math.inf
        for c in result.checkpoints:
            run = max(run, c.R)
            w.writerow([c.k, c.n_k, c.a, f"{c.d:.17g}", f"{c.R:.17g}", f"{run:.17g}"])


@dataclass
class VarianceReport:
    block_ratios: list[float]
    block_d: list[float]
    ratio: float  # pooled sum R^2 2 d / sigma^2 over all checkpoints, divided by the count
    n_samples: int


def empirical_variance_check(results, sigma: float, block: int = 10) -> VarianceReport:
    """Compare the spread of R with sigma^2 / (2 d) within blocks of consecutive checkpoints.

    Accepts one result or a list of replicates (pooled per block).
    """
    if isinstance(results, SimulationResult):
        results = [results]
    n_cp = len(results[0].checkpoints)
    if n_cp * len(results) < 30:
        raise DomainError("need at least 30 checkpoint values")
    R = np.array([r.R for r in results])  # replicates x checkpoints
    d = results[0].d
    ratios, dbar = [], []
    for s in range(0, n_cp, block):
        rb = R[:, s : s + block].ravel()
        db = float(np.mean(d[s : s + block]))
        target = sigma**2 / (2.0 * db) if sigma > 0 else 0.0
        ratios.append(float(np.var(rb, ddof=1) / target) if target > 0 else 0.0)
        dbar.append(db)
    if sigma > 0:
        pooled = float(np.mean(R**2 * 2.0 * d[None, :]) / sigma**2)
    else:
        pooled = 0.0
    return VarianceReport(ratios, dbar, pooled, R.size)


@dataclass
class TruncationSummary:
    var_ratio: float  # pooled mean of T'^2 / (a sigma^2) over the selected checkpoints
    var_ratio_se: float
    centering_ratio: float  # |mean T'| / sqrt(a d), pooled
    centering_se: float  # Monte Carlo standard error of the centering ratio
    max_partition_residual: float  # max |T'+T''+T'''-T| / rounding bound (<= 1 means within bound)
    nonzero_third: int
    n_samples: int


def truncation_summary(results: list[SimulationResult], sigma: float, last: int = 10) -> TruncationSummary:
    stats = [r.truncation_stats for r in results]
    if any(s is None for s in stats):
        raise DomainError("results were produced without truncation tracking")
    sl = slice(-last, None)
    z = np.concatenate([s.t1[sl] / np.sqrt(s.a[sl] * sigma**2) for s in stats])
    c = np.concatenate([s.t1[sl] / np.sqrt(s.a[sl] * s.d[sl]) for s in stats])
    var_ratio = float(np.mean(z**2))
    var_se = float(np.std(z**2, ddof=1) / math.sqrt(z.size))
    resid = max(float(np.max(s.partition_residual() / s.rounding_bound())) for s in stats)
    return TruncationSummary(
        var_ratio=var_ratio,
        var_ratio_se=var_se,
        centering_ratio=float(abs(np.mean(c))),
        centering_se=float(np.std(c, ddof=1) / math.sqrt(c.size)),
        max_partition_residual=resid,
        nonzero_third=int(sum(int(np.sum(s.count3)) for s in stats)),
        n_samples=int(z.size),
    )


def truncation_experiment(config: StreamConfig, params: BoundParams, jobs: int = 1, last: int = 10):
    """Run all replicates with the three-way split and summarise the last checkpoints."""
    cfg = replace(config, truncation=params)
    results = run_replicates(cfg, jobs)
    return truncation_summary(results, params.sigma, last), results


@dataclass
class LimsupSummary:
    per_replicate: list[float]  # running_max / sigma
    median: float
    band: tuple[float, float]
    fraction_in_band: float
    last_quarter_max: list[float]


def limsup_summary(results: list[SimulationResult], sigma: float, band=(0.70, 1.20)) -> LimsupSummary:
    if len(results) < 8:
        raise DomainError("need at least 8 replicates")
    per = [r.running_max / sigma for r in results]
    lq = []
    for r in results:
        R = r.R
        q = max(1, len(R) // 4)
        lq.append(float(np.max(R[-q:])) / sigma)
    inside = sum(band[0] <= v <= band[1] for v in per)
    return LimsupSummary(per, float(median(per)), tuple(band), inside / len(per), lq)


__all__ = [
    "Mode",
    "StreamConfig",
    "CheckpointRecord",
    "SimulationResult",
    "TruncationStats",
    "Schedule",
    "checkpoint_schedule",
    "chunk_rng",
    "run_windows",
    "run_replicates",
    "write_checkpoints_csv",
    "empirical_variance_check",
    "truncation_summary",
    "truncation_experiment",
    "limsup_summary",
    "parse_dist",
    "parse_spec",
]
