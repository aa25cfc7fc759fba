import csv
import math
import tracemalloc

import numpy as np
import pytest
from scipy import stats

from windowlaw.distributions import Degenerate, Normal, Rademacher, UniformSym
from windowlaw.errors import DomainError
from windowlaw.norming import BoundParams, SubsequenceSpec, d_seq, n_min, subsequence, width
from windowlaw.simulate import (
    Mode,
    StreamConfig,
    checkpoint_schedule,
    chunk_rng,
    empirical_variance_check,
    limsup_summary,
    run_replicates,
    run_windows,
    truncation_experiment,
    write_checkpoints_csv,
)
from windowlaw.svf import IterLog, LogPow


def _stream(cfg, replicate=0):
    """The full stream, rebuilt from the documented chunk-derivation contract."""
    C = cfg.chunk_size
    parts = [cfg.dist.sample(chunk_rng(cfg.seed, replicate, j), C) for j in range(-(-cfg.n_total // C))]
    return np.concatenate(parts)[: cfg.n_total]


def _exact_prefix(x):
    return np.concatenate(([0.0], np.cumsum(np.asarray(x, dtype=np.longdouble)))).astype(float)


def test_zero_stream():
    cfg = StreamConfig(Degenerate(), LogPow(1.0), 2.0, 50_000, seed=5)
    res = run_windows(cfg)
    assert all(c.R == 0.0 for c in res.checkpoints)
    assert res.running_max == 0.0 and res.running_min == 0.0


def test_checkpoints_against_brute_force():
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 30_011, seed=3, chunk_size=997)
    res = run_windows(cfg)
    S = _exact_prefix(_stream(cfg))
    assert len(res.checkpoints) > 5
    for c in res.checkpoints:
        expect = (S[c.n_k + c.a] - S[c.n_k]) / math.sqrt(2 * c.a * c.d)
        assert c.R == pytest.approx(expect, rel=1e-12, abs=1e-13)
    assert res.running_max == max(c.R for c in res.checkpoints)
    assert res.running_min == min(c.R for c in res.checkpoints)


def test_schedule_matches_independent_count():
    spec, c, N = LogPow(1.0), 2.0, 10**8
    sub = SubsequenceSpec(spec, c)
    seen, keep = [], 0
    for k in range(1, 400):
        n = subsequence(sub, k)
        if n < n_min(spec) or (seen and n <= seen[-1]):
            continue
        seen.append(n)
        if n + int(width(spec, np.array([n]))[0]) <= N:
            keep += 1
    sched = checkpoint_schedule(spec, c, N)
    assert len(sched) == keep == 83
    assert np.all(np.diff(sched.n) > 0) and np.all(sched.end <= N)


def test_dense_against_brute_force():
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 20_000, seed=9, mode=Mode.DENSE, chunk_size=1500)
    res = run_windows(cfg)
    S = _exact_prefix(_stream(cfg))
    n = np.arange(n_min(cfg.spec), cfg.n_total + 1)
    a = width(cfg.spec, n).astype(np.int64)
    ok = n + a <= cfg.n_total
    n, a = n[ok], a[ok]
    r = (S[n + a] - S[n]) / np.sqrt(2 * a * d_seq(cfg.spec, n))
    assert res.dense_max == pytest.approx(float(np.max(r)), rel=1e-11)
    assert res.dense_max >= res.running_max


def test_determinism_and_parallel_equivalence():
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 200_000, seed=17, replicates=3, chunk_size=1 << 15)
    serial = run_replicates(cfg, jobs=1)
    again = run_replicates(cfg, jobs=1)
    parallel = run_replicates(cfg, jobs=2)
    assert serial == again == parallel
    assert serial[0].R.tolist() != serial[1].R.tolist()  # replicates are distinct streams


def test_prefix_property():
    base = dict(dist=Normal(1.0), spec=LogPow(1.0), c=2.0, seed=23, chunk_size=1 << 14)
    short = run_windows(StreamConfig(n_total=100_000, **base))
    long = run_windows(StreamConfig(n_total=1_000_000, **base))
    assert long.checkpoints[: len(short.checkpoints)] == short.checkpoints
    assert long.running_max >= short.running_max


@pytest.mark.parametrize("mode", list(Mode))
def test_resume_is_bit_identical(tmp_path, mode):
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 300_000, seed=31, mode=mode, chunk_size=1 << 13,
                       truncation=BoundParams())
    full = run_windows(cfg)
    state = tmp_path / "state.json"
    assert run_windows(cfg, state_path=state, save_every=3, stop_after=7) is None
    assert state.exists()
    resumed = run_windows(cfg, state_path=state, save_every=3)
    assert resumed == full


def test_resume_rejects_foreign_state(tmp_path):
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 100_000, seed=1, chunk_size=1 << 12)
    state = tmp_path / "s.json"
    run_windows(cfg, state_path=state, stop_after=2)
    other = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 100_000, seed=2, chunk_size=1 << 12)
    with pytest.raises(DomainError):
        run_windows(other, state_path=state)


def test_memory_independent_of_stream_length():
    def peak(n_total):
        cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, n_total, seed=2, chunk_size=1 << 14)
        tracemalloc.start()
        run_windows(cfg)
        p = tracemalloc.get_traced_memory()[1]
        tracemalloc.stop()
        return p

    small, large = peak(500_000), peak(4_000_000)
    assert large < 1.25 * small + 64_000


def test_config_validation():
    with pytest.raises(DomainError):
        StreamConfig(Normal(1.0), LogPow(1.0), 1.0, 10**5, seed=0)
    with pytest.raises(DomainError):
        StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 3, seed=0)
    with pytest.raises(DomainError):
        run_windows(StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 20, seed=0))


# -- truncation -------------------------------------------------------------------


def test_partition_identity_and_bounded_law():
    cfg = StreamConfig(Rademacher(), LogPow(1.0), 2.0, 2_000_000, seed=4, replicates=2, chunk_size=1 << 16)
    summary, results = truncation_experiment(cfg, BoundParams(delta=0.5))
    for r in results:
        st = r.truncation_stats
        assert np.all(st.partition_residual() <= st.rounding_bound())
        late = st.lower > 1.0
        assert late.any()
        assert np.all(st.t2[late] == 0.0) and np.all(st.t3[late] == 0.0)
        assert np.all(st.t1[late] == st.total[late])
        assert np.allclose(st.total, [c.R * math.sqrt(2 * c.a * c.d) for c in r.checkpoints], rtol=0, atol=1e-9)
    assert summary.nonzero_third == 0 and summary.max_partition_residual <= 1.0


def test_truncation_normal_centering():
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 1_000_000, seed=8, replicates=8, chunk_size=1 << 16)
    s, _ = truncation_experiment(cfg, BoundParams(delta=0.1))
    assert s.centering_ratio < 4 * s.centering_se
    assert 0.7 < s.var_ratio < 1.3


# -- reports ----------------------------------------------------------------------


def test_variance_check_zero_law():
    cfg = StreamConfig(Degenerate(), LogPow(1.0), 2.0, 1_000_000, seed=0)
    rep = empirical_variance_check(run_windows(cfg), sigma=0.0)
    assert rep.ratio == 0.0


@pytest.mark.parametrize("law", [Normal(1.0), UniformSym()], ids=str)
def test_variance_check_unit_variance(law):
    cfg = StreamConfig(law, LogPow(1.0), 2.0, 1_000_000, seed=12, replicates=16, chunk_size=1 << 16)
    results = run_replicates(cfg)
    rep = empirical_variance_check(results, sigma=1.0)
    assert 0.85 <= rep.ratio <= 1.15


def test_pooled_mean_zero_t_test():
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 1_000_000, seed=99, replicates=16, chunk_size=1 << 16)
    z = np.concatenate([r.R * np.sqrt(2 * r.d) for r in run_replicates(cfg)])
    assert stats.ttest_1samp(z, 0.0).pvalue > 1e-3


def test_limsup_summary_determinism():
    cfg = StreamConfig(Normal(1.0), LogPow(1.0), 2.0, 200_000, seed=5, replicates=8, chunk_size=1 << 15)
    a = limsup_summary(run_replicates(cfg), 1.0)
    b = limsup_summary(run_replicates(cfg), 1.0)
    assert a == b
    assert len(a.per_replicate) == 8 and 0 <= a.fraction_in_band <= 1
    with pytest.raises(DomainError):
        limsup_summary(run_replicates(cfg)[:4], 1.0)


def test_csv_output(tmp_path):
    cfg = StreamConfig(Normal(1.0), IterLog(2), 2.0, 100_000, seed=3)
    res = run_windows(cfg)
    path = tmp_path / "cp.csv"
    write_checkpoints_csv(res, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["k", "n_k", "a", "d", "R", "running_max"]
    assert len(rows) == len(res.checkpoints)
    assert [float(r["R"]) for r in rows] == res.R.tolist()  # 17 digits round-trip
    assert float(rows[-1]["running_max"]) == res.running_max
