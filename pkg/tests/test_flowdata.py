import json
import math

import numpy as np
import pytest
from helpers import make_flow
from hypothesis import given, settings
from hypothesis import strategies as st

from tcaug.flowdata import (
    DIR,
    IAT,
    MIN_IAT,
    SIZE,
    T,
    ClassStats,
    DataError,
    FlowTensor,
    class_counts,
    compute_class_stats,
    curate,
    flow_from_arrays,
    imbalance_ratio,
    ingest_jsonl,
    make_fold,
    make_folds,
    nearest_rank_percentile,
    normalize,
    normalize_values,
    synth_generate,
    write_jsonl,
)


def _write(tmp_path, records):
    p = tmp_path / "flows.jsonl"
    p.write_text("".join(json.dumps(r) + "\n" for r in records))
    return p


def _rec(n, fid="f", label="a", size=100.0):
    return {"flow_id": fid, "label": label, "pkt_size": [size] * n, "dir": [1, -1] * (n // 2) + [1] * (n % 2),
            "iat": [0.01] * n}  # fmt: skip


# --- ingestion ---------------------------------------------------------------


def test_ingest_truncates_long_flows(tmp_path):
    (f,) = ingest_jsonl(_write(tmp_path, [_rec(25)]))
    assert f.valid_len == 20
    assert f.values.shape == (3, T)


def test_ingest_pads_short_flows(tmp_path):
    (f,) = ingest_jsonl(_write(tmp_path, [_rec(12)]))
    assert f.valid_len == 12
    assert np.all(f.values[:, 12:] == 0)


def test_ingest_clips_size(tmp_path):
    (f,) = ingest_jsonl(_write(tmp_path, [_rec(12, size=3000.0)]))
    assert f.values[SIZE, 0] == 1460.0


def test_ingest_coerces_dir_and_first_iat():
    f = flow_from_arrays("x", "a", [10, 20, 30], [-5, 0, 7], [0.5, 0.1, -0.2])
    assert f.values[DIR, :3].tolist() == [-1, 1, 1]
    assert f.values[IAT, :3].tolist() == [0.0, 0.1, 0.0]


def test_ingest_reports_line_number(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps(_rec(12)) + "\n{not json\n")
    with pytest.raises(DataError, match=":2:"):
        ingest_jsonl(p)


def test_ingest_rejects_length_mismatch(tmp_path):
    rec = _rec(12)
    rec["iat"] = rec["iat"][:5]
    with pytest.raises(DataError, match=":1:"):
        ingest_jsonl(_write(tmp_path, [rec]))


def test_ingest_rejects_missing_field(tmp_path):
    rec = _rec(12)
    del rec["dir"]
    with pytest.raises(DataError, match="missing"):
        ingest_jsonl(_write(tmp_path, [rec]))


def test_roundtrip_serialize_ingest(tmp_path):
    flows = synth_generate(2, [5, 5], seed=1)
    p = tmp_path / "rt.jsonl"
    write_jsonl(flows, p)
    back = ingest_jsonl(p)
    assert back == flows


def test_flowtensor_validates_shape():
    with pytest.raises(DataError):
        FlowTensor("x", "a", np.zeros((3, 10)), 5)
    with pytest.raises(DataError):
        FlowTensor("x", "a", np.zeros((3, T)), 0)


# --- curation ----------------------------------------------------------------


def test_curate_keeps_strictly_longer():
    flows = [make_flow(n=n, seed=n) for n in (5, 10, 11)]
    assert [f.valid_len for f in curate(flows)] == [11]


def test_curate_min_zero_is_identity():
    flows = [make_flow(n=n, seed=n) for n in (1, 4, 20)]
    assert curate(flows, 0) == flows


def test_curate_counts_against_direct_filter():
    rng = np.random.default_rng(5)
    lens = np.r_[rng.integers(1, 11, 300), rng.integers(11, 21, 700)]
    rng.shuffle(lens)
    flows = [make_flow(n=int(n), seed=i) for i, n in enumerate(lens)]
    assert len(curate(flows)) == 700


def test_curate_empty_raises():
    with pytest.raises(DataError, match="no flows survive curation"):
        curate([make_flow(n=3)])


# --- folds -------------------------------------------------------------------


def test_fold_sizes_single_class():
    flows = [make_flow(seed=i) for i in range(100)]
    s = make_fold(flows, 0, 0)
    assert (len(s.train), len(s.val), len(s.test)) == (70, 15, 15)


def test_fold_deterministic_and_disjoint():
    flows = [make_flow(label="ab"[i % 2], seed=i) for i in range(60)]
    a, b = make_fold(flows, 4, 2), make_fold(flows, 4, 2)
    assert a == b
    ids = [{f.flow_id for f in part} for part in (a.train, a.val, a.test)]
    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    assert sum(map(len, ids)) == 60


def test_fold_stratified_arithmetic():
    flows = [make_flow(label="a", seed=i) for i in range(60)] + [make_flow(label="b", seed=100 + i) for i in range(40)]
    s = make_fold(flows, 0, 0)
    assert class_counts(s.train) == {"a": 42, "b": 28}


def test_folds_differ_between_indices():
    flows = [make_flow(seed=i) for i in range(50)]
    folds = make_folds(flows, 3, seed=1)
    assert folds[0].train != folds[1].train


def test_fold_rejects_tiny_class():
    flows = [make_flow(label="a", seed=i) for i in range(20)] + [make_flow(label="b", seed=99)]
    with pytest.raises(DataError, match="at least 3"):
        make_fold(flows, 0, 0)


# --- statistics --------------------------------------------------------------


def test_identical_flows_zero_std():
    f = make_flow(seed=1)
    stats = compute_class_stats([f, f.replace(flow_id="copy")])
    assert np.all(stats.per_coord_std["a"] == 0)
    # the global std spans t, so it vanishes only for flows constant in time
    c = flow_from_arrays("c", "a", [500.0] * T, [1] * T, [0.0] * T)
    stats = compute_class_stats([c, c.replace(flow_id="c2")])
    assert np.all(stats.global_std["a"] == 0)


def test_population_std_two_flows():
    a = flow_from_arrays("1", "y", [100.0] * 12, [1] * 12, [0.01] * 12)
    b = flow_from_arrays("2", "y", [300.0] + [100.0] * 11, [1] * 12, [0.01] * 12)
    stats = compute_class_stats([a, b])
    assert stats.per_coord_std["y"][SIZE, 0] == pytest.approx(100.0)


def test_global_std_flattens_over_t():
    flows = [make_flow(seed=i) for i in range(4)]
    stats = compute_class_stats(flows)
    arr = np.stack([f.values for f in flows])
    assert stats.global_std["a"][IAT] == pytest.approx(arr[:, IAT, :].std())


def test_nearest_rank_percentile_oracle():
    # nearest rank: the ceil(0.99 * 100) = 99th smallest of 1..100
    assert nearest_rank_percentile(np.arange(1, 101), 99) == 99.0
    assert nearest_rank_percentile(np.arange(1, 301), 99) == 297.0
    assert nearest_rank_percentile([5.0], 99) == 5.0


def test_q99_pools_valid_iats():
    vals = np.arange(1, 101) / 100.0
    flows = []
    for i in range(5):
        chunk = vals[i * 20 : (i + 1) * 20]
        f = flow_from_arrays(f"f{i}", "ab"[i % 2], [100.0] * 20, [1] * 20, chunk)
        v = f.values.copy()
        v[IAT] = chunk  # keep the first-packet value for this synthetic oracle
        flows.append(f.replace(values=v))
    assert compute_class_stats(flows).q_iat_99 == pytest.approx(0.99)


def test_stats_single_flow_class_raises():
    with pytest.raises(DataError, match="single flow"):
        compute_class_stats([make_flow(seed=1), make_flow(seed=2), make_flow(label="b", seed=3)])


def test_stats_permutation_invariant(synth_small):
    a = compute_class_stats(synth_small)
    b = compute_class_stats(list(reversed(synth_small)))
    for label in a.classes:
        np.testing.assert_allclose(a.per_coord_std[label], b.per_coord_std[label], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(a.global_mean[label], b.global_mean[label], rtol=1e-12)
    assert a.q_iat_99 == b.q_iat_99


def test_stats_roundtrip(tmp_path, stats_small):
    p = tmp_path / "stats.json"
    stats_small.save(p)
    back = ClassStats.load(p)
    assert back.q_iat_99 == stats_small.q_iat_99
    for k in stats_small.classes:
        assert np.array_equal(back.per_coord_std[k], stats_small.per_coord_std[k])


# --- normalization -----------------------------------------------------------


def _stats(q):
    return ClassStats(q_iat_99=q)


def test_normalize_endpoints():
    q = 0.5
    v = np.zeros((3, T))
    v[SIZE, :2] = [1460.0, 0.0]
    v[DIR, :3] = [-1, 1, 0]
    v[IAT, :4] = [q, MIN_IAT, 0.0, math.sqrt(MIN_IAT * q)]
    n = normalize_values(v, q)
    assert n[SIZE, 0] == 1.0 and n[SIZE, 1] == 0.0
    assert n[DIR, :3].tolist() == [0.0, 1.0, 0.5]
    assert n[IAT, 0] == pytest.approx(1.0) and n[IAT, 1] == 0.0 and n[IAT, 2] == 0.0
    assert n[IAT, 3] == pytest.approx(0.5, abs=1e-12)


def test_normalize_rejects_tiny_q():
    with pytest.raises(DataError):
        normalize_values(np.zeros((3, T)), 1e-7)


def test_normalize_wraps_flow():
    f = make_flow(seed=3)
    assert np.array_equal(normalize(f, _stats(0.2)), normalize_values(f.values, 0.2))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-100, 5000, allow_nan=False), min_size=T, max_size=T),
    st.lists(st.floats(0, 100, allow_nan=False), min_size=T, max_size=T),
    st.floats(1e-6, 10),
)
def test_normalize_in_unit_box_and_monotone(sizes, iats, q):
    v = np.zeros((3, T))
    v[SIZE], v[IAT] = sizes, iats
    v[DIR] = 1.0
    n = normalize_values(v, q)
    assert np.all((n >= 0) & (n <= 1))
    for d in (SIZE, IAT):
        order = np.argsort(v[d], kind="stable")
        assert np.all(np.diff(n[d][order]) >= 0)


# --- synthetic data ----------------------------------------------------------


def test_synth_deterministic():
    a = synth_generate(5, [400] * 5, seed=7)
    b = synth_generate(5, [400] * 5, seed=7)
    assert a == b
    assert synth_generate(5, [40] * 5, seed=8) != synth_generate(5, [40] * 5, seed=7)


def test_synth_imbalance_ratio():
    assert imbalance_ratio(synth_generate(2, [1000, 100], seed=0)) == 10.0


def test_synth_zero_jitter_identical_within_class():
    flows = synth_generate(3, [4, 4, 4], seed=2, jitter=0.0)
    for label in {f.label for f in flows}:
        vals = [f.values for f in flows if f.label == label]
        assert all(np.array_equal(vals[0], v) for v in vals[1:])
        assert all(f.valid_len == T for f in flows)


def test_synth_respects_invariants():
    for f in synth_generate(4, [50] * 4, seed=1):
        n = f.valid_len
        assert 11 <= n <= T
        assert np.all((f.values[SIZE] >= 0) & (f.values[SIZE] <= 1460))
        assert set(np.unique(f.values[DIR, :n])) <= {-1.0, 1.0}
        assert np.all(f.values[:, n:] == 0)
        assert np.all(f.values[IAT] >= 0)


def test_synth_argument_errors():
    with pytest.raises(DataError):
        synth_generate(3, [10, 10], seed=0)
    with pytest.raises(DataError):
        synth_generate(1, [10], seed=0)
