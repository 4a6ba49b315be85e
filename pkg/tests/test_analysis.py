import json
import math
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from benchkeeper.analysis import (
    Finding,
    InsufficientDataError,
    JobTelemetry,
    MetricSeries,
    NodeTelemetry,
    detect_idle_tail,
    detect_initial_memory,
    detect_step,
    find_change_point,
    median,
    scaling_table,
    series_by_configuration,
    synthetic_idle_tail,
)
from conftest import T0, make_record
from oracles import exhaustive_split, sort_pick_median

floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


# --------------------------------------------------------------------------- median


@given(st.lists(floats, min_size=1, max_size=40), st.randoms())
def test_median_permutation_invariant(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert median(xs) == median(ys) == sort_pick_median(xs)


@given(st.lists(floats, min_size=1, max_size=40), st.floats(min_value=0, max_value=1e6))
def test_median_monotone(xs, bump):
    m = median(xs)
    assert median(xs + [m + bump]) >= m


def test_median_empty():
    with pytest.raises(ValueError):
        median([])


# --------------------------------------------------------------------------- scaling


def runs(times_by_p, energy=None):
    recs, i = [], 0
    for p, ts in times_by_p.items():
        for t in ts:
            metrics = {"elapsed": t}
            if energy:
                metrics["energy"] = energy * t
            recs.append(make_record(i, params={"nodes": str(p)}, metrics=metrics, elapsed=t))
            i += 1
    return recs


def test_scaling_two_points():
    rows = scaling_table(runs({1: [100.0], 2: [55.0]}), "elapsed", "nodes", p_ref=1)
    assert [r.p for r in rows] == [1, 2]
    assert rows[1].speedup == pytest.approx(100 / 55, rel=1e-15)
    assert rows[1].speedup == pytest.approx(1.8181818181818181)
    assert rows[1].efficiency == pytest.approx(0.9090909090909091)


def test_scaling_single_row_is_identity():
    (row,) = scaling_table(runs({4: [12.3, 11.1]}), "elapsed", "nodes", p_ref=4)
    assert row.speedup == 1.0 and row.efficiency == 1.0


def test_scaling_median_matches_oracle():
    (row,) = scaling_table(runs({1: [102.0, 98.0, 100.0]}), "elapsed", "nodes")
    assert row.median_elapsed_seconds == sort_pick_median([98.0, 100.0, 102.0]) == 100.0
    assert row.n_runs == 3


def test_scaling_energy_and_default_p_ref():
    rows = scaling_table(runs({4: [30.0], 2: [50.0, 52.0]}, energy=2.0), "elapsed", "nodes", energy_metric="energy")
    assert rows[0].p == 2 and rows[0].speedup == 1.0
    assert rows[0].median_energy_joules == pytest.approx(102.0)
    assert rows[1].efficiency == pytest.approx(51 / 30 * 2 / 4)


@given(st.dictionaries(st.integers(1, 64), st.lists(st.floats(0.1, 1e4), min_size=1, max_size=5), min_size=1, max_size=5),
       st.data())
def test_scaling_reference_row_exact(times, data):
    p_ref = data.draw(st.sampled_from(sorted(times)))
    rows = scaling_table(runs(times), "elapsed", "nodes", p_ref=p_ref)
    ref = next(r for r in rows if r.p == p_ref)
    assert ref.speedup == 1.0 and ref.efficiency == 1.0
    assert [r.p for r in rows] == sorted(times)


@pytest.mark.parametrize(
    "recs, kwargs",
    [
        (runs({1: [1.0]}), {"p_ref": 2}),
        (runs({1: [1.0]}), {"metric": "flops"}),
        ([make_record(0, state="failed", exit_status=1)], {}),
        ([make_record(0, params={"other": "1"})], {}),
        ([], {}),
    ],
)
def test_scaling_errors(recs, kwargs):
    args = {"metric": "elapsed", "node_param": "nodes", **kwargs}
    with pytest.raises(ValueError):
        scaling_table(recs, **args)


# --------------------------------------------------------------------------- detect_step


def series(before, after):
    vals = list(before) + list(after)
    times = [T0 + timedelta(days=i) for i in range(len(vals))]
    return MetricSeries(times, vals), times[len(before)]


def test_step_regression_example():
    s, ev = series([100, 101, 99], [110, 111, 112])
    f = detect_step(s, ev)
    assert f.kind == "regression"
    assert f.severity == pytest.approx(1.11, abs=1e-12)
    assert f.evidence["median_before"] == 100 and f.evidence["median_after"] == 111


def test_step_constant_is_none():
    s, ev = series([5.0] * 4, [5.0] * 4)
    f = detect_step(s, ev)
    assert f.kind == "none" and f.severity == 1.0


def test_step_improvement_mirror():
    s, ev = series([100, 101, 99], [90, 91, 89])
    assert detect_step(s, ev).kind == "improvement"


@pytest.mark.parametrize("nb, na, side", [(2, 3, "before"), (3, 2, "after")])
def test_step_insufficient(nb, na, side):
    s, ev = series([1.0] * nb, [1.0] * na)
    with pytest.raises(InsufficientDataError, match=side):
        detect_step(s, ev)


def test_event_time_sample_counts_as_after():
    s, ev = series([1.0, 1.0, 1.0], [2.0, 2.0, 2.0])
    assert detect_step(s, ev).evidence["n_after"] == 3


@given(st.floats(1e-3, 1e6), st.floats(0.01, 0.5), st.floats(1e-6, 1e-2))
def test_step_threshold_boundary(scale, d, eps):
    s, ev = series([scale] * 3, [scale * (1 + d + eps)] * 3)
    assert detect_step(s, ev, delta=d).kind == "regression"
    s, ev = series([scale] * 3, [scale * (1 + d - eps)] * 3)
    assert detect_step(s, ev, delta=d).kind == "none"


def test_series_rejects_unordered_times():
    with pytest.raises(ValueError):
        MetricSeries([T0, T0], [1.0, 2.0])
    with pytest.raises(ValueError):
        MetricSeries([T0], [math.nan])


def test_series_by_configuration_skips_failures():
    recs = [
        make_record(0, params={"nodes": "1"}, metrics={"elapsed": 3.0}),
        make_record(1, params={"nodes": "1"}, state="failed", exit_status=4),
        make_record(2, params={"nodes": "2"}, metrics={"elapsed": 2.0}),
        make_record(3, params={"nodes": "1"}, metrics={"elapsed": 4.0}, start=T0 - timedelta(days=1)),
    ]
    got = series_by_configuration(recs, "elapsed")
    assert list(got) == [(("nodes", "1"),), (("nodes", "2"),)]
    assert got[(("nodes", "1"),)].values == [4.0, 3.0]


# --------------------------------------------------------------------------- change point


def test_change_point_example():
    ys = [10, 10, 10, 20, 20, 20]
    k, scores = exhaustive_split(ys)
    assert k == 3 and scores[3] == 0
    assert find_change_point(ys) == 3
    assert find_change_point([7 * y for y in ys]) == exhaustive_split([7 * y for y in ys])[0] == 3


def test_change_point_constant():
    assert find_change_point([5, 5, 5, 5, 5]) is None


def test_change_point_too_short():
    with pytest.raises(InsufficientDataError):
        find_change_point([1, 2, 3])


def test_change_point_noise_only_below_margin():
    rng = np.random.default_rng(3)
    ys = list(100 + rng.normal(0, 1, 40))
    assert find_change_point(ys) == exhaustive_split(ys)[0]


@settings(max_examples=200)
@given(st.lists(st.integers(-50, 50), min_size=4, max_size=14))
def test_change_point_matches_exhaustive_oracle(ys):
    assert find_change_point(ys) == exhaustive_split([float(y) for y in ys])[0]


@given(st.lists(st.integers(-50, 50), min_size=4, max_size=14), st.integers(1, 9), st.integers(-100, 100))
def test_change_point_affine_invariant(ys, a, b):
    base = find_change_point(ys)
    # keep the unique-argmin case so that rounding cannot flip a tie
    _, scores = exhaustive_split([float(y) for y in ys])
    best = sorted(scores.values())
    assume(len(best) < 2 or best[1] - best[0] > 1e-6 * max(1.0, best[0]))
    total = sum((y - sum(ys) / len(ys)) ** 2 for y in ys)
    assume(total == 0 or abs((total - best[0]) / total - 0.2) > 1e-9)
    assert find_change_point([a * y + b for y in ys]) == base


# --------------------------------------------------------------------------- telemetry


def test_idle_tail_synthetic():
    t = synthetic_idle_tail()
    f = detect_idle_tail(t)
    assert f.kind == "idle-tail"
    assert abs(f.evidence["t_star_seconds"] - 75 * 60) <= t.sample_period_seconds
    assert f.evidence["busy_nodes"] == ["node00"]
    assert len(f.evidence["idle_nodes"]) == 7


def test_idle_tail_all_busy():
    t = synthetic_idle_tail(busy_nodes=range(8))
    assert detect_idle_tail(t).kind == "none"


def test_idle_tail_all_idle():
    t = synthetic_idle_tail(busy_nodes=(), idle_from_minute=0)
    assert detect_idle_tail(t).kind == "none"


def test_idle_tail_too_late_is_none():
    t = synthetic_idle_tail(idle_from_minute=115)
    assert detect_idle_tail(t).kind == "none"


@given(st.floats(0, 1e7), st.integers(10, 110))
def test_idle_tail_time_shift_invariant(shift, minute):
    t = synthetic_idle_tail(idle_from_minute=minute)
    base = detect_idle_tail(t)
    doc = t.to_json()
    doc["start_seconds"] = shift
    shifted = detect_idle_tail(JobTelemetry.from_json(doc))
    assert shifted.kind == base.kind
    assert shifted.evidence == base.evidence


def memory_job(starts, capacity=100.0, m=10):
    nodes = [NodeTelemetry(f"n{i}", np.zeros(m), np.full(m, s * capacity), capacity) for i, s in enumerate(starts)]
    return JobTelemetry(m * 60.0, 60.0, nodes)


def test_initial_memory_flags_half_full_node():
    f = detect_initial_memory(memory_job([0.01, 0.5, 0.0, 0.02]))
    assert f.kind == "high-initial-memory"
    assert f.evidence["flagged_nodes"] == ["n1"]
    assert f.severity == pytest.approx(0.5)


def test_initial_memory_all_zero():
    assert detect_initial_memory(memory_job([0, 0, 0])).kind == "none"


def test_initial_memory_zero_threshold():
    f = detect_initial_memory(memory_job([0.0, 1e-9, 0.3]), threshold_fraction=0)
    assert f.evidence["flagged_nodes"] == ["n1", "n2"]


def test_initial_memory_window_only():
    job = memory_job([0.0, 0.0])
    job.nodes[0].mem_bytes[5:] = 90.0  # late growth is not an initial-memory problem
    assert detect_initial_memory(job).kind == "none"


def test_telemetry_length_mismatch():
    with pytest.raises(ValueError, match="floor"):
        JobTelemetry(600.0, 60.0, [NodeTelemetry("a", np.zeros(9), np.zeros(9), 1.0)])


@pytest.mark.parametrize("util", [-0.1, 1.5])
def test_telemetry_util_range(util):
    with pytest.raises(ValueError):
        JobTelemetry(120.0, 60.0, [NodeTelemetry("a", np.full(2, util), np.zeros(2), 1.0)])


def test_telemetry_floor_length():
    t = JobTelemetry(150.0, 60.0, [NodeTelemetry("a", np.zeros(2), np.zeros(2), 1.0)])
    assert t.n_samples == 2


def test_telemetry_json_round_trip(tmp_path):
    t = synthetic_idle_tail(n_nodes=3, duration_minutes=10)
    path = tmp_path / "t.json"
    path.write_text(json.dumps(t.to_json()))
    back = JobTelemetry.load(path)
    assert back.to_json() == t.to_json()


def test_finding_kind_checked():
    with pytest.raises(ValueError):
        Finding("weird")
