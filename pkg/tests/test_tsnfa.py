from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgetrigger import SimConfig
from edgetrigger.config import TsnfaParams
from edgetrigger.detectors import (
    DetectorNotReady,
    TsnfaMean,
    TsnfaMedian,
    gated_ema_update,
    median_of,
    sliding_mean_push,
    tsnfa_mean_step,
    tsnfa_median_step,
)
from edgetrigger.signal import NodeSignal, schedule_events

P = TsnfaParams()


def test_sliding_mean_examples():
    m, buf = sliding_mean_push(deque(), 5.0, 3)
    assert m == 5.0
    s = 9.0
    m, buf = sliding_mean_push(deque([s, 0.0]), 0.0, 3)
    assert m == pytest.approx(s / 3)
    assert sliding_mean_push(deque([2.0, 2.0]), 2.0, 3)[0] == 2.0
    m, buf = sliding_mean_push(deque([1.0, 2.0, 3.0]), 4.0, 3)
    assert list(buf) == [2.0, 3.0, 4.0] and m == 3.0
    with pytest.raises(ValueError):
        sliding_mean_push(deque(), 1.0, 0)


def test_gated_ema_examples():
    assert gated_ema_update(10.0, 20.0, 0.5, P) == 10.15625
    assert gated_ema_update(10.0, 1000.0, 0.95, P) == 10.0
    assert gated_ema_update(3.7, 3.7, 0.1, P) == pytest.approx(3.7, rel=1e-15)


def test_ema_step_response_after_64_frames():
    floor, f0, f1 = 1.0, 1.0, 2.0
    for _ in range(64):
        floor = gated_ema_update(floor, f1, 0.1, P)
    frac = (floor - f0) / (f1 - f0)
    assert frac == pytest.approx(1 - (63 / 64) ** 64, abs=1e-12)
    assert 100 * frac == pytest.approx(63.501, abs=0.001)
    assert frac >= 0.63


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 100), st.floats(0, 3)), min_size=1, max_size=40))
def test_gate_safety(seq):
    # frames with R >= r_gate are no-ops on the floor
    full = sub = 5.0
    for obs, R in seq:
        full = gated_ema_update(full, obs, R, P)
    for obs, R in seq:
        if R < P.r_gate:
            sub = gated_ema_update(sub, obs, R, P)
    assert full == sub


def test_median_examples():
    assert median_of([1.0, 1.0, 100.0]) == 1.0
    assert median_of([4.2]) == 4.2
    assert median_of([1.0, 2.0, 3.0, 10.0]) == 2.5
    buf = [1e6] * 31 + [1.0] * 33
    assert median_of(buf) == 1.0
    with pytest.raises(ValueError):
        median_of([])


@pytest.mark.parametrize("n", [3, 64])
@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_median_breakdown(n, data):
    base = data.draw(st.lists(st.floats(0, 10), min_size=n, max_size=n))
    k = (n - 1) // 2
    idx = data.draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))
    # corrupting k entries far above or far below: the median stays inside the clean order statistics
    bad = list(base)
    sign = data.draw(st.sampled_from([-1e9, 1e9]))
    for i in idx:
        bad[i] = sign
    clean = sorted(base[i] for i in range(n) if i not in idx)
    assert clean[0] <= median_of(bad) <= clean[-1]
    # and corrupting entries already equal to the median changes nothing
    const = [1.0] * n
    for i in idx:
        const[i] = sign
    assert median_of(const) == 1.0


def test_mean_versus_median_outlier_contrast():
    buf = deque([0.0, 0.0])
    assert sliding_mean_push(buf, 12.0, 3)[0] == 4.0
    assert median_of([0.0, 0.0, 12.0]) == 0.0


def _mean_state(floor, history=()):
    d = TsnfaMean(P)
    d.initialize(floor)
    d.buffer = deque(history)
    d.frames_seen = P.gamma_a
    return d


def test_mean_update_examples():
    d = _mean_state(10.0, [10.0, 10.0])
    fired, R = d.update(10.0)
    assert not fired and R == pytest.approx(1 / 6)
    assert d.floor == pytest.approx(10.0)

    d = _mean_state(10.0, [70.0, 70.0])
    fired, R = d.update(70.0)
    assert fired and R == pytest.approx(7 / 6)
    assert d.floor == 10.0

    d = _mean_state(10.0, [54.0, 54.0])
    fired, R = d.update(54.0)
    assert not fired and R == pytest.approx(0.9)
    assert d.floor == 10.0


def test_mean_suppresses_firing_during_warmup():
    d = TsnfaMean(P)
    d.initialize(1.0)
    fired, R = d.update(1000.0)
    assert R > 1 and not fired


def test_steppers_reject_uninitialized_state():
    with pytest.raises(DetectorNotReady):
        tsnfa_mean_step(TsnfaMean(P), np.zeros(128))
    with pytest.raises(DetectorNotReady):
        tsnfa_median_step(TsnfaMedian(P), np.zeros(128))


def test_median_bin_examples():
    d = TsnfaMedian(P)
    d.initialize(np.full(6, 2.0))
    for _ in range(P.gamma_a + P.gamma_d):
        fired, ratio = d.update(np.full(6, 2.0))
    assert not fired and ratio == pytest.approx(1 / 6)
    bins = np.full(6, 2.0)
    bins[2] = 14.0  # bin 3 at 7x its floor
    fired, _ = d.update(bins)
    assert fired
    assert d.floors == pytest.approx([2.0] * 6)


def test_median_single_spike_leaves_floors():
    d = TsnfaMedian(P)
    d.initialize(np.full(6, 1.0))
    for _ in range(80):
        d.update(np.full(6, 1.0))
    spike = np.full(6, 1.0)
    spike[1] = 100.0
    fired, ratio = d.update(spike)
    assert fired and ratio == pytest.approx(100 / 6)
    assert d.floors == [1.0] * 6
    fired, _ = d.update(np.full(6, 1.0))
    assert not fired and d.floors == [1.0] * 6


def _stepwise_median(frames):
    """Brute-force oracle: per-bin lists and sorted() medians, one frame at a time."""
    from edgetrigger.spectral import band_bins, fft_magnitude

    bins = band_bins(fft_magnitude(frames))
    s1 = [[] for _ in range(6)]
    s2 = [[] for _ in range(6)]
    fired = []
    for m, row in enumerate(bins):
        hit = False
        for k in range(6):
            s1[k] = (s1[k] + [row[k]])[-P.gamma_d :]
            s2[k] = (s2[k] + [float(np.median(s1[k]))])[-P.gamma_a :]
            floor = float(np.median(s2[k]))
            hit |= row[k] > P.zeta_k[k] * floor
        fired.append(hit and m >= P.gamma_a)
    fired[0] = False
    return np.array(fired)


def test_vectorized_median_matches_oracle():
    cfg = SimConfig(node_count=2, duration_s=3 * 3600, seed=2).replace(**{"events.rate_per_node_hour": 4.0})
    sched = schedule_events(cfg)
    frames = NodeSignal(cfg, 1, sched.for_node(1)).frames(0, 3000)
    fast, _ = TsnfaMedian(P).run(frames)
    chunked = TsnfaMedian(P)
    parts = [chunked.run(frames[a : a + 700])[0] for a in range(0, 3000, 700)]
    assert np.array_equal(fast, _stepwise_median(frames))
    assert np.array_equal(fast, np.concatenate(parts))
    assert fast.any()


def test_step_matches_batch_run():
    cfg = SimConfig(node_count=1, duration_s=3600, seed=9)
    frames = NodeSignal(cfg, 0).frames(0, 200)
    for cls, stepper in ((TsnfaMean, tsnfa_mean_step), (TsnfaMedian, tsnfa_median_step)):
        batch_fired, batch_detail = cls(P).run(frames)
        state = cls(P)
        state.run(frames[:1])
        for m in range(1, 200):
            dec, state = stepper(state, frames[m])
            assert dec.fired == batch_fired[m]
            assert dec.detail == pytest.approx(batch_detail[m], rel=1e-12)


@pytest.mark.parametrize("cls", [TsnfaMean, TsnfaMedian])
@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_scale_equivariance(cls, c):
    cfg = SimConfig(node_count=1, duration_s=3600, seed=5).replace(**{"events.rate_per_node_hour": 6.0})
    frames = NodeSignal(cfg, 0, schedule_events(cfg).for_node(0)).frames(0, 2000)
    f1, d1 = cls(P).run(frames)
    f2, d2 = cls(P).run(c * frames)
    assert np.array_equal(f1, f2)
    assert np.allclose(d1, d2, rtol=1e-9, equal_nan=True)


def test_quiescent_ratio_near_anchor():
    cfg = SimConfig(node_count=1, duration_s=2 * 3600).replace(
        **{"noise.drift_on": False, "events.rate_per_node_hour": 0.0})
    _, R = TsnfaMean(P).run(NodeSignal(cfg, 0).frames(0, cfg.n_frames))
    R = R[cfg.warmup_frames :]
    assert 0.08 <= R.mean() <= 0.35
    assert np.mean(R < 0.8) >= 0.99
