"""Impulse-response matrix: oracle, binning, processing pipeline, persistence."""

import numpy as np
import pytest

from pipescope import (
    AnalyticIRM,
    SimConfig,
    StepResponseBundle,
    differentiate,
    irm_row_from_step_response,
    load_irm,
    measure_irm,
    median_smooth,
    oracle_irm,
    remove_initial_pulse,
    resample,
    sample_irm,
    save_irm,
)
from pipescope.errors import HorizonTooLarge, NonuniformPipeArea, OutOfRange, WindowTooLarge
from pipescope.irm import grid_size

C = 1000.0 / 9.81  # a/(gA) for unit area


# -- analytic oracle ----------------------------------------------------------


def _assert_train(train, expected):
    assert [t for t, _ in train] == pytest.approx([t for t, _ in expected])
    assert [w / C for _, w in train] == pytest.approx([w for _, w in expected])


def test_oracle_exp1_delta_trains(exp1_net):
    an = oracle_irm(exp1_net, horizon=1.61)
    _assert_train(an.deltas[(0, 0)], [(0.8, -2 / 3), (1.4, 8 / 9), (1.6, 2 / 9)])
    _assert_train(an.deltas[(1, 1)], [(0.6, -2 / 3), (1.2, 2 / 9), (1.4, 8 / 9)])
    _assert_train(an.deltas[(0, 1)], [(0.7, 4 / 3), (1.3, -4 / 9), (1.5, -4 / 9)])
    assert an.direct == pytest.approx((C, C))


def test_oracle_reciprocity_exact(exp1_net):
    an = oracle_irm(exp1_net, horizon=3.0)
    assert an.deltas[(0, 1)] == an.deltas[(1, 0)]


def test_oracle_single_pipe_round_trips(single_pipe_net):
    # closed far end: measured echoes of the doubled wall reflection at 2kL/a
    an = oracle_irm(single_pipe_net, horizon=2.1)
    assert [(t, w / C) for t, w in an.deltas[(0, 0)]] == pytest.approx(
        [(1.0, 2.0), (2.0, 2.0)]
    )


def test_oracle_pruning_drops_weak_fronts(exp1_net):
    an = oracle_irm(exp1_net, horizon=1.61, prune_eps=0.5)
    # the -1/3 reflection back onto AD is pruned, the 2/3 transmissions survive
    times_aa = [t for t, _ in an.deltas[(0, 0)]]
    assert 0.8 not in times_aa
    assert [t for t, _ in an.deltas[(0, 1)]] == [0.7]


def test_oracle_event_guard(exp1_net):
    with pytest.raises(HorizonTooLarge):
        oracle_irm(exp1_net, horizon=50.0, prune_eps=1e-12, max_events=200)


def test_oracle_rejects_nonuniform(exp2_net):
    with pytest.raises(NonuniformPipeArea):
        oracle_irm(exp2_net, horizon=1.0)


def test_oracle_exp2_uniform_baseline():
    # all-unit-area version of the star network: 4-pipe junction T = 1/2
    from pipescope import validate_network
    from pipescope.presets import EXP2_NETWORK
    import copy

    spec = copy.deepcopy(EXP2_NETWORK)
    for p in spec["pipes"]:
        p["area"] = {"base": 1.0, "blocks": []}
    net = validate_network(spec)
    an = oracle_irm(net, horizon=0.7)
    t0, w0 = an.deltas[(0, 0)][0]
    assert t0 == pytest.approx(0.6)
    assert w0 / C == pytest.approx(2 * (-1.0 / 2.0))


# -- binning ------------------------------------------------------------------


def test_sample_irm_exp1_bins(exp1_net):
    irm = sample_irm(oracle_irm(exp1_net, horizon=1.61), dt=0.01)
    assert irm.n_samples == 162
    assert list(np.nonzero(irm.k[0, 0])[0]) == [80, 140, 160]
    assert irm.k[0, 0, 80] == pytest.approx(-(2 / 3) * C / 0.01, rel=1e-12)
    assert list(np.nonzero(irm.k[0, 1])[0]) == [70, 130, 150]


def test_sample_irm_empty():
    an = AnalyticIRM(("A",), (C,), {(0, 0): ()}, horizon=1.0)
    irm = sample_irm(an, dt=0.1)
    assert irm.k.shape == (1, 1, 11)
    assert np.all(irm.k == 0.0)


def test_sample_irm_same_bin_sums():
    an = AnalyticIRM(("A",), (C,), {(0, 0): ((0.501, 2.0), (0.503, 3.0))}, horizon=1.0)
    irm = sample_irm(an, dt=0.01)
    assert irm.k[0, 0, 50] == pytest.approx(500.0)


def test_sample_irm_half_open_bin_edge():
    # t0 exactly between grid points: the lower bin wins the half-open test
    an = AnalyticIRM(("A",), (C,), {(0, 0): ((0.055, 1.0),)}, horizon=0.1)
    irm = sample_irm(an, dt=0.01)
    assert irm.k[0, 0, 5] == pytest.approx(100.0)
    assert irm.k[0, 0, 6] == 0.0


# -- processing steps ---------------------------------------------------------


def test_remove_initial_pulse():
    t = np.arange(0.0, 1.0, 0.1)
    step = C * np.ones_like(t)
    assert remove_initial_pulse(step, t, 1000.0, 9.81, 1.0) == pytest.approx(np.zeros_like(t))
    zero = np.zeros_like(t)
    assert remove_initial_pulse(zero, t, 1000.0, 9.81, 1.0) == pytest.approx(-C * np.ones_like(t))


def test_median_smooth_identity_and_constant():
    s = np.array([1.0, 5.0, -2.0, 4.0])
    assert median_smooth(s, 1) == pytest.approx(s)
    const = np.full(10, 3.3)
    assert median_smooth(const, 4) == pytest.approx(const)


def test_median_smooth_removes_spike():
    s = np.zeros(9)
    s[4] = 7.0
    assert median_smooth(s, 3) == pytest.approx(np.zeros(9))


def test_median_smooth_window_guard():
    with pytest.raises(WindowTooLarge):
        median_smooth(np.zeros(4), 5)
    with pytest.raises(WindowTooLarge):
        median_smooth(np.zeros(4), 0)


def test_differentiate():
    t = np.linspace(0.0, 1.0, 101)
    assert differentiate(3.0 * t + 1.0, t) == pytest.approx(np.full(101, 3.0))
    assert differentiate(np.full(101, 2.0), t) == pytest.approx(np.zeros(101))
    omega = 4.0
    d = differentiate(np.sin(omega * t), t)
    interior = slice(1, -1)
    assert np.abs(d[interior] - omega * np.cos(omega * t)[interior]).max() < omega * (t[1] - t[0]) ** 2 * omega**2


def test_resample():
    t_old = np.linspace(0.0, 1.0, 11)
    series = 2.0 * t_old
    assert resample(series, t_old, t_old) == pytest.approx(series)
    mid = np.array([0.35])
    assert resample(series, t_old, mid) == pytest.approx([0.7])
    with pytest.raises(OutOfRange):
        resample(series, t_old, np.array([1.2]))


def test_resample_exp2_regrid_length():
    # 0..1.9 s at dt = 0.007 keeps 272 samples
    assert grid_size(1.9, 0.007) == 272


def test_row_pipeline_source_only_subtraction(exp1_net):
    t = np.arange(0.0, 0.5, 0.01)
    flat = np.full_like(t, C)
    bundle = StepResponseBundle("A", t, {"A": flat.copy(), "B": flat.copy()})
    row = irm_row_from_step_response(bundle, exp1_net, smooth_window_s=0.0)
    # source trace loses the direct step and differentiates to zero
    assert row["A"] == pytest.approx(np.zeros_like(t))
    # receiver trace keeps its constant, so it also differentiates to zero,
    # but only because no subtraction happened first
    assert row["B"] == pytest.approx(np.zeros_like(t))
    bundle2 = StepResponseBundle("A", t, {"B": C * t})
    row2 = irm_row_from_step_response(bundle2, exp1_net, smooth_window_s=0.0)
    assert row2["B"] == pytest.approx(np.full_like(t, C))


def test_row_pipeline_zero_input(exp1_net):
    t = np.arange(0.0, 0.5, 0.01)
    bundle = StepResponseBundle("A", t, {"B": np.zeros_like(t)})
    row = irm_row_from_step_response(bundle, exp1_net)
    assert row["B"] == pytest.approx(np.zeros_like(t))


def test_measured_kernels_vanish_near_zero(exp1_net):
    cfg = SimConfig(dx=5.0, duration=1.0, courant=1.0)
    irm, _ = measure_irm(exp1_net, cfg)
    t = np.arange(irm.n_samples) * irm.dt
    # self kernel silent until the first junction echo at 0.8 s
    quiet = t < 0.8 - 0.05
    assert np.abs(irm.k[0, 0][quiet]).max() < 1e-9
    # cross kernel silent until the A-to-B arrival at 0.7 s
    quiet = t < 0.7 - 0.05
    assert np.abs(irm.k[0, 1][quiet]).max() < 1e-9


def test_measured_irm_matches_oracle_bins(exp1_net):
    cfg = SimConfig(dx=5.0, duration=1.0, courant=1.0)
    irm, _ = measure_irm(exp1_net, cfg)
    an = oracle_irm(exp1_net, horizon=1.0)
    dt = irm.dt
    for (i, j), train in an.deltas.items():
        for t0, coeff in train:
            b = round(t0 / dt)
            seg = irm.k[i, j][b - 8 : b + 9]
            peak = b - 8 + int(np.argmax(np.abs(seg)))
            assert abs(peak - b) <= 1
            assert seg.sum() * dt == pytest.approx(coeff, rel=0.05)


# -- persistence --------------------------------------------------------------


def test_irm_round_trip_bit_exact(exp1_net, tmp_path):
    irm = sample_irm(oracle_irm(exp1_net, horizon=1.61), dt=0.01)
    p1 = tmp_path / "irm_a.csv"
    p2 = tmp_path / "irm_b.csv"
    save_irm(irm, p1)
    loaded = load_irm(p1)
    assert loaded.leaves == irm.leaves
    assert loaded.dt == irm.dt
    assert loaded.direct == irm.direct
    assert np.array_equal(loaded.k, irm.k)
    save_irm(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
