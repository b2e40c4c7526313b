"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines. Criterion 2's baseline check excludes points within 28 m (four
reconstruction steps) of a blockage edge or a profile end, where the
smoothing window and the regularization smear the staircase; that margin
also frames the dip-locality windows.
"""

import time

import numpy as np
import pytest

from pipescope import (
    PointOnPipe,
    ReconConfig,
    SimConfig,
    action_times,
    area_profile,
    assemble_system,
    conservation_residual,
    junction_scatter,
    measure_irm,
    oracle_irm,
    sample_irm,
    simulate,
    solve_boundary_flows,
    step_inflow,
    volume_profile,
)
from pipescope.errors import SingularSystem
from pipescope.irm import SampledIRM

DX2 = 7.0
MARGIN = 4 * DX2  # smear allowance at blockage edges and profile ends
EXP2_BLOCKS = {
    "AE": [],
    "BE": [(350.0, 375.0, 0.6)],
    "CE": [(210.0, 250.0, 0.2)],
    "ED": [(410.0, 450.0, 0.4), (150.0, 250.0, 0.2)],
}
EXP2_BASE = {"AE": 1.0, "BE": 2.0, "CE": 1.0, "ED": 1.0}


def exp2_truth(pid, s):
    a = np.full_like(s, EXP2_BASE[pid])
    for lo, hi, depth in EXP2_BLOCKS[pid]:
        a -= depth * ((s > lo) & (s < hi))
    return a


def report(num, text):
    print(f"ACCEPTANCE {num}: PASS - {text}")


@pytest.fixture(scope="module")
def exp1_irm(exp1_net):
    return sample_irm(oracle_irm(exp1_net, horizon=1.61), dt=0.01)


@pytest.fixture(scope="module")
def exp2_irm(exp2_net):
    started = time.time()
    irm, _ = measure_irm(
        exp2_net,
        SimConfig(dx=5.0, duration=1.9, courant=0.95),
        resample_dt=0.007,
        smooth_window_s=0.02,
    )
    return irm, time.time() - started


@pytest.fixture(scope="module")
def exp2_profiles(exp2_net, exp2_irm):
    irm, irm_seconds = exp2_irm
    started = time.time()
    lam = {"AE": 1e-5, "BE": 1e-5, "CE": 1e-5, "ED": 1.0}
    profiles = {}
    for pid in ("AE", "BE", "CE", "ED"):
        cfg = ReconConfig(tau=0.9, dt=0.007, dx=DX2, lam=lam[pid])
        profiles[pid] = area_profile(volume_profile(exp2_net, irm, pid, cfg), cfg.dx)
    return profiles, irm_seconds + (time.time() - started)


def test_criterion_1_experiment1_quantitative(exp1_net, exp1_irm):
    started = time.time()
    worst = 0.0
    extents = {}
    for pid in ("AD", "BD", "DC"):
        cfg = ReconConfig(tau=0.8, dt=0.01, dx=10.0, lam=1e-5)
        ap = area_profile(volume_profile(exp1_net, exp1_irm, pid, cfg), cfg.dx)
        extents[pid] = ap.positions[-1] + cfg.dx
        worst = max(worst, float(np.abs(ap.areas - 1.0).max()))
    elapsed = time.time() - started
    assert extents == {"AD": 400.0, "BD": 300.0, "DC": 400.0}
    assert worst < 0.01
    assert elapsed < 60.0
    report(1, f"Experiment 1 areas flat at 1 m^2, max rel err {worst:.2e} in {elapsed:.1f}s")


def test_criterion_2_experiment2_properties(exp2_profiles):
    profiles, elapsed = exp2_profiles
    worst_base = 0.0
    for pid, ap in profiles.items():
        truth = exp2_truth(pid, ap.positions)
        keep = (ap.positions >= ap.positions[0] + MARGIN) & (
            ap.positions <= ap.positions[-1] - MARGIN
        )
        for lo, hi, _ in EXP2_BLOCKS[pid]:
            keep &= ~((ap.positions > lo - MARGIN) & (ap.positions < hi + MARGIN))
        rel = np.abs(ap.areas[keep] - truth[keep]) / truth[keep]
        worst_base = max(worst_base, float(rel.max()))
        assert rel.max() < 0.10, f"{pid} baseline off truth by {rel.max():.3f}"

        for lo, hi, depth in EXP2_BLOCKS[pid]:
            window = (ap.positions >= lo - MARGIN) & (ap.positions <= hi + MARGIN)
            deficit = np.clip(EXP2_BASE[pid] - ap.areas[window], 0.0, None)
            assert deficit.sum() > 0.0, f"{pid} block ({lo},{hi}): no dip found"
            centroid = float((ap.positions[window] * deficit).sum() / deficit.sum())
            assert abs(centroid - (lo + hi) / 2) <= 2 * DX2, (
                f"{pid} block ({lo},{hi}): dip centered at {centroid:.1f}"
            )
            peak = float(deficit.max())
            assert 0.5 * depth <= peak <= 1.5 * depth, (
                f"{pid} block ({lo},{hi}): depth {peak:.3f} vs truth {depth}"
            )
    assert elapsed < 300.0
    report(
        2,
        f"Experiment 2 baselines within {worst_base:.1%}, all 4 dips located and sized, "
        f"in {elapsed:.1f}s",
    )


def test_criterion_3_oracle_simulator_equivalence(exp1_net):
    cfg = SimConfig(dx=5.0, duration=1.7, courant=1.0)
    irm, _ = measure_irm(exp1_net, cfg)
    analytic = oracle_irm(exp1_net, horizon=1.7)
    dt = irm.dt
    checked = 0
    for (i, j), train in analytic.deltas.items():
        for t0, coeff in train:
            if t0 > 1.6:
                continue
            b = round(t0 / dt)
            seg = irm.k[i, j][b - 8 : b + 9]
            peak = b - 8 + int(np.argmax(np.abs(seg)))
            assert abs(peak - b) <= 1, f"({i},{j}) at {t0}s: peak bin {peak} vs {b}"
            integral = float(seg.sum() * dt)
            assert integral == pytest.approx(coeff, rel=0.05), f"({i},{j}) at {t0}s"
            checked += 1
    assert checked >= 12
    report(3, f"{checked} delta arrivals matched in bin (+-1) and amplitude (+-5%)")


def test_criterion_4_conservation_identity(exp2_net):
    residuals = {}
    for courant, bound in ((1.0, 1e-6), (0.95, 1e-2)):
        cfg = SimConfig(dx=5.0, duration=0.6, courant=courant)
        hist = simulate(exp2_net, step_inflow(exp2_net, cfg, "A"), cfg)
        residuals[courant] = conservation_residual(hist, exp2_net, 0.5)
        assert residuals[courant] < bound
    report(
        4,
        "conservation residual %.2e at courant 1, %.2e at 0.95" % (residuals[1.0], residuals[0.95]),
    )


def test_criterion_5_reciprocity(exp1_net, exp2_irm):
    analytic = oracle_irm(exp1_net, horizon=3.0)
    n = len(analytic.leaves)
    for i in range(n):
        for j in range(n):
            assert analytic.deltas[(i, j)] == analytic.deltas[(j, i)]

    irm, _ = exp2_irm
    peak = float(np.abs(irm.k).max())
    dev = max(
        float(np.abs(irm.k[i, j] - irm.k[j, i]).max())
        for i in range(len(irm.leaves))
        for j in range(len(irm.leaves))
    )
    assert dev <= 0.05 * peak
    report(5, f"analytic kernels symmetric exactly; processed within {dev / peak:.2%} of peak")


def test_criterion_6_junction_algebra():
    reflected, transmitted = junction_scatter(1.0, 0, [1.0, 1.0, 1.0])
    assert reflected == pytest.approx(-1.0 / 3.0, abs=1e-15)
    assert transmitted == pytest.approx([2.0 / 3.0, 2.0 / 3.0], abs=1e-15)

    rng = np.random.default_rng(20260810)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 9))
        ys = rng.uniform(1e-3, 10.0, size=n)
        m = int(rng.integers(0, n))
        h = float(rng.uniform(-5.0, 5.0))
        r, t = junction_scatter(h, m, list(ys))
        others = [y for k, y in enumerate(ys) if k != m]
        balance = ys[m] * (h - r) - sum(y * tv for y, tv in zip(others, t))
        worst = max(worst, abs(balance) / max(abs(ys[m] * h), 1e-12))
        assert abs(balance) <= 1e-12 * max(abs(ys[m] * h), 1.0)
    report(6, f"(-1/3, 2/3, 2/3) reproduced; 1000 random junctions balance to {worst:.1e}")


def test_criterion_7_masking_and_identity_limits(single_pipe_net, exp1_net, exp1_irm):
    n_samples = int(1.61 / 0.01 + 1e-6) + 1
    direct = (single_pipe_net.wave_speed / (single_pipe_net.gravity * 1.0),)
    irm0 = SampledIRM(0.01, ("L",), direct, np.zeros((1, 1, n_samples)), 1.61)
    cfg = ReconConfig(tau=0.8, dt=0.01, dx=10.0, lam=0.0)
    f = action_times(single_pipe_net, PointOnPipe("P", 300.0))
    sys = assemble_system(irm0, f, cfg, single_pipe_net)
    flows = solve_boundary_flows(sys, 0.0)
    flat = cfg.h0 * 1.0 * single_pipe_net.gravity / single_pipe_net.wave_speed
    err = np.abs(flows["L"][sys.active[0]] - flat).max()
    assert err < 1e-10
    assert np.all(flows["L"][~sys.active[0]] == 0.0)

    # every solve returns exact zeros on inactive samples
    for pid, offset in [("AD", 100.0), ("BD", 150.0), ("DC", 250.0)]:
        rcfg = ReconConfig(tau=0.8, dt=0.01, dx=10.0, lam=1e-5)
        fa = action_times(exp1_net, PointOnPipe(pid, offset))
        s = assemble_system(exp1_irm, fa, rcfg, exp1_net)
        fl = solve_boundary_flows(s, rcfg.lam)
        for i, leaf in enumerate(s.leaves):
            assert np.all(fl[leaf][~s.active[i]] == 0.0)
    report(7, f"closed-form flat flow reproduced to {err:.1e}; inactive samples exactly zero")


def test_criterion_8_no_regularization_artifact(exp2_net, exp2_irm, exp2_profiles):
    irm, _ = exp2_irm
    profiles, _ = exp2_profiles
    regular = profiles["ED"]
    dev_reg = float(np.abs(regular.areas - exp2_truth("ED", regular.positions)).max())

    cfg = ReconConfig(tau=0.9, dt=0.007, dx=DX2, lam=0.0)
    try:
        raw = area_profile(volume_profile(exp2_net, irm, "ED", cfg), cfg.dx)
    except SingularSystem:  # pragma: no cover - would itself prove instability
        pytest.fail("lambda = 0 solve unexpectedly singular rather than wildly unstable")
    dev_raw = float(np.abs(raw.areas - exp2_truth("ED", raw.positions)).max())
    assert dev_raw > 5.0 * dev_reg
    report(
        8,
        f"ED without regularization deviates {dev_raw:.2f} m^2 vs {dev_reg:.2f} m^2 "
        f"({dev_raw / dev_reg:.0f}x) from truth",
    )
