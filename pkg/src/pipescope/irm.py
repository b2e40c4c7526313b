"""Impulse-response matrix construction and processing.

Two routes produce the same object. The analytic route tracks delta
wavefronts through a network of uniform pipes with exact rational
arithmetic: a unit-volume impulse launches a head pulse of amplitude
a/(gA) down the source pipe, junctions split it via the scattering
coefficients, closed leaves reflect it with no sign change, and each
arrival at an accessible leaf records twice the traveling amplitude.
The measured route runs the transient solver with a unit-step inflow
per source leaf and post-processes the head traces: subtract the direct
a/(gA) step at the source, median-smooth, differentiate, resample.

The direct impulse coefficients a/(A(x_i) g) are stored separately from
the sampled reflection kernels so the inversion never differentiates a
delta numerically.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    HorizonTooLarge,
    NonuniformPipeArea,
    OutOfRange,
    WindowTooLarge,
)
from .graph import Network
from .simulate import Histories, SimConfig, junction_scatter, simulate, step_inflow

__all__ = [
    "AnalyticIRM",
    "SampledIRM",
    "StepResponseBundle",
    "oracle_irm",
    "sample_irm",
    "measure_irm",
    "irm_row_from_step_response",
    "remove_initial_pulse",
    "median_smooth",
    "differentiate",
    "resample",
    "save_irm",
    "load_irm",
    "grid_size",
]


def grid_size(span: float, dt: float) -> int:
    """Samples on the grid 0, dt, ..., covering ``span`` inclusively.

    The additive fudge keeps spans that are an exact multiple of dt from
    losing their last sample to float division.
    """
    return int(span / dt + 1e-6) + 1


@dataclass(frozen=True)
class AnalyticIRM:
    """Delta trains per (source, receiver) pair over the accessible leaves.

    ``deltas[i, j]`` is a tuple of (arrival time s, weight) with weights in
    head-per-volume units; the t = 0 direct impulse is excluded and kept in
    ``direct`` as the coefficients a/(A(x_i) g).
    """

    leaves: tuple[str, ...]
    direct: tuple[float, ...]
    deltas: dict[tuple[int, int], tuple[tuple[float, float], ...]]
    horizon: float


@dataclass(frozen=True)
class SampledIRM:
    """Uniformly sampled reflection kernels k[i, j] plus direct coefficients."""

    dt: float
    leaves: tuple[str, ...]
    direct: tuple[float, ...]
    k: np.ndarray  # shape (N, N, n_samples)
    horizon: float

    @property
    def n_samples(self) -> int:
        return self.k.shape[2]


@dataclass(frozen=True)
class StepResponseBundle:
    """Head traces at all accessible leaves for a unit-step source at one leaf."""

    source: str
    t: np.ndarray
    traces: dict[str, np.ndarray]


def oracle_irm(
    net: Network,
    horizon: float,
    prune_eps: float = 1e-4,
    max_events: int = 1_000_000,
) -> AnalyticIRM:
    """Exact impulse-response deltas on a network of uniform pipes.

    Event-driven wavefront tracking: fronts are (arrival time, vertex,
    via pipe, amplitude) processed in time order, with amplitudes kept
    as exact rationals so equal-time arrivals merge exactly and the
    reciprocity k_ij = k_ji holds bit-for-bit. Fronts whose amplitude
    falls below ``prune_eps`` times the initial amplitude are dropped;
    the geometric decay of the junction coefficients then bounds the
    event count, with ``max_events`` as a hard guard.
    """
    for pipe in net.pipes.values():
        if not pipe.area.is_constant:
            raise NonuniformPipeArea(f"pipe {pipe.id!r} has a nonconstant area profile")

    a = Fraction(net.wave_speed)
    g = Fraction(net.gravity)
    admittance = {pid: g * Fraction(float(p.area(0.0))) / a for pid, p in net.pipes.items()}
    travel = {pid: Fraction(p.length) / a for pid, p in net.pipes.items()}
    horizon_fr = Fraction(horizon)

    n = len(net.accessible)
    leaf_index = {leaf: i for i, leaf in enumerate(net.accessible)}
    arrivals: dict[tuple[int, int], dict[Fraction, Fraction]] = {
        (i, j): {} for i in range(n) for j in range(n)
    }

    for i, source in enumerate(net.accessible):
        pipe = net.leaf_pipe(source)
        amp0 = a / (g * Fraction(float(net.leaf_area(source))))
        threshold = Fraction(prune_eps) * amp0
        other = pipe.to_vertex if pipe.from_vertex == source else pipe.from_vertex

        heap: list[tuple[Fraction, int, str, str, Fraction]] = []
        seq = 0
        first_arrival = travel[pipe.id]
        if first_arrival <= horizon_fr:
            heap.append((first_arrival, seq, other, pipe.id, amp0))
        events = 0
        while heap:
            t, _, vertex, via, amp = heapq.heappop(heap)
            events += 1
            if events > max_events:
                raise HorizonTooLarge(
                    f"more than {max_events} wavefront events before {horizon}s"
                )

            def push(next_vertex, next_pipe, amplitude):
                nonlocal seq
                if abs(amplitude) <= threshold:
                    return
                t_arr = t + travel[next_pipe]
                if t_arr > horizon_fr:
                    return
                seq += 1
                heapq.heappush(heap, (t_arr, seq, next_vertex, next_pipe, amplitude))

            if net.degree(vertex) == 1:
                if vertex != net.x0:
                    j = leaf_index[vertex]
                    bucket = arrivals[(i, j)]
                    bucket[t] = bucket.get(t, Fraction(0)) + 2 * amp
                # closed end: same-sign reflection back along the same pipe
                pipe_obj = net.pipes[via]
                back = pipe_obj.to_vertex if pipe_obj.from_vertex == vertex else pipe_obj.from_vertex
                push(back, via, amp)
            else:
                attached = net.adjacent_pipes(vertex)
                ids = [p.id for p in attached]
                ys = [admittance[pid] for pid in ids]
                incident = ids.index(via)
                reflected, transmitted = junction_scatter(amp, incident, ys)
                others = [pid for k, pid in enumerate(ids) if k != incident]
                for pid, t_amp in zip(others, transmitted):
                    p = net.pipes[pid]
                    w = p.to_vertex if p.from_vertex == vertex else p.from_vertex
                    push(w, pid, t_amp)
                p = net.pipes[via]
                w = p.to_vertex if p.from_vertex == vertex else p.from_vertex
                push(w, via, reflected)

    deltas = {}
    for key, bucket in arrivals.items():
        deltas[key] = tuple(
            (float(t), float(c)) for t, c in sorted(bucket.items()) if c != 0
        )
    direct = tuple(net.wave_speed / (net.leaf_area(leaf) * net.gravity) for leaf in net.accessible)
    return AnalyticIRM(net.accessible, direct, deltas, horizon)


def sample_irm(an: AnalyticIRM, dt: float) -> SampledIRM:
    """Bin delta trains onto a uniform grid.

    A delta at t0 becomes one sample of height coefficient/dt at the grid
    point inside [t0 - dt/2, t0 + dt/2); deltas sharing a bin add up.
    """
    if dt <= 0:
        raise OutOfRange("dt must be positive")
    n = len(an.leaves)
    n_samples = grid_size(an.horizon, dt)
    k = np.zeros((n, n, n_samples))
    for (i, j), train in an.deltas.items():
        for t0, coeff in train:
            idx = math.ceil(t0 / dt - 0.5)
            if 0 <= idx < n_samples:
                k[i, j, idx] += coeff / dt
    return SampledIRM(dt, an.leaves, an.direct, k, an.horizon)


def remove_initial_pulse(trace, t, a: float, g: float, leaf_area: float):
    """Subtract the direct a/(gA) unit-step head from a self-trace."""
    trace = np.asarray(trace, dtype=float)
    t = np.asarray(t, dtype=float)
    return trace - (a / (g * leaf_area)) * (t >= 0.0)


def median_smooth(series, window: int):
    """Centered running median; the window shrinks near the edges."""
    if window < 1:
        raise WindowTooLarge("window must be at least 1 sample")
    series = np.asarray(series, dtype=float)
    if window > len(series):
        raise WindowTooLarge(f"window {window} exceeds series length {len(series)}")
    if window == 1:
        return series.copy()
    left = (window - 1) // 2
    right = window // 2
    out = np.empty_like(series)
    for i in range(len(series)):
        lo = max(0, i - left)
        hi = min(len(series), i + right + 1)
        out[i] = np.median(series[lo:hi])
    return out


def differentiate(series, t):
    """Central differences inside, one-sided at the ends."""
    series = np.asarray(series, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.gradient(series, t[1] - t[0])


def resample(series, t_old, t_new):
    """Linear interpolation onto a new grid inside the old one's span."""
    t_old = np.asarray(t_old, dtype=float)
    t_new = np.asarray(t_new, dtype=float)
    tol = 1e-9 * max(1.0, abs(float(t_old[-1])))
    if t_new[0] < t_old[0] - tol or t_new[-1] > t_old[-1] + tol:
        raise OutOfRange(
            f"target grid [{t_new[0]}, {t_new[-1]}] outside source span [{t_old[0]}, {t_old[-1]}]"
        )
    return np.interp(t_new, t_old, np.asarray(series, dtype=float))


def irm_row_from_step_response(
    bundle: StepResponseBundle, net: Network, smooth_window_s: float = 0.02
) -> dict[str, np.ndarray]:
    """Turn unit-step head traces into one row of reflection kernels.

    The self-trace first loses its direct step term; every trace is then
    median-smoothed (window given in seconds, floored to samples) and
    differentiated in time. Output stays on the simulation grid.
    """
    dt = float(bundle.t[1] - bundle.t[0])
    window = max(1, int(smooth_window_s / dt))
    row = {}
    for leaf, trace in bundle.traces.items():
        h = np.asarray(trace, dtype=float)
        if leaf == bundle.source:
            h = remove_initial_pulse(
                h, bundle.t, net.wave_speed, net.gravity, net.leaf_area(leaf)
            )
        h = median_smooth(h, window)
        row[leaf] = differentiate(h, bundle.t)
    return row


def measure_irm(
    net: Network,
    cfg: SimConfig,
    resample_dt: float | None = None,
    smooth_window_s: float = 0.02,
) -> tuple[SampledIRM, list[Histories]]:
    """Simulate step responses for every source leaf and assemble the IRM.

    One forward run per accessible leaf (unit step there, all other ends
    closed), the processing pipeline per receiver, then an optional
    resampling to a coarser grid. Returns the IRM and the raw histories.
    """
    n = len(net.accessible)
    rows = {}
    runs = []
    t_hist = None
    for source in net.accessible:
        hist = simulate(net, step_inflow(net, cfg, source), cfg)
        runs.append(hist)
        t_hist = hist.t
        bundle = StepResponseBundle(source, hist.t, dict(hist.boundary))
        rows[source] = irm_row_from_step_response(bundle, net, smooth_window_s)

    if resample_dt is None:
        t_out = t_hist
        dt_out = float(t_hist[1] - t_hist[0])
    else:
        dt_out = resample_dt
        t_out = np.arange(grid_size(float(t_hist[-1]), dt_out)) * dt_out

    k = np.zeros((n, n, len(t_out)))
    for i, source in enumerate(net.accessible):
        for j, receiver in enumerate(net.accessible):
            series = rows[source][receiver]
            k[i, j] = series if resample_dt is None else resample(series, t_hist, t_out)
    direct = tuple(net.wave_speed / (net.leaf_area(leaf) * net.gravity) for leaf in net.accessible)
    return SampledIRM(dt_out, net.accessible, direct, k, float(t_out[-1])), runs


# -- persistence --------------------------------------------------------------


def save_irm(irm: SampledIRM, path) -> None:
    """Write the IRM file: one JSON header line, then CSV rows i,j,t,k."""
    lines = [
        json.dumps(
            {
                "dt": irm.dt,
                "n": irm.n_samples,
                "leaves": list(irm.leaves),
                "direct": list(irm.direct),
                "horizon": irm.horizon,
            }
        ),
        "i,j,t,k",
    ]
    for i in range(len(irm.leaves)):
        for j in range(len(irm.leaves)):
            for s in range(irm.n_samples):
                lines.append(f"{i},{j},{s * irm.dt!r},{float(irm.k[i, j, s])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_irm(path) -> SampledIRM:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if fh.readline().strip() != "i,j,t,k":
            raise OutOfRange(f"{path}: missing i,j,t,k column header")
        leaves = tuple(header["leaves"])
        n = len(leaves)
        n_samples = int(header["n"])
        dt = float(header["dt"])
        k = np.zeros((n, n, n_samples))
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i_s, j_s, t_s, k_s = line.split(",")
            idx = int(round(float(t_s) / dt))
            k[int(i_s), int(j_s), idx] = float(k_s)
    return SampledIRM(dt, leaves, tuple(float(d) for d in header["direct"]), k, float(header["horizon"]))
