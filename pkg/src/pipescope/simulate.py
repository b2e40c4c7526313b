"""Direct problem: time-domain transient solver on the pipe network.

The scheme is the method of characteristics. Each pipe is split into
cells of (near-)uniform size; the area profile is sampled at cell
centers, giving one characteristic impedance B = a/(gA) per cell. Per
time step, Riemann-type compatibility values are carried to every node
along the two characteristics:

    C+ at node i:  H + B_left  * Q evaluated at the foot x_i - a*dt
    C- at node i:  H - B_right * Q evaluated at the foot x_i + a*dt

At Courant number 1 the feet are the neighbouring nodes and the
transport is exact; below 1 the foot values are linearly interpolated
along the space line (the deliberate model-mismatch device used when
synthesizing measurement data). Interior nodes solve the two-equation
system; junction nodes solve head continuity plus the Kirchhoff balance
in closed form, so flow conservation at junctions holds to round-off by
construction. The inaccessible end is a closed end (Q = 0), the simplest
member of the class of inactive boundary conditions the model allows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MismatchedSeriesLength, UnstableConfig
from .graph import Network

__all__ = [
    "SimConfig",
    "BoundaryFlow",
    "Histories",
    "simulate",
    "step_inflow",
    "junction_scatter",
    "conservation_residual",
]


@dataclass(frozen=True)
class SimConfig:
    """Spatial cell size (m), Courant number in (0, 1], duration (s)."""

    dx: float
    duration: float
    courant: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.courant <= 1.0:
            raise UnstableConfig(f"courant = {self.courant} outside (0, 1]")
        if self.dx <= 0 or self.duration < 0:
            raise UnstableConfig("dx must be positive and duration nonnegative")


@dataclass
class _PipeGrid:
    pipe_id: str
    x: np.ndarray           # node coordinates, len n+1
    dx: float
    areas: np.ndarray       # per cell, len n
    impedance: np.ndarray   # B = a/(gA) per cell, len n
    theta: float            # a*dt/dx for this pipe


@dataclass
class Histories:
    """Node-sampled solution H(t, x), Q(t, x) per pipe, plus leaf head traces."""

    t: np.ndarray
    grids: dict[str, _PipeGrid]
    H: dict[str, np.ndarray]   # shape (n_times, n_nodes)
    Q: dict[str, np.ndarray]
    boundary: dict[str, np.ndarray]  # accessible leaf -> H(t, leaf)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


class BoundaryFlow:
    """Prescribed inflow nu*Q per accessible leaf, sampled on the run's grid.

    Leaves without a series are closed (zero inflow). Series are implicitly
    zero before t = 0.
    """

    def __init__(self, series: dict[str, np.ndarray]):
        self.series = {leaf: np.asarray(s, dtype=float) for leaf, s in series.items()}

    def at(self, leaf: str, step: int) -> float:
        s = self.series.get(leaf)
        return float(s[step]) if s is not None else 0.0


def step_inflow(net: Network, cfg: SimConfig, leaf: str, magnitude: float = 1.0) -> BoundaryFlow:
    """Ideal unit step: value ``magnitude`` from t = 0 on, at one leaf."""
    n_steps = _step_count(cfg.duration, _time_step(net, cfg))
    return BoundaryFlow({leaf: np.full(n_steps + 1, magnitude)})


def _pipe_grids(net: Network, cfg: SimConfig) -> dict[str, _PipeGrid]:
    grids = {}
    for pid, pipe in net.pipes.items():
        n = max(1, round(pipe.length / cfg.dx))
        dx = pipe.length / n
        x = np.linspace(0.0, pipe.length, n + 1)
        centers = (x[:-1] + x[1:]) / 2
        areas = np.asarray(pipe.area(centers), dtype=float)
        impedance = net.wave_speed / (net.gravity * areas)
        grids[pid] = _PipeGrid(pid, x, dx, areas, impedance, theta=np.nan)
    return grids


def _time_step(net: Network, cfg: SimConfig) -> float:
    min_dx = min(p.length / max(1, round(p.length / cfg.dx)) for p in net.pipes.values())
    return cfg.courant * min_dx / net.wave_speed


def _step_count(duration: float, dt: float) -> int:
    return int(duration / dt + 1e-6)


def simulate(net: Network, flows: BoundaryFlow, cfg: SimConfig) -> Histories:
    """Run the transient solver and record full node histories.

    Prescribed nu*Q applies at accessible leaves, x0 is closed, junctions
    couple pipes through exact head continuity and flow balance.
    """
    dt = _time_step(net, cfg)
    n_steps = _step_count(cfg.duration, dt)
    grids = _pipe_grids(net, cfg)
    for g in grids.values():
        g.theta = net.wave_speed * dt / g.dx

    for leaf, series in flows.series.items():
        if leaf not in net.accessible:
            raise MismatchedSeriesLength(f"{leaf!r} is not an accessible leaf")
        if len(series) != n_steps + 1:
            raise MismatchedSeriesLength(
                f"series for {leaf!r} has {len(series)} samples, run needs {n_steps + 1}"
            )

    H = {pid: np.zeros(len(g.x)) for pid, g in grids.items()}
    Q = {pid: np.zeros(len(g.x)) for pid, g in grids.items()}
    H_hist = {pid: np.zeros((n_steps + 1, len(g.x))) for pid, g in grids.items()}
    Q_hist = {pid: np.zeros((n_steps + 1, len(g.x))) for pid, g in grids.items()}

    # vertex -> list of (pipe id, node index, cell impedance at that end, end kind)
    ends: dict[str, list[tuple[str, int, float, int]]] = {v: [] for v in net.vertices}
    for pid, pipe in net.pipes.items():
        g = grids[pid]
        ends[pipe.from_vertex].append((pid, 0, g.impedance[0], 0))
        ends[pipe.to_vertex].append((pid, len(g.x) - 1, g.impedance[-1], 1))

    leaves = set(net.leaves)

    def apply_boundaries(step: int, cp: dict[str, np.ndarray], cm: dict[str, np.ndarray]):
        for v, attached in ends.items():
            if v in leaves:
                pid, node, b, kind = attached[0]
                inflow = flows.at(v, step) if v in net.accessible else 0.0
                if kind == 0:  # x = 0 end, nu = +1
                    Q[pid][node] = inflow
                    H[pid][node] = cm[pid][node] + b * inflow
                else:  # x = length end, nu = -1
                    Q[pid][node] = -inflow
                    H[pid][node] = cp[pid][node] - b * (-inflow)
            else:
                num = 0.0
                den = 0.0
                for pid, node, b, kind in attached:
                    c = cp[pid][node] if kind == 1 else cm[pid][node]
                    num += c / b
                    den += 1.0 / b
                h_v = num / den
                for pid, node, b, kind in attached:
                    if kind == 1:
                        Q[pid][node] = (cp[pid][node] - h_v) / b
                    else:
                        Q[pid][node] = (h_v - cm[pid][node]) / b
                    H[pid][node] = h_v

    # state at t = 0: quiescent interior, boundary conditions already active
    zero_c = {pid: np.zeros(len(g.x)) for pid, g in grids.items()}
    apply_boundaries(0, zero_c, zero_c)
    for pid in grids:
        H_hist[pid][0] = H[pid]
        Q_hist[pid][0] = Q[pid]

    for step in range(1, n_steps + 1):
        cp = {}
        cm = {}
        for pid, g in grids.items():
            h, q, th, b = H[pid], Q[pid], g.theta, g.impedance
            hf_p = th * h[:-1] + (1 - th) * h[1:]
            qf_p = th * q[:-1] + (1 - th) * q[1:]
            hf_m = th * h[1:] + (1 - th) * h[:-1]
            qf_m = th * q[1:] + (1 - th) * q[:-1]
            cpa = np.empty_like(h)
            cma = np.empty_like(h)
            cpa[0] = np.nan
            cpa[1:] = hf_p + b * qf_p
            cma[-1] = np.nan
            cma[:-1] = hf_m - b * qf_m
            cp[pid] = cpa
            cm[pid] = cma

        for pid, g in grids.items():
            b = g.impedance
            if len(b) > 1:
                q_new = (cp[pid][1:-1] - cm[pid][1:-1]) / (b[:-1] + b[1:])
                h_new = cp[pid][1:-1] - b[:-1] * q_new
                Q[pid][1:-1] = q_new
                H[pid][1:-1] = h_new

        apply_boundaries(step, cp, cm)

        for pid in grids:
            H_hist[pid][step] = H[pid]
            Q_hist[pid][step] = Q[pid]

    t = np.arange(n_steps + 1) * dt
    boundary = {}
    for leaf in net.accessible:
        pipe = net.leaf_pipe(leaf)
        node = 0 if pipe.end_coord(leaf) == 0.0 else -1
        boundary[leaf] = H_hist[pipe.id][:, node]
    return Histories(t, grids, H_hist, Q_hist, boundary)


def junction_scatter(incident_head, incident: int, admittances):
    """Scatter a head pulse at a junction of pipes with admittances Y = gA/a.

    Returns ``(reflected, transmitted)`` where ``transmitted`` lists the head
    amplitudes entering the other pipes in order (incident pipe skipped).
    The transmission coefficient is 2*Y_incident / sum(Y); reflection is
    that minus one; the implied flows balance exactly.

    Works on floats and exact ``fractions.Fraction`` values alike.
    """
    total = sum(admittances)
    transmission = 2 * admittances[incident] / total
    reflected = (transmission - 1) * incident_head
    transmitted = [
        transmission * incident_head for k in range(len(admittances)) if k != incident
    ]
    return reflected, transmitted


def conservation_residual(hist: Histories, net: Network, tau: float) -> float:
    """Mismatch of injected boundary volume vs stored compliance volume at tau.

    Left side: sum over leaves of the inflow nu*Q integrated over (0, tau)
    (piecewise-constant in time, matching the solver's step structure).
    Right side: integral of H(tau, x) * gA/a^2 over the network, evaluated
    with the per-cell characteristic reconstruction

        H_cell = (H_left + H_right + B*(Q_left - Q_right)) / 2

    taken one step before tau, which is the cell-interior value the exact
    solution holds on the open interval ending at tau. At Courant 1 the
    identity is exact to round-off; below 1 it measures interpolation
    diffusion.
    """
    dt = hist.dt
    k_tau = int(round(tau / dt))
    if not 1 <= k_tau <= len(hist.t) - 1:
        raise ValueError(f"tau = {tau} outside the recorded time span")

    inflow = 0.0
    for leaf in net.leaves:
        pipe = net.leaf_pipe(leaf)
        node = 0 if pipe.end_coord(leaf) == 0.0 else -1
        nu = pipe.nu(leaf)
        q = hist.Q[pipe.id][:k_tau, node]
        inflow += nu * float(np.sum(q)) * dt

    stored = 0.0
    a2 = net.wave_speed**2
    for pid, g in hist.grids.items():
        h = hist.H[pid][k_tau - 1]
        q = hist.Q[pid][k_tau - 1]
        cell_h = 0.5 * (h[:-1] + h[1:] + g.impedance * (q[:-1] - q[1:]))
        stored += float(np.sum(net.gravity * g.areas / a2 * cell_h)) * g.dx

    scale = max(abs(inflow), abs(stored), 1e-30)
    return abs(inflow - stored) / scale
