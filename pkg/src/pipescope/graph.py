"""Tree-network data model: topology, travel times, action times, admissible sets.

A network is a finite tree of pipes. Each pipe carries its own coordinate
``x`` running from ``from_vertex`` (x = 0) to ``to_vertex`` (x = length),
a positive cross-sectional area profile ``A(x)``, and the internal normal
``nu(0) = +1``, ``nu(length) = -1``. One leaf is the inaccessible end
``x0``; every other leaf is accessible and the order of the ``accessible``
list drives all response-matrix indexing downstream.

Geometry here is exact and immutable: once ``validate_network`` accepts a
description, every derived quantity (distances, action times, admissible
sets) is a pure function of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CycleDetected,
    DegreeTwoVertex,
    Disconnected,
    InvalidNetworkSpec,
    InvalidPoint,
    NonLeafX0,
    NonpositiveArea,
    NonpositiveLength,
    PointIsJunction,
)

__all__ = [
    "BlockAreaProfile",
    "TableAreaProfile",
    "Pipe",
    "Network",
    "PointOnPipe",
    "ActionTimes",
    "AdmissibleSet",
    "validate_network",
    "travel_time",
    "network_distance",
    "action_times",
    "admissible_set",
    "region_contains",
    "region_area_integral",
]


@dataclass(frozen=True)
class BlockAreaProfile:
    """Area = base constant plus rectangular perturbations on open intervals.

    ``blocks`` is a tuple of ``(x_lo, x_hi, delta)``; the delta applies for
    ``x_lo < x < x_hi``. Blockages are negative deltas.
    """

    base: float
    blocks: tuple[tuple[float, float, float], ...] = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a = np.full_like(x, self.base)
        for lo, hi, delta in self.blocks:
            a = a + delta * ((x > lo) & (x < hi))
        return a if a.ndim else float(a)

    def min_area(self, length: float) -> float:
        # piecewise constant: probing midpoints of every breakpoint interval is exact
        edges = sorted({0.0, length, *(e for lo, hi, _ in self.blocks for e in (lo, hi) if 0.0 < e < length)})
        mids = [(a + b) / 2 for a, b in zip(edges, edges[1:])]
        return float(min(self(m) for m in mids)) if mids else self.base

    def integral(self, lo: float, hi: float) -> float:
        """Exact integral of A over [lo, hi]."""
        total = self.base * (hi - lo)
        for b_lo, b_hi, delta in self.blocks:
            overlap = min(hi, b_hi) - max(lo, b_lo)
            if overlap > 0:
                total += delta * overlap
        return total

    @property
    def is_constant(self) -> bool:
        return all(delta == 0.0 for _, _, delta in self.blocks)


@dataclass(frozen=True)
class TableAreaProfile:
    """Sampled area table with linear interpolation between samples."""

    x: tuple[float, ...]
    values: tuple[float, ...]

    def __call__(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.x, self.values)
        return out if out.ndim else float(out)

    def min_area(self, length: float) -> float:
        return float(min(self.values))

    def integral(self, lo: float, hi: float) -> float:
        xs = [lo] + [x for x in self.x if lo < x < hi] + [hi]
        ys = self(np.asarray(xs))
        return float(np.trapezoid(ys, xs))

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1


@dataclass(frozen=True)
class Pipe:
    id: str
    from_vertex: str
    to_vertex: str
    length: float
    area: BlockAreaProfile | TableAreaProfile

    def end_coord(self, vertex: str) -> float:
        if vertex == self.from_vertex:
            return 0.0
        if vertex == self.to_vertex:
            return self.length
        raise InvalidPoint(f"vertex {vertex!r} is not an end of pipe {self.id!r}")

    def nu(self, vertex: str) -> int:
        """Internal normal at a pipe end: +1 at x=0, -1 at x=length."""
        return 1 if self.end_coord(vertex) == 0.0 else -1


@dataclass(frozen=True)
class PointOnPipe:
    """A point strictly inside a pipe, by pipe id and coordinate offset.

    ``offset == length`` is additionally accepted by the geometric
    operations as the one-sided limit at the far (x0-side) end of the
    pipe; it is how a profile reconstructs all the way up to a junction.
    """

    pipe: str
    offset: float


@dataclass(frozen=True)
class ActionTimes:
    """Per-accessible-leaf activation durations for one cut point.

    ``f[leaf]`` is the travel time from the leaf to the cut point when the
    leaf lies on the boundary of the admissible set, and 0 otherwise.
    """

    f: dict[str, float]
    cut_point: PointOnPipe

    def as_vector(self, order: tuple[str, ...]) -> np.ndarray:
        return np.array([self.f.get(leaf, 0.0) for leaf in order], dtype=float)

    @property
    def max_f(self) -> float:
        return max(self.f.values()) if self.f else 0.0


@dataclass(frozen=True)
class AdmissibleSet:
    """The component of the network cut off by a point, away from x0."""

    covered: tuple[tuple[str, tuple[float, float]], ...]
    boundary_leaves: tuple[str, ...]
    cut_point: PointOnPipe


class Network:
    """Validated immutable tree network. Build through ``validate_network``."""

    def __init__(self, wave_speed, gravity, pipes, x0, accessible):
        self.wave_speed = float(wave_speed)
        self.gravity = float(gravity)
        self.pipes: dict[str, Pipe] = {p.id: p for p in pipes}
        self.x0 = x0
        self.accessible: tuple[str, ...] = tuple(accessible)
        self._adjacency: dict[str, list[Pipe]] = {}
        for p in pipes:
            self._adjacency.setdefault(p.from_vertex, []).append(p)
            self._adjacency.setdefault(p.to_vertex, []).append(p)
        self.vertices: tuple[str, ...] = tuple(self._adjacency)
        self._vertex_dist = self._all_pairs_distances()
        self._x0_side = self._orient_towards_x0()

    # -- structure ---------------------------------------------------------

    def degree(self, vertex: str) -> int:
        return len(self._adjacency[vertex])

    @property
    def leaves(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if self.degree(v) == 1)

    @property
    def junctions(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if self.degree(v) >= 3)

    def adjacent_pipes(self, vertex: str) -> tuple[Pipe, ...]:
        return tuple(self._adjacency[vertex])

    def leaf_pipe(self, leaf: str) -> Pipe:
        (pipe,) = self._adjacency[leaf]
        return pipe

    def leaf_area(self, leaf: str) -> float:
        pipe = self.leaf_pipe(leaf)
        return float(pipe.area(pipe.end_coord(leaf)))

    def leaf_nu(self, leaf: str) -> int:
        return self.leaf_pipe(leaf).nu(leaf)

    def x0_side_vertex(self, pipe_id: str) -> str:
        """The endpoint of a pipe through which x0 is reached."""
        return self._x0_side[pipe_id]

    def far_side_vertex(self, pipe_id: str) -> str:
        p = self.pipes[pipe_id]
        x0_end = self._x0_side[pipe_id]
        return p.to_vertex if x0_end == p.from_vertex else p.from_vertex

    # -- internals ---------------------------------------------------------

    def _all_pairs_distances(self) -> dict[str, dict[str, float]]:
        dist: dict[str, dict[str, float]] = {}
        for start in self._adjacency:
            d = {start: 0.0}
            stack = [start]
            while stack:
                v = stack.pop()
                for p in self._adjacency[v]:
                    w = p.to_vertex if v == p.from_vertex else p.from_vertex
                    if w not in d:
                        d[w] = d[v] + p.length
                        stack.append(w)
            dist[start] = d
        return dist

    def _orient_towards_x0(self) -> dict[str, str]:
        parent_edge: dict[str, str | None] = {self.x0: None}
        order = [self.x0]
        while order:
            v = order.pop()
            for p in self._adjacency[v]:
                w = p.to_vertex if v == p.from_vertex else p.from_vertex
                if w not in parent_edge:
                    parent_edge[w] = p.id
                    order.append(w)
        side = {}
        for pid, p in self.pipes.items():
            # the endpoint whose parent edge is this pipe is the far one
            side[pid] = p.to_vertex if parent_edge[p.from_vertex] == pid else p.from_vertex
        return side


def _build_area_profile(spec) -> BlockAreaProfile | TableAreaProfile:
    if "samples" in spec:
        xs = tuple(float(v) for v in spec["samples"]["x"])
        vals = tuple(float(v) for v in spec["samples"]["A"])
        if len(xs) != len(vals) or len(xs) < 2:
            raise InvalidNetworkSpec("area sample table needs matching x/A lists of length >= 2")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidNetworkSpec("area sample x values must be strictly increasing")
        # the reconstruction theory needs A constant near leaf ends
        if vals[0] != vals[1] or vals[-1] != vals[-2]:
            raise InvalidNetworkSpec("area table must be constant on its first and last segment")
        return TableAreaProfile(xs, vals)
    blocks = tuple(
        (float(b["x0"]), float(b["x1"]), float(b["delta"])) for b in spec.get("blocks", ())
    )
    for lo, hi, _ in blocks:
        if hi <= lo:
            raise InvalidNetworkSpec(f"area block has empty interval ({lo}, {hi})")
    return BlockAreaProfile(float(spec["base"]), blocks)


def validate_network(spec: dict) -> Network:
    """Validate a raw network description (the JSON schema) into a Network.

    Raises: CycleDetected, Disconnected, DegreeTwoVertex, NonLeafX0,
    NonpositiveLength, NonpositiveArea, InvalidNetworkSpec.
    """
    try:
        wave_speed = float(spec["wave_speed"])
        gravity = float(spec["gravity"])
        vertices = list(spec["vertices"])
        raw_pipes = list(spec["pipes"])
        x0 = spec["x0"]
        accessible = list(spec["accessible"])
    except (KeyError, TypeError) as exc:
        raise InvalidNetworkSpec(f"missing or malformed field: {exc}") from exc

    if wave_speed <= 0 or gravity <= 0:
        raise InvalidNetworkSpec("wave_speed and gravity must be positive")
    if len(set(vertices)) != len(vertices):
        raise InvalidNetworkSpec("duplicate vertex ids")

    pipes = []
    seen_ids = set()
    for rp in raw_pipes:
        pid = rp["id"]
        if pid in seen_ids:
            raise InvalidNetworkSpec(f"duplicate pipe id {pid!r}")
        seen_ids.add(pid)
        if rp["from"] not in vertices or rp["to"] not in vertices:
            raise InvalidNetworkSpec(f"pipe {pid!r} references unknown vertices")
        if rp["from"] == rp["to"]:
            raise CycleDetected(f"pipe {pid!r} is a self-loop")
        length = float(rp["length"])
        if length <= 0:
            raise NonpositiveLength(f"pipe {pid!r} has length {length}")
        area = _build_area_profile(rp["area"])
        if area.min_area(length) <= 0:
            raise NonpositiveArea(f"pipe {pid!r} area profile is not positive everywhere")
        pipes.append(Pipe(pid, rp["from"], rp["to"], length, area))

    if len(pipes) < len(vertices) - 1:
        raise Disconnected(f"{len(pipes)} pipes cannot connect {len(vertices)} vertices")

    adjacency: dict[str, list] = {v: [] for v in vertices}
    for p in pipes:
        adjacency[p.from_vertex].append(p)
        adjacency[p.to_vertex].append(p)

    reached = {vertices[0]}
    stack = [vertices[0]]
    while stack:
        v = stack.pop()
        for p in adjacency[v]:
            w = p.to_vertex if v == p.from_vertex else p.from_vertex
            if w not in reached:
                reached.add(w)
                stack.append(w)
    if len(reached) != len(vertices):
        raise Disconnected("network is not connected")
    if len(pipes) != len(vertices) - 1:
        raise CycleDetected(f"{len(pipes)} pipes on {len(vertices)} vertices form a cycle")

    for v in vertices:
        if len(adjacency[v]) == 2:
            raise DegreeTwoVertex(f"vertex {v!r} joins exactly two pipes")

    leaves = {v for v in vertices if len(adjacency[v]) == 1}
    if x0 not in leaves:
        raise NonLeafX0(f"x0 = {x0!r} is not a leaf")
    if set(accessible) != leaves - {x0} or len(set(accessible)) != len(accessible):
        raise InvalidNetworkSpec("accessible list must be exactly all leaves except x0")

    return Network(wave_speed, gravity, pipes, x0, accessible)


# -- travel times ------------------------------------------------------------


def _point_candidates(net: Network, point) -> tuple[str | None, list[tuple[str, float]]]:
    """Return (pipe id or None, [(endpoint vertex, distance to it), ...])."""
    if isinstance(point, PointOnPipe):
        pipe = net.pipes.get(point.pipe)
        if pipe is None:
            raise InvalidPoint(f"unknown pipe {point.pipe!r}")
        if not 0.0 <= point.offset <= pipe.length:
            raise InvalidPoint(f"offset {point.offset} outside pipe {point.pipe!r} of length {pipe.length}")
        return pipe.id, [(pipe.from_vertex, point.offset), (pipe.to_vertex, pipe.length - point.offset)]
    if point in net._adjacency:
        return None, [(point, 0.0)]
    raise InvalidPoint(f"unknown vertex {point!r}")


def network_distance(net: Network, u, v) -> float:
    """Length in meters of the unique tree path between two points.

    Points are vertex ids or ``PointOnPipe`` instances.
    """
    pu, cand_u = _point_candidates(net, u)
    pv, cand_v = _point_candidates(net, v)
    if pu is not None and pu == pv:
        return abs(cand_u[0][1] - cand_v[0][1])
    return min(
        du + net._vertex_dist[eu][ev] + dv for eu, du in cand_u for ev, dv in cand_v
    )


def travel_time(net: Network, u, v) -> float:
    """Wave travel time between two points: path length over wave speed."""
    return network_distance(net, u, v) / net.wave_speed


# -- admissible sets and action times ----------------------------------------


def _resolve_cut(net: Network, p: PointOnPipe, endpoint_ok: bool) -> tuple[Pipe, float, str, str]:
    """Check a cut point and return (pipe, offset, far_vertex, x0_vertex).

    ``far_vertex`` is the pipe end away from x0; the admissible component
    hangs off it. Offsets at the pipe's x0-side end are accepted only with
    ``endpoint_ok`` and stand for the limit taken from inside the pipe.
    """
    pipe = net.pipes.get(p.pipe)
    if pipe is None:
        raise InvalidPoint(f"unknown pipe {p.pipe!r}")
    if not 0.0 <= p.offset <= pipe.length:
        raise InvalidPoint(f"offset {p.offset} outside pipe {p.pipe!r}")
    x0_vertex = net.x0_side_vertex(p.pipe)
    far_vertex = net.far_side_vertex(p.pipe)
    boundary_hit = p.offset in (0.0, pipe.length)
    if boundary_hit:
        at_vertex = pipe.from_vertex if p.offset == 0.0 else pipe.to_vertex
        if at_vertex != x0_vertex or not endpoint_ok:
            if net.degree(at_vertex) >= 3:
                raise PointIsJunction(f"point at {at_vertex!r} is a junction")
            raise InvalidPoint(f"cut point must be strictly inside pipe {p.pipe!r}")
    return pipe, p.offset, far_vertex, x0_vertex


def _component_pipes(net: Network, start_vertex: str, excluded_pipe: str) -> list[str]:
    """Pipe ids of the component containing start_vertex in G minus one pipe."""
    seen_v = {start_vertex}
    out: list[str] = []
    stack = [start_vertex]
    while stack:
        v = stack.pop()
        for p in net._adjacency[v]:
            if p.id == excluded_pipe:
                continue
            w = p.to_vertex if v == p.from_vertex else p.from_vertex
            if w not in seen_v:
                seen_v.add(w)
                out.append(p.id)
                stack.append(w)
    return out


def admissible_set(net: Network, p: PointOnPipe, *, endpoint_ok: bool = False) -> AdmissibleSet:
    """The component of the network cut off by ``p``, away from x0.

    Raises ``PointIsJunction`` for cut points at a junction vertex.
    """
    pipe, offset, far_vertex, _ = _resolve_cut(net, p, endpoint_ok)
    if far_vertex == pipe.from_vertex:
        own_interval = (0.0, offset)
    else:
        own_interval = (offset, pipe.length)
    covered = [(pipe.id, own_interval)]
    sub_pipe_ids = _component_pipes(net, far_vertex, pipe.id)
    covered.extend((pid, (0.0, net.pipes[pid].length)) for pid in sub_pipe_ids)

    sub_vertices = {far_vertex}
    for pid in sub_pipe_ids:
        sub_vertices.add(net.pipes[pid].from_vertex)
        sub_vertices.add(net.pipes[pid].to_vertex)
    boundary = tuple(leaf for leaf in net.accessible if leaf in sub_vertices)
    return AdmissibleSet(tuple(covered), boundary, p)


def action_times(net: Network, p: PointOnPipe, *, endpoint_ok: bool = False) -> ActionTimes:
    """Activation durations f per accessible leaf for the cut point ``p``.

    f(leaf) is travel_time(leaf, p) for leaves separated from x0 by p,
    and 0 for every other accessible leaf.
    """
    region = admissible_set(net, p, endpoint_ok=endpoint_ok)
    f = {}
    for leaf in net.accessible:
        f[leaf] = travel_time(net, leaf, p) if leaf in region.boundary_leaves else 0.0
    return ActionTimes(f, p)


# -- region helpers (testing and diagnostics) --------------------------------


def region_contains(net: Network, region: AdmissibleSet, point: PointOnPipe) -> bool:
    for pid, (lo, hi) in region.covered:
        if pid == point.pipe and lo <= point.offset <= hi:
            return True
    return False


def region_area_integral(net: Network, region: AdmissibleSet) -> float:
    """Integral of the area profile over a covered region: its volume in m^3."""
    return sum(net.pipes[pid].area.integral(lo, hi) for pid, (lo, hi) in region.covered)
