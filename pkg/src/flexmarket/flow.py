"""Max-flow feasibility: allocation construction and min-cut certificates.

The network has one column vertex per slot (source arc capacity = slot
supply), one row vertex per load (sink arc capacity = duration), and a unit
arc from every admissible slot to every load.  An integral max flow of value
equal to the total demanded duration is exactly a feasible (0,1) allocation;
otherwise the residual cut certifies inadequacy.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import NonIntegerInput, NotAdequate, ValidationError
from .model import DemandCollection, SupplyProfile, TimePartition

__all__ = [
    "FlowNetwork",
    "AllocationMatrix",
    "CutWitness",
    "build_network",
    "max_flow",
    "extract_allocation",
    "min_cut_witness",
    "adequacy_gap",
]


class _Dinic:
    """Blocking-flow max-flow on an adjacency-list residual graph.

    Edges are stored in pairs; edge ``e ^ 1`` is the reverse of ``e``.
    Deterministic for a fixed edge insertion order.
    """

    def __init__(self, num_vertices: int):
        self.graph: list[list[int]] = [[] for _ in range(num_vertices)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_edge(self, u: int, v: int, capacity: int) -> int:
        eid = len(self.to)
        self.to.append(v)
        self.cap.append(capacity)
        self.graph[u].append(eid)
        self.to.append(u)
        self.cap.append(0)
        self.graph[v].append(eid + 1)
        return eid

    def _levels(self, source: int, sink: int) -> list[int] | None:
        level = [-1] * len(self.graph)
        level[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for eid in self.graph[u]:
                v = self.to[eid]
                if self.cap[eid] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[sink] >= 0 else None

    def _augment(self, u: int, sink: int, limit: int, level, it) -> int:
        if u == sink:
            return limit
        while it[u] < len(self.graph[u]):
            eid = self.graph[u][it[u]]
            v = self.to[eid]
            if self.cap[eid] > 0 and level[v] == level[u] + 1:
                pushed = self._augment(v, sink, min(limit, self.cap[eid]), level, it)
                if pushed > 0:
                    self.cap[eid] -= pushed
                    self.cap[eid ^ 1] += pushed
                    return pushed
            it[u] += 1
        return 0

    def max_flow(self, source: int, sink: int) -> int:
        total = 0
        while True:
            level = self._levels(source, sink)
            if level is None:
                return total
            it = [0] * len(self.graph)
            while True:
                pushed = self._augment(source, sink, 1 << 62, level, it)
                if pushed == 0:
                    break
                total += pushed

    def reachable(self, source: int) -> list[bool]:
        """Vertices reachable from ``source`` in the residual graph."""
        seen = [False] * len(self.graph)
        seen[source] = True
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for eid in self.graph[u]:
                v = self.to[eid]
                if self.cap[eid] > 0 and not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return seen


@dataclass(frozen=True)
class FlowNetwork:
    """Bipartite-style s-t network for one integer instance.

    Vertices are numbered ``0`` (source), ``1..n`` (slot columns),
    ``n+1..n+m`` (load rows), ``n+m+1`` (sink).  ``windows[i]`` is the
    0-based half-open slot range ``(start, stop)`` admissible for load ``i``.
    """

    supply: tuple[int, ...]
    durations: tuple[int, ...]
    windows: tuple[tuple[int, int], ...]

    @property
    def num_slots(self) -> int:
        return len(self.supply)

    @property
    def num_loads(self) -> int:
        return len(self.durations)

    @property
    def num_vertices(self) -> int:
        return self.num_slots + self.num_loads + 2

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.num_slots + self.num_loads + 1

    def num_unit_arcs(self) -> int:
        return sum(stop - start for start, stop in self.windows)


def _require_integer_instance(supply: SupplyProfile, demand: DemandCollection) -> None:
    if not supply.is_integral:
        raise NonIntegerInput("flow operations require integer supply")
    if not demand.all_unit_weight:
        raise NonIntegerInput("flow operations require unit load weights")


def _check_windows(demand: DemandCollection, partition: TimePartition) -> None:
    for i, load in enumerate(demand):
        a, d = load.spec.arrival, load.spec.deadline
        if not (0 <= a < d <= partition.num_segments):
            raise ValidationError(
                "load %d: window indices (%d, %d) invalid for partition" % (i + 1, a, d)
            )
        if load.spec.duration < 1:
            raise ValidationError("load %d: duration must be positive" % (i + 1,))


def build_network(supply: SupplyProfile, demand: DemandCollection,
                  partition: TimePartition) -> FlowNetwork:
    """Assemble the s-t network for an integer, unit-weight instance."""
    if len(supply.units) != partition.horizon:
        raise ValidationError(
            "supply length %d must equal horizon %d"
            % (len(supply.units), partition.horizon)
        )
    _require_integer_instance(supply, demand)
    _check_windows(demand, partition)
    bp = partition.breakpoints
    windows = tuple(
        (bp[ld.spec.arrival], bp[ld.spec.deadline]) for ld in demand
    )
    return FlowNetwork(
        supply=tuple(int(u) for u in supply.units),
        durations=tuple(ld.spec.duration for ld in demand),
        windows=windows,
    )


def _build_dinic(network: FlowNetwork):
    """Residual graph plus the edge ids of the load-slot unit arcs."""
    n, m = network.num_slots, network.num_loads
    dinic = _Dinic(network.num_vertices)
    for j in range(n):
        dinic.add_edge(network.source, 1 + j, network.supply[j])
    unit_arcs = {}
    for i, (start, stop) in enumerate(network.windows):
        for j in range(start, stop):
            unit_arcs[(i, j)] = dinic.add_edge(1 + j, 1 + n + i, 1)
    for i, duration in enumerate(network.durations):
        dinic.add_edge(1 + n + i, network.sink, duration)
    return dinic, unit_arcs


def max_flow(network: FlowNetwork) -> tuple[int, dict[tuple[int, int], int]]:
    """Maximum s-t flow value and the flow on each (load, slot) unit arc."""
    dinic, unit_arcs = _build_dinic(network)
    value = dinic.max_flow(network.source, network.sink)
    flows = {key: 1 - dinic.cap[eid] for key, eid in unit_arcs.items()}
    return value, flows


@dataclass(frozen=True)
class CutWitness:
    """An s-t cut certifying the maximum flow value.

    ``loads`` are the 1-based indices of rows on the sink side; ``slots``
    the 1-based indices of columns on the source side.  ``capacity`` is the
    cut capacity; the instance is inadequate exactly when it falls short of
    ``required`` (the total demanded duration).
    """

    loads: tuple[int, ...]
    slots: tuple[int, ...]
    capacity: int
    required: int

    def to_doc(self) -> dict:
        return {
            "loads": list(self.loads),
            "slots": list(self.slots),
            "capacity": self.capacity,
            "required": self.required,
        }


def _cut_capacity(network: FlowNetwork, loads: tuple[int, ...],
                  slots: tuple[int, ...]) -> int:
    """Cut capacity from its three arc families: uncut source arcs, crossing
    unit arcs, and uncut sink arcs."""
    in_x = set(loads)
    in_y = set(slots)
    cap = sum(network.supply) - sum(network.supply[j - 1] for j in in_y)
    cap += sum(network.durations) - sum(network.durations[i - 1] for i in in_x)
    for i in in_x:
        start, stop = network.windows[i - 1]
        cap += sum(1 for j in in_y if start < j <= stop)
    return cap


def min_cut_witness(network: FlowNetwork) -> CutWitness:
    """Minimum cut from the residual source-reachable set at max flow."""
    dinic, _ = _build_dinic(network)
    dinic.max_flow(network.source, network.sink)
    seen = dinic.reachable(network.source)
    n = network.num_slots
    slots = tuple(j + 1 for j in range(n) if seen[1 + j])
    loads = tuple(i + 1 for i in range(network.num_loads) if not seen[1 + n + i])
    capacity = _cut_capacity(network, loads, slots)
    return CutWitness(
        loads=loads,
        slots=slots,
        capacity=capacity,
        required=sum(network.durations),
    )


@dataclass(frozen=True)
class AllocationMatrix:
    """(0,1) power schedule: entry (i, j) = 1 when load ``i`` is served in
    slot ``j``."""

    entries: tuple[tuple[int, ...], ...]

    def validate(self, supply: SupplyProfile, demand: DemandCollection,
                 partition: TimePartition) -> None:
        """Raise ``ValidationError`` unless the matrix is a feasible schedule."""
        m, n = len(demand), partition.horizon
        if len(self.entries) != m or any(len(row) != n for row in self.entries):
            raise ValidationError("allocation must be %d x %d" % (m, n))
        bp = partition.breakpoints
        for i, (row, load) in enumerate(zip(self.entries, demand)):
            if any(v not in (0, 1) for v in row):
                raise ValidationError("row %d: entries must be 0 or 1" % (i + 1,))
            if sum(row) != load.spec.duration:
                raise ValidationError(
                    "row %d: sum %d != duration %d" % (i + 1, sum(row), load.spec.duration)
                )
            start, stop = bp[load.spec.arrival], bp[load.spec.deadline]
            if any(row[j] for j in range(n) if not (start <= j < stop)):
                raise ValidationError("row %d: service outside admissible window" % (i + 1,))
        for j in range(n):
            col = sum(row[j] for row in self.entries)
            if col > supply.units[j]:
                raise ValidationError(
                    "column %d: sum %d exceeds supply %r" % (j + 1, col, supply.units[j])
                )

    def to_lists(self) -> list[list[int]]:
        return [list(row) for row in self.entries]


def extract_allocation(supply: SupplyProfile, demand: DemandCollection,
                       partition: TimePartition) -> AllocationMatrix:
    """A feasible (0,1) schedule read off an integral max flow.

    Raises ``NotAdequate`` (carrying the certifying cut) when none exists.
    Deterministic: the flow is computed over a fixed arc ordering.
    """
    network = build_network(supply, demand, partition)
    value, flows = max_flow(network)
    required = sum(network.durations)
    if value < required:
        raise NotAdequate(
            "max flow %d < required %d" % (value, required),
            witness=min_cut_witness(network),
        )
    n, m = network.num_slots, network.num_loads
    entries = [[0] * n for _ in range(m)]
    for (i, j), used in flows.items():
        if used:
            entries[i][j] = 1
    return AllocationMatrix(entries=tuple(tuple(row) for row in entries))


def adequacy_gap(supply: SupplyProfile, demand: DemandCollection,
                 partition: TimePartition) -> int:
    """Minimum extra energy (over all slot placements) to make the supply
    adequate; equals the total demanded duration minus the max flow.

    Loads sharing (duration, arrival, deadline) are aggregated into one row
    with scaled arc capacities; the max-flow value is unchanged because an
    optimal cut never splits interchangeable loads.
    """
    if len(supply.units) != partition.horizon:
        raise ValidationError(
            "supply length %d must equal horizon %d"
            % (len(supply.units), partition.horizon)
        )
    _require_integer_instance(supply, demand)
    _check_windows(demand, partition)

    groups: dict[tuple[int, int, int], int] = {}
    for load in demand:
        key = (load.spec.duration, load.spec.arrival, load.spec.deadline)
        groups[key] = groups.get(key, 0) + 1

    n = partition.horizon
    bp = partition.breakpoints
    num_groups = len(groups)
    dinic = _Dinic(n + num_groups + 2)
    sink = n + num_groups + 1
    for j in range(n):
        dinic.add_edge(0, 1 + j, int(supply.units[j]))
    for g, ((duration, a, d), count) in enumerate(sorted(groups.items())):
        for j in range(bp[a], bp[d]):
            dinic.add_edge(1 + j, 1 + n + g, count)
        dinic.add_edge(1 + n + g, sink, count * duration)
    value = dinic.max_flow(0, sink)
    required = sum(ld.spec.duration for ld in demand)
    return required - value
