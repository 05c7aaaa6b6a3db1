"""Domain types, instance parsing/validation, and supply canonicalization.

An instance couples a time partition (the menu of admissible arrival and
deadline breakpoints), a per-slot supply profile, a collection of flexible
loads, and optionally a set of consumer types for market clearing.  All types
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

__all__ = [
    "TimePartition",
    "SupplyProfile",
    "ServiceSpec",
    "Load",
    "DemandCollection",
    "ConsumerType",
    "Instance",
    "load_instance",
    "serialize_instance",
    "canonicalize_supply",
]


@dataclass(frozen=True)
class TimePartition:
    """Strictly increasing slot breakpoints ``0 = b_0 < b_1 < ... < b_K``.

    Segment ``k`` (1-based) covers the slots strictly after ``b_{k-1}`` up to
    and including ``b_k``; arrivals and deadlines of services must sit on
    breakpoints.
    """

    breakpoints: tuple[int, ...]

    def __post_init__(self):
        bp = tuple(int(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        if len(bp) < 2:
            raise ValidationError("partition needs at least two breakpoints")
        if bp[0] != 0:
            raise ValidationError("partition must start at 0, got %r" % (bp[0],))
        for lo, hi in zip(bp, bp[1:]):
            if hi <= lo:
                raise ValidationError(
                    "partition breakpoints must be strictly increasing, "
                    "got %r before %r" % (lo, hi)
                )

    @property
    def num_segments(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def horizon(self) -> int:
        """Total number of slots."""
        return self.breakpoints[-1]

    def segment_length(self, k: int) -> int:
        """Length of 1-based segment ``k``."""
        return self.breakpoints[k] - self.breakpoints[k - 1]

    @property
    def segment_lengths(self) -> tuple[int, ...]:
        return tuple(
            self.segment_length(k) for k in range(1, self.num_segments + 1)
        )

    def window_slots(self, arrival: int, deadline: int) -> range:
        """0-based slot indices admissible for a service (arrival, deadline)."""
        return range(self.breakpoints[arrival], self.breakpoints[deadline])


@dataclass(frozen=True)
class SupplyProfile:
    """Energy units available per slot."""

    units: tuple[float, ...]

    def __post_init__(self):
        units = tuple(float(u) for u in self.units)
        object.__setattr__(self, "units", units)
        for j, u in enumerate(units):
            if u < 0:
                raise ValidationError("supply must be nonnegative, slot %d is %r" % (j + 1, u))

    @property
    def total(self) -> float:
        return sum(self.units)

    @property
    def is_integral(self) -> bool:
        return all(float(u).is_integer() for u in self.units)

    def is_canonical(self, partition: TimePartition) -> bool:
        """True if nonincreasing within every segment of ``partition``."""
        bp = partition.breakpoints
        for k in range(1, partition.num_segments + 1):
            seg = self.units[bp[k - 1]:bp[k]]
            if any(seg[i] < seg[i + 1] for i in range(len(seg) - 1)):
                return False
        return True


@dataclass(frozen=True, order=True)
class ServiceSpec:
    """A service contract: ``duration`` slots of unit power anywhere in the
    window between breakpoints ``arrival`` and ``deadline``."""

    duration: int
    arrival: int
    deadline: int

    def validate(self, partition: TimePartition) -> None:
        a, d, r = self.arrival, self.deadline, self.duration
        if not (0 <= a < d <= partition.num_segments):
            raise ValidationError(
                "service window must satisfy 0 <= arrival < deadline <= %d, "
                "got arrival=%d deadline=%d" % (partition.num_segments, a, d)
            )
        window = partition.breakpoints[d] - partition.breakpoints[a]
        if not (0 < r <= window):
            raise ValidationError(
                "duration %d outside (0, %d] for window (arrival=%d, deadline=%d)"
                % (r, window, a, d)
            )

    def window_length(self, partition: TimePartition) -> int:
        return partition.breakpoints[self.deadline] - partition.breakpoints[self.arrival]


@dataclass(frozen=True)
class Load:
    """One flexible load: a service spec plus its constant power level."""

    spec: ServiceSpec
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        if self.weight <= 0:
            raise ValidationError("load weight must be positive, got %r" % (self.weight,))


@dataclass(frozen=True)
class DemandCollection:
    """An ordered collection of loads sharing one time partition."""

    loads: tuple[Load, ...]

    def __post_init__(self):
        object.__setattr__(self, "loads", tuple(self.loads))

    def __len__(self) -> int:
        return len(self.loads)

    def __iter__(self):
        return iter(self.loads)

    def validate(self, partition: TimePartition) -> None:
        for i, load in enumerate(self.loads):
            try:
                load.spec.validate(partition)
            except ValidationError as exc:
                raise ValidationError("load %d: %s" % (i + 1, exc)) from None

    @property
    def total_energy(self) -> float:
        """Total weighted duration demanded."""
        return sum(ld.weight * ld.spec.duration for ld in self.loads)

    @property
    def all_unit_weight(self) -> bool:
        return all(ld.weight == 1.0 for ld in self.loads)


@dataclass(frozen=True)
class ConsumerType:
    """A consumer type with capped-linear utility.

    ``values`` maps service specs to the marginal utility per unit of power;
    unlisted services are worth zero.  The type never buys more than ``cap``
    units of power in total.
    """

    id: str
    cap: float
    values: tuple[tuple[ServiceSpec, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "cap", float(self.cap))
        object.__setattr__(self, "values", tuple(self.values))
        if self.cap <= 0:
            raise ValidationError("consumer %r: cap must be positive" % (self.id,))
        seen = set()
        for spec, v in self.values:
            if float(v) < 0:
                raise ValidationError(
                    "consumer %r: marginal value must be nonnegative" % (self.id,)
                )
            if spec in seen:
                raise ValidationError(
                    "consumer %r: duplicate service %r" % (self.id, spec)
                )
            seen.add(spec)

    def validate(self, partition: TimePartition) -> None:
        for spec, _ in self.values:
            try:
                spec.validate(partition)
            except ValidationError as exc:
                raise ValidationError("consumer %r: %s" % (self.id, exc)) from None

    def value_of(self, spec: ServiceSpec) -> float:
        for s, v in self.values:
            if s == spec:
                return float(v)
        return 0.0


@dataclass(frozen=True)
class Instance:
    """A validated problem instance."""

    partition: TimePartition
    supply: SupplyProfile
    demand: DemandCollection = field(default_factory=lambda: DemandCollection(()))
    consumers: tuple[ConsumerType, ...] | None = None

    def __post_init__(self):
        if len(self.supply.units) != self.partition.horizon:
            raise ValidationError(
                "supply length %d must equal horizon %d"
                % (len(self.supply.units), self.partition.horizon)
            )
        self.demand.validate(self.partition)
        if self.consumers is not None:
            object.__setattr__(self, "consumers", tuple(self.consumers))
            ids = [c.id for c in self.consumers]
            if len(set(ids)) != len(ids):
                raise ValidationError("consumer ids must be unique")
            for c in self.consumers:
                c.validate(self.partition)


def canonicalize_supply(supply: SupplyProfile, partition: TimePartition) -> SupplyProfile:
    """Sort each segment of the supply nonincreasingly.

    Adequacy is invariant under this: every admissible window is a union of
    whole segments, so allocation columns may be permuted within a segment.
    """
    if len(supply.units) != partition.horizon:
        raise ValidationError(
            "supply length %d must equal horizon %d"
            % (len(supply.units), partition.horizon)
        )
    bp = partition.breakpoints
    out: list[float] = []
    for k in range(1, partition.num_segments + 1):
        out.extend(sorted(supply.units[bp[k - 1]:bp[k]], reverse=True))
    return SupplyProfile(tuple(out))


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParseError(msg)


def _as_int(value, what: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), "%s must be an integer" % what)
    return value


def _as_number(value, what: str) -> float:
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        "%s must be a number" % what,
    )
    return float(value)


def _spec_from_doc(doc, what: str) -> ServiceSpec:
    _require(isinstance(doc, dict), "%s must be an object" % what)
    for key in ("r", "a", "d"):
        _require(key in doc, "%s missing key %r" % (what, key))
    return ServiceSpec(
        duration=_as_int(doc["r"], what + ".r"),
        arrival=_as_int(doc["a"], what + ".a"),
        deadline=_as_int(doc["d"], what + ".d"),
    )


def load_instance(text: str) -> Instance:
    """Parse and validate an instance document.

    Raises ``ParseError`` for malformed documents and ``ValidationError`` for
    well-formed documents that violate an invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("invalid JSON: %s" % exc) from None
    return instance_from_doc(doc)


def instance_from_doc(doc) -> Instance:
    """Build a validated ``Instance`` from a parsed JSON-compatible tree."""
    _require(isinstance(doc, dict), "instance document must be an object")
    _require("partition" in doc, "instance missing key 'partition'")
    _require("supply" in doc, "instance missing key 'supply'")
    _require(isinstance(doc["partition"], list), "'partition' must be an array")
    _require(isinstance(doc["supply"], list), "'supply' must be an array")

    partition = TimePartition(
        tuple(_as_int(b, "partition entry") for b in doc["partition"])
    )
    supply = SupplyProfile(
        tuple(_as_number(u, "supply entry") for u in doc["supply"])
    )

    loads = []
    raw_loads = doc.get("loads", [])
    _require(isinstance(raw_loads, list), "'loads' must be an array")
    for i, ld in enumerate(raw_loads):
        what = "loads[%d]" % i
        spec = _spec_from_doc(ld, what)
        weight = _as_number(ld.get("weight", 1), what + ".weight")
        loads.append(Load(spec=spec, weight=weight))

    consumers = None
    if doc.get("consumers") is not None:
        _require(isinstance(doc["consumers"], list), "'consumers' must be an array")
        consumers = []
        for i, c in enumerate(doc["consumers"]):
            what = "consumers[%d]" % i
            _require(isinstance(c, dict), "%s must be an object" % what)
            _require("id" in c and "cap" in c, "%s missing 'id' or 'cap'" % what)
            _require(isinstance(c["id"], str), "%s.id must be a string" % what)
            raw_values = c.get("values", [])
            _require(isinstance(raw_values, list), "%s.values must be an array" % what)
            values = []
            for j, entry in enumerate(raw_values):
                vwhat = "%s.values[%d]" % (what, j)
                spec = _spec_from_doc(entry, vwhat)
                _require(isinstance(entry, dict) and "v" in entry, "%s missing key 'v'" % vwhat)
                values.append((spec, _as_number(entry["v"], vwhat + ".v")))
            consumers.append(
                ConsumerType(id=c["id"], cap=_as_number(c["cap"], what + ".cap"), values=tuple(values))
            )
        consumers = tuple(consumers)

    return Instance(partition=partition, supply=supply,
                    demand=DemandCollection(tuple(loads)), consumers=consumers)


def instance_to_doc(instance: Instance) -> dict:
    """Serialize an ``Instance`` back to the document tree format."""
    def num(x: float):
        return int(x) if float(x).is_integer() else float(x)

    doc = {
        "partition": list(instance.partition.breakpoints),
        "supply": [num(u) for u in instance.supply.units],
        "loads": [
            {
                "r": ld.spec.duration,
                "a": ld.spec.arrival,
                "d": ld.spec.deadline,
                "weight": num(ld.weight),
            }
            for ld in instance.demand
        ],
    }
    if instance.consumers is not None:
        doc["consumers"] = [
            {
                "id": c.id,
                "cap": num(c.cap),
                "values": [
                    {"r": s.duration, "a": s.arrival, "d": s.deadline, "v": num(v)}
                    for s, v in c.values
                ],
            }
            for c in instance.consumers
        ]
    return doc


def serialize_instance(instance: Instance) -> str:
    return json.dumps(instance_to_doc(instance), indent=2)
