"""Benchmark-comparison experiment: gap-to-loads ratio (GNR) traces.

Each trial generates window-flexible loads, synthesizes a supply that is
adequate for them by construction, then replaces every load's service with
an equivalent random combination of single-segment (duration-only) services.
The per-segment shortfalls of the decomposed demand are the model-adequacy
gap; GNR is that gap divided by the number of loads.  Everything is driven
by a counter-based RNG (Philox4x64) keyed on (seed, trial) so traces are
reproducible and trials can run in parallel without changing results.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .flow import adequacy_gap
from .model import DemandCollection, Load, ServiceSpec, SupplyProfile, TimePartition
from .tensor import check_adequacy

__all__ = [
    "DEFAULT_PARTITION",
    "SimConfig",
    "TrialRecord",
    "GnrTrace",
    "window_pairs",
    "smallest_window_pairs",
    "largest_window_pairs",
    "trial_rng",
    "generate_demand",
    "synthesize_adequate_supply",
    "decompose_to_benchmark",
    "compute_gnr",
    "run_experiment",
    "trace_to_csv",
    "trace_summary_doc",
]

# Evening-to-morning parking scenario: hourly slots, breakpoints at the
# admissible arrival/departure times.
DEFAULT_PARTITION = TimePartition((0, 3, 7, 12, 14, 16))

DURATION_LAWS = ("short_uniform", "uniform")


def window_pairs(partition: TimePartition) -> tuple[tuple[int, int], ...]:
    """All (arrival, deadline) pairs, lexicographic."""
    nu = partition.num_segments
    return tuple(
        (a, d) for a in range(nu) for d in range(a + 1, nu + 1)
    )


def _pairs_by_window(partition: TimePartition, count: int, reverse: bool):
    bp = partition.breakpoints

    def window(pair):
        return bp[pair[1]] - bp[pair[0]]

    key = (lambda p: (-window(p), p)) if reverse else (lambda p: (window(p), p))
    return tuple(sorted(window_pairs(partition), key=key)[:count])


def smallest_window_pairs(partition: TimePartition, count: int = 9):
    """The ``count`` narrowest service windows (ties lexicographic)."""
    return _pairs_by_window(partition, count, reverse=False)


def largest_window_pairs(partition: TimePartition, count: int = 9):
    """The ``count`` widest service windows (ties lexicographic)."""
    return _pairs_by_window(partition, count, reverse=True)


@dataclass(frozen=True)
class SimConfig:
    """Experiment parameters.

    ``duration_law`` names how a load's duration is drawn given its window
    length ``w``: ``short_uniform`` is uniform on [1, max(1, w // 2)]
    (loads typically stay far longer than they need to charge), ``uniform``
    is uniform on [1, w].
    """

    partition: TimePartition = DEFAULT_PARTITION
    pair_set: tuple[tuple[int, int], ...] | None = None
    loads_per_pair: int = 200
    trials: int = 1
    seed: int = 0
    duration_law: str = "short_uniform"

    def __post_init__(self):
        if self.pair_set is not None:
            pairs = tuple((int(a), int(d)) for a, d in self.pair_set)
            object.__setattr__(self, "pair_set", pairs)
            valid = set(window_pairs(self.partition))
            for pair in pairs:
                if pair not in valid:
                    raise ValidationError("invalid arrival-deadline pair %r" % (pair,))
        if self.loads_per_pair < 0:
            raise ValidationError("loads_per_pair must be >= 0")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.duration_law not in DURATION_LAWS:
            raise ValidationError(
                "unknown duration law %r (expected one of %r)"
                % (self.duration_law, DURATION_LAWS)
            )

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return self.pair_set if self.pair_set is not None else window_pairs(self.partition)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent per-trial stream: Philox4x64 keyed (seed, trial)."""
    bitgen = np.random.Philox(key=np.array([seed, trial], dtype=np.uint64))
    return np.random.Generator(bitgen)


def _draw_durations(law: str, window: int, size: int, rng) -> np.ndarray:
    if law == "short_uniform":
        hi = max(1, window // 2)
    elif law == "uniform":
        hi = window
    else:
        raise ValidationError("unknown duration law %r" % (law,))
    return rng.integers(1, hi + 1, size=size)


def generate_demand(config: SimConfig, rng: np.random.Generator) -> DemandCollection:
    """``loads_per_pair`` loads per pair, durations i.i.d. per the law."""
    bp = config.partition.breakpoints
    loads = []
    for a, d in config.pairs:
        window = bp[d] - bp[a]
        durations = _draw_durations(config.duration_law, window, config.loads_per_pair, rng)
        loads.extend(
            Load(spec=ServiceSpec(duration=int(r), arrival=a, deadline=d))
            for r in durations
        )
    return DemandCollection(tuple(loads))


def synthesize_adequate_supply(demand: DemandCollection, partition: TimePartition,
                               rng: np.random.Generator) -> SupplyProfile:
    """Column sums of one random feasible schedule per load.

    The drawn schedule itself is a feasible allocation, so the result is
    adequate by construction and total supply equals total demand.
    """
    bp = partition.breakpoints
    units = np.zeros(partition.horizon, dtype=np.int64)
    for load in demand:
        start, stop = bp[load.spec.arrival], bp[load.spec.deadline]
        slots = rng.choice(stop - start, size=load.spec.duration, replace=False)
        units[start + slots] += 1
    return SupplyProfile(tuple(int(u) for u in units))


@lru_cache(maxsize=None)
def _split_count(lengths: tuple[int, ...], total: int) -> int:
    """Number of integer vectors with 0 <= v_i <= lengths[i] summing to total."""
    if total < 0:
        return 0
    if not lengths:
        return 1 if total == 0 else 0
    return sum(_split_count(lengths[1:], total - v)
               for v in range(0, min(lengths[0], total) + 1))


def decompose_to_benchmark(spec: ServiceSpec, partition: TimePartition,
                           rng: np.random.Generator) -> tuple[int, ...]:
    """Replace a service by per-segment durations, uniformly at random among
    all splits respecting segment lengths; segments outside the window get 0."""
    spec.validate(partition)
    lengths = partition.segment_lengths
    window_lengths = tuple(lengths[spec.arrival:spec.deadline])
    remaining = spec.duration
    out = [0] * partition.num_segments
    for i in range(len(window_lengths)):
        rest = window_lengths[i + 1:]
        total = _split_count(window_lengths[i:], remaining)
        pick = int(rng.integers(total))
        acc = 0
        for v in range(0, min(window_lengths[i], remaining) + 1):
            acc += _split_count(rest, remaining - v)
            if pick < acc:
                out[spec.arrival + i] = v
                remaining -= v
                break
    return tuple(out)


@dataclass(frozen=True)
class GnrStats:
    total_gap: int
    gnr: float | None


def compute_gnr(supply: SupplyProfile, demand: DemandCollection,
                decompositions, partition: TimePartition) -> GnrStats:
    """Total per-segment shortfall of the decomposed demand, per load.

    Each segment becomes a single-window instance (its supply slice against
    the loads' per-segment durations); the segment gaps add up.
    """
    decompositions = tuple(tuple(rho) for rho in decompositions)
    if len(decompositions) != len(demand):
        raise ValidationError("need one decomposition per load")
    lengths = partition.segment_lengths
    for i, (load, rho) in enumerate(zip(demand, decompositions)):
        if len(rho) != partition.num_segments:
            raise ValidationError("decomposition %d: wrong number of segments" % (i + 1,))
        if sum(rho) != load.spec.duration:
            raise ValidationError("decomposition %d: durations must sum to %d"
                                  % (i + 1, load.spec.duration))
        for z, v in enumerate(rho):
            if v < 0 or v > lengths[z]:
                raise ValidationError("decomposition %d: segment %d duration out of range"
                                      % (i + 1, z + 1))
            if v > 0 and not (load.spec.arrival <= z < load.spec.deadline):
                raise ValidationError("decomposition %d: service outside window" % (i + 1,))

    bp = partition.breakpoints
    total_gap = 0
    for z in range(partition.num_segments):
        durations = [rho[z] for rho in decompositions if rho[z] > 0]
        if not durations:
            continue
        length = lengths[z]
        sub_partition = TimePartition((0, length))
        sub_supply = SupplyProfile(tuple(supply.units[bp[z]:bp[z + 1]]))
        sub_demand = DemandCollection(tuple(
            Load(spec=ServiceSpec(duration=r, arrival=0, deadline=1)) for r in durations
        ))
        total_gap += adequacy_gap(sub_supply, sub_demand, sub_partition)
    gnr = total_gap / len(demand) if len(demand) else None
    return GnrStats(total_gap=total_gap, gnr=gnr)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    num_loads: int
    total_gap: int
    gnr: float | None


@dataclass(frozen=True)
class GnrTrace:
    records: tuple[TrialRecord, ...]
    mean_gnr: float | None
    std_last_half: float | None


def _run_trial(config: SimConfig, trial: int) -> TrialRecord:
    rng = trial_rng(config.seed, trial)
    demand = generate_demand(config, rng)
    if len(demand) == 0:
        return TrialRecord(trial=trial, num_loads=0, total_gap=0, gnr=None)
    supply = synthesize_adequate_supply(demand, config.partition, rng)
    report = check_adequacy(supply, demand, config.partition)
    if not report.adequate:
        raise AssertionError("synthesized supply must be adequate by construction")
    decompositions = tuple(
        decompose_to_benchmark(load.spec, config.partition, rng) for load in demand
    )
    stats = compute_gnr(supply, demand, decompositions, config.partition)
    return TrialRecord(trial=trial, num_loads=len(demand),
                       total_gap=stats.total_gap, gnr=stats.gnr)


def _trial_star(args) -> TrialRecord:
    return _run_trial(*args)


def run_experiment(config: SimConfig, workers: int = 1) -> GnrTrace:
    """Run all trials (optionally in parallel) and summarize.

    Results are independent of ``workers``: trial ``t`` depends only on
    (seed, t) and records are aggregated in trial order.
    """
    tasks = [(config, t) for t in range(config.trials)]
    if workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = tuple(pool.map(_trial_star, tasks))
    else:
        records = tuple(_run_trial(config, t) for t in range(config.trials))

    values = [rec.gnr for rec in records if rec.gnr is not None]
    last = [rec.gnr for rec in records[len(records) // 2:] if rec.gnr is not None]
    mean_gnr = float(np.mean(values)) if values else None
    std_last_half = float(np.std(last)) if last else None
    return GnrTrace(records=records, mean_gnr=mean_gnr, std_last_half=std_last_half)


def trace_to_csv(trace: GnrTrace) -> str:
    """CSV trace with a trailing summary comment line."""
    lines = ["trial,num_loads,total_gap,gnr"]
    for rec in trace.records:
        gnr = repr(rec.gnr) if rec.gnr is not None else ""
        lines.append("%d,%d,%d,%s" % (rec.trial, rec.num_loads, rec.total_gap, gnr))
    mean = repr(trace.mean_gnr) if trace.mean_gnr is not None else ""
    std = repr(trace.std_last_half) if trace.std_last_half is not None else ""
    lines.append("# mean=%s std_last_half=%s" % (mean, std))
    return "\n".join(lines) + "\n"


def trace_summary_doc(trace: GnrTrace) -> dict:
    return {
        "trials": len(trace.records),
        "mean_gnr": trace.mean_gnr,
        "std_last_half": trace.std_last_half,
    }
