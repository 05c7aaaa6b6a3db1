"""Structure tensor computation and adequacy testing.

The tensor has one axis per segment of the time partition; entry ``k``
equals the remaining supply after discarding the ``k_j`` largest slots of
each segment (the supply tail) minus the total duration still owed to the
loads assuming they were served maximally so far (the demand tail).  Supply
is adequate for the demand exactly when every entry is nonnegative; with
real-valued load weights the same statement holds for the weighted tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotCanonical, TensorSizeError, ValidationError
from .model import DemandCollection, SupplyProfile, TimePartition, canonicalize_supply

__all__ = [
    "StructureTensor",
    "AdequacyReport",
    "tail_dims",
    "compute_tensor",
    "check_adequacy",
    "gale_ryser_check",
    "MAX_TENSOR_ENTRIES",
]

# Dense storage guard: refuse tensors beyond this many entries.
MAX_TENSOR_ENTRIES = 10_000_000

# Absolute tolerance for adequacy verdicts on real-weighted instances.
REAL_TOLERANCE = 1e-9


@dataclass(eq=False)
class StructureTensor:
    """Dense tensor of supply-tail minus demand-tail values."""

    partition: TimePartition
    values: np.ndarray

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    def min_entry(self) -> tuple[tuple[int, ...], float]:
        """Minimum value and its lexicographically smallest index."""
        flat = int(np.argmin(self.values))
        idx = np.unravel_index(flat, self.values.shape)
        return tuple(int(i) for i in idx), self.values[idx].item()


@dataclass(frozen=True)
class AdequacyReport:
    adequate: bool
    min_value: float
    witness: tuple[int, ...]
    surplus: float

    def to_doc(self) -> dict:
        return {
            "adequate": self.adequate,
            "min_value": self.min_value,
            "witness": list(self.witness),
            "surplus": self.surplus,
        }


def tail_dims(partition: TimePartition) -> tuple[int, ...]:
    """Axis sizes of the structure tensor: segment length + 1 per segment."""
    return tuple(length + 1 for length in partition.segment_lengths)


def _check_ops_input(supply: SupplyProfile, demand: DemandCollection,
                     partition: TimePartition) -> None:
    if len(supply.units) != partition.horizon:
        raise ValidationError(
            "supply length %d must equal horizon %d"
            % (len(supply.units), partition.horizon)
        )
    # Window membership of durations is an instance-document invariant; the
    # tensor itself is well defined for any positive duration.
    for i, load in enumerate(demand):
        a, d = load.spec.arrival, load.spec.deadline
        if not (0 <= a < d <= partition.num_segments):
            raise ValidationError(
                "load %d: window indices (%d, %d) invalid for partition" % (i + 1, a, d)
            )
        if load.spec.duration < 1:
            raise ValidationError("load %d: duration must be positive" % (i + 1,))


def _pair_tail_weights(demand: DemandCollection, partition: TimePartition,
                       integral: bool) -> dict[tuple[int, int], np.ndarray]:
    """Per (arrival, deadline) pair: array ``tw`` with ``tw[K]`` the total
    weight of the pair's loads whose duration is at least ``K``."""
    dtype = np.int64 if integral else np.float64
    counts: dict[tuple[int, int], np.ndarray] = {}
    bp = partition.breakpoints
    for load in demand:
        a, d = load.spec.arrival, load.spec.deadline
        window = bp[d] - bp[a]
        cnt = counts.get((a, d))
        if cnt is None:
            cnt = np.zeros(max(window, load.spec.duration) + 1, dtype=dtype)
            counts[(a, d)] = cnt
        elif load.spec.duration >= len(cnt):
            grown = np.zeros(load.spec.duration + 1, dtype=dtype)
            grown[:len(cnt)] = cnt
            cnt = counts[(a, d)] = grown
        cnt[load.spec.duration] += load.weight if not integral else int(load.weight)
    tails = {}
    for (a, d), cnt in counts.items():
        window = bp[d] - bp[a]
        # suffix-sum, truncated to the reachable index range 0..window
        tw = np.cumsum(cnt[::-1])[::-1]
        tails[(a, d)] = tw[:window + 1].copy()
    return tails


def compute_tensor(supply: SupplyProfile, demand: DemandCollection,
                   partition: TimePartition) -> StructureTensor:
    """Evaluate the structure tensor by the backward recursion.

    The all-max entry is 0; stepping axis ``j`` down from coordinate ``k``
    adds the supply of the slot being readmitted and subtracts the weight of
    loads whose window covers segment ``j+1`` and whose duration is at least
    the current window tail sum.  Runs in O(loads + pairs * entries).

    Requires canonical supply (nonincreasing within each segment).
    """
    _check_ops_input(supply, demand, partition)
    if not supply.is_canonical(partition):
        raise NotCanonical("supply must be nonincreasing within each segment")

    dims = tail_dims(partition)
    total = 1
    for size in dims:
        total *= size
    if total > MAX_TENSOR_ENTRIES:
        raise TensorSizeError(
            "tensor with %d entries exceeds the %d-entry dense-storage guard"
            % (total, MAX_TENSOR_ENTRIES)
        )

    integral = supply.is_integral and all(float(ld.weight).is_integer() for ld in demand)
    dtype = np.int64 if integral else np.float64
    tails = _pair_tail_weights(demand, partition, integral)

    nu = partition.num_segments
    bp = partition.breakpoints
    maxes = [size - 1 for size in dims]
    h = np.asarray(supply.units, dtype=dtype)

    W = np.zeros(dims, dtype=dtype)
    # All-max seed.  Zero for every catalog service (duration <= window);
    # durations beyond the window leave an unservable residue.
    seed = 0
    for load in demand:
        residue = load.spec.duration - load.spec.window_length(partition)
        if residue > 0:
            seed -= (int(load.weight) if integral else load.weight) * residue
    W[tuple(maxes)] = seed
    for jz in range(nu - 1, -1, -1):
        block_dims = dims[jz + 1:]
        grids = np.indices(block_dims, dtype=np.int64) if block_dims else None
        # window tail sums over the free (block) axes, per pair covering
        # segment jz+1
        pair_terms: list[tuple[np.ndarray, int, object]] = []
        for (a, d), tw in tails.items():
            if not (a <= jz < d):
                continue
            span = range(jz + 1, d)
            if block_dims and len(span) > 0:
                ssum = grids[:len(span)].sum(axis=0)
            else:
                ssum = 0
            base = sum(maxes[z] for z in range(a, jz))
            pair_terms.append((tw, base, ssum))
        prefix = tuple(maxes[:jz])
        for k in range(maxes[jz], 0, -1):
            dec = None
            for tw, base, ssum in pair_terms:
                term = tw[ssum + base + k]
                dec = term if dec is None else dec + term
            child = W[prefix + (k,)] + h[bp[jz] + k - 1]
            if dec is not None:
                child = child - dec
            W[prefix + (k - 1,)] = child
    return StructureTensor(partition=partition, values=W)


def check_adequacy(supply: SupplyProfile, demand: DemandCollection,
                   partition: TimePartition, tolerance: float | None = None,
                   canonicalize: bool = True) -> AdequacyReport:
    """Decide whether the supply can serve every load within its window.

    Integer instances are judged exactly (minimum entry >= 0); real-weighted
    instances within an absolute tolerance (default 1e-9).  The witness is
    the lexicographically smallest minimizing tail index.
    """
    if canonicalize:
        supply = canonicalize_supply(supply, partition)
    tensor = compute_tensor(supply, demand, partition)
    witness, min_value = tensor.min_entry()
    if tolerance is None:
        tolerance = 0.0 if tensor.values.dtype == np.int64 else REAL_TOLERANCE
    surplus = supply.total - demand.total_energy
    return AdequacyReport(
        adequate=bool(min_value >= -tolerance),
        min_value=min_value,
        witness=witness,
        surplus=surplus,
    )


def gale_ryser_check(supply, durations) -> bool:
    """Single-window adequacy test for integer durations.

    ``supply`` must be a nonincreasing integer sequence; ``durations`` are
    the loads' required slot counts, all admissible anywhere in the horizon.
    Evaluates the classical tail inequalities by the backward recursion.
    """
    h = [int(u) for u in supply]
    if any(h[i] < h[i + 1] for i in range(len(h) - 1)):
        raise NotCanonical("supply must be nonincreasing")
    rs = [int(r) for r in durations]
    if any(r < 1 for r in rs):
        raise ValidationError("durations must be positive")
    n = len(h)
    # at_least[k]: number of loads with duration >= k
    at_least = [0] * (n + 2)
    for r in rs:
        at_least[min(r, n + 1)] += 1
    for k in range(n, 0, -1):
        at_least[k] += at_least[k + 1]
    w = -sum(max(r - n, 0) for r in rs)  # tail value at index n
    for k in range(n, 0, -1):
        w = w + h[k - 1] - at_least[k]
        if w < 0:
            return False
    return True
