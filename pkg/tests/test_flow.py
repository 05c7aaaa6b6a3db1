import random

import pytest

from flexmarket.errors import NonIntegerInput, NotAdequate, ValidationError
from flexmarket.flow import (
    AllocationMatrix,
    adequacy_gap,
    build_network,
    extract_allocation,
    max_flow,
    min_cut_witness,
    _cut_capacity,
)
from flexmarket.model import (
    DemandCollection,
    SupplyProfile,
    TimePartition,
    canonicalize_supply,
)
from flexmarket.tensor import check_adequacy, compute_tensor

from conftest import FIG1_ALLOCATION, make_demand, random_integer_instance
from oracles import feasible_by_search


def test_fig1_network_shape(fig1):
    network = build_network(fig1.supply, fig1.demand, fig1.partition)
    assert network.num_vertices == 13
    assert network.num_slots == 6
    assert network.num_loads == 5
    assert network.num_unit_arcs() == 22


def test_smallest_instance():
    partition = TimePartition((0, 1))
    supply = SupplyProfile((1,))
    demand = make_demand([(1, 0, 1)])
    network = build_network(supply, demand, partition)
    assert network.num_vertices == 4
    assert network.num_unit_arcs() == 1
    value, _ = max_flow(network)
    assert value == 1
    witness = min_cut_witness(network)
    assert witness.capacity == 1
    assert witness.required == 1


def test_empty_demand():
    partition = TimePartition((0, 3))
    supply = SupplyProfile((1, 0, 2))
    demand = DemandCollection(())
    network = build_network(supply, demand, partition)
    assert network.num_loads == 0
    assert max_flow(network)[0] == 0
    allocation = extract_allocation(supply, demand, partition)
    assert allocation.entries == ()


def test_fig1_max_flow_and_allocation(fig1):
    network = build_network(fig1.supply, fig1.demand, fig1.partition)
    value, _ = max_flow(network)
    assert value == 14
    allocation = extract_allocation(fig1.supply, fig1.demand, fig1.partition)
    allocation.validate(fig1.supply, fig1.demand, fig1.partition)
    witness = min_cut_witness(network)
    assert witness.capacity == 14


def test_fig1_displayed_allocation_passes_validator(fig1):
    AllocationMatrix(entries=FIG1_ALLOCATION).validate(
        fig1.supply, fig1.demand, fig1.partition
    )


def _break_row_sum(rows):
    rows[0][1] = 0


def _break_window(rows):
    # keep the row sum at 2 but move one unit outside the admissible window
    rows[0][1] = 0
    rows[0][4] = 1


def _break_column(rows):
    # keep row 4's sum at 2 but overload slot 5 (supply 1)
    rows[3][5] = 0
    rows[3][4] = 1


@pytest.mark.parametrize("mutate, message", [
    (_break_row_sum, "sum"),
    (_break_window, "window"),
    (_break_column, "exceeds supply"),
])
def test_allocation_validator_rejects(fig1, mutate, message):
    rows = [list(row) for row in FIG1_ALLOCATION]
    mutate(rows)
    matrix = AllocationMatrix(entries=tuple(tuple(r) for r in rows))
    with pytest.raises(ValidationError, match=message):
        matrix.validate(fig1.supply, fig1.demand, fig1.partition)


def test_single_window_shortfall():
    partition = TimePartition((0, 3))
    supply = SupplyProfile((2, 1, 0))
    demand = make_demand([(3, 0, 1)])
    network = build_network(supply, demand, partition)
    value, _ = max_flow(network)
    assert value == 2
    witness = min_cut_witness(network)
    assert witness.capacity == 2
    assert witness.required == 3
    # the cut listed in the contract example has the same capacity
    assert _cut_capacity(network, loads=(1,), slots=(1, 2)) == 2


def test_two_segment_not_adequate():
    partition = TimePartition((0, 1, 2))
    supply = SupplyProfile((1, 1))
    demand = make_demand([(2, 1, 2)])
    with pytest.raises(NotAdequate) as excinfo:
        extract_allocation(supply, demand, partition)
    witness = excinfo.value.witness
    assert witness.capacity == 1
    assert witness.required == 2
    assert adequacy_gap(supply, demand, partition) == 1


def test_non_integer_inputs_rejected():
    partition = TimePartition((0, 2))
    demand = make_demand([(1, 0, 1)])
    with pytest.raises(NonIntegerInput):
        build_network(SupplyProfile((1.5, 1)), demand, partition)
    weighted = make_demand([(1, 0, 1)], weights=[2.0])
    with pytest.raises(NonIntegerInput):
        build_network(SupplyProfile((1, 1)), weighted, partition)
    with pytest.raises(NonIntegerInput):
        adequacy_gap(SupplyProfile((1, 1)), weighted, partition)


def test_allocation_deterministic(fig1):
    first = extract_allocation(fig1.supply, fig1.demand, fig1.partition)
    second = extract_allocation(fig1.supply, fig1.demand, fig1.partition)
    assert first == second


def test_gap_examples():
    assert adequacy_gap(
        SupplyProfile((2, 1, 0)), make_demand([(3, 0, 1)]), TimePartition((0, 3))
    ) == 1


def test_gap_zero_iff_adequate_random():
    rng = random.Random(133)
    for _ in range(150):
        partition, supply, demand = random_integer_instance(rng)
        gap = adequacy_gap(supply, demand, partition)
        adequate = check_adequacy(supply, demand, partition).adequate
        assert (gap == 0) == adequate


def test_min_cut_duality_random():
    rng = random.Random(31337)
    for _ in range(200):
        partition, supply, demand = random_integer_instance(rng)
        network = build_network(supply, demand, partition)
        value, _ = max_flow(network)
        witness = min_cut_witness(network)
        assert witness.capacity == value


def test_cut_witness_maps_to_violated_entry():
    rng = random.Random(909)
    found = 0
    while found < 60:
        partition, supply, demand = random_integer_instance(rng)
        supply = canonicalize_supply(supply, partition)
        network = build_network(supply, demand, partition)
        value, _ = max_flow(network)
        required = sum(ld.spec.duration for ld in demand)
        if value == required:
            continue
        found += 1
        witness = min_cut_witness(network)
        assert witness.capacity < required
        bp = partition.breakpoints
        index = tuple(
            sum(1 for j in witness.slots if bp[k - 1] < j <= bp[k])
            for k in range(1, partition.num_segments + 1)
        )
        tensor = compute_tensor(supply, demand, partition)
        assert tensor.values[index] < 0


def test_gap_identity_vs_ungrouped_flow():
    rng = random.Random(2718)
    for _ in range(200):
        partition, supply, demand = random_integer_instance(rng)
        network = build_network(supply, demand, partition)
        value, _ = max_flow(network)
        required = sum(ld.spec.duration for ld in demand)
        assert adequacy_gap(supply, demand, partition) == required - value


def test_gap_monotone_under_augmentation():
    rng = random.Random(14142)
    for _ in range(80):
        partition, supply, demand = random_integer_instance(rng)
        base_value, _ = max_flow(build_network(supply, demand, partition))
        base_gap = adequacy_gap(supply, demand, partition)
        slot = rng.randrange(partition.horizon)
        units = list(int(u) for u in supply.units)
        units[slot] += 1
        bumped = SupplyProfile(tuple(units))
        new_value, _ = max_flow(build_network(bumped, demand, partition))
        new_gap = adequacy_gap(bumped, demand, partition)
        assert new_value >= base_value
        assert base_gap - 1 <= new_gap <= base_gap


def test_allocation_validity_random():
    rng = random.Random(606)
    checked = 0
    while checked < 80:
        partition, supply, demand = random_integer_instance(rng)
        triples = [(ld.spec.duration, ld.spec.arrival, ld.spec.deadline) for ld in demand]
        if not feasible_by_search(partition.breakpoints, supply.units, triples):
            continue
        checked += 1
        allocation = extract_allocation(supply, demand, partition)
        allocation.validate(supply, demand, partition)
