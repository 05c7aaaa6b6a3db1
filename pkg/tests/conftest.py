import random

import pytest

from flexmarket.model import (
    DemandCollection,
    Instance,
    Load,
    ServiceSpec,
    SupplyProfile,
    TimePartition,
)

FIG1_BREAKPOINTS = (0, 1, 4, 6)
FIG1_SUPPLY = (2, 4, 2, 5, 1, 3)
FIG1_LOADS = ((2, 0, 2), (3, 0, 2), (5, 0, 3), (2, 1, 3), (2, 1, 2))

# The feasible schedule displayed alongside the example instance.
FIG1_ALLOCATION = (
    (0, 1, 0, 1, 0, 0),
    (0, 1, 1, 1, 0, 0),
    (1, 1, 0, 1, 1, 1),
    (0, 0, 0, 1, 0, 1),
    (0, 1, 0, 1, 0, 0),
)


def make_demand(triples, weights=None):
    weights = weights or [1.0] * len(triples)
    return DemandCollection(tuple(
        Load(spec=ServiceSpec(duration=r, arrival=a, deadline=d), weight=w)
        for (r, a, d), w in zip(triples, weights)
    ))


@pytest.fixture
def fig1():
    partition = TimePartition(FIG1_BREAKPOINTS)
    supply = SupplyProfile(FIG1_SUPPLY)
    demand = make_demand(FIG1_LOADS)
    return Instance(partition=partition, supply=supply, demand=demand)


def random_integer_instance(rng: random.Random, max_segments=3, max_horizon=8,
                            max_loads=6, max_supply=3):
    """A random small instance with unit weights and in-catalog durations."""
    nu = rng.randint(1, max_segments)
    horizon = rng.randint(nu, max_horizon)
    interior = sorted(rng.sample(range(1, horizon), nu - 1)) if nu > 1 else []
    breakpoints = tuple([0] + interior + [horizon])
    partition = TimePartition(breakpoints)
    supply = SupplyProfile(tuple(rng.randint(0, max_supply) for _ in range(horizon)))
    triples = []
    for _ in range(rng.randint(0, max_loads)):
        a = rng.randrange(nu)
        d = rng.randint(a + 1, nu)
        window = breakpoints[d] - breakpoints[a]
        triples.append((rng.randint(1, window), a, d))
    return partition, supply, make_demand(triples)
