import itertools
import random

import numpy as np
import pytest

from flexmarket.market import (
    DualMultipliers,
    PriceMenu,
    clear_market,
    consumer_best_response,
    prices_from_duals,
    service_catalog,
    solve_welfare,
    supplier_optimal_bundle,
    verify_equilibrium,
)
from flexmarket.model import (
    ConsumerType,
    DemandCollection,
    Instance,
    ServiceSpec,
    SupplyProfile,
    TimePartition,
    canonicalize_supply,
)

# ---------------------------------------------------------------------------
# local, implementation-independent helpers


def local_tail_indices(breakpoints):
    dims = [breakpoints[k + 1] - breakpoints[k] + 1 for k in range(len(breakpoints) - 1)]
    return list(itertools.product(*(range(s) for s in dims)))


def local_supply_tail(breakpoints, units, index):
    total = 0.0
    for k, drop in enumerate(index):
        start = breakpoints[k] + drop
        total += sum(units[start:breakpoints[k + 1]])
    return total


def local_coefficient(spec, index):
    dropped = sum(index[spec.arrival:spec.deadline])
    return max(spec.duration - dropped, 0)


def grid_welfare(instance, step=0.01):
    """Brute-force maximum over a grid of purchase levels (two variables)."""
    offers = []
    for ctype in instance.consumers:
        for spec, value in ctype.values:
            offers.append((spec, value, ctype.cap))
    assert len(offers) == 2, "grid oracle written for two purchase variables"
    breakpoints = instance.partition.breakpoints
    units = canonicalize_supply(instance.supply, instance.partition).units
    indices = local_tail_indices(breakpoints)
    tails = np.array([local_supply_tail(breakpoints, units, ix) for ix in indices])
    coef = np.array([
        [local_coefficient(spec, ix) for ix in indices] for spec, _, _ in offers
    ])
    levels_a = np.arange(0, offers[0][2] + step / 2, step)
    levels_b = np.arange(0, offers[1][2] + step / 2, step)
    best = 0.0
    for la in levels_a:
        slack = tails - la * coef[0]
        feasible = coef[1] * levels_b[:, None] <= slack[None, :] + 1e-12
        ok = feasible.all(axis=1)
        if ok.any():
            value = offers[0][1] * la + offers[1][1] * levels_b[ok].max()
            best = max(best, value)
    return best


def worked_instance():
    return Instance(
        partition=TimePartition((0, 2)),
        supply=SupplyProfile((2, 1)),
        demand=DemandCollection(()),
        consumers=(
            ConsumerType(id="A", cap=1.0, values=((ServiceSpec(2, 0, 1), 10.0),)),
            ConsumerType(id="B", cap=3.0, values=((ServiceSpec(1, 0, 1), 4.0),)),
        ),
    )


def random_market_instance(rng: random.Random):
    nu = rng.randint(1, 3)
    horizon = rng.randint(nu, 6)
    interior = sorted(rng.sample(range(1, horizon), nu - 1)) if nu > 1 else []
    partition = TimePartition(tuple([0] + interior + [horizon]))
    supply = SupplyProfile(tuple(rng.randint(0, 4) for _ in range(horizon)))
    catalog = service_catalog(partition)
    consumers = []
    for t in range(rng.randint(1, 4)):
        values = tuple(
            (spec, round(rng.uniform(0.0, 10.0), 3))
            for spec in rng.sample(catalog, min(len(catalog), rng.randint(1, 2)))
        )
        consumers.append(
            ConsumerType(id="type%d" % t, cap=round(rng.uniform(0.2, 3.0), 3), values=values)
        )
    return Instance(
        partition=partition, supply=supply,
        demand=DemandCollection(()), consumers=tuple(consumers),
    )


# ---------------------------------------------------------------------------
# worked fixture


def test_worked_fixture_welfare_and_duals():
    solution = solve_welfare(worked_instance())
    assert solution.welfare == pytest.approx(14.0, abs=1e-9)
    alpha = solution.duals.values
    assert alpha[0] == pytest.approx(4.0, abs=1e-9)
    assert 0.0 - 1e-9 <= alpha[1] <= 2.0 + 1e-9
    assert solution.purchases["A"][ServiceSpec(2, 0, 1)] == pytest.approx(1.0)
    assert solution.purchases["B"][ServiceSpec(1, 0, 1)] == pytest.approx(1.0)


def test_worked_fixture_prices():
    instance = worked_instance()
    solution = solve_welfare(instance)
    menu = prices_from_duals(solution.duals, instance.partition)
    assert menu.price(ServiceSpec(1, 0, 1)) == pytest.approx(4.0, abs=1e-9)
    assert 8.0 - 1e-9 <= menu.price(ServiceSpec(2, 0, 1)) <= 10.0 + 1e-9


def test_worked_fixture_grid_brute_force():
    instance = worked_instance()
    welfare = solve_welfare(instance).welfare
    assert welfare == pytest.approx(grid_welfare(instance), abs=1e-6)


def test_worked_fixture_full_clearing():
    report = clear_market(worked_instance())
    assert report.checks.all_pass()
    assert report.welfare == pytest.approx(14.0, abs=1e-9)
    revenue = report.bundle.revenue(report.menu)
    surplus = report.welfare - revenue
    assert surplus >= -1e-9


def test_perturbed_menu_breaks_equilibrium():
    instance = worked_instance()
    solution = solve_welfare(instance)
    menu = prices_from_duals(solution.duals, instance.partition)
    tampered = dict(menu.prices)
    tampered[ServiceSpec(1, 0, 1)] = 5.0
    bad_menu = PriceMenu(partition=instance.partition, prices=tampered)
    report = verify_equilibrium(
        solution.purchases, bad_menu, instance.supply,
        instance.partition, instance.consumers,
    )
    assert not report.checks.consumer_optimal
    assert not report.checks.market_clear
    assert report.violations["dominated_purchase"] > 0


def test_empty_market_passes_vacuously():
    report = verify_equilibrium(
        {}, PriceMenu(partition=TimePartition((0, 2)), prices={
            spec: 0.0 for spec in service_catalog(TimePartition((0, 2)))
        }),
        SupplyProfile((1, 1)), TimePartition((0, 2)), (),
    )
    assert report.checks.all_pass()
    assert report.welfare == 0.0


# ---------------------------------------------------------------------------
# individual operations


def test_solve_welfare_trivial_cases():
    base = worked_instance()
    zero_values = Instance(
        partition=base.partition, supply=base.supply, demand=base.demand,
        consumers=(ConsumerType(id="A", cap=2.0, values=((ServiceSpec(1, 0, 1), 0.0),)),),
    )
    assert solve_welfare(zero_values).welfare == 0.0
    zero_supply = Instance(
        partition=base.partition, supply=SupplyProfile((0, 0)),
        demand=base.demand, consumers=base.consumers,
    )
    solution = solve_welfare(zero_supply)
    assert solution.welfare == 0.0
    assert all(not p for p in solution.purchases.values())


def test_prices_zero_duals():
    partition = TimePartition((0, 2))
    duals = DualMultipliers(partition=partition, values=np.zeros(3))
    menu = prices_from_duals(duals, partition)
    assert all(p == 0.0 for p in menu.prices.values())


def test_prices_single_active_dual():
    partition = TimePartition((0, 1, 2))
    alpha = np.zeros((2, 2))
    alpha[1, 0] = 1.0
    menu = prices_from_duals(DualMultipliers(partition=partition, values=alpha), partition)
    assert menu.price(ServiceSpec(2, 0, 2)) == pytest.approx(1.0)
    assert menu.price(ServiceSpec(1, 1, 2)) == pytest.approx(1.0)
    assert menu.price(ServiceSpec(1, 0, 2)) == pytest.approx(0.0)


def test_best_response_cases():
    partition = TimePartition((0, 2))
    catalog = service_catalog(partition)
    spec2 = ServiceSpec(2, 0, 1)
    spec1 = ServiceSpec(1, 0, 1)
    menu = PriceMenu(partition=partition, prices={
        spec: {spec1: 4.0, spec2: 8.0}.get(spec, 0.0) for spec in catalog
    })
    a = ConsumerType(id="A", cap=1.0, values=((spec2, 10.0),))
    response = consumer_best_response(a, menu)
    assert response.rate == pytest.approx(2.0)
    assert response.services == (spec2,)
    assert response.level_min == response.level_max == 1.0
    assert response.optimal_surplus == pytest.approx(2.0)

    b = ConsumerType(id="B", cap=3.0, values=((spec1, 4.0),))
    response = consumer_best_response(b, menu)
    assert response.rate == 0.0
    assert spec1 in response.services
    assert (response.level_min, response.level_max) == (0.0, 3.0)

    priced_out = ConsumerType(id="C", cap=2.0, values=((spec1, 1.0),))
    response = consumer_best_response(priced_out, menu)
    assert response.rate == 0.0
    assert response.services == ()
    assert response.optimal_surplus == 0.0


def test_supplier_bundle_worked_menu():
    partition = TimePartition((0, 2))
    catalog = service_catalog(partition)
    menu = PriceMenu(partition=partition, prices={
        spec: {ServiceSpec(1, 0, 1): 4.0, ServiceSpec(2, 0, 1): 10.0}.get(spec, 0.0)
        for spec in catalog
    })
    bundle, revenue = supplier_optimal_bundle(menu, SupplyProfile((2, 1)), partition)
    assert revenue == pytest.approx(14.0, abs=1e-9)
    assert bundle.quantity(ServiceSpec(1, 0, 1)) == pytest.approx(1.0)
    assert bundle.quantity(ServiceSpec(2, 0, 1)) == pytest.approx(1.0)

    zero_menu = PriceMenu(partition=partition, prices={s: 0.0 for s in catalog})
    bundle, revenue = supplier_optimal_bundle(zero_menu, SupplyProfile((2, 1)), partition)
    assert revenue == 0.0

    bundle, revenue = supplier_optimal_bundle(menu, SupplyProfile((0, 0)), partition)
    assert revenue == 0.0
    assert not bundle.quantities


def test_clear_market_no_consumers():
    instance = Instance(
        partition=TimePartition((0, 2)), supply=SupplyProfile((2, 1)),
        demand=DemandCollection(()), consumers=(),
    )
    report = clear_market(instance)
    assert report.checks.all_pass()
    assert report.welfare == 0.0


def test_clear_market_two_types_matches_grid():
    instance = Instance(
        partition=TimePartition((0, 1, 4, 6)),
        supply=SupplyProfile((2, 4, 2, 5, 1, 3)),
        demand=DemandCollection(()),
        consumers=(
            ConsumerType(id="T1", cap=2.0, values=((ServiceSpec(3, 0, 2), 6.0),)),
            ConsumerType(id="T2", cap=3.0, values=((ServiceSpec(2, 1, 3), 5.0),)),
        ),
    )
    report = clear_market(instance)
    assert report.checks.all_pass()
    assert report.welfare == pytest.approx(grid_welfare(instance), abs=1e-6)


def test_random_instances_equilibrium_and_kkt():
    rng = random.Random(616)
    for _ in range(25):
        instance = random_market_instance(rng)
        solution = solve_welfare(instance)
        report = clear_market(instance)
        assert report.checks.all_pass(), report.violations

        # strong duality: primal value equals dual value
        breakpoints = instance.partition.breakpoints
        units = canonicalize_supply(instance.supply, instance.partition).units
        indices = local_tail_indices(breakpoints)
        tails = np.array([local_supply_tail(breakpoints, units, ix) for ix in indices])
        alpha = solution.duals.values.ravel()
        dual_value = float(alpha @ tails) + sum(
            solution.cap_duals[c.id] * c.cap for c in instance.consumers
        )
        assert abs(solution.welfare - dual_value) <= 1e-9 * max(1.0, abs(solution.welfare))

        # complementary slackness on the tail constraints
        used = np.zeros(len(indices))
        for cid, spent in solution.purchases.items():
            for spec, level in spent.items():
                used += level * np.array([local_coefficient(spec, ix) for ix in indices])
        slack = tails - used
        assert (slack >= -1e-9).all()
        assert float(np.max(np.abs(alpha * slack), initial=0.0)) <= 1e-7


def test_welfare_accounting_identity():
    rng = random.Random(515)
    for _ in range(15):
        instance = random_market_instance(rng)
        report = clear_market(instance)
        revenue = report.bundle.revenue(report.menu)
        surplus = 0.0
        by_id = {c.id: c for c in instance.consumers}
        for cid, spent in report.purchases.items():
            for spec, level in spent.items():
                surplus += (by_id[cid].value_of(spec) - report.menu.price(spec)) * level
        assert report.welfare == pytest.approx(revenue + surplus, abs=1e-8)


def test_price_monotonicity_random_duals():
    rng = np.random.default_rng(101)
    pyrng = random.Random(707)
    for _ in range(60):
        nu = pyrng.randint(1, 3)
        horizon = pyrng.randint(nu, 6)
        interior = sorted(pyrng.sample(range(1, horizon), nu - 1)) if nu > 1 else []
        partition = TimePartition(tuple([0] + interior + [horizon]))
        dims = tuple(length + 1 for length in partition.segment_lengths)
        alpha = rng.uniform(0.0, 3.0, size=dims)
        menu = prices_from_duals(DualMultipliers(partition=partition, values=alpha), partition)
        bp = partition.breakpoints
        for a in range(nu):
            for d in range(a + 1, nu + 1):
                window = bp[d] - bp[a]
                prices = [menu.price(ServiceSpec(r, a, d)) for r in range(1, window + 1)]
                assert all(x <= y + 1e-9 for x, y in zip(prices, prices[1:]))
        # nested windows: narrower is never cheaper
        for a, b in itertools.combinations(range(nu + 1), 2):
            for cc, dd in itertools.combinations(range(nu + 1), 2):
                if not (a >= cc and b <= dd):
                    continue
                for r in range(1, bp[b] - bp[a] + 1):
                    narrow = menu.price(ServiceSpec(r, a, b))
                    wide = menu.price(ServiceSpec(r, cc, dd))
                    assert narrow >= wide - 1e-9


def test_zero_value_consumer_buys_nothing():
    partition = TimePartition((0, 2))
    catalog = service_catalog(partition)
    menu = PriceMenu(partition=partition, prices={s: float(s.duration) for s in catalog})
    lazy = ConsumerType(id="Z", cap=5.0, values=((ServiceSpec(1, 0, 1), 0.0),))
    response = consumer_best_response(lazy, menu)
    assert response.rate == 0.0
    assert response.optimal_surplus == 0.0
    assert response.level_min == 0.0


def test_clear_market_deterministic():
    instance = worked_instance()
    first = clear_market(instance).to_doc()
    second = clear_market(instance).to_doc()
    assert first == second
