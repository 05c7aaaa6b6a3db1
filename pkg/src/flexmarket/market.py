"""Market clearing for the service catalog via LP duality.

The social planner's problem is a finite LP once consumers are discretized
into finitely many capped-linear types: maximize total utility subject to
the supply-tail constraints (adequacy) and per-type power caps.  The duals
of the tail constraints generate a price menu under which the planner's
allocation is simultaneously a best response for every consumer type and a
revenue-maximizing production bundle for the supplier, so the market clears
at the welfare optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .errors import TensorSizeError, ValidationError
from .model import (
    ConsumerType,
    Instance,
    ServiceSpec,
    SupplyProfile,
    TimePartition,
    canonicalize_supply,
)
from .tensor import tail_dims

__all__ = [
    "PriceMenu",
    "DualMultipliers",
    "ServiceBundle",
    "BestResponse",
    "WelfareSolution",
    "EquilibriumChecks",
    "EquilibriumReport",
    "service_catalog",
    "solve_welfare",
    "prices_from_duals",
    "consumer_best_response",
    "supplier_optimal_bundle",
    "verify_equilibrium",
    "clear_market",
]

SURPLUS_TOL = 1e-7        # consumer surplus loss considered zero
REVENUE_REL_TOL = 1e-7    # relative supplier revenue gap considered zero
_LP_SIZE_GUARD = 50_000_000  # rows * cols guard for the dense LP matrix


def service_catalog(partition: TimePartition) -> tuple[ServiceSpec, ...]:
    """Every admissible service for the partition, ordered by window then
    duration."""
    out = []
    bp = partition.breakpoints
    for a in range(partition.num_segments):
        for d in range(a + 1, partition.num_segments + 1):
            for r in range(1, bp[d] - bp[a] + 1):
                out.append(ServiceSpec(duration=r, arrival=a, deadline=d))
    return tuple(out)


def _supply_tail_grid(supply: SupplyProfile, partition: TimePartition) -> np.ndarray:
    """Remaining supply after dropping the k_j largest slots per segment,
    for every tail index.  Requires canonical supply."""
    dims = tail_dims(partition)
    bp = partition.breakpoints
    nu = partition.num_segments
    acc = np.zeros(dims)
    for z in range(nu):
        seg = np.asarray(supply.units[bp[z]:bp[z + 1]], dtype=float)
        suffix = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        shape = [1] * nu
        shape[z] = dims[z]
        acc = acc + suffix.reshape(shape)
    return acc


def _window_sum_grid(spec: ServiceSpec, partition: TimePartition) -> np.ndarray:
    """Sum of tail-index coordinates over the service's window, per index."""
    dims = tail_dims(partition)
    nu = partition.num_segments
    acc = np.zeros(dims, dtype=np.int64)
    for z in range(spec.arrival, spec.deadline):
        shape = [1] * nu
        shape[z] = dims[z]
        acc = acc + np.arange(dims[z], dtype=np.int64).reshape(shape)
    return acc


def _coefficient_grid(spec: ServiceSpec, partition: TimePartition) -> np.ndarray:
    """Per tail index, the duration still owed after maximal service in the
    dropped slots: [duration - window tail sum]+."""
    return np.maximum(spec.duration - _window_sum_grid(spec, partition), 0).astype(float)


def _guard_lp_size(num_rows: int, num_cols: int) -> None:
    if num_rows * max(num_cols, 1) > _LP_SIZE_GUARD:
        raise TensorSizeError(
            "market LP with %d x %d dense coefficients exceeds the size guard"
            % (num_rows, num_cols)
        )


@dataclass(eq=False)
class DualMultipliers:
    """Nonnegative multipliers on the supply-tail constraints, one per tail
    index."""

    partition: TimePartition
    values: np.ndarray


@dataclass(frozen=True)
class PriceMenu:
    """Per-unit price for every service in the catalog."""

    partition: TimePartition
    prices: dict[ServiceSpec, float]

    def price(self, spec: ServiceSpec) -> float:
        return self.prices[spec]

    def to_doc(self) -> list[dict]:
        return [
            {"r": s.duration, "a": s.arrival, "d": s.deadline, "price": p}
            for s, p in sorted(
                self.prices.items(), key=lambda kv: (kv[0].arrival, kv[0].deadline, kv[0].duration)
            )
        ]


@dataclass(frozen=True)
class ServiceBundle:
    """Quantities of each service produced by the supplier."""

    quantities: dict[ServiceSpec, float] = field(default_factory=dict)

    def quantity(self, spec: ServiceSpec) -> float:
        return self.quantities.get(spec, 0.0)

    def revenue(self, menu: PriceMenu) -> float:
        return sum(q * menu.price(s) for s, q in self.quantities.items())

    def to_doc(self) -> list[dict]:
        return [
            {"r": s.duration, "a": s.arrival, "d": s.deadline, "quantity": q}
            for s, q in sorted(
                self.quantities.items(), key=lambda kv: (kv[0].arrival, kv[0].deadline, kv[0].duration)
            )
            if q != 0.0
        ]


@dataclass(frozen=True)
class WelfareSolution:
    purchases: dict[str, dict[ServiceSpec, float]]
    welfare: float
    duals: DualMultipliers
    cap_duals: dict[str, float]


def solve_welfare(instance: Instance) -> WelfareSolution:
    """Maximize total utility subject to adequacy and per-type caps.

    Returns an optimal primal (per-type purchases), the optimal welfare, and
    optimal duals on the supply-tail constraints.
    """
    partition = instance.partition
    supply = canonicalize_supply(instance.supply, partition)
    consumers = instance.consumers or ()
    dims = tail_dims(partition)
    num_tails = int(np.prod(dims))

    variables: list[tuple[int, ServiceSpec, float]] = []
    for t, ctype in enumerate(consumers):
        for spec, v in ctype.values:
            variables.append((t, spec, float(v)))

    _guard_lp_size(num_tails + len(consumers), len(variables))

    htail = _supply_tail_grid(supply, partition).ravel()
    num_rows = num_tails + len(consumers)
    A = np.zeros((num_rows, len(variables)))
    coef_cache: dict[ServiceSpec, np.ndarray] = {}
    for col, (t, spec, _) in enumerate(variables):
        coef = coef_cache.get(spec)
        if coef is None:
            coef = coef_cache[spec] = _coefficient_grid(spec, partition).ravel()
        A[:num_tails, col] = coef
        A[num_tails + t, col] = 1.0
    b = np.concatenate([htail, [c.cap for c in consumers]])
    c = np.array([v for _, _, v in variables])

    result = simplex.maximize(c, A, b)

    alpha = result.duals[:num_tails]
    if np.any(alpha < -1e-7):
        raise ValidationError("internal: negative tail dual %r" % (alpha.min(),))
    alpha = np.maximum(alpha, 0.0).reshape(dims)

    purchases: dict[str, dict[ServiceSpec, float]] = {c2.id: {} for c2 in consumers}
    for col, (t, spec, _) in enumerate(variables):
        level = float(result.x[col])
        if level > 0.0:
            bucket = purchases[consumers[t].id]
            bucket[spec] = bucket.get(spec, 0.0) + level

    cap_duals = {
        ctype.id: float(max(result.duals[num_tails + t], 0.0))
        for t, ctype in enumerate(consumers)
    }
    return WelfareSolution(
        purchases=purchases,
        welfare=float(result.value),
        duals=DualMultipliers(partition=partition, values=alpha),
        cap_duals=cap_duals,
    )


def prices_from_duals(duals: DualMultipliers, partition: TimePartition) -> PriceMenu:
    """Price each catalog service by the dual-weighted positive-part kernel:
    price = sum over tail indices of alpha * [duration - window tail sum]+."""
    alpha = np.asarray(duals.values, dtype=float)
    if np.any(alpha < 0):
        raise ValidationError("dual multipliers must be nonnegative")
    flat = alpha.ravel()
    bp = partition.breakpoints
    prices: dict[ServiceSpec, float] = {}
    for a in range(partition.num_segments):
        for d in range(a + 1, partition.num_segments + 1):
            window = bp[d] - bp[a]
            ksum = _window_sum_grid(ServiceSpec(1, a, d), partition).ravel()
            # weight of each attainable window tail sum
            hist = np.bincount(ksum, weights=flat, minlength=window + 1)
            levels = np.arange(len(hist))
            for r in range(1, window + 1):
                price = float(np.maximum(r - levels, 0) @ hist)
                prices[ServiceSpec(r, a, d)] = price
    return PriceMenu(partition=partition, prices=prices)


@dataclass(frozen=True)
class BestResponse:
    """The full optimal face of one consumer type's purchase problem.

    ``rate`` is the best attainable per-unit surplus (never negative: buying
    nothing is always available).  When positive, every optimal purchase
    spends the whole cap on maximizing services; at zero any level in
    [0, cap] of any zero-surplus service (or nothing) is optimal.
    """

    rate: float
    services: tuple[ServiceSpec, ...]
    level_min: float
    level_max: float

    @property
    def optimal_surplus(self) -> float:
        return self.rate * self.level_max


def consumer_best_response(ctype: ConsumerType, menu: PriceMenu,
                           tol: float = 1e-9) -> BestResponse:
    """Maximize value minus payment over the type's valued services and the
    option of buying nothing."""
    rates = [(float(v) - menu.price(spec), spec) for spec, v in ctype.values]
    best = max((rate for rate, _ in rates), default=0.0)
    rate = max(0.0, best)
    services = tuple(spec for r, spec in rates if r >= rate - tol)
    if rate > tol:
        level_min = ctype.cap
    else:
        level_min = 0.0
    return BestResponse(rate=rate, services=services,
                        level_min=level_min, level_max=ctype.cap)


def supplier_optimal_bundle(menu: PriceMenu, supply: SupplyProfile,
                            partition: TimePartition) -> tuple[ServiceBundle, float]:
    """Revenue-maximizing production bundle under the adequacy constraints."""
    supply = canonicalize_supply(supply, partition)
    catalog = service_catalog(partition)
    dims = tail_dims(partition)
    num_tails = int(np.prod(dims))
    _guard_lp_size(num_tails, len(catalog))

    A = np.zeros((num_tails, len(catalog)))
    for col, spec in enumerate(catalog):
        A[:, col] = _coefficient_grid(spec, partition).ravel()
    b = _supply_tail_grid(supply, partition).ravel()
    c = np.array([menu.price(spec) for spec in catalog])

    result = simplex.maximize(c, A, b)
    quantities = {
        spec: float(q) for spec, q in zip(catalog, result.x) if q > 0.0
    }
    return ServiceBundle(quantities=quantities), float(result.value)


@dataclass(frozen=True)
class EquilibriumChecks:
    consumer_optimal: bool
    supplier_optimal: bool
    market_clear: bool

    def all_pass(self) -> bool:
        return self.consumer_optimal and self.supplier_optimal and self.market_clear

    def to_doc(self) -> dict:
        return {
            "consumer_optimal": self.consumer_optimal,
            "supplier_optimal": self.supplier_optimal,
            "market_clear": self.market_clear,
        }


@dataclass(frozen=True)
class EquilibriumReport:
    welfare: float
    menu: PriceMenu
    purchases: dict[str, dict[ServiceSpec, float]]
    bundle: ServiceBundle
    checks: EquilibriumChecks
    violations: dict[str, float]

    def to_doc(self) -> dict:
        return {
            "welfare": self.welfare,
            "prices": self.menu.to_doc(),
            "purchases": {
                cid: [
                    {"r": s.duration, "a": s.arrival, "d": s.deadline, "level": lvl}
                    for s, lvl in sorted(
                        spent.items(), key=lambda kv: (kv[0].arrival, kv[0].deadline, kv[0].duration)
                    )
                ]
                for cid, spent in sorted(self.purchases.items())
            },
            "bundle": self.bundle.to_doc(),
            "checks": self.checks.to_doc(),
            "violations": self.violations,
        }


def _bundle_tail_violation(bundle: ServiceBundle, supply: SupplyProfile,
                           partition: TimePartition) -> float:
    """Largest violation of the adequacy constraints by the bundle."""
    supply = canonicalize_supply(supply, partition)
    htail = _supply_tail_grid(supply, partition)
    used = np.zeros_like(htail)
    for spec, q in bundle.quantities.items():
        used = used + q * _coefficient_grid(spec, partition)
    return float(np.max(used - htail, initial=0.0))


def verify_equilibrium(purchases: dict[str, dict[ServiceSpec, float]],
                       menu: PriceMenu, supply: SupplyProfile,
                       partition: TimePartition,
                       consumers: tuple[ConsumerType, ...],
                       bundle: ServiceBundle | None = None) -> EquilibriumReport:
    """Check the three equilibrium conditions for a candidate state.

    Consumer optimality: each type's purchase loses at most ``SURPLUS_TOL``
    surplus against its best response.  Supplier optimality: the bundle is
    adequacy-feasible and attains the revenue-maximal value (of the value,
    not of the bundle itself).  Market clearing: purchases aggregate exactly
    to the bundle and no type holds a positive purchase with strictly
    negative surplus (such demand would not materialize at the menu).
    Failures are reported, never thrown.
    """
    by_id = {c.id: c for c in consumers}
    unknown = set(purchases) - set(by_id)
    if unknown:
        raise ValidationError("purchases reference unknown consumer ids %r" % sorted(unknown))

    welfare = 0.0
    max_loss = 0.0
    max_dominated = 0.0
    feasible = True
    for ctype in consumers:
        spent = purchases.get(ctype.id, {})
        response = consumer_best_response(ctype, menu)
        achieved = 0.0
        total_level = 0.0
        for spec, level in spent.items():
            rate = ctype.value_of(spec) - menu.price(spec)
            achieved += rate * level
            welfare += ctype.value_of(spec) * level
            total_level += level
            if level > 1e-9:
                max_dominated = max(max_dominated, -rate)
            if level < -1e-12:
                feasible = False
        if total_level > ctype.cap + 1e-9:
            feasible = False
        max_loss = max(max_loss, response.optimal_surplus - achieved)

    aggregated: dict[ServiceSpec, float] = {}
    for spent in purchases.values():
        for spec, level in spent.items():
            aggregated[spec] = aggregated.get(spec, 0.0) + level
    if bundle is None:
        bundle = ServiceBundle(quantities=dict(aggregated))

    keys = set(aggregated) | set(bundle.quantities)
    clearing_mismatch = max(
        (abs(aggregated.get(s, 0.0) - bundle.quantity(s)) for s in keys),
        default=0.0,
    )

    revenue = bundle.revenue(menu)
    _, optimal_revenue = supplier_optimal_bundle(menu, supply, partition)
    revenue_gap = optimal_revenue - revenue
    tail_violation = _bundle_tail_violation(bundle, supply, partition)

    checks = EquilibriumChecks(
        consumer_optimal=bool(feasible and max_loss <= SURPLUS_TOL),
        supplier_optimal=bool(
            revenue_gap <= REVENUE_REL_TOL * max(1.0, abs(optimal_revenue))
            and tail_violation <= SURPLUS_TOL
        ),
        market_clear=bool(clearing_mismatch == 0.0 and max_dominated <= SURPLUS_TOL),
    )
    violations = {
        "consumer_surplus_loss": max(max_loss, 0.0),
        "supplier_revenue_gap": max(revenue_gap, 0.0),
        "bundle_tail_violation": tail_violation,
        "clearing_mismatch": clearing_mismatch,
        "dominated_purchase": max(max_dominated, 0.0),
    }
    return EquilibriumReport(
        welfare=welfare,
        menu=menu,
        purchases=purchases,
        bundle=bundle,
        checks=checks,
        violations=violations,
    )


def clear_market(instance: Instance) -> EquilibriumReport:
    """Welfare LP, dual prices, aggregated bundle, equilibrium verification.

    The constructed state passes all three checks: the welfare optimum is
    supported as a competitive equilibrium by the tail-constraint duals.
    """
    solution = solve_welfare(instance)
    menu = prices_from_duals(solution.duals, instance.partition)
    return verify_equilibrium(
        purchases=solution.purchases,
        menu=menu,
        supply=instance.supply,
        partition=instance.partition,
        consumers=instance.consumers or (),
    )
