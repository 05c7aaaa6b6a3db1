"""HTTP service wrapping the core package.

Stateless JSON-in/JSON-out endpoints: adequacy checking, allocation
extraction, market clearing, and the GNR simulation.  The handler functions
are plain callables over the pydantic schemas so the CLI can invoke them
in-process with identical semantics.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import flow, market, model, sim
from .errors import (
    FlexmarketError,
    NonIntegerInput,
    NotAdequate,
    NotCanonical,
    ParseError,
    SolverFailure,
    TensorSizeError,
    ValidationError,
)
from .tensor import check_adequacy

__all__ = ["app"] + [
    "InstanceDoc", "CheckRequest", "CheckResponse", "AllocateRequest",
    "AllocateResponse", "MarketRequest", "MarketResponse", "SimulateRequest",
    "SimulateResponse", "handle_check", "handle_allocate", "handle_market",
    "handle_simulate",
]


class LoadDoc(BaseModel):
    r: int
    a: int
    d: int
    weight: float = 1.0


class ValuedServiceDoc(BaseModel):
    r: int
    a: int
    d: int
    v: float


class ConsumerDoc(BaseModel):
    id: str
    cap: float
    values: list[ValuedServiceDoc] = Field(default_factory=list)


class InstanceDoc(BaseModel):
    partition: list[int]
    supply: list[float]
    loads: list[LoadDoc] = Field(default_factory=list)
    consumers: list[ConsumerDoc] | None = None

    def to_instance(self) -> model.Instance:
        return model.instance_from_doc(self.model_dump())

    @classmethod
    def from_instance(cls, instance: model.Instance) -> "InstanceDoc":
        return cls.model_validate(model.instance_to_doc(instance))


class CheckRequest(BaseModel):
    instance: InstanceDoc
    canonicalize: bool = True
    tolerance: float | None = None


class CheckResponse(BaseModel):
    adequate: bool
    min_value: float
    witness: list[int]
    surplus: float


class AllocateRequest(BaseModel):
    instance: InstanceDoc


class CutDoc(BaseModel):
    loads: list[int]
    slots: list[int]
    capacity: int
    required: int


class AllocateResponse(BaseModel):
    adequate: bool
    allocation: list[list[int]] | None = None
    cut: CutDoc | None = None


class MarketRequest(BaseModel):
    instance: InstanceDoc


class PriceDoc(BaseModel):
    r: int
    a: int
    d: int
    price: float


class PurchaseDoc(BaseModel):
    r: int
    a: int
    d: int
    level: float


class BundleEntryDoc(BaseModel):
    r: int
    a: int
    d: int
    quantity: float


class ChecksDoc(BaseModel):
    consumer_optimal: bool
    supplier_optimal: bool
    market_clear: bool


class MarketResponse(BaseModel):
    welfare: float
    prices: list[PriceDoc]
    purchases: dict[str, list[PurchaseDoc]]
    bundle: list[BundleEntryDoc]
    checks: ChecksDoc
    violations: dict[str, float]


class SimulateRequest(BaseModel):
    partition: list[int] | None = None
    pairs: str | list[tuple[int, int]] = "all"
    loads_per_pair: int = 200
    trials: int = 1
    seed: int = 0
    duration_law: str = "short_uniform"
    workers: int = 1


class TrialDoc(BaseModel):
    trial: int
    num_loads: int
    total_gap: int
    gnr: float | None


class SummaryDoc(BaseModel):
    trials: int
    mean_gnr: float | None
    std_last_half: float | None


class SimulateResponse(BaseModel):
    csv: str
    records: list[TrialDoc]
    summary: SummaryDoc


def resolve_pairs(pairs, partition: model.TimePartition):
    """Map the 'all' / 'smallest9' / 'largest9' tags or an explicit pair list
    onto validated arrival-deadline pairs."""
    if isinstance(pairs, str):
        tag = pairs.strip().lower()
        if tag == "all":
            return sim.window_pairs(partition)
        if tag == "smallest9":
            return sim.smallest_window_pairs(partition)
        if tag == "largest9":
            return sim.largest_window_pairs(partition)
        raise ParseError("unknown pair tag %r (expected all|smallest9|largest9)" % (pairs,))
    return tuple((int(a), int(d)) for a, d in pairs)


def handle_check(request: CheckRequest) -> CheckResponse:
    instance = request.instance.to_instance()
    report = check_adequacy(
        instance.supply, instance.demand, instance.partition,
        tolerance=request.tolerance, canonicalize=request.canonicalize,
    )
    return CheckResponse(
        adequate=report.adequate,
        min_value=float(report.min_value),
        witness=list(report.witness),
        surplus=float(report.surplus),
    )


def handle_allocate(request: AllocateRequest) -> AllocateResponse:
    instance = request.instance.to_instance()
    try:
        allocation = flow.extract_allocation(
            instance.supply, instance.demand, instance.partition
        )
    except NotAdequate as exc:
        return AllocateResponse(
            adequate=False,
            cut=CutDoc(**exc.witness.to_doc()),
        )
    return AllocateResponse(adequate=True, allocation=allocation.to_lists())


def handle_market(request: MarketRequest) -> MarketResponse:
    instance = request.instance.to_instance()
    report = market.clear_market(instance)
    doc = report.to_doc()
    return MarketResponse.model_validate(doc)


def handle_simulate(request: SimulateRequest) -> SimulateResponse:
    partition = (
        model.TimePartition(tuple(request.partition))
        if request.partition is not None else sim.DEFAULT_PARTITION
    )
    config = sim.SimConfig(
        partition=partition,
        pair_set=resolve_pairs(request.pairs, partition),
        loads_per_pair=request.loads_per_pair,
        trials=request.trials,
        seed=request.seed,
        duration_law=request.duration_law,
    )
    trace = sim.run_experiment(config, workers=max(1, request.workers))
    return SimulateResponse(
        csv=sim.trace_to_csv(trace),
        records=[TrialDoc(**vars(rec)) for rec in trace.records],
        summary=SummaryDoc(**sim.trace_summary_doc(trace)),
    )


app = FastAPI(
    title="flexmarket",
    description="Adequacy, allocation, and market clearing for "
                "window-flexible energy services",
    version="0.1.0",
)

_INVALID_INPUT = (ParseError, ValidationError, NotCanonical, NonIntegerInput, TensorSizeError)


def _wrap(handler, request):
    try:
        return handler(request)
    except _INVALID_INPUT as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except SolverFailure as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    except FlexmarketError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/check", response_model=CheckResponse)
def check_endpoint(request: CheckRequest) -> CheckResponse:
    return _wrap(handle_check, request)


@app.post("/allocate", response_model=AllocateResponse)
def allocate_endpoint(request: AllocateRequest) -> AllocateResponse:
    return _wrap(handle_allocate, request)


@app.post("/market", response_model=MarketResponse)
def market_endpoint(request: MarketRequest) -> MarketResponse:
    return _wrap(handle_market, request)


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(request: SimulateRequest) -> SimulateResponse:
    return _wrap(handle_simulate, request)
