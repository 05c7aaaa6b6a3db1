"""Supply adequacy, power allocation, and market clearing for
window-flexible energy services, plus the GNR benchmark simulation."""

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
from .flow import (
    AllocationMatrix,
    CutWitness,
    FlowNetwork,
    adequacy_gap,
    build_network,
    extract_allocation,
    max_flow,
    min_cut_witness,
)
from .market import (
    BestResponse,
    DualMultipliers,
    EquilibriumReport,
    PriceMenu,
    ServiceBundle,
    clear_market,
    consumer_best_response,
    prices_from_duals,
    service_catalog,
    solve_welfare,
    supplier_optimal_bundle,
    verify_equilibrium,
)
from .model import (
    ConsumerType,
    DemandCollection,
    Instance,
    Load,
    ServiceSpec,
    SupplyProfile,
    TimePartition,
    canonicalize_supply,
    load_instance,
    serialize_instance,
)
from .sim import (
    DEFAULT_PARTITION,
    GnrTrace,
    SimConfig,
    compute_gnr,
    decompose_to_benchmark,
    generate_demand,
    run_experiment,
    synthesize_adequate_supply,
    trace_to_csv,
)
from .tensor import (
    AdequacyReport,
    StructureTensor,
    check_adequacy,
    compute_tensor,
    gale_ryser_check,
)

__version__ = "0.1.0"
