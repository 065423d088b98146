"""fairdisc: equal splits of item sets under non-additive valuations.

Pipeline: lay items on a necklace, search for cuts giving every agent equal
multilinear value per color with few fractional items, round independently,
then measure discrepancy / transfer fairness or buy off residual envy with
payments.
"""

from .bitsets import bits, full_mask, mask_of, popcount
from .errors import CapacityError, InvariantViolation, PositiveCycleError
from .experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    ResultRecord,
    ScalingFit,
    fit_scaling,
    records_to_csv,
    run,
    run_single,
    write_csv,
)
from .measures import (
    DiscrepancyValue,
    TransferValuation,
    TransferValue,
    disc_of_coloring,
    disc_opt_bruteforce,
    transfer_disc_of_coloring,
    transfer_imbalance,
    vprime_transform,
)
from .multilinear import McEstimate, eval_exact, eval_mc, fractional_support
from .rounding import RoundingReport, mcdiarmid_tail, round_best_of, round_once
from .splitter import (
    CutVector,
    NecklaceLayout,
    SearchConfig,
    SplitReport,
    cuts_to_coloring,
    max_intervals_per_color,
    split_additive_exact,
    split_necklace,
)
from .subsidy import (
    Allocation,
    EnvyGraph,
    PaymentVector,
    SubsidyReport,
    best_reassignment,
    build_envy_graph,
    compute_payments,
    envy_free_with_subsidy,
    has_positive_cycle,
)
from .valuations import (
    AdditiveValuation,
    CallableValuation,
    CoverageValuation,
    MarginalReport,
    TableValuation,
    ValuationOracle,
    load_instances,
    random_instance,
    save_instances,
    verify_marginal_bound,
)

__version__ = "0.1.0"
