"""Learning linear reserve-price policies for second-price auctions by exact
mixed-integer optimization, its relaxation, and classical baselines."""

from .core import (
    AuctionSample,
    Box,
    Dataset,
    LinearModel,
    average_reward,
    graph_membership,
    perfect_info_upper_bound,
    reward,
    reward_vector,
    sale_rate,
    variable_bounds,
)
from .formulation import (
    OptimizationModel,
    SampleBlock,
    build_lifted_block,
    build_lp,
    build_mip,
    build_sample_block,
    extract_model,
    to_lp_text,
)
from .simplex import IterationLimitError, LpSolution, solve_lp
from .solver import MipResult, breakpoint_oracle, root_node_solve, solve_mip
from .baselines import (
    DcParams,
    WolfeParams,
    dc_surrogate,
    dca_fit,
    gradient_ascent,
    optimal_constant_price,
    subgradient,
    surrogate_objective,
)
from .hardness import (
    Graph,
    recover_subgraph,
    reduce_densest_subgraph,
    reduction_reward_formula,
    subgraph_indicator,
)
from .datagen import (
    GenParams,
    generate_lp_gap_family,
    generate_synthetic,
    generate_unbounded_family,
    load_csv,
    normalize_first_price,
    save_csv,
)
from .evalharness import (
    DEFAULT_BOX_GRID,
    DEFAULT_DC_GAMMAS,
    ExperimentConfig,
    ExperimentReport,
    gap_closed,
    report_table_csv,
    run_experiment,
    tune_box,
)

__version__ = "0.1.0"
