"""Aggregation kinetics with simultaneous multi-particle collisions.

Kinetic coefficient tensors are kept in tensor-train or CP form so the
right-hand side of the size-class ODE system evaluates in O(N log N)
work per rank pair instead of O(N**D); generalized Brownian kernels get
an exact constructive TT representation with binomial ranks.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    SimulationConfig,
    build_kernel_set,
    config_from_dict,
    config_to_dict,
    kernel_spec_from_dict,
    kernel_spec_to_dict,
    load_config,
)
from .integrator import (
    InitialCondition,
    MomentSeries,
    StepFailureError,
    StepSizeWarning,
    TimeGrid,
    integrate,
    midpoint_step,
    moments,
    rk2_step,
)
from .kernels import (
    BrownianSpec,
    ConstantSpec,
    CPKernel,
    DenseKernel,
    KernelError,
    SubsetCodec,
    TableSpec,
    TTKernel,
    brownian_element,
    build_brownian_tt,
    constant_cp,
    constant_tt,
    cp_element,
    dense_from_cp,
    dense_from_spec,
    dense_from_tt,
    tt_element,
    tt_max_rank_bound,
)
from .parallel import (
    BenchReport,
    ExecutionPlan,
    PartitionPlan,
    SERIAL_PLAN,
    block_core,
    make_partition,
    run_scaling_benchmark,
)
from .rhs import (
    ConcentrationState,
    KernelSet,
    RhsResult,
    kernel_element,
    rhs_cp_P,
    rhs_cp_Q,
    rhs_dense_P,
    rhs_dense_Q,
    rhs_total,
    rhs_tt_P,
    rhs_tt_Q,
    sample_symmetry_violation,
)

__all__ = [
    "__version__",
    "BrownianSpec",
    "ConstantSpec",
    "TableSpec",
    "TTKernel",
    "CPKernel",
    "DenseKernel",
    "SubsetCodec",
    "KernelError",
    "brownian_element",
    "build_brownian_tt",
    "tt_element",
    "cp_element",
    "dense_from_spec",
    "dense_from_tt",
    "dense_from_cp",
    "tt_max_rank_bound",
    "constant_tt",
    "constant_cp",
    "ConcentrationState",
    "KernelSet",
    "RhsResult",
    "kernel_element",
    "sample_symmetry_violation",
    "rhs_dense_P",
    "rhs_dense_Q",
    "rhs_tt_P",
    "rhs_tt_Q",
    "rhs_cp_P",
    "rhs_cp_Q",
    "rhs_total",
    "TimeGrid",
    "InitialCondition",
    "MomentSeries",
    "StepFailureError",
    "StepSizeWarning",
    "midpoint_step",
    "rk2_step",
    "integrate",
    "moments",
    "PartitionPlan",
    "ExecutionPlan",
    "SERIAL_PLAN",
    "make_partition",
    "block_core",
    "BenchReport",
    "run_scaling_benchmark",
    "ConfigError",
    "SimulationConfig",
    "kernel_spec_from_dict",
    "kernel_spec_to_dict",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "build_kernel_set",
]
