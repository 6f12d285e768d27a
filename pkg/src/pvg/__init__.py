"""Progressive vision-graph backbone, desk scale.

Three mechanisms, each independently testable: progressive graph construction
with second-order similarity (channel capacity migrates from a Chebyshev
local branch to global graph branches with depth), MaxE neighbor aggregation
(self || max neighbor difference || neighbor mean, then one linear map), and
the GraphLU activation (Gaussian-CDF gating with a learnable relaxation that
counteracts node-feature collapse in deep stacks). Everything runs on a small
reverse-mode tensor core certified against finite differences.
"""

from .aggregators import (
    AGGREGATOR_KINDS,
    AggregatorSpec,
    baseline_aggregate,
    decomposition_check,
    make_aggregator,
    maxe,
    maxe_aggregate,
    maxe_update,
    param_count,
)
from .data import Dataset, load_dataset, make_two_class_patches, oracle_linear_accuracy, save_dataset
from .diagnostics import DiversityTrace, diversity, graph_stats, trace_diversity, write_trace_csv
from .errors import (
    CheckpointError,
    ConfigError,
    CountMismatchError,
    DegenerateInputError,
    DimensionError,
    EmptyReductionError,
    FileFormatError,
    LabelRangeError,
    NonFiniteError,
    PvgError,
)
from .gradcheck import GradCheckReport, grad_check
from .graph import (
    ChannelSchedule,
    GraphTopology,
    LocalBranchParams,
    chebyshev_mask,
    export_edges,
    local_branch,
    pairwise_similarity,
    psgc_schedule,
    second_order_similarity,
    topk_neighbors,
)
from .graphlu import GraphLUParams, gelu, graphlu, graphlu_reference, phi
from .net import (
    Model,
    ModelConfig,
    build_model,
    count_params_flops,
    deep_tiny_config,
    downsample,
    load_checkpoint,
    node_embedding,
    save_checkpoint,
    tiny_config,
)
from .optim import AdamWState, adamw_step, cosine_lr
from .pvgt import read_tensor, write_tensor
from .tensor import DIFFERENTIABLE_OPS, Tensor, concat, elementwise, matmul, reduce, split
from .train import EpochMetrics, OptimizerConfig, RunConfig, ScheduleConfig, evaluate, train

__version__ = "0.1.0"
