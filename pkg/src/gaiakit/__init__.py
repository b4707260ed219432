"""Transfer-learning toolkit for object detection backbones.

Submodules: labelspace (unified category spaces and head surgery), archspace
(elastic architecture grids and sampling rules), costmodel (analytic FLOPs and
latency fits), supernet (weight-sharing toy net with progressive shrinking),
tsas (two-step search and ranking studies), tsds (transfer data selection),
evaluator (simulated/external trainers plus caching), report (deterministic
plots), cli (the `gaia` command).
"""

from .archspace import (
    Architecture,
    DepthQuantile,
    SubSpace,
    UniformRandom,
    builtin_subspaces,
    enumerate_space,
    parse_arch_key,
    sample,
    subspace_by_name,
    union_cardinality,
)
from .costmodel import (
    CostBreakdown,
    HeadConfig,
    detector_flops,
    flops_band,
    latency_estimate,
    latency_fit,
    total_gflops,
)
from .errors import GaiaError
from .evaluator import (
    CachingEvaluator,
    EvalCache,
    EvalRequest,
    EvalResult,
    ExternalEvaluator,
    Fidelity,
    SimulatedEvaluator,
    evaluate_batch,
)
from .labelspace import (
    EmbeddingTable,
    LabelSpace,
    UnifiedLabelSpace,
    build_unified,
    cosine_similarity,
    head_surgery_plan,
    merge_new_dataset,
)
from .supernet import (
    Checkpoint,
    Selector,
    ToyConfig,
    extract_subnet,
    forward,
    head_surgery,
    init_supernet,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
    train_abps,
)
from .tsas import (
    Constraint,
    SearchConfig,
    kendall_tau,
    ranking_study,
    two_step_search,
)
from .tsds import (
    MostSimilar,
    Random,
    TopK,
    load_features,
    represent_vectors,
    select,
    write_features,
)

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "CachingEvaluator",
    "Checkpoint",
    "Constraint",
    "CostBreakdown",
    "DepthQuantile",
    "EmbeddingTable",
    "EvalCache",
    "EvalRequest",
    "EvalResult",
    "ExternalEvaluator",
    "Fidelity",
    "GaiaError",
    "HeadConfig",
    "LabelSpace",
    "MostSimilar",
    "Random",
    "SearchConfig",
    "Selector",
    "SimulatedEvaluator",
    "SubSpace",
    "TopK",
    "ToyConfig",
    "UnifiedLabelSpace",
    "UniformRandom",
    "build_unified",
    "builtin_subspaces",
    "cosine_similarity",
    "detector_flops",
    "enumerate_space",
    "evaluate_batch",
    "extract_subnet",
    "flops_band",
    "forward",
    "head_surgery",
    "head_surgery_plan",
    "init_supernet",
    "kendall_tau",
    "latency_estimate",
    "latency_fit",
    "load_checkpoint",
    "load_features",
    "loss_and_grads",
    "merge_new_dataset",
    "parse_arch_key",
    "ranking_study",
    "represent_vectors",
    "sample",
    "save_checkpoint",
    "select",
    "subspace_by_name",
    "total_gflops",
    "train_abps",
    "two_step_search",
    "union_cardinality",
    "write_features",
]
