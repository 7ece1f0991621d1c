"""Community search on heterophilic graphs.

The package splits into an offline encoding phase (exact-hop channel
construction, frequency-aware fusion, full-batch training) and an online
search phase (BFS with similarity teleportation, homophily-adaptive
scoring), plus classical baselines and an experiment harness.
"""

from .backend import active_backend, set_backend
from .encoder import (
    EncoderConfig,
    EncoderState,
    bank_attention,
    forward,
    grad,
    hnd_metric,
    load_checkpoint,
    nll_loss,
    prepare_channels,
    save_checkpoint,
    train,
)
from .errors import (
    AdaptcsError,
    HopBudgetError,
    ParseError,
    SvdConvergenceError,
    TrainingDivergenceError,
    UndefinedMetricError,
    UsageError,
    ValidationError,
)
from .experiment import ExperimentConfig, Report, f1, flip_effect_demo, run_experiment
from .graph import DataSet, Graph, edge_homophily, load_dataset, stratified_split
from .hops import build_channel_set, build_operators, triangle_support_audit
from .lowrank import LatentHopPlan, build_plan, latent_hop_features
from .search import (
    CommunityResult,
    SearchConfig,
    acs,
    build_positive_graph,
    estimate_homophily,
    scs,
)
from .sparse import SparseMatrix, SvdFactors, sym_normalize, truncated_svd

__version__ = "0.1.0"

__all__ = [
    "AdaptcsError",
    "CommunityResult",
    "DataSet",
    "EncoderConfig",
    "EncoderState",
    "ExperimentConfig",
    "Graph",
    "HopBudgetError",
    "LatentHopPlan",
    "ParseError",
    "Report",
    "SearchConfig",
    "SparseMatrix",
    "SvdConvergenceError",
    "SvdFactors",
    "TrainingDivergenceError",
    "UndefinedMetricError",
    "UsageError",
    "ValidationError",
    "acs",
    "active_backend",
    "bank_attention",
    "build_channel_set",
    "build_operators",
    "build_plan",
    "build_positive_graph",
    "edge_homophily",
    "estimate_homophily",
    "f1",
    "flip_effect_demo",
    "forward",
    "grad",
    "hnd_metric",
    "latent_hop_features",
    "load_checkpoint",
    "load_dataset",
    "nll_loss",
    "prepare_channels",
    "run_experiment",
    "save_checkpoint",
    "scs",
    "set_backend",
    "stratified_split",
    "sym_normalize",
    "train",
    "triangle_support_audit",
    "truncated_svd",
]
