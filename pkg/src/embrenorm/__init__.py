"""Mean-bias removal for sentence embeddings.

Embedding models tend to place every output on the same side of the
sphere: the corpus mean is far from zero.  This package estimates
that mean, removes it from embeddings (by subtraction or by
projection), and measures what the removal does to task scores.

The usual entry points:

* estimate a bias: :func:`estimate_bias` or :class:`MeanAccumulator`
* apply it: :func:`renormalize_r1`, :func:`renormalize_r2`,
  :func:`apply_matrix`
* evaluate: :func:`run_task` / :func:`run_suite` over
  :class:`TaskDataset`, then :func:`compare` and :func:`aggregate`
* study the mechanics: :func:`run_sim` (error propagation),
  :func:`generate` / :func:`sweep_bias` (synthetic benchmarks)
"""

from .core import (
    BiasEstimate,
    DegeneratePolicy,
    EmbeddingMatrix,
    RenormMethod,
    apply_matrix,
    matrix_fingerprint,
    renormalize_r1,
    renormalize_r2,
)
from .corpus import CorpusSample, sample, segment, text_fingerprint
from .harness import RunRecord, run_suite, run_task
from .mean import MeanAccumulator, estimate_bias
from .metrics import (
    RankedList,
    TaskScore,
    bitext_f1,
    knn_classify,
    ndcg_at_k,
    pair_average_precision,
    sigma_for,
    spearman,
    spherical_kmeans_vmeasure,
)
from .report import (
    AggregateRow,
    ComparisonRow,
    GroupBy,
    aggregate,
    compare,
    correlation_report,
    significant_extremes,
)
from .synth import SynthBundle, SynthConfig, generate, sweep_bias
from .tasks import TaskDataset, TaskType
from .theory import SimConfig, SimResult, run_sim

__version__ = "0.1.0"

__all__ = [
    "AggregateRow",
    "BiasEstimate",
    "ComparisonRow",
    "CorpusSample",
    "DegeneratePolicy",
    "EmbeddingMatrix",
    "GroupBy",
    "MeanAccumulator",
    "RankedList",
    "RenormMethod",
    "RunRecord",
    "SimConfig",
    "SimResult",
    "SynthBundle",
    "SynthConfig",
    "TaskDataset",
    "TaskScore",
    "TaskType",
    "aggregate",
    "apply_matrix",
    "bitext_f1",
    "compare",
    "correlation_report",
    "estimate_bias",
    "generate",
    "knn_classify",
    "matrix_fingerprint",
    "ndcg_at_k",
    "pair_average_precision",
    "renormalize_r1",
    "renormalize_r2",
    "run_sim",
    "run_suite",
    "run_task",
    "sample",
    "segment",
    "sigma_for",
    "significant_extremes",
    "spearman",
    "spherical_kmeans_vmeasure",
    "sweep_bias",
    "text_fingerprint",
    "__version__",
]
