"""Lexical aggregation encoders, exact inner-product retrieval, and IR evaluation tools."""

from .analysis import (
    ApproxErrorRow,
    CancellationStats,
    approx_error,
    misalignment_rate,
    pair_errors,
    random_signed_projection,
    sign_cancellation_stats,
    sparse_vectors,
    write_approx_error_csv,
)
from .encoder import (
    ClsProjection,
    ConcatEmbedding,
    EmbeddingSource,
    EncoderConfig,
    EncoderHeads,
    ToyEncoder,
    encode,
    project_cls,
    similarity,
    similarity_parts,
    toy_encode,
    toy_forward,
)
from .errors import (
    BadMagicError,
    EmptySequenceError,
    FormatError,
    SizeMismatchError,
    TruncatedFileError,
    UnsupportedVersionError,
    ValidationError,
)
from .evaluation import (
    MetricResult,
    hit_accuracy_at,
    ndcg_at,
    read_qrels,
    read_run,
    reciprocal_rank_at,
    recall_at,
    write_qrels,
    write_run,
)
from .index import FlatIndex, UNPARTITIONED, check_fingerprints
from .io_formats import (
    EmbeddingDump,
    EmbeddingRecord,
    load_toy_encoder,
    read_corpus,
    read_embedding_dump,
    read_index_file,
    read_partition,
    read_tensors,
    read_training,
    save_toy_encoder,
    write_corpus,
    write_embedding_dump,
    write_index_file,
    write_partition,
    write_tensors,
    write_training,
)
from .lexical import (
    LexicalVector,
    MlmHead,
    PoolingVariant,
    TermWeightHead,
    TokenEmbeddingSequence,
    mlm_project,
    mlm_project_rows,
    softmax_rows,
    term_weight,
    term_weight_rows,
    weighted_max_pool,
)
from .pruning import (
    AggKind,
    AggVector,
    ArgmaxIds,
    PruningKind,
    SlicePartition,
    make_partition,
    prune_full,
    prune_linear,
    prune_semi,
    prune_semi_mean,
    signed_slice_max_rows,
    slice_max_rows,
    slice_mean_rows,
)
from .synth import SynthTask, generate, write_task
from .training import (
    LossWeights,
    TrainResult,
    TrainingExample,
    batch_loss,
    gradients,
    nll_loss,
    train,
)

__all__ = [
    "AggKind",
    "AggVector",
    "ApproxErrorRow",
    "ArgmaxIds",
    "BadMagicError",
    "CancellationStats",
    "ClsProjection",
    "ConcatEmbedding",
    "EmbeddingDump",
    "EmbeddingRecord",
    "EmbeddingSource",
    "EmptySequenceError",
    "EncoderConfig",
    "EncoderHeads",
    "FlatIndex",
    "FormatError",
    "LexicalVector",
    "LossWeights",
    "MetricResult",
    "MlmHead",
    "PoolingVariant",
    "PruningKind",
    "SizeMismatchError",
    "SlicePartition",
    "SynthTask",
    "TermWeightHead",
    "TokenEmbeddingSequence",
    "ToyEncoder",
    "TrainResult",
    "TrainingExample",
    "TruncatedFileError",
    "UNPARTITIONED",
    "UnsupportedVersionError",
    "ValidationError",
    "approx_error",
    "batch_loss",
    "check_fingerprints",
    "encode",
    "generate",
    "gradients",
    "hit_accuracy_at",
    "load_toy_encoder",
    "make_partition",
    "misalignment_rate",
    "mlm_project",
    "mlm_project_rows",
    "ndcg_at",
    "nll_loss",
    "pair_errors",
    "project_cls",
    "prune_full",
    "prune_linear",
    "prune_semi",
    "prune_semi_mean",
    "random_signed_projection",
    "read_corpus",
    "read_embedding_dump",
    "read_index_file",
    "read_partition",
    "read_qrels",
    "read_run",
    "read_tensors",
    "read_training",
    "recall_at",
    "reciprocal_rank_at",
    "save_toy_encoder",
    "sign_cancellation_stats",
    "signed_slice_max_rows",
    "similarity",
    "similarity_parts",
    "slice_max_rows",
    "slice_mean_rows",
    "softmax_rows",
    "sparse_vectors",
    "term_weight",
    "term_weight_rows",
    "toy_encode",
    "toy_forward",
    "train",
    "weighted_max_pool",
    "write_approx_error_csv",
    "write_corpus",
    "write_embedding_dump",
    "write_index_file",
    "write_partition",
    "write_qrels",
    "write_run",
    "write_tensors",
    "write_task",
    "write_training",
]
