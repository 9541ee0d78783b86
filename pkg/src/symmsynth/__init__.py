"""Metric learning with symmetrical synthetic hard negatives.

The package augments each class's two batch samples with their mutual
reflections, mines the hardest negative among the resulting candidate pool,
and plugs the mined negatives into four standard embedding losses.
"""

from .errors import (
    ClassTooSmall,
    ConfigError,
    DimensionMismatch,
    EmptyStats,
    InsufficientClasses,
    InvalidFraction,
    InvalidShape,
    KTooLarge,
    LengthMismatch,
    NoNegatives,
    NonFiniteLoss,
    NoPositivePairs,
    NotNormalized,
    ParseError,
    RankOutOfRange,
    SameClass,
    SymmSynthError,
    TieDetected,
    ZeroVector,
)
from .gradcheck import GradientReport, finite_difference_check, loss_with_gradient
from .losses import (
    LossConfig,
    LossOutput,
    angular_loss,
    angular_symm,
    evaluate_loss,
    lifted_loss,
    lifted_symm,
    npair_loss,
    npair_symm,
    triplet_loss,
    triplet_symm,
)
from .mining import (
    AngularTripletCandidate,
    MiningResult,
    NegativePairCandidate,
    SelectionStats,
    enumerate_angular_triplets,
    enumerate_negative_pairs,
    hardest,
    selection_ratio,
)
from .synthesis import (
    AugmentedClassGroup,
    SynthesisParams,
    augment_class_pair,
    project,
    synthesize,
)
from .vectors import (
    EmbeddingBatch,
    cosine_similarity,
    dot_product,
    euclidean_distance,
    pairwise_matrix,
    unit_vector,
)

__version__ = "0.1.0"
