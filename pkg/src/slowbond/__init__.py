"""TASEP with a slow bond and its last-passage percolation dual."""

from .errors import (
    BandTooNarrow,
    ConfigError,
    HorizonExceeded,
    IncompleteParallelogram,
    InsufficientData,
    NegativeEpsilon,
    NoAdmissiblePath,
    NonpositiveEpsilon,
    NotOrdered,
    OutOfRange,
    SchemaMismatch,
    SlowBondError,
    TruncationSuspect,
    WindowNotTracked,
)
from .weights import ExplicitWeights, VertexId, WeightField, derive_replica_seed, weight_at

__version__ = "0.1.0"
