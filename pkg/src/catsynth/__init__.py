"""Seeded synthetic categorical datasets and benchmarks for recommender building blocks."""

__version__ = "0.1.0"

from .config import (  # noqa: E402
    CombinationSpec,
    CorrelationSpec,
    DatasetConfig,
    Distribution,
    FeatureSpec,
    NoiseSpec,
    TargetSpec,
    register_function,
)
from .dataset import MISSING, ColumnMeta, Dataset  # noqa: E402
from .errors import CatSynthError, ConfigError, GenerationError, UsageError  # noqa: E402
from .generator import (  # noqa: E402
    apply_combination,
    apply_correlation,
    drop_features,
    generate_dataset,
    generate_target,
    inject_categorical_noise,
    inject_missing,
    sample_feature,
)
from .hashing import derive_column_seed, item_hash  # noqa: E402
