"""skelgest: skeletal hand-gesture classification from 2-D pose sequences.

The pipeline: parse 5x14 frame matrices into validated sequences, smooth the
coordinate tracks, normalize each sliding window against the chin reference
point, and classify windows with hand-written LSTM or temporal-convolution
models under patient-held-out cross-validation.
"""

from .skeleton import (
    ALL_GESTURE_IDS,
    DEFAULT_JOINT_MAP,
    DYNAMIC_GESTURE_IDS,
    N_JOINTS,
    STATIC_GESTURE_IDS,
    GestureKind,
    GestureLabel,
    GestureSequence,
    Joint2D,
    JointIndexMap,
    SkeletalFrame,
    UnknownLabelError,
    class_counts,
    label_description,
    label_kind,
    sequence_arrays,
    validate_sequence,
)
from .ingest import (
    DEFAULT_FOLD_BOUNDARIES,
    DataError,
    Dataset,
    FoldSplit,
    ParseError,
    Provenance,
    SynthConfig,
    assign_folds,
    dataset_checksum,
    generate_synthetic,
    load_dataset,
    parse_skeletal_file,
    serialize_frames,
    write_dataset,
)
from .preprocess import (
    DegenerateReferenceError,
    FeatureWindow,
    NormMethod,
    RawWindow,
    SavgolSpec,
    WindowSource,
    WindowSpec,
    feature_dim,
    normalize_window,
    preprocess_sequence,
    savgol_coefficients,
    savgol_smooth,
    slide_windows,
    smooth_series,
    to_polar,
)

__version__ = "0.1.0"
