"""End-to-end classification pipeline and patient-held-out cross-validation.

Two evaluation protocols:

- ``MULTICLASS``: two softmax models per run, one over the 15 static gestures
  and one over the 14 dynamic gestures; each test sequence is routed to the
  model matching its ground-truth kind, and the headline number is the
  unweighted mean of the two model accuracies.
- ``MULTICLASS_BINARY``: 29 one-vs-rest sigmoid models, one per gesture; each
  is scored on every test sequence (positive iff its mean window probability
  exceeds 0.5) and the suite average weights all 29 accuracies equally.

A sequence's prediction always aggregates its windows by averaging the
per-window probability vectors before the argmax/threshold, so long
sequences are not penalized for having more windows.  Optional length
routing trains the whole protocol twice -- once per window length -- and
dispatches each test sequence by its raw frame count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol as TypingProtocol, Sequence

import numpy as np

from .skeleton import (
    ALL_GESTURE_IDS,
    DYNAMIC_GESTURE_IDS,
    STATIC_GESTURE_IDS,
    GestureKind,
    GestureSequence,
    JointIndexMap,
)
from .ingest import Dataset, FoldSplit
from .preprocess import (
    FeatureWindow,
    NormMethod,
    SavgolSpec,
    WindowSpec,
    feature_dim,
    preprocess_sequence,
)
from .neuralnet import (
    HeadKind,
    LstmSpec,
    ModelParameters,
    TcnSpec,
    TrainConfig,
    fit,
    forward,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
)
from .metrics import (
    BinaryClassResult,
    BinarySuiteMetrics,
    ConfusionMatrix,
    EvaluationReport,
    FoldReport,
    binary_suite_metrics,
    confusion,
)


class Protocol(Enum):
    """How the gesture set is carved into trainable models."""

    MULTICLASS = "multiclass"
    MULTICLASS_BINARY = "multiclass-binary"


class NetKind(Enum):
    LSTM = "lstm"
    TCN = "tcn"


class MissingClassError(RuntimeError):
    """A fold's training split lacks examples of a class its model must learn."""


class FoldCoverageError(RuntimeError):
    """The fold assignment leaves some fold without usable train or test data."""


@dataclass(frozen=True)
class PrepSettings:
    """Feature extraction shared by training and evaluation."""

    method: NormMethod = NormMethod.M3
    window: WindowSpec = field(default_factory=lambda: WindowSpec(32))
    savgol: SavgolSpec | None = field(default_factory=SavgolSpec)
    include_confidence: bool = False

    @property
    def feature_dim(self) -> int:
        return feature_dim(self.method, self.include_confidence)

    def features(
        self, seq: GestureSequence, joint_map: JointIndexMap
    ) -> list[FeatureWindow]:
        return preprocess_sequence(
            seq,
            self.method,
            self.window,
            joint_map,
            savgol_spec=self.savgol,
            include_confidence=self.include_confidence,
        )


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a training/evaluation run besides the data."""

    protocol: Protocol = Protocol.MULTICLASS
    net: NetKind = NetKind.LSTM
    prep: PrepSettings = field(default_factory=PrepSettings)
    long_window: int | None = None
    route_threshold: int | None = None
    lstm_hidden: int = 128
    tcn_channels: int = 64
    tcn_kernel: int = 3
    tcn_dilations: tuple[int, ...] = (1, 2, 4, 8)
    train: TrainConfig = field(default_factory=TrainConfig)
    rebalance: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.long_window is not None and self.long_window <= self.prep.window.length:
            raise ValueError(
                f"long_window ({self.long_window}) must exceed the base window "
                f"({self.prep.window.length})"
            )
        if self.route_threshold is not None and self.long_window is None:
            raise ValueError("route_threshold is only meaningful with long_window set")

    def arch_spec(self, n_classes: int):
        d = self.prep.feature_dim
        if self.net is NetKind.LSTM:
            return LstmSpec(input_dim=d, hidden_dim=self.lstm_hidden, n_classes=n_classes)
        return TcnSpec(
            input_dim=d,
            channels=self.tcn_channels,
            kernel=self.tcn_kernel,
            dilations=self.tcn_dilations,
            n_classes=n_classes,
        )


@dataclass(frozen=True)
class LengthRouter:
    """Send short sequences to one model set and long ones to another.

    A sequence of T raw frames (before smoothing or windowing) goes to the
    ``short`` route when T <= threshold, else to ``long``.
    """

    threshold: int

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError(f"threshold must be >= 1, got {self.threshold}")

    def route(self, n_frames: int) -> str:
        return "short" if n_frames <= self.threshold else "long"


@dataclass(frozen=True)
class TrainJob:
    """One model's training inputs, handed to a classifier factory."""

    name: str
    labels: tuple[str, ...]
    head: HeadKind
    windows: tuple[FeatureWindow, ...]
    targets: np.ndarray
    window_length: int
    init_seed: int
    shuffle_seed: int


class SequenceClassifier(TypingProtocol):
    """Anything that maps feature windows to per-window class probabilities."""

    labels: tuple[str, ...]

    def predict_windows(self, windows: Sequence[FeatureWindow]) -> np.ndarray:
        """Return (N, K) probabilities, one row per window."""
        ...


ClassifierFactory = Callable[[TrainJob], SequenceClassifier]


def stack_windows(windows: Sequence[FeatureWindow]) -> np.ndarray:
    """(N, W, D) array from a list of feature windows."""
    if not windows:
        raise ValueError("no windows to stack")
    return np.stack([w.data for w in windows])


@dataclass
class NetworkClassifier:
    """A trained neural model plus the label order its outputs refer to."""

    labels: tuple[str, ...]
    model: ModelParameters

    _BATCH = 512

    def predict_windows(self, windows: Sequence[FeatureWindow]) -> np.ndarray:
        x = stack_windows(windows)
        parts = [
            forward(self.model, x[i : i + self._BATCH])
            for i in range(0, x.shape[0], self._BATCH)
        ]
        return np.concatenate(parts, axis=0)


@dataclass
class OracleClassifier:
    """Label-reading stand-in for a trained model.

    Emits probability 1 for each window's true class, which makes overall
    pipeline plumbing testable independently of training quality: with this
    classifier substituted, every evaluation metric must come out perfect.
    """

    labels: tuple[str, ...]
    head: HeadKind = HeadKind.SOFTMAX

    def predict_windows(self, windows: Sequence[FeatureWindow]) -> np.ndarray:
        n, k = len(windows), len(self.labels)
        if self.head is HeadKind.SIGMOID:
            out = np.zeros((n, 1))
            for i, w in enumerate(windows):
                out[i, 0] = 1.0 if w.source.label.id == self.labels[0] else 0.0
            return out
        out = np.zeros((n, k))
        index = {gid: j for j, gid in enumerate(self.labels)}
        for i, w in enumerate(windows):
            gid = w.source.label.id
            if gid in index:
                out[i, index[gid]] = 1.0
        return out


def oracle_factory(job: TrainJob) -> SequenceClassifier:
    """Classifier factory that ignores training data entirely."""
    return OracleClassifier(labels=job.labels, head=job.head)


def network_factory(config: RunConfig) -> ClassifierFactory:
    """Factory that initializes and fits the configured architecture."""

    def build(job: TrainJob) -> SequenceClassifier:
        n_classes = 1 if job.head is HeadKind.SIGMOID else len(job.labels)
        spec = config.arch_spec(n_classes)
        model = init_parameters(spec, job.head, seed=job.init_seed)
        train_cfg = replace(config.train, shuffle_seed=job.shuffle_seed)
        x = stack_windows(job.windows)
        result = fit(model, x, job.targets, train_cfg)
        return NetworkClassifier(labels=job.labels, model=result.model)

    return build


def aggregate_windows(window_probs: np.ndarray) -> np.ndarray:
    """Mean probability vector across a sequence's windows."""
    probs = np.asarray(window_probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError(f"expected (N, K) window probabilities, got {probs.shape}")
    return probs.mean(axis=0)


def predict_label(mean_probs: np.ndarray, labels: Sequence[str]) -> str:
    """Argmax over the averaged probabilities; ties go to the lowest index."""
    if len(mean_probs) != len(labels):
        raise ValueError(f"{len(mean_probs)} probabilities vs {len(labels)} labels")
    return labels[int(np.argmax(mean_probs))]


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def _assert_patient_disjoint(
    train_patients: Sequence[int], test_patients: Sequence[int]
) -> None:
    """Hard runtime guarantee that no patient appears on both sides of a fold."""
    overlap = set(train_patients) & set(test_patients)
    assert not overlap, (
        f"patients {sorted(overlap)} appear in both train and test splits; "
        "patient-held-out evaluation is invalid"
    )


@dataclass
class ProtocolModelSet:
    """All classifiers for one protocol at one window length."""

    protocol: Protocol
    prep: PrepSettings
    classifiers: dict[str, SequenceClassifier]

    KIND_KEYS = {GestureKind.STATIC: "static", GestureKind.DYNAMIC: "dynamic"}


@dataclass
class TrainedProtocol:
    """One or two window-length routes of trained models plus the run config."""

    config: RunConfig
    routes: dict[str, ProtocolModelSet]
    router: LengthRouter | None = None

    def route_for(self, seq: GestureSequence) -> ProtocolModelSet:
        if self.router is None:
            return self.routes["main"]
        return self.routes[self.router.route(seq.n_frames)]


def _kind_labels(kind: GestureKind) -> tuple[str, ...]:
    return STATIC_GESTURE_IDS if kind is GestureKind.STATIC else DYNAMIC_GESTURE_IDS


def _collect_windows(
    seqs: Sequence[GestureSequence], prep: PrepSettings, joint_map: JointIndexMap
) -> list[FeatureWindow]:
    out: list[FeatureWindow] = []
    for seq in seqs:
        out.extend(prep.features(seq, joint_map))
    return out


def _rebalanced_indices(targets: np.ndarray) -> np.ndarray:
    """Duplicate positive examples (cyclically) until they match the negatives."""
    pos = np.flatnonzero(targets > 0.5)
    neg = np.flatnonzero(targets <= 0.5)
    if len(pos) == 0 or len(neg) == 0 or len(pos) >= len(neg):
        return np.arange(targets.size)
    upsampled = np.resize(pos, len(neg))
    return np.sort(np.concatenate([neg, upsampled]))


def _train_route(
    train_seqs: Sequence[GestureSequence],
    config: RunConfig,
    prep: PrepSettings,
    joint_map: JointIndexMap,
    factory: ClassifierFactory,
    fold: int,
    route_tag: int,
    fold_name: str,
) -> ProtocolModelSet:
    classifiers: dict[str, SequenceClassifier] = {}
    if config.protocol is Protocol.MULTICLASS:
        for kind_idx, kind in enumerate((GestureKind.STATIC, GestureKind.DYNAMIC)):
            labels = _kind_labels(kind)
            subset = [s for s in train_seqs if s.label.kind is kind]
            windows = _collect_windows(subset, prep, joint_map)
            present = {w.source.label.id for w in windows}
            missing = [gid for gid in labels if gid not in present]
            if missing:
                raise MissingClassError(
                    f"{fold_name}: training split has no examples of {missing} "
                    f"for the {kind.value} model"
                )
            index = {gid: i for i, gid in enumerate(labels)}
            targets = np.array(
                [index[w.source.label.id] for w in windows], dtype=np.int64
            )
            key = ProtocolModelSet.KIND_KEYS[kind]
            classifiers[key] = factory(
                TrainJob(
                    name=f"{fold_name}-{key}",
                    labels=labels,
                    head=HeadKind.SOFTMAX,
                    windows=tuple(windows),
                    targets=targets,
                    window_length=prep.window.length,
                    init_seed=_derived_seed(config.seed, fold, route_tag, kind_idx, 0),
                    shuffle_seed=_derived_seed(config.seed, fold, route_tag, kind_idx, 1),
                )
            )
    else:
        windows = _collect_windows(train_seqs, prep, joint_map)
        if not windows:
            raise MissingClassError(f"{fold_name}: training split produced no windows")
        for class_idx, gid in enumerate(ALL_GESTURE_IDS):
            targets = np.array(
                [1.0 if w.source.label.id == gid else 0.0 for w in windows]
            )
            n_pos = int(targets.sum())
            if n_pos == 0 or n_pos == len(targets):
                raise MissingClassError(
                    f"{fold_name}: one-vs-rest model for {gid} needs both positive "
                    f"and negative training examples (got {n_pos} positives "
                    f"of {len(targets)})"
                )
            job_windows = tuple(windows)
            job_targets = targets
            if config.rebalance:
                keep = _rebalanced_indices(targets)
                job_windows = tuple(windows[i] for i in keep)
                job_targets = targets[keep]
            classifiers[gid] = factory(
                TrainJob(
                    name=f"{fold_name}-{gid}",
                    labels=(gid,),
                    head=HeadKind.SIGMOID,
                    windows=job_windows,
                    targets=job_targets,
                    window_length=prep.window.length,
                    init_seed=_derived_seed(config.seed, fold, route_tag, class_idx, 0),
                    shuffle_seed=_derived_seed(config.seed, fold, route_tag, class_idx, 1),
                )
            )
    return ProtocolModelSet(protocol=config.protocol, prep=prep, classifiers=classifiers)


def train_protocol(
    train_seqs: Sequence[GestureSequence],
    config: RunConfig,
    joint_map: JointIndexMap,
    factory: ClassifierFactory | None = None,
    fold: int = 0,
    fold_name: str = "run",
) -> TrainedProtocol:
    """Train every model the configured protocol requires on one split."""
    if factory is None:
        factory = network_factory(config)
    routes: dict[str, ProtocolModelSet] = {}
    if config.long_window is None:
        routes["main"] = _train_route(
            train_seqs, config, config.prep, joint_map, factory, fold, 0, fold_name
        )
        router = None
    else:
        short_prep = config.prep
        long_prep = replace(
            config.prep,
            window=WindowSpec(config.long_window, config.prep.window.stride),
        )
        routes["short"] = _train_route(
            train_seqs, config, short_prep, joint_map, factory, fold, 0,
            f"{fold_name}-short",
        )
        routes["long"] = _train_route(
            train_seqs, config, long_prep, joint_map, factory, fold, 1,
            f"{fold_name}-long",
        )
        threshold = (
            config.route_threshold
            if config.route_threshold is not None
            else config.prep.window.length
        )
        router = LengthRouter(threshold)
    return TrainedProtocol(config=config, routes=routes, router=router)


def predict_sequence(
    trained: TrainedProtocol, seq: GestureSequence, joint_map: JointIndexMap
) -> str:
    """Predicted gesture id for one sequence under the MULTICLASS protocol."""
    model_set = trained.route_for(seq)
    key = ProtocolModelSet.KIND_KEYS[seq.label.kind]
    clf = model_set.classifiers[key]
    windows = model_set.prep.features(seq, joint_map)
    mean = aggregate_windows(clf.predict_windows(windows))
    return predict_label(mean, clf.labels)


def evaluate_multiclass(
    trained: TrainedProtocol,
    test_seqs: Sequence[GestureSequence],
    joint_map: JointIndexMap,
) -> tuple[ConfusionMatrix, ConfusionMatrix]:
    """Static and dynamic confusion matrices over the test sequences."""
    true_by_kind: dict[GestureKind, list[str]] = {k: [] for k in GestureKind}
    pred_by_kind: dict[GestureKind, list[str]] = {k: [] for k in GestureKind}
    for seq in test_seqs:
        pred = predict_sequence(trained, seq, joint_map)
        true_by_kind[seq.label.kind].append(seq.label.id)
        pred_by_kind[seq.label.kind].append(pred)
    static_cm = confusion(
        true_by_kind[GestureKind.STATIC],
        pred_by_kind[GestureKind.STATIC],
        STATIC_GESTURE_IDS,
    )
    dynamic_cm = confusion(
        true_by_kind[GestureKind.DYNAMIC],
        pred_by_kind[GestureKind.DYNAMIC],
        DYNAMIC_GESTURE_IDS,
    )
    return static_cm, dynamic_cm


def evaluate_binary(
    trained: TrainedProtocol,
    test_seqs: Sequence[GestureSequence],
    joint_map: JointIndexMap,
) -> BinarySuiteMetrics:
    """Score all 29 one-vs-rest models on every test sequence."""
    tallies = {gid: {"tp": 0, "fp": 0, "tn": 0, "fn": 0} for gid in ALL_GESTURE_IDS}
    for seq in test_seqs:
        model_set = trained.route_for(seq)
        windows = model_set.prep.features(seq, joint_map)
        for gid in ALL_GESTURE_IDS:
            clf = model_set.classifiers[gid]
            p = float(aggregate_windows(clf.predict_windows(windows))[0])
            predicted_pos = p > 0.5
            actual_pos = seq.label.id == gid
            cell = tallies[gid]
            if actual_pos and predicted_pos:
                cell["tp"] += 1
            elif actual_pos:
                cell["fn"] += 1
            elif predicted_pos:
                cell["fp"] += 1
            else:
                cell["tn"] += 1
    results = [
        BinaryClassResult(gesture_id=gid, **tallies[gid]) for gid in ALL_GESTURE_IDS
    ]
    return binary_suite_metrics(results, STATIC_GESTURE_IDS, DYNAMIC_GESTURE_IDS)


def cross_validate(
    ds: Dataset,
    folds: FoldSplit,
    config: RunConfig,
    factory: ClassifierFactory | None = None,
    on_fold: Callable[[int], None] | None = None,
) -> EvaluationReport:
    """Patient-held-out cross-validation: each present fold is tested once.

    Every fold's split keeps patients strictly disjoint between train and
    test (verified at runtime), trains the full protocol from scratch, and
    evaluates on the held-out patients only.
    """
    present = folds.present_folds()
    if len(present) < 2:
        raise FoldCoverageError(
            f"need at least 2 populated folds to cross-validate, got {len(present)} "
            f"(patients: {folds.patients})"
        )
    fold_of = folds.fold_of_patient
    fold_reports: list[FoldReport] = []
    for test_fold in present:
        if on_fold is not None:
            on_fold(test_fold)
        test_patients = tuple(p for p in folds.patients if fold_of[p] == test_fold)
        train_patients = tuple(p for p in folds.patients if fold_of[p] != test_fold)
        _assert_patient_disjoint(train_patients, test_patients)
        train_seqs = [s for s in ds.sequences if s.patient_id in set(train_patients)]
        test_seqs = [s for s in ds.sequences if s.patient_id in set(test_patients)]
        if not train_seqs or not test_seqs:
            raise FoldCoverageError(
                f"fold {test_fold}: empty split "
                f"(train={len(train_seqs)}, test={len(test_seqs)} sequences)"
            )
        trained = train_protocol(
            train_seqs,
            config,
            ds.joint_map,
            factory=factory,
            fold=test_fold,
            fold_name=f"fold{test_fold}",
        )
        if config.protocol is Protocol.MULTICLASS:
            static_cm, dynamic_cm = evaluate_multiclass(trained, test_seqs, ds.joint_map)
            fold_reports.append(
                FoldReport(
                    fold=test_fold,
                    train_patients=train_patients,
                    test_patients=test_patients,
                    static_accuracy=static_cm.accuracy,
                    dynamic_accuracy=dynamic_cm.accuracy,
                    static_confusion=static_cm,
                    dynamic_confusion=dynamic_cm,
                )
            )
        else:
            suite = evaluate_binary(trained, test_seqs, ds.joint_map)
            fold_reports.append(
                FoldReport(
                    fold=test_fold,
                    train_patients=train_patients,
                    test_patients=test_patients,
                    binary=suite,
                )
            )
    return EvaluationReport(
        protocol=config.protocol.value,
        arch=config.net.value,
        method=int(config.prep.method),
        window=config.prep.window.length,
        folds=tuple(fold_reports),
    )


# ---------------------------------------------------------------------------
# Config and model-set serialization


def config_to_dict(config: RunConfig) -> dict:
    return {
        "protocol": config.protocol.value,
        "net": config.net.value,
        "method": int(config.prep.method),
        "window": config.prep.window.length,
        "stride": config.prep.window.stride,
        "savgol": (
            None
            if config.prep.savgol is None
            else {"m": config.prep.savgol.m, "order": config.prep.savgol.order}
        ),
        "include_confidence": config.prep.include_confidence,
        "long_window": config.long_window,
        "route_threshold": config.route_threshold,
        "lstm_hidden": config.lstm_hidden,
        "tcn_channels": config.tcn_channels,
        "tcn_kernel": config.tcn_kernel,
        "tcn_dilations": list(config.tcn_dilations),
        "train": {
            "optimizer": config.train.optimizer,
            "learning_rate": config.train.learning_rate,
            "beta1": config.train.beta1,
            "beta2": config.train.beta2,
            "adam_eps": config.train.adam_eps,
            "clip_norm": config.train.clip_norm,
            "epochs": config.train.epochs,
            "batch_size": config.train.batch_size,
        },
        "rebalance": config.rebalance,
        "seed": config.seed,
    }


def config_from_dict(d: dict) -> RunConfig:
    savgol = d.get("savgol")
    prep = PrepSettings(
        method=NormMethod(d["method"]),
        window=WindowSpec(d["window"], d.get("stride", 1)),
        savgol=None if savgol is None else SavgolSpec(savgol["m"], savgol["order"]),
        include_confidence=bool(d.get("include_confidence", False)),
    )
    t = d.get("train", {})
    return RunConfig(
        protocol=Protocol(d["protocol"]),
        net=NetKind(d["net"]),
        prep=prep,
        long_window=d.get("long_window"),
        route_threshold=d.get("route_threshold"),
        lstm_hidden=d.get("lstm_hidden", 128),
        tcn_channels=d.get("tcn_channels", 64),
        tcn_kernel=d.get("tcn_kernel", 3),
        tcn_dilations=tuple(d.get("tcn_dilations", (1, 2, 4, 8))),
        train=TrainConfig(
            optimizer=t.get("optimizer", "adam"),
            learning_rate=t.get("learning_rate", 1e-3),
            beta1=t.get("beta1", 0.9),
            beta2=t.get("beta2", 0.999),
            adam_eps=t.get("adam_eps", 1e-8),
            clip_norm=t.get("clip_norm", 5.0),
            epochs=t.get("epochs", 20),
            batch_size=t.get("batch_size", 32),
        ),
        rebalance=bool(d.get("rebalance", False)),
        seed=int(d.get("seed", 0)),
    )


def config_digest(config: RunConfig) -> str:
    """Short stable hash of the run configuration, stamped into checkpoints."""
    import hashlib

    blob = json.dumps(config_to_dict(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def save_model_set(trained: TrainedProtocol, out_dir: str | Path) -> Path:
    """Write every trained model plus an index file; returns the index path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_digest(trained.config)
    entries = []
    for route, model_set in trained.routes.items():
        for key, clf in model_set.classifiers.items():
            if not isinstance(clf, NetworkClassifier):
                raise TypeError(
                    f"cannot checkpoint a {type(clf).__name__}; only trained "
                    "network classifiers are serializable"
                )
            fname = f"{route}_{key}.ckpt"
            save_checkpoint(
                out / fname,
                clf.model,
                extra={
                    "labels": list(clf.labels),
                    "route": route,
                    "key": key,
                    "seed": trained.config.seed,
                    "config_digest": digest,
                },
            )
            entries.append({"route": route, "key": key, "file": fname})
    index = {
        "format": "skelgest-modelset",
        "version": 1,
        "config": config_to_dict(trained.config),
        "router_threshold": None if trained.router is None else trained.router.threshold,
        "models": entries,
    }
    index_path = out / "modelset.json"
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index_path


def load_model_set(model_dir: str | Path) -> TrainedProtocol:
    """Rebuild a TrainedProtocol from `save_model_set` output."""
    model_dir = Path(model_dir)
    index = json.loads((model_dir / "modelset.json").read_text())
    if index.get("format") != "skelgest-modelset":
        raise ValueError(f"{model_dir} does not contain a model-set index")
    config = config_from_dict(index["config"])
    routes: dict[str, ProtocolModelSet] = {}
    for entry in index["models"]:
        model, extra = load_checkpoint(model_dir / entry["file"])
        route = entry["route"]
        if route not in routes:
            prep = config.prep
            if route == "long":
                prep = replace(
                    prep, window=WindowSpec(config.long_window, prep.window.stride)
                )
            routes[route] = ProtocolModelSet(
                protocol=config.protocol, prep=prep, classifiers={}
            )
        routes[route].classifiers[entry["key"]] = NetworkClassifier(
            labels=tuple(extra["labels"]), model=model
        )
    threshold = index.get("router_threshold")
    router = None if threshold is None else LengthRouter(threshold)
    return TrainedProtocol(config=config, routes=routes, router=router)
