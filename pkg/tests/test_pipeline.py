"""Protocol training/evaluation plumbing and patient-held-out cross-validation.

The oracle classifier (which reads each window's true label) separates
pipeline correctness from training quality: any metric below 1.0 with the
oracle substituted would mean the plumbing itself loses information.
"""

import numpy as np
import pytest

from skelgest.ingest import FoldSplit, SynthConfig, assign_folds, generate_synthetic
from skelgest.metrics import ConfusionMatrix
from skelgest.neuralnet import HeadKind, LstmSpec, TcnSpec, TrainConfig
from skelgest.pipeline import (
    FoldCoverageError,
    LengthRouter,
    MissingClassError,
    NetKind,
    OracleClassifier,
    PrepSettings,
    Protocol,
    RunConfig,
    TrainedProtocol,
    _assert_patient_disjoint,
    _derived_seed,
    _rebalanced_indices,
    aggregate_windows,
    config_digest,
    config_from_dict,
    config_to_dict,
    cross_validate,
    evaluate_binary,
    evaluate_multiclass,
    load_model_set,
    oracle_factory,
    predict_label,
    predict_sequence,
    save_model_set,
    stack_windows,
    train_protocol,
)
from skelgest.preprocess import NormMethod, WindowSpec, preprocess_sequence
from skelgest.skeleton import (
    ALL_GESTURE_IDS,
    DYNAMIC_GESTURE_IDS,
    STATIC_GESTURE_IDS,
    GestureKind,
)


def _dataset(n_patients=3, seed=0, **kwargs):
    return generate_synthetic(SynthConfig(n_patients=n_patients, seed=seed, **kwargs))


def _fast_prep(**kwargs):
    defaults = dict(method=NormMethod.M3, window=WindowSpec(16, stride=4))
    defaults.update(kwargs)
    return PrepSettings(**defaults)


class TestRunConfig:
    def test_long_window_must_exceed_base(self):
        with pytest.raises(ValueError, match="long_window"):
            RunConfig(prep=_fast_prep(window=WindowSpec(32)), long_window=32)
        RunConfig(prep=_fast_prep(window=WindowSpec(32)), long_window=64)

    def test_route_threshold_requires_long_window(self):
        with pytest.raises(ValueError, match="route_threshold"):
            RunConfig(route_threshold=40)
        RunConfig(
            prep=_fast_prep(window=WindowSpec(32)), long_window=64, route_threshold=40
        )

    def test_arch_spec_dimensions(self):
        config = RunConfig(
            net=NetKind.LSTM, prep=_fast_prep(method=NormMethod.M4), lstm_hidden=17
        )
        spec = config.arch_spec(15)
        assert isinstance(spec, LstmSpec)
        assert spec.input_dim == 56 and spec.hidden_dim == 17 and spec.n_classes == 15

        config = RunConfig(
            net=NetKind.TCN, prep=_fast_prep(), tcn_channels=9, tcn_kernel=2,
            tcn_dilations=(1, 2),
        )
        spec = config.arch_spec(14)
        assert isinstance(spec, TcnSpec)
        assert spec.input_dim == 28 and spec.channels == 9 and spec.n_classes == 14

    def test_dict_round_trip(self):
        config = RunConfig(
            protocol=Protocol.MULTICLASS_BINARY,
            net=NetKind.TCN,
            prep=_fast_prep(method=NormMethod.M5, window=WindowSpec(24, stride=2)),
            long_window=48,
            route_threshold=30,
            tcn_channels=12,
            train=TrainConfig(optimizer="sgd", learning_rate=0.05, epochs=3),
            rebalance=True,
            seed=99,
        )
        rebuilt = config_from_dict(config_to_dict(config))
        assert rebuilt == config

    def test_digest_stable_and_sensitive(self):
        a = RunConfig(seed=1)
        b = RunConfig(seed=1)
        c = RunConfig(seed=2)
        assert config_digest(a) == config_digest(b)
        assert config_digest(a) != config_digest(c)
        assert len(config_digest(a)) == 16
        assert all(ch in "0123456789abcdef" for ch in config_digest(a))


class TestLengthRouter:
    def test_boundary_inclusive_on_short_side(self):
        router = LengthRouter(threshold=40)
        assert router.route(39) == "short"
        assert router.route(40) == "short"
        assert router.route(41) == "long"

    def test_validation(self):
        with pytest.raises(ValueError):
            LengthRouter(threshold=0)


class TestAggregation:
    def test_mean_probability_vector(self):
        probs = np.array([[0.9, 0.1], [0.5, 0.5], [0.1, 0.9]])
        assert np.array_equal(aggregate_windows(probs), np.array([0.5, 0.5]))

    def test_equal_weight_per_window_not_per_frame(self):
        # A sequence with many windows still averages; no window dominates.
        probs = np.tile(np.array([[0.2, 0.8]]), (100, 1))
        assert np.max(np.abs(aggregate_windows(probs) - [0.2, 0.8])) <= 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            aggregate_windows(np.zeros((0, 2)))
        with pytest.raises(ValueError):
            aggregate_windows(np.zeros(3))

    def test_tie_goes_to_lowest_index(self):
        assert predict_label(np.array([0.4, 0.4, 0.2]), ["a", "b", "c"]) == "a"
        assert predict_label(np.array([0.1, 0.45, 0.45]), ["a", "b", "c"]) == "b"

    def test_predict_label_validation(self):
        with pytest.raises(ValueError):
            predict_label(np.array([0.5, 0.5]), ["a"])


class TestSeedsAndGuards:
    def test_derived_seed_deterministic_and_distinct(self):
        assert _derived_seed(1, 2, 3) == _derived_seed(1, 2, 3)
        seeds = {_derived_seed(0, f, r, i, j)
                 for f in range(3) for r in range(2)
                 for i in range(3) for j in range(2)}
        assert len(seeds) == 36

    def test_patient_disjoint_guard(self):
        _assert_patient_disjoint([1, 2], [3, 4])
        with pytest.raises(AssertionError, match=r"\[2\]"):
            _assert_patient_disjoint([1, 2], [2, 3])

    def test_rebalanced_indices(self):
        targets = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        idx = _rebalanced_indices(targets)
        assert len(idx) == 8
        assert int(np.sum(targets[idx])) == 4  # positives duplicated up to negatives
        assert set(idx) == {0, 1, 2, 3, 4}

    def test_rebalanced_noop_when_balanced_or_degenerate(self):
        balanced = np.array([1.0, 0.0, 1.0, 0.0])
        assert np.array_equal(_rebalanced_indices(balanced), np.arange(4))
        all_pos = np.ones(3)
        assert np.array_equal(_rebalanced_indices(all_pos), np.arange(3))


class TestOracleClassifier:
    def _windows(self, gesture_ids, n_frames=20):
        ds = _dataset(n_patients=1, seed=3)
        by_id = {s.label.id: s for s in ds.sequences}
        windows = []
        for gid in gesture_ids:
            windows.extend(
                preprocess_sequence(
                    by_id[gid], NormMethod.M3, WindowSpec(16), ds.joint_map
                )[:1]
            )
        return windows

    def test_softmax_one_hot_on_true_label(self):
        windows = self._windows(["A1_1", "A1_2", "A1_3"])
        clf = OracleClassifier(labels=STATIC_GESTURE_IDS)
        probs = clf.predict_windows(windows)
        assert probs.shape == (3, 15)
        for i, gid in enumerate(["A1_1", "A1_2", "A1_3"]):
            assert probs[i, STATIC_GESTURE_IDS.index(gid)] == 1.0
            assert probs[i].sum() == 1.0

    def test_sigmoid_positive_only_for_own_class(self):
        windows = self._windows(["A1_1", "A1_2"])
        clf = OracleClassifier(labels=("A1_1",), head=HeadKind.SIGMOID)
        probs = clf.predict_windows(windows)
        assert probs.shape == (2, 1)
        assert probs[0, 0] == 1.0 and probs[1, 0] == 0.0


class TestStackWindows:
    def test_shape(self):
        ds = _dataset(n_patients=1, seed=4)
        windows = preprocess_sequence(
            ds.sequences[0], NormMethod.M1, WindowSpec(8), ds.joint_map
        )
        x = stack_windows(windows)
        assert x.shape == (len(windows), 8, 28)
        assert x.dtype == np.float64

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no windows"):
            stack_windows([])


class TestTrainProtocolStructure:
    def test_multiclass_builds_two_models(self):
        ds = _dataset()
        config = RunConfig(prep=_fast_prep(), seed=1)
        trained = train_protocol(
            ds.sequences, config, ds.joint_map, factory=oracle_factory
        )
        assert set(trained.routes) == {"main"}
        assert set(trained.routes["main"].classifiers) == {"static", "dynamic"}
        assert trained.routes["main"].classifiers["static"].labels == STATIC_GESTURE_IDS
        assert trained.routes["main"].classifiers["dynamic"].labels == DYNAMIC_GESTURE_IDS
        assert trained.router is None

    def test_binary_builds_29_models(self):
        ds = _dataset()
        config = RunConfig(
            protocol=Protocol.MULTICLASS_BINARY, prep=_fast_prep(), seed=1
        )
        trained = train_protocol(
            ds.sequences, config, ds.joint_map, factory=oracle_factory
        )
        assert set(trained.routes["main"].classifiers) == set(ALL_GESTURE_IDS)

    def test_length_routing_builds_two_routes(self):
        ds = _dataset()
        config = RunConfig(
            prep=_fast_prep(window=WindowSpec(16, stride=4)), long_window=32, seed=1
        )
        trained = train_protocol(
            ds.sequences, config, ds.joint_map, factory=oracle_factory
        )
        assert set(trained.routes) == {"short", "long"}
        assert trained.router is not None
        # the short route keeps the base window, the long route the long one
        assert trained.routes["short"].prep.window.length == 16
        assert trained.routes["long"].prep.window.length == 32
        # default threshold is the base window length
        assert trained.router.threshold == 16

    def test_route_for_dispatches_by_frame_count(self):
        ds = _dataset()
        config = RunConfig(
            prep=_fast_prep(window=WindowSpec(16, stride=4)),
            long_window=32,
            route_threshold=50,
            seed=1,
        )
        trained = train_protocol(
            ds.sequences, config, ds.joint_map, factory=oracle_factory
        )
        short_seq = min(ds.sequences, key=lambda s: s.n_frames)
        long_seq = max(ds.sequences, key=lambda s: s.n_frames)
        assert short_seq.n_frames <= 50 < long_seq.n_frames
        assert trained.route_for(short_seq) is trained.routes["short"]
        assert trained.route_for(long_seq) is trained.routes["long"]

    def test_missing_static_class_raises(self):
        ds = _dataset()
        pruned = [s for s in ds.sequences if s.label.id != "S1_2"]
        config = RunConfig(prep=_fast_prep(), seed=1)
        with pytest.raises(MissingClassError, match="S1_2"):
            train_protocol(pruned, config, ds.joint_map, factory=oracle_factory)

    def test_missing_positive_for_binary_raises(self):
        ds = _dataset()
        pruned = [s for s in ds.sequences if s.label.id != "P2_3"]
        config = RunConfig(
            protocol=Protocol.MULTICLASS_BINARY, prep=_fast_prep(), seed=1
        )
        with pytest.raises(MissingClassError, match="P2_3"):
            train_protocol(pruned, config, ds.joint_map, factory=oracle_factory)


class TestOracleEvaluation:
    def test_multiclass_oracle_is_perfect(self):
        ds = _dataset()
        config = RunConfig(prep=_fast_prep(), seed=1)
        trained = train_protocol(
            ds.sequences, config, ds.joint_map, factory=oracle_factory
        )
        static_cm, dynamic_cm = evaluate_multiclass(trained, ds.sequences, ds.joint_map)
        assert static_cm.accuracy == 1.0
        assert dynamic_cm.accuracy == 1.0
        assert static_cm.n_total == 15 * 3
        assert dynamic_cm.n_total == 14 * 3

    def test_binary_oracle_is_perfect(self):
        ds = _dataset()
        config = RunConfig(
            protocol=Protocol.MULTICLASS_BINARY, prep=_fast_prep(), seed=1
        )
        trained = train_protocol(
            ds.sequences, config, ds.joint_map, factory=oracle_factory
        )
        suite = evaluate_binary(trained, ds.sequences, ds.joint_map)
        assert suite.mean_accuracy == 1.0
        assert suite.balanced_average == 1.0
        for r in suite.results:
            assert r.tp == 3 and r.fn == 0 and r.fp == 0 and r.tn == 29 * 3 - 3

    def test_cross_validate_oracle_multiclass(self):
        ds = _dataset(n_patients=6, seed=5)
        folds = assign_folds(ds, boundaries=(2, 4))
        config = RunConfig(prep=_fast_prep(), seed=1)
        report = cross_validate(ds, folds, config, factory=oracle_factory)
        assert len(report.folds) == 3
        assert report.mean_average_accuracy == 1.0
        assert report.mean_static_accuracy == 1.0
        for fold in report.folds:
            assert fold.static_confusion is not None
            assert np.trace(fold.static_confusion.counts) == fold.static_confusion.n_total

    def test_cross_validate_oracle_binary(self):
        ds = _dataset(n_patients=4, seed=6)
        folds = assign_folds(ds, boundaries=(2, 4))  # folds 1 and 2 present
        config = RunConfig(
            protocol=Protocol.MULTICLASS_BINARY, prep=_fast_prep(), seed=1
        )
        report = cross_validate(ds, folds, config, factory=oracle_factory)
        assert len(report.folds) == 2
        assert report.mean_average_accuracy == 1.0

    def test_cross_validate_oracle_with_length_routing(self):
        ds = _dataset(n_patients=4, seed=7)
        folds = assign_folds(ds, boundaries=(2, 4))
        config = RunConfig(
            prep=_fast_prep(window=WindowSpec(16, stride=4)), long_window=32, seed=1
        )
        report = cross_validate(ds, folds, config, factory=oracle_factory)
        assert report.mean_average_accuracy == 1.0

    def test_cross_validate_needs_two_folds(self):
        ds = _dataset(n_patients=2, seed=8)
        folds = FoldSplit(boundaries=(15, 35), patients=tuple(ds.patients))
        assert folds.present_folds() == (1,)
        config = RunConfig(prep=_fast_prep(), seed=1)
        with pytest.raises(FoldCoverageError, match="at least 2"):
            cross_validate(ds, folds, config, factory=oracle_factory)

    def test_fold_reports_carry_disjoint_patient_lists(self):
        ds = _dataset(n_patients=6, seed=9)
        folds = assign_folds(ds, boundaries=(2, 4))
        config = RunConfig(prep=_fast_prep(), seed=1)
        report = cross_validate(ds, folds, config, factory=oracle_factory)
        for fold in report.folds:
            assert not set(fold.train_patients) & set(fold.test_patients)
            assert set(fold.train_patients) | set(fold.test_patients) == set(ds.patients)


def _tiny_net_config(**kwargs):
    """Small real networks that train in a couple of seconds."""
    defaults = dict(
        prep=_fast_prep(window=WindowSpec(16, stride=8)),
        lstm_hidden=8,
        tcn_channels=8,
        tcn_kernel=2,
        tcn_dilations=(1, 2),
        train=TrainConfig(epochs=2, batch_size=64),
        seed=11,
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


class TestRealTrainingSmoke:
    def test_multiclass_lstm_end_to_end(self):
        ds = _dataset(n_patients=2, seed=10)
        config = _tiny_net_config()
        trained = train_protocol(ds.sequences, config, ds.joint_map)
        static_cm, dynamic_cm = evaluate_multiclass(trained, ds.sequences, ds.joint_map)
        assert isinstance(static_cm, ConfusionMatrix)
        assert static_cm.n_total == 15 * 2
        assert 0.0 <= static_cm.accuracy <= 1.0

    def test_training_is_deterministic(self):
        ds = _dataset(n_patients=2, seed=10)
        config = _tiny_net_config()
        runs = []
        for _ in range(2):
            trained = train_protocol(ds.sequences, config, ds.joint_map)
            static = trained.routes["main"].classifiers["static"]
            runs.append(static.model.values.copy())
        assert np.array_equal(runs[0], runs[1])

    def test_seed_changes_weights(self):
        ds = _dataset(n_patients=2, seed=10)
        a = train_protocol(ds.sequences, _tiny_net_config(seed=11), ds.joint_map)
        b = train_protocol(ds.sequences, _tiny_net_config(seed=12), ds.joint_map)
        va = a.routes["main"].classifiers["static"].model.values
        vb = b.routes["main"].classifiers["static"].model.values
        assert not np.array_equal(va, vb)

    def test_predict_sequence_returns_known_label(self):
        ds = _dataset(n_patients=2, seed=10)
        trained = train_protocol(ds.sequences, _tiny_net_config(), ds.joint_map)
        seq = ds.sequences[0]
        pred = predict_sequence(trained, seq, ds.joint_map)
        labels = (
            STATIC_GESTURE_IDS
            if seq.label.kind is GestureKind.STATIC
            else DYNAMIC_GESTURE_IDS
        )
        assert pred in labels


class TestModelSetSerialization:
    def test_round_trip_identical_predictions(self, tmp_path):
        ds = _dataset(n_patients=2, seed=13)
        config = _tiny_net_config()
        trained = train_protocol(ds.sequences, config, ds.joint_map)
        index_path = save_model_set(trained, tmp_path)
        assert index_path.name == "modelset.json"
        loaded = load_model_set(tmp_path)
        assert loaded.config == config
        assert loaded.router is None
        for seq in ds.sequences[:8]:
            assert predict_sequence(loaded, seq, ds.joint_map) == predict_sequence(
                trained, seq, ds.joint_map
            )

    def test_round_trip_with_length_routing(self, tmp_path):
        ds = _dataset(n_patients=2, seed=14)
        config = _tiny_net_config(
            long_window=32, train=TrainConfig(epochs=1, batch_size=64)
        )
        trained = train_protocol(ds.sequences, config, ds.joint_map)
        save_model_set(trained, tmp_path)
        loaded = load_model_set(tmp_path)
        assert set(loaded.routes) == {"short", "long"}
        assert loaded.router.threshold == trained.router.threshold
        assert loaded.routes["long"].prep.window.length == 32
        ckpts = sorted(p.name for p in tmp_path.glob("*.ckpt"))
        assert ckpts == ["long_dynamic.ckpt", "long_static.ckpt",
                        "short_dynamic.ckpt", "short_static.ckpt"]

    def test_oracle_models_are_not_serializable(self, tmp_path):
        ds = _dataset(n_patients=2, seed=15)
        trained = train_protocol(
            ds.sequences, RunConfig(prep=_fast_prep(), seed=1), ds.joint_map,
            factory=oracle_factory,
        )
        with pytest.raises(TypeError, match="OracleClassifier"):
            save_model_set(trained, tmp_path)

    def test_load_rejects_non_modelset_dir(self, tmp_path):
        (tmp_path / "modelset.json").write_text('{"format": "something-else"}')
        with pytest.raises(ValueError, match="model-set"):
            load_model_set(tmp_path)
