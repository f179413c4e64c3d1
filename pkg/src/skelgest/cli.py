"""Command-line interface: synthesize, ingest, train, evaluate, check, report.

Exit codes: 0 success, 1 assertion/check failure (failed gradient check,
diverged training), 2 usage or configuration error, 3 data error (unreadable
dataset, checksum mismatch, fold without data).

Every command that draws random numbers requires an explicit ``--seed``;
there is deliberately no implicit default, so each artifact records how to
reproduce itself.  Commands that write an output directory echo their fully
resolved configuration into ``config.txt`` there, and training/evaluation
also write ``run_manifest.json``, which ``evaluate --from-manifest`` replays
bit-for-bit against the same dataset.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import REGISTRY, ConfigError, parse_value, render_config, resolve
from .skeleton import (
    DEFAULT_JOINT_MAP,
    GestureKind,
    JointIndexMap,
    class_counts,
)
from .ingest import (
    DataError,
    SynthConfig,
    assign_folds,
    dataset_checksum,
    generate_synthetic,
    load_dataset,
    write_dataset,
)
from .preprocess import NormMethod, SavgolSpec, WindowSpec
from .neuralnet import (
    HeadKind,
    LstmSpec,
    TcnSpec,
    TrainingDivergedError,
    grad_check,
    init_parameters,
)
from .pipeline import (
    FoldCoverageError,
    MissingClassError,
    NetKind,
    PrepSettings,
    Protocol,
    RunConfig,
    TrainConfig,
    config_from_dict,
    config_to_dict,
    cross_validate,
    evaluate_binary,
    evaluate_multiclass,
    load_model_set,
    save_model_set,
    train_protocol,
)
from .metrics import (
    EvaluationReport,
    FoldReport,
    render_report,
    render_summary,
    report_from_dict,
    write_report_files,
)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    """Bad flag combination or missing required setting."""


def _registry_type(name: str):
    def parse(text: str):
        try:
            return parse_value(name, text)
        except ConfigError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _add_flags(parser: argparse.ArgumentParser, names: list[str]) -> None:
    parser.add_argument(
        "--config",
        default=argparse.SUPPRESS,
        metavar="PATH",
        help="config file; defaults to $SKELGEST_CONFIG when set",
    )
    for name in names:
        key = REGISTRY[name]
        parser.add_argument(
            key.flag,
            dest=key.dest,
            default=None,
            type=_registry_type(name),
            metavar="V",
            help=f"{key.help} (default: {key.default})",
        )


_PREP_KEYS = [
    "model.protocol", "model.net", "preprocess.method", "preprocess.window",
    "preprocess.stride", "preprocess.route_threshold", "preprocess.smooth",
    "preprocess.savgol.m", "preprocess.savgol.order",
    "preprocess.include_confidence",
]
_MODEL_KEYS = [
    "model.lstm_hidden", "model.tcn_channels", "model.tcn_kernel",
    "model.tcn_dilations",
]
_TRAIN_KEYS = [
    "train.optimizer", "train.learning_rate", "train.epochs",
    "train.batch_size", "train.clip_norm", "train.rebalance",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelgest",
        description="Skeletal hand-gesture classification toolkit.",
    )
    parser.add_argument(
        "--config",
        default=None,
        metavar="PATH",
        help="config file; defaults to $SKELGEST_CONFIG when set",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    _add_flags(p, [
        "output.dir", "run.seed", "synth.patients", "synth.noise_sigma",
        "synth.camera_offset_range", "synth.frames_static",
        "synth.frames_dynamic",
    ])

    p = sub.add_parser("ingest", help="load and validate a dataset, print stats")
    _add_flags(p, ["dataset.root", "dataset.manifest", "joints.chin_index"])

    p = sub.add_parser("train", help="train all protocol models on a dataset")
    _add_flags(p, ["dataset.root", "dataset.manifest", "output.dir", "run.seed",
                   "joints.chin_index", "folds.boundaries"]
               + _PREP_KEYS + _MODEL_KEYS + _TRAIN_KEYS)

    p = sub.add_parser("evaluate", help="patient-held-out cross-validation")
    _add_flags(p, ["dataset.root", "dataset.manifest", "output.dir", "run.seed",
                   "joints.chin_index", "folds.boundaries"]
               + _PREP_KEYS + _MODEL_KEYS + _TRAIN_KEYS)
    p.add_argument("--from-manifest", default=None, metavar="PATH",
                   help="replay a recorded run_manifest.json exactly")
    p.add_argument("--models", default=None, metavar="DIR",
                   help="evaluate an existing model set instead of retraining")

    p = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    _add_flags(p, ["run.seed", "gradcheck.tolerance"])

    p = sub.add_parser("report", help="re-render a stored evaluation report")
    p.add_argument("--config", default=argparse.SUPPRESS, metavar="PATH",
                   help="config file; defaults to $SKELGEST_CONFIG when set")
    p.add_argument("--from", dest="from_dir", required=True, metavar="DIR",
                   help="directory containing report.json")
    p.add_argument("--format", dest="fmt", default="text",
                   choices=("text", "json", "csv"), help="output rendering")
    return parser


def _resolved(args: argparse.Namespace) -> dict[str, object]:
    overrides = {
        key.name: getattr(args, key.dest)
        for key in REGISTRY.values()
        if getattr(args, key.dest, None) is not None
    }
    config_path = args.config or os.environ.get("SKELGEST_CONFIG") or None
    return resolve(config_path, overrides)


def _explicit_keys(args: argparse.Namespace, names: list[str]) -> list[str]:
    """Which of the given config keys were set by a command-line flag."""
    return [
        name for name in names
        if getattr(args, REGISTRY[name].dest, None) is not None
    ]


def _require_seed(resolved: dict) -> int:
    seed = resolved["run.seed"]
    if seed is None:
        raise UsageError(
            "an explicit --seed is required: this command draws random numbers"
        )
    return int(seed)


def _require_dataset(resolved: dict) -> Path:
    root = resolved["dataset.root"]
    if root is None:
        raise UsageError("--dataset is required")
    return Path(str(root))


def _joint_map(resolved: dict) -> JointIndexMap:
    chin = int(resolved["joints.chin_index"])
    if chin == DEFAULT_JOINT_MAP.chin_index:
        return DEFAULT_JOINT_MAP
    return JointIndexMap(names=DEFAULT_JOINT_MAP.names, chin_index=chin)


def _protocol(value: str) -> Protocol:
    return Protocol.MULTICLASS if value == "multiclass" else Protocol.MULTICLASS_BINARY


def _run_config(resolved: dict, seed: int) -> RunConfig:
    window = resolved["preprocess.window"]
    savgol = (
        SavgolSpec(
            int(resolved["preprocess.savgol.m"]),
            int(resolved["preprocess.savgol.order"]),
        )
        if resolved["preprocess.smooth"]
        else None
    )
    prep = PrepSettings(
        method=NormMethod(int(resolved["preprocess.method"])),
        window=WindowSpec(window[0], int(resolved["preprocess.stride"])),
        savgol=savgol,
        include_confidence=bool(resolved["preprocess.include_confidence"]),
    )
    return RunConfig(
        protocol=_protocol(str(resolved["model.protocol"])),
        net=NetKind(str(resolved["model.net"])),
        prep=prep,
        long_window=window[1] if len(window) == 2 else None,
        route_threshold=resolved["preprocess.route_threshold"],
        lstm_hidden=int(resolved["model.lstm_hidden"]),
        tcn_channels=int(resolved["model.tcn_channels"]),
        tcn_kernel=int(resolved["model.tcn_kernel"]),
        tcn_dilations=tuple(resolved["model.tcn_dilations"]),
        train=TrainConfig(
            optimizer=str(resolved["train.optimizer"]),
            learning_rate=float(resolved["train.learning_rate"]),
            clip_norm=float(resolved["train.clip_norm"]),
            epochs=int(resolved["train.epochs"]),
            batch_size=int(resolved["train.batch_size"]),
        ),
        rebalance=bool(resolved["train.rebalance"]),
        seed=seed,
    )


def _echo_config(out: Path, resolved: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(render_config(resolved))


def _write_run_manifest(
    out: Path, command: str, rc: RunConfig, boundaries: tuple[int, int],
    dataset_root: Path,
) -> Path:
    manifest = {
        "format": "skelgest-run",
        "version": 1,
        "command": command,
        "config": config_to_dict(rc),
        "fold_boundaries": list(boundaries),
        "dataset": {
            "root": str(dataset_root),
            "checksum": dataset_checksum(dataset_root),
        },
    }
    path = out / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def cmd_synth(args: argparse.Namespace) -> int:
    resolved = _resolved(args)
    seed = _require_seed(resolved)
    sc = SynthConfig(
        n_patients=int(resolved["synth.patients"]),
        frames_static=tuple(resolved["synth.frames_static"]),
        frames_dynamic=tuple(resolved["synth.frames_dynamic"]),
        noise_sigma=float(resolved["synth.noise_sigma"]),
        camera_offset_range=float(resolved["synth.camera_offset_range"]),
        seed=seed,
    )
    ds = generate_synthetic(sc)
    out = Path(str(resolved["output.dir"]))
    write_dataset(ds, out)
    _echo_config(out, resolved)
    checksum = dataset_checksum(out)
    print(f"wrote {len(ds.sequences)} sequences for {len(ds.patients)} patients to {out}")
    print(f"dataset checksum: {checksum}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    resolved = _resolved(args)
    root = _require_dataset(resolved)
    ds = load_dataset(
        root, resolved["dataset.manifest"], joint_map=_joint_map(resolved)
    )
    counts = class_counts()
    by_kind = {GestureKind.STATIC: 0, GestureKind.DYNAMIC: 0}
    for seq in ds.sequences:
        by_kind[seq.label.kind] += 1
    print(f"dataset: {root}")
    print(f"sequences: {len(ds.sequences)}")
    print(f"patients: {len(ds.patients)} ({min(ds.patients)}..{max(ds.patients)})")
    print(
        f"static: {by_kind[GestureKind.STATIC]} sequences over "
        f"{counts.n_static} classes; "
        f"dynamic: {by_kind[GestureKind.DYNAMIC]} over {counts.n_dynamic}"
    )
    print(f"dataset checksum: {dataset_checksum(root)}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    resolved = _resolved(args)
    root = _require_dataset(resolved)
    seed = _require_seed(resolved)
    rc = _run_config(resolved, seed)
    ds = load_dataset(
        root, resolved["dataset.manifest"], joint_map=_joint_map(resolved)
    )
    trained = train_protocol(ds.sequences, rc, ds.joint_map, fold=0, fold_name="train")
    out = Path(str(resolved["output.dir"]))
    index_path = save_model_set(trained, out / "models")
    _echo_config(out, resolved)
    _write_run_manifest(out, "train", rc, tuple(resolved["folds.boundaries"]), root)
    n_models = sum(len(ms.classifiers) for ms in trained.routes.values())
    print(f"trained {n_models} model(s); index at {index_path}")
    return EXIT_OK


def _evaluate_model_set(args, resolved) -> int:
    """Score an existing model set on a dataset (no training, no CV)."""
    trained = load_model_set(Path(args.models))
    stored = config_to_dict(trained.config)
    checks = {
        "model.protocol": lambda v: _protocol(str(v)).value == stored["protocol"],
        "model.net": lambda v: str(v) == stored["net"],
        "preprocess.method": lambda v: int(v) == stored["method"],
        "preprocess.stride": lambda v: int(v) == stored["stride"],
        "preprocess.window": lambda v: list(v)[0] == stored["window"],
    }
    conflicts = []
    for name, ok in checks.items():
        given = getattr(args, REGISTRY[name].dest, None)
        if given is not None and not ok(given):
            conflicts.append(f"{REGISTRY[name].flag}={given!r}")
    if conflicts:
        raise UsageError(
            "checkpoint/config mismatch: the loaded model set was trained with "
            f"different settings than {'; '.join(conflicts)}"
        )
    root = _require_dataset(resolved)
    ds = load_dataset(
        root, resolved["dataset.manifest"], joint_map=_joint_map(resolved)
    )
    if trained.config.protocol is Protocol.MULTICLASS:
        static_cm, dynamic_cm = evaluate_multiclass(trained, ds.sequences, ds.joint_map)
        fold = FoldReport(
            fold=0,
            train_patients=(),
            test_patients=ds.patients,
            static_accuracy=static_cm.accuracy,
            dynamic_accuracy=dynamic_cm.accuracy,
            static_confusion=static_cm,
            dynamic_confusion=dynamic_cm,
        )
    else:
        suite = evaluate_binary(trained, ds.sequences, ds.joint_map)
        fold = FoldReport(
            fold=0, train_patients=(), test_patients=ds.patients, binary=suite
        )
    report = EvaluationReport(
        protocol=trained.config.protocol.value,
        arch=trained.config.net.value,
        method=int(trained.config.prep.method),
        window=trained.config.prep.window.length,
        folds=(fold,),
        extras={"models": str(args.models), "mode": "fixed-model-set"},
    )
    out = Path(str(resolved["output.dir"]))
    write_report_files(report, out)
    _echo_config(out, resolved)
    print(render_summary(report), end="")
    return EXIT_OK


def _evaluate_from_manifest(args, resolved) -> int:
    """Replay a recorded run exactly; the dataset must match its checksum."""
    explicit = _explicit_keys(
        args,
        _PREP_KEYS + _MODEL_KEYS + _TRAIN_KEYS
        + ["run.seed", "folds.boundaries", "joints.chin_index"],
    )
    if explicit:
        flags = ", ".join(REGISTRY[name].flag for name in explicit)
        raise UsageError(
            f"--from-manifest replays the recorded configuration; "
            f"conflicting flags: {flags}"
        )
    manifest_path = Path(args.from_manifest)
    if not manifest_path.is_file():
        raise DataError(f"run manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "skelgest-run":
        raise DataError(f"{manifest_path} is not a run manifest")
    rc = config_from_dict(manifest["config"])
    boundaries = tuple(manifest["fold_boundaries"])
    root = Path(str(resolved["dataset.root"] or manifest["dataset"]["root"]))
    recorded = manifest["dataset"]["checksum"]
    actual = dataset_checksum(root)
    if actual != recorded:
        raise DataError(
            f"dataset checksum mismatch: manifest records {recorded}, "
            f"{root} has {actual}"
        )
    ds = load_dataset(root, resolved["dataset.manifest"])
    folds = assign_folds(ds, boundaries)
    report = cross_validate(ds, folds, rc)
    out = Path(str(resolved["output.dir"]))
    write_report_files(report, out)
    _echo_config(out, resolved)
    _write_run_manifest(out, "evaluate", rc, boundaries, root)
    print(render_summary(report), end="")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    resolved = _resolved(args)
    if args.from_manifest and args.models:
        raise UsageError("--from-manifest and --models are mutually exclusive")
    if args.from_manifest:
        return _evaluate_from_manifest(args, resolved)
    if args.models:
        return _evaluate_model_set(args, resolved)
    root = _require_dataset(resolved)
    seed = _require_seed(resolved)
    rc = _run_config(resolved, seed)
    ds = load_dataset(
        root, resolved["dataset.manifest"], joint_map=_joint_map(resolved)
    )
    boundaries = tuple(resolved["folds.boundaries"])
    folds = assign_folds(ds, boundaries)
    report = cross_validate(ds, folds, rc)
    out = Path(str(resolved["output.dir"]))
    write_report_files(report, out)
    _echo_config(out, resolved)
    _write_run_manifest(out, "evaluate", rc, boundaries, root)
    print(render_summary(report), end="")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    resolved = _resolved(args)
    seed = _require_seed(resolved)
    tolerance = float(resolved["gradcheck.tolerance"])
    if tolerance < 0:
        raise UsageError(f"tolerance must be >= 0, got {tolerance}")
    checks = [
        ("lstm", LstmSpec(input_dim=3, hidden_dim=4, n_classes=2), HeadKind.SOFTMAX),
        ("lstm", LstmSpec(input_dim=3, hidden_dim=4, n_classes=1), HeadKind.SIGMOID),
        ("tcn", TcnSpec(input_dim=3, channels=4, dilations=(1, 2), n_classes=2),
         HeadKind.SOFTMAX),
        ("tcn", TcnSpec(input_dim=3, channels=4, dilations=(1, 2), n_classes=1),
         HeadKind.SIGMOID),
    ]
    all_passed = True
    for i, (name, spec, head) in enumerate(checks):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        model = init_parameters(spec, head, seed=int(rng.integers(2**32)))
        x = rng.normal(size=(2, 6, spec.input_dim))
        if head is HeadKind.SOFTMAX:
            targets = rng.integers(spec.n_classes, size=2)
        else:
            targets = rng.integers(2, size=2).astype(np.float64)
        report = grad_check(model, x, targets, tolerance=tolerance)
        verdict = "PASS" if report.passed else "FAIL"
        print(
            f"{name}/{head.value}: {report.n_checked} parameters, "
            f"max relative error {report.max_rel_error:.3e} "
            f"(tolerance {tolerance:g}) {verdict}"
        )
        all_passed = all_passed and report.passed
    return EXIT_OK if all_passed else EXIT_CHECK


def cmd_report(args: argparse.Namespace) -> int:
    report_path = Path(args.from_dir) / "report.json"
    if not report_path.is_file():
        raise DataError(f"no report.json under {args.from_dir}")
    report = report_from_dict(json.loads(report_path.read_text()))
    if args.fmt == "text":
        print(render_summary(report), end="")
    else:
        print(render_report(report, args.fmt), end="")
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MissingClassError, FoldCoverageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
