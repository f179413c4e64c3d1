"""Dataset ingest: frame-file parsing, manifest loading, folds, synthetic data.

On-disk interchange format
--------------------------
A *frames file* holds one gesture performance as consecutive 5-line blocks of
14 whitespace-separated decimal numbers: rows are x, y, confidence, and two
auxiliary rows (kept at ingest, ignored by modeling).  A dataset directory
pairs frames files with a CSV *manifest* ``patient_id,gesture_id,correct,
frames_path`` (paths relative to the dataset root).

Performances flagged incorrect are dropped at load time: a mislabeled-by-
failure performance would only mislead a gesture classifier.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

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
    label_kind,
    validate_sequence,
)

logger = logging.getLogger(__name__)

ROWS_PER_FRAME = 5
MANIFEST_FIELDS = ("patient_id", "gesture_id", "correct", "frames_path")


class DataError(Exception):
    """A dataset on disk (or a manifest row) is malformed or inconsistent."""


class ParseError(DataError):
    """A frames file violates the block format; message carries the line number."""


class Provenance(Enum):
    REAL = "real"
    SYNTHETIC = "synthetic"


def parse_skeletal_file(text: str, *, source: str = "<string>") -> list[SkeletalFrame]:
    """Parse frames-file text into skeletal frames.

    Blank lines may separate blocks and are ignored.  Raises
    :class:`ParseError` naming the offending line for a row with the wrong
    number of values, a non-numeric token, or a truncated final block.
    """
    rows: list[tuple[int, list[float]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = stripped.split()
        if len(tokens) != N_JOINTS:
            raise ParseError(
                f"{source}:{lineno}: expected {N_JOINTS} values per row, got {len(tokens)}"
            )
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            bad = next(tok for tok in tokens if not _is_number(tok))
            raise ParseError(f"{source}:{lineno}: non-numeric token {bad!r}") from None
        rows.append((lineno, values))

    if len(rows) % ROWS_PER_FRAME != 0:
        start_line = rows[len(rows) - len(rows) % ROWS_PER_FRAME][0]
        raise ParseError(
            f"{source}:{start_line}: truncated final block "
            f"({len(rows) % ROWS_PER_FRAME} of {ROWS_PER_FRAME} rows)"
        )

    frames = []
    for b in range(0, len(rows), ROWS_PER_FRAME):
        xs, ys, confs, aux1, aux2 = (rows[b + r][1] for r in range(ROWS_PER_FRAME))
        joints = tuple(
            Joint2D(x=xs[j], y=ys[j], confidence=confs[j]) for j in range(N_JOINTS)
        )
        frames.append(SkeletalFrame(joints=joints, aux_rows=(tuple(aux1), tuple(aux2))))
    return frames


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def serialize_frames(frames: list[SkeletalFrame] | tuple[SkeletalFrame, ...]) -> str:
    """Inverse of :func:`parse_skeletal_file`, exact to full float precision.

    Frames without aux rows are written with zero aux rows (the on-disk
    format always has 5-row blocks).
    """
    out = io.StringIO()
    zero_row = (0.0,) * N_JOINTS
    for frame in frames:
        aux = frame.aux_rows if frame.aux_rows is not None else (zero_row, zero_row)
        rows = (
            [j.x for j in frame.joints],
            [j.y for j in frame.joints],
            [j.confidence for j in frame.joints],
            list(aux[0]),
            list(aux[1]),
        )
        for row in rows:
            out.write(" ".join(repr(float(v)) for v in row))
            out.write("\n")
    return out.getvalue()


@dataclass(frozen=True)
class Dataset:
    """A validated collection of gesture sequences plus its joint map."""

    sequences: tuple[GestureSequence, ...]
    joint_map: JointIndexMap
    provenance: Provenance

    @property
    def patients(self) -> tuple[int, ...]:
        return tuple(sorted({s.patient_id for s in self.sequences}))

    def by_patient(self, patient_id: int) -> list[GestureSequence]:
        return [s for s in self.sequences if s.patient_id == patient_id]


def _build_dataset(
    sequences: list[GestureSequence],
    joint_map: JointIndexMap,
    provenance: Provenance,
) -> Dataset:
    kept = [s for s in sequences if s.correct]
    if not kept:
        raise DataError("dataset is empty after removing incorrect performances")
    for seq in kept:
        problems = validate_sequence(seq)
        if problems:
            raise DataError(
                f"patient {seq.patient_id} gesture {seq.label.id}: " + "; ".join(problems)
            )
    return Dataset(sequences=tuple(kept), joint_map=joint_map, provenance=provenance)


def load_dataset(
    root: str | Path,
    manifest: str | Path | None = None,
    *,
    joint_map: JointIndexMap = DEFAULT_JOINT_MAP,
    provenance: Provenance = Provenance.REAL,
) -> Dataset:
    """Load a dataset directory through its manifest.

    Incorrect performances are excluded; every kept sequence is validated.
    Raises :class:`DataError` for a missing frames file, an unknown gesture
    id, a malformed manifest row, or an empty post-filter dataset.
    """
    root = Path(root)
    manifest_path = Path(manifest) if manifest is not None else root / "manifest.csv"
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")

    sequences: list[GestureSequence] = []
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_FIELDS:
            raise DataError(
                f"{manifest_path}: manifest header must be {','.join(MANIFEST_FIELDS)}"
            )
        for rownum, row in enumerate(reader, start=2):
            try:
                patient_id = int(row["patient_id"])
            except (TypeError, ValueError):
                raise DataError(f"{manifest_path}:{rownum}: bad patient_id "
                                f"{row.get('patient_id')!r}") from None
            gesture_id = (row["gesture_id"] or "").strip()
            try:
                label = GestureLabel.from_id(gesture_id)
            except UnknownLabelError as exc:
                raise DataError(f"{manifest_path}:{rownum}: {exc}") from None
            correct = _parse_correct(row["correct"], manifest_path, rownum)
            frames_path = root / row["frames_path"]
            if not frames_path.exists():
                raise DataError(f"{manifest_path}:{rownum}: frames file not found: "
                                f"{frames_path}")
            if not correct:
                continue  # skip before paying the parse cost
            frames = parse_skeletal_file(
                frames_path.read_text(), source=str(frames_path)
            )
            if not frames:
                raise DataError(f"{manifest_path}:{rownum}: {frames_path} holds no frames")
            sequences.append(
                GestureSequence(
                    patient_id=patient_id,
                    label=label,
                    correct=correct,
                    frames=tuple(frames),
                )
            )
    ds = _build_dataset(sequences, joint_map, provenance)
    logger.info("loaded %d sequences from %d patients (%s)",
                len(ds.sequences), len(ds.patients), manifest_path)
    return ds


def _parse_correct(token: str | None, path: Path, rownum: int) -> bool:
    norm = (token or "").strip().lower()
    if norm in ("1", "true"):
        return True
    if norm in ("0", "false"):
        return False
    raise DataError(f"{path}:{rownum}: correct flag must be 0/1/true/false, got {token!r}")


# ---------------------------------------------------------------------------
# Patient-based folds


@dataclass(frozen=True)
class FoldSplit:
    """Patient -> fold assignment; folds partition patients, never gestures."""

    boundaries: tuple[int, int]
    patients: tuple[int, ...]

    def fold_of(self, patient_id: int) -> int:
        b1, b2 = self.boundaries
        if patient_id <= b1:
            return 1
        if patient_id <= b2:
            return 2
        return 3

    @property
    def fold_of_patient(self) -> dict[int, int]:
        return {p: self.fold_of(p) for p in self.patients}

    def present_folds(self) -> tuple[int, ...]:
        return tuple(sorted({self.fold_of(p) for p in self.patients}))


DEFAULT_FOLD_BOUNDARIES = (15, 35)


def assign_folds(
    ds: Dataset, boundaries: tuple[int, int] = DEFAULT_FOLD_BOUNDARIES
) -> FoldSplit:
    """Assign each patient to fold 1, 2 or 3 by id thresholds.

    Patient p goes to fold 1 if p <= b1, fold 2 if b1 < p <= b2, else fold 3.
    The default (15, 35) gives the 1-15 / 16-35 / 36-55 protocol split.
    """
    b1, b2 = boundaries
    if not b1 < b2:
        raise ValueError(f"fold boundaries must be strictly increasing, got {boundaries}")
    return FoldSplit(boundaries=(b1, b2), patients=ds.patients)


# ---------------------------------------------------------------------------
# Synthetic data


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for a deterministic synthetic dataset.

    Every patient performs each of the 29 gestures once, all flagged correct.
    Static classes are distinct held poses; dynamic classes add class-specific
    oscillation of the wrists.  Each patient's whole recording is shifted by a
    random camera translation, so raw coordinates differ across patients even
    at zero noise.
    """

    n_patients: int
    frames_static: tuple[int, int] = (40, 56)
    frames_dynamic: tuple[int, int] = (48, 72)
    noise_sigma: float = 0.015
    camera_offset_range: float = 0.4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_patients < 1:
            raise ValueError("n_patients must be >= 1")
        for name in ("frames_static", "frames_dynamic"):
            lo, hi = getattr(self, name)
            if not (1 <= lo <= hi):
                raise ValueError(f"{name} range ({lo}, {hi}) is empty or invalid")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.camera_offset_range < 0:
            raise ValueError("camera_offset_range must be >= 0")


# Neutral upper-body layout in DEFAULT_JOINT_MAP column order.  The world uses
# arbitrary compact units (roughly "meters"): chin-relative joint offsets are
# order one, which keeps downstream saturating nonlinearities in their active
# range, and the chin sits well away from the origin so that chin-ratio
# normalization never divides by zero.
_BASE_POSE = np.array(
    [
        [3.20, 0.80],  # head_top
        [3.20, 1.20],  # chin
        [2.70, 1.65],  # right_shoulder
        [2.45, 2.25],  # right_elbow
        [2.35, 2.85],  # right_wrist
        [3.70, 1.65],  # left_shoulder
        [3.95, 2.25],  # left_elbow
        [4.05, 2.85],  # left_wrist
        [2.85, 3.30],  # right_hip
        [2.80, 4.30],  # right_knee
        [2.78, 5.25],  # right_ankle
        [3.55, 3.30],  # left_hip
        [3.60, 4.30],  # left_knee
        [3.62, 5.25],  # left_ankle
    ]
)

_R_WRIST, _L_WRIST = 4, 7
_R_ELBOW, _L_ELBOW = 3, 6
_R_SHOULDER, _L_SHOULDER = 2, 5
_CHIN = 1

_SIGNATURE_RADIUS = 0.90
_SIGNATURE_RADIUS_LEFT = 0.55
_MOTION_AMPLITUDE = 0.35

# Wheel position within the class's own static/dynamic partition: the two
# partitions are classified separately downstream, so separation only needs
# to hold within each.
_KIND_WHEEL: dict[str, tuple[int, int]] = {
    **{gid: (i, len(STATIC_GESTURE_IDS)) for i, gid in enumerate(STATIC_GESTURE_IDS)},
    **{gid: (i, len(DYNAMIC_GESTURE_IDS)) for i, gid in enumerate(DYNAMIC_GESTURE_IDS)},
}


def _class_trajectory(gesture_id: str, n_frames: int) -> np.ndarray:
    """Noise-free joint trajectory (T, 14, 2) for one gesture class.

    Each class parks the wrists at a distinct angle on a wheel around the
    chin; dynamic classes additionally swing the wrists at a class-specific
    frequency and phase, so classes are separable by construction.
    """
    pose = np.tile(_BASE_POSE, (n_frames, 1, 1))
    chin = _BASE_POSE[_CHIN]
    kind = label_kind(gesture_id)
    wheel_index, wheel_size = _KIND_WHEEL[gesture_id]
    theta = 2.0 * math.pi * wheel_index / wheel_size
    if kind is GestureKind.DYNAMIC:
        theta += 0.1  # desynchronize the two wheels

    right_center = chin + _SIGNATURE_RADIUS * np.array([math.cos(theta), math.sin(theta)])
    left_center = chin + _SIGNATURE_RADIUS_LEFT * np.array(
        [math.cos(theta + 2.4), math.sin(theta + 2.4)]
    )
    pose[:, _R_WRIST] = right_center
    pose[:, _L_WRIST] = left_center

    if kind is GestureKind.DYNAMIC:
        omega = 2.0 * math.pi / (18.0 + 4.0 * wheel_index)
        t = np.arange(n_frames, dtype=np.float64)
        swing = _MOTION_AMPLITUDE * np.stack(
            [np.cos(omega * t + theta), np.sin(omega * t + theta)], axis=1
        )
        pose[:, _R_WRIST] += swing
        pose[:, _L_WRIST, 0] += 0.5 * _MOTION_AMPLITUDE * np.cos(omega * t)

    # Elbows track the shoulder-wrist midpoint with a slight outward drop.
    pose[:, _R_ELBOW] = 0.5 * (pose[:, _R_SHOULDER] + pose[:, _R_WRIST]) + [0.0, 0.12]
    pose[:, _L_ELBOW] = 0.5 * (pose[:, _L_SHOULDER] + pose[:, _L_WRIST]) + [0.0, 0.12]
    return pose


def generate_synthetic(
    cfg: SynthConfig, *, joint_map: JointIndexMap = DEFAULT_JOINT_MAP
) -> Dataset:
    """Build a synthetic dataset; equal configs yield bitwise-equal datasets.

    Random draws happen in a fixed order (patients ascending, classes in
    taxonomy order: camera offset, then per class the frame count and the
    coordinate jitter), so the output is a pure function of the config.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    sequences: list[GestureSequence] = []
    for patient_id in range(1, cfg.n_patients + 1):
        offset = rng.uniform(-cfg.camera_offset_range, cfg.camera_offset_range, size=2)
        for gesture_id in ALL_GESTURE_IDS:
            kind = label_kind(gesture_id)
            lo, hi = cfg.frames_static if kind is GestureKind.STATIC else cfg.frames_dynamic
            n_frames = int(rng.integers(lo, hi + 1))
            coords = _class_trajectory(gesture_id, n_frames)
            coords = coords + offset
            if cfg.noise_sigma > 0:
                coords = coords + rng.normal(0.0, cfg.noise_sigma, size=coords.shape)
            else:
                rng.normal(0.0, 1.0, size=coords.shape)  # keep the draw schedule fixed
            frames = tuple(
                SkeletalFrame(
                    joints=tuple(
                        Joint2D(x=float(coords[t, j, 0]), y=float(coords[t, j, 1]))
                        for j in range(N_JOINTS)
                    )
                )
                for t in range(n_frames)
            )
            sequences.append(
                GestureSequence(
                    patient_id=patient_id,
                    label=GestureLabel.from_id(gesture_id),
                    correct=True,
                    frames=frames,
                )
            )
    return _build_dataset(sequences, joint_map, Provenance.SYNTHETIC)


def write_dataset(ds: Dataset, root: str | Path) -> Path:
    """Write a dataset as frames files plus manifest; returns the manifest path.

    Output is deterministic: rows are ordered by (patient, taxonomy index)
    and floats are serialized with round-tripping precision.
    """
    root = Path(root)
    frames_dir = root / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    order = {gid: i for i, gid in enumerate(ALL_GESTURE_IDS)}
    ordered = sorted(ds.sequences, key=lambda s: (s.patient_id, order[s.label.id]))

    manifest_path = root / "manifest.csv"
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for seq in ordered:
            rel = f"frames/p{seq.patient_id:03d}_{seq.label.id}.txt"
            (root / rel).write_text(serialize_frames(seq.frames))
            writer.writerow(
                [seq.patient_id, seq.label.id, 1 if seq.correct else 0, rel]
            )
    return manifest_path


def dataset_checksum(root: str | Path, manifest: str | Path | None = None) -> str:
    """SHA-256 over the manifest and every referenced frames file, in order."""
    root = Path(root)
    manifest_path = Path(manifest) if manifest is not None else root / "manifest.csv"
    digest = hashlib.sha256()
    digest.update(manifest_path.read_bytes())
    with open(manifest_path, newline="") as fh:
        for row in csv.DictReader(fh):
            digest.update((root / row["frames_path"]).read_bytes())
    return digest.hexdigest()
