"""Domain types for 2-D skeletal gesture data and the 29-gesture taxonomy.

A recording session yields, per video frame, the pixel coordinates of 14
upper-body joints plus a per-joint detector confidence.  Each performance of
a gesture by one patient is a ``GestureSequence``.  The gesture taxonomy is
fixed: 29 gesture ids, 15 static (held poses) and 14 dynamic (motions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

N_JOINTS = 14


class UnknownLabelError(ValueError):
    """Raised when a gesture id is not one of the 29 taxonomy ids."""


class GestureKind(Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


# Gesture id -> (kind, short description).  Order is canonical and is used
# for class indexing everywhere downstream.
_TAXONOMY: tuple[tuple[str, GestureKind, str], ...] = (
    ("A1_1", GestureKind.STATIC, "Left hand on left ear"),
    ("A1_2", GestureKind.STATIC, "Left hand on right ear"),
    ("A1_3", GestureKind.STATIC, "Right hand on right ear"),
    ("A1_4", GestureKind.STATIC, "Right hand on left ear"),
    ("A1_5", GestureKind.STATIC, "Index and baby finger on table"),
    ("A2_1", GestureKind.STATIC, "Stick together index and baby fingers"),
    ("A2_2", GestureKind.DYNAMIC, "Hands on table, twist toward body"),
    ("A2_3", GestureKind.STATIC, "Bird"),
    ("A2_4", GestureKind.STATIC, "Diamond"),
    ("A2_5", GestureKind.STATIC, "Ring together"),
    ("S1_1", GestureKind.STATIC, "Do a military salute"),
    ("S1_2", GestureKind.STATIC, "Ask for silence"),
    ("S1_3", GestureKind.STATIC, "Show something smells bad"),
    ("S1_4", GestureKind.DYNAMIC, "Tell someone is crazy"),
    ("S1_5", GestureKind.DYNAMIC, "Blow a kiss"),
    ("S2_1", GestureKind.DYNAMIC, "Twiddle your thumbs"),
    ("S2_2", GestureKind.STATIC, "Indicate there is unbearable noise"),
    ("S2_3", GestureKind.STATIC, "Indicate you want to sleep"),
    ("S2_4", GestureKind.STATIC, "Pray"),
    ("P1_1", GestureKind.DYNAMIC, "Comb hair"),
    ("P1_2", GestureKind.DYNAMIC, "Drink a glass of water"),
    ("P1_3", GestureKind.DYNAMIC, "Answer the phone"),
    ("P1_4", GestureKind.DYNAMIC, "Pick up a needle"),
    ("P1_5", GestureKind.DYNAMIC, "Smoke a cigarette"),
    ("P2_1", GestureKind.DYNAMIC, "Unscrew a stopper"),
    ("P2_2", GestureKind.DYNAMIC, "Play piano"),
    ("P2_3", GestureKind.DYNAMIC, "Hammer a nail"),
    ("P2_4", GestureKind.DYNAMIC, "Tear up a paper"),
    ("P2_5", GestureKind.DYNAMIC, "Strike a match"),
)

_KIND_BY_ID: dict[str, GestureKind] = {gid: kind for gid, kind, _ in _TAXONOMY}
_DESC_BY_ID: dict[str, str] = {gid: desc for gid, _, desc in _TAXONOMY}

ALL_GESTURE_IDS: tuple[str, ...] = tuple(gid for gid, _, _ in _TAXONOMY)
STATIC_GESTURE_IDS: tuple[str, ...] = tuple(
    gid for gid, kind, _ in _TAXONOMY if kind is GestureKind.STATIC
)
DYNAMIC_GESTURE_IDS: tuple[str, ...] = tuple(
    gid for gid, kind, _ in _TAXONOMY if kind is GestureKind.DYNAMIC
)


class ClassCounts(NamedTuple):
    n_static: int
    n_dynamic: int
    n_total: int


def label_kind(gesture_id: str) -> GestureKind:
    """Return whether a gesture id names a static pose or a dynamic motion."""
    try:
        return _KIND_BY_ID[gesture_id]
    except KeyError:
        raise UnknownLabelError(f"unknown gesture id {gesture_id!r}") from None


def label_description(gesture_id: str) -> str:
    """Human-readable gloss for a gesture id."""
    if gesture_id not in _DESC_BY_ID:
        raise UnknownLabelError(f"unknown gesture id {gesture_id!r}")
    return _DESC_BY_ID[gesture_id]


def class_counts() -> ClassCounts:
    """Static/dynamic/total class counts of the built-in taxonomy."""
    return ClassCounts(
        n_static=len(STATIC_GESTURE_IDS),
        n_dynamic=len(DYNAMIC_GESTURE_IDS),
        n_total=len(ALL_GESTURE_IDS),
    )


@dataclass(frozen=True)
class GestureLabel:
    """One of the 29 gesture classes.

    ``kind`` is stored redundantly with ``id`` so that a label constructed by
    hand with a mismatched kind is caught by :func:`validate_sequence`.
    """

    id: str
    kind: GestureKind

    @classmethod
    def from_id(cls, gesture_id: str) -> "GestureLabel":
        return cls(id=gesture_id, kind=label_kind(gesture_id))


def all_labels() -> tuple[GestureLabel, ...]:
    return tuple(GestureLabel(gid, kind) for gid, kind, _ in _TAXONOMY)


@dataclass(frozen=True)
class Joint2D:
    """A single detected joint: pixel coordinates plus detector confidence.

    Confidence defaults to 1.0 for sources that do not report one
    (e.g. synthetic data).
    """

    x: float
    y: float
    confidence: float = 1.0


@dataclass(frozen=True)
class SkeletalFrame:
    """One time step: 14 joints in fixed column order.

    ``aux_rows`` holds the two trailing rows of the raw per-frame matrix when
    the source file carried them.  They are kept only for ingest round-trip
    fidelity and are dropped before any modeling.
    """

    joints: tuple[Joint2D, ...]
    aux_rows: tuple[tuple[float, ...], tuple[float, ...]] | None = None


@dataclass(frozen=True)
class GestureSequence:
    """All frames of one patient performing one gesture once."""

    patient_id: int
    label: GestureLabel
    correct: bool
    frames: tuple[SkeletalFrame, ...]

    @property
    def n_frames(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class JointIndexMap:
    """Names the 14 joint columns and designates which one is the chin.

    The detector that produced the source data does not fix a documented
    column order, so the map is configuration: the default below lists the
    head-first order with the chin in column 1.
    """

    names: tuple[str, ...]
    chin_index: int

    def __post_init__(self) -> None:
        if len(self.names) != N_JOINTS:
            raise ValueError(f"expected {N_JOINTS} joint names, got {len(self.names)}")
        if len(set(self.names)) != len(self.names):
            raise ValueError("joint names must be unique")
        if not 0 <= self.chin_index < N_JOINTS:
            raise ValueError(f"chin_index {self.chin_index} outside [0, {N_JOINTS})")


DEFAULT_JOINT_MAP = JointIndexMap(
    names=(
        "head_top",
        "chin",
        "right_shoulder",
        "right_elbow",
        "right_wrist",
        "left_shoulder",
        "left_elbow",
        "left_wrist",
        "right_hip",
        "right_knee",
        "right_ankle",
        "left_hip",
        "left_knee",
        "left_ankle",
    ),
    chin_index=1,
)


def validate_sequence(seq: GestureSequence) -> list[str]:
    """Check every invariant of a sequence; return violations (empty = ok).

    Violations are data, not failures: malformed input is reported, never
    raised, so callers can collect problems across a whole dataset.
    """
    problems: list[str] = []
    if seq.patient_id < 1:
        problems.append(f"patient_id {seq.patient_id} must be >= 1")
    if seq.label.id not in _KIND_BY_ID:
        problems.append(f"unknown gesture id {seq.label.id!r}")
    elif seq.label.kind is not _KIND_BY_ID[seq.label.id]:
        problems.append(
            f"label {seq.label.id} tagged {seq.label.kind.value}, "
            f"taxonomy says {_KIND_BY_ID[seq.label.id].value}"
        )
    if seq.n_frames < 1:
        problems.append("sequence has no frames")

    aux_presence: set[bool] = set()
    for t, frame in enumerate(seq.frames):
        if len(frame.joints) != N_JOINTS:
            problems.append(f"frame {t}: expected {N_JOINTS} joints, got {len(frame.joints)}")
            continue
        for j, joint in enumerate(frame.joints):
            if not (math.isfinite(joint.x) and math.isfinite(joint.y)):
                problems.append(f"frame {t}, joint {j}: non-finite coordinates "
                                f"({joint.x!r}, {joint.y!r})")
            if not 0.0 <= joint.confidence <= 1.0:
                problems.append(f"frame {t}, joint {j}: confidence {joint.confidence!r} "
                                f"outside [0, 1]")
        aux_presence.add(frame.aux_rows is not None)
        if frame.aux_rows is not None:
            for r, row in enumerate(frame.aux_rows):
                if len(row) != N_JOINTS:
                    problems.append(f"frame {t}: aux row {r} has {len(row)} values, "
                                    f"expected {N_JOINTS}")
    if len(aux_presence) > 1:
        problems.append("aux rows present in some frames but not all")
    return problems


def sequence_arrays(seq: GestureSequence) -> tuple[np.ndarray, np.ndarray]:
    """Dense views of a sequence: coordinates (T, 14, 2) and confidences (T, 14)."""
    t = seq.n_frames
    coords = np.empty((t, N_JOINTS, 2), dtype=np.float64)
    conf = np.empty((t, N_JOINTS), dtype=np.float64)
    for i, frame in enumerate(seq.frames):
        for j, joint in enumerate(frame.joints):
            coords[i, j, 0] = joint.x
            coords[i, j, 1] = joint.y
            conf[i, j] = joint.confidence
    return coords, conf
