"""Sequence preprocessing: smoothing, sliding windows, chin-referenced features.

The chain runs in a fixed order: Savitzky-Golay smoothing over the *full*
sequence, then stride-1 sliding windows (zero-padded at the front when the
sequence is shorter than the window), then one of five per-window coordinate
normalizations, all referenced to the chin joint of the window's first
non-padded frame:

  M1  chin-relative Cartesian offsets            (dx, dy)           28 features
  M2  M1 divided componentwise by the chin       (dx/xc, dy/yc)     28
  M3  polar form of M1                           (distance, angle)  28
  M4  M1 and M3 side by side                                        56
  M5  M2 and M3 side by side                                        56

Subtracting the reference chin removes the camera-position bias between
patients; the ratio form additionally divides out the reference location.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .skeleton import (
    N_JOINTS,
    GestureLabel,
    GestureSequence,
    Joint2D,
    JointIndexMap,
    SkeletalFrame,
    sequence_arrays,
)


class DegenerateReferenceError(ValueError):
    """Chin-ratio normalization hit a reference coordinate of exactly zero."""


# ---------------------------------------------------------------------------
# Savitzky-Golay smoothing


@functools.lru_cache(maxsize=None)
def _cached_savgol(m: int, order: int) -> tuple[float, ...]:
    half = m // 2
    t = np.arange(-half, half + 1, dtype=np.float64)
    design = np.vander(t, order + 1, increasing=True)
    # Row 0 of (A^T A)^-1 A^T evaluates the least-squares polynomial at t=0,
    # which is exactly the smoothing weight vector.
    weights = np.linalg.solve(design.T @ design, design.T)[0]
    return tuple(float(w) for w in weights)


def savgol_coefficients(m: int, order: int) -> np.ndarray:
    """Least-squares smoothing weights for a degree-``order`` fit on m points.

    Computed from the normal equations, never hardcoded.  The weights are
    symmetric and sum to 1.  Raises ``ValueError`` for even m or m <= order.
    """
    if m % 2 == 0:
        raise ValueError(f"window size m must be odd, got {m}")
    if m <= order:
        raise ValueError(f"need m > polynomial order, got m={m}, order={order}")
    if order < 0:
        raise ValueError(f"polynomial order must be >= 0, got {order}")
    return np.array(_cached_savgol(m, order))


@dataclass(frozen=True)
class SavgolSpec:
    """Smoothing filter shape: window size m (odd) and polynomial degree."""

    m: int = 5
    order: int = 2

    def __post_init__(self) -> None:
        savgol_coefficients(self.m, self.order)  # validates (m, order)

    @property
    def coefficients(self) -> np.ndarray:
        return savgol_coefficients(self.m, self.order)


def smooth_series(values: np.ndarray, spec: SavgolSpec) -> np.ndarray:
    """Smooth along axis 0; boundary rows where the window does not fit are
    copied through unchanged."""
    m = spec.m
    t = values.shape[0]
    out = np.array(values, dtype=np.float64, copy=True)
    if t < m:
        return out
    half = m // 2
    windows = np.lib.stride_tricks.sliding_window_view(values, m, axis=0)
    out[half : t - half] = windows @ spec.coefficients
    return out


def savgol_smooth(seq: GestureSequence, spec: SavgolSpec) -> GestureSequence:
    """Smooth each joint's x and y series independently.

    Confidences and aux rows pass through untouched, as do the first and last
    (m-1)/2 frames.
    """
    coords, _ = sequence_arrays(seq)
    smoothed = smooth_series(coords, spec)
    frames = tuple(
        SkeletalFrame(
            joints=tuple(
                Joint2D(
                    x=float(smoothed[t, j, 0]),
                    y=float(smoothed[t, j, 1]),
                    confidence=frame.joints[j].confidence,
                )
                for j in range(N_JOINTS)
            ),
            aux_rows=frame.aux_rows,
        )
        for t, frame in enumerate(seq.frames)
    )
    return GestureSequence(
        patient_id=seq.patient_id, label=seq.label, correct=seq.correct, frames=frames
    )


# ---------------------------------------------------------------------------
# Sliding windows


@dataclass(frozen=True)
class WindowSpec:
    """Fixed window length in frames and the shift between successive windows."""

    length: int
    stride: int = 1

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"window length must be >= 1, got {self.length}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


@dataclass(frozen=True)
class WindowSource:
    """Where a window came from: the sequence identity and its start frame."""

    patient_id: int
    label: GestureLabel
    start: int


@dataclass(eq=False)
class RawWindow:
    """W consecutive frames as arrays, before normalization.

    ``pad_count`` leading rows are all-zero filler for sequences shorter than
    the window.
    """

    coords: np.ndarray  # (W, 14, 2)
    confidence: np.ndarray  # (W, 14)
    pad_count: int
    source: WindowSource


def slide_windows(seq: GestureSequence, spec: WindowSpec) -> list[RawWindow]:
    """Cut a sequence into windows of ``spec.length`` frames.

    T >= W: floor((T - W) / stride) + 1 windows, no padding.
    T <  W: a single window with W - T leading zero frames.
    """
    coords, conf = sequence_arrays(seq)
    return windows_from_arrays(coords, conf, spec, seq.patient_id, seq.label)


def windows_from_arrays(
    coords: np.ndarray,
    conf: np.ndarray,
    spec: WindowSpec,
    patient_id: int,
    label: GestureLabel,
) -> list[RawWindow]:
    t = coords.shape[0]
    w = spec.length
    if t < w:
        pad = w - t
        padded_coords = np.zeros((w, N_JOINTS, 2), dtype=np.float64)
        padded_conf = np.zeros((w, N_JOINTS), dtype=np.float64)
        padded_coords[pad:] = coords
        padded_conf[pad:] = conf
        return [
            RawWindow(
                coords=padded_coords,
                confidence=padded_conf,
                pad_count=pad,
                source=WindowSource(patient_id, label, 0),
            )
        ]
    return [
        RawWindow(
            coords=coords[start : start + w].copy(),
            confidence=conf[start : start + w].copy(),
            pad_count=0,
            source=WindowSource(patient_id, label, start),
        )
        for start in range(0, t - w + 1, spec.stride)
    ]


# ---------------------------------------------------------------------------
# Normalization


class NormMethod(IntEnum):
    M1 = 1  # chin-relative Cartesian
    M2 = 2  # chin-relative, divided by chin coordinates
    M3 = 3  # polar around the chin
    M4 = 4  # M1 ++ M3
    M5 = 5  # M2 ++ M3


def feature_dim(method: NormMethod, include_confidence: bool = False) -> int:
    """Feature columns per frame: 2 per joint for M1-M3, 4 for M4/M5."""
    base = N_JOINTS * (4 if method in (NormMethod.M4, NormMethod.M5) else 2)
    return base + (N_JOINTS if include_confidence else 0)


def to_polar(p: Joint2D, ref: Joint2D) -> tuple[float, float]:
    """Polar form of a joint around a reference: (distance, angle).

    The angle is the full-quadrant atan2 of the offset, in (-pi, pi]; a joint
    coinciding with the reference gets angle 0 by convention.
    """
    dx = p.x - ref.x
    dy = p.y - ref.y
    e = math.hypot(dx, dy)
    if e == 0.0:
        return 0.0, 0.0
    return e, math.atan2(dy, dx)


@dataclass(eq=False)
class FeatureWindow:
    """Normalized W x D feature matrix ready for a classifier."""

    data: np.ndarray  # (W, D)
    pad_count: int
    method: NormMethod
    source: WindowSource


def _interleave(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Zip two (T, 14) arrays into (T, 28) as [a0, b0, a1, b1, ...]."""
    out = np.empty((a.shape[0], 2 * a.shape[1]), dtype=np.float64)
    out[:, 0::2] = a
    out[:, 1::2] = b
    return out


def normalize_window(
    raw: RawWindow,
    method: NormMethod,
    joint_map: JointIndexMap,
    include_confidence: bool = False,
) -> FeatureWindow:
    """Normalize one window against the chin of its first non-padded frame.

    Padded rows stay exactly zero.  Raises
    :class:`DegenerateReferenceError` for M2/M5 when a reference chin
    coordinate is exactly zero.
    """
    w = raw.coords.shape[0]
    pad = raw.pad_count
    if pad >= w:
        raise ValueError("window has no non-padded frame to take the chin from")
    chin = raw.coords[pad, joint_map.chin_index]
    x_chin, y_chin = float(chin[0]), float(chin[1])

    body = raw.coords[pad:]  # (W - pad, 14, 2)
    delta = body - chin

    blocks: list[np.ndarray] = []
    if method in (NormMethod.M1, NormMethod.M4):
        blocks.append(_interleave(delta[..., 0], delta[..., 1]))
    if method in (NormMethod.M2, NormMethod.M5):
        if x_chin == 0.0 or y_chin == 0.0:
            raise DegenerateReferenceError(
                f"reference chin ({x_chin}, {y_chin}) has a zero coordinate; "
                "chin-ratio normalization is undefined"
            )
        blocks.append(_interleave(delta[..., 0] / x_chin, delta[..., 1] / y_chin))
    if method in (NormMethod.M3, NormMethod.M4, NormMethod.M5):
        dist = np.hypot(delta[..., 0], delta[..., 1])
        angle = np.arctan2(delta[..., 1], delta[..., 0])
        angle = np.where(dist == 0.0, 0.0, angle)
        blocks.append(_interleave(dist, angle))
    if include_confidence:
        blocks.append(raw.confidence[pad:])

    data = np.zeros((w, feature_dim(method, include_confidence)), dtype=np.float64)
    data[pad:] = np.concatenate(blocks, axis=1)
    return FeatureWindow(data=data, pad_count=pad, method=method, source=raw.source)


# ---------------------------------------------------------------------------
# Full chain


def preprocess_sequence(
    seq: GestureSequence,
    method: NormMethod,
    window_spec: WindowSpec,
    joint_map: JointIndexMap,
    savgol_spec: SavgolSpec | None = SavgolSpec(),
    include_confidence: bool = False,
) -> list[FeatureWindow]:
    """Smooth (optional), window, and normalize one sequence."""
    coords, conf = sequence_arrays(seq)
    if savgol_spec is not None:
        coords = smooth_series(coords, savgol_spec)
    raw = windows_from_arrays(coords, conf, window_spec, seq.patient_id, seq.label)
    return [normalize_window(r, method, joint_map, include_confidence) for r in raw]
