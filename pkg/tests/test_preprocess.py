"""Smoothing, windowing, and the five normalization methods.

Independent oracles used here: exact least-squares rationals, scipy's
Savitzky-Golay routines, numpy.polyfit on impulse responses, and direct
per-joint recomputation with math.hypot / math.atan2.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.signal

from skelgest.preprocess import (
    DegenerateReferenceError,
    NormMethod,
    RawWindow,
    SavgolSpec,
    WindowSpec,
    WindowSource,
    feature_dim,
    normalize_window,
    preprocess_sequence,
    savgol_coefficients,
    savgol_smooth,
    slide_windows,
    smooth_series,
    to_polar,
    windows_from_arrays,
)
from skelgest.skeleton import (
    DEFAULT_JOINT_MAP,
    N_JOINTS,
    GestureLabel,
    GestureSequence,
    Joint2D,
    JointIndexMap,
    SkeletalFrame,
    sequence_arrays,
)

LABEL = GestureLabel.from_id("A1_1")


def _make_sequence(coords, confidence=None, label=LABEL, patient_id=1):
    coords = np.asarray(coords, dtype=np.float64)
    t = coords.shape[0]
    if confidence is None:
        confidence = np.full((t, N_JOINTS), 0.9)
    frames = tuple(
        SkeletalFrame(
            joints=tuple(
                Joint2D(coords[i, j, 0], coords[i, j, 1], confidence[i][j])
                for j in range(N_JOINTS)
            )
        )
        for i in range(t)
    )
    return GestureSequence(patient_id=patient_id, label=label, correct=True, frames=frames)


def _random_sequence(rng, t, **kwargs):
    return _make_sequence(rng.normal(size=(t, N_JOINTS, 2)) * 50 + 200, **kwargs)


def _raw_window(coords, pad_count=0, confidence=None):
    coords = np.asarray(coords, dtype=np.float64)
    w = coords.shape[0]
    if confidence is None:
        confidence = np.full((w, N_JOINTS), 0.5)
    return RawWindow(
        coords=coords,
        confidence=np.asarray(confidence, dtype=np.float64),
        pad_count=pad_count,
        source=WindowSource(patient_id=1, label=LABEL, start=0),
    )


class TestSavgolCoefficients:
    def test_quadratic_five_point_exact_rationals(self):
        """Degree-2 fit on 5 points has the classic closed form
        (-3, 12, 17, 12, -3) / 35."""
        expected = [Fraction(n, 35) for n in (-3, 12, 17, 12, -3)]
        got = savgol_coefficients(5, 2)
        assert np.max(np.abs(got - np.array([float(f) for f in expected]))) <= 1e-15

    @pytest.mark.parametrize("m,order", [(5, 2), (7, 2), (9, 3), (11, 4), (5, 3)])
    def test_matches_scipy(self, m, order):
        ours = savgol_coefficients(m, order)
        # scipy returns weights ordered for correlation; flip for convolution
        # symmetry (they coincide anyway for these symmetric kernels).
        theirs = scipy.signal.savgol_coeffs(m, order)
        assert np.max(np.abs(ours - theirs[::-1])) <= 1e-12

    @pytest.mark.parametrize("m,order", [(5, 2), (7, 3)])
    def test_matches_polyfit_impulse(self, m, order):
        """Weight k = value at t=0 of the least-squares polynomial fitted to a
        unit impulse at position k."""
        half = m // 2
        t = np.arange(-half, half + 1, dtype=np.float64)
        ours = savgol_coefficients(m, order)
        for k in range(m):
            impulse = np.zeros(m)
            impulse[k] = 1.0
            poly = np.polynomial.polynomial.polyfit(t, impulse, order)
            assert abs(ours[k] - poly[0]) <= 1e-12

    def test_symmetric_and_normalized(self):
        for m, order in [(5, 2), (9, 2), (7, 4)]:
            c = savgol_coefficients(m, order)
            assert np.max(np.abs(c - c[::-1])) <= 1e-12
            assert abs(c.sum() - 1.0) <= 1e-12

    def test_validation(self):
        with pytest.raises(ValueError, match="odd"):
            savgol_coefficients(4, 2)
        with pytest.raises(ValueError):
            savgol_coefficients(3, 3)
        with pytest.raises(ValueError):
            savgol_coefficients(5, -1)

    def test_spec_validates_on_construction(self):
        with pytest.raises(ValueError):
            SavgolSpec(m=6, order=2)
        assert SavgolSpec().m == 5 and SavgolSpec().order == 2


class TestSmoothSeries:
    def test_constant_is_fixed_point(self):
        series = np.full((12, 3), 7.25)
        out = smooth_series(series, SavgolSpec())
        assert np.max(np.abs(out - series)) <= 1e-12

    def test_linear_is_fixed_point(self):
        """A degree-2 fit reproduces any polynomial of degree <= 2 exactly."""
        t = np.arange(20, dtype=np.float64)
        series = np.stack([3.0 * t - 5.0, -0.5 * t + 2.0, 0.25 * t * t - t], axis=1)
        out = smooth_series(series, SavgolSpec())
        assert np.max(np.abs(out - series)) <= 1e-9

    def test_boundary_rows_pass_through(self):
        rng = np.random.default_rng(0)
        series = rng.normal(size=(15, 4))
        out = smooth_series(series, SavgolSpec(m=5, order=2))
        assert np.array_equal(out[:2], series[:2])
        assert np.array_equal(out[-2:], series[-2:])
        assert not np.array_equal(out[2:-2], series[2:-2])

    def test_short_series_untouched(self):
        rng = np.random.default_rng(1)
        series = rng.normal(size=(4, 2))
        out = smooth_series(series, SavgolSpec(m=5, order=2))
        assert np.array_equal(out, series)

    def test_interior_matches_scipy(self):
        rng = np.random.default_rng(2)
        series = rng.normal(size=(30, 5))
        ours = smooth_series(series, SavgolSpec(m=5, order=2))
        theirs = scipy.signal.savgol_filter(series, 5, 2, axis=0)
        assert np.max(np.abs(ours[2:-2] - theirs[2:-2])) <= 1e-12

    def test_input_not_mutated(self):
        rng = np.random.default_rng(3)
        series = rng.normal(size=(10, 2))
        before = series.copy()
        smooth_series(series, SavgolSpec())
        assert np.array_equal(series, before)


class TestSavgolSmooth:
    def test_smooths_coords_keeps_confidence(self):
        rng = np.random.default_rng(4)
        conf = rng.random((10, N_JOINTS))
        seq = _make_sequence(rng.normal(size=(10, N_JOINTS, 2)), confidence=conf)
        out = savgol_smooth(seq, SavgolSpec())
        coords_in, _ = sequence_arrays(seq)
        coords_out, conf_out = sequence_arrays(out)
        expected = smooth_series(coords_in, SavgolSpec())
        assert np.max(np.abs(coords_out - expected)) <= 1e-12
        assert np.array_equal(conf_out, conf)
        assert out.label == seq.label and out.patient_id == seq.patient_id


class TestWindows:
    @pytest.mark.parametrize(
        "t,w,stride,expected",
        [(10, 4, 1, 7), (10, 10, 1, 1), (10, 4, 3, 3), (11, 4, 3, 3), (12, 4, 3, 3)],
    )
    def test_count_closed_form(self, t, w, stride, expected):
        rng = np.random.default_rng(5)
        seq = _random_sequence(rng, t)
        windows = slide_windows(seq, WindowSpec(w, stride))
        assert len(windows) == expected
        assert expected == (t - w) // stride + 1

    def test_window_contents_and_starts(self):
        rng = np.random.default_rng(6)
        seq = _random_sequence(rng, 8)
        coords, _ = sequence_arrays(seq)
        windows = slide_windows(seq, WindowSpec(3))
        assert [w.source.start for w in windows] == list(range(6))
        for w in windows:
            assert w.pad_count == 0
            assert np.array_equal(w.coords, coords[w.source.start : w.source.start + 3])

    def test_short_sequence_padded_in_front(self):
        rng = np.random.default_rng(7)
        seq = _random_sequence(rng, 3)
        coords, conf = sequence_arrays(seq)
        (window,) = slide_windows(seq, WindowSpec(8))
        assert window.pad_count == 5
        assert np.array_equal(window.coords[:5], np.zeros((5, N_JOINTS, 2)))
        assert np.array_equal(window.coords[5:], coords)
        assert np.array_equal(window.confidence[:5], np.zeros((5, N_JOINTS)))
        assert np.array_equal(window.confidence[5:], conf)

    def test_windows_are_copies(self):
        rng = np.random.default_rng(8)
        seq = _random_sequence(rng, 6)
        coords, conf = sequence_arrays(seq)
        windows = windows_from_arrays(coords, conf, WindowSpec(4), 1, LABEL)
        windows[0].coords[0, 0, 0] = 1e9
        assert coords[0, 0, 0] != 1e9

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            WindowSpec(0)
        with pytest.raises(ValueError):
            WindowSpec(4, stride=0)


class TestToPolar:
    def test_quadrants(self):
        ref = Joint2D(1.0, 1.0, 1.0)
        cases = [
            ((4.0, 5.0), 5.0, math.atan2(4.0, 3.0)),
            ((-2.0, 5.0), 5.0, math.atan2(4.0, -3.0)),
            ((-2.0, -3.0), 5.0, math.atan2(-4.0, -3.0)),
            ((4.0, -3.0), 5.0, math.atan2(-4.0, 3.0)),
            ((1.0, 6.0), 5.0, math.pi / 2),
            ((-4.0, 1.0), 5.0, math.pi),
        ]
        for (x, y), dist, angle in cases:
            e, a = to_polar(Joint2D(x, y, 1.0), ref)
            assert abs(e - dist) <= 1e-12
            assert abs(a - angle) <= 1e-12

    def test_coincident_point_is_origin(self):
        p = Joint2D(3.5, -2.0, 1.0)
        assert to_polar(p, p) == (0.0, 0.0)

    def test_matches_hypot_atan2_randomly(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            px, py, rx, ry = rng.normal(size=4) * 100
            e, a = to_polar(Joint2D(px, py, 1.0), Joint2D(rx, ry, 1.0))
            assert e == math.hypot(px - rx, py - ry)
            assert a == math.atan2(py - ry, px - rx)


class TestFeatureDim:
    @pytest.mark.parametrize(
        "method,expected",
        [
            (NormMethod.M1, 28),
            (NormMethod.M2, 28),
            (NormMethod.M3, 28),
            (NormMethod.M4, 56),
            (NormMethod.M5, 56),
        ],
    )
    def test_base_dims(self, method, expected):
        assert feature_dim(method) == expected
        assert feature_dim(method, include_confidence=True) == expected + 14


class TestNormalizeWindow:
    def _hand_window(self):
        """One real frame with easy numbers; chin (joint 1) at (10, 20)."""
        coords = np.zeros((1, N_JOINTS, 2))
        coords[0, 0] = (13.0, 24.0)  # dx=3, dy=4 -> dist 5
        coords[0, 1] = (10.0, 20.0)  # the chin itself
        coords[0, 2] = (10.0, 15.0)  # dx=0, dy=-5
        for j in range(3, N_JOINTS):
            coords[0, j] = (10.0 + j, 20.0 - j)
        return _raw_window(coords)

    def test_method1_hand_case(self):
        out = normalize_window(self._hand_window(), NormMethod.M1, DEFAULT_JOINT_MAP)
        assert out.data.shape == (1, 28)
        assert out.data[0, 0] == 3.0 and out.data[0, 1] == 4.0
        assert out.data[0, 2] == 0.0 and out.data[0, 3] == 0.0  # the chin itself
        assert out.data[0, 4] == 0.0 and out.data[0, 5] == -5.0
        assert out.data[0, 6] == 3.0 and out.data[0, 7] == -3.0  # joint 3

    def test_method2_hand_case(self):
        out = normalize_window(self._hand_window(), NormMethod.M2, DEFAULT_JOINT_MAP)
        assert abs(out.data[0, 0] - 0.3) <= 1e-15  # 3/10
        assert abs(out.data[0, 1] - 0.2) <= 1e-15  # 4/20
        assert out.data[0, 4] == 0.0
        assert abs(out.data[0, 5] - (-0.25)) <= 1e-15  # -5/20

    def test_method3_hand_case(self):
        out = normalize_window(self._hand_window(), NormMethod.M3, DEFAULT_JOINT_MAP)
        assert abs(out.data[0, 0] - 5.0) <= 1e-12
        assert abs(out.data[0, 1] - math.atan2(4.0, 3.0)) <= 1e-12
        assert out.data[0, 2] == 0.0 and out.data[0, 3] == 0.0  # chin: dist 0, angle 0
        assert abs(out.data[0, 4] - 5.0) <= 1e-12
        assert abs(out.data[0, 5] - (-math.pi / 2)) <= 1e-12

    def test_method3_matches_per_joint_recompute(self):
        rng = np.random.default_rng(10)
        raw = _raw_window(rng.normal(size=(4, N_JOINTS, 2)) * 30 + 100)
        out = normalize_window(raw, NormMethod.M3, DEFAULT_JOINT_MAP)
        chin = raw.coords[0, DEFAULT_JOINT_MAP.chin_index]
        ref = Joint2D(chin[0], chin[1], 1.0)
        for t in range(4):
            for j in range(N_JOINTS):
                p = Joint2D(raw.coords[t, j, 0], raw.coords[t, j, 1], 1.0)
                e, a = to_polar(p, ref)
                assert abs(out.data[t, 2 * j] - e) <= 1e-12
                assert abs(out.data[t, 2 * j + 1] - a) <= 1e-12

    def test_method4_is_m1_beside_m3(self):
        rng = np.random.default_rng(11)
        raw = _raw_window(rng.normal(size=(5, N_JOINTS, 2)) * 40 + 150)
        m1 = normalize_window(raw, NormMethod.M1, DEFAULT_JOINT_MAP)
        m3 = normalize_window(raw, NormMethod.M3, DEFAULT_JOINT_MAP)
        m4 = normalize_window(raw, NormMethod.M4, DEFAULT_JOINT_MAP)
        assert np.array_equal(m4.data, np.concatenate([m1.data, m3.data], axis=1))

    def test_method5_is_m2_beside_m3(self):
        rng = np.random.default_rng(12)
        raw = _raw_window(rng.normal(size=(5, N_JOINTS, 2)) * 40 + 150)
        m2 = normalize_window(raw, NormMethod.M2, DEFAULT_JOINT_MAP)
        m3 = normalize_window(raw, NormMethod.M3, DEFAULT_JOINT_MAP)
        m5 = normalize_window(raw, NormMethod.M5, DEFAULT_JOINT_MAP)
        assert np.array_equal(m5.data, np.concatenate([m2.data, m3.data], axis=1))

    def test_degenerate_chin_for_ratio_methods(self):
        coords = np.full((2, N_JOINTS, 2), 5.0)
        coords[0, DEFAULT_JOINT_MAP.chin_index] = (0.0, 20.0)
        raw = _raw_window(coords)
        for method in (NormMethod.M2, NormMethod.M5):
            with pytest.raises(DegenerateReferenceError):
                normalize_window(raw, method, DEFAULT_JOINT_MAP)
        # the Cartesian and polar methods do not care
        normalize_window(raw, NormMethod.M1, DEFAULT_JOINT_MAP)
        normalize_window(raw, NormMethod.M3, DEFAULT_JOINT_MAP)

    def test_padded_rows_stay_zero_and_chin_skips_padding(self):
        rng = np.random.default_rng(13)
        coords = np.zeros((6, N_JOINTS, 2))
        coords[2:] = rng.normal(size=(4, N_JOINTS, 2)) * 30 + 100
        raw = _raw_window(coords, pad_count=2)
        out = normalize_window(raw, NormMethod.M1, DEFAULT_JOINT_MAP)
        assert np.array_equal(out.data[:2], np.zeros((2, 28)))
        # reference chin comes from row 2, the first real frame
        chin = coords[2, DEFAULT_JOINT_MAP.chin_index]
        assert out.data[2, 0] == coords[2, 0, 0] - chin[0]
        assert out.data[2, 1] == coords[2, 0, 1] - chin[1]

    def test_fully_padded_window_rejected(self):
        raw = _raw_window(np.zeros((3, N_JOINTS, 2)), pad_count=3)
        with pytest.raises(ValueError, match="non-padded"):
            normalize_window(raw, NormMethod.M1, DEFAULT_JOINT_MAP)

    def test_confidence_columns_appended(self):
        rng = np.random.default_rng(14)
        conf = rng.random((3, N_JOINTS))
        raw = _raw_window(rng.normal(size=(3, N_JOINTS, 2)) + 50, confidence=conf)
        out = normalize_window(
            raw, NormMethod.M1, DEFAULT_JOINT_MAP, include_confidence=True
        )
        assert out.data.shape == (3, 42)
        assert np.array_equal(out.data[:, 28:], conf)

    def test_custom_chin_index_respected(self):
        rng = np.random.default_rng(15)
        coords = rng.normal(size=(2, N_JOINTS, 2)) * 30 + 100
        raw = _raw_window(coords)
        other_map = JointIndexMap(names=DEFAULT_JOINT_MAP.names, chin_index=5)
        out = normalize_window(raw, NormMethod.M1, other_map)
        chin = coords[0, 5]
        assert out.data[0, 10] == 0.0 and out.data[0, 11] == 0.0
        assert out.data[0, 0] == coords[0, 0, 0] - chin[0]


class TestInvariances:
    @pytest.mark.parametrize("method", [NormMethod.M1, NormMethod.M3, NormMethod.M4])
    def test_translation_invariance(self, method):
        """Moving the whole skeleton (camera shift) leaves chin-relative
        features untouched for the subtraction-based methods."""
        rng = np.random.default_rng(16)
        coords = rng.normal(size=(5, N_JOINTS, 2)) * 30 + 200
        shifted = coords + np.array([37.5, -12.25])
        a = normalize_window(_raw_window(coords), method, DEFAULT_JOINT_MAP)
        b = normalize_window(_raw_window(shifted), method, DEFAULT_JOINT_MAP)
        assert np.max(np.abs(a.data - b.data)) <= 1e-9

    def test_ratio_method_not_translation_invariant(self):
        rng = np.random.default_rng(17)
        coords = rng.normal(size=(3, N_JOINTS, 2)) * 30 + 200
        shifted = coords + np.array([40.0, 40.0])
        a = normalize_window(_raw_window(coords), NormMethod.M2, DEFAULT_JOINT_MAP)
        b = normalize_window(_raw_window(shifted), NormMethod.M2, DEFAULT_JOINT_MAP)
        assert np.max(np.abs(a.data - b.data)) > 1e-6

    def test_rotation_preserves_distances(self):
        """Rotating the skeleton about any point keeps every chin distance."""
        rng = np.random.default_rng(18)
        coords = rng.normal(size=(4, N_JOINTS, 2)) * 30 + 200
        theta = 0.7
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        rotated = coords @ rot.T
        a = normalize_window(_raw_window(coords), NormMethod.M3, DEFAULT_JOINT_MAP)
        b = normalize_window(_raw_window(rotated), NormMethod.M3, DEFAULT_JOINT_MAP)
        assert np.max(np.abs(a.data[:, 0::2] - b.data[:, 0::2])) <= 1e-9

    def test_uniform_scale_scales_distances(self):
        rng = np.random.default_rng(19)
        coords = rng.normal(size=(3, N_JOINTS, 2)) * 30 + 200
        a = normalize_window(_raw_window(coords), NormMethod.M3, DEFAULT_JOINT_MAP)
        b = normalize_window(_raw_window(coords * 2.0), NormMethod.M3, DEFAULT_JOINT_MAP)
        assert np.max(np.abs(b.data[:, 0::2] - 2.0 * a.data[:, 0::2])) <= 1e-9
        assert np.max(np.abs(b.data[:, 1::2] - a.data[:, 1::2])) <= 1e-12


class TestPreprocessSequence:
    def test_chain_equals_manual_composition(self):
        rng = np.random.default_rng(20)
        seq = _random_sequence(rng, 12)
        spec = WindowSpec(5)
        sg = SavgolSpec()
        got = preprocess_sequence(seq, NormMethod.M4, spec, DEFAULT_JOINT_MAP, sg)
        smoothed = savgol_smooth(seq, sg)
        manual = [
            normalize_window(r, NormMethod.M4, DEFAULT_JOINT_MAP)
            for r in slide_windows(smoothed, spec)
        ]
        assert len(got) == len(manual) == 8
        for g, m in zip(got, manual):
            assert np.array_equal(g.data, m.data)
            assert g.source == m.source and g.pad_count == m.pad_count

    def test_smoothing_can_be_disabled(self):
        rng = np.random.default_rng(21)
        seq = _random_sequence(rng, 10)
        with_sg = preprocess_sequence(
            seq, NormMethod.M1, WindowSpec(6), DEFAULT_JOINT_MAP
        )
        without = preprocess_sequence(
            seq, NormMethod.M1, WindowSpec(6), DEFAULT_JOINT_MAP, savgol_spec=None
        )
        manual = [
            normalize_window(r, NormMethod.M1, DEFAULT_JOINT_MAP)
            for r in slide_windows(seq, WindowSpec(6))
        ]
        assert any(
            not np.array_equal(a.data, b.data) for a, b in zip(with_sg, without)
        )
        for a, b in zip(without, manual):
            assert np.array_equal(a.data, b.data)

    def test_short_sequence_single_padded_window(self):
        rng = np.random.default_rng(22)
        seq = _random_sequence(rng, 3)
        (only,) = preprocess_sequence(seq, NormMethod.M3, WindowSpec(9), DEFAULT_JOINT_MAP)
        assert only.pad_count == 6
        assert only.data.shape == (9, 28)
        assert np.array_equal(only.data[:6], np.zeros((6, 28)))
