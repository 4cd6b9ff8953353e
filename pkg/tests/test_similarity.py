from fractions import Fraction

import numpy as np
import pytest

from cardiomix.core import ArgumentError, labels_from_string
from cardiomix.oracles import pair_counts_ref, sim_ref, sliding_counts_ref
from cardiomix.rng import Stream
from cardiomix.similarity import (
    cosine_signal_sim,
    default_stride,
    enumerate_windows,
    iou_class,
    sim,
    sliding_sim,
)

L = labels_from_string


def random_labels(stream, length):
    return (stream.u64_block(length) & np.uint64(3)).astype(np.int64)


class TestIouClass:
    def test_identical_support(self):
        assert iou_class(L("1111"), L("1111"), 1) == 1

    def test_disjoint_support(self):
        # intersection 0, union 4
        assert iou_class(L("1100"), L("0011"), 1) == 0

    def test_partial_overlap(self):
        # class 1: both at t=2, b alone at t=3 -> 1/2 (per-position oracle)
        assert pair_counts_ref(L("0012"), L("0011"))[0][1] == 1
        assert pair_counts_ref(L("0012"), L("0011"))[1][1] == 2
        assert iou_class(L("0012"), L("0011"), 1) == Fraction(1, 2)

    def test_absent_class_marker(self):
        assert iou_class(L("0011"), L("0011"), 3) is None

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            iou_class(L("01"), L("011"), 1)


class TestSim:
    def test_identity(self):
        for text in ("0123", "0000", "3", "012301"):
            assert sim(L(text), L(text)).exact() == 1

    def test_disjoint_single_class(self):
        assert sim(L("1111"), L("3333")).exact() == 0

    def test_mixed(self):
        # classes 0,1,2 present: IoU 1, 1/2, 0 -> mean 1/2 (oracle-verified)
        score = sim(L("0012"), L("0011"))
        assert score.exact() == sim_ref(L("0012"), L("0011"))
        assert score.exact() == Fraction(1, 2)

    def test_paper_normalization_mode(self):
        # absent class 3 scores 1 and the divisor is C
        score = sim(L("0012"), L("0011"), absent="one")
        assert score.exact() == sim_ref(L("0012"), L("0011"), absent="one")
        assert score.exact() == Fraction(5, 8)

    def test_symmetry_random(self):
        stream = Stream(21)
        for trial in range(200):
            st = stream.child(trial)
            n = st.randint(1, 40)
            a, b = random_labels(st, n), random_labels(st, n)
            sa, sb = sim(a, b), sim(b, a)
            assert sa.inter == sb.inter and sa.union == sb.union

    def test_value_one_iff_identical_support(self):
        stream = Stream(22)
        for trial in range(200):
            st = stream.child(trial)
            n = st.randint(1, 30)
            a, b = random_labels(st, n), random_labels(st, n)
            identical = bool(np.array_equal(a, b))
            assert (sim(a, b).exact() == 1) == identical

    def test_monotone_intersection(self):
        # copying one of a's labels into b never lowers that class's intersection
        stream = Stream(23)
        for trial in range(200):
            st = stream.child(trial)
            n = st.randint(2, 30)
            a, b = random_labels(st, n), random_labels(st, n)
            pos = st.below(n)
            c = int(a[pos])
            before = sim(a, b)
            b2 = b.copy()
            b2[pos] = c
            after = sim(a, b2)
            assert after.inter[c] >= before.inter[c]


class TestEnumerateWindows:
    def test_exact_tiling(self):
        assert enumerate_windows(10, 4, 2).starts.tolist() == [0, 2, 4, 6]

    def test_tail_appended(self):
        assert enumerate_windows(11, 4, 3).starts.tolist() == [0, 3, 6, 7]

    def test_single_window(self):
        assert enumerate_windows(5, 5, 2).starts.tolist() == [0]

    def test_rejects_wide_window(self):
        with pytest.raises(ArgumentError):
            enumerate_windows(4, 5, 1)

    def test_always_reaches_end(self):
        stream = Stream(31)
        for trial in range(300):
            st = stream.child(trial)
            t = st.randint(1, 200)
            w = st.randint(1, t)
            s = st.randint(1, max(1, w))
            scan = enumerate_windows(t, w, s)
            starts = scan.starts
            assert int(starts[-1]) == t - w
            assert np.all(np.diff(starts) > 0)
            assert int(starts[0]) == 0

    def test_default_stride(self):
        assert default_stride(250) == 125
        assert default_stride(251) == 125
        assert default_stride(1) == 1


class TestSlidingSim:
    def test_identity_windows(self):
        query = L("0122")
        key = np.tile(query, 5)
        scan = enumerate_windows(key.size, 4, 4)
        assert all(s.exact() == 1 for s in sliding_sim(query, key, scan))

    def test_disjoint(self):
        query = L("0000")
        key = L("2" * 12)
        scan = enumerate_windows(12, 4, 2)
        assert all(s.exact() == 0 for s in sliding_sim(query, key, scan))

    def test_equals_per_window_sim(self):
        # core oracle-equivalence property, exact integer counts
        stream = Stream(77)
        for trial in range(300):
            st = stream.child(trial)
            t = st.randint(2, 300)
            w = st.randint(1, min(64, t))
            stride = st.randint(1, w)
            scan = enumerate_windows(t, w, stride)
            query = random_labels(st, w)
            key = random_labels(st, t)
            engine = sliding_sim(query, key, scan)
            reference = sliding_counts_ref(query, key, scan)
            for got, (inter, union) in zip(engine, reference, strict=True):
                assert got.inter == inter
                assert got.union == union

    def test_width_mismatch(self):
        scan = enumerate_windows(10, 4, 2)
        with pytest.raises(ArgumentError):
            sliding_sim(L("012"), L("0" * 10), scan)


class TestCosine:
    def test_identical(self):
        x = np.array([1.0, -2.0, 3.0])
        assert cosine_signal_sim(x, x) == pytest.approx(1.0)

    def test_negated(self):
        x = np.array([1.0, -2.0, 3.0])
        assert cosine_signal_sim(x, -x) == pytest.approx(-1.0)

    def test_orthogonal(self):
        assert cosine_signal_sim([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_zero_vector_convention(self):
        assert cosine_signal_sim([0.0, 0.0], [1.0, 2.0]) == 0.0

    def test_width_mismatch(self):
        with pytest.raises(ArgumentError):
            cosine_signal_sim([1.0], [1.0, 2.0])
