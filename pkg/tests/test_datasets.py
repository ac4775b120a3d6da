"""Synthetic generators, IDX and CSV loaders, booleanizers."""

import numpy as np
import pytest

from csctm.datasets import (
    BadMagic,
    BoolDataset,
    CountMismatch,
    MissingLabelColumn,
    NonNumericCell,
    RaggedRow,
    RawDataset,
    ThermometerBooleanizer,
    ThresholdBooleanizer,
    Truncated,
    booleanize,
    generate_or,
    generate_xor,
    load_csv,
    load_idx,
    or_truth_table,
    subsample,
    write_idx,
    xor_truth_table,
)


class TestXorGenerator:
    def test_labels_follow_xor(self):
        ds = generate_xor(2000, seed=0)
        assert np.array_equal(ds.y, ds.X[:, 0] ^ ds.X[:, 1])

    def test_specific_rows(self):
        table = xor_truth_table()
        rows = {tuple(x): y for x, y in zip(table.X.tolist(), table.y.tolist())}
        assert rows[(0, 1)] == 1
        assert rows[(1, 1)] == 0

    def test_exhaustive_count_four_is_the_table(self):
        ds = generate_xor(4, noise_rate=0.0, exhaustive=True)
        assert sorted(map(tuple, ds.X.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert np.array_equal(ds.y, ds.X[:, 0] ^ ds.X[:, 1])

    def test_noise_flip_rate(self):
        ds = generate_xor(20000, noise_rate=0.1, seed=5)
        clean = ds.X[:, 0] ^ ds.X[:, 1]
        flipped = (ds.y != clean).mean()
        sigma = (0.1 * 0.9 / 20000) ** 0.5
        assert abs(flipped - 0.1) <= 3 * sigma

    def test_distractors_do_not_touch_labels(self):
        ds = generate_xor(500, seed=3, distractors=10)
        assert ds.X.shape == (500, 12)
        assert np.array_equal(ds.y, ds.X[:, 0] ^ ds.X[:, 1])

    def test_noise_rate_validated(self):
        with pytest.raises(ValueError):
            generate_xor(10, noise_rate=0.5)


class TestOrGenerator:
    def test_rows(self):
        table = or_truth_table()
        rows = {tuple(x): y for x, y in zip(table.X.tolist(), table.y.tolist())}
        assert rows[(1, 0)] == 1
        assert rows[(0, 0)] == 0

    def test_class_balance_three_to_one(self):
        # Exact enumeration: 3 of the 4 equally likely inputs are positive.
        ds = generate_or(10000, seed=1)
        positive = ds.y.mean()
        sigma = (0.75 * 0.25 / 10000) ** 0.5
        assert abs(positive - 0.75) <= 3 * sigma


class TestIdx:
    def test_fixture_round_trip(self, tmp_path):
        # Bytes written by hand are the oracle for the loader.
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(4, 784), dtype=np.uint8)
        labels = np.array([3, 1, 4, 1], dtype=np.uint8)
        ip, lp = tmp_path / "img", tmp_path / "lbl"
        write_idx(images, labels, ip, lp, rows=28, cols=28)
        raw = load_idx(ip, lp)
        assert raw.X.shape == (4, 784)
        assert np.array_equal(raw.X.astype(np.uint8), images)
        assert np.array_equal(raw.y, labels)
        assert raw.n_classes == 5

    def test_bad_magic(self, tmp_path):
        # labels magic written where the images magic belongs
        ip, lp = tmp_path / "img", tmp_path / "lbl"
        import struct

        ip.write_bytes(struct.pack(">IIII", 0x00000801, 1, 2, 2) + b"\x00" * 4)
        lp.write_bytes(struct.pack(">II", 0x00000801, 1) + b"\x00")
        with pytest.raises(BadMagic):
            load_idx(ip, lp)

    def test_empty_file_truncated(self, tmp_path):
        ip, lp = tmp_path / "img", tmp_path / "lbl"
        ip.write_bytes(b"")
        lp.write_bytes(b"")
        with pytest.raises(Truncated):
            load_idx(ip, lp)

    def test_short_payload_truncated(self, tmp_path):
        import struct

        ip, lp = tmp_path / "img", tmp_path / "lbl"
        ip.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + b"\x00" * 5)
        lp.write_bytes(struct.pack(">II", 0x00000801, 2) + b"\x00\x01")
        with pytest.raises(Truncated):
            load_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        import struct

        ip, lp = tmp_path / "img", tmp_path / "lbl"
        ip.write_bytes(struct.pack(">IIII", 0x00000803, 1, 2, 2) + b"\x00" * 4)
        lp.write_bytes(struct.pack(">II", 0x00000801, 2) + b"\x00\x01")
        with pytest.raises(CountMismatch):
            load_idx(ip, lp)


class TestCsv:
    def test_two_row_fixture(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b,label\n1.5,2,cat\n0.5,3,dog\n")
        raw = load_csv(p, "label")
        assert len(raw) == 2
        assert raw.feature_names == ["a", "b"]
        assert raw.X[0].tolist() == [1.5, 2.0]

    def test_label_factorization_order(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f,label\n1,cat\n2,dog\n3,cat\n")
        raw = load_csv(p, "label")
        assert raw.y.tolist() == [0, 1, 0]
        assert raw.n_classes == 2

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b,label\n1,2,x\n1,x\n")
        with pytest.raises(RaggedRow):
            load_csv(p, "label")

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,label\noops,x\n")
        with pytest.raises(NonNumericCell):
            load_csv(p, "label")

    def test_missing_label_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(MissingLabelColumn):
            load_csv(p, "target")


class TestThreshold:
    def test_pixels_around_threshold(self):
        bz = ThresholdBooleanizer(75.0)
        bits = bz.transform(np.array([[200.0, 10.0, 75.0]]))
        assert bits.tolist() == [[1, 0, 0]]

    def test_width_mismatch(self):
        bz = ThresholdBooleanizer(75.0)
        bz.fit(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            bz.transform(np.zeros((2, 4)))


class TestThermometer:
    def test_known_edges(self):
        bz = ThermometerBooleanizer(3)
        bz.edges = [np.array([1.0, 2.0, 3.0])]
        bits = bz.transform(np.array([[2.5]]))
        assert bits.tolist() == [[1, 1, 0]]

    def test_bits_monotone_nonincreasing(self):
        rng = np.random.default_rng(4)
        fit = rng.normal(size=(300, 5))
        bz = ThermometerBooleanizer(6).fit(fit)
        bits = bz.transform(rng.normal(size=(200, 5)))
        col = 0
        for edges in bz.edges:
            k = len(edges)
            block = bits[:, col : col + k]
            assert (np.diff(block.astype(int), axis=1) <= 0).all()
            col += k

    def test_edges_strictly_increasing_with_ties(self):
        X = np.array([[1.0], [1.0], [1.0], [2.0]])
        bz = ThermometerBooleanizer(5).fit(X)
        edges = bz.edges[0]
        assert (np.diff(edges) > 0).all()

    def test_constant_feature_contributes_no_bits(self):
        X = np.hstack([np.ones((50, 1)), np.arange(50.0).reshape(-1, 1)])
        bz = ThermometerBooleanizer(4).fit(X)
        assert len(bz.edges[0]) == 1  # all quantiles equal -> single edge
        assert bz.transform(X)[:, 0].sum() == 0  # value never exceeds its edge

    def test_no_leakage(self):
        # Edges depend only on the fit input.
        rng = np.random.default_rng(7)
        fit = rng.normal(size=(100, 3))
        bz = ThermometerBooleanizer(5).fit(fit)
        edges_before = [e.copy() for e in bz.edges]
        bz.transform(rng.normal(loc=50.0, size=(100, 3)))
        for a, b in zip(edges_before, bz.edges):
            assert np.array_equal(a, b)

    def test_requires_fit(self):
        with pytest.raises(ValueError):
            ThermometerBooleanizer(3).transform(np.zeros((2, 2)))


class TestBooleanize:
    def test_width_constant_across_samples(self):
        rng = np.random.default_rng(5)
        raw = RawDataset(rng.normal(size=(60, 4)), rng.integers(0, 3, size=60), 3)
        ds = booleanize(ThermometerBooleanizer(5).fit(raw.X), raw)
        assert ds.X.shape[0] == 60
        assert len(ds.feature_names) == ds.X.shape[1]

    def test_labels_carried_through(self):
        raw = RawDataset(np.array([[200.0], [10.0]]), np.array([1, 0]), 2)
        ds = booleanize(ThresholdBooleanizer(75.0).fit(raw.X), raw)
        assert ds.y.tolist() == [1, 0]
        assert ds.X.tolist() == [[1], [0]]


class TestDatasetContainers:
    def test_boolean_sample_view(self):
        ds = xor_truth_table()
        sample = ds[1]
        assert sample.features.tolist() == [0, 1]
        assert sample.label == 1

    def test_label_bounds_validated(self):
        with pytest.raises(ValueError):
            BoolDataset(np.zeros((2, 2), dtype=np.uint8), np.array([0, 5]), 2)

    def test_subsample_seeded(self):
        ds = generate_xor(100, seed=0)
        a = subsample(ds, 30, seed=4)
        b = subsample(ds, 30, seed=4)
        assert np.array_equal(a.X, b.X)
        assert len(a) == 30
