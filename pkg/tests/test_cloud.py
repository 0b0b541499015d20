import numpy as np
import pytest

from pointmeta.cloud import (
    PointCloud,
    SampleIndex,
    farthest_point_sample,
    interpolate_features,
    load_cloud,
    save_cloud,
)
from pointmeta.errors import EmptyCloudError, FormatError, ParameterError

from oracles import fps_bruteforce, interpolate_bruteforce


def random_cloud(rng, n, d=None):
    pos = rng.random((n, 3), dtype=np.float32) * 2 - 1
    feats = None if d is None else rng.normal(size=(n, d)).astype(np.float32)
    return PointCloud(pos, feats)


class TestPointCloud:
    def test_features_default_to_positions(self, rng):
        pc = random_cloud(rng, 10)
        assert pc.d == 3
        assert np.array_equal(pc.features, pc.positions)

    def test_row_count_mismatch(self, rng):
        with pytest.raises(ParameterError):
            PointCloud(rng.random((4, 3)), rng.random((5, 2)))

    def test_empty_rejected(self):
        with pytest.raises(EmptyCloudError):
            PointCloud(np.zeros((0, 3), np.float32))


class TestTextFormat:
    def test_bare_positions_default_features(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("0 0 0\n1 0 0\n")
        pc = load_cloud(p, "xyz_text")
        assert pc.n == 2 and pc.d == 3
        assert np.array_equal(pc.features, pc.positions)

    def test_header_splits_columns(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("# d=2\n1 2 3 4 5\n")
        pc = load_cloud(p, "xyz_text")
        assert np.array_equal(pc.positions, [[1, 2, 3]])
        assert np.array_equal(pc.features, [[4, 5]])

    def test_column_count_error_names_line(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("# d=1\n1 2 3 4\n1 2 3\n")
        with pytest.raises(FormatError, match="line 3"):
            load_cloud(p, "xyz_text")

    def test_bad_float_reported(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("1 2 zebra\n")
        with pytest.raises(FormatError, match="line 1"):
            load_cloud(p, "xyz_text")

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("")
        with pytest.raises(EmptyCloudError):
            load_cloud(p, "xyz_text")

    def test_round_trip_quantization_bound(self, rng, tmp_path):
        pc = random_cloud(rng, 50, d=4)
        p = tmp_path / "c.xyz"
        save_cloud(pc, p, "xyz_text")
        again = load_cloud(p, "xyz_text")
        assert np.max(np.abs(again.positions - pc.positions)) <= 1e-5
        assert np.max(np.abs(again.features - pc.features)) <= 1e-5

    def test_text_emits_six_decimals(self, tmp_path):
        pc = PointCloud(np.array([[0.1234567, 1, 2]], np.float32))
        p = tmp_path / "c.xyz"
        save_cloud(pc, p, "xyz_text")
        assert p.read_text().splitlines()[0].split()[0] == "0.123457"


class TestBinaryFormat:
    def test_round_trip_bit_identical(self, rng, tmp_path):
        pc = random_cloud(rng, 1000, d=7)
        p = tmp_path / "c.bin"
        save_cloud(pc, p, "pmeta_binary")
        again = load_cloud(p, "pmeta_binary")
        assert np.array_equal(again.positions, pc.positions)
        assert np.array_equal(again.features, pc.features)

    def test_default_feature_cloud_round_trip(self, rng, tmp_path):
        pc = random_cloud(rng, 5)
        p = tmp_path / "c.bin"
        save_cloud(pc, p, "pmeta_binary")
        again = load_cloud(p, "pmeta_binary")
        assert np.array_equal(again.features, pc.features)

    def test_magic_and_layout(self, rng, tmp_path):
        pc = random_cloud(rng, 3, d=2)
        p = tmp_path / "c.bin"
        save_cloud(pc, p, "pmeta_binary")
        raw = p.read_bytes()
        assert raw[:8] == b"PMETA01\x00"
        assert len(raw) == 16 + 4 * 3 * (3 + 2)
        n = int.from_bytes(raw[8:12], "little")
        d = int.from_bytes(raw[12:16], "little")
        assert (n, d) == (3, 2)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "c.bin"
        p.write_bytes(b"NOTMETA0" + b"\x00" * 16)
        with pytest.raises(FormatError, match="magic"):
            load_cloud(p, "pmeta_binary")

    def test_truncated_payload(self, rng, tmp_path):
        pc = random_cloud(rng, 4)
        p = tmp_path / "c.bin"
        save_cloud(pc, p, "pmeta_binary")
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(FormatError, match="bytes"):
            load_cloud(p, "pmeta_binary")

    def test_unknown_format_name(self, tmp_path, rng):
        with pytest.raises(FormatError):
            load_cloud(tmp_path / "x", "ply")


class TestFps:
    def test_exhaustive_selection(self, rng):
        pc = random_cloud(rng, 8)
        sel = farthest_point_sample(pc, 8, start=2)
        assert sorted(sel.indices.tolist()) == list(range(8))
        assert sel.indices[0] == 2

    def test_unit_square_diagonal(self):
        pc = PointCloud(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], np.float32))
        sel = farthest_point_sample(pc, 2, start=0)
        assert sel.indices[1] == 2  # the diagonally opposite corner

    def test_matches_bruteforce_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(8, 64))
            pc = random_cloud(rng, n)
            m = int(rng.integers(1, n + 1))
            start = int(rng.integers(0, n))
            got = farthest_point_sample(pc, m, start).indices
            want = fps_bruteforce(pc.positions, m, start)
            assert np.array_equal(got, want)

    def test_m_out_of_range(self, rng):
        pc = random_cloud(rng, 4)
        with pytest.raises(ParameterError):
            farthest_point_sample(pc, 5)
        with pytest.raises(ParameterError):
            farthest_point_sample(pc, 2, start=4)

    def test_min_distance_sequence_non_increasing(self, rng):
        pc = random_cloud(rng, 100)
        sel = farthest_point_sample(pc, 40).indices
        p = pc.positions.astype(np.float64)
        mins = []
        for i in range(1, 40):
            d2 = ((p[sel[:i]] - p[sel[i]]) ** 2).sum(axis=1)
            mins.append(d2.min())
        assert all(a >= b - 1e-15 for a, b in zip(mins, mins[1:]))

    def test_permutation_covariance(self, rng):
        pc = random_cloud(rng, 60)
        perm = rng.permutation(60)
        permuted = PointCloud(pc.positions[perm])
        inv = np.argsort(perm)
        sel = farthest_point_sample(pc, 20, start=5).indices
        sel_p = farthest_point_sample(permuted, 20, start=int(inv[5])).indices
        assert np.array_equal(perm[sel_p], sel)


class TestSampleIndex:
    def test_duplicate_rejected(self):
        with pytest.raises(ParameterError):
            SampleIndex(np.array([1, 1]), 4)

    def test_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            SampleIndex(np.array([4]), 4)


class TestInterpolation:
    def test_coincident_point_reproduces_feature(self, rng):
        pc = random_cloud(rng, 30, d=5)
        out = interpolate_features(pc, pc.positions[:4], k=3)
        assert np.max(np.abs(out - pc.features[:4])) <= 1e-4

    def test_midpoint_symmetry(self):
        coarse = PointCloud(
            np.array([[0, 0, 0], [2, 0, 0]], np.float32),
            np.array([[1.0, 3.0], [5.0, 7.0]], np.float32),
        )
        out = interpolate_features(coarse, np.array([[1, 0, 0]], np.float32), k=2)
        assert np.allclose(out, [[3.0, 5.0]], atol=1e-6)

    def test_matches_direct_formula_oracle(self, rng):
        pc = random_cloud(rng, 40, d=6)
        fine = rng.random((25, 3), dtype=np.float32)
        got = interpolate_features(pc, fine, k=3)
        want = interpolate_bruteforce(pc.positions, pc.features, fine, k=3)
        assert np.max(np.abs(got - want)) < 1e-5

    def test_k_out_of_range(self, rng):
        pc = random_cloud(rng, 4)
        with pytest.raises(ParameterError):
            interpolate_features(pc, pc.positions, k=5)

    def test_weights_sum_to_one_indirectly(self, rng):
        # constant features must interpolate to exactly that constant
        pc = PointCloud(rng.random((20, 3), dtype=np.float32), np.full((20, 2), 4.0, np.float32))
        out = interpolate_features(pc, rng.random((9, 3), dtype=np.float32), k=3)
        assert np.max(np.abs(out - 4.0)) < 1e-6
