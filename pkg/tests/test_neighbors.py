import numpy as np
import pytest

from pointmeta import kernels
from pointmeta.errors import ParameterError
from pointmeta.neighbors import NeighborTable, ball_query, build_grid, feature_knn, knn

from oracles import ball_sets_bruteforce, knn_bruteforce


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run the module-level queries on every available kernel backend."""
    monkeypatch.setattr(kernels, "active", kernels.get_backend(request.param))
    return request.param


def adversarial_cloud(rng, n, kind):
    """Clouds stressing the grid: boundary-aligned, coincident, scaled."""
    pts = (rng.random((n, 3)) * 2 - 1).astype(np.float32)
    if kind == "boundary":
        pts = (np.round(pts * 8) / 8).astype(np.float32)  # exact cell boundaries
    elif kind == "coincident":
        pts[: max(2, n // 4)] = pts[0]
    elif kind == "large":
        pts *= 50
    elif kind == "line":
        pts[:, 1:] = 0
    return pts


class TestKnn:
    def test_single_reference(self, backend, rng):
        q = rng.random((7, 3), dtype=np.float32)
        t = knn(q, np.array([[0.5, 0.5, 0.5]], np.float32), 1)
        assert np.all(t.indices == 0)

    def test_collinear_ordering(self, backend):
        ref = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], np.float32)
        t = knn(ref[:1], ref, 2)
        assert t.indices[0].tolist() == [0, 1]

    def test_matches_bruteforce_oracle(self, backend, rng):
        q = rng.random((50, 3), dtype=np.float32)
        ref = rng.random((200, 3), dtype=np.float32)
        t = knn(q, ref, 8)
        assert np.array_equal(t.indices, knn_bruteforce(q, ref, 8))

    def test_self_query_self_first(self, backend, rng):
        pts = rng.random((40, 3), dtype=np.float32)
        t = knn(pts, pts, 4)
        assert np.array_equal(t.indices[:, 0], np.arange(40))

    def test_tie_break_smaller_index(self, backend):
        # two references equidistant from the query
        ref = np.array([[1, 0, 0], [-1, 0, 0], [5, 5, 5]], np.float32)
        t = knn(np.zeros((1, 3), np.float32), ref, 2)
        assert t.indices[0].tolist() == [0, 1]

    def test_distance_monotonicity(self, backend, rng):
        q = rng.random((30, 3), dtype=np.float32)
        ref = rng.random((100, 3), dtype=np.float32)
        t = knn(q, ref, 10)
        d2 = ((q[:, None, :].astype(np.float64) - ref[t.indices]) ** 2).sum(-1)
        assert np.all(np.diff(d2, axis=1) >= 0)

    def test_k_out_of_range(self, backend, rng):
        pts = rng.random((5, 3), dtype=np.float32)
        with pytest.raises(ParameterError):
            knn(pts, pts, 6)


class TestBallQuery:
    def test_all_within_radius_padding(self, backend, rng):
        ref = rng.random((4, 3), dtype=np.float32) * 0.01
        t = ball_query(ref, ref, 1.0, k_cap=9)
        assert np.all(t.valid_counts == 4)
        assert np.array_equal(t.indices[:, :4], np.tile(np.arange(4), (4, 1)))
        assert np.all(t.indices[:, 4:] == t.indices[:, :1])

    def test_tiny_radius_self_only(self, backend, rng):
        pts = rng.random((20, 3), dtype=np.float32)
        t = ball_query(pts, pts, 1e-6, k_cap=4)
        assert np.all(t.valid_counts == 1)
        assert np.all(t.indices == np.arange(20)[:, None])

    def test_matches_bruteforce_sets(self, backend, rng):
        q = rng.random((30, 3), dtype=np.float32)
        ref = rng.random((120, 3), dtype=np.float32)
        radius, cap = 0.3, 12
        t = ball_query(q, ref, radius, cap)
        want = ball_sets_bruteforce(q, ref, radius)
        for i in range(30):
            expect = want[i][:cap]
            if expect:
                assert t.indices[i, : len(expect)].tolist() == expect
                assert t.valid_counts[i] == len(expect)

    def test_empty_ball_falls_back_to_nearest(self, backend):
        ref = np.array([[0, 0, 0], [10, 0, 0]], np.float32)
        q = np.array([[6.0, 0, 0]], np.float32)
        t = ball_query(q, ref, 0.5, k_cap=3)
        assert t.valid_counts[0] == 0
        assert np.all(t.indices[0] == 1)  # nearest reference point

    def test_scan_order_is_index_order(self, backend):
        # the farther point has the smaller index; scan order keeps it first
        ref = np.array([[0.2, 0, 0], [0.1, 0, 0]], np.float32)
        t = ball_query(np.zeros((1, 3), np.float32), ref, 1.0, k_cap=2)
        assert t.indices[0].tolist() == [0, 1]

    def test_invalid_parameters(self, backend, rng):
        pts = rng.random((5, 3), dtype=np.float32)
        with pytest.raises(ParameterError):
            ball_query(pts, pts, -1.0, 4)
        with pytest.raises(ParameterError):
            ball_query(pts, pts, 0.5, 0)


class TestFeatureKnn:
    def test_one_hot_groups(self, backend):
        f = np.eye(4, dtype=np.float32)[[0, 0, 1, 1]]
        t = feature_knn(f, 2)
        assert t.indices[0].tolist() == [0, 1]
        assert t.indices[3].tolist() == [2, 3]

    def test_reduces_to_knn_on_positions(self, backend, rng):
        pts = rng.random((50, 3), dtype=np.float32)
        assert np.array_equal(feature_knn(pts, 6).indices, knn(pts, pts, 6).indices)

    def test_matches_bruteforce_high_dim(self, backend, rng):
        f = rng.normal(size=(60, 16)).astype(np.float32)
        t = feature_knn(f, 5)
        assert np.array_equal(t.indices, knn_bruteforce(f, f, 5))


class TestGridIndex:
    def test_single_cell(self, backend, rng):
        pts = rng.random((30, 3), dtype=np.float32) * 0.05
        grid = build_grid(pts, 1.0)
        assert grid.n_cells == 1
        t = grid.ball_query(pts, 0.04, 8)
        b = ball_query(pts, pts, 0.04, 8)
        assert np.array_equal(t.indices, b.indices)

    def test_occupancy_consistent_with_floor(self, backend, rng):
        pts = (rng.random((40, 3)) * 4 - 2).astype(np.float32)
        grid = build_grid(pts, 0.5)
        occ = grid.occupancy
        seen = np.concatenate(list(occ.values()))
        assert sorted(seen.tolist()) == list(range(40))
        for coord, ids in occ.items():
            cells = np.floor(pts[ids].astype(np.float64) / 0.5).astype(np.int64)
            assert np.all(cells == np.asarray(coord))

    def test_reach_when_cell_equals_radius(self, backend, rng):
        grid = build_grid(rng.random((10, 3), dtype=np.float32), 0.25)
        assert grid.reach(0.25) == 1  # 3x3x3 = 27 candidate cells

    def test_coincident_points_one_bucket(self, backend):
        pts = np.tile(np.array([[0.3, 0.3, 0.3]], np.float32), (12, 1))
        grid = build_grid(pts, 0.1)
        assert grid.n_cells == 1
        t = grid.ball_query(pts, 0.05, 5)
        assert np.all(t.valid_counts == 5)
        assert np.array_equal(t.indices, np.tile(np.arange(5), (12, 1)))

    def test_cell_size_validation(self, rng):
        with pytest.raises(ParameterError):
            build_grid(rng.random((5, 3), dtype=np.float32), 0.0)

    @pytest.mark.parametrize("kind", ["uniform", "boundary", "coincident", "large", "line"])
    def test_grid_equals_bruteforce_randomized(self, backend, kind, rng):
        for trial in range(40):
            n = int(rng.integers(4, 220))
            pts = adversarial_cloud(rng, n, kind)
            m = int(rng.integers(1, 60))
            q = adversarial_cloud(rng, m, kind)
            radius = float(rng.uniform(0.02, 1.2)) * (50 if kind == "large" else 1)
            cell = radius * float(rng.choice([0.3, 0.9, 1.0, 2.7]))
            k_cap = int(rng.integers(1, 14))
            grid = build_grid(pts, cell)

            bt = ball_query(q, pts, radius, k_cap)
            gt = grid.ball_query(q, radius, k_cap)
            assert np.array_equal(bt.indices, gt.indices), (kind, trial)
            assert np.array_equal(bt.valid_counts, gt.valid_counts)

            k = min(n, int(rng.integers(1, 9)))
            assert np.array_equal(knn(q, pts, k).indices, grid.knn(q, k).indices), (kind, trial)

    def test_query_far_outside_grid(self, backend, rng):
        pts = rng.random((50, 3), dtype=np.float32)
        far = np.array([[40.0, -3.0, 12.0]], np.float32)
        grid = build_grid(pts, 0.2)
        assert np.array_equal(grid.knn(far, 5).indices, knn(far, pts, 5).indices)
        gt = grid.ball_query(far, 0.5, 4)
        bt = ball_query(far, pts, 0.5, 4)
        assert np.array_equal(gt.indices, bt.indices)
        assert gt.valid_counts[0] == 0


class TestPaddingInvariant:
    def test_every_table_padded_correctly(self, backend, rng):
        for _ in range(20):
            n = int(rng.integers(3, 80))
            pts = (rng.random((n, 3)) * rng.choice([0.3, 1.0])).astype(np.float32)
            cap = int(rng.integers(1, 10))
            t = ball_query(pts, pts, float(rng.uniform(0.05, 0.5)), cap)
            assert isinstance(t, NeighborTable)
            assert np.all(t.valid_counts <= cap)
            assert np.all(t.indices < n)
            for i in range(n):
                c = t.valid_counts[i]
                if c > 0:
                    assert np.all(t.indices[i, c:] == t.indices[i, 0])


class TestBackendsAgree:
    def test_identical_results_across_backends(self, rng):
        if len(kernels.available_backends()) < 2:
            pytest.skip("only one backend built")
        py = kernels.get_backend("python")
        cc = kernels.get_backend("compiled")
        for _ in range(10):
            n = int(rng.integers(5, 150))
            pts = (rng.random((n, 3)) * 2 - 1).astype(np.float32)
            q = (rng.random((30, 3)) * 2 - 1).astype(np.float32)
            k = min(n, 7)
            assert np.array_equal(py.brute_knn(q, pts, k), cc.brute_knn(q, pts, k))
            r = float(rng.uniform(0.1, 1.0))
            a = py.brute_ball(q, pts, r, 6)
            b = cc.brute_ball(q, pts, r, 6)
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            m = int(rng.integers(1, n + 1))
            assert np.array_equal(py.fps(pts, m, 0), cc.fps(pts, m, 0))
