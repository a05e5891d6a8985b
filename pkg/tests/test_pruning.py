import numpy as np
import pytest

from aggvec.errors import ValidationError
from aggvec.pruning import (
    AggKind,
    SlicePartition,
    make_partition,
    prune_full,
    prune_linear,
    prune_semi,
    prune_semi_mean,
    signed_slice_max_rows,
    slice_max_rows,
    slice_mean_rows,
)


def tiny_partition():
    # slices {0,1} and {2,3}; positive members 0 and 2
    return SlicePartition(
        vocab_size=4,
        d=2,
        seed=0,
        slice_of=np.array([0, 0, 1, 1], dtype=np.int32),
        sign_of=np.array([1, -1, 1, -1], dtype=np.int8),
    )


class TestMakePartition:
    def test_slice_sizes_balanced(self):
        part = make_partition(10, 5, seed=1)
        assert sorted(part.slice_sizes.tolist()) == [2, 2, 2, 2, 2]

    def test_uneven_sizes_differ_by_one(self):
        part = make_partition(11, 3, seed=1)
        sizes = sorted(part.slice_sizes.tolist())
        assert sizes == [3, 4, 4]

    def test_production_shape(self):
        # 30522 over 640 slices: 30522 = 640*47 + 442
        part = make_partition(30522, 640, seed=42)
        sizes = part.slice_sizes
        unique, counts = np.unique(sizes, return_counts=True)
        assert dict(zip(unique.tolist(), counts.tolist())) == {47: 198, 48: 442}

    def test_sign_halves_balanced(self):
        part = make_partition(30522, 640, seed=7)
        for n in (0, 1, 639):
            members = part.members(n)
            pos = int((part.sign_of[members] == 1).sum())
            neg = len(members) - pos
            assert abs(pos - neg) <= 1
            assert pos >= neg  # ceil half is positive

    def test_every_term_in_exactly_one_slice(self):
        part = make_partition(100, 7, seed=3)
        seen = np.concatenate([part.members(n) for n in range(7)])
        assert sorted(seen.tolist()) == list(range(100))

    def test_deterministic_per_seed(self):
        a = make_partition(64, 8, seed=5)
        b = make_partition(64, 8, seed=5)
        assert a == b
        np.testing.assert_array_equal(a.slice_of, b.slice_of)
        c = make_partition(64, 8, seed=6)
        assert np.any(a.slice_of != c.slice_of)

    def test_d_equals_vocab_singletons(self):
        part = make_partition(4, 4, seed=0)
        assert np.all(part.slice_sizes == 1)
        assert np.all(part.sign_of == 1)  # ceil(1/2) = 1 positive, 0 negative

    def test_fingerprint_seed_agnostic_content_sensitive(self):
        a = make_partition(64, 8, seed=5)
        b = SlicePartition(64, 8, 999, a.slice_of.copy(), a.sign_of.copy())
        assert a.fingerprint == b.fingerprint
        c = make_partition(64, 8, seed=6)
        assert a.fingerprint != c.fingerprint
        assert len(a.fingerprint) == 32

    def test_json_round_trip(self):
        a = make_partition(64, 8, seed=5)
        b = SlicePartition.from_json_dict(a.to_json_dict())
        assert a == b and a.fingerprint == b.fingerprint

    def test_invalid_args(self):
        with pytest.raises(ValidationError):
            make_partition(4, 5, seed=0)  # d > vocab
        with pytest.raises(ValidationError):
            make_partition(4, 0, seed=0)
        with pytest.raises(ValidationError):
            SlicePartition(4, 2, 0, np.array([0, 0, 1, 3], np.int32), np.ones(4, np.int8))
        with pytest.raises(ValidationError):
            SlicePartition(4, 2, 0, np.array([0, 0, 1, 1], np.int32), np.zeros(4, np.int8))


class TestPruneSemi:
    def test_hand_example(self):
        v = np.array([0.1, 0.9, 0.2, 0.8])
        agg, ids = prune_semi(v, tiny_partition())
        assert agg.kind is AggKind.SEMI
        np.testing.assert_allclose(agg.values, [0.9, 0.8])
        np.testing.assert_array_equal(ids.ids, [1, 3])

    def test_tie_takes_lowest_index(self):
        part = SlicePartition(
            3, 1, 0, np.zeros(3, np.int32), np.array([1, 1, -1], np.int8)
        )
        _, ids = prune_semi(np.array([0.5, 0.5, 0.5]), part)
        assert ids.ids.tolist() == [0]

    def test_identity_when_d_equals_vocab(self):
        rng = np.random.default_rng(0)
        v = rng.exponential(size=512)
        part = make_partition(512, 512, seed=1)
        agg, ids = prune_semi(v, part)
        # each slice holds one term; invert the assignment to compare
        order = np.argsort(part.slice_of, kind="stable")
        np.testing.assert_array_equal(ids.ids, order)
        np.testing.assert_allclose(agg.values, v[order], rtol=0, atol=0)

    def test_nonnegative_input_required_semantics(self):
        # semi pooling output is nonnegative for nonnegative input
        rng = np.random.default_rng(2)
        part = make_partition(32, 4, seed=0)
        agg, _ = prune_semi(rng.exponential(size=32), part)
        assert np.all(agg.values >= 0)


class TestPruneFull:
    def test_sign_follows_winner_membership(self):
        v = np.array([0.1, 0.9, 0.2, 0.8])
        agg = prune_full(v, tiny_partition())
        assert agg.kind is AggKind.FULL
        # winners are terms 1 (negative half) and 3 (negative half)
        np.testing.assert_allclose(agg.values, [-0.9, -0.8])

    def test_positive_winner_keeps_sign(self):
        v = np.array([0.9, 0.1, 0.8, 0.2])
        agg = prune_full(v, tiny_partition())
        np.testing.assert_allclose(agg.values, [0.9, 0.8])

    def test_magnitude_matches_semi(self):
        rng = np.random.default_rng(3)
        part = make_partition(256, 16, seed=9)
        v = rng.exponential(size=256)
        semi, _ = prune_semi(v, part)
        full = prune_full(v, part)
        np.testing.assert_allclose(np.abs(full.values), semi.values)


class TestMeanAndLinear:
    def test_mean_hand_example(self):
        agg = prune_semi_mean(np.array([0.1, 0.9, 0.2, 0.8]), tiny_partition())
        np.testing.assert_allclose(agg.values, [0.5, 0.5])

    def test_linear_hand_example(self):
        v = np.array([1.0, 2.0])
        proj = np.array([[1.0, 0.0], [1.0, 1.0]])
        np.testing.assert_allclose(prune_linear(v, proj), [3.0, 2.0])

    def test_linear_shape_check(self):
        with pytest.raises(ValidationError):
            prune_linear(np.zeros(3), np.zeros((2, 5)))


class TestBatchRows:
    @pytest.mark.parametrize("seed", range(4))
    def test_batch_matches_scalar_loop(self, seed):
        rng = np.random.default_rng(seed)
        part = make_partition(200, 23, seed=seed)
        rows = rng.exponential(size=(8, 200))
        maxima, ids = slice_max_rows(rows, part)
        signed = signed_slice_max_rows(rows, part)
        means = slice_mean_rows(rows, part)
        for r in range(8):
            for n in range(23):
                members = part.members(n)
                vals = rows[r, members]
                top = vals.max()
                assert maxima[r, n] == top
                winners = members[vals == top]
                assert ids[r, n] == winners.min()
                assert signed[r, n] == top * part.sign_of[ids[r, n]]
                assert means[r, n] == pytest.approx(vals.mean())

    def test_preserves_dtype(self):
        part = make_partition(16, 4, seed=0)
        rows = np.random.default_rng(0).random((2, 16), dtype=np.float32)
        maxima, _ = slice_max_rows(rows, part)
        assert maxima.dtype == np.float32
