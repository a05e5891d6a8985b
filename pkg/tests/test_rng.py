import numpy as np
import pytest

from aggvec.rng import Xoshiro256StarStar, _splitmix64


class TestSplitmix64:
    def test_reference_stream_seed_zero(self):
        # widely published splitmix64 test vector
        state = 0
        out = []
        for _ in range(3):
            word, state = _splitmix64(state)
            out.append(word)
        assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


class TestXoshiro256StarStar:
    def test_reference_outputs_from_raw_state(self):
        g = Xoshiro256StarStar(0)
        g._s = [1, 2, 3, 4]
        assert [g.next_u64() for _ in range(3)] == [11520, 0, 1509978240]

    def test_seeded_stream_pinned(self):
        g = Xoshiro256StarStar(42)
        assert [g.next_u64() for _ in range(4)] == [
            1546998764402558742,
            6990951692964543102,
            12544586762248559009,
            17057574109182124193,
        ]

    def test_outputs_fit_in_64_bits(self):
        g = Xoshiro256StarStar(123456789)
        for _ in range(100):
            assert 0 <= g.next_u64() < (1 << 64)

    def test_next_below_pinned(self):
        g = Xoshiro256StarStar(42)
        assert [g.next_below(100) for _ in range(8)] == [8, 37, 68, 92, 99, 76, 71, 85]

    def test_next_below_range_and_rough_uniformity(self):
        g = Xoshiro256StarStar(9)
        counts = np.zeros(5, dtype=int)
        for _ in range(10_000):
            j = g.next_below(5)
            counts[j] += 1
        assert counts.sum() == 10_000
        assert counts.min() > 1800 and counts.max() < 2200

    def test_next_below_rejects_nonpositive(self):
        g = Xoshiro256StarStar(0)
        with pytest.raises(ValueError):
            g.next_below(0)

    def test_shuffle_pinned(self):
        items = list(range(10))
        Xoshiro256StarStar(42).shuffle(items)
        assert items == [9, 1, 4, 2, 8, 7, 6, 5, 3, 0]
        items = list(range(10))
        Xoshiro256StarStar(7).shuffle(items)
        assert items == [1, 8, 3, 0, 4, 5, 9, 6, 2, 7]

    def test_shuffle_is_permutation(self):
        items = list(range(257))
        Xoshiro256StarStar(3).shuffle(items)
        assert sorted(items) == list(range(257))


class TestNextUnit:
    def test_range(self):
        g = Xoshiro256StarStar(5)
        draws = [g.next_unit() for _ in range(10_000)]
        assert min(draws) >= 0.0 and max(draws) < 1.0

    def test_matches_top_53_bits(self):
        a, b = Xoshiro256StarStar(11), Xoshiro256StarStar(11)
        for _ in range(100):
            assert a.next_unit() == (b.next_u64() >> 11) * 2.0**-53

    def test_rough_uniformity(self):
        g = Xoshiro256StarStar(13)
        draws = np.array([g.next_unit() for _ in range(10_000)])
        assert abs(draws.mean() - 0.5) < 0.01
        assert abs(np.median(draws) - 0.5) < 0.02
