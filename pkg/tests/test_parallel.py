import pytest

from aggvec.errors import ValidationError
from aggvec.parallel import parallel_map, thread_count


class TestThreadCount:
    def test_explicit_request_wins(self, monkeypatch):
        monkeypatch.setenv("AGG_THREADS", "7")
        assert thread_count(3) == 3

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv("AGG_THREADS", "5")
        assert thread_count(None) == 5

    def test_default_is_positive(self, monkeypatch):
        monkeypatch.delenv("AGG_THREADS", raising=False)
        assert thread_count(None) >= 1

    def test_zero_request_rejected(self):
        with pytest.raises(ValidationError):
            thread_count(0)

    def test_bad_env_rejected(self, monkeypatch):
        monkeypatch.setenv("AGG_THREADS", "lots")
        with pytest.raises(ValidationError):
            thread_count(None)


class TestParallelMap:
    def test_preserves_order(self):
        assert parallel_map(lambda x: x * x, range(50), threads=4) == [x * x for x in range(50)]

    def test_single_thread_path(self):
        assert parallel_map(lambda x: -x, [3, 1, 2], threads=1) == [-3, -1, -2]

    def test_result_independent_of_thread_count(self):
        items = list(range(200))
        results = {t: tuple(parallel_map(lambda x: x * 31 % 97, items, threads=t)) for t in (1, 2, 8)}
        assert len(set(results.values())) == 1

    def test_empty_input(self):
        assert parallel_map(lambda x: x, [], threads=4) == []

    def test_worker_exception_propagates(self):
        def boom(x):
            raise RuntimeError("worker failed")

        with pytest.raises(RuntimeError):
            parallel_map(boom, [1, 2], threads=2)
