"""Vocabulary slicing and lexical-vector pruning.

A SlicePartition deals a seeded random permutation of the vocabulary into d
contiguous slices (the first ``vocab_size mod d`` slices get one extra
element) and splits each slice into a positive and a negative half.  Pruning
keeps each slice's maximum term weight, optionally signed by which half the
winning index fell into; misaligned query/passage winners then land in
opposite halves about half the time and cancel instead of matching.

Partitions are immutable and all pruners are pure functions.  Argmax ties
always resolve to the lowest vocabulary index so results are platform-stable.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .lexical import LexicalVector
from .rng import PRNG_NAME, Xoshiro256StarStar


class AggKind(enum.Enum):
    SEMI = "semi"  # nonnegative slice maxima
    FULL = "full"  # slice maxima signed by the winning half


class PruningKind(enum.Enum):
    """How the vocabulary-sized lexical vector is reduced to d dimensions."""

    SEMI = "semi"  # slice max pooling
    FULL = "full"  # signed slice max pooling
    LINEAR = "linear"  # learned projection, v^T . proj
    MEAN = "mean"  # per-slice arithmetic mean


@dataclass(frozen=True)
class AggVector:
    """d-dimensional pruned lexical vector."""

    values: np.ndarray
    kind: AggKind

    def __post_init__(self):
        vals = np.asarray(self.values).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("agg vector has non-finite entries")
        if self.kind is AggKind.SEMI and vals.size and float(vals.min()) < 0:
            raise ValidationError("semi-aggregated values must be nonnegative")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ArgmaxIds:
    """Winning vocabulary index per slice (diagnostic; never stored for scoring)."""

    ids: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64).reshape(-1))


class SlicePartition:
    """Assignment of each vocabulary index to a slice and a sign half.

    Construct with :func:`make_partition`, or from explicit arrays (e.g. a
    partition file produced elsewhere) via the constructor.
    """

    __slots__ = (
        "vocab_size",
        "d",
        "seed",
        "prng",
        "slice_of",
        "sign_of",
        "_order",
        "_starts",
        "_sizes",
        "_fingerprint",
    )

    def __init__(self, vocab_size: int, d: int, seed: int, slice_of, sign_of, prng: str = PRNG_NAME):
        slice_of = np.asarray(slice_of, dtype=np.int32)
        sign_of = np.asarray(sign_of, dtype=np.int8)
        if slice_of.shape != (vocab_size,) or sign_of.shape != (vocab_size,):
            raise ValidationError("slice_of/sign_of length must equal vocab_size")
        if vocab_size < 1 or d < 1 or d > vocab_size:
            raise ValidationError(f"need 1 <= d <= vocab_size, got d={d}, vocab_size={vocab_size}")
        if slice_of.size and (slice_of.min() < 0 or slice_of.max() >= d):
            raise ValidationError("slice indices out of range")
        if not np.all(np.isin(sign_of, (-1, 1))):
            raise ValidationError("signs must be +1 or -1")
        sizes = np.bincount(slice_of, minlength=d)
        if sizes.min() == 0:
            raise ValidationError("every slice must be nonempty")
        if sizes.max() - sizes.min() > 1:
            raise ValidationError("slice sizes may differ by at most 1")
        pos_counts = np.bincount(slice_of[sign_of > 0], minlength=d)
        if np.abs(2 * pos_counts - sizes).max() > 1:
            raise ValidationError("sign halves within a slice may differ by at most 1")

        self.vocab_size = int(vocab_size)
        self.d = int(d)
        self.seed = int(seed)
        self.prng = prng
        self.slice_of = slice_of
        self.sign_of = sign_of
        # Stable argsort groups each slice's members in ascending vocabulary
        # order, which makes first-occurrence argmax the lowest-index winner.
        order = np.argsort(slice_of, kind="stable")
        self._order = order
        self._sizes = sizes.astype(np.int64)
        starts = np.zeros(d, dtype=np.int64)
        np.cumsum(sizes[:-1], out=starts[1:])
        self._starts = starts
        payload = (
            b"AGPT"
            + self.vocab_size.to_bytes(8, "little")
            + self.d.to_bytes(8, "little")
            + slice_of.astype("<i4").tobytes()
            + sign_of.astype("<i1").tobytes()
        )
        self._fingerprint = hashlib.sha256(payload).digest()

    @property
    def slice_sizes(self) -> np.ndarray:
        return self._sizes

    @property
    def fingerprint(self) -> bytes:
        """32-byte digest of (vocab_size, d, slice_of, sign_of); seed-agnostic."""
        return self._fingerprint

    def members(self, n: int) -> np.ndarray:
        """Vocabulary indices of slice n, ascending."""
        s = self._starts[n]
        return self._order[s : s + self._sizes[n]]

    def __eq__(self, other):
        return (
            isinstance(other, SlicePartition)
            and self.vocab_size == other.vocab_size
            and self.d == other.d
            and np.array_equal(self.slice_of, other.slice_of)
            and np.array_equal(self.sign_of, other.sign_of)
        )

    def __repr__(self):
        return f"SlicePartition(vocab_size={self.vocab_size}, d={self.d}, seed={self.seed})"

    def to_json_dict(self) -> dict:
        """Explicit-array form so foreign readers need not replicate the PRNG."""
        return {
            "vocab_size": self.vocab_size,
            "d": self.d,
            "seed": self.seed,
            "prng": self.prng,
            "slice_of": self.slice_of.tolist(),
            "sign_of": self.sign_of.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SlicePartition":
        try:
            return cls(
                int(obj["vocab_size"]),
                int(obj["d"]),
                int(obj.get("seed", 0)),
                obj["slice_of"],
                obj["sign_of"],
                prng=str(obj.get("prng", "unspecified")),
            )
        except KeyError as exc:
            raise ValidationError(f"partition document missing field {exc}") from exc


def make_partition(vocab_size: int, d: int, seed: int) -> SlicePartition:
    """Deal a seeded random permutation of the vocabulary into d slices.

    The permuted indices are dealt contiguously; the first ``vocab_size % d``
    slices receive one extra element.  Within each slice the first
    ``ceil(size / 2)`` dealt elements form the positive half, the rest the
    negative half (a singleton slice is entirely positive).
    """
    if d < 1 or d > vocab_size:
        raise ValidationError(f"need 1 <= d <= vocab_size, got d={d}, vocab_size={vocab_size}")
    perm = list(range(vocab_size))
    Xoshiro256StarStar(seed).shuffle(perm)
    slice_of = np.empty(vocab_size, dtype=np.int32)
    sign_of = np.empty(vocab_size, dtype=np.int8)
    base, extra = divmod(vocab_size, d)
    offset = 0
    for n in range(d):
        size = base + (1 if n < extra else 0)
        members = perm[offset : offset + size]
        offset += size
        pos_count = (size + 1) // 2
        for k, v in enumerate(members):
            slice_of[v] = n
            sign_of[v] = 1 if k < pos_count else -1
    return SlicePartition(vocab_size, d, seed, slice_of, sign_of)


def _check_vector(values: np.ndarray, part: SlicePartition, rows: bool, cast_f64: bool = False) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64 if cast_f64 else None)
    want = 2 if rows else 1
    if arr.ndim != want or arr.shape[-1] != part.vocab_size:
        raise ValidationError(
            f"vector shape {arr.shape} does not match partition vocab_size {part.vocab_size}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError("lexical values must be finite")
    return arr


def slice_max_rows(values: np.ndarray, part: SlicePartition) -> tuple[np.ndarray, np.ndarray]:
    """Per-slice maxima and winning indices for a [rows, vocab_size] batch.

    Ties resolve to the lowest vocabulary index.  Returns (maxima [rows, d],
    ids [rows, d]).
    """
    arr = _check_vector(values, part, rows=True)
    ordered = arr[:, part._order]
    maxima = np.maximum.reduceat(ordered, part._starts, axis=1)
    # Lowest vocabulary index attaining the slice max: mask the winners, then
    # take the minimum vocabulary index among them per slice.
    expanded = np.repeat(maxima, part._sizes, axis=1)
    candidates = np.where(
        ordered == expanded, part._order[None, :], np.int64(part.vocab_size)
    )
    ids = np.minimum.reduceat(candidates, part._starts, axis=1)
    return maxima, ids


def slice_mean_rows(values: np.ndarray, part: SlicePartition) -> np.ndarray:
    arr = _check_vector(values, part, rows=True, cast_f64=True)
    ordered = arr[:, part._order]
    sums = np.add.reduceat(ordered, part._starts, axis=1)
    return sums / part._sizes


def signed_slice_max_rows(values: np.ndarray, part: SlicePartition) -> np.ndarray:
    """Slice maxima with sign flipped when the winner lies in the negative half."""
    maxima, ids = slice_max_rows(values, part)
    return maxima * part.sign_of[ids]


def _values_of(v: LexicalVector | np.ndarray) -> np.ndarray:
    return v.values if isinstance(v, LexicalVector) else np.asarray(v)


def prune_semi(v: LexicalVector | np.ndarray, part: SlicePartition) -> tuple[AggVector, ArgmaxIds]:
    """Slice max pooling: keep each slice's largest term weight and its index."""
    maxima, ids = slice_max_rows(_values_of(v)[None, :], part)
    return AggVector(maxima[0], AggKind.SEMI), ArgmaxIds(ids[0])


def prune_full(v: LexicalVector | np.ndarray, part: SlicePartition) -> AggVector:
    """Signed slice max pooling: negate entries whose winner is in the negative half."""
    return AggVector(signed_slice_max_rows(_values_of(v)[None, :], part)[0], AggKind.FULL)


def prune_semi_mean(v: LexicalVector | np.ndarray, part: SlicePartition) -> AggVector:
    """Per-slice arithmetic mean; ablation baseline for the max pooler."""
    return AggVector(slice_mean_rows(_values_of(v)[None, :], part)[0], AggKind.SEMI)


def prune_linear(v: LexicalVector | np.ndarray, projection: np.ndarray) -> np.ndarray:
    """Learned-projection baseline: v^T . projection."""
    vals = v.values if isinstance(v, LexicalVector) else np.asarray(v)
    proj = np.asarray(projection)
    if proj.ndim != 2 or vals.ndim != 1 or proj.shape[0] != vals.shape[0]:
        raise ValidationError(
            f"projection shape {proj.shape} incompatible with vector length {vals.shape}"
        )
    return vals.astype(np.float64) @ proj.astype(np.float64)
