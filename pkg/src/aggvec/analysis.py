"""Measures how much the pruned dot product deviates from the exact one.

Two effects drive the deviation: slices lose all but their largest term, and
a slice can match on *different* terms for the two vectors (misalignment).
Signed slice max pooling turns roughly half of those misaligned matches into
cancellations instead of spurious positives; the estimators here quantify
both effects over a seeded sparse ensemble and emit CSV curves over d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .pruning import SlicePartition, make_partition, signed_slice_max_rows, slice_max_rows
from .rng import Xoshiro256StarStar

PRUNERS = ("agg+", "agg*", "linear-random")


def sparse_vectors(vocab_size: int, count: int, *, nonzeros: int = 64, seed: int = 0) -> np.ndarray:
    """[count, vocab_size] nonnegative rows with `nonzeros` exponential(1) entries.

    Mimics sparse term-weight profiles: most vocabulary entries never win the
    pooling, a few carry sizable weight.  Deterministic given the seed.
    """
    if not 0 < nonzeros <= vocab_size:
        raise ValidationError(f"nonzeros {nonzeros} outside (0, {vocab_size}]")
    rng = Xoshiro256StarStar(seed)
    out = np.zeros((count, vocab_size))
    for row in out:
        seen: set[int] = set()
        while len(seen) < nonzeros:
            idx = rng.next_below(vocab_size)
            if idx in seen:
                continue
            seen.add(idx)
            row[idx] = -math.log(1.0 - rng.next_unit())
    return out


def random_signed_projection(vocab_size: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Feature-hashing projection: each vocab index gets one output dim and a sign.

    Stands in for a dense random linear map at a fraction of the cost; it is
    the classic sparse sign projection, so "linear-random" stays an honest
    linear baseline.
    """
    rng = Xoshiro256StarStar(seed)
    to_dim = np.empty(vocab_size, dtype=np.int64)
    signs = np.empty(vocab_size)
    for i in range(vocab_size):
        to_dim[i] = rng.next_below(d)
        signs[i] = 1.0 if rng.next_below(2) == 0 else -1.0
    return to_dim, signs


def _project_rows(rows: np.ndarray, to_dim: np.ndarray, signs: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros((rows.shape[0], d))
    np.add.at(out.T, to_dim, (rows * signs).T)
    return out


def pair_errors(
    vq_rows: np.ndarray, vp_rows: np.ndarray, part: SlicePartition, pruner: str
) -> np.ndarray:
    """|v_q . v_p - pruned_q . pruned_p| per row pair, for one slice pruner."""
    if vq_rows.shape != vp_rows.shape:
        raise ValidationError(f"pair shapes differ: {vq_rows.shape} vs {vp_rows.shape}")
    exact = np.einsum("ij,ij->i", vq_rows, vp_rows)
    if pruner == "agg+":
        pq, _ = slice_max_rows(vq_rows, part)
        pp, _ = slice_max_rows(vp_rows, part)
    elif pruner == "agg*":
        pq = signed_slice_max_rows(vq_rows, part)
        pp = signed_slice_max_rows(vp_rows, part)
    else:
        raise ValidationError(f"unknown slice pruner {pruner!r}")
    return np.abs(exact - np.einsum("ij,ij->i", pq, pp))


@dataclass(frozen=True)
class ApproxErrorRow:
    d: int
    pruner: str
    mean_abs_err: float
    stderr: float
    seed_set: str


def approx_error(
    vocab_size: int,
    d_values: list[int],
    *,
    pairs: int = 1000,
    partitions_per_d: int = 20,
    nonzeros: int = 64,
    seed: int = 0,
    pruners: tuple[str, ...] = PRUNERS,
) -> list[ApproxErrorRow]:
    """Mean |exact - pruned| dot product per (d, pruner) over a seeded ensemble.

    The same vector pairs are reused for every d and partition seed, so the
    curves differ only in the reduction, not the data.  Partition seeds run
    seed .. seed + partitions_per_d - 1.
    """
    for d in d_values:
        if not 0 < d <= vocab_size:
            raise ValidationError(f"d {d} outside (0, vocab_size {vocab_size}]")
    unknown = set(pruners) - set(PRUNERS)
    if unknown:
        raise ValidationError(f"unknown pruners {sorted(unknown)}")
    if pairs < 1 or partitions_per_d < 1:
        raise ValidationError("pairs and partitions_per_d must be >= 1")

    vq = sparse_vectors(vocab_size, pairs, nonzeros=nonzeros, seed=seed)
    vp = sparse_vectors(vocab_size, pairs, nonzeros=nonzeros, seed=seed + 1)
    exact = np.einsum("ij,ij->i", vq, vp)
    seed_set = f"{seed}..{seed + partitions_per_d - 1}"

    rows = []
    for d in d_values:
        samples = {p: [] for p in pruners}
        for part_seed in range(seed, seed + partitions_per_d):
            part = make_partition(vocab_size, d, seed=part_seed) if set(pruners) & {"agg+", "agg*"} else None
            if "agg+" in pruners:
                pq, _ = slice_max_rows(vq, part)
                pp, _ = slice_max_rows(vp, part)
                samples["agg+"].append(np.abs(exact - np.einsum("ij,ij->i", pq, pp)))
            if "agg*" in pruners:
                pq = signed_slice_max_rows(vq, part)
                pp = signed_slice_max_rows(vp, part)
                samples["agg*"].append(np.abs(exact - np.einsum("ij,ij->i", pq, pp)))
            if "linear-random" in pruners:
                to_dim, signs = random_signed_projection(vocab_size, d, part_seed)
                pq = _project_rows(vq, to_dim, signs, d)
                pp = _project_rows(vp, to_dim, signs, d)
                samples["linear-random"].append(np.abs(exact - np.einsum("ij,ij->i", pq, pp)))
        for pruner in pruners:
            errs = np.concatenate(samples[pruner])
            rows.append(
                ApproxErrorRow(
                    d=int(d),
                    pruner=pruner,
                    mean_abs_err=float(errs.mean()),
                    stderr=float(errs.std(ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else 0.0,
                    seed_set=seed_set,
                )
            )
    return rows


def write_approx_error_csv(path, rows: list[ApproxErrorRow]) -> None:
    """CSV emission; identical inputs produce byte-identical files."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("d,pruner,mean_abs_err,stderr,seed_set\n")
        for row in rows:
            f.write(f"{row.d},{row.pruner},{row.mean_abs_err!r},{row.stderr!r},{row.seed_set}\n")


# ---------------------------------------------------------------------------
# misalignment and sign cancellation


def _winner_ids(v_q, v_p, part: SlicePartition) -> tuple[np.ndarray, np.ndarray]:
    """Per-slice winning term ids; accepts one vector or a matrix of row vectors."""
    vq = np.atleast_2d(np.asarray(v_q, dtype=np.float64))
    vp = np.atleast_2d(np.asarray(v_p, dtype=np.float64))
    if vq.shape != vp.shape:
        raise ValidationError(f"vector shapes differ: {vq.shape} vs {vp.shape}")
    _, idq = slice_max_rows(vq, part)
    _, idp = slice_max_rows(vp, part)
    return idq.reshape(-1), idp.reshape(-1)


def misalignment_rate(v_q, v_p, part: SlicePartition) -> float:
    """Fraction of slices whose winning term differs between the two vectors."""
    idq, idp = _winner_ids(v_q, v_p, part)
    return float(np.mean(idq != idp))


@dataclass(frozen=True)
class CancellationStats:
    aligned: int
    opposite_sign_misaligned: int  # contributions the signed pooling negates
    same_sign_misaligned: int

    @property
    def misaligned(self) -> int:
        return self.opposite_sign_misaligned + self.same_sign_misaligned


def sign_cancellation_stats(v_q, v_p, part: SlicePartition) -> CancellationStats:
    """Split slices into aligned / opposite-half misaligned / same-half misaligned."""
    idq, idp = _winner_ids(v_q, v_p, part)
    misaligned = idq != idp
    opposite = misaligned & (part.sign_of[idq] != part.sign_of[idp])
    return CancellationStats(
        aligned=int(np.sum(~misaligned)),
        opposite_sign_misaligned=int(np.sum(opposite)),
        same_sign_misaligned=int(np.sum(misaligned & ~opposite)),
    )
