"""Minibatch sampling and deterministic top-q selection.

Indices are 0-based row positions into the dataset.  Ties in loss values
are always broken toward the smaller original index, which makes every
selection and ranking operation a pure function of its inputs.
"""
from __future__ import annotations

import numpy as np


def sample_minibatch(rng: np.random.Generator, n: int, s: int) -> np.ndarray:
    """Draw s distinct indices from range(n) uniformly, sorted ascending.

    Every s-subset is equiprobable; the sequence of draws is a pure
    function of the generator state, so a seeded generator reproduces the
    same batches.
    """
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got (n={n}, s={s})")
    return np.sort(rng.choice(n, size=s, replace=False))


def topq_positions(values: np.ndarray, q: int) -> np.ndarray:
    """Positions of the q largest entries, ties toward the smaller position.

    Partial selection: argpartition isolates the top region, then only the
    entries tied at the threshold value are resolved explicitly, so the
    expected cost is O(len(values)).
    """
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[0]
    if not 0 < q <= m:
        raise ValueError(f"need 1 <= q <= len(values) = {m}, got q={q}")
    if q == m:
        return np.arange(m)
    part = np.argpartition(-values, q - 1)
    threshold = values[part[q - 1]]
    sure = np.flatnonzero(values > threshold)
    tied = np.flatnonzero(values == threshold)
    take = q - sure.size
    return np.sort(np.concatenate([sure, tied[:take]]))


def q_argmax(values: np.ndarray, batch: np.ndarray, q: int) -> np.ndarray:
    """The q members of ``batch`` whose ``values`` entries are largest.

    ``values`` is indexed by sample id; ``batch`` must be sorted ascending
    so that the tie rule (smaller original index wins) reduces to the
    positional rule inside the batch.  Returns indices sorted ascending.
    """
    batch = np.asarray(batch)
    if q > batch.shape[0]:
        raise ValueError(f"q={q} exceeds batch size {batch.shape[0]}")
    vals = np.asarray(values, dtype=np.float64)[batch]
    return batch[topq_positions(vals, q)]


def rank_by_loss(losses: np.ndarray) -> np.ndarray:
    """Permutation listing sample indices by nonincreasing loss.

    Equal losses keep their original index order (stable sort on the
    negated values).  Non-finite losses signal divergence upstream and are
    rejected.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if not np.isfinite(losses).all():
        bad = int(np.flatnonzero(~np.isfinite(losses))[0])
        raise ValueError(f"non-finite loss at index {bad}; run has diverged")
    return np.argsort(-losses, kind="stable")
