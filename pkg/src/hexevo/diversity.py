"""Behavior-comparison metrics over binary gait vectors.

Two distances are provided: the raw Hamming distance (used as the selection
objective) and a normalized mutual-information distance (used as the
signature's divergence feature).  Entropies are plug-in estimates in bits
with a small-sample correction added: (S - 1) / (2 * T) for marginals and
(S_a + S_b - S_ab - 1) / (2 * T) for the joint, where S counts states with
nonzero probability and T is the sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DiversityError(ValueError):
    pass


@dataclass(frozen=True)
class EntropyEstimate:
    raw: float
    correction: float

    @property
    def corrected(self) -> float:
        return self.raw + self.correction


def _as_bits(seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.uint8)
    if arr.ndim != 1:
        raise DiversityError("behavior vectors must be one-dimensional")
    if arr.size == 0:
        raise DiversityError("behavior vectors must be nonempty")
    return arr


def hamming(a, b) -> int:
    """Number of differing positions between two equal-length bit vectors."""
    x = _as_bits(a)
    y = _as_bits(b)
    if x.shape != y.shape:
        raise DiversityError(f"length mismatch: {x.shape} vs {y.shape}")
    return int(np.count_nonzero(x != y))


def _plugin_entropy_bits(counts: np.ndarray, total: int) -> tuple[float, int]:
    probs = counts[counts > 0] / total
    raw = float(-np.sum(probs * np.log2(probs)))
    return raw, int(probs.size)


def entropy_corrected(a) -> EntropyEstimate:
    x = _as_bits(a)
    n = x.size
    counts = np.bincount(x, minlength=2)
    raw, states = _plugin_entropy_bits(counts, n)
    return EntropyEstimate(raw=raw, correction=(states - 1) / (2.0 * n))


def joint_entropy_corrected(a, b) -> EntropyEstimate:
    x = _as_bits(a)
    y = _as_bits(b)
    if x.shape != y.shape:
        raise DiversityError(f"length mismatch: {x.shape} vs {y.shape}")
    n = x.size
    joint_counts = np.bincount(2 * x.astype(np.intp) + y, minlength=4)
    raw, joint_states = _plugin_entropy_bits(joint_counts, n)
    marg_a = int(np.count_nonzero(np.bincount(x, minlength=2)))
    marg_b = int(np.count_nonzero(np.bincount(y, minlength=2)))
    correction = (marg_a + marg_b - joint_states - 1) / (2.0 * n)
    return EntropyEstimate(raw=raw, correction=correction)


def nmi_distance(a, b) -> float:
    """One minus the normalized mutual information, with corrected entropies.

    Identical sequences give exactly 0 (the joint correction cancels the
    marginal one).  If both sequences are constant the normalizer vanishes;
    the distance is then 0 for identical sequences and 1 otherwise.
    """
    x = _as_bits(a)
    y = _as_bits(b)
    if x.shape != y.shape:
        raise DiversityError(f"length mismatch: {x.shape} vs {y.shape}")
    ha = entropy_corrected(x).corrected
    hb = entropy_corrected(y).corrected
    denom = max(ha, hb)
    if denom <= 0.0:
        return 0.0 if np.array_equal(x, y) else 1.0
    hab = joint_entropy_corrected(x, y).corrected
    mutual = ha + hb - hab
    return 1.0 - mutual / denom
