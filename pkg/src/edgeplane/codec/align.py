"""Contrastive alignment diagnostic between pooled sensor and text vectors.

Reports the batch InfoNCE value

    -(1/B) * sum_i log( exp(<h_i, t_i>/tau) / sum_j exp(<h_i, t_j>/tau) )

used offline to check how well a projection keeps sensor embeddings close
to their paired text embeddings.  Loss values only; no gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteInput, NonFiniteResult, ShapeMismatch


@dataclass(frozen=True)
class AlignmentBatch:
    pooled_vectors: np.ndarray    # B x d sensor-side vectors h_i
    text_vectors: np.ndarray      # B x d text-side vectors t_i
    temperature: float = 0.07

    def __post_init__(self):
        h = np.asarray(self.pooled_vectors)
        t = np.asarray(self.text_vectors)
        if h.ndim != 2 or h.shape[0] < 1:
            raise ShapeMismatch(f"pooled_vectors must be B x d with B >= 1, got {h.shape}")
        if h.shape != t.shape:
            raise ShapeMismatch(f"shape mismatch: {h.shape} vs {t.shape}")
        if self.temperature <= 0:
            raise ValueError(f"temperature {self.temperature} must be positive")
        if not (np.isfinite(h).all() and np.isfinite(t).all()):
            raise NonFiniteInput("alignment batch contains non-finite values")


def alignment_loss(batch: AlignmentBatch) -> float:
    """Mean InfoNCE over the batch, stabilized by row-max subtraction.

    Always >= 0; exactly 0 for B = 1.
    """
    h = np.asarray(batch.pooled_vectors, dtype=np.float64)
    t = np.asarray(batch.text_vectors, dtype=np.float64)
    logits = (h @ t.T) / batch.temperature
    row_max = logits.max(axis=1, keepdims=True)
    shifted = logits - row_max
    log_denom = np.log(np.exp(shifted).sum(axis=1))
    diag = np.diagonal(shifted)
    loss = float(np.mean(log_denom - diag))
    if not np.isfinite(loss):
        raise NonFiniteResult(f"alignment loss is {loss}")
    return loss
