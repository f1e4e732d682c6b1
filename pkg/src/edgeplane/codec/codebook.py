"""Vector-quantized codebook: assignment, EMA maintenance, dead-code refresh.

The codebook holds V prototype vectors in R^d.  Quantization pools a
feature window into K segment means u_k and assigns each to its nearest
prototype by squared Euclidean distance, ties broken toward the lowest
index.  The reported quantization loss collapses the two stop-gradient
terms of the training objective into (1 + beta) times the squared
assignment distance, which is the value both terms share at inference.

Prototype maintenance uses exponential moving averages of assignment
counts and sums:

    counts[i] <- decay * counts[i] + (1 - decay) * n_i
    sums[i]   <- decay * sums[i]   + (1 - decay) * sum_{z_k = i} u_k
    vectors[i] = sums[i] / counts[i]          (when counts[i] > eps)

Codes whose share of the recent assignment window falls below 30% of the
uniform share (0.30 / V) are considered dead and are re-seeded from a pool
of recent embeddings.
"""

from __future__ import annotations

import struct
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2

from ..errors import (
    DimensionMismatch,
    EmptyCodebook,
    EmptyPool,
    IndexOutOfRange,
    InsufficientUsage,
)
from .encoder import FeatureWindow, segment_bounds

MAGIC = b"CSCB"
FORMAT_VERSION = 1
COUNT_EPS = 1e-8
DEAD_SHARE = 0.30


@dataclass(frozen=True)
class CodeSequence:
    """Discrete semantic token sequence for one window."""

    codes: tuple[int, ...]
    timestamp_ms: int
    modality_presence: tuple[bool, ...]
    confidence: float
    site_id: str

    def __post_init__(self):
        if not (1 <= len(self.codes) <= 64):
            raise IndexOutOfRange(f"code sequence length {len(self.codes)} outside [1, 64]")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


class Codebook:
    """V x d prototype table with EMA statistics and a usage window."""

    def __init__(
        self,
        vectors: np.ndarray,
        decay: float = 0.99,
        commitment_beta: float = 0.25,
        usage_window_size: int = 1024,
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 2:
            raise EmptyCodebook(f"codebook needs V >= 2 vectors, got shape {vectors.shape}")
        if not np.isfinite(vectors).all():
            raise ValueError("codebook vectors must be finite")
        if not (0.0 < decay < 1.0):
            raise ValueError(f"decay {decay} outside (0, 1)")
        if commitment_beta <= 0.0:
            raise ValueError(f"commitment_beta {commitment_beta} must be positive")
        self.vectors = vectors.copy()
        self.decay = float(decay)
        self.commitment_beta = float(commitment_beta)
        self.ema_counts = np.zeros(self.size, dtype=np.float64)
        self.ema_sums = np.zeros_like(self.vectors)
        # ring of recent assignment indices; -1 marks a slot voided by a refresh
        self.usage_window: deque[int] = deque(maxlen=usage_window_size)
        # running mean assignment distance, used as the confidence scale
        self.mean_distance: float = 0.0
        self._distance_updates: int = 0

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def init_kmeans(
        cls,
        samples: np.ndarray,
        size: int,
        seed: int = 0,
        **kwargs,
    ) -> "Codebook":
        """Initialize prototypes with k-means++ over pooled embeddings."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[0] < size:
            raise EmptyPool(f"need at least {size} samples to seed {size} codes")
        centroids, _ = kmeans2(samples, size, minit="++", seed=seed)
        return cls(centroids, **kwargs)

    def usage_shares(self) -> np.ndarray:
        total = len(self.usage_window)
        if total == 0:
            return np.zeros(self.size)
        counts = Counter(z for z in self.usage_window if z >= 0)
        shares = np.zeros(self.size)
        for z, n in counts.items():
            shares[z] = n / total
        return shares


def pool_segments(window: FeatureWindow, k: int) -> np.ndarray:
    """Mean-pool L latent frames into K equal-width segment embeddings.

    When the window has fewer than k frames the pooled count drops to L.
    """
    feats = window.features
    bounds = segment_bounds(feats.shape[0], k)
    return np.stack([feats[a:b].mean(axis=0) for a, b in bounds])


def assign_codes(embeddings: np.ndarray, codebook: Codebook) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-prototype assignment; returns (indices, squared distances)."""
    diff = embeddings[:, None, :] - codebook.vectors[None, :, :]
    sq = np.einsum("kvd,kvd->kv", diff, diff)
    idx = sq.argmin(axis=1)                     # argmin takes the lowest index on ties
    return idx, sq[np.arange(len(idx)), idx]


def quantize(
    window: FeatureWindow,
    codebook: Codebook,
    k: int = 16,
) -> tuple[CodeSequence, float]:
    """Quantize a feature window into a code sequence.

    Returns the sequence and the collapsed quantization loss
    sum_k ||u_k - c_{z_k}||^2 * (1 + beta).  Confidence is
    exp(-mean_distance / scale) where scale is the codebook's running mean
    assignment distance (falling back to this window's own mean when no
    history exists).  Pure: never mutates the codebook.
    """
    if window.features.shape[1] != codebook.dim:
        raise DimensionMismatch(
            f"window dim {window.features.shape[1]} != codebook dim {codebook.dim}"
        )
    pooled = pool_segments(window, k)
    codes, sq_dists = assign_codes(pooled, codebook)
    vq_loss = float(sq_dists.sum() * (1.0 + codebook.commitment_beta))

    mean_dist = float(np.sqrt(sq_dists).mean())
    scale = codebook.mean_distance if codebook.mean_distance > 0 else max(mean_dist, 1e-12)
    confidence = float(np.clip(np.exp(-mean_dist / scale), 0.0, 1.0))

    seq = CodeSequence(
        codes=tuple(int(z) for z in codes),
        timestamp_ms=window.timestamp_ms,
        modality_presence=window.modality_mask,
        confidence=confidence,
        site_id=window.site_id,
    )
    return seq, vq_loss


def decode_codes(codebook: Codebook, codes) -> np.ndarray:
    """Reconstruct the K x d prototype matrix addressed by a code list."""
    idx = np.asarray(list(codes), dtype=np.int64)
    if idx.min(initial=0) < 0 or (len(idx) and idx.max() >= codebook.size):
        raise IndexOutOfRange("code index outside codebook")
    return codebook.vectors[idx].copy()


def update_codebook(codebook: Codebook, assignments: list[tuple[np.ndarray, int]]) -> Codebook:
    """Apply one EMA maintenance step in place; returns the codebook.

    ``assignments`` pairs each pre-quant embedding u_k with its assigned
    index z_k.  Prototypes with effectively zero accumulated count are left
    untouched so unassigned codes keep their seed vectors.
    """
    if not assignments:
        raise EmptyPool("assignments must be nonempty")
    batch_counts = np.zeros(codebook.size)
    batch_sums = np.zeros_like(codebook.vectors)
    sq_total = 0.0
    for u, z in assignments:
        z = int(z)
        if not (0 <= z < codebook.size):
            raise IndexOutOfRange(f"assignment index {z} outside [0, {codebook.size})")
        u = np.asarray(u, dtype=np.float64)
        batch_counts[z] += 1.0
        batch_sums[z] += u
        delta = u - codebook.vectors[z]
        sq_total += float(delta @ delta)

    d = codebook.decay
    codebook.ema_counts = d * codebook.ema_counts + (1.0 - d) * batch_counts
    codebook.ema_sums = d * codebook.ema_sums + (1.0 - d) * batch_sums
    live = codebook.ema_counts > COUNT_EPS
    codebook.vectors[live] = codebook.ema_sums[live] / codebook.ema_counts[live, None]

    for _, z in assignments:
        codebook.usage_window.append(int(z))

    mean_dist = np.sqrt(sq_total / len(assignments))
    if codebook._distance_updates == 0:
        codebook.mean_distance = float(mean_dist)
    else:
        codebook.mean_distance = float(d * codebook.mean_distance + (1.0 - d) * mean_dist)
    codebook._distance_updates += 1
    return codebook


def refresh_dead_codes(
    codebook: Codebook,
    recent_embeddings: np.ndarray,
    min_window: int = 64,
    seed: int = 0,
) -> tuple[Codebook, list[int]]:
    """Re-seed codes whose recent usage share fell below 0.30 / V.

    Each dead code is assigned a uniformly sampled embedding from the
    recent pool (fixed seed for reproducibility); its EMA state and usage
    history are cleared.  Returns the refreshed indices.
    """
    if len(codebook.usage_window) < min_window:
        raise InsufficientUsage(
            f"usage window has {len(codebook.usage_window)} assignments, need {min_window}"
        )
    shares = codebook.usage_shares()
    threshold = DEAD_SHARE / codebook.size
    dead = [i for i in range(codebook.size) if shares[i] < threshold]
    if not dead:
        return codebook, []

    pool = np.asarray(recent_embeddings, dtype=np.float64)
    if pool.ndim != 2 or pool.shape[0] == 0:
        raise EmptyPool("refresh needed but the recent-embedding pool is empty")
    if pool.shape[1] != codebook.dim:
        raise DimensionMismatch(f"pool dim {pool.shape[1]} != codebook dim {codebook.dim}")

    rng = np.random.default_rng(seed)
    picks = rng.integers(0, pool.shape[0], size=len(dead))
    for i, p in zip(dead, picks):
        codebook.vectors[i] = pool[p]
        codebook.ema_counts[i] = 0.0
        codebook.ema_sums[i] = 0.0
    dead_set = set(dead)
    for slot in range(len(codebook.usage_window)):
        if codebook.usage_window[slot] in dead_set:
            codebook.usage_window[slot] = -1
    return codebook, dead


# -- persistence -------------------------------------------------------------
#
# Flat little-endian binary layout:
#   magic "CSCB" | version u16 | V u32 | d u32 | decay f64 | beta f64
#   vectors (V*d f64, row-major) | ema_counts (V f64) | ema_sums (V*d f64)

_HEADER = struct.Struct("<4sHIIdd")


def save_codebook(codebook: Codebook, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(
            MAGIC, FORMAT_VERSION, codebook.size, codebook.dim,
            codebook.decay, codebook.commitment_beta,
        ))
        fh.write(codebook.vectors.astype("<f8").tobytes())
        fh.write(codebook.ema_counts.astype("<f8").tobytes())
        fh.write(codebook.ema_sums.astype("<f8").tobytes())


def load_codebook(path, usage_window_size: int = 1024) -> Codebook:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, size, dim, decay, beta = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported codebook format version {version}")
        vec_bytes = fh.read(size * dim * 8)
        cnt_bytes = fh.read(size * 8)
        sum_bytes = fh.read(size * dim * 8)
    vectors = np.frombuffer(vec_bytes, dtype="<f8").reshape(size, dim)
    cb = Codebook(vectors, decay=decay, commitment_beta=beta,
                  usage_window_size=usage_window_size)
    cb.ema_counts = np.frombuffer(cnt_bytes, dtype="<f8").copy()
    cb.ema_sums = np.frombuffer(sum_bytes, dtype="<f8").reshape(size, dim).copy()
    return cb
