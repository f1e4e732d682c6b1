"""Deterministic feature encoder for raw multimodal windows.

A raw window is a T x (M * d_in) matrix of synchronized per-modality
channels.  The encoder applies a fixed-seed random projection into a
d-dimensional latent space and mean-pools the T projected frames into L
equal-width latent frames.  Channels belonging to absent modalities are
zeroed before projection and the absence is recorded in the modality mask,
so downstream consumers can down-weight missing streams.

No training is involved: the projection matrix is a pure function of the
config seed, which makes encoded features reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteInput, ShapeMismatch


@dataclass(frozen=True)
class EncoderConfig:
    modalities: int = 4
    input_dim: int = 16          # channels per modality
    frames: int = 32             # raw frames T per window
    latent_frames: int = 16      # pooled frames L
    latent_dim: int = 64         # projected dim d
    seed: int = 7

    @property
    def raw_width(self) -> int:
        return self.modalities * self.input_dim


@dataclass(frozen=True)
class RawWindowRecord:
    window_id: str
    timestamp_ms: int
    values: np.ndarray           # T x (M * d_in)
    modality_mask: tuple[bool, ...]
    site_id: str = "site-0"


@dataclass(frozen=True)
class FeatureWindow:
    window_id: str
    timestamp_ms: int
    features: np.ndarray         # L x d
    modality_mask: tuple[bool, ...]
    site_id: str

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ShapeMismatch(f"features must be L x d with L,d >= 1, got {self.features.shape}")
        if not np.isfinite(self.features).all():
            raise NonFiniteInput("feature window contains non-finite values")
        if not any(self.modality_mask):
            raise ShapeMismatch("modality_mask must have at least one present modality")


def projection_matrix(config: EncoderConfig) -> np.ndarray:
    """Fixed-seed Gaussian projection, raw_width x latent_dim, scaled by 1/sqrt(width)."""
    rng = np.random.default_rng(config.seed)
    scale = 1.0 / np.sqrt(config.raw_width)
    return rng.standard_normal((config.raw_width, config.latent_dim)) * scale


def segment_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    """Equal-width [start, end) segments covering n items; earlier segments get the remainder."""
    parts = min(parts, n)
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(parts)]


def encode_window(raw: RawWindowRecord, config: EncoderConfig) -> FeatureWindow:
    """Project a raw window into L x d latent features, deterministically.

    Raises NonFiniteInput if any raw value is NaN/Inf, ShapeMismatch if the
    raw matrix or mask disagree with the config.
    """
    values = np.asarray(raw.values, dtype=np.float64)
    if values.ndim != 2 or values.shape != (config.frames, config.raw_width):
        raise ShapeMismatch(
            f"raw values shape {values.shape} != expected {(config.frames, config.raw_width)}"
        )
    if len(raw.modality_mask) != config.modalities:
        raise ShapeMismatch(
            f"modality_mask has {len(raw.modality_mask)} entries, expected {config.modalities}"
        )
    if not np.isfinite(values).all():
        raise NonFiniteInput(f"window {raw.window_id} contains non-finite values")

    masked = values.copy()
    for m, present in enumerate(raw.modality_mask):
        if not present:
            masked[:, m * config.input_dim:(m + 1) * config.input_dim] = 0.0

    projected = masked @ projection_matrix(config)        # T x d
    bounds = segment_bounds(config.frames, config.latent_frames)
    features = np.stack([projected[a:b].mean(axis=0) for a, b in bounds])

    return FeatureWindow(
        window_id=raw.window_id,
        timestamp_ms=raw.timestamp_ms,
        features=features,
        modality_mask=tuple(bool(b) for b in raw.modality_mask),
        site_id=raw.site_id,
    )
