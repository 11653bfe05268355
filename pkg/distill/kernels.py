"""
Similarity kernels: the batch-level gram of similarity preserving
distillation and the frame-level (intra-utterance) gram with its channel
normalization, sigmoid squash and bilinear resize.

Feature maps are ``(batch, channels, height, width)`` tensors; ``width``
indexes time frames and ``height`` frequency. Every kernel is a pure torch
function, so gradients flow through it.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from core.exceptions import InvalidInputError

EPS_NORM = 1e-12


@dataclass(frozen=True)
class FeatureMap:
    """a rank-4 activation tagged with the layer that produced it"""
    values: torch.Tensor
    layer_id: str

    def __post_init__(self):
        if self.values.dim() != 4 or min(self.values.shape) < 1:
            raise InvalidInputError(
                f'{self.layer_id}: feature map must be (b, c, h, w) with '
                f'every axis >= 1, got {tuple(self.values.shape)}')

    @property
    def shape(self):
        return tuple(self.values.shape)


class SimilarityKind(str, Enum):
    BATCH = 'batch'
    FRAME = 'frame'


@dataclass(frozen=True)
class SimilarityMatrix:
    values: torch.Tensor
    kind: SimilarityKind
    squashed: bool = False


@dataclass(frozen=True)
class SquashParams:
    """sigmoid scale ``gamma`` and similarity threshold ``delta``"""
    gamma: float = 10.0
    delta: float = 0.5

    def __post_init__(self):
        if self.gamma <= 0:
            raise InvalidInputError(f'gamma must be > 0, got {self.gamma}')


def _values(a):
    return a.values if isinstance(a, (FeatureMap, SimilarityMatrix)) else a


def _like(a, values):
    if isinstance(a, FeatureMap):
        return FeatureMap(values, a.layer_id)
    return values


def _safe_divide(x, norm):
    """x / norm, with zeros wherever norm < EPS_NORM"""
    return torch.where(norm < EPS_NORM, torch.zeros_like(x),
                       x / norm.clamp_min(EPS_NORM))


def sp_gram(a):
    """row-normalized ``Q Q^T`` of the flattened ``(b, chw)`` activations"""
    q = _values(a).flatten(start_dim=1)
    g = q @ q.transpose(0, 1)
    norm = torch.linalg.vector_norm(g, dim=1, keepdim=True)
    return SimilarityMatrix(_safe_divide(g, norm), SimilarityKind.BATCH)


def channel_normalize(a):
    """divide every (utterance, channel) slice by its Frobenius norm"""
    x = _values(a)
    norm = torch.linalg.vector_norm(x, dim=(2, 3), keepdim=True)
    return _like(a, _safe_divide(x, norm))


def frame_grams(a_norm):
    """``(b, w, w)`` frame-by-frame inner products for every utterance"""
    x = _values(a_norm)
    frames = x.flatten(start_dim=1, end_dim=2)
    return frames.transpose(1, 2) @ frames


def frame_gram(a_norm, b_index):
    """w x w gram of utterance ``b_index`` (0-based)

    Each of the w frames is a column vector of length c*h; entry (s, t) is
    the inner product of frames s and t.
    """
    x = _values(a_norm)
    if not 0 <= b_index < x.shape[0]:
        raise IndexError(
            f'utterance index {b_index} outside batch of {x.shape[0]}')
    frames = x[b_index].flatten(start_dim=0, end_dim=1)
    return SimilarityMatrix(frames.transpose(0, 1) @ frames,
                            SimilarityKind.FRAME)


def sigmoid_squash(g, p):
    """elementwise sigmoid(gamma * (g - delta))"""
    if isinstance(g, SimilarityMatrix):
        if g.squashed:
            raise InvalidInputError('similarity matrix is already squashed')
        return SimilarityMatrix(sigmoid_squash(g.values, p), g.kind, True)
    return torch.sigmoid(p.gamma * (g - p.delta))


def bilinear_resize(a, target_h, target_w):
    """corner-aligned bilinear resize of every (utterance, channel) slice"""
    if target_h < 1 or target_w < 1:
        raise InvalidInputError(
            f'target size must be >= 1, got {target_h}x{target_w}')
    x = _values(a)
    if tuple(x.shape[2:]) == (target_h, target_w):
        return a
    resized = F.interpolate(x, size=(target_h, target_w), mode='bilinear',
                            align_corners=True)
    return _like(a, resized)


def band_mean(g, lag, width=1):
    """mean of g[s, s + k] over every diagonal with ``|k - lag| <= width``"""
    values = _values(g)
    n = values.shape[-1]
    offsets = [k for k in range(lag - width, lag + width + 1) if 1 <= k < n]
    if not offsets:
        raise InvalidInputError(f'no diagonal near lag {lag} in {n}x{n} gram')
    diagonals = torch.cat([torch.diagonal(values, offset=k, dim1=-2, dim2=-1)
                           .reshape(-1) for k in offsets])
    return float(diagonals.mean())


def save_heatmap_png(matrix, path):
    """min-max scaled grayscale PNG of a square matrix"""
    values = np.asarray(_values(matrix).detach().cpu(), dtype=np.float64)
    low, high = values.min(), values.max()
    scaled = np.zeros_like(values) if high == low \
        else (values - low) / (high - low)
    Image.fromarray(np.round(scaled * 255).astype(np.uint8)) \
        .save(path, format='PNG')
    return path
