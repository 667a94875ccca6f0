"""Fixed-length resampling, temporal feature pyramids, and fusion.

A pyramid stacks the raw-resolution sequence with L strided-conv levels,
concatenated along time; level l has length ceil(T / 2^l), so the total is
sum_{l=0..L} ceil(T / 2^l). Fusion combines the modality streams (plus the
concept stream) either after per-stream pyramids (late) or before a single
shared pyramid (early).
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn


def pyramid_lengths(t: int, levels: int) -> list[int]:
    return [math.ceil(t / 2**l) for l in range(levels + 1)]


def resize_to_fixed_length(sequence: np.ndarray, target_length: int = 1024):
    """Resample a T_raw x d sequence to exactly target_length rows.

    Longer sequences are linearly interpolated, shorter ones zero-padded at
    the end. Returns (resized, valid) where valid marks real rows.
    """
    seq = np.asarray(sequence, dtype=np.float32)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ValueError(f"expected non-empty T x d sequence, got shape {seq.shape}")
    if target_length < 1:
        raise ValueError(f"target length must be >= 1, got {target_length}")
    t_raw = seq.shape[0]
    valid = np.ones(target_length, dtype=bool)
    if t_raw == target_length:
        return seq.copy(), valid
    if t_raw < target_length:
        out = np.zeros((target_length, seq.shape[1]), dtype=np.float32)
        out[:t_raw] = seq
        valid[t_raw:] = False
        return out, valid
    # t_raw > target: sample at evenly spaced source positions
    pos = np.linspace(0.0, t_raw - 1, target_length)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, t_raw - 1)
    frac = (pos - lo).astype(np.float32)[:, None]
    out = seq[lo] * (1.0 - frac) + seq[hi] * frac
    return out.astype(np.float32), valid


@dataclass
class MultiScaleFeature:
    """Concatenated multi-level sequence with per-level bookkeeping."""

    data: torch.Tensor  # T' x d
    level_lengths: list[int]
    valid: torch.Tensor  # T' bool

    def __post_init__(self):
        if self.data.shape[0] != sum(self.level_lengths):
            raise ValueError(
                f"data rows {self.data.shape[0]} != sum of level lengths "
                f"{self.level_lengths}"
            )

    @property
    def level_offsets(self) -> list[int]:
        offs = [0]
        for n in self.level_lengths[:-1]:
            offs.append(offs[-1] + n)
        return offs


def _pool_mask(valid: torch.Tensor) -> torch.Tensor:
    # A coarse frame is valid when any contributing fine frame is valid.
    pooled = F.max_pool1d(valid.float()[None, None, :], kernel_size=3, stride=2, padding=1)
    return pooled[0, 0] > 0


class TemporalPyramid(nn.Module):
    """Raw-resolution projection plus L strided temporal conv levels.

    Level 0 is a linear projection of the input; each further level is a
    kernel-3 stride-2 conv over the previous one followed by layer norm and
    ReLU. Invalid (padding) rows are zeroed at every level.
    """

    def __init__(self, in_dim: int, out_dim: int, levels: int):
        super().__init__()
        self.levels = levels
        self.proj = nn.Linear(in_dim, out_dim)
        self.convs = nn.ModuleList(
            nn.Conv1d(out_dim, out_dim, kernel_size=3, stride=2, padding=1)
            for _ in range(levels)
        )
        self.norms = nn.ModuleList(nn.LayerNorm(out_dim) for _ in range(levels))

    def forward(self, x: torch.Tensor, valid: torch.Tensor | None = None) -> MultiScaleFeature:
        t = x.shape[0]
        if valid is None:
            valid = torch.ones(t, dtype=torch.bool, device=x.device)
        level = self.proj(x) * valid[:, None]
        datas, masks, lengths = [level], [valid], [t]
        for conv, norm in zip(self.convs, self.norms):
            nxt = conv(level.t()[None])[0].t()  # (ceil(T/2), d)
            mask = _pool_mask(masks[-1])
            nxt = F.relu(norm(nxt)) * mask[:, None]
            datas.append(nxt)
            masks.append(mask)
            lengths.append(nxt.shape[0])
            level = nxt
        return MultiScaleFeature(
            data=torch.cat(datas, dim=0),
            level_lengths=lengths,
            valid=torch.cat(masks, dim=0),
        )


class FeatureFusion(nn.Module):
    """Fuse the modality streams and the concept stream into one pyramid.

    late: each stream runs its own pyramid, per-frame level features are
    concatenated and projected to model_dim. early: streams are projected
    and concatenated per frame first, then one shared pyramid runs on the
    combined sequence. Both modes produce identical level lengths.
    """

    def __init__(self, stream_dims: list[int], mode: str, model_dim: int, levels: int):
        super().__init__()
        if mode not in ("early", "late"):
            raise ValueError(f"fusion mode must be 'early' or 'late', got {mode!r}")
        self.mode = mode
        self.stream_dims = list(stream_dims)
        if mode == "late":
            self.pyramids = nn.ModuleList(
                TemporalPyramid(d, model_dim, levels) for d in stream_dims
            )
            self.combine = nn.Linear(len(stream_dims) * model_dim, model_dim)
        else:
            self.projections = nn.ModuleList(
                nn.Linear(d, model_dim) for d in stream_dims
            )
            self.pyramid = TemporalPyramid(len(stream_dims) * model_dim, model_dim, levels)

    def forward(self, streams: list[torch.Tensor], valid: torch.Tensor) -> MultiScaleFeature:
        if len(streams) != len(self.stream_dims):
            raise ValueError(
                f"expected {len(self.stream_dims)} streams, got {len(streams)}"
            )
        lengths = {s.shape[0] for s in streams}
        if len(lengths) != 1:
            raise ValueError(f"stream time lengths differ: {sorted(lengths)}")
        if self.mode == "late":
            msfs = [pyr(s, valid) for pyr, s in zip(self.pyramids, streams)]
            fused = self.combine(torch.cat([m.data for m in msfs], dim=-1))
            fused = fused * msfs[0].valid[:, None]
            return MultiScaleFeature(fused, msfs[0].level_lengths, msfs[0].valid)
        projected = torch.cat(
            [proj(s) for proj, s in zip(self.projections, streams)], dim=-1
        )
        return self.pyramid(projected, valid)


class PositionalLevelEncoding(nn.Module):
    """Sinusoid over the within-level normalized position plus a learned
    per-level embedding. The sinusoid depends only on (T', levels)."""

    POSITION_SCALE = 100.0

    def __init__(self, model_dim: int, num_levels: int):
        super().__init__()
        if model_dim % 2 != 0:
            raise ValueError(f"model_dim must be even, got {model_dim}")
        self.model_dim = model_dim
        self.level_embed = nn.Embedding(num_levels, model_dim)

    def sinusoid(self, positions: torch.Tensor) -> torch.Tensor:
        """positions in [0, 1] -> (len, d) with interleaved sin/cos."""
        half = self.model_dim // 2
        freq = torch.exp(
            -math.log(10000.0)
            * torch.arange(half, dtype=positions.dtype, device=positions.device)
            / half
        )
        angles = positions[:, None] * self.POSITION_SCALE * freq[None, :]
        enc = torch.zeros(positions.shape[0], self.model_dim, device=positions.device, dtype=positions.dtype)
        enc[:, 0::2] = torch.sin(angles)
        enc[:, 1::2] = torch.cos(angles)
        return enc

    def forward(self, level_lengths: list[int]) -> torch.Tensor:
        device = self.level_embed.weight.device
        parts = []
        for lvl, t_l in enumerate(level_lengths):
            pos = torch.arange(t_l, dtype=torch.float32, device=device) / max(t_l - 1, 1)
            parts.append(self.sinusoid(pos) + self.level_embed.weight[lvl])
        return torch.cat(parts, dim=0)


def level_reference_points(level_lengths: list[int], device=None) -> torch.Tensor:
    """Within-level normalized position of every frame, in [0, 1]."""
    parts = [
        torch.arange(t_l, dtype=torch.float32, device=device) / max(t_l - 1, 1)
        for t_l in level_lengths
    ]
    return torch.cat(parts, dim=0)
