"""1-D multi-scale deformable attention, encoder, and event-query decoder."""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .pyramid import level_reference_points

_EPS = 1e-12


def inverse_sigmoid(x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    x = x.clamp(min=eps, max=1.0 - eps)
    return torch.log(x / (1.0 - x))


class MsDeformAttention(nn.Module):
    """Deformable attention over a concatenated multi-level 1-D sequence.

    Per query, head, level, and point: a learned offset shifts the query's
    reference position (scaled into that level's frame index space), the
    value there is linearly interpolated, and softmax weights over all
    (level, point) samples of a head combine them. Interpolation clamps to
    level bounds; frames marked invalid are excluded by renormalizing the
    interpolation and attention weights.
    """

    def __init__(self, model_dim: int, heads: int, levels: int, points: int):
        super().__init__()
        if model_dim % heads != 0:
            raise ValueError(f"model_dim {model_dim} not divisible by heads {heads}")
        self.model_dim = model_dim
        self.heads = heads
        self.levels = levels
        self.points = points
        self.head_dim = model_dim // heads
        self.offset_proj = nn.Linear(model_dim, heads * levels * points)
        self.weight_proj = nn.Linear(model_dim, heads * levels * points)
        self.value_proj = nn.Linear(model_dim, model_dim)
        self.output_proj = nn.Linear(model_dim, model_dim)
        self.reset_parameters()

    def reset_parameters(self):
        nn.init.zeros_(self.offset_proj.weight)
        # Spread the initial samples around the reference point: point p of
        # head h starts (p + 1) frames away, alternating direction by head.
        spread = torch.zeros(self.heads, self.levels, self.points)
        for h in range(self.heads):
            direction = 1.0 if h % 2 == 0 else -1.0
            for p in range(self.points):
                spread[h, :, p] = direction * (p + 1)
        with torch.no_grad():
            self.offset_proj.bias.copy_(spread.flatten())
        nn.init.zeros_(self.weight_proj.weight)
        nn.init.zeros_(self.weight_proj.bias)
        nn.init.xavier_uniform_(self.value_proj.weight)
        nn.init.zeros_(self.value_proj.bias)
        nn.init.xavier_uniform_(self.output_proj.weight)
        nn.init.zeros_(self.output_proj.bias)

    def forward(
        self,
        queries: torch.Tensor,
        reference: torch.Tensor,
        value_sequence: torch.Tensor,
        level_lengths: list[int],
        valid: torch.Tensor | None = None,
        return_weights: bool = False,
    ):
        """queries: (n, d); reference: (n,) in [0, 1]; value_sequence:
        (T', d) with T' = sum(level_lengths); valid: optional (T',) bool."""
        if len(level_lengths) != self.levels:
            raise ValueError(
                f"value has {len(level_lengths)} levels, config says {self.levels}"
            )
        if reference.numel() and not (
            torch.isfinite(reference).all() and reference.min() >= 0 and reference.max() <= 1
        ):
            raise ValueError("reference points must lie in [0, 1]")
        n = queries.shape[0]
        h, l, p = self.heads, self.levels, self.points
        device = queries.device
        dtype = queries.dtype

        lengths = torch.as_tensor(level_lengths, device=device, dtype=dtype)
        starts = torch.zeros(l, device=device, dtype=torch.long)
        starts[1:] = torch.cumsum(
            torch.as_tensor(level_lengths[:-1], device=device), dim=0
        )

        value = self.value_proj(value_sequence).view(-1, h, self.head_dim)
        value = value.permute(1, 0, 2)  # (H, T', head_dim)

        offsets = self.offset_proj(queries).view(n, h, l, p)
        logits = self.weight_proj(queries).view(n, h, l, p)

        pos = reference.view(n, 1, 1, 1) * lengths.view(1, 1, l, 1) + offsets
        upper = (lengths - 1).view(1, 1, l, 1)
        pos = torch.minimum(pos.clamp(min=0.0), upper)
        i0 = pos.floor()
        frac = pos - i0
        i0 = i0.long()
        i1 = torch.minimum(i0 + 1, (lengths.long() - 1).view(1, 1, l, 1))
        g0 = i0 + starts.view(1, 1, l, 1)
        g1 = i1 + starts.view(1, 1, l, 1)

        if valid is None:
            m0 = torch.ones_like(frac)
            m1 = torch.ones_like(frac)
        else:
            maskf = valid.to(dtype)
            m0 = maskf[g0]
            m1 = maskf[g1]
        w0 = (1.0 - frac) * m0
        w1 = frac * m1
        denom = w0 + w1

        v0 = self._gather(value, g0)
        v1 = self._gather(value, g1)
        sampled = (w0.unsqueeze(-1) * v0 + w1.unsqueeze(-1) * v1) / denom.clamp(
            min=_EPS
        ).unsqueeze(-1)
        sample_valid = denom > 0

        logits = logits.masked_fill(~sample_valid, -1e9)
        weights = F.softmax(logits.view(n, h, l * p), dim=-1).view(n, h, l, p)
        weights = weights * sample_valid
        weights = weights / weights.sum(dim=(-2, -1), keepdim=True).clamp(min=_EPS)

        out = (weights.unsqueeze(-1) * sampled).sum(dim=(2, 3))  # (n, H, head_dim)
        out = self.output_proj(out.reshape(n, self.model_dim))
        if return_weights:
            return out, weights
        return out

    def _gather(self, value: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
        # value: (H, T', head_dim); idx: (n, H, L, P) -> (n, H, L, P, head_dim)
        n, h, l, p = idx.shape
        flat = idx.permute(1, 0, 2, 3).reshape(h, n * l * p, 1)
        flat = flat.expand(h, n * l * p, self.head_dim)
        picked = value.gather(1, flat)
        return picked.view(h, n, l, p, self.head_dim).permute(1, 0, 2, 3, 4)


class FeedForward(nn.Module):
    def __init__(self, model_dim: int, hidden_dim: int):
        super().__init__()
        self.fc1 = nn.Linear(model_dim, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, model_dim)

    def forward(self, x):
        return self.fc2(F.relu(self.fc1(x)))


class EncoderLayer(nn.Module):
    def __init__(self, model_dim, heads, levels, points, ffn_dim):
        super().__init__()
        self.attn = MsDeformAttention(model_dim, heads, levels, points)
        self.ffn = FeedForward(model_dim, ffn_dim)
        self.norm1 = nn.LayerNorm(model_dim)
        self.norm2 = nn.LayerNorm(model_dim)

    def forward(self, x, references, level_lengths, valid):
        x = self.norm1(x + self.attn(x, references, x, level_lengths, valid))
        x = self.norm2(x + self.ffn(x))
        return x


class DeformableEncoder(nn.Module):
    """Self-attention over the fused multi-scale sequence; every frame is a
    query whose reference point is its own within-level position."""

    def __init__(self, model_dim, heads, levels, points, num_layers, ffn_dim=None):
        super().__init__()
        ffn_dim = ffn_dim or 2 * model_dim
        self.layers = nn.ModuleList(
            EncoderLayer(model_dim, heads, levels, points, ffn_dim)
            for _ in range(num_layers)
        )

    def forward(self, x, level_lengths, valid=None):
        references = level_reference_points(level_lengths, device=x.device)
        for layer in self.layers:
            x = layer(x, references, level_lengths, valid)
        return x


@dataclass
class EventQuerySet:
    embeddings: torch.Tensor  # N x d
    reference_points: torch.Tensor  # N, in (0, 1)


class DecoderLayer(nn.Module):
    def __init__(self, model_dim, heads, levels, points, ffn_dim):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(model_dim, heads, batch_first=True)
        self.cross_attn = MsDeformAttention(model_dim, heads, levels, points)
        self.ffn = FeedForward(model_dim, ffn_dim)
        self.norm1 = nn.LayerNorm(model_dim)
        self.norm2 = nn.LayerNorm(model_dim)
        self.norm3 = nn.LayerNorm(model_dim)
        self.reference_update = nn.Linear(model_dim, 1)
        nn.init.zeros_(self.reference_update.weight)
        nn.init.zeros_(self.reference_update.bias)

    def forward(self, queries, references, memory, level_lengths, valid):
        attended, _ = self.self_attn(
            queries[None], queries[None], queries[None], need_weights=False
        )
        queries = self.norm1(queries + attended[0])
        cross = self.cross_attn(queries, references, memory, level_lengths, valid)
        queries = self.norm2(queries + cross)
        queries = self.norm3(queries + self.ffn(queries))
        delta = self.reference_update(queries).squeeze(-1)
        references = torch.sigmoid(inverse_sigmoid(references) + delta)
        return queries, references


class EventDecoder(nn.Module):
    """Decode N learned event queries against the encoded sequence.

    Each layer runs self-attention among the queries, cross deformable
    attention into the memory at the queries' reference points, and a
    feed-forward block; reference points are refined through a
    sigmoid-bounded additive update after every layer.
    """

    def __init__(self, model_dim, heads, levels, points, num_layers, num_queries, ffn_dim=None):
        super().__init__()
        ffn_dim = ffn_dim or 2 * model_dim
        self.num_queries = num_queries
        self.query_embed = nn.Embedding(num_queries, model_dim)
        self.reference_proj = nn.Linear(model_dim, 1)
        # Widen the initial reference spread so the queries start out
        # covering the whole timeline instead of clustering near 0.5.
        nn.init.normal_(self.reference_proj.weight, std=2.0 / math.sqrt(model_dim))
        self.layers = nn.ModuleList(
            DecoderLayer(model_dim, heads, levels, points, ffn_dim)
            for _ in range(num_layers)
        )

    def initial_queries(self) -> EventQuerySet:
        q = self.query_embed.weight
        refs = torch.sigmoid(self.reference_proj(q)).squeeze(-1)
        return EventQuerySet(embeddings=q, reference_points=refs)

    def forward(self, memory, level_lengths, valid=None, queries=None, references=None):
        if queries is None:
            initial = self.initial_queries()
            queries, references = initial.embeddings, initial.reference_points
        for layer in self.layers:
            queries, references = layer(queries, references, memory, level_lengths, valid)
        return queries, references
