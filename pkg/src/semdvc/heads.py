"""The four parallel prediction heads over decoded event representations.

None of the heads consumes another head's output; all are functions of the
event representations alone.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .text import BOS, EOS, PAD


class MLP(nn.Module):
    """Simple multi-layer perceptron with ReLU between layers."""

    def __init__(self, in_dim, hidden_dim, out_dim, num_layers):
        super().__init__()
        dims = [in_dim] + [hidden_dim] * (num_layers - 1) + [out_dim]
        self.layers = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:])
        )

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = F.relu(x)
        return x


class LocalizationHead(nn.Module):
    """Predict a normalized (start, end) per query via a (center, width)
    parameterization, which guarantees start <= end by construction."""

    def __init__(self, model_dim: int, hidden_dim: int | None = None, num_layers: int = 3):
        super().__init__()
        self.mlp = MLP(model_dim, hidden_dim or model_dim, 2, num_layers)

    def forward(self, reps: torch.Tensor) -> torch.Tensor:
        raw = torch.sigmoid(self.mlp(reps))
        center, width = raw[..., 0], raw[..., 1]
        start = (center - width / 2).clamp(0.0, 1.0)
        end = (center + width / 2).clamp(0.0, 1.0)
        return torch.stack([start, end], dim=-1)


class ClassificationHead(nn.Module):
    """Independent per-label probabilities (multi-label, not softmax)."""

    def __init__(self, model_dim: int, num_labels: int, hidden_dim: int | None = None):
        super().__init__()
        self.mlp = MLP(model_dim, hidden_dim or model_dim, num_labels, 2)
        # Bias the initial probabilities low so focal loss on the mostly
        # negative targets starts small.
        prior = 0.01
        nn.init.constant_(self.mlp.layers[-1].bias, -math.log((1 - prior) / prior))

    def forward(self, reps: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.mlp(reps))


class EventCounter(nn.Module):
    """Element-wise max over queries, then a linear layer and softmax over
    the 0..max_events count classes."""

    def __init__(self, model_dim: int, max_events: int):
        super().__init__()
        self.max_events = max_events
        self.fc = nn.Linear(model_dim, max_events + 1)

    def forward(self, reps: torch.Tensor) -> torch.Tensor:
        pooled = reps.max(dim=0).values
        return self.fc(pooled)

    @staticmethod
    def probabilities(logits: torch.Tensor) -> torch.Tensor:
        return F.softmax(logits, dim=-1)

    @staticmethod
    def count(logits: torch.Tensor) -> int:
        # argmax with lowest-index tie break
        return int(torch.argmax(logits).item())


@dataclass
class GreedyCaptions:
    tokens: torch.Tensor  # N x S, PAD after the end token
    log_probs: torch.Tensor  # N x S, log-probability of each emitted token
    lengths: torch.Tensor  # N, number of emitted tokens incl. the end token


class CaptionHead(nn.Module):
    """Recurrent captioner: the event representation is fed at every step
    alongside the previous word embedding; a fully-connected layer over the
    hidden state predicts the next word."""

    def __init__(
        self,
        model_dim: int,
        vocab_size: int,
        word_dim: int = 128,
        hidden_dim: int = 256,
        max_len: int = 20,
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.embed = nn.Embedding(vocab_size, word_dim)
        self.cell = nn.LSTMCell(word_dim + model_dim, hidden_dim)
        self.out = nn.Linear(hidden_dim, vocab_size)

    def _step(self, tokens, reps, state):
        inp = torch.cat([self.embed(tokens), reps], dim=-1)
        h, c = self.cell(inp, state)
        return F.log_softmax(self.out(h), dim=-1), (h, c)

    def teacher_forcing(self, reps: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
        """Per-step log-probabilities for ground-truth target sequences.

        reps: (P, d); targets: (P, S) token ids (caption tokens then EOS,
        PAD afterwards). Step s consumes the previous target token (BOS at
        s=0) and scores targets[:, s]. Returns (P, S, V).
        """
        if targets.numel() and (targets.min() < 0 or targets.max() >= self.vocab_size):
            raise ValueError("caption target token index outside vocabulary")
        n, steps = targets.shape
        prev = torch.full((n,), BOS, dtype=torch.long, device=reps.device)
        state = None
        outputs = []
        for s in range(steps):
            log_probs, state = self._step(prev, reps, state)
            outputs.append(log_probs)
            prev = targets[:, s].clamp(min=0)
        return torch.stack(outputs, dim=1)

    @torch.no_grad()
    def greedy(self, reps: torch.Tensor) -> GreedyCaptions:
        """Argmax decoding until the end token or max_len steps."""
        n = reps.shape[0]
        device = reps.device
        prev = torch.full((n,), BOS, dtype=torch.long, device=device)
        state = None
        done = torch.zeros(n, dtype=torch.bool, device=device)
        tokens = torch.full((n, self.max_len), PAD, dtype=torch.long, device=device)
        log_probs = torch.zeros(n, self.max_len, device=device)
        lengths = torch.zeros(n, dtype=torch.long, device=device)
        for s in range(self.max_len):
            step_lp, state = self._step(prev, reps, state)
            choice = step_lp.argmax(dim=-1)
            chosen_lp = step_lp.gather(-1, choice[:, None]).squeeze(-1)
            active = ~done
            tokens[active, s] = choice[active]
            log_probs[active, s] = chosen_lp[active]
            lengths[active] += 1
            done = done | (choice == EOS)
            prev = choice
            if bool(done.all()):
                break
        return GreedyCaptions(tokens=tokens, log_probs=log_probs, lengths=lengths)
