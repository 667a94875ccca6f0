"""Set matching and the four training losses."""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.optimize import linear_sum_assignment

_EPS = 1e-12
_PROB_EPS = 1e-7


def giou_1d(pred, gt):
    """Generalized IoU between 1-D intervals, in [-1, 1].

    Accepts (..., 2) tensors of ordered [start, end] pairs and broadcasts.
    Conventions for degenerate inputs: zero union -> IoU 0; zero hull
    (both intervals are the same point) -> gIoU 1.
    """
    # plain python/numpy inputs are scored in float64
    pred = pred if torch.is_tensor(pred) else torch.as_tensor(pred, dtype=torch.float64)
    gt = gt if torch.is_tensor(gt) else torch.as_tensor(gt, dtype=pred.dtype)
    ps, pe = pred[..., 0], pred[..., 1]
    gs, ge = gt[..., 0], gt[..., 1]
    inter = (torch.minimum(pe, ge) - torch.maximum(ps, gs)).clamp(min=0)
    union = (pe - ps) + (ge - gs) - inter
    hull = torch.maximum(pe, ge) - torch.minimum(ps, gs)
    iou = inter / union.clamp(min=_EPS)
    iou = torch.where(union > 0, iou, torch.zeros_like(iou))
    giou = iou - (hull - union) / hull.clamp(min=_EPS)
    return torch.where(hull > 0, giou, torch.ones_like(giou))


def _focal_elementwise(predictions, targets, gamma, alpha):
    p = predictions.clamp(min=_PROB_EPS, max=1.0 - _PROB_EPS)
    y = targets
    pos = -alpha * y * (1.0 - p) ** gamma * torch.log(p)
    neg = -(1.0 - alpha) * (1.0 - y) * p ** gamma * torch.log(1.0 - p)
    return pos + neg


def focal_loss(predictions, targets, gamma: float = 2.0, alpha: float = 0.25):
    """Mean focal loss over all elements; inputs are probabilities in (0, 1)
    (values at exactly 0/1 are clamped to [1e-7, 1 - 1e-7])."""
    if not torch.is_tensor(predictions):
        predictions = torch.as_tensor(predictions, dtype=torch.float64)
    if not torch.is_tensor(targets):
        targets = torch.as_tensor(targets, dtype=predictions.dtype)
    return _focal_elementwise(predictions, targets, gamma, alpha).mean()


@dataclass(frozen=True)
class MatchResult:
    pairs: list  # (query_index, ground_truth_index), injective on both sides
    unmatched_queries: list


def hungarian_match(cost_matrix) -> MatchResult:
    """Exact minimum-cost assignment of ground truths to queries.

    cost_matrix is N x G with G <= N; every ground truth gets exactly one
    query.
    """
    cost = np.asarray(cost_matrix, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    n, g = cost.shape
    if g > n:
        raise ValueError(f"more ground truths ({g}) than queries ({n})")
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix contains non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    pairs = sorted(zip(rows.tolist(), cols.tolist()), key=lambda p: p[1])
    matched = {q for q, _ in pairs}
    unmatched = [q for q in range(n) if q not in matched]
    return MatchResult(pairs=pairs, unmatched_queries=unmatched)


def matching_cost(
    loc_spans,
    cls_probs,
    gt_spans,
    gt_label_targets,
    cost_loc: float = 2.0,
    cost_cls: float = 1.0,
    gamma: float = 2.0,
    alpha: float = 0.25,
):
    """Pairwise assignment cost: localization (1 - gIoU) plus per-pair
    focal cost of the predicted label vector against the target vector.

    loc_spans: (N, 2); cls_probs: (N, C); gt_spans: (G, 2);
    gt_label_targets: (G, C). Returns an (N, G) tensor.
    """
    giou = giou_1d(loc_spans[:, None, :], gt_spans[None, :, :])  # (N, G)
    focal = _focal_elementwise(
        cls_probs[:, None, :], gt_label_targets[None, :, :], gamma, alpha
    ).mean(dim=-1)  # (N, G)
    return cost_loc * (1.0 - giou) + cost_cls * focal


@dataclass(frozen=True)
class LossWeights:
    caption: float = 1.0
    localization: float = 2.0
    classification: float = 1.0
    counter: float = 0.5

    def __post_init__(self):
        vals = (self.caption, self.localization, self.classification, self.counter)
        if any(v < 0 for v in vals):
            raise ValueError(f"negative loss weight in {vals}")
        if all(v == 0 for v in vals):
            raise ValueError("all loss weights are zero")


@dataclass
class LossBreakdown:
    caption: torch.Tensor
    localization: torch.Tensor
    classification: torch.Tensor
    counter: torch.Tensor
    total: torch.Tensor

    def detach_floats(self) -> dict:
        return {
            "caption": self.caption.item(),
            "localization": self.localization.item(),
            "classification": self.classification.item(),
            "counter": self.counter.item(),
            "total": self.total.item(),
        }


def compute_losses(
    loc_spans,
    cls_probs,
    counter_logits,
    caption_log_probs,
    caption_targets,
    match: MatchResult,
    gt_spans,
    gt_label_targets,
    weights: LossWeights,
    max_events: int,
    pad_index: int = 0,
    gamma: float = 2.0,
    alpha: float = 0.25,
) -> LossBreakdown:
    """Assemble the weighted four-part loss for one video.

    Caption and localization terms use only matched pairs; classification
    uses every query (unmatched queries target the all-zero vector);
    the counter targets class min(#GT, max_events). caption_log_probs is
    (#pairs, S, V) teacher-forced log-probabilities aligned with
    match.pairs, caption_targets the (#pairs, S) token ids (pad-masked).
    With zero ground truths the caption and localization terms are 0.
    """
    n_queries, n_labels = cls_probs.shape
    n_gt = gt_spans.shape[0]
    device = cls_probs.device
    zero = torch.zeros((), device=device, dtype=cls_probs.dtype)

    if n_gt > 0 and not match.pairs:
        raise ValueError("ground truths present but no matched pairs")

    if match.pairs:
        q_idx = torch.as_tensor([q for q, _ in match.pairs], device=device)
        g_idx = torch.as_tensor([g for _, g in match.pairs], device=device)
        loss_loc = (1.0 - giou_1d(loc_spans[q_idx], gt_spans[g_idx])).mean()
        token_mask = caption_targets != pad_index
        picked = caption_log_probs.gather(-1, caption_targets.unsqueeze(-1)).squeeze(-1)
        token_count = token_mask.sum()
        if token_count == 0:
            raise ValueError("matched captions contain no non-pad tokens")
        loss_caption = -(picked * token_mask).sum() / token_count
    else:
        loss_loc = zero
        loss_caption = zero

    cls_targets = torch.zeros((n_queries, n_labels), device=device, dtype=cls_probs.dtype)
    for q, g in match.pairs:
        cls_targets[q] = gt_label_targets[g]
    loss_cls = focal_loss(cls_probs, cls_targets, gamma=gamma, alpha=alpha)

    counter_target = torch.as_tensor(min(n_gt, max_events), device=device)
    loss_counter = F.cross_entropy(counter_logits.unsqueeze(0), counter_target.unsqueeze(0))

    total = (
        weights.caption * loss_caption
        + weights.localization * loss_loc
        + weights.classification * loss_cls
        + weights.counter * loss_counter
    )
    for name, value in [
        ("caption", loss_caption),
        ("localization", loss_loc),
        ("classification", loss_cls),
        ("counter", loss_counter),
    ]:
        if not torch.isfinite(value):
            raise FloatingPointError(f"non-finite {name} loss")
    return LossBreakdown(loss_caption, loss_loc, loss_cls, loss_counter, total)
