"""Localization and captioning metrics.

Localization precision/recall are averaged over tIoU thresholds and then
over videos. Caption metrics (BLEU4, METEOR-exact, CIDEr) are computed per
threshold over prediction/ground-truth pairs matched by max tIoU; an
unmatched prediction scores 0. METEOR here is an exact-match variant
(no stemming or synonyms) and is reported as "METEOR-exact"; its absolute
values are not comparable to toolkit METEOR.
"""

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

DEFAULT_TIOU_THRESHOLDS = (0.3, 0.5, 0.7, 0.9)


def tiou(a, b) -> float:
    """Temporal IoU of two ordered [start, end] intervals, 0 if the union
    is empty."""
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def localization_pr(results, ground_truths, thresholds=DEFAULT_TIOU_THRESHOLDS):
    """Precision/recall averaged over thresholds, then over videos.

    results: {video_id: [[s, e], ...]} predicted intervals;
    ground_truths: {video_id: [[s, e], ...]}. A video with no predictions
    gets precision 0 by convention.
    """
    precisions, recalls = [], []
    for vid, gt_spans in ground_truths.items():
        pred_spans = results.get(vid, [])
        per_t_p, per_t_r = [], []
        for t in thresholds:
            if gt_spans:
                covered = sum(
                    1 for g in gt_spans if any(tiou(p, g) >= t for p in pred_spans)
                )
                per_t_r.append(covered / len(gt_spans))
            else:
                per_t_r.append(0.0)
            if pred_spans:
                matched = sum(
                    1 for p in pred_spans if any(tiou(p, g) >= t for g in gt_spans)
                )
                per_t_p.append(matched / len(pred_spans))
            else:
                per_t_p.append(0.0)
        precisions.append(sum(per_t_p) / len(thresholds))
        recalls.append(sum(per_t_r) / len(thresholds))
    if not precisions:
        return 0.0, 0.0
    return sum(precisions) / len(precisions), sum(recalls) / len(recalls)


def _ngram_counts(tokens, n):
    counts = Counter()
    for k in range(1, n + 1):
        for i in range(len(tokens) - k + 1):
            counts[tuple(tokens[i : i + k])] += 1
    return counts


def bleu4(candidate_tokens, reference_tokens) -> float:
    """Single-reference BLEU4: geometric mean of clipped n-gram precisions
    for n = 1..4 with brevity penalty."""
    cand = list(candidate_tokens)
    ref = list(reference_tokens)
    if not cand:
        return 0.0
    cand_counts = _ngram_counts(cand, 4)
    ref_counts = _ngram_counts(ref, 4)
    log_precisions = []
    for n in range(1, 5):
        total = max(0, len(cand) - n + 1)
        if total == 0:
            return 0.0
        clipped = sum(
            min(c, ref_counts.get(g, 0))
            for g, c in cand_counts.items()
            if len(g) == n
        )
        if clipped == 0:
            return 0.0
        log_precisions.append(math.log(clipped / total))
    bp = 1.0 if len(cand) > len(ref) else math.exp(1.0 - len(ref) / max(len(cand), 1))
    return bp * math.exp(sum(log_precisions) / 4.0)


def meteor_exact(candidate_tokens, reference_tokens) -> float:
    """Exact-match METEOR variant: greedy left-to-right unigram alignment,
    F_mean = 10PR / (R + 9P), chunk penalty 0.5 * (chunks / matches)^3."""
    cand = list(candidate_tokens)
    ref = list(reference_tokens)
    if not cand or not ref:
        return 0.0
    used = [False] * len(ref)
    alignment = []  # (candidate position, reference position)
    for ci, tok in enumerate(cand):
        for ri, rtok in enumerate(ref):
            if not used[ri] and rtok == tok:
                used[ri] = True
                alignment.append((ci, ri))
                break
    matches = len(alignment)
    if matches == 0:
        return 0.0
    chunks = 1
    for (pc, pr), (cc, cr) in zip(alignment, alignment[1:]):
        if cc != pc + 1 or cr != pr + 1:
            chunks += 1
    precision = matches / len(cand)
    recall = matches / len(ref)
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)


def _tfidf_vectors(tokens, idf, num_refs):
    """Per-n tf-idf vectors (n = 1..4) for one sentence."""
    vecs = [defaultdict(float) for _ in range(4)]
    for gram, count in _ngram_counts(list(tokens), 4).items():
        df = max(1.0, idf.get(gram, 0.0))
        vecs[len(gram) - 1][gram] = count * math.log(num_refs / df)
    return vecs


def _cosine(a, b):
    dot = sum(v * b[g] for g, v in a.items() if g in b)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def cider_per_event(candidates, references, idf_references=None) -> list[float]:
    """Per-event CIDEr scores against single references.

    tf-idf over n-grams n = 1..4 with document frequencies from
    idf_references (default: the references themselves); per-n cosine
    similarities are averaged and scaled by 10.
    """
    if len(candidates) != len(references):
        raise ValueError(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    corpus = references if idf_references is None else idf_references
    num_refs = max(len(corpus), 1)
    df = defaultdict(float)
    for ref in corpus:
        for gram in set(_ngram_counts(list(ref), 4)):
            df[gram] += 1.0
    scores = []
    for cand, ref in zip(candidates, references):
        cand_vecs = _tfidf_vectors(cand, df, num_refs)
        ref_vecs = _tfidf_vectors(ref, df, num_refs)
        per_n = [_cosine(c, r) for c, r in zip(cand_vecs, ref_vecs)]
        scores.append(10.0 * sum(per_n) / 4.0)
    return scores


def cider(candidates, references, idf_references=None) -> float:
    """Mean CIDEr over events; see cider_per_event."""
    scores = cider_per_event(candidates, references, idf_references)
    return sum(scores) / len(scores) if scores else 0.0


@dataclass
class EvalReport:
    precision: float
    recall: float
    bleu4: float
    meteor_exact: float
    cider: float
    per_threshold: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "bleu4": self.bleu4,
            "meteor_exact": self.meteor_exact,
            "cider": self.cider,
            "per_threshold": self.per_threshold,
        }


def evaluate_dvc(results, ground_truths, thresholds=DEFAULT_TIOU_THRESHOLDS) -> EvalReport:
    """Score predictions against ground truth events.

    results: {video_id: [{"timestamp": [s, e], "tokens": [...]}, ...]};
    ground_truths: {video_id: [{"timestamp": [s, e], "tokens": [...]}, ...]}.
    Per threshold each prediction pairs with its max-tIoU ground truth when
    tIoU clears the threshold (many predictions may share one ground
    truth); caption metrics average over all predictions with unmatched
    ones scoring 0, then over thresholds. The CIDEr idf corpus is the full
    ground-truth caption set.
    """
    pred_spans = {
        vid: [p["timestamp"] for p in preds] for vid, preds in results.items()
    }
    gt_spans = {vid: [g["timestamp"] for g in gts] for vid, gts in ground_truths.items()}
    precision, recall = localization_pr(pred_spans, gt_spans, thresholds)

    all_gt_tokens = [g["tokens"] for gts in ground_truths.values() for g in gts]
    per_threshold = {}
    bleu_means, meteor_means, cider_means = [], [], []
    for t in thresholds:
        matched_pairs = []  # (candidate tokens, reference tokens)
        total_preds = 0
        for vid, preds in results.items():
            gts = ground_truths.get(vid, [])
            for pred in preds:
                total_preds += 1
                if not gts:
                    continue
                best = max(gts, key=lambda g: tiou(pred["timestamp"], g["timestamp"]))
                if tiou(pred["timestamp"], best["timestamp"]) >= t:
                    matched_pairs.append((pred["tokens"], best["tokens"]))
        if total_preds == 0:
            bleu_t = meteor_t = cider_t = 0.0
        else:
            bleu_t = sum(bleu4(c, r) for c, r in matched_pairs) / total_preds
            meteor_t = sum(meteor_exact(c, r) for c, r in matched_pairs) / total_preds
            if matched_pairs:
                cands, refs = zip(*matched_pairs)
                cider_scores = cider_per_event(cands, refs, idf_references=all_gt_tokens)
                cider_t = sum(cider_scores) / total_preds
            else:
                cider_t = 0.0
        per_threshold[t] = {"bleu4": bleu_t, "meteor_exact": meteor_t, "cider": cider_t}
        bleu_means.append(bleu_t)
        meteor_means.append(meteor_t)
        cider_means.append(cider_t)

    k = len(thresholds)
    return EvalReport(
        precision=precision,
        recall=recall,
        bleu4=sum(bleu_means) / k,
        meteor_exact=sum(meteor_means) / k,
        cider=sum(cider_means) / k,
        per_threshold=per_threshold,
    )


def format_report_table(report: EvalReport) -> str:
    """Plain-text table with columns P, R, B4, M-exact, C."""
    header = f"{'P':>8} {'R':>8} {'B4':>8} {'M-exact':>8} {'C':>8}"
    row = (
        f"{report.precision * 100:8.2f} {report.recall * 100:8.2f} "
        f"{report.bleu4 * 100:8.2f} {report.meteor_exact * 100:8.2f} "
        f"{report.cider * 100:8.2f}"
    )
    return header + "\n" + row
