"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from scratch (pure python, no
imports from the package) so a bug cannot hide on both sides of a
comparison.
"""

import itertools
import math
from collections import Counter


def brute_force_assignment(cost):
    """Minimum-cost assignment by enumerating all permutations.

    cost: list of N rows of G columns, G <= N. Returns (best_cost, pairs)
    with pairs as a sorted list of (row, column).
    """
    n = len(cost)
    g = len(cost[0]) if n else 0
    best = None
    best_rows = None
    for rows in itertools.permutations(range(n), g):
        total = sum(cost[r][c] for c, r in enumerate(rows))
        if best is None or total < best - 1e-15:
            best = total
            best_rows = rows
    pairs = sorted((r, c) for c, r in enumerate(best_rows))
    return best, pairs


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at point x (list)."""
    grad = []
    for i in range(len(x)):
        up = list(x)
        down = list(x)
        up[i] += h
        down[i] -= h
        grad.append((f(up) - f(down)) / (2 * h))
    return grad


def focal_scalar(p, y, gamma, alpha):
    p = min(max(p, 1e-7), 1 - 1e-7)
    return -alpha * y * (1 - p) ** gamma * math.log(p) - (1 - alpha) * (1 - y) * p ** gamma * math.log(1 - p)


def bce_scalar(p, y):
    p = min(max(p, 1e-7), 1 - 1e-7)
    return -y * math.log(p) - (1 - y) * math.log(1 - p)


def giou_scalar(a, b):
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    hull = max(a[1], b[1]) - min(a[0], b[0])
    if hull == 0:
        return 1.0
    iou = inter / union if union > 0 else 0.0
    return iou - (hull - union) / hull


def _grams(tokens, n):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def cider_oracle(candidates, references, idf_references):
    """Plain CIDEr: per n in 1..4, cosine of tf-idf vectors, averaged, x10,
    mean over pairs. Document frequency floors at 1 for unseen n-grams."""
    num_docs = len(idf_references)
    scores = []
    for cand, ref in zip(candidates, references):
        per_n = []
        for n in range(1, 5):
            cand_counts = Counter(_grams(cand, n))
            ref_counts = Counter(_grams(ref, n))
            grams = sorted(set(cand_counts) | set(ref_counts))
            cvec, rvec = [], []
            for gram in grams:
                df = sum(1 for doc in idf_references if gram in set(_grams(doc, n)))
                idf = math.log(num_docs / max(df, 1))
                cvec.append(cand_counts.get(gram, 0) * idf)
                rvec.append(ref_counts.get(gram, 0) * idf)
            dot = sum(c * r for c, r in zip(cvec, rvec))
            nc = math.sqrt(sum(c * c for c in cvec))
            nr = math.sqrt(sum(r * r for r in rvec))
            per_n.append(dot / (nc * nr) if nc > 0 and nr > 0 else 0.0)
        scores.append(10.0 * sum(per_n) / 4.0)
    return sum(scores) / len(scores) if scores else 0.0
