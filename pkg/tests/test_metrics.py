import math

import numpy as np
import pytest

from oracles import cider_oracle
from semdvc.evaluation import (
    bleu4,
    cider,
    cider_per_event,
    evaluate_dvc,
    format_report_table,
    localization_pr,
    meteor_exact,
    tiou,
)

# ---------------------------------------------------------------- tIoU


def test_tiou_identical():
    assert tiou([3.0, 8.0], [3.0, 8.0]) == 1.0


def test_tiou_hand_case():
    assert tiou([0.0, 10.0], [5.0, 15.0]) == pytest.approx(1 / 3, abs=1e-9)


def test_tiou_disjoint():
    assert tiou([0.0, 1.0], [2.0, 3.0]) == 0.0


def test_tiou_zero_union():
    assert tiou([1.0, 1.0], [1.0, 1.0]) == 0.0


def test_tiou_symmetric_and_monotone():
    base = [10.0, 20.0]
    last = 1.0
    for shift in [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0]:
        other = [10.0 + shift, 20.0 + shift]
        val = tiou(base, other)
        assert val == pytest.approx(tiou(other, base))
        assert val <= last + 1e-12
        last = val


# ---------------------------------------------------------------- precision / recall


def test_pr_perfect_predictions():
    gts = {"v": [[0.0, 5.0], [10.0, 20.0]]}
    p, r = localization_pr({"v": [[0.0, 5.0], [10.0, 20.0]]}, gts)
    assert p == 1.0 and r == 1.0


def test_pr_single_of_two_covered():
    gts = {"v": [[0.0, 5.0], [10.0, 20.0]]}
    p, r = localization_pr({"v": [[0.0, 5.0]]}, gts)
    assert p == 1.0
    assert r == 0.5


def test_pr_no_predictions():
    p, r = localization_pr({"v": []}, {"v": [[0.0, 5.0]]})
    assert p == 0.0 and r == 0.0


def test_pr_threshold_sensitivity():
    # tIoU = 0.5: counted at thresholds 0.3/0.5, missed at 0.7/0.9
    gts = {"v": [[0.0, 10.0]]}
    p, r = localization_pr({"v": [[0.0, 5.0]]}, gts)
    assert p == pytest.approx(0.5)
    assert r == pytest.approx(0.5)


# ---------------------------------------------------------------- BLEU4


def test_bleu_identity():
    assert bleu4(list("abcd"), list("abcd")) == pytest.approx(1.0)


def test_bleu_no_shared_unigrams():
    assert bleu4(["x", "y"], ["a", "b"]) == 0.0


def test_bleu_brevity_penalty_fixture():
    val = bleu4(["a", "b", "c", "d"], ["a", "b", "c", "d", "e"])
    assert val == pytest.approx(math.exp(1 - 5 / 4), abs=1e-4)
    assert val == pytest.approx(0.7788, abs=1e-4)


def test_bleu_clipping():
    # candidate repeats a unigram beyond the reference count
    val = bleu4(["a", "a", "a", "a"], ["a", "b", "c", "d"])
    assert val == 0.0  # bigram "a a" never appears in the reference


def test_bleu_short_candidate_zero():
    assert bleu4(["a", "b"], ["a", "b"]) == 0.0  # no 4-grams available


# ---------------------------------------------------------------- METEOR-exact


def test_meteor_identical_five_tokens():
    toks = ["a", "b", "c", "d", "e"]
    expected = 1.0 * (1 - 0.5 * (1 / 5) ** 3)
    assert meteor_exact(toks, toks) == pytest.approx(expected, abs=1e-12)
    assert meteor_exact(toks, toks) == pytest.approx(0.996, abs=1e-9)


def test_meteor_zero_matches():
    assert meteor_exact(["x"], ["y"]) == 0.0


def test_meteor_chunk_penalty_orders():
    # same unigrams, scrambled order -> more chunks -> lower score
    ref = ["a", "b", "c", "d"]
    assert meteor_exact(["a", "b", "c", "d"], ref) > meteor_exact(["d", "c", "b", "a"], ref)


def test_meteor_range():
    rng = np.random.default_rng(0)
    words = list("abcdefg")
    for _ in range(200):
        cand = [words[i] for i in rng.integers(0, 7, size=rng.integers(1, 9))]
        ref = [words[i] for i in rng.integers(0, 7, size=rng.integers(1, 9))]
        val = meteor_exact(cand, ref)
        assert 0.0 <= val <= 1.0


# ---------------------------------------------------------------- CIDEr

FIXTURE_CANDS = [
    ["apply", "blush", "on", "cheek"],
    ["apply", "lipstick", "on", "lips", "with", "brush"],
    ["apply", "powder", "on", "face"],
]
FIXTURE_REFS = [
    ["apply", "blush", "on", "cheek", "with", "brush"],
    ["apply", "lipstick", "on", "lips", "with", "brush"],
    ["apply", "eyeliner", "on", "eye"],
]


def test_cider_identical_corpus_is_ten():
    val = cider(FIXTURE_REFS, FIXTURE_REFS)
    assert val == pytest.approx(10.0, abs=1e-9)


def test_cider_disjoint_vocabulary_zero():
    assert cider([["x", "y"]], [["a", "b"]]) == 0.0


def test_cider_fixture_matches_independent_oracle():
    ours = cider(FIXTURE_CANDS, FIXTURE_REFS)
    reference = cider_oracle(FIXTURE_CANDS, FIXTURE_REFS, FIXTURE_REFS)
    assert ours == pytest.approx(reference, abs=1e-6)
    assert 0.0 < ours < 10.0


def test_cider_random_corpora_match_oracle():
    rng = np.random.default_rng(1)
    words = ["a", "b", "c", "d", "e", "f"]
    for _ in range(10):
        cands, refs = [], []
        for _ in range(int(rng.integers(2, 5))):
            cands.append([words[i] for i in rng.integers(0, 6, size=rng.integers(1, 7))])
            refs.append([words[i] for i in rng.integers(0, 6, size=rng.integers(1, 7))])
        assert cider(cands, refs) == pytest.approx(cider_oracle(cands, refs, refs), abs=1e-9)


def test_cider_length_mismatch_rejected():
    with pytest.raises(ValueError, match="candidates"):
        cider_per_event([["a"]], [])


# ---------------------------------------------------------------- evaluate_dvc


def _as_events(spans, token_lists):
    return [{"timestamp": s, "tokens": t} for s, t in zip(spans, token_lists)]


def test_evaluate_perfect_predictions():
    gts = {
        "v1": _as_events([[0.0, 5.0], [10.0, 20.0]],
                         [["apply", "blush", "on", "cheek"], ["apply", "gloss", "on", "lips"]]),
    }
    report = evaluate_dvc(gts, gts)
    assert report.precision == 1.0
    assert report.recall == 1.0
    assert report.bleu4 == pytest.approx(1.0)
    assert report.meteor_exact == pytest.approx(1.0 - 0.5 * (1 / 4) ** 3)
    assert report.cider == pytest.approx(10.0)


def test_evaluate_shifted_predictions_score_zero():
    gts = {"v1": _as_events([[0.0, 5.0]], [["apply", "blush", "on", "cheek"]])}
    preds = {"v1": _as_events([[100.0, 105.0]], [["apply", "blush", "on", "cheek"]])}
    report = evaluate_dvc(preds, gts)
    assert report.precision == 0.0
    assert report.recall == 0.0
    assert report.bleu4 == 0.0
    assert report.meteor_exact == 0.0
    assert report.cider == 0.0


def test_evaluate_unmatched_predictions_dilute_caption_scores():
    gts = {"v1": _as_events([[0.0, 10.0]], [["apply", "blush", "on", "cheek"]])}
    matched_only = {"v1": _as_events([[0.0, 10.0]], [["apply", "blush", "on", "cheek"]])}
    with_noise = {
        "v1": _as_events(
            [[0.0, 10.0], [50.0, 60.0]],
            [["apply", "blush", "on", "cheek"], ["apply", "blush", "on", "cheek"]],
        )
    }
    r1 = evaluate_dvc(matched_only, gts)
    r2 = evaluate_dvc(with_noise, gts)
    assert r2.bleu4 == pytest.approx(r1.bleu4 / 2)
    assert r2.cider == pytest.approx(r1.cider / 2)


def test_evaluate_prediction_order_invariant():
    gts = {
        "v1": _as_events([[0.0, 5.0], [10.0, 20.0]],
                         [["apply", "blush"], ["apply", "gloss"]]),
    }
    preds_a = _as_events([[0.0, 5.0], [10.0, 20.0]], [["apply", "blush"], ["apply", "gloss"]])
    r_ab = evaluate_dvc({"v1": preds_a}, gts)
    r_ba = evaluate_dvc({"v1": preds_a[::-1]}, gts)
    assert r_ab.as_dict() == r_ba.as_dict()


def test_evaluate_metric_ranges_on_random_corpora():
    rng = np.random.default_rng(2)
    words = ["a", "b", "c", "d"]
    for _ in range(25):
        gts, preds = {}, {}
        for v in range(2):
            vid = f"v{v}"
            spans = np.sort(rng.uniform(0, 100, size=(rng.integers(1, 4), 2)), axis=1)
            gts[vid] = _as_events(
                spans.tolist(),
                [[words[i] for i in rng.integers(0, 4, size=4)] for _ in spans],
            )
            spans = np.sort(rng.uniform(0, 100, size=(rng.integers(0, 4), 2)), axis=1)
            preds[vid] = _as_events(
                spans.tolist(),
                [[words[i] for i in rng.integers(0, 4, size=4)] for _ in spans],
            )
        rep = evaluate_dvc(preds, gts)
        assert 0.0 <= rep.precision <= 1.0
        assert 0.0 <= rep.recall <= 1.0
        assert 0.0 <= rep.bleu4 <= 1.0
        assert 0.0 <= rep.meteor_exact <= 1.0
        assert rep.cider >= 0.0


def test_caption_metric_ranges_on_1000_random_corpora():
    rng = np.random.default_rng(3)
    words = list("abcdefgh")
    for _ in range(1000):
        cand = [words[i] for i in rng.integers(0, 8, size=rng.integers(1, 10))]
        ref = [words[i] for i in rng.integers(0, 8, size=rng.integers(1, 10))]
        b = bleu4(cand, ref)
        m = meteor_exact(cand, ref)
        c = cider([cand], [ref])
        assert 0.0 <= b <= 1.0
        assert 0.0 <= m <= 1.0
        assert c >= 0.0
        spans = np.sort(rng.uniform(0, 50, size=(2, 2)), axis=1)
        assert 0.0 <= tiou(spans[0], spans[1]) <= 1.0


def test_report_table_columns():
    gts = {"v1": _as_events([[0.0, 5.0]], [["apply", "blush", "on", "cheek"]])}
    table = format_report_table(evaluate_dvc(gts, gts))
    header = table.splitlines()[0].split()
    assert header == ["P", "R", "B4", "M-exact", "C"]
