"""Metric oracles, judge scoring, and evaluation protocol plumbing."""

import json
import random

import numpy as np
import pytest

from conftest import make_corpus, synthetic_record
from ecgchat.datagen import EcgRef, QaSample
from ecgchat.encoder import EcgEncoder, EncoderConfig
from ecgchat.evalkit import (
    JUDGE_PROMPT,
    AucReport,
    JudgeVerdict,
    build_judge_prompt,
    eval_exact_match,
    eval_judge,
    eval_localization,
    eval_report_auc,
    exact_match,
    hashing_embedder,
    judge_score,
    macro_auc,
    masking_sweep,
    report_to_scores,
    temporal_iou,
    write_report,
)
from ecgchat.fusion import EcgChatModel, LmConfig, ToyLm, WordTokenizer
from ecgchat.spans import SpanSet, parse_spans


def raster_iou(a: SpanSet, b: SpanSet, ms_per_cell: int = 1) -> float:
    """Brute-force oracle: paint both sets on a millisecond grid."""
    horizon = int(1000 * max([e for _, e in a.spans + b.spans] or [1.0])) + 10
    cells = horizon // ms_per_cell + 1
    grid_a = np.zeros(cells, dtype=bool)
    grid_b = np.zeros(cells, dtype=bool)
    for start, end in a.spans:
        grid_a[round(start * 1000) // ms_per_cell:round(end * 1000) // ms_per_cell] = True
    for start, end in b.spans:
        grid_b[round(start * 1000) // ms_per_cell:round(end * 1000) // ms_per_cell] = True
    union = (grid_a | grid_b).sum()
    if union == 0:
        return 1.0
    return float((grid_a & grid_b).sum() / union)


def random_span_set(rng: random.Random) -> SpanSet:
    n = rng.randint(0, 4)
    if n == 0 and rng.random() < 0.5:
        return SpanSet.none_found()
    ticks = [rng.randint(0, 6000) for _ in range(2 * n)]
    intervals = []
    for i in range(0, len(ticks), 2):
        lo, hi = sorted((ticks[i], ticks[i + 1]))
        if lo < hi:
            intervals.append((lo / 100.0, hi / 100.0))
    return SpanSet.from_intervals(intervals)


class TestTemporalIou:
    def test_reference_case(self):
        pred = parse_spans("Duration: 1.9s-3.7s")
        truth = parse_spans("Duration: 2.0s-3.7s")
        assert abs(temporal_iou(pred, truth) - 1.7 / 1.8) < 1e-9

    def test_identical_sets(self):
        s = SpanSet(((1.0, 2.0), (3.0, 4.5)))
        assert temporal_iou(s, s) == 1.0

    def test_disjoint_sets(self):
        assert temporal_iou(SpanSet(((0.0, 1.0),)), SpanSet(((2.0, 3.0),))) == 0.0

    def test_not_found_rules(self):
        nf = SpanSet.none_found()
        real = SpanSet(((1.0, 2.0),))
        assert temporal_iou(nf, nf) == 1.0
        assert temporal_iou(nf, real) == 0.0
        assert temporal_iou(real, nf) == 0.0

    def test_parse_failure_scores_zero(self):
        assert temporal_iou(None, SpanSet(((1.0, 2.0),))) == 0.0
        assert temporal_iou(None, SpanSet.none_found()) == 0.0

    def test_multi_span_partial_overlap(self):
        pred = SpanSet(((0.0, 2.0), (5.0, 6.0)))
        truth = SpanSet(((1.0, 3.0), (5.5, 6.5)))
        # intersections 1.0 + 0.5; union [0,3] plus [5,6.5]
        assert abs(temporal_iou(pred, truth) - 1.5 / 4.5) < 1e-12

    def test_matches_rasterized_oracle(self):
        rng = random.Random(7)
        for _ in range(300):
            a, b = random_span_set(rng), random_span_set(rng)
            got = temporal_iou(a, b)
            assert 0.0 <= got <= 1.0
            assert abs(got - temporal_iou(b, a)) < 1e-12
            assert abs(got - raster_iou(a, b)) < 2e-3


def pairwise_auc_oracle(scores, truth):
    """Average over classes of the fraction of (pos, neg) pairs ranked
    correctly, ties counting half."""
    per_class = []
    for c in range(truth.shape[1]):
        pos = scores[truth[:, c] == 1, c]
        neg = scores[truth[:, c] == 0, c]
        if len(pos) == 0 or len(neg) == 0:
            continue
        wins = sum(1.0 if p > n else (0.5 if p == n else 0.0)
                   for p in pos for n in neg)
        per_class.append(wins / (len(pos) * len(neg)))
    return sum(per_class) / len(per_class)


class TestMacroAuc:
    def test_perfect_ordering(self):
        scores = np.array([[0.9], [0.8], [0.2], [0.1]])
        truth = np.array([[1], [1], [0], [0]])
        assert float(macro_auc(scores, truth)) == 1.0

    def test_constant_scores_give_half(self):
        scores = np.full((6, 2), 0.5)
        truth = np.array([[1, 0], [0, 1], [1, 0], [0, 1], [1, 1], [0, 0]])
        report = macro_auc(scores, truth)
        assert report.per_class == {0: 0.5, 1: 0.5}
        assert float(report) == 0.5

    def test_matches_exhaustive_pair_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(2, 13))
            c = int(rng.integers(1, 5))
            scores = np.round(rng.random((n, c)), 2)
            truth = rng.integers(0, 2, (n, c))
            valid = [j for j in range(c) if 0 < truth[:, j].sum() < n]
            if not valid:
                continue
            assert float(macro_auc(scores, truth)) == pytest.approx(
                pairwise_auc_oracle(scores, truth), abs=1e-12)

    def test_degenerate_classes_skipped_and_reported(self):
        scores = np.array([[0.9, 0.1], [0.2, 0.4]])
        truth = np.array([[1, 1], [0, 1]])
        report = macro_auc(scores, truth)
        assert report.skipped == (1,)
        assert report.per_class == {0: 1.0}

    def test_no_valid_class_rejected(self):
        with pytest.raises(ValueError, match="positive and a negative"):
            macro_auc(np.ones((3, 1)), np.ones((3, 1), dtype=int))

    def test_shape_and_binary_validation(self):
        with pytest.raises(ValueError, match="does not match"):
            macro_auc(np.ones((3, 2)), np.ones((3, 3), dtype=int))
        with pytest.raises(ValueError, match="binary"):
            macro_auc(np.ones((2, 1)), np.array([[2], [0]]))


class TestExactMatch:
    def test_case_and_whitespace_insensitive(self):
        assert exact_match("sinus rhythm", "Sinus  Rhythm ")
        assert exact_match(" Atrial	Fibrillation", "atrial fibrillation")

    def test_different_answers(self):
        assert not exact_match("yes", "no")

    def test_comma_sets_order_insensitive(self):
        assert exact_match("atrial fibrillation, PVC", "PVC, atrial fibrillation")
        assert exact_match("a , b,c", "c, b, a")
        assert not exact_match("a, b", "a, b, c")


class TestReportScores:
    def test_identical_text_scores_one(self):
        scores = report_to_scores("sinus rhythm", ["sinus rhythm", "asystole"])
        assert scores[0] == pytest.approx(1.0)
        assert scores[1] < 1.0

    def test_orthogonal_mock_embedder(self):
        def embedder(texts):
            basis = {"a": [1.0, 0.0], "b": [0.0, 1.0]}
            return np.array([basis[t] for t in texts])

        assert report_to_scores("a", ["b"], embedder)[0] == pytest.approx(0.0)

    def test_hand_computed_cosine_row(self):
        vectors = {"r": [1.0, 1.0], "x": [1.0, 0.0], "y": [3.0, 4.0]}

        def embedder(texts):
            return np.array([vectors[t] for t in texts])

        row = report_to_scores("r", ["x", "y"], embedder)
        assert row[0] == pytest.approx(1.0 / np.sqrt(2))
        assert row[1] == pytest.approx(7.0 / (np.sqrt(2) * 5.0))

    def test_zero_vector_guard_and_empty_labels(self):
        assert report_to_scores("", ["anything"])[0] == 0.0
        with pytest.raises(ValueError, match="label"):
            report_to_scores("x", [])

    def test_hashing_embedder_deterministic(self):
        embed = hashing_embedder()
        a = embed(["pvc near the start", "pvc near the start"])
        assert np.array_equal(a[0], a[1])
        with pytest.raises(ValueError, match="positive"):
            hashing_embedder(0)


class FakeClient:
    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, prompt, temperature=0.0, seed=None):
        self.prompts.append(prompt)
        if len(self.replies) > 1:
            return self.replies.pop(0)
        return self.replies[0]


class TestJudge:
    def test_plain_integer_reply(self):
        verdict = judge_score("q", ["rep"], "ans", FakeClient(["4"]))
        assert verdict.score == 4 and verdict.valid

    def test_lenient_extraction(self):
        assert judge_score("q", ["r"], "a", FakeClient(["Score: 5/5"])).score == 5
        assert judge_score("q", ["r"], "a", FakeClient(["(Score 4)"])).score == 4
        assert judge_score("q", ["r"], "a", FakeClient(["I rate this a 3."])).score == 3

    def test_out_of_range_integers_ignored(self):
        client = FakeClient(["7/10", "2"])
        assert judge_score("q", ["r"], "a", client).score == 2
        assert len(client.prompts) == 2

    def test_invalid_after_retry(self):
        client = FakeClient(["great answer"])
        verdict = judge_score("q", ["r"], "a", client)
        assert verdict.score is None and not verdict.valid
        assert len(client.prompts) == 2

    def test_score_range_validated(self):
        with pytest.raises(ValueError, match="0..5"):
            JudgeVerdict(score=9, rationale="", model="judge")

    def test_payload_carries_only_question_reports_prediction(self):
        client = FakeClient(["5"])
        reference_answer = "the gold standard reply that must never be sent"
        judge_score("which visit worsened?", ["rep one", "rep two"],
                    "the second visit", client)
        prompt = client.prompts[0]
        assert prompt == JUDGE_PROMPT.format(
            question="which visit worsened?",
            reports=repr(["rep one", "rep two"]),
            prediction="the second visit")
        assert reference_answer not in prompt
        assert build_judge_prompt("q", ["r"], "p").startswith("For the given question")


# --- protocol loops over a toy model ----------------------------------------


def loc_samples_and_store(n=4):
    store = {}
    samples = []
    for i in range(n):
        rec = synthetic_record(f"e{i:02d}", 10.0, [(2.0 + i * 0.5, 3.0 + i * 0.5, "PVC")],
                               seed=i)
        store[rec.record_id] = rec
        samples.append(QaSample(
            question="When does the PVC occur?",
            answer=f"Duration: {2.0 + i * 0.5:.1f}s-{3.0 + i * 0.5:.1f}s",
            ecg_refs=(EcgRef(rec.record_id),), subset="localization", split="test"))
    return samples, store


def tiny_eval_model(samples):
    texts = [s.question for s in samples] + [s.answer for s in samples]
    texts.append("Report: test rhythm present. yes no Not Found")
    tok = WordTokenizer.from_corpus(texts)
    lm = ToyLm(LmConfig(vocab_size=len(tok), d_model=32, depth=1, heads=2, max_len=256))
    return EcgChatModel(EcgEncoder(EncoderConfig(depth=1, width=16, heads=2)), lm, tok)


class TestProtocols:
    def test_localization_eval_rows_and_aggregates(self):
        samples, store = loc_samples_and_store()
        model = tiny_eval_model(samples)
        report = eval_localization(model, samples, store, max_new=8)
        assert report.protocol == "localization"
        assert len(report.rows) == len(samples)
        assert set(report.aggregates) == {"mean_iou", "n", "parse_failures"}
        assert 0.0 <= report.aggregates["mean_iou"] <= 1.0
        assert report.aggregates["n"] == len(samples)

    def test_mask_none_equals_plain_eval(self):
        samples, store = loc_samples_and_store(3)
        model = tiny_eval_model(samples)
        plain = eval_localization(model, samples, store, max_new=6)
        sweep = masking_sweep(model, samples, store, modes=("none",), max_new=6)
        assert [r.value for r in sweep["none"].rows] == [r.value for r in plain.rows]

    def test_mask_random_reproducible(self):
        samples, store = loc_samples_and_store(3)
        model = tiny_eval_model(samples)
        a = masking_sweep(model, samples, store, modes=("random",), seed=5, max_new=6)
        b = masking_sweep(model, samples, store, modes=("random",), seed=5, max_new=6)
        assert [r.prediction for r in a["random"].rows] == \
               [r.prediction for r in b["random"].rows]

    def test_mask_modes_change_the_fed_signal(self):
        samples, store = loc_samples_and_store(2)
        model = tiny_eval_model(samples)
        out = masking_sweep(model, samples, store, modes=("none", "first", "second"),
                            max_new=4)
        assert set(out) == {"none", "first", "second"}
        for mode in out:
            assert len(out[mode].rows) == 2

    def test_unknown_mode_rejected(self):
        samples, store = loc_samples_and_store(1)
        model = tiny_eval_model(samples)
        with pytest.raises(ValueError, match="unknown masking modes"):
            masking_sweep(model, samples, store, modes=("third",))

    def test_single_lead_record_rejected_by_sweep(self):
        rec = synthetic_record("solo", 10.0, [(2.0, 3.0, "PVC")], n_leads=1)
        samples = [QaSample(question="Where?", answer="Duration: 2.0s-3.0s",
                            ecg_refs=(EcgRef("solo"),), subset="localization")]
        model = tiny_eval_model(samples)
        with pytest.raises(ValueError, match="at least 2 leads"):
            masking_sweep(model, samples, {"solo": rec}, modes=("first",))

    def test_exact_match_eval(self):
        samples, store = loc_samples_and_store(2)
        qa = [QaSample(question="Any abnormality?", answer="yes",
                       ecg_refs=s.ecg_refs, subset="ecgqa") for s in samples]
        model = tiny_eval_model(samples)
        report = eval_exact_match(model, qa, store, max_new=4)
        assert set(report.aggregates) == {"accuracy", "n"}
        assert all(r.value in (0.0, 1.0) for r in report.rows)

    def test_report_auc_protocol(self):
        samples, store = loc_samples_and_store(4)
        qa = [QaSample(question="Please describe this recording.",
                       answer="Report: described.", ecg_refs=s.ecg_refs,
                       subset="reportgen") for s in samples]
        labels = [{"PVC"}, {"LBBB"}, {"PVC"}, {"LBBB"}]
        model = tiny_eval_model(samples)
        report = eval_report_auc(model, qa, store, ["PVC", "LBBB"], labels, max_new=4)
        assert "macro_auc" in report.aggregates
        assert 0.0 <= report.aggregates["macro_auc"] <= 1.0
        assert report.rows[0].truth == "PVC"
        with pytest.raises(ValueError, match="one label set per sample"):
            eval_report_auc(model, qa, store, ["PVC"], labels[:1])

    def test_judge_protocol_counts_invalid(self):
        entries = [("q1", ["r1"], "a1"), ("q2", ["r2"], "a2")]
        report, verdicts = eval_judge(entries, FakeClient(["4"]))
        assert report.aggregates["mean_score"] == 4.0
        assert report.aggregates["invalid"] == 0.0
        report, verdicts = eval_judge(entries, FakeClient(["nope"]))
        assert report.aggregates["invalid"] == 2.0
        assert all(not v.valid for v in verdicts)

    def test_write_report_outputs(self, tmp_path):
        samples, store = loc_samples_and_store(2)
        model = tiny_eval_model(samples)
        report = eval_localization(model, samples, store, max_new=4)
        text_path, jsonl_path = write_report(report, tmp_path / "loc")
        assert text_path.read_text().startswith("protocol: localization")
        lines = jsonl_path.read_text().splitlines()
        assert len(lines) == 3
        assert json.loads(lines[0])["sample_id"] == "e00"
        assert json.loads(lines[-1])["aggregates"] == report.aggregates


def test_auc_report_float_protocol():
    report = AucReport(macro=0.75, per_class={0: 0.75})
    assert float(report) == 0.75


def test_corpus_fixture_supports_eval():
    records = make_corpus(3)
    assert all(r.duration >= 10.0 for r in records)
