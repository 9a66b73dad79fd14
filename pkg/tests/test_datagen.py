import json
from datetime import date

import pytest

from conftest import make_corpus, synthetic_record
from ecgchat.datagen import (
    BRIEF_SUFFIX,
    LOCALIZATION_QUESTIONS,
    REPORTGEN_QUESTIONS,
    EcgRef,
    PatientGroup,
    PatientRecord,
    QaSample,
    build_localization,
    build_multiecg,
    build_reportgen,
    fill_multiecg_prompt,
    merge_class_regions,
    read_samples,
    split_by_record,
    subset_ecgqa,
    write_samples,
)
from ecgchat.records import class_name
from ecgchat.spans import NOT_FOUND_TEXT, parse_spans


class TestTemplates:
    def test_pool_sizes(self):
        assert len(REPORTGEN_QUESTIONS) == 10
        assert len(LOCALIZATION_QUESTIONS) == 20

    def test_localization_pool_keeps_its_repeat(self):
        assert LOCALIZATION_QUESTIONS[1] == LOCALIZATION_QUESTIONS[14]
        assert len(set(LOCALIZATION_QUESTIONS)) == 19

    def test_prompt_fill(self):
        prompt = fill_multiecg_prompt(
            [["Sinus rhythm", "Normal ECG"], ["Sinus arrhythmia"]],
            [date(2148, 11, 12), date(2149, 6, 6)])
        assert "[['Sinus rhythm', 'Normal ECG'], ['Sinus arrhythmia']]" in prompt
        assert "['2148-11-12', '2149-06-06']" in prompt
        assert "[0, 206] days" in prompt
        assert "8 different types" in prompt
        assert 'key "q" for question' in prompt


class TestReportGen:
    def test_answer_prefix(self):
        samples, stats = build_reportgen([("r1", "Sinus rhythm, Normal ECG")])
        assert len(samples) == 1
        assert samples[0].answer == "Report: Sinus rhythm, Normal ECG"
        assert samples[0].question in REPORTGEN_QUESTIONS
        assert stats.emitted == 1

    def test_drops(self):
        rows = [("a", ""), ("b", "ok bad"), ("c", "this is a no report case"),
                ("d", "Sinus rhythm with occasional PVC")]
        samples, stats = build_reportgen(rows)
        assert [s.ecg_refs[0].record_id for s in samples] == ["d"]
        assert stats.dropped == {"empty": 1, "too-short": 1, "stop-phrase": 1}

    def test_whitespace_collapsed(self):
        samples, _ = build_reportgen([("r1", "  Sinus   rhythm \n Normal ECG ")])
        assert samples[0].answer == "Report: Sinus rhythm Normal ECG"

    def test_deterministic(self):
        rows = [(f"r{i}", f"report number {i} sinus rhythm") for i in range(30)]
        a, _ = build_reportgen(rows, seed=42)
        b, _ = build_reportgen(rows, seed=42)
        assert a == b


class TestLocalization:
    def test_single_region_exact_answer(self):
        rec = synthetic_record("r0", 10.0, [(2.0, 3.7, "PVC")])
        samples, stats = build_localization([rec], negatives=False, n_resample=3)
        assert len(samples) == 3
        for s in samples:
            assert s.answer == "Duration: 2.0s-3.7s"
            assert s.ecg_refs[0].start == 0.0
            assert class_name("PVC") in s.question

    def test_negative_answer_literal(self):
        rec = synthetic_record("r0", 30.0, [(2.0, 3.0, "PVC"), (20.0, 21.0, "LBBB")])
        samples, _ = build_localization([rec], negatives=True, negative_ratio=1.0,
                                        n_resample=4, seed=1)
        negs = [s for s in samples if s.answer == NOT_FOUND_TEXT]
        assert negs
        for s in negs:
            cls = next(c for c in ("Premature ventricular contraction",
                                   "Left bundle branch block beat") if c in s.question)
            ref = s.ecg_refs[0]
            for ann in rec.annotations:
                if class_name(ann.label) == cls:
                    assert ann.offset <= ref.start or ann.onset >= ref.end

    def test_short_mode_duration(self):
        samples, _ = build_localization(make_corpus(8, seed=3), clip_mode="short",
                                        n_resample=2, seed=2)
        assert samples
        for s in samples:
            ref = s.ecg_refs[0]
            assert ref.end - ref.start == pytest.approx(10.0, abs=1e-9)

    def test_long_mode_duration_range(self):
        samples, _ = build_localization(make_corpus(8, seed=4), clip_mode="long",
                                        n_resample=2, seed=5)
        assert samples
        for s in samples:
            ref = s.ecg_refs[0]
            assert 10.0 - 1e-9 <= ref.end - ref.start <= 60.0 + 1e-9

    def test_windows_contain_region_midpoint(self):
        records = make_corpus(10, seed=6)
        by_id = {r.record_id: r for r in records}
        samples, _ = build_localization(records, negatives=False, n_resample=5, seed=7)
        queried = sorted({class_name(c) for c in ("PVC", "LBBB", "RBBB")},
                         key=len, reverse=True)
        for s in samples:
            cls = next(c for c in queried if c in s.question)
            rec = by_id[s.ecg_refs[0].record_id]
            mids = [(lo + hi) / 2 for lo, hi in merge_class_regions(rec, cls)]
            ref = s.ecg_refs[0]
            assert any(ref.start <= m <= ref.end for m in mids)

    def test_answers_parse_and_sort(self):
        samples, _ = build_localization(make_corpus(10, seed=8), n_resample=3, seed=9)
        for s in samples:
            spans = parse_spans(s.answer)
            assert spans is not None
            assert list(spans.spans) == sorted(spans.spans)

    def test_multiple_regions_joined(self):
        rec = synthetic_record("r0", 10.0,
                               [(1.0, 2.0, "PVC"), (4.0, 5.0, "PVC"), (7.0, 8.0, "PVC")])
        samples, _ = build_localization([rec], negatives=False, n_resample=1)
        assert samples[0].answer == "Duration: 1.0s-2.0s, 4.0s-5.0s, 7.0s-8.0s"

    def test_byte_identical_rebuild(self, tmp_path):
        records = make_corpus(20, seed=10)
        for run in ("a", "b"):
            samples, _ = build_localization(records, n_resample=3, seed=11)
            write_samples(tmp_path / f"{run}.jsonl", samples)
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            build_localization([], clip_mode="medium")


class FakeClient:
    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, prompt, temperature=0.0, seed=None):
        self.prompts.append(prompt)
        reply = self.replies[0] if len(self.replies) == 1 else self.replies.pop(0)
        return reply


def make_group(patient="p1", n=3):
    records = tuple(
        PatientRecord(f"{patient}-e{i}", ("Sinus rhythm", "Normal ECG"),
                      date(2148, 1, 1 + i))
        for i in range(n))
    return PatientGroup(patient, records)


def eight_valid_lines():
    return "\n".join(json.dumps({"q": f"question {i}", "a": f"answer {i}"})
                     for i in range(8))


class TestMultiEcg:
    def test_eight_pairs_pass_through(self):
        client = FakeClient([eight_valid_lines()])
        samples, stats = build_multiecg([make_group(n=3)], client)
        assert len(samples) == 8
        assert all(len(s.ecg_refs) == 3 for s in samples)
        assert all(s.subset == "multiecg" for s in samples)
        assert stats.emitted == 8 and stats.retries == 0
        assert samples[0].rel_days == (0, 1, 2)

    def test_malformed_line_retried_then_skipped(self):
        lines = eight_valid_lines().splitlines()
        lines[3] = "not json at all"
        reply = "\n".join(lines)
        client = FakeClient([reply])  # same reply on the retry call
        samples, stats = build_multiecg([make_group()], client)
        assert len(samples) == 7
        assert stats.skipped_lines == 1
        assert stats.retries == 1
        assert len(client.prompts) == 2

    def test_retry_tops_up_missing_pairs(self):
        lines = eight_valid_lines().splitlines()
        short_reply = "\n".join(lines[:6])
        client = FakeClient([short_reply, "\n".join(lines)])
        samples, stats = build_multiecg([make_group()], client)
        assert len(samples) == 8
        assert stats.retries == 1

    def test_zero_parseable_raises(self):
        client = FakeClient(["nothing useful"])
        with pytest.raises(ValueError):
            build_multiecg([make_group()], client)

    def test_prompt_carries_reports_and_dates(self):
        client = FakeClient([eight_valid_lines()])
        build_multiecg([make_group(n=2)], client)
        prompt = client.prompts[0]
        assert "Sinus rhythm" in prompt
        assert "2148-01-01" in prompt
        assert "[0, 1] days" in prompt

    def test_group_size_bounds(self):
        with pytest.raises(ValueError):
            make_group(n=1)
        with pytest.raises(ValueError):
            make_group(n=7)


def make_qa_rows(n, split="train"):
    return [QaSample(question=f"What rhythm is shown in row {i}?",
                     answer="sinus rhythm", ecg_refs=(EcgRef(f"r{i}"),),
                     subset="ecgqa", split=split) for i in range(n)]


class TestSubsetter:
    def test_fraction_and_suffix(self):
        out = subset_ecgqa(make_qa_rows(200), fraction=0.10, seed=0)
        assert len(out) == 20
        for s in out:
            assert s.question.endswith(BRIEF_SUFFIX)
            assert s.question.count(BRIEF_SUFFIX.strip()) == 1

    def test_idempotent(self):
        once = subset_ecgqa(make_qa_rows(50), fraction=0.2, seed=1)
        twice = subset_ecgqa(once, fraction=1.0, seed=1)
        assert [s.question for s in twice] == [s.question for s in once]

    def test_test_rows_untouched(self):
        rows = make_qa_rows(40) + make_qa_rows(10, split="test")
        out = subset_ecgqa(rows, fraction=0.25, seed=2)
        test_rows = [s for s in out if s.split == "test"]
        assert len(test_rows) == 10
        assert all(not s.question.endswith(BRIEF_SUFFIX) for s in test_rows)

    def test_deterministic(self):
        a = subset_ecgqa(make_qa_rows(100), seed=3)
        b = subset_ecgqa(make_qa_rows(100), seed=3)
        assert a == b


class TestSampleFiles:
    def test_round_trip(self, tmp_path):
        samples, _ = build_reportgen([("r1", "Sinus rhythm, Normal ECG"),
                                      ("r2", "Atrial fibrillation present here")])
        path = tmp_path / "d.jsonl"
        assert write_samples(path, samples) == 2
        assert read_samples(path) == samples

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"question": "q", "answer": "a"}\n')
        with pytest.raises(ValueError):
            read_samples(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"schema": "ecg-qa-samples", "version": 1}\nnot json\n')
        with pytest.raises(ValueError):
            read_samples(path)

    def test_localization_answer_validated(self):
        with pytest.raises(ValueError):
            QaSample(question="where?", answer="somewhere on lead II",
                     ecg_refs=(EcgRef("r1"),), subset="localization")

    def test_multiecg_ref_count_validated(self):
        with pytest.raises(ValueError):
            QaSample(question="q", answer="a", ecg_refs=(EcgRef("r1"),),
                     subset="multiecg")


class TestSplitByRecord:
    def test_exact_counts(self):
        samples = [QaSample(question="q?", answer="a", ecg_refs=(EcgRef(f"r{i}"),),
                            subset="reportgen") for i in range(10) for _ in range(3)]
        tagged = split_by_record(samples, 0.2, seed=0)
        test_ids = {s.ecg_refs[0].record_id for s in tagged if s.split == "test"}
        assert len(test_ids) == 2

    def test_all_clips_share_split(self):
        samples = [QaSample(question="q?", answer="a", ecg_refs=(EcgRef(f"r{i % 5}"),),
                            subset="reportgen") for i in range(25)]
        tagged = split_by_record(samples, 0.4, seed=1)
        by_id = {}
        for s in tagged:
            by_id.setdefault(s.ecg_refs[0].record_id, set()).add(s.split)
        assert all(len(v) == 1 for v in by_id.values())

    def test_zero_leakage_with_grouped_samples(self):
        samples = [QaSample(question="q?", answer="a",
                            ecg_refs=(EcgRef("p1-a"), EcgRef("p1-b")), subset="multiecg")]
        samples += [QaSample(question="q?", answer="a", ecg_refs=(EcgRef(f"r{i}"),),
                             subset="reportgen") for i in range(8)]
        tagged = split_by_record(samples, 0.3, seed=2)
        train_ids = {r.record_id for s in tagged if s.split == "train" for r in s.ecg_refs}
        test_ids = {r.record_id for s in tagged if s.split == "test" for r in s.ecg_refs}
        assert not train_ids & test_ids

    def test_deterministic(self):
        samples = [QaSample(question="q?", answer="a", ecg_refs=(EcgRef(f"r{i}"),),
                            subset="reportgen") for i in range(12)]
        a = split_by_record(samples, 0.25, seed=9)
        b = split_by_record(samples, 0.25, seed=9)
        assert a == b
