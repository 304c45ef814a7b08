import json

import pytest

from dialattack.corpus import (
    AttackInstance,
    CorpusParseError,
    CorpusValidationError,
    Dialog,
    DialogRound,
    flatten_instances,
    history_text,
    load_corpus,
    load_dense_relevance,
    pad_candidates,
    save_corpus,
    segment_history,
    segment_of,
)


def toy_dialog_obj(n_rounds=2, image_id="img1"):
    return {
        "image_id": image_id,
        "image_tags": ["cat", "mat"],
        "caption": "a cat on a mat",
        "rounds": [
            {
                "question": f"is it asleep {t} ?",
                "answer": "yes",
                "candidates": list(pad_candidates(["yes", "no"])),
                "gt_index": 0,
            }
            for t in range(n_rounds)
        ],
    }


def test_load_toy_single_dialog(tmp_path):
    path = tmp_path / "toy.jsonl"
    path.write_text(json.dumps(toy_dialog_obj(2)) + "\n")
    corpus = load_corpus(path, "toy")
    assert len(corpus) == 1
    assert len(corpus[0].rounds) == 2
    assert corpus[0].rounds[0].candidates[0] == "yes"


def test_load_toy_malformed_line_names_record(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(toy_dialog_obj()) + "\n{not json\n")
    with pytest.raises(CorpusParseError, match="bad.jsonl:2"):
        load_corpus(path, "toy")


def test_wrong_candidate_count_rejected(tmp_path):
    obj = toy_dialog_obj()
    obj["rounds"][0]["candidates"] = ["yes", "no"]
    path = tmp_path / "short.jsonl"
    path.write_text(json.dumps(obj) + "\n")
    with pytest.raises(CorpusValidationError, match="2 candidates"):
        load_corpus(path, "toy")


def test_relevance_must_cover_gt():
    with pytest.raises(CorpusValidationError, match="gt_index"):
        DialogRound(
            question="q", answer="a", candidates=pad_candidates(["a"]),
            gt_index=0, relevance=tuple([0.0] * 100),
        )


def test_missing_file():
    with pytest.raises(CorpusParseError, match="no such file"):
        load_corpus("/nonexistent/corpus.jsonl", "toy")


def visdial_obj():
    return {
        "version": "1.0",
        "split": "val",
        "data": {
            "questions": ["is it sunny", "how many people"],
            "answers": ["yes", "no", "two"] + [f"ans{i}" for i in range(97)],
            "dialogs": [
                {
                    "image_id": 42,
                    "caption": "a sunny beach",
                    "dialog": [
                        {
                            "question": 0,
                            "answer": 0,
                            "answer_options": list(range(100)),
                            "gt_index": 0,
                        }
                    ],
                }
            ],
        },
    }


def test_load_visdial_v1(tmp_path):
    path = tmp_path / "visdial.json"
    path.write_text(json.dumps(visdial_obj()))
    corpus = load_corpus(path, "visdial_v1")
    assert corpus[0].image_id == "42"
    assert corpus[0].rounds[0].question == "is it sunny"
    assert corpus[0].rounds[0].candidates[2] == "two"


def test_visdial_dangling_index(tmp_path):
    obj = visdial_obj()
    obj["data"]["dialogs"][0]["dialog"][0]["answer_options"][5] = 999
    path = tmp_path / "visdial.json"
    path.write_text(json.dumps(obj))
    with pytest.raises(CorpusValidationError, match="dangling answer index 999"):
        load_corpus(path, "visdial_v1")


def test_visdial_dense_relevance_side_file(tmp_path):
    corpus_path = tmp_path / "visdial.json"
    corpus_path.write_text(json.dumps(visdial_obj()))
    rel_path = tmp_path / "dense.json"
    rel = [{"image_id": 42, "round_id": 1, "gt_relevance": [1.0] + [0.0] * 99}]
    rel_path.write_text(json.dumps(rel))
    corpus = load_corpus(corpus_path, "visdial_v1", relevance_path=rel_path)
    assert corpus[0].rounds[0].relevance[0] == 1.0
    table = load_dense_relevance(rel_path)
    assert ("42", 1) in table


def test_flatten_counts():
    d3 = Dialog(
        image_id="d3", image_tags=(), caption="cap",
        rounds=tuple(
            DialogRound(question=f"q{t}", answer="a", candidates=pad_candidates(["a"]),
                        gt_index=0)
            for t in range(3)
        ),
    )
    instances = flatten_instances([d3])
    assert len(instances) == 3
    # instance t=3 has history = caption + 2 QA pairs
    assert len(instances[2].history_pairs) == 2
    # dialog with 1 round -> history = caption only
    d1 = Dialog(image_id="d1", image_tags=(), caption="cap", rounds=d3.rounds[:1])
    single = flatten_instances([d1])
    assert len(single) == 1 and single[0].history_pairs == ()
    # 2 dialogs x 3 rounds -> 6 instances
    assert len(flatten_instances([d3, d3])) == 6


def test_history_prefix_monotonicity(fixture_instances):
    by_dialog = {}
    for inst in fixture_instances:
        by_dialog.setdefault(inst.dialog.image_id, []).append(inst)
    for group in by_dialog.values():
        group.sort(key=lambda i: i.round_id)
        for earlier, later in zip(group, group[1:]):
            assert history_text(later).startswith(history_text(earlier))
            assert earlier.history_pairs == later.history_pairs[: len(earlier.history_pairs)]


def test_segment_history_spans():
    dialog = Dialog(
        image_id="seg", image_tags=(), caption="a cat on a mat",
        rounds=(
            DialogRound(question="is it asleep", answer="yes",
                        candidates=pad_candidates(["yes"]), gt_index=0),
            DialogRound(question="next q", answer="next a",
                        candidates=pad_candidates(["next a"]), gt_index=0),
        ),
    )
    t2 = AttackInstance(dialog=dialog, round_id=2)
    tokens, segments = segment_history(t2)
    kinds = [(s.kind, s.end - s.start) for s in segments]
    assert kinds == [("caption", 5), ("user_question", 3), ("system_answer", 1)]
    # t=1: a single caption span
    t1 = AttackInstance(dialog=dialog, round_id=1)
    _, segs1 = segment_history(t1)
    assert [s.kind for s in segs1] == ["caption"]
    assert segment_of(segments, 0) == "caption"
    assert segment_of(segments, 7) == "user_question"


def test_segment_cover_property(fixture_instances):
    for inst in fixture_instances[:50]:
        tokens, segments = segment_history(inst)
        covered = []
        for seg in segments:
            covered.extend(range(seg.start, seg.end))
        assert covered == list(range(len(tokens)))
        # concatenated segment tokens reproduce the history token sequence
        raw = history_text(inst)
        assert [raw[t.start:t.end] for t in tokens] == [t.surface for t in tokens]


def test_toy_round_trip(tmp_path, fixture_corpus):
    path = tmp_path / "rt.jsonl"
    save_corpus(fixture_corpus, path)
    reloaded = load_corpus(path, "toy")
    assert reloaded == list(fixture_corpus)
    assert flatten_instances(reloaded) == flatten_instances(fixture_corpus)


def test_pad_candidates():
    padded = pad_candidates(["a", "b"])
    assert len(padded) == 100 and padded[0] == "a" and len(set(padded)) == 100
    with pytest.raises(CorpusValidationError):
        pad_candidates([str(i) for i in range(101)])
