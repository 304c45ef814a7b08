import numpy as np
import pytest

from dialattack.corpus import Dialog, DialogRound, flatten_instances, pad_candidates
from dialattack.fixtures import make_fixture_corpus
from dialattack.lexsub import EmbeddingTable


@pytest.fixture(scope="session")
def mini_table() -> EmbeddingTable:
    """The hand-checkable 2-d table: cat=(1,0), feline=(0.8,0.6), dog=(0,1)."""
    return EmbeddingTable(
        ["cat", "feline", "dog"],
        np.array([[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]]),
    )


@pytest.fixture(scope="session")
def fixture_corpus():
    return make_fixture_corpus(40, 5)


@pytest.fixture(scope="session")
def fixture_instances(fixture_corpus):
    return flatten_instances(fixture_corpus)


def make_instance(question="is the red ball in the box ?", gt="a red ball",
                  distractor="a dog", caption="a photo", image_tags=(),
                  history=(), relevance=None):
    """One-round dialog with padded candidates; GT at index 0, distractor at 1."""
    rounds = [
        DialogRound(question=q, answer=a, candidates=pad_candidates([a, "x" + a]),
                    gt_index=0)
        for q, a in history
    ]
    rounds.append(
        DialogRound(
            question=question,
            answer=gt,
            candidates=pad_candidates([gt, distractor]),
            gt_index=0,
            relevance=tuple(relevance) if relevance is not None else None,
        )
    )
    dialog = Dialog(image_id="t0", image_tags=tuple(image_tags), caption=caption,
                    rounds=tuple(rounds))
    return flatten_instances([dialog])[-1]
