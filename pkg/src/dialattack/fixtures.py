"""Deterministic fixture corpus with planted vulnerable words.

Each dialog is built around one word family from the bundled 2-d embedding
table: the ground-truth answer is "{w} {obj}", the top distractor is
"{flip} {obj}" where ``flip`` is an embedding neighbor of the planted word
``w``. Substituting w -> flip moves one overlap point from the GT to the
distractor and flips the question-only ranker's top answer, so:

* ``w`` has the strictly highest deletion importance in every instance;
* families differ in how similar the flip is to the original sentence
  (tiers ~0.97 / 0.68 / 0.42 / 0.22 / 0.03), driving the epsilon sweep;
* one family's flip is a POS mismatch and one triggers an article violation,
  driving the constraint-stack sweep;
* captions repeat "{w} {obj}", so history-aware rankers hold the GT on a
  tie and resist the question attack, and history attacks that perturb the
  caption strictly lower the GT probability.
"""
from __future__ import annotations

from dataclasses import dataclass

from .corpus import Dialog, DialogRound, pad_candidates


@dataclass(frozen=True)
class FixtureFamily:
    name: str
    w: str          # planted vulnerable word
    syn: str        # near synonym (no flip)
    flip: str       # distractor word; substituting w -> flip flips the ranking
    obj: str        # shared object noun (appears in GT, distractor and caption)
    obj2: str       # embedding neighbor of obj (decoy substitution target)
    flip_similarity: float  # sentence similarity of the w -> flip substitution
    article_template: bool = False  # question says "a {w}" (grammar-rule family)


FAMILIES: tuple[FixtureFamily, ...] = (
    FixtureFamily("A", "red", "crimson", "rosy", "ball", "orb", 0.9659),
    FixtureFamily("B", "big", "huge", "vast", "box", "crate", 0.6756),
    FixtureFamily("C", "dark", "dim", "murky", "lamp", "bulb", 0.4226),
    FixtureFamily("D", "soft", "plush", "mushy", "sofa", "couch", 0.2164),
    FixtureFamily("E", "tall", "lofty", "steep", "fence", "gate", 0.0262),
    FixtureFamily("F", "warm", "toasty", "glow", "rug", "mat", 0.9659),   # flip is a VERB
    FixtureFamily("H", "pale", "ashen", "ivory", "wall", "door", 0.9659,
                  article_template=True),                                  # "a ivory" violates
    FixtureFamily("HIST", "worn", "shabby", "faded", "chair", "stool", 0.9659),
    FixtureFamily("G1", "cozy", "snug", "calm", "shelf", "rack", 0.9659),
    FixtureFamily("G2", "round", "curvy", "plump", "plate", "dish", 0.9659),
)

_PLACES = ("kitchen", "garden", "street", "corner", "yard", "park", "field", "beach")
_SCENES = ("room", "house", "photo", "picture", "background")
_PREPOSITIONS = ("in", "near", "by")


def family_for(dialog_index: int) -> FixtureFamily:
    return FAMILIES[dialog_index % len(FAMILIES)]


def _question(family: FixtureFamily, place: str, prep: str) -> str:
    if family.article_template:
        return f"is that a {family.w} {family.obj} {prep} the {place} ?"
    return f"is the {family.w} {family.obj} {prep} the {place} ?"


def make_fixture_corpus(n_dialogs: int = 40, rounds_per_dialog: int = 5,
                        seed: int = 0, with_relevance: bool = True) -> list[Dialog]:
    """Build the fixture corpus: n_dialogs x rounds_per_dialog instances.

    Fully deterministic; ``seed`` only rotates the place/preposition cycle.
    Dense relevance (GT=1.0, distractor=0.5) is attached to even-indexed
    dialogs when ``with_relevance`` is set, mirroring an annotated subset.
    """
    dialogs = []
    for d in range(n_dialogs):
        family = family_for(d)
        scene = _SCENES[(d + seed) % len(_SCENES)]
        rounds = []
        for t in range(rounds_per_dialog):
            place = _PLACES[(d + t + seed) % len(_PLACES)]
            prep = _PREPOSITIONS[(d + t + seed) % len(_PREPOSITIONS)]
            gt = f"{family.w} {family.obj}"
            distractor = f"{family.flip} {family.obj}"
            relevance = None
            if with_relevance and d % 2 == 0:
                relevance = tuple([1.0, 0.5] + [0.0] * 98)
            rounds.append(
                DialogRound(
                    question=_question(family, place, prep),
                    answer=gt,
                    candidates=pad_candidates([gt, distractor]),
                    gt_index=0,
                    relevance=relevance,
                )
            )
        dialogs.append(
            Dialog(
                image_id=f"fx{d:04d}",
                image_tags=(family.w, family.obj),
                caption=f"a {family.w} {family.obj} {scene}",
                rounds=tuple(rounds),
            )
        )
    return dialogs
