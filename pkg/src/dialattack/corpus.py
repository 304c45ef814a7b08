"""Data model and loaders for ranking-dialog corpora.

Two on-disk formats load into the same immutable in-memory model:

* ``toy`` - one JSON object per line, one dialog per object, with candidate
  answer strings inline so fixtures stay hand-writable.
* ``visdial_v1`` - the VisDial v1.0 release schema with shared question and
  answer index tables, optionally joined with a dense-relevance side file
  keyed by (image_id, round_id).

Everything is frozen after load, so corpora can be shared across concurrent
attack workers without locking.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .lexsub import Token, analyze

N_CANDIDATES = 100

SEGMENT_CAPTION = "caption"
SEGMENT_QUESTION = "user_question"
SEGMENT_ANSWER = "system_answer"


class CorpusError(Exception):
    """Base class for corpus problems."""


class CorpusParseError(CorpusError):
    """The file could not be read as the declared format."""


class CorpusValidationError(CorpusError):
    """The file parsed but violates a data-model invariant."""


@dataclass(frozen=True)
class DialogRound:
    """One QA round: question, answer, and the 100 candidate answers to rank."""

    question: str
    answer: str
    candidates: tuple[str, ...]
    gt_index: int
    relevance: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.candidates) != N_CANDIDATES:
            raise CorpusValidationError(
                f"round has {len(self.candidates)} candidates, expected {N_CANDIDATES}"
            )
        if not 0 <= self.gt_index < N_CANDIDATES:
            raise CorpusValidationError(f"gt_index {self.gt_index} out of range")
        if self.relevance is not None:
            if len(self.relevance) != N_CANDIDATES:
                raise CorpusValidationError(
                    f"relevance has {len(self.relevance)} entries, expected {N_CANDIDATES}"
                )
            if not self.relevance[self.gt_index] > 0:
                raise CorpusValidationError("relevance at gt_index must be > 0")


@dataclass(frozen=True)
class Dialog:
    image_id: str
    image_tags: tuple[str, ...]
    caption: str
    rounds: tuple[DialogRound, ...]

    def __post_init__(self):
        if not self.rounds:
            raise CorpusValidationError(f"dialog {self.image_id}: no rounds")
        if not self.caption.strip():
            raise CorpusValidationError(f"dialog {self.image_id}: empty caption")


@dataclass(frozen=True)
class AttackInstance:
    """One attackable unit: a dialog at round t with history = caption + rounds 1..t-1."""

    dialog: Dialog
    round_id: int  # 1-based

    def __post_init__(self):
        if not 1 <= self.round_id <= len(self.dialog.rounds):
            raise CorpusValidationError(
                f"round_id {self.round_id} out of range for dialog {self.dialog.image_id}"
            )

    @property
    def instance_id(self) -> str:
        return f"{self.dialog.image_id}:{self.round_id}"

    @property
    def round(self) -> DialogRound:
        return self.dialog.rounds[self.round_id - 1]

    @property
    def question(self) -> str:
        return self.round.question

    @property
    def candidates(self) -> tuple[str, ...]:
        return self.round.candidates

    @property
    def gt_index(self) -> int:
        return self.round.gt_index

    @property
    def relevance(self) -> tuple[float, ...] | None:
        return self.round.relevance

    @property
    def history_pairs(self) -> tuple[tuple[str, str], ...]:
        """(question, answer) pairs of rounds strictly before round_id."""
        return tuple(
            (r.question, r.answer) for r in self.dialog.rounds[: self.round_id - 1]
        )


def history_text(instance: AttackInstance) -> str:
    """Caption and prior QA pairs flattened to one space-joined string."""
    parts = [instance.dialog.caption]
    for q, a in instance.history_pairs:
        parts.append(q)
        parts.append(a)
    return " ".join(parts)


@dataclass(frozen=True)
class HistorySegment:
    """Token span [start, end) of one history part in the concatenated token list."""

    kind: str
    start: int
    end: int


def segment_history(instance: AttackInstance) -> tuple[list[Token], list[HistorySegment]]:
    """Tokenize the history with per-part provenance labels.

    Returns the concatenated token list (char spans refer to the string built
    by :func:`history_text`) and the ordered segments covering it exactly.
    """
    parts: list[tuple[str, str]] = [(SEGMENT_CAPTION, instance.dialog.caption)]
    for q, a in instance.history_pairs:
        parts.append((SEGMENT_QUESTION, q))
        parts.append((SEGMENT_ANSWER, a))

    tokens: list[Token] = []
    segments: list[HistorySegment] = []
    offset = 0
    for kind, text in parts:
        part_tokens = analyze(text)
        shifted = [
            Token(
                surface=t.surface,
                lower=t.lower,
                start=t.start + offset,
                end=t.end + offset,
                is_stopword=t.is_stopword,
                pos=t.pos,
            )
            for t in part_tokens
        ]
        segments.append(
            HistorySegment(kind=kind, start=len(tokens), end=len(tokens) + len(shifted))
        )
        tokens.extend(shifted)
        offset += len(text) + 1  # single joining space
    return tokens, segments


def segment_of(segments: Iterable[HistorySegment], position: int) -> str:
    for seg in segments:
        if seg.start <= position < seg.end:
            return seg.kind
    raise ValueError(f"token position {position} not covered by any segment")


def flatten_instances(corpus: Iterable[Dialog]) -> list[AttackInstance]:
    """One instance per round; history truncated strictly before the round."""
    return [
        AttackInstance(dialog=d, round_id=t)
        for d in corpus
        for t in range(1, len(d.rounds) + 1)
    ]


# ---------------------------------------------------------------------------
# Loaders.

def _toy_round(obj: dict, where: str) -> DialogRound:
    try:
        return DialogRound(
            question=str(obj["question"]),
            answer=str(obj["answer"]),
            candidates=tuple(str(c) for c in obj["candidates"]),
            gt_index=int(obj["gt_index"]),
            relevance=tuple(float(r) for r in obj["relevance"]) if obj.get("relevance") is not None else None,
        )
    except KeyError as exc:
        raise CorpusParseError(f"{where}: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise CorpusParseError(f"{where}: {exc}") from exc


def _load_toy(path: Path) -> list[Dialog]:
    dialogs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        where = f"{path.name}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"{where}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise CorpusParseError(f"{where}: expected a JSON object per line")
        try:
            rounds = tuple(
                _toy_round(r, f"{where} round {i + 1}") for i, r in enumerate(obj["rounds"])
            )
            dialogs.append(
                Dialog(
                    image_id=str(obj["image_id"]),
                    image_tags=tuple(str(t) for t in obj.get("image_tags", ())),
                    caption=str(obj["caption"]),
                    rounds=rounds,
                )
            )
        except KeyError as exc:
            raise CorpusParseError(f"{where}: missing field {exc}") from exc
    return dialogs


def load_dense_relevance(path: str | Path) -> dict[tuple[str, int], tuple[float, ...]]:
    """Dense relevance side file: a JSON list of {image_id, round_id, relevance|gt_relevance}."""
    path = Path(path)
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusParseError(f"{path.name}: invalid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise CorpusParseError(f"{path.name}: expected a JSON list")
    table: dict[tuple[str, int], tuple[float, ...]] = {}
    for i, rec in enumerate(records):
        where = f"{path.name} record {i}"
        try:
            values = rec.get("relevance", rec.get("gt_relevance"))
            table[(str(rec["image_id"]), int(rec["round_id"]))] = tuple(
                float(v) for v in values
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise CorpusParseError(f"{where}: {exc}") from exc
    return table


def _load_visdial_v1(path: Path, relevance: Mapping[tuple[str, int], tuple[float, ...]] | None) -> list[Dialog]:
    try:
        root = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusParseError(f"{path.name}: invalid JSON: {exc}") from exc
    try:
        data = root["data"]
        questions = data["questions"]
        answers = data["answers"]
        raw_dialogs = data["dialogs"]
    except (KeyError, TypeError) as exc:
        raise CorpusParseError(f"{path.name}: not a visdial_v1 file (missing {exc})") from exc

    def resolve(kind: str, table: list[str], idx, where: str) -> str:
        if not isinstance(idx, int) or not 0 <= idx < len(table):
            raise CorpusValidationError(f"{where}: dangling {kind} index {idx!r}")
        return table[idx]

    dialogs = []
    for d_i, d in enumerate(raw_dialogs):
        image_id = str(d.get("image_id", d_i))
        rounds = []
        for r_i, r in enumerate(d.get("dialog", []), 1):
            where = f"{path.name} dialog {image_id} round {r_i}"
            try:
                options = r["answer_options"]
                round_rel = None
                if relevance is not None:
                    round_rel = relevance.get((image_id, r_i))
                rounds.append(
                    DialogRound(
                        question=resolve("question", questions, r["question"], where),
                        answer=resolve("answer", answers, r["answer"], where),
                        candidates=tuple(
                            resolve("answer", answers, o, where) for o in options
                        ),
                        gt_index=int(r["gt_index"]),
                        relevance=round_rel,
                    )
                )
            except KeyError as exc:
                raise CorpusParseError(f"{where}: missing field {exc}") from exc
            except CorpusValidationError as exc:
                raise CorpusValidationError(str(exc)) from exc
        try:
            dialogs.append(
                Dialog(
                    image_id=image_id,
                    image_tags=tuple(str(t) for t in d.get("image_tags", ())),
                    caption=str(d.get("caption", "")),
                    rounds=tuple(rounds),
                )
            )
        except CorpusValidationError as exc:
            raise CorpusValidationError(f"{path.name} dialog {image_id}: {exc}") from exc
    return dialogs


def load_corpus(path: str | Path, format: str = "toy",
                relevance_path: str | Path | None = None) -> list[Dialog]:
    """Load a corpus file in the declared format.

    The visdial_v1 validation split is expected to carry 2,064 dialogs;
    nothing here depends on that, but the loader logs nothing and callers
    wanting the sanity check can just len() the result.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusParseError(f"no such file: {path}")
    if format == "toy":
        if relevance_path is not None:
            raise CorpusParseError("toy format carries relevance inline; no side file")
        return _load_toy(path)
    if format == "visdial_v1":
        relevance = load_dense_relevance(relevance_path) if relevance_path else None
        return _load_visdial_v1(path, relevance)
    raise CorpusParseError(f"unknown corpus format {format!r}")


def save_corpus(corpus: Iterable[Dialog], path: str | Path) -> None:
    """Write dialogs in the toy JSONL format (the round-trip counterpart of load)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in corpus:
            obj = {
                "image_id": d.image_id,
                "image_tags": list(d.image_tags),
                "caption": d.caption,
                "rounds": [
                    {
                        "question": r.question,
                        "answer": r.answer,
                        "candidates": list(r.candidates),
                        "gt_index": r.gt_index,
                        **({"relevance": list(r.relevance)} if r.relevance is not None else {}),
                    }
                    for r in d.rounds
                ],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def pad_candidates(candidates: Iterable[str], filler: str = "pad") -> tuple[str, ...]:
    """Pad a short candidate list to 100 entries with distinct filler strings."""
    out = list(candidates)
    i = 0
    while len(out) < N_CANDIDATES:
        out.append(f"{filler}{i}")
        i += 1
    if len(out) > N_CANDIDATES:
        raise CorpusValidationError(f"{len(out)} candidates exceed {N_CANDIDATES}")
    return tuple(out)
