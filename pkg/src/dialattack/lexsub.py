"""Tokenization, coarse POS tagging, stopwords and synonym-candidate providers.

Substitution candidates come from one of two providers: nearest neighbors in
a word-embedding table (context-free, scored by cosine) or an external
masked-LM service reached over the wire protocol (contextual, scored by the
model). Both emit :class:`SynonymCandidate` lists that the constraint stack
filters downstream.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .protocol import PROTOCOL_VERSION, ProtocolError

COARSE_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "NUM", "PRON", "DET", "ADP", "OTHER")

# Word = alphanumeric run, intra-word apostrophes kept ("what's" stays whole);
# every other non-space character is its own token.
_WORD = r"\w+(?:'\w+)*"
_TOKEN_RE = re.compile(rf"{_WORD}|[^\w\s]")
_WORD_RE = re.compile(rf"{_WORD}$")
_NUMERIC_RE = re.compile(r"\d+(?:[.,]\d+)*$")


@dataclass(frozen=True)
class Token:
    surface: str
    lower: str
    start: int
    end: int
    is_stopword: bool
    pos: str | None = None

    @property
    def is_word(self) -> bool:
        return bool(_WORD_RE.match(self.surface))


@dataclass(frozen=True)
class SynonymCandidate:
    word: str
    provider_score: float
    pos: str


def _data_path(name: str) -> Path:
    return Path(str(resources.files("dialattack").joinpath("data", name)))


@lru_cache(maxsize=4)
def _load_stopwords(path: str) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


# Process-wide overrides installed by configure(); None means the bundled files.
_active_paths: dict[str, str | None] = {"stopwords": None, "pos_lexicon": None}


def configure(stopwords_path: str | Path | None = None,
              pos_lexicon_path: str | Path | None = None) -> None:
    """Point the default stopword list and/or POS lexicon at custom files.

    Takes effect process-wide for every call that does not pass its own
    table; call once at startup (corpora are immutable afterwards).
    """
    if stopwords_path is not None:
        _load_stopwords(str(stopwords_path))  # validate eagerly
        _active_paths["stopwords"] = str(stopwords_path)
    if pos_lexicon_path is not None:
        _load_pos_lexicon(str(pos_lexicon_path))
        _active_paths["pos_lexicon"] = str(pos_lexicon_path)


def reset_configuration() -> None:
    _active_paths["stopwords"] = None
    _active_paths["pos_lexicon"] = None


def default_stopwords() -> frozenset[str]:
    path = _active_paths["stopwords"] or str(_data_path("stopwords.txt"))
    return _load_stopwords(path)


def load_stopwords(path: str | Path) -> frozenset[str]:
    return _load_stopwords(str(path))


def is_stopword(word: str, stopwords: frozenset[str] | None = None) -> bool:
    """True for list members (case-insensitive), punctuation and numerals.

    Punctuation and numerals are never attacked: substituting them breaks
    grammaticality trivially.
    """
    if not _WORD_RE.match(word):
        return True
    if _NUMERIC_RE.match(word):
        return True
    table = stopwords if stopwords is not None else default_stopwords()
    return word.lower() in table


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> list[Token]:
    """Split on whitespace and punctuation; punctuation chars become OTHER tokens."""
    table = stopwords if stopwords is not None else default_stopwords()
    tokens = []
    for match in _TOKEN_RE.finditer(text):
        surface = match.group(0)
        tokens.append(
            Token(
                surface=surface,
                lower=surface.lower(),
                start=match.start(),
                end=match.end(),
                is_stopword=is_stopword(surface, table),
            )
        )
    return tokens


# ---------------------------------------------------------------------------
# POS tagging: bundled most-frequent-tag lexicon with suffix fallbacks.

@lru_cache(maxsize=4)
def _load_pos_lexicon(path: str) -> dict[str, str]:
    lexicon: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, tag = line.split()
        if tag not in COARSE_TAGS:
            raise ValueError(f"unknown tag {tag!r} for {word!r} in {path}")
        lexicon[word.lower()] = tag
    return lexicon


def default_pos_lexicon() -> dict[str, str]:
    path = _active_paths["pos_lexicon"] or str(_data_path("pos_lexicon.txt"))
    return _load_pos_lexicon(path)


_ADJ_SUFFIXES = ("ful", "ous", "ive", "able", "ible", "ish", "less")
_NOUN_SUFFIXES = ("tion", "sion", "ness", "ment", "ity", "ship", "ism")


def _suffix_tag(word: str, lexicon: dict[str, str]) -> str | None:
    if word.endswith("ly") and len(word) > 4:
        return "ADV"
    if word.endswith(("ing", "ed")) and len(word) > 4:
        return "VERB"
    if word.endswith(_NOUN_SUFFIXES):
        return "NOUN"
    if word.endswith(_ADJ_SUFFIXES):
        return "ADJ"
    if word.endswith("est") and len(word) > 4:
        return "ADJ"
    if word.endswith("er") and len(word) > 4:
        base = word[:-2]
        for form in (base, base + "e", base[:-1] if base and base[-1] == base[-2:-1] else base):
            if lexicon.get(form) == "ADJ":
                return "ADJ"
        return None
    return None


def tag_word(word: str, lexicon: dict[str, str] | None = None) -> str:
    """Coarse tag for one word: lexicon, plural strip, suffix rules, NOUN fallback."""
    lexicon = lexicon if lexicon is not None else default_pos_lexicon()
    lower = word.lower()
    if not _WORD_RE.match(word):
        return "OTHER"
    if _NUMERIC_RE.match(word):
        return "NUM"
    if lower in lexicon:
        return lexicon[lower]
    # Plural / 3rd-person -s inherits the base word's tag.
    if lower.endswith("ies") and lower[:-3] + "y" in lexicon:
        return lexicon[lower[:-3] + "y"]
    if lower.endswith("es") and lower[:-2] in lexicon:
        return lexicon[lower[:-2]]
    if lower.endswith("s") and lower[:-1] in lexicon:
        return lexicon[lower[:-1]]
    suffix = _suffix_tag(lower, lexicon)
    if suffix is not None:
        return suffix
    return "NOUN"


ExternalTagger = Callable[[Sequence[str]], Sequence[str]]


def pos_tag(tokens: Sequence[Token], lexicon: dict[str, str] | None = None,
            tagger: ExternalTagger | None = None) -> list[Token]:
    """Fill the pos field of every token; an external tagger wins when configured."""
    if tagger is not None:
        tags = list(tagger([t.surface for t in tokens]))
        if len(tags) != len(tokens):
            raise ValueError("external tagger returned wrong number of tags")
        return [replace(t, pos=tag) for t, tag in zip(tokens, tags)]
    lexicon = lexicon if lexicon is not None else default_pos_lexicon()
    return [replace(t, pos=tag_word(t.surface, lexicon)) for t in tokens]


def analyze(text: str, stopwords: frozenset[str] | None = None,
            lexicon: dict[str, str] | None = None) -> list[Token]:
    """tokenize + pos_tag in one step."""
    return pos_tag(tokenize(text, stopwords), lexicon)


# ---------------------------------------------------------------------------
# Embedding-based provider.

class EmbeddingTable:
    """Word vectors, unit-normalized at load time.

    File format: whitespace-separated text, one word then d floats per line,
    as distributed by common pre-trained vector releases.
    """

    def __init__(self, words: Sequence[str], matrix: np.ndarray):
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError("matrix shape does not match vocabulary")
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            bad = [w for w, n in zip(words, norms[:, 0]) if n == 0.0]
            raise ValueError(f"zero vector(s) for {bad[:3]}")
        self.words = [w.lower() for w in words]
        self.matrix = matrix / norms
        self._index = {w: i for i, w in enumerate(self.words)}
        if len(self._index) != len(self.words):
            raise ValueError("duplicate words in embedding file")

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        words: list[str] = []
        rows: list[list[float]] = []
        dim = None
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise ValueError(f"{path}:{lineno}: expected {dim} floats for {word!r}")
            words.append(word)
            rows.append([float(v) for v in values])
        if not words:
            raise ValueError(f"{path}: empty embedding file")
        return cls(words, np.asarray(rows, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._index

    def vector(self, word: str) -> np.ndarray | None:
        idx = self._index.get(word.lower())
        return None if idx is None else self.matrix[idx]

    def cosine(self, a: str, b: str) -> float | None:
        va, vb = self.vector(a), self.vector(b)
        if va is None or vb is None:
            return None
        return float(np.dot(va, vb))


def fixture_embeddings_path() -> Path:
    """Path of the bundled 2-d deterministic table used for offline testing."""
    return _data_path("fixture_embeddings.txt")


@lru_cache(maxsize=1)
def fixture_embeddings() -> EmbeddingTable:
    return EmbeddingTable.load(fixture_embeddings_path())


def embedding_candidates(word: str, table: EmbeddingTable, k: int,
                         lexicon: dict[str, str] | None = None) -> list[SynonymCandidate]:
    """Top-k vocabulary words by cosine to ``word``, the word itself excluded.

    Deterministic: descending score with lexicographic tie-break. OOV words
    yield an empty list. Multi-token vocabulary entries are skipped so a
    substitution always replaces exactly one token.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    vec = table.vector(word)
    if vec is None:
        return []
    scores = table.matrix @ vec
    lower = word.lower()
    ranked = sorted(
        (
            (w, float(s))
            for w, s in zip(table.words, scores)
            if w != lower and _WORD_RE.match(w)
        ),
        key=lambda item: (-item[1], item[0]),
    )
    return [
        SynonymCandidate(word=w, provider_score=s, pos=tag_word(w, lexicon))
        for w, s in ranked[:k]
    ]


# ---------------------------------------------------------------------------
# Masked-LM provider (external service behind the synonym wire protocol).

class SynonymProvider:
    """Minimal interface: fill(tokens, mask_index, top_k) -> [(word, score), ...]."""

    def fill(self, tokens: Sequence[str], mask_index: int, top_k: int) -> list[tuple[str, float]]:
        raise NotImplementedError


class ProtocolSynonymProvider(SynonymProvider):
    """Client for the synonym wire protocol.

    Request:  {protocol_version, tokens: [...], mask_index, top_k}
    Response: {candidates: [{word, score}, ...]}
    """

    def __init__(self, transport):
        self.transport = transport

    def fill(self, tokens: Sequence[str], mask_index: int, top_k: int) -> list[tuple[str, float]]:
        response = self.transport.request(
            {
                "protocol_version": PROTOCOL_VERSION,
                "tokens": list(tokens),
                "mask_index": int(mask_index),
                "top_k": int(top_k),
            }
        )
        candidates = response.get("candidates")
        if not isinstance(candidates, list):
            raise ProtocolError("synonym response missing 'candidates' list")
        out = []
        for entry in candidates:
            try:
                out.append((str(entry["word"]), float(entry["score"])))
            except (TypeError, KeyError, ValueError) as exc:
                raise ProtocolError(f"malformed synonym candidate {entry!r}") from exc
        return out


_SUBWORD_RE = re.compile(r"^##|^▁|\[\w+\]$")


def mlm_candidates(tokens: Sequence[Token], position: int, k: int,
                   provider: SynonymProvider,
                   lexicon: dict[str, str] | None = None) -> list[SynonymCandidate]:
    """Ask the masked-LM provider for fills at ``position``.

    Sub-word artifacts, punctuation-only candidates, multi-token strings and
    the original word are filtered out; an empty result is not an error.
    """
    if position < 0 or position >= len(tokens):
        raise ValueError(f"position {position} out of range")
    target = tokens[position]
    if target.is_stopword:
        raise ValueError(f"token {target.surface!r} at {position} is a stopword")
    raw = provider.fill([t.surface for t in tokens], position, k)
    seen: set[str] = set()
    out: list[SynonymCandidate] = []
    for word, score in raw:
        lower = word.lower()
        if lower == target.lower or lower in seen:
            continue
        if _SUBWORD_RE.search(word) or not _WORD_RE.match(word):
            continue
        seen.add(lower)
        out.append(SynonymCandidate(word=word, provider_score=float(score),
                                    pos=tag_word(word, lexicon)))
        if len(out) >= k:
            break
    return out
