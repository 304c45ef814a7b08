"""Sentence-level semantic similarity Sim(X, X_adv).

The default encoder is the mean of word vectors over in-vocabulary,
non-punctuation tokens, L2-normalized, so the whole attack path runs offline
against the bundled table. A service implementing the encoder wire protocol
({protocol_version, text} -> {vector: [d numbers]}) can be swapped in for
large pretrained sentence encoders.

Similarity is computed over the whole text, not a window around the
substitution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lexsub import EmbeddingTable, tokenize
from .protocol import PROTOCOL_VERSION, ProtocolError


@dataclass(frozen=True, eq=False)
class SentenceVector:
    vector: np.ndarray
    is_zero: bool


def encode_sentence(text: str, table: EmbeddingTable) -> SentenceVector:
    """Mean of in-vocabulary word-token vectors, L2-normalized.

    Texts with no in-vocabulary tokens yield is_zero (their similarity to
    anything is defined as 0, which conservatively blocks substitutions).
    """
    vectors = []
    for token in tokenize(text):
        if not token.is_word:
            continue
        vec = table.vector(token.lower)
        if vec is not None:
            vectors.append(vec)
    if not vectors:
        return SentenceVector(vector=np.zeros(table.dim), is_zero=True)
    mean = np.mean(vectors, axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        return SentenceVector(vector=np.zeros(table.dim), is_zero=True)
    return SentenceVector(vector=mean / norm, is_zero=False)


def semantic_similarity(a: str, b: str, table: EmbeddingTable) -> float:
    """Cosine of the two sentence vectors; 0 if either side is degenerate."""
    va = encode_sentence(a, table)
    vb = encode_sentence(b, table)
    if va.is_zero or vb.is_zero:
        return 0.0
    return float(np.dot(va.vector, vb.vector))


class SimilarityScorer:
    """Similarity function with a pluggable encoder and a small result cache."""

    def __init__(self, table: EmbeddingTable | None = None, encoder: "ProtocolEncoder | None" = None):
        if (table is None) == (encoder is None):
            raise ValueError("provide exactly one of table or encoder")
        self.table = table
        self.encoder = encoder
        self._cache: dict[str, SentenceVector] = {}

    def encode(self, text: str) -> SentenceVector:
        cached = self._cache.get(text)
        if cached is None:
            if self.table is not None:
                cached = encode_sentence(text, self.table)
            else:
                cached = self.encoder.encode(text)
            if len(self._cache) > 50_000:
                self._cache.clear()
            self._cache[text] = cached
        return cached

    def similarity(self, a: str, b: str) -> float:
        va, vb = self.encode(a), self.encode(b)
        if va.is_zero or vb.is_zero:
            return 0.0
        return float(np.dot(va.vector, vb.vector))


class ProtocolEncoder:
    """Client for the encoder wire protocol."""

    def __init__(self, transport):
        self.transport = transport

    def encode(self, text: str) -> SentenceVector:
        response = self.transport.request(
            {"protocol_version": PROTOCOL_VERSION, "text": text}
        )
        vector = response.get("vector")
        if not isinstance(vector, list) or not vector:
            raise ProtocolError("encoder response missing 'vector' list")
        try:
            arr = np.asarray([float(v) for v in vector], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"non-numeric encoder vector: {exc}") from exc
        norm = np.linalg.norm(arr)
        if norm == 0.0:
            return SentenceVector(vector=arr, is_zero=True)
        return SentenceVector(vector=arr / norm, is_zero=False)
