"""Deterministic stub services: fixed tables and stable hashes, no models.

Stubs exist so protocol clients can run conformance suites offline. They are
implemented independently of any client library: their own tokenizer, their
own scoring, CRC-based hashing (Python's builtin hash is salted per process
and would break cross-run determinism).
"""
from __future__ import annotations

import re
import zlib

import numpy as np

_WORD_RE = re.compile(r"[a-z0-9']+")

# Small context-free thesaurus for the mask-fill stub; unknown words fall
# back to hash-picked entries from the fallback pool.
_THESAURUS = {
    "red": ["blue", "crimson", "scarlet", "rosy", "ruby"],
    "big": ["large", "huge", "vast", "giant", "wide"],
    "small": ["little", "tiny", "slight", "petite", "compact"],
    "dark": ["dim", "murky", "shadowy", "dusky", "black"],
    "bus": ["coach", "van", "tram", "shuttle", "minibus"],
    "dog": ["puppy", "hound", "pup", "canine", "terrier"],
    "cat": ["kitten", "feline", "tabby", "kitty", "tomcat"],
    "man": ["person", "guy", "fellow", "gentleman", "male"],
    "woman": ["person", "lady", "female", "girl", "adult"],
    "sunny": ["bright", "clear", "cloudless", "fair", "radiant"],
    "color": ["colour", "shade", "hue", "tint", "tone"],
}

_FALLBACK_POOL = [
    "thing", "object", "item", "piece", "spot", "part", "shape", "form",
    "area", "place", "figure", "patch", "corner", "element", "detail",
]


def _tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _stable_hash(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def stub_victim_scores(request: dict) -> list[float]:
    """Overlap-flavored deterministic scorer (independent implementation).

    score(c) = |words(c) & words(question)| + 0.5 |words(c) & words(caption)|
    plus a stable sub-1e-3 jitter from the candidate text so ties break
    deterministically but not trivially by index.
    """
    question = set(_tokens(str(request.get("question", ""))))
    caption = set(_tokens(str(request.get("caption", ""))))
    scores = []
    for cand in request["candidates"]:
        words = set(_tokens(str(cand)))
        score = float(len(words & question)) + 0.5 * len(words & caption)
        score += (_stable_hash(str(cand)) % 997) * 1e-6
        scores.append(score)
    return scores


def stub_fill_candidates(tokens: list[str], mask_index: int, top_k: int) -> list[dict]:
    """Mask-fill stub: thesaurus entries first, then hash-picked fallbacks."""
    target = tokens[mask_index].lower() if 0 <= mask_index < len(tokens) else ""
    picks = list(_THESAURUS.get(target, ()))
    seed = _stable_hash(" ".join(tokens) + f"#{mask_index}")
    i = 0
    while len(picks) < top_k and i < len(_FALLBACK_POOL):
        word = _FALLBACK_POOL[(seed + i) % len(_FALLBACK_POOL)]
        if word not in picks and word != target:
            picks.append(word)
        i += 1
    return [
        {"word": word, "score": round(1.0 - 0.05 * rank, 6)}
        for rank, word in enumerate(picks[:top_k])
    ]


def stub_encode(text: str, dim: int = 16) -> list[float]:
    """Character-trigram hash embedding, L2-normalized; identical texts map
    to identical vectors across runs and platforms."""
    vec = np.zeros(dim, dtype=np.float64)
    padded = f"  {text.lower()}  "
    for i in range(len(padded) - 2):
        gram = padded[i:i + 3]
        h = _stable_hash(gram)
        vec[h % dim] += 1.0 if (h >> 16) % 2 == 0 else -1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        norm = 1.0
    return [float(v) for v in vec / norm]


def stub_grammar_violations(text: str) -> list[dict]:
    """Immediate-duplicate-word rule only; spans are character offsets."""
    violations = []
    prev = None
    for match in re.finditer(r"[A-Za-z0-9']+", text):
        if prev is not None and match.group(0).lower() == prev.group(0).lower():
            violations.append(
                {"rule_id": "duplicate_word", "span": [prev.start(), match.end()]}
            )
        prev = match
    return violations
