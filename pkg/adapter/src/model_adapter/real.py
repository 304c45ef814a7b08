"""Real-model backends: pretrained transformers behind the same handlers.

Imports are lazy so stub mode never touches torch. Victim scoring has no
universal pretrained model; a checkpoint harness plugs in through
``AdapterConfig.victim_entrypoint`` ("module:function"), receiving the raw
victim request dict and returning 100 scores.
"""
from __future__ import annotations

import importlib
from functools import lru_cache

from .config import AdapterConfig


@lru_cache(maxsize=2)
def _fill_pipeline(model_name: str, device: str):
    from transformers import pipeline

    return pipeline("fill-mask", model=model_name,
                    device=-1 if device == "cpu" else device)


@lru_cache(maxsize=2)
def _encoder_pipeline(model_name: str, device: str):
    from transformers import pipeline

    return pipeline("feature-extraction", model=model_name,
                    device=-1 if device == "cpu" else device)


def real_fill_candidates(config: AdapterConfig, tokens: list[str], mask_index: int,
                         top_k: int) -> list[dict]:
    pipe = _fill_pipeline(config.mlm_model, config.device)
    mask = pipe.tokenizer.mask_token
    masked = " ".join(mask if i == mask_index else t for i, t in enumerate(tokens))
    results = pipe(masked, top_k=top_k)
    return [
        {"word": r["token_str"].strip(), "score": float(r["score"])}
        for r in results
    ]


def real_encode(config: AdapterConfig, text: str) -> list[float]:
    import numpy as np

    pipe = _encoder_pipeline(config.encoder_model, config.device)
    features = np.asarray(pipe(text)[0])  # (tokens, dim)
    vec = features.mean(axis=0)
    norm = float(np.linalg.norm(vec))
    return [float(v) for v in (vec / norm if norm else vec)]


def load_victim_entrypoint(spec: str):
    """Resolve 'module:function' to a callable(request_dict) -> list[float]."""
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise ValueError(f"victim entrypoint {spec!r} must be 'module:function'")
    module = importlib.import_module(module_name)
    return getattr(module, attr)
