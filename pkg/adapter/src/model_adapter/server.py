"""Request handlers for the four protocols, plus the serve() entry point."""
from __future__ import annotations

from typing import Callable

from . import real, stub
from .config import AdapterConfig
from .wire import Handler, RequestError, check_version, http_server, stdio_loop

N_CANDIDATES = 100


def victim_handler(config: AdapterConfig) -> Handler:
    if config.victim_entrypoint:
        score_fn = real.load_victim_entrypoint(config.victim_entrypoint)
    elif config.mode == "stub":
        score_fn = stub.stub_victim_scores
    else:
        raise ValueError(
            "real-mode victim needs victim_entrypoint=module:function wrapping a checkpoint"
        )

    def handle(request: dict) -> dict:
        check_version(request)
        candidates = request.get("candidates")
        if not isinstance(candidates, list) or len(candidates) != N_CANDIDATES:
            raise RequestError(f"request must carry exactly {N_CANDIDATES} candidates")
        if not isinstance(request.get("question", ""), str):
            raise RequestError("question must be a string")
        scores = [float(s) for s in score_fn(request)]
        if len(scores) != N_CANDIDATES:
            raise RequestError(f"victim backend produced {len(scores)} scores")
        return {"scores": scores, "normalized": False}

    return handle


def synonym_handler(config: AdapterConfig) -> Handler:
    def handle(request: dict) -> dict:
        check_version(request)
        tokens = request.get("tokens")
        if not isinstance(tokens, list) or not tokens:
            raise RequestError("tokens must be a non-empty list")
        tokens = [str(t) for t in tokens]
        try:
            mask_index = int(request["mask_index"])
            top_k = int(request.get("top_k", 10))
        except (KeyError, TypeError, ValueError) as exc:
            raise RequestError(f"bad mask_index/top_k: {exc}") from exc
        if not 0 <= mask_index < len(tokens):
            raise RequestError(f"mask_index {mask_index} out of range")
        if top_k < 1:
            raise RequestError("top_k must be >= 1")
        if config.mode == "stub":
            candidates = stub.stub_fill_candidates(tokens, mask_index, top_k)
        else:
            candidates = real.real_fill_candidates(config, tokens, mask_index, top_k)
        return {"candidates": candidates}

    return handle


def encoder_handler(config: AdapterConfig) -> Handler:
    def handle(request: dict) -> dict:
        check_version(request)
        text = request.get("text")
        if not isinstance(text, str):
            raise RequestError("text must be a string")
        if config.mode == "stub":
            vector = stub.stub_encode(text)
        else:
            vector = real.real_encode(config, text)
        return {"vector": vector}

    return handle


def grammar_handler(config: AdapterConfig) -> Handler:
    def handle(request: dict) -> dict:
        check_version(request)
        text = request.get("text")
        if not isinstance(text, str):
            raise RequestError("text must be a string")
        # No bundled real grammar model; the stub rule set serves both modes.
        # An external tool wrapper can replace this handler in deployment.
        return {"violations": stub.stub_grammar_violations(text)}

    return handle


_FACTORIES: dict[str, Callable[[AdapterConfig], Handler]] = {
    "victim": victim_handler,
    "synonym": synonym_handler,
    "encoder": encoder_handler,
    "grammar": grammar_handler,
}


def build_routes(config: AdapterConfig) -> dict[str, Handler]:
    return {f"/{name}": _FACTORIES[name](config) for name in config.protocols}


def serve(config: AdapterConfig):
    """Run the configured services; blocks. Returns the server in HTTP mode
    (callers embedding the adapter can instead use build_routes directly)."""
    routes = build_routes(config)
    if config.stdio:
        (handler,) = routes.values()
        stdio_loop(handler)
        return None
    server = http_server(routes, config.host, config.port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
    return server
