from __future__ import annotations

from dataclasses import dataclass, field

PROTOCOLS = ("victim", "synonym", "encoder", "grammar")
PROTOCOL_VERSION = "1"


@dataclass(frozen=True)
class AdapterConfig:
    """What to serve and with which models.

    ``mode`` selects stub (deterministic, no model downloads) or real
    (pretrained transformers). ``victim_entrypoint`` names a
    ``module:function`` mapping a victim request dict to 100 scores, the
    integration point for a trained checkpoint harness; the stub victim is
    used when it is unset in stub mode.
    """

    protocols: tuple[str, ...] = PROTOCOLS
    mode: str = "stub"  # stub | real
    mlm_model: str = "bert-base-uncased"
    encoder_model: str = "sentence-transformers/all-MiniLM-L6-v2"
    victim_entrypoint: str | None = None
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8400
    stdio: bool = False

    def __post_init__(self):
        unknown = set(self.protocols) - set(PROTOCOLS)
        if unknown:
            raise ValueError(f"unknown protocol(s) {sorted(unknown)}; options: {PROTOCOLS}")
        if self.mode not in ("stub", "real"):
            raise ValueError(f"mode must be stub or real, not {self.mode!r}")
        if self.stdio and len(self.protocols) != 1:
            raise ValueError("stdio mode serves exactly one protocol per process")
