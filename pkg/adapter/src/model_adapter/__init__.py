"""Reference services for the dialattack wire protocols.

Serves any subset of the four protocols (victim, synonym, encoder, grammar)
over HTTP or stdio. Stub mode is fully deterministic and dependency-light so
protocol clients can run their conformance suites offline; real mode wires
pretrained transformer models behind the same endpoints.
"""

from .config import AdapterConfig
from .server import build_routes, serve

__version__ = "0.1.0"
