from __future__ import annotations

import argparse
import sys

from .config import PROTOCOLS, AdapterConfig
from .server import build_routes, serve
from .wire import http_server


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="model-adapter",
        description="Serve the victim/synonym/encoder/grammar wire protocols",
    )
    parser.add_argument("--serve", nargs="+", default=list(PROTOCOLS), choices=PROTOCOLS,
                        metavar="PROTOCOL", help=f"protocols to serve ({', '.join(PROTOCOLS)})")
    parser.add_argument("--mode", default="stub", choices=["stub", "real"])
    parser.add_argument("--mlm-model", default="bert-base-uncased")
    parser.add_argument("--encoder-model", default="sentence-transformers/all-MiniLM-L6-v2")
    parser.add_argument("--victim-entrypoint", default=None,
                        help="module:function scoring victim requests (checkpoint harness)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8400)
    parser.add_argument("--stdio", action="store_true",
                        help="serve one protocol as newline-delimited JSON on stdio")
    args = parser.parse_args(argv)

    config = AdapterConfig(
        protocols=tuple(args.serve), mode=args.mode, mlm_model=args.mlm_model,
        encoder_model=args.encoder_model, victim_entrypoint=args.victim_entrypoint,
        device=args.device, host=args.host, port=args.port, stdio=args.stdio,
    )
    if config.stdio:
        serve(config)
        return 0
    server = http_server(build_routes(config), config.host, config.port)
    host, port = server.server_address[:2]
    routes = ", ".join(f"http://{host}:{port}/{p}" for p in config.protocols)
    print(f"model-adapter ({config.mode}) serving {routes}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
