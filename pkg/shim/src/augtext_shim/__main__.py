"""Run the sidecar: python -m augtext_shim --mlm toy-tiny --port 8401"""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import TOY_MLM_FAMILY, ShimConfig


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="augtext-shim")
    parser.add_argument(
        "--mlm", default="toy-tiny",
        help=f"fill-mask model: one of {sorted(TOY_MLM_FAMILY)} or a checkpoint name",
    )
    parser.add_argument("--encoder", default="toy",
                        help='"toy" or a 384-dim sentence-encoder checkpoint')
    parser.add_argument("--translator", default="toy",
                        help='"toy" or "marian" for Helsinki-NLP opus-mt pairs')
    parser.add_argument("--src", default="en")
    parser.add_argument("--tgt", default="tr")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8401)
    args = parser.parse_args(argv)

    config = ShimConfig(
        mlm_model=args.mlm,
        encoder_model=args.encoder,
        translator_model=args.translator,
        src_lang=args.src,
        tgt_lang=args.tgt,
        host=args.host,
        port=args.port,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
