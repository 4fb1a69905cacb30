"""`oracle-serve` entry point."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import create_app
from .models import build_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oracle-serve",
        description="Serve CNN classification and Grad-CAM heatmaps over HTTP.",
    )
    parser.add_argument("--model", default="tinycnn",
                        choices=["tinycnn", "resnet34", "vgg19"])
    parser.add_argument("--weights", default=None,
                        help="checkpoint path (default: bundled tinycnn weights)")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--gradcam-layer", default=None,
                        help="dotted module path override for the hooked layer")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = build_model(args.model, args.weights)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: cannot load model: {exc}", file=sys.stderr)
        return 1
    app = create_app(spec, gradcam_layer=args.gradcam_layer)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
