"""Serve a fine-tuned checkpoint behind the segmentation wire protocol."""

from __future__ import annotations

import argparse


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="medsam-adapter")
    parser.add_argument("--checkpoint", required=True, help="Path to the fine-tuned checkpoint")
    parser.add_argument("--device", default="cpu", help="torch device (cpu, cuda, cuda:0, ...)")
    parser.add_argument("--model-type", default="vit_b", help="SAM backbone registry key")
    parser.add_argument("--capacity", type=int, default=20, help="Prompt slot count (1..50)")
    parser.add_argument("--no-prior", action="store_true", help="Reject prior-mask prompts")
    parser.add_argument("--port", type=int, default=8760)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)

    import uvicorn

    from .app import AdapterConfig, create_app
    from .engine import CheckpointEngine

    app = create_app(None, AdapterConfig(capacity=args.capacity, supports_prior_mask=not args.no_prior))
    # expose /v1/health in "loading" state while the checkpoint comes up
    app.state.engine = CheckpointEngine(args.checkpoint, device=args.device, model_type=args.model_type)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
