"""Command line: `python -m prune_adapter serve [flags]`."""
from __future__ import annotations

import argparse

from .config import AdapterConfig
from .serve import serve


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="prune-oracle-adapter")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("serve", help="answer the oracle protocol on stdio")
    sp.add_argument("--model", default="tiny", help="tiny | small")
    sp.add_argument("--dataset", default="synthetic", help="synthetic | cifar10")
    sp.add_argument("--proxy-size", type=int, default=1024)
    sp.add_argument("--heldout-size", type=int, default=8000)
    sp.add_argument("--device", default="cpu")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--fine-tune", action="store_true")
    sp.add_argument("--epochs", type=int, default=3)
    sp.add_argument("--batch-size", type=int, default=16)
    sp.add_argument("--calibration-batches", type=int, default=4)
    sp.add_argument("--data-root", default="./data")
    sp.add_argument("--record", default=None, metavar="TRANSCRIPT",
                    help="append a .jsonl transcript of the session")

    args = parser.parse_args(argv)
    config = AdapterConfig(
        model=args.model,
        dataset=args.dataset,
        proxy_size=args.proxy_size,
        heldout_size=args.heldout_size,
        device=args.device,
        seed=args.seed,
        fine_tune=args.fine_tune,
        epochs=args.epochs,
        batch_size=args.batch_size,
        calibration_batches=args.calibration_batches,
        data_root=args.data_root,
    )
    serve(config, record_path=args.record)


if __name__ == "__main__":
    main()
