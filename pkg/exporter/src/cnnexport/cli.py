"""Exporter entry points: fetch-mnist, export-model, make-fixtures."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import torch

from .export import ExportError, export_model
from .fixtures import make_fixtures, slice_training_set
from .lenet import LeNet5, evaluate, load_split, train
from .mnist_fetch import FetchError, fetch_mnist


def cmd_fetch(args) -> int:
    fetch_mnist(args.dest, mirrors=args.mirror or None)
    return 0


def cmd_export(args) -> int:
    data = Path(args.data_dir)
    train_images, train_labels = load_split(
        data / "train-images-idx3-ubyte", data / "train-labels-idx1-ubyte"
    )
    test_images, test_labels = load_split(
        data / "t10k-images-idx3-ubyte", data / "t10k-labels-idx1-ubyte"
    )
    checkpoint = Path(args.checkpoint)
    training_info = None
    if checkpoint.exists():
        model = LeNet5()
        model.load_state_dict(torch.load(checkpoint, weights_only=True))
        print(f"loaded checkpoint {checkpoint}")
    elif args.train_if_missing:
        print(f"no checkpoint at {checkpoint}; training "
              f"(epochs={args.epochs}, seed={args.seed})")
        model = train(train_images, train_labels, test_images, test_labels,
                      epochs=args.epochs, seed=args.seed)
        checkpoint.parent.mkdir(parents=True, exist_ok=True)
        torch.save(model.state_dict(), checkpoint)
        training_info = {"epochs": args.epochs, "seed": args.seed,
                         "optimizer": "adam", "batch_size": 128,
                         "recipe": "lr 1e-3, step 0.2 at epoch 5"}
    else:
        print(f"error: checkpoint {checkpoint} not found "
              f"(pass --train-if-missing to train one)", file=sys.stderr)
        return 1
    accuracy = evaluate(model, test_images, test_labels)
    print(f"source-framework top-1 accuracy: {accuracy:.4f}")
    manifest = export_model(model, args.out, name=args.name,
                            test_images=test_images, test_labels=test_labels,
                            training_info=training_info)
    print(f"exported bundle '{manifest['model']}' to {args.out} "
          f"({len(manifest['tensors'])} tensors)")
    return 0


def cmd_fixtures(args) -> int:
    make_fixtures(args.out, seed=args.seed)
    if args.train_slice:
        slice_training_set(args.data_dir, args.out_mnist or args.out,
                           count=args.train_slice)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cnnexport")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch-mnist", help="download + verify the MNIST IDX files")
    p.add_argument("--dest", required=True)
    p.add_argument("--mirror", action="append", help="override mirror URL(s)")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("export-model", help="export a LeNet-5 checkpoint as a bundle")
    p.add_argument("--data-dir", required=True, help="directory with the IDX files")
    p.add_argument("--checkpoint", required=True, help="state-dict path (.pt)")
    p.add_argument("--train-if-missing", action="store_true")
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--name", default="lenet5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("make-fixtures", help="tiny deterministic bundles (+ train slice)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--train-slice", type=int, default=0,
                   help="also write an N-image training-slice IDX pair")
    p.add_argument("--data-dir", help="IDX directory (needed for --train-slice)")
    p.add_argument("--out-mnist", help="destination for the slice (default --out)")
    p.set_defaults(func=cmd_fixtures)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ExportError, FetchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
