"""Command line entry point: gen-data, train, attack, ablate, serve-stub."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .de import DeParams
from .gsa import GsaParams
from .harness import CampaignConfig, ConfigurationError, run_ablation, run_campaign
from .models.remote import StubServer
from .models.shapes import DEFAULT_JITTER, export_dataset, generate_shapes_dataset, import_dataset
from .models.tiny import TinyClassifier, train
from .strmask import StrAttackParams

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _campaign_args(p: argparse.ArgumentParser, with_method: bool = True):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="TNN1 weights file to attack in-process")
    src.add_argument("--endpoint", help="scoring server URL")
    p.add_argument("--surrogate", help="white-box weights for the mask (default: --model)")
    p.add_argument("--data", required=True, help="dataset directory (PNGs + labels.csv)")
    p.add_argument("--out", required=True, help="output directory")
    if with_method:
        p.add_argument("--method", choices=["gsa", "de"], default="gsa")
        p.add_argument("--init", choices=["random", "mask"], default="random")
    p.add_argument("--pixels", type=int, default=25)
    p.add_argument("--budget", type=int, default=15000)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--popsize", type=int, default=DeParams.popsize)
    p.add_argument("--restart-ratio", type=float, default=GsaParams.restart_ratio)
    p.add_argument("--mask-cost", type=int, default=StrAttackParams.call_cost)
    p.add_argument("--no-annotate", action="store_true")


def _config(a) -> CampaignConfig:
    return CampaignConfig(
        method=getattr(a, "method", "gsa"), init=getattr(a, "init", "random"),
        pixels=a.pixels, budget=a.budget, count=a.count, seed=a.seed, workers=a.workers,
        model_path=a.model, endpoint=a.endpoint, surrogate_path=a.surrogate,
        data_dir=a.data, out_dir=a.out, annotate=not a.no_annotate,
        gsa=GsaParams(restart_ratio=a.restart_ratio), de=DeParams(popsize=a.popsize),
        strattack=StrAttackParams(call_cost=a.mask_cost))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fewpixel", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic shapes dataset")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=int, default=DEFAULT_JITTER)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the tiny classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--test-data")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.003)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    _campaign_args(sub.add_parser("attack", help="run an attack campaign"))
    _campaign_args(sub.add_parser("ablate", help="random vs mask initialization"), False)

    p = sub.add_parser("serve-stub", help="serve a weights file over the scoring protocol")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if a.command == "gen-data":
            images, labels = generate_shapes_dataset(a.count, a.seed, a.jitter)
            export_dataset(images, labels, a.out)
            return EXIT_OK
        if a.command == "train":
            images, labels = import_dataset(a.data)
            test = import_dataset(a.test_data) if a.test_data else None
            model, rep = train(images, labels, epochs=a.epochs, lr=a.lr, seed=a.seed, test=test)
            model.save(a.out)
            print(json.dumps({"train_accuracy": rep.train_accuracy,
                              "test_accuracy": rep.test_accuracy}))
            return EXIT_OK
        if a.command == "attack":
            rep = run_campaign(_config(a))
            print(json.dumps(rep.metrics, sort_keys=True))
            return EXIT_PARTIAL if rep.errored else EXIT_OK
        if a.command == "ablate":
            ab = run_ablation(_config(a))
            print(ab.table(), end="")
            return EXIT_PARTIAL if ab.random.errored or ab.mask.errored else EXIT_OK
        if a.command == "serve-stub":
            server = StubServer(TinyClassifier.load(a.model), a.host, a.port)
            logging.info("serving on %s", server.url)
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                pass
            return EXIT_OK
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"fewpixel: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
