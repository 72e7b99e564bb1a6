"""Command-line entry point.

Subcommands::

    mgclust train              --dataset DIR --config FILE --out DIR [--seeds SPEC] [--force]
    mgclust ablate             --dataset DIR --config FILE --out DIR --variant V [--seeds SPEC] [--force]
    mgclust gradcheck          [--seed N] [--corrupt]
    mgclust export-embeddings  --checkpoint BASE --dataset DIR --out FILE

Seed specs are a single integer, a comma list (``0,1,2``), or an inclusive
range (``0..4``). Ablation variants: ``no_con``, ``no_clu``, ``drop_layer:i``,
``drop_view:i`` (the last two are synonyms here: a layer couples one adjacency
with one attribute view, so either removes the indexed pair).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .data import drop_layer, load_multilayer_graph
from .errors import DatasetError, NumericalError
from .gradcheck import run_gradient_checks
from .losses import FusionWeights
from .metrics import clustering_report
from .model import load_checkpoint, save_checkpoint
from .training import TrainConfig, train, write_history_csv, write_labels_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

METRIC_KEYS = ("acc", "f1", "nmi", "ari")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_seed_spec(spec):
    spec = spec.strip()
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        seeds = list(range(int(lo), int(hi) + 1))
    elif "," in spec:
        seeds = [int(s) for s in spec.split(",") if s.strip()]
    else:
        seeds = [int(spec)]
    if not seeds:
        raise ValueError(f"empty seed spec: {spec!r}")
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"duplicate seeds in spec: {spec!r}")
    return seeds


def _prepare_out_dir(out_dir, force):
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise ValueError(f"output directory {out_dir} is not empty (use --force to overwrite)")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _apply_variant(g, config, variant):
    if variant is None:
        return g, config
    if variant in ("no_con", "no_clu"):
        return g, TrainConfig.from_dict({**config.to_dict(), "ablation": variant})
    for prefix in ("drop_layer:", "drop_view:"):
        if variant.startswith(prefix):
            idx = int(variant[len(prefix):])
            beta = list(config.beta)
            if not 0 <= idx < len(beta):
                raise ValueError(f"variant index {idx} out of range for {len(beta)} views")
            del beta[idx]
            return drop_layer(g, idx), TrainConfig.from_dict({**config.to_dict(), "beta": beta})
    raise ValueError(f"unknown variant: {variant!r}")


def _run_seeds(g, config, out_dir, seeds, dataset_path, variant=None):
    out_dir.joinpath("run_config.json").write_text(json.dumps({
        "dataset": str(dataset_path),
        "variant": variant,
        "seeds": seeds,
        "config": config.to_dict(),
    }, indent=2, sort_keys=True) + "\n")

    per_seed = {}
    for seed in seeds:
        run_config = TrainConfig.from_dict({**config.to_dict(), "seed": seed})
        model = train(g, run_config)
        seed_dir = out_dir / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        write_labels_csv(seed_dir / "labels.csv", model.labels)
        write_history_csv(seed_dir / "history.csv", model.history)
        save_checkpoint(seed_dir / "checkpoint", model.encoder_state,
                        centroids=model.centroids, config=run_config.to_dict())
        if g.labels is not None:
            scores = clustering_report(model.labels, g.labels)
        else:
            scores = {k: None for k in METRIC_KEYS}
        per_seed[seed] = scores
        (seed_dir / "metrics.json").write_text(json.dumps(scores, indent=2, sort_keys=True) + "\n")
        shown = {k: (round(v, 4) if v is not None else None) for k, v in scores.items()}
        print(f"seed {seed}: {shown}")

    aggregate = {}
    for key in METRIC_KEYS:
        values = {str(seed): per_seed[seed][key] for seed in seeds}
        if any(v is None for v in values.values()):
            aggregate[key] = None
        else:
            aggregate[key] = {"mean": sum(values.values()) / len(values), "per_seed": values}
    out_dir.joinpath("metrics.json").write_text(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_train(args):
    config = TrainConfig.from_json(args.config)
    g = load_multilayer_graph(args.dataset)
    g2, config2 = _apply_variant(g, config, getattr(args, "variant", None))
    seeds = parse_seed_spec(args.seeds) if args.seeds else [config2.seed]
    out_dir = _prepare_out_dir(args.out, args.force)
    return _run_seeds(g2, config2, out_dir, seeds, args.dataset,
                      variant=getattr(args, "variant", None))


def cmd_gradcheck(args):
    reports = run_gradient_checks(seed=args.seed, corrupt=args.corrupt)
    ok = True
    for report in reports:
        status = "PASS" if report["ok"] else "FAIL"
        print(f"{report['term']:<15} max_rel_err={report['max_rel_err']:.3e}  {status}")
        ok = ok and report["ok"]
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_export_embeddings(args):
    state, centroids, config_dict = load_checkpoint(args.checkpoint)
    if config_dict is None:
        raise ValueError("checkpoint carries no config; cannot rebuild the forward pass")
    config = TrainConfig.from_dict(config_dict)
    g = load_multilayer_graph(args.dataset)

    from . import losses as lo
    from . import model as md
    from .autodiff import Tape
    from .training import _Prepared

    prepared = _Prepared(g)
    tape = Tape()
    for p in state.parameters():
        tape.adopt(p)
    zs = md.encode(tape, prepared.x_views, prepared.layers, state)
    fused = lo.fuse(zs, FusionWeights(config.beta)).data

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        header = [f"z{j}" for j in range(fused.shape[1])]
        if g.labels is not None:
            header.append("label")
        fh.write(",".join(header) + "\n")
        for i in range(fused.shape[0]):
            cells = [repr(float(v)) for v in fused[i]]
            if g.labels is not None:
                cells.append(str(int(g.labels[i])))
            fh.write(",".join(cells) + "\n")
    print(f"wrote {fused.shape[0]} x {fused.shape[1]} embedding to {out}")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="mgclust", description="Multilayer graph clustering")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_args(p, with_variant):
        p.add_argument("--dataset", required=True, help="dataset directory (manifest.json inside)")
        p.add_argument("--config", required=True, help="JSON training config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seeds", default=None, help="seed spec: N, N,M,..., or LO..HI")
        p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
        if with_variant:
            p.add_argument("--variant", required=True,
                           help="no_con | no_clu | drop_layer:i | drop_view:i")

    p_train = sub.add_parser("train", help="train and write labels, metrics, history, checkpoint")
    add_run_args(p_train, with_variant=False)
    p_train.set_defaults(func=cmd_train)

    p_ablate = sub.add_parser("ablate", help="train a modified variant of the model or data")
    add_run_args(p_ablate, with_variant=True)
    p_ablate.set_defaults(func=cmd_train)

    p_grad = sub.add_parser("gradcheck", help="finite-difference check of all loss gradients")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_exp = sub.add_parser("export-embeddings", help="write the fused embedding of a checkpoint")
    p_exp.add_argument("--checkpoint", required=True, help="checkpoint base path (or its .json)")
    p_exp.add_argument("--dataset", required=True)
    p_exp.add_argument("--out", required=True, help="output CSV path")
    p_exp.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
