"""``neurozip`` command line: generate, train, eval, gradcheck.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import autodiff
from .checkpoint import Checkpoint
from .data import (DEFAULT_COUNTS, SCENARIOS, GeneratorConfig, generate_dataset, load_dataset,
                   manifest_hash, save_dataset)
from .errors import NeuroZipError, UsageError
from .evaluation import emit_comparison, evaluate
from .fixtures import FIXTURES, get_fixture
from .optimizer import TrainConfig
from .pipeline import fit, gradient_check, split_from_checkpoint

log = logging.getLogger("neurozip")

GRADCHECK_TOL = 1e-4
SUBSETS = ("train", "val", "test", "all")


class _Usage(UsageError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(f"{self.prog}: {message}")


def _mode(text):
    return text.replace("-", "_")


def _hidden(text):
    """``WxD``: D hidden layers of W units each."""
    try:
        width, depth = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxD such as 20x4, got {text!r}") from None
    if width < 1 or depth < 1:
        raise argparse.ArgumentTypeError("width and depth must be positive")
    return (width,) * depth


def _split(text):
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated ratios, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated ratios, got {text!r}")
    return parts


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neurozip", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic trajectory dataset")
    g.add_argument("--out", required=True, type=Path, help="output directory")
    g.add_argument("--fixture", choices=sorted(FIXTURES), help="start from a bundled fixture recipe")
    g.add_argument("--scenario", choices=("all",) + SCENARIOS, default=None,
                   help="scenario to generate (default: all three)")
    g.add_argument("--n", type=int, default=None,
                   help="trajectories per scenario (default: 20/50/50 by scenario)")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--noise-std", type=float, default=None)
    g.add_argument("--duration", type=float, default=None, help="record length in seconds")

    t = sub.add_parser("train", help="split, train and save a checkpoint")
    t.add_argument("--data", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path, help="checkpoint path")
    t.add_argument("--fixture", choices=sorted(FIXTURES),
                   help="use a bundled fixture's training recipe as the defaults")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--qg", type=float, dest="q_g")
    t.add_argument("--qh", type=float, dest="q_h")
    t.add_argument("--norm", choices=("l1", "l2"))
    t.add_argument("--mode", choices=("zip-only", "neural-only", "neuro-zip"))
    t.add_argument("--activation", choices=("tanh", "relu"))
    t.add_argument("--hidden", type=_hidden, help="WxD, e.g. 20x4")
    t.add_argument("--split", type=_split, help="train,val,test ratios, e.g. 0.6,0.2,0.2")
    t.add_argument("--patience", type=int)
    t.add_argument("--batch-size", type=int, dest="batch_size",
                   help="trajectories per step (default: full batch)")
    t.add_argument("--report", type=Path, help="also write the key-value test report here")

    e = sub.add_parser("eval", help="score a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True, type=Path)
    e.add_argument("--data", required=True, type=Path)
    e.add_argument("--mode", choices=("zip-only", "neural-only", "neuro-zip"),
                   help="default: the mode the checkpoint was trained in")
    e.add_argument("--subset", choices=SUBSETS, default="test",
                   help="split recorded in the checkpoint, or all trajectories")
    e.add_argument("--out", type=Path, help="directory for report.txt and comparison CSVs")
    e.add_argument("--emit-trajectory", action="append", default=[], metavar="ID",
                   help="write the t,p_ref,q_ref,p_zip,q_zip,p_fit,q_fit trace of one trajectory")

    c = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    c.add_argument("--data", type=Path, help="dataset (default: the bundled gradcheck fixture)")
    c.add_argument("--max-trajectories", type=int, default=10)
    c.add_argument("--epsilon", type=float, default=1e-5)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--mode", choices=("zip-only", "neural-only", "neuro-zip"), default="neuro-zip")
    c.add_argument("--activation", choices=("tanh", "relu"), default="tanh")
    c.add_argument("--hidden", type=_hidden, default=(20, 20, 20, 20))
    c.add_argument("--corrupt-op", help=argparse.SUPPRESS)
    return parser


def _generator_config(args) -> GeneratorConfig:
    base = get_fixture(args.fixture).generator if args.fixture else GeneratorConfig()
    changes = {}
    if args.scenario is not None or args.n is not None:
        scenario = args.scenario or "all"
        names = SCENARIOS if scenario == "all" else (scenario,)
        if args.n is None:
            counts = {s: base.counts.get(s, DEFAULT_COUNTS[s]) for s in names}
        else:
            counts = {s: args.n for s in names}
        changes["counts"] = counts
    for flag, name in (("seed", "seed"), ("noise_std", "noise_std"), ("duration", "duration")):
        if getattr(args, flag) is not None:
            changes[name] = getattr(args, flag)
    return dataclasses.replace(base, **changes).validate()


def cmd_generate(args) -> int:
    if args.n is not None and args.n < 1:
        raise _Usage(f"--n must be at least 1, got {args.n}")
    cfg = _generator_config(args)
    trajectories = generate_dataset(cfg)
    save_dataset(trajectories, args.out, cfg)
    for scenario in SCENARIOS:
        n = sum(tr.scenario == scenario for tr in trajectories)
        if n:
            print(f"{scenario}: {n} trajectories")
    print(f"wrote {len(trajectories)} trajectories to {args.out}")
    return 0


_TRAIN_FLAGS = ("seed", "epochs", "lr", "q_g", "q_h", "patience", "activation", "hidden",
                "split", "batch_size")


def _train_config(args) -> TrainConfig:
    base = get_fixture(args.fixture).train if args.fixture else TrainConfig()
    changes = {k: getattr(args, k) for k in _TRAIN_FLAGS if getattr(args, k) is not None}
    if args.norm is not None:
        changes["norm_l"] = 1 if args.norm == "l1" else 2
    if args.mode is not None:
        changes["mode"] = _mode(args.mode)
    return dataclasses.replace(base, **changes).validate()


def _print_zip(zip):
    print("alpha=(%r, %r, %r) beta=(%r, %r, %r)" % tuple(float(x) for x in zip.alpha + zip.beta))


def cmd_train(args) -> int:
    cfg = _train_config(args)
    trajectories = load_dataset(args.data)
    outcome = fit(trajectories, cfg)
    outcome.checkpoint.save(args.out)
    res = outcome.result
    print(f"epochs_run={res.epochs_run} best_epoch={res.best_epoch} best_val_loss={res.best_val_loss!r}")
    _print_zip(outcome.checkpoint.zip)
    print(outcome.report.metric_line())
    if args.report:
        outcome.report.write(args.report)
    print(f"checkpoint written to {args.out}")
    return 0


def _select(checkpoint, trajectories, subset):
    if subset == "all":
        return trajectories
    wanted = checkpoint.split.get(subset, [])
    chosen = split_from_checkpoint(checkpoint, trajectories, subset)
    if len(chosen) != len(wanted):
        missing = sorted(set(wanted) - {t.id for t in chosen})
        raise _Usage(f"dataset lacks {len(missing)} {subset} trajectories recorded in the "
                     f"checkpoint (e.g. {missing[0]}); pass --subset all to score every trajectory")
    if not chosen:
        raise _Usage(f"the checkpoint's {subset} split is empty")
    return chosen


def cmd_eval(args) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    trajectories = load_dataset(args.data)
    by_id = {t.id: t for t in trajectories}
    unknown = [i for i in args.emit_trajectory if i not in by_id]
    if unknown:
        raise _Usage(f"unknown trajectory id {unknown[0]!r}")
    if checkpoint.manifest_hash and manifest_hash(trajectories) != checkpoint.manifest_hash:
        log.warning("dataset differs from the one the checkpoint was trained on")

    mode = _mode(args.mode) if args.mode else checkpoint.config.mode
    report = evaluate(checkpoint, _select(checkpoint, trajectories, args.subset), mode,
                      subset=args.subset)
    print(report.metric_line())
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        report.write(args.out / f"report_{mode}_{args.subset}.txt")
    for tid in args.emit_trajectory:
        directory = args.out or Path(".")
        path = emit_comparison(checkpoint, by_id[tid], directory / f"comparison_{tid}_{mode}.csv", mode)
        print(f"comparison written to {path}")
    return 0


def cmd_gradcheck(args) -> int:
    if args.max_trajectories < 1:
        raise _Usage("--max-trajectories must be at least 1")
    if args.data is None:
        trajectories = get_fixture("gradcheck").dataset()
    else:
        trajectories = load_dataset(args.data)
    trajectories = trajectories[:args.max_trajectories]
    cfg = TrainConfig(seed=args.seed, mode=_mode(args.mode), activation=args.activation,
                      hidden=args.hidden).validate()
    if args.corrupt_op:
        with autodiff.corrupted(args.corrupt_op):
            errors = gradient_check(trajectories, cfg, args.epsilon)
    else:
        errors = gradient_check(trajectories, cfg, args.epsilon)
    worst = max(errors, key=errors.get)
    error = errors[worst]
    ok = error < GRADCHECK_TOL
    print(f"trajectories={len(trajectories)} epsilon={args.epsilon!r} "
          f"max_relative_error={error!r} worst={worst} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval,
            "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NeuroZipError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
