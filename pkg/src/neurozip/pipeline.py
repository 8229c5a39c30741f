"""Split, train, evaluate and package the result as a checkpoint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import gradient_errors
from .checkpoint import Checkpoint
from .data import Batch, manifest_hash, split_dataset
from .evaluation import EvalReport, evaluate
from .models import pack, unpack
from .optimizer import TrainConfig, TrainResult, init_parameters, train
from .problem import total_loss


@dataclass
class FitOutcome:
    checkpoint: Checkpoint
    result: TrainResult
    report: EvalReport
    splits: tuple


def fit(trajectories, cfg: TrainConfig | None = None) -> FitOutcome:
    """Train on the seeded split and score the selected parameters on the test split.

    When the test split is empty the validation split is scored instead; the
    report's ``subset`` says which one was used.
    """
    cfg = (cfg or TrainConfig()).validate()
    trajectories = list(trajectories)
    train_set, val_set, test_set = split_dataset(trajectories, cfg.split, cfg.seed)
    result = train(train_set, val_set, cfg)
    checkpoint = Checkpoint(
        config=cfg,
        zip=result.zip,
        mix=result.mix,
        mlp=result.mlp,
        history=result.summary(),
        manifest_hash=manifest_hash(trajectories),
        split={"train": [t.id for t in train_set], "val": [t.id for t in val_set],
               "test": [t.id for t in test_set]},
    )
    subset, scored = ("test", test_set) if test_set else ("val", val_set)
    report = evaluate(checkpoint, scored, cfg.mode, subset=subset)
    checkpoint.metrics = report.summary()
    return FitOutcome(checkpoint, result, report, (train_set, val_set, test_set))


def split_from_checkpoint(checkpoint: Checkpoint, trajectories, subset="test"):
    """Recover one split of ``trajectories`` from the ids stored in ``checkpoint``."""
    by_id = {t.id: t for t in trajectories}
    return [by_id[i] for i in checkpoint.split.get(subset, []) if i in by_id]


def gradcheck_problem(trajectories, cfg: TrainConfig | None = None, jitter=0.05):
    """Full training loss as ``fn(tape, leaves)`` plus the point to check it at.

    The point is the seeded initialisation with the ZIP fractions and mixing
    weights nudged off their initial values, so the equality penalties are
    active rather than sitting on their kinks.
    """
    cfg = (cfg or TrainConfig()).validate()
    batch = Batch.from_trajectories(trajectories, cfg.feature_mode)
    params = pack(*init_parameters(cfg))
    rng = np.random.default_rng([cfg.seed, 1])
    for name, value in params.items():
        if name.startswith(("zip.", "mix.")):
            params[name] = value + rng.uniform(-jitter, jitter, size=np.shape(value))

    def loss(tape, leaves):
        return total_loss(batch, unpack(leaves, cfg.activation), cfg.penalty(), cfg.mode,
                          cfg.reduction)

    return loss, params


def gradient_check(trajectories, cfg: TrainConfig | None = None, epsilon=1e-5) -> dict[str, float]:
    """Relative analytic-vs-finite-difference error per named parameter."""
    fn, params = gradcheck_problem(trajectories, cfg)
    return gradient_errors(fn, params, epsilon)
