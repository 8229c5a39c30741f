"""AdamW updates and the validation-selected training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Tape, backward
from .data import Batch
from .errors import ConfigError, ContractError, DivergenceError
from .models import (ACTIVATIONS, FEATURE_MODES, MixingWeights, ZipParams, init_mlp,
                     is_weight_matrix, pack, unpack)
from .problem import MODES, REDUCTIONS, PenaltyConfig, total_loss, violation_metric

log = logging.getLogger(__name__)


@dataclass
class AdamWState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("moment decay rates must lie in [0, 1)")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


def adamw_step(state: AdamWState, params: dict, grads: dict,
               decay_mask: Callable[[str], bool] = is_weight_matrix):
    """One AdamW update of every parameter that has an entry in ``grads``.

    Decoupled decay ``lr * weight_decay * param`` is applied only where
    ``decay_mask(name)`` is true (network weight matrices by default).
    Returns ``(new_params, new_state)``; inputs are left untouched.
    """
    step = state.step_count + 1
    new = AdamWState(state.lr, state.beta1, state.beta2, state.eps, state.weight_decay,
                     step, dict(state.m), dict(state.v))
    out = dict(params)
    c1 = 1.0 - state.beta1 ** step
    c2 = 1.0 - state.beta2 ** step
    for name, g in grads.items():
        p = params[name]
        if np.shape(g) != np.shape(p):
            raise ContractError(f"{name}: gradient shape {np.shape(g)} != parameter shape {np.shape(p)}")
        m = state.beta1 * state.m.get(name, 0.0) + (1.0 - state.beta1) * g
        v = state.beta2 * state.v.get(name, 0.0) + (1.0 - state.beta2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay and decay_mask(name):
            update = update + state.weight_decay * p
        out[name] = p - state.lr * update
        new.m[name], new.v[name] = m, v
    return out, new


@dataclass
class TrainConfig:
    epochs: int = 2000
    lr: float = 0.01
    q_g: float = 1.0
    q_h: float = 1.0
    norm_l: int = 1
    seed: int = 0
    patience: int = 200
    batch_size: int | None = None  # trajectories per step; None = full batch
    activation: str = "tanh"
    hidden: tuple = (20, 20, 20, 20)
    mode: str = "neuro_zip"
    feature_mode: str = "relative"
    split: tuple = (0.6, 0.2, 0.2)
    # squared residuals summed over trajectories and time; "mean" and
    # "trajectory" (mean over trajectories of per-trajectory sums) also exist
    reduction: str = "sum"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.split = tuple(float(r) for r in self.split)

    def validate(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"unknown feature mode {self.feature_mode!r}")
        if self.reduction not in REDUCTIONS:
            raise ConfigError(f"unknown reduction {self.reduction!r}")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError("hidden layers must have at least one unit each")
        self.penalty()
        return self

    def penalty(self) -> PenaltyConfig:
        return PenaltyConfig(self.q_g, self.q_h, self.norm_l)


def init_parameters(cfg: TrainConfig):
    """Feasible start: equal ZIP fractions, a = b = 0.5, seeded network.

    In the single-branch modes the mixing weights are pinned to their
    endpoint (1 for ``zip_only``, 0 for ``neural_only``).
    """
    rng = np.random.default_rng(cfg.seed)
    zip = ZipParams(1 / 3, 1 / 3, 1 / 3, 1 / 3, 1 / 3, 1 / 3)
    mix = {"zip_only": MixingWeights(1.0, 1.0),
           "neural_only": MixingWeights(0.0, 0.0)}.get(cfg.mode, MixingWeights(0.5, 0.5))
    mlp = init_mlp(rng, cfg.hidden, cfg.activation)
    return zip, mix, mlp


def trainable_names(params: dict, mode: str) -> list[str]:
    if mode == "zip_only":
        return [n for n in params if n.startswith("zip.")]
    if mode == "neural_only":
        return [n for n in params if n.startswith("mlp.")]
    return list(params)


def loss_and_grads(params: dict, names, batch: Batch, cfg: TrainConfig):
    tape = Tape()
    leaves = {n: (tape.param(v, name=n) if n in names else v) for n, v in params.items()}
    loss = total_loss(batch, unpack(leaves, cfg.activation), cfg.penalty(), cfg.mode, cfg.reduction)
    grads = backward(loss)
    return loss.item(), {n: grads[leaves[n]] for n in names}


def loss_value(params: dict, batch: Batch, cfg: TrainConfig) -> float:
    return float(total_loss(batch, unpack(params, cfg.activation), cfg.penalty(), cfg.mode,
                            cfg.reduction))


@dataclass
class TrainResult:
    zip: ZipParams
    mix: MixingWeights
    mlp: object
    history: dict
    best_epoch: int
    best_val_loss: float
    epochs_run: int

    @property
    def params(self):
        return self.zip, self.mix, self.mlp

    def summary(self) -> dict:
        h = self.history
        return {"epochs_run": self.epochs_run, "best_epoch": self.best_epoch,
                "best_val_loss": self.best_val_loss,
                "final_train_loss": h["train_loss"][-1], "final_val_loss": h["val_loss"][-1]}


def _norms(params):
    return {n: float(np.linalg.norm(v)) for n, v in params.items()}


def _minibatches(trajectories, cfg: TrainConfig, epoch: int):
    if cfg.batch_size is None or cfg.batch_size >= len(trajectories):
        return None
    order = np.random.default_rng([cfg.seed, epoch]).permutation(len(trajectories))
    chunks = [order[i:i + cfg.batch_size] for i in range(0, len(order), cfg.batch_size)]
    return [Batch.from_trajectories([trajectories[i] for i in c], cfg.feature_mode) for c in chunks]


def train(train_set, val_set, cfg: TrainConfig | None = None) -> TrainResult:
    """Gradient descent on the penalised loss; keeps the best-validation parameters."""
    cfg = (cfg or TrainConfig()).validate()
    if not train_set or not val_set:
        raise ContractError("train and validation splits must be nonempty")
    train_set, val_set = list(train_set), list(val_set)
    full_batch = Batch.from_trajectories(train_set, cfg.feature_mode)
    val_batch = Batch.from_trajectories(val_set, cfg.feature_mode)

    params = pack(*init_parameters(cfg))
    names = trainable_names(params, cfg.mode)
    state = AdamWState(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay)
    history = {k: [] for k in ("train_loss", "val_loss", "violation", "a", "b")}
    best_val, best_params, best_epoch, stale = math.inf, params, 0, 0

    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        batches = _minibatches(train_set, cfg, epoch)
        if batches is None:
            train_loss, grads = loss_and_grads(params, names, full_batch, cfg)
            if not math.isfinite(train_loss):
                raise DivergenceError(epoch, _norms(params))
            params, state = adamw_step(state, params, grads)
        else:
            losses, weights = [], []
            for batch in batches:
                loss, grads = loss_and_grads(params, names, batch, cfg)
                if not math.isfinite(loss):
                    raise DivergenceError(epoch, _norms(params))
                params, state = adamw_step(state, params, grads)
                losses.append(loss)
                weights.append(len(batch))
            train_loss = float(np.average(losses, weights=weights))

        val_loss = loss_value(params, val_batch, cfg)
        if not math.isfinite(val_loss):
            raise DivergenceError(epoch, _norms(params))
        zip, mix, _ = unpack(params, cfg.activation)
        history["train_loss"].append(train_loss)
        history["val_loss"].append(val_loss)
        history["violation"].append(violation_metric(zip, mix))
        history["a"].append(mix.a)
        history["b"].append(mix.b)

        if val_loss < best_val:
            best_val, best_params, best_epoch, stale = val_loss, params, epoch, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                break

    zip, mix, mlp = unpack({n: np.array(v) for n, v in best_params.items()}, cfg.activation)
    return TrainResult(zip, mix, mlp, history, best_epoch, best_val, epoch)
