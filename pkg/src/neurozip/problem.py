"""Training objective: least-squares data fit plus constraint penalties.

Constraints on the fitted parameters, written as ``g <= 0`` and ``h == 0``::

    h:  alpha_p + alpha_i + alpha_z - 1,   beta_p + beta_i + beta_z - 1
    g:  -alpha_*, -beta_*,  -a, a - 1,  -b, b - 1

The penalty is ``q_g * ||relu(g)||_l + q_h * ||h||_l`` where the l=1 norm is
the sum of absolute values and the l=2 norm the sum of squares.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from operator import add

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ContractError
from .models import MixingWeights, MlpModel, ZipParams, combine, mlp_forward, zip_forward

MODES = ("zip_only", "neural_only", "neuro_zip")
REDUCTIONS = ("trajectory", "mean", "sum")


@dataclass
class PenaltyConfig:
    q_g: float = 1.0
    q_h: float = 1.0
    norm_l: int = 1

    def __post_init__(self):
        if self.q_g < 0 or self.q_h < 0:
            raise ConfigError("penalty weights must be non-negative")
        if self.norm_l not in (1, 2):
            raise ConfigError(f"norm_l must be 1 or 2, got {self.norm_l}")


@dataclass
class ConstraintSet:
    equalities: dict
    inequalities: dict


def constraint_set(zip: ZipParams, mix: MixingWeights) -> ConstraintSet:
    h = {
        "sum_alpha": zip.alpha_p + zip.alpha_i + zip.alpha_z - 1.0,
        "sum_beta": zip.beta_p + zip.beta_i + zip.beta_z - 1.0,
    }
    g = {f"{name}>=0": -getattr(zip, name)
         for name in ("alpha_p", "alpha_i", "alpha_z", "beta_p", "beta_i", "beta_z")}
    g.update({"a>=0": -mix.a, "a<=1": mix.a - 1.0, "b>=0": -mix.b, "b<=1": mix.b - 1.0})
    return ConstraintSet(h, g)


def _norm(terms, l):
    if l == 1:
        return reduce(add, (ad.absolute(t) for t in terms))
    return reduce(add, (ad.square(t) for t in terms))


def constraint_penalty(zip: ZipParams, mix: MixingWeights, cfg: PenaltyConfig | None = None):
    cfg = cfg or PenaltyConfig()
    cons = constraint_set(zip, mix)
    ineq = _norm([ad.relu(g) for g in cons.inequalities.values()], cfg.norm_l)
    eq = _norm(list(cons.equalities.values()), cfg.norm_l)
    return cfg.q_g * ineq + cfg.q_h * eq


def violation_metric(zip: ZipParams, mix: MixingWeights) -> float:
    """Combined l1 constraint violation with unit weights (reporting only)."""
    return float(ad.value_of(constraint_penalty(zip, mix, PenaltyConfig(1.0, 1.0, 1))))


def violation_breakdown(zip: ZipParams, mix: MixingWeights) -> dict[str, float]:
    """Per-constraint violation: ``|h|`` for equalities, ``max(g, 0)`` for inequalities."""
    cons = constraint_set(zip, mix)
    out = {k: float(abs(v)) for k, v in cons.equalities.items()}
    out.update({k: float(max(v, 0.0)) for k, v in cons.inequalities.items()})
    return out


def data_loss(p_fit, q_fit, p_star, q_star, reduction="mean"):
    """Squared P residual plus squared Q residual, averaged (or summed) over samples."""
    p_star = np.asarray(p_star, dtype=np.float64)
    q_star = np.asarray(q_star, dtype=np.float64)
    if p_star.size == 0:
        raise ContractError("data_loss on an empty batch")
    for fit, ref in ((p_fit, p_star), (q_fit, q_star)):
        if np.shape(ad.value_of(fit)) != ref.shape and np.size(ad.value_of(fit)) != 1:
            raise ContractError(f"prediction shape {np.shape(ad.value_of(fit))} "
                                f"does not match reference shape {ref.shape}")
    sq = ad.square(p_fit - p_star) + ad.square(q_fit - q_star)
    if reduction == "mean":
        return ad.mean(sq)
    if reduction == "sum":
        return ad.total(sq)
    raise ConfigError(f"unknown reduction {reduction!r}")


def effective_mix(mix: MixingWeights, mode: str) -> MixingWeights:
    if mode == "neuro_zip":
        return mix
    if mode == "zip_only":
        return MixingWeights(1.0, 1.0)
    if mode == "neural_only":
        return MixingWeights(0.0, 0.0)
    raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")


def predict(zip: ZipParams, mix: MixingWeights, mlp: MlpModel, batch, mode="neuro_zip"):
    """Model output ``(p_fit, q_fit)`` on a :class:`~neurozip.data.Batch`.

    ``zip_only`` skips the network entirely, so its weights cannot leak in.
    """
    mix = effective_mix(mix, mode)
    physics = zip_forward(zip, batch.op, batch.v)
    if mode == "zip_only":
        zeros = np.zeros_like(batch.v)
        neural = (zeros, zeros)
    else:
        neural = mlp_forward(mlp, batch.features)
    return combine(mix, physics, neural)


def total_loss(batch, params, cfg: PenaltyConfig | None = None, mode="neuro_zip",
               reduction="mean"):
    """Data loss plus constraint penalty for ``params = (zip, mix, mlp)``.

    ``reduction="trajectory"`` sums squared residuals over time and averages
    over the trajectories in the batch, i.e. each trajectory is one data sample.
    """
    zip, mix, mlp = params
    p_fit, q_fit = predict(zip, mix, mlp, batch, mode)
    if reduction == "trajectory":
        fit = data_loss(p_fit, q_fit, batch.p_star, batch.q_star, "sum") / len(batch.ids)
    else:
        fit = data_loss(p_fit, q_fit, batch.p_star, batch.q_star, reduction)
    return fit + constraint_penalty(zip, effective_mix(mix, mode), cfg)
