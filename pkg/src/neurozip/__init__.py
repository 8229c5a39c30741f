"""Neuro-augmented ZIP load modelling: a static ZIP polynomial blended with an MLP,
fitted under penalised physical constraints with a hand-written reverse-mode autodiff."""

from .checkpoint import Checkpoint
from .data import GeneratorConfig, Trajectory, generate_dataset, load_dataset, save_dataset, split_dataset
from .evaluation import EvalReport, emit_comparison, evaluate
from .fixtures import FIXTURES, get_fixture
from .models import MixingWeights, MlpModel, OperatingPoint, ZipParams
from .optimizer import AdamWState, TrainConfig, adamw_step, train
from .pipeline import fit, gradient_check
from .problem import PenaltyConfig, total_loss, violation_metric

__version__ = "0.1.0"

__all__ = [
    "AdamWState", "Checkpoint", "EvalReport", "FIXTURES", "GeneratorConfig", "MixingWeights",
    "MlpModel", "OperatingPoint", "PenaltyConfig", "TrainConfig", "Trajectory", "ZipParams",
    "adamw_step", "emit_comparison", "evaluate", "fit", "generate_dataset", "get_fixture",
    "gradient_check", "load_dataset", "save_dataset", "split_dataset", "total_loss", "train",
    "violation_metric",
]
