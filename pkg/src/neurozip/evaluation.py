"""Accuracy and constraint metrics, plus plot-ready comparison traces."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Batch
from .errors import CheckpointError, ContractError, ModelError
from .models import combine, mlp_forward, zip_forward
from .problem import MODES, effective_mix, predict, violation_breakdown, violation_metric

THREADS_ENV = "NEUROZIP_THREADS"
COMPARISON_COLUMNS = ("t", "p_ref", "q_ref", "p_zip", "q_zip", "p_fit", "q_fit")


@dataclass
class EvalReport:
    mode: str
    mse_p: float
    mse_q: float
    a: float
    b: float
    violation: float
    per_trajectory: list = field(default_factory=list)  # (id, mse_p, mse_q, n_samples)
    subset: str = "test"
    n_samples: int = 0
    breakdown: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"mode": self.mode, "subset": self.subset, "mse_p": self.mse_p,
                "mse_q": self.mse_q, "a": self.a, "b": self.b, "violation": self.violation}

    def metric_line(self) -> str:
        return (f"[{self.subset}/{self.mode}] mse_p={self.mse_p!r} mse_q={self.mse_q!r} "
                f"a={self.a!r} b={self.b!r} violation={self.violation!r}")

    def to_text(self) -> str:
        """Key-value report, one metric per line."""
        lines = [f"mode={self.mode}", f"subset={self.subset}", f"n_samples={self.n_samples}",
                 f"mse_p={self.mse_p!r}", f"mse_q={self.mse_q!r}", f"a={self.a!r}",
                 f"b={self.b!r}", f"violation={self.violation!r}"]
        lines += [f"violation.{k}={v!r}" for k, v in self.breakdown.items()]
        for tid, mp, mq, n in self.per_trajectory:
            lines += [f"trajectory.{tid}.mse_p={mp!r}", f"trajectory.{tid}.mse_q={mq!r}",
                      f"trajectory.{tid}.n_samples={n}"]
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.to_text(), encoding="utf-8")
        return path


def read_report(path) -> dict[str, str]:
    """Parse a key-value report back into a flat ``{key: raw string}`` map."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    return out


def _thread_count(threads):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


def _check_architecture(checkpoint):
    try:
        checkpoint.mlp.validate()
    except ModelError as exc:
        raise CheckpointError(f"checkpoint network is inconsistent: {exc}") from None


def _trajectory_errors(checkpoint, trajectory, mode):
    batch = Batch.from_trajectories([trajectory], checkpoint.config.feature_mode)
    p, q = predict(*checkpoint.params, batch, mode)
    return float(np.sum((p - batch.p_star) ** 2)), float(np.sum((q - batch.q_star) ** 2)), len(batch)


def evaluate(checkpoint, trajectories, mode=None, subset="test", threads=None) -> EvalReport:
    """Table-style metrics of ``checkpoint`` on ``trajectories``.

    ``mode`` defaults to the mode the checkpoint was trained in. ``zip_only``
    forces a = b = 1 and never touches the network; ``neural_only`` forces
    a = b = 0. The reported violation is taken at the effective a, b.
    """
    mode = mode or checkpoint.config.mode
    if mode not in MODES:
        raise ContractError(f"unknown mode {mode!r}")
    trajectories = list(trajectories)
    if not trajectories:
        raise ContractError("evaluate needs at least one trajectory")
    _check_architecture(checkpoint)

    n = _thread_count(threads)
    work = lambda tr: _trajectory_errors(checkpoint, tr, mode)  # noqa: E731
    if n > 1 and len(trajectories) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            errors = list(pool.map(work, trajectories))
    else:
        errors = [work(tr) for tr in trajectories]

    total = sum(e[2] for e in errors)
    per = [(tr.id, sp / k, sq / k, k) for tr, (sp, sq, k) in zip(trajectories, errors)]
    mix = effective_mix(checkpoint.mix, mode)
    return EvalReport(
        mode=mode,
        mse_p=sum(e[0] for e in errors) / total,
        mse_q=sum(e[1] for e in errors) / total,
        a=float(mix.a),
        b=float(mix.b),
        violation=violation_metric(checkpoint.zip, mix),
        per_trajectory=per,
        subset=subset,
        n_samples=total,
        breakdown=violation_breakdown(checkpoint.zip, mix),
    )


def comparison_traces(checkpoint, trajectory, mode=None) -> dict[str, np.ndarray]:
    """Reference, ZIP-only and fitted P/Q traces for one trajectory."""
    mode = mode or checkpoint.config.mode
    _check_architecture(checkpoint)
    batch = Batch.from_trajectories([trajectory], checkpoint.config.feature_mode)
    p_zip, q_zip = zip_forward(checkpoint.zip, batch.op, batch.v)
    p_fit, q_fit = predict(*checkpoint.params, batch, mode)
    return {"t": trajectory.t, "p_ref": trajectory.p_star, "q_ref": trajectory.q_star,
            "p_zip": p_zip.reshape(-1), "q_zip": q_zip.reshape(-1),
            "p_fit": p_fit.reshape(-1), "q_fit": q_fit.reshape(-1)}


def neural_traces(checkpoint, trajectory):
    """Raw network outputs ``(p_nn, q_nn)`` along a trajectory."""
    batch = Batch.from_trajectories([trajectory], checkpoint.config.feature_mode)
    p, q = mlp_forward(checkpoint.mlp, batch.features)
    return p.reshape(-1), q.reshape(-1)


def emit_comparison(checkpoint, trajectory, path, mode=None):
    """Write ``t,p_ref,q_ref,p_zip,q_zip,p_fit,q_fit`` rows for one trajectory."""
    traces = comparison_traces(checkpoint, trajectory, mode)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        for row in zip(*(traces[c] for c in COMPARISON_COLUMNS)):
            writer.writerow([repr(float(x)) for x in row])
    return path


__all__ = ["EvalReport", "evaluate", "emit_comparison", "comparison_traces", "neural_traces",
           "read_report", "combine"]
