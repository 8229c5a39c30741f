"""Checkpoint persistence as versioned, human-readable JSON.

Floats are written with ``repr`` precision, so a save/load round trip is
bit-exact and re-evaluating a reloaded checkpoint reproduces its metrics.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ModelError
from .models import MixingWeights, MlpModel, ZipParams
from .optimizer import TrainConfig

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    zip: ZipParams
    mix: MixingWeights
    mlp: MlpModel
    history: dict = field(default_factory=dict)
    manifest_hash: str = ""
    split: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def params(self):
        return self.zip, self.mix, self.mlp

    def to_dict(self) -> dict:
        layers = []
        for w, b in self.mlp.layers:
            w, b = np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)
            layers.append({"shape": list(w.shape),
                           "weight": [float(x) for x in w.reshape(-1)],
                           "bias": [float(x) for x in b.reshape(-1)]})
        config = asdict(self.config)
        config["hidden"] = list(config["hidden"])
        config["split"] = list(config["split"])
        return {
            "format_version": self.format_version,
            "config": config,
            "zip": {k: float(v) for k, v in asdict(self.zip).items()},
            "mix": {k: float(v) for k, v in asdict(self.mix).items()},
            "mlp": {"activation": self.mlp.activation, "layers": layers},
            "history": self.history,
            "manifest_hash": self.manifest_hash,
            "split": self.split,
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Checkpoint":
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format_version {version!r}")
        try:
            known = {f.name for f in fields(TrainConfig)}
            config = TrainConfig(**{k: v for k, v in doc["config"].items() if k in known})
            layers = []
            for k, layer in enumerate(doc["mlp"]["layers"]):
                rows, cols = layer["shape"]
                w = np.array(layer["weight"], dtype=np.float64)
                b = np.array(layer["bias"], dtype=np.float64)
                if w.size != rows * cols or b.size != cols:
                    raise CheckpointError(f"layer {k}: stored values do not match shape {rows}x{cols}")
                layers.append((w.reshape(rows, cols), b.reshape(1, cols)))
            mlp = MlpModel(layers, doc["mlp"]["activation"]).validate()
            return cls(
                config=config,
                zip=ZipParams(**doc["zip"]),
                mix=MixingWeights(**doc["mix"]),
                mlp=mlp,
                history=doc.get("history", {}),
                manifest_hash=doc.get("manifest_hash", ""),
                split=doc.get("split", {}),
                metrics=doc.get("metrics", {}),
                format_version=version,
            )
        except ModelError as exc:
            raise CheckpointError(f"inconsistent network layers: {exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CheckpointError):
                raise
            raise CheckpointError(f"malformed checkpoint: {exc!r}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path):
        path = Path(path)
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: not a checkpoint file ({exc})") from None
        return cls.from_dict(doc)
