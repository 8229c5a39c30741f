"""Bundled synthetic fixtures: a data recipe paired with a training recipe."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .data import GeneratorConfig, generate_dataset
from .optimizer import TrainConfig


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def dataset(self):
        return generate_dataset(self.generator)

    def with_seed(self, seed: int) -> "Fixture":
        return replace(self, generator=replace(self.generator, seed=seed),
                       train=replace(self.train, seed=seed))


FIXTURES = {
    "zip_recovery": Fixture(
        "zip_recovery",
        "noiseless static-ZIP faults; ground truth alpha=(0.4,0.3,0.3), beta=(0.5,0.2,0.3)",
        # deep, slow-recovering dips excite r far from 1, where the three ZIP terms separate
        GeneratorConfig(counts={"trans_fault_zload": 20}, duration=4.0, depth_range=(0.5, 0.9),
                        fault_duration=0.3, voltage_recovery_range=(0.8, 1.2)),
        TrainConfig(mode="zip_only", epochs=5000, patience=1000),
    ),
    "composite": Fixture(
        "composite",
        "ZIP plus exponential-recovery load; the static model cannot fit it exactly",
        GeneratorConfig(counts={"trans_fault_composite": 20}, duration=4.0, seed=2),
        TrainConfig(mode="neuro_zip", epochs=10000, patience=1000, seed=2),
    ),
    "gradcheck": Fixture(
        "gradcheck",
        "ten short composite trajectories for finite-difference gradient checks",
        GeneratorConfig(counts={"trans_fault_composite": 10}, duration=1.5, dt=0.05,
                        fault_start=0.5, fault_duration=0.1),
        TrainConfig(mode="neuro_zip"),
    ),
    "constant": Fixture(
        "constant",
        "no disturbance: voltage, P and Q stay at the operating point",
        GeneratorConfig(counts={"trans_fault_zload": 10}, duration=2.0, depth_range=(0.0, 0.0),
                        v0_range=(1.0, 1.0), p0_range=(1.0, 1.0), q0_range=(0.3, 0.3),
                        theta0_range=(0.0, 0.0), angle_swing_range=(0.0, 0.0)),
        TrainConfig(mode="neuro_zip", epochs=2000, patience=200),
    ),
}


def get_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name.replace("-", "_")]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
