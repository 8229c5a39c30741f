"""Per-scenario metric table: neuro-ZIP against the ZIP-only baseline.

Generates each scenario separately, fits both modes on the same seeded split
and prints one markdown row per (scenario, mode) with test-split metrics.

    python scripts/scenario_table.py --n 20 --epochs 3000
"""

import argparse
import dataclasses
import time

from neurozip.data import SCENARIOS, GeneratorConfig, generate_dataset
from neurozip.optimizer import TrainConfig
from neurozip.pipeline import fit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20, help="trajectories per scenario")
    ap.add_argument("--duration", type=float, default=4.0)
    ap.add_argument("--epochs", type=int, default=3000)
    ap.add_argument("--patience", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--scenario", choices=SCENARIOS, action="append",
                    help="restrict to one scenario (repeatable)")
    args = ap.parse_args()

    print("| scenario | mode | MSE P | MSE Q | a | b | violation | seconds |")
    print("|---|---|---|---|---|---|---|---|")
    for scenario in args.scenario or SCENARIOS:
        gen = GeneratorConfig(counts={scenario: args.n}, duration=args.duration, seed=args.seed)
        data = generate_dataset(gen)
        base = TrainConfig(epochs=args.epochs, patience=args.patience, seed=args.seed)
        for mode in ("zip_only", "neuro_zip"):
            start = time.perf_counter()
            rep = fit(data, dataclasses.replace(base, mode=mode)).report
            print(f"| {scenario} | {mode} | {rep.mse_p:.3e} | {rep.mse_q:.3e} | {rep.a:.3f} "
                  f"| {rep.b:.3f} | {rep.violation:.1e} | {time.perf_counter() - start:.0f} |",
                  flush=True)


if __name__ == "__main__":
    main()
