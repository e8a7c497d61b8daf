#!/usr/bin/env python3
"""Compare the mutation signatures of two finished runs head to head.

Reads the champion from each run directory, draws fresh mutant samples for
both at the same intensity, and reports medians plus the share of mutants
that stay viable while producing a divergent gait.

Example:
    python scripts/compare_signatures.py runs/study/supg runs/study/direct -n 500
"""

import argparse
import json
from pathlib import Path

from hexevo.cli import _champion, _load_run
from hexevo.evolution import EvalContext
from hexevo.signature import (
    beneficial_proportion,
    median_divergence,
    median_fitness_change,
    sample_signature,
)


def load_samples(run_dir: Path, n: int, intensity: float, workers: int):
    config, run_id, best_data = _load_run(run_dir)
    with EvalContext(
        config.encoding,
        config.hexapod,
        config.simulation.duration_s,
        config.simulation.control_dt_s,
        workers=workers,
    ) as ctx:
        parent = _champion(config, best_data, ctx)
        samples = sample_signature(
            parent, ctx, config.mutation, n=n, intensity=intensity, seed=config.seed
        )
    return config.encoding, samples


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_a")
    parser.add_argument("run_b")
    parser.add_argument("-n", type=int, default=200)
    parser.add_argument("--intensity", type=float, default=1.0)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    print(f"{'run':>28} {'median f2':>10} {'median f1':>10} {'beneficial':>11} {'strict':>8}")
    for run_dir in (args.run_a, args.run_b):
        encoding, samples = load_samples(Path(run_dir), args.n, args.intensity, args.workers)
        print(
            f"{run_dir:>28} {median_divergence(samples):>10.3f} "
            f"{median_fitness_change(samples):>10.3f} "
            f"{beneficial_proportion(samples):>11.3f} "
            f"{beneficial_proportion(samples, fitness_floor=-0.5):>8.3f}"
        )


if __name__ == "__main__":
    main()
