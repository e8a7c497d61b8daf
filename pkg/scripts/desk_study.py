#!/usr/bin/env python3
"""Run the full desk-scale study for one or more encodings.

For every encoding this evolves a population, samples the mutation signature
at all three intensities, and runs the three damage-recovery scenarios, then
prints a comparison table.  Everything lands in per-encoding run directories
under --out.

Example:
    python scripts/desk_study.py --encodings supg direct --seed 7 --out runs/study
"""

import argparse
import json
import sys
from pathlib import Path

from hexevo.cli import main as hexevo_main
from hexevo.render import parse_stats_csv


def run(argv) -> None:
    code = hexevo_main(argv)
    if code != 0:
        sys.exit(code)


def median_divergence_from_csv(path: Path) -> float:
    import numpy as np

    values = []
    for line in path.read_text().splitlines():
        if line.startswith("#") or line.startswith("sample_id") or not line:
            continue
        values.append(float(line.split(",")[3]))  # f2_clamped
    return float(np.median(values))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--encodings", nargs="+", default=["direct", "cpg", "cpg_fb", "ann", "supg"]
    )
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="runs/desk-study")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--scenarios", nargs="+", default=["S1", "S2", "S3"])
    args = parser.parse_args()

    workers = [] if args.workers is None else ["--workers", str(args.workers)]
    rows = []
    for encoding in args.encodings:
        run_dir = Path(args.out) / encoding
        run(["evolve", f"desk-{encoding}", "--seed", str(args.seed),
             "--output", str(run_dir), "--force", *workers])
        run(["signature", str(run_dir), "--sweep", *workers])
        recoveries = {}
        for scenario in args.scenarios:
            run(["damage", str(run_dir), "--scenario", scenario, *workers])
            summary = json.loads((run_dir / f"damage_{scenario}_summary.json").read_text())
            recoveries[scenario] = summary["proportion_restored"]
        stats = parse_stats_csv((run_dir / "stats.csv").read_text())
        rows.append(
            {
                "encoding": encoding,
                "best_P": float(stats[-1][1]),
                "median_f2": median_divergence_from_csv(run_dir / "signature_medium.csv"),
                **{f"recovery_{s}": recoveries[s] for s in args.scenarios},
            }
        )

    header = ["encoding", "best_P", "median_f2"] + [f"recovery_{s}" for s in args.scenarios]
    print("\n" + "  ".join(f"{h:>12}" for h in header))
    for row in rows:
        print("  ".join(
            f"{row[h]:>12}" if isinstance(row[h], str) else f"{row[h]:>12.3f}" for h in header
        ))


if __name__ == "__main__":
    main()
