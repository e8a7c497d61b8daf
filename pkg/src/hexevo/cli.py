"""Command-line orchestration: evolve, signature, damage, render, verify.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime
failure.  No output depends on wall-clock time or host identity; rerunning
any command with the same configuration reproduces every file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import render
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config, preset, preset_names
from .controllers import genome_from_json_dict, genome_to_json_dict
from .evolution import (
    DAMAGE_SCENARIOS,
    EvalContext,
    EvolutionConfig,
    Individual,
    evolve,
)
from .signature import kde_grid, sample_signature
from .simulator import behavior_vector


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="hexevo",
        description="Evolve hexapod gait controllers and measure their mutation signatures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_evolve = sub.add_parser("evolve", help="run selection from a config file or preset")
    p_evolve.add_argument(
        "config",
        help=f"path to a JSON config, or a preset name ({', '.join(preset_names())})",
    )
    p_evolve.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_evolve.add_argument("--output", default=None, help="override the output directory")
    p_evolve.add_argument("--workers", type=int, default=None, help="worker processes (default: logical cores)")
    p_evolve.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    p_evolve.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")

    p_sig = sub.add_parser("signature", help="sample the mutation signature of a finished run")
    p_sig.add_argument("run_dir")
    p_sig.add_argument("--intensity", choices=["low", "medium", "high"], default="medium")
    p_sig.add_argument("--sweep", action="store_true", help="sample all three intensities")
    p_sig.add_argument("--samples", type=int, default=None, help="override the sample count")
    p_sig.add_argument("--workers", type=int, default=None)

    p_dmg = sub.add_parser("damage", help="re-adapt the champion to a damaged robot")
    p_dmg.add_argument("run_dir")
    p_dmg.add_argument("--scenario", choices=sorted(DAMAGE_SCENARIOS), required=True)
    p_dmg.add_argument("--generations", type=int, default=None, help="override the recovery budget")
    p_dmg.add_argument("--workers", type=int, default=None)

    p_render = sub.add_parser("render", help="regenerate figures from stored run data")
    p_render.add_argument("run_dir")

    p_verify = sub.add_parser("verify", help="recompute output hashes against the manifest")
    p_verify.add_argument("run_dir")
    return parser


def _workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    return os.cpu_count() or 1


def _resolve_config(args) -> ExperimentConfig:
    name = args.config
    if name.endswith(".json") or Path(name).is_file():
        config = load_config(name)
    else:
        if "-" not in name:
            raise ConfigError(f"{name!r} is neither a config file nor a preset name")
        config = preset(name, seed=args.seed if args.seed is not None else 1, output_dir=args.output)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.output is not None:
        config = replace(config, output_dir=args.output)
    return config


def _evolution_config(config: ExperimentConfig, workers: int, generations: int | None = None) -> EvolutionConfig:
    return EvolutionConfig(
        seed=config.seed,
        encoding=config.encoding,
        population_size=config.evolution.population_size,
        generations=config.evolution.generations if generations is None else generations,
        mutation=config.mutation,
        tournament_size=config.evolution.tournament_size,
        diversity_reference=config.evolution.diversity_reference,
        checkpoint_every=config.evolution.checkpoint_every,
        workers=workers,
    )


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)


def _latest_checkpoint(run_dir: Path) -> Path | None:
    folder = run_dir / "checkpoints"
    if not folder.is_dir():
        return None
    candidates = sorted(folder.glob("checkpoint_gen*.json"))
    return candidates[-1] if candidates else None


def cmd_evolve(args) -> int:
    config = _resolve_config(args)
    run_dir = Path(config.output_dir)
    if run_dir.exists() and any(run_dir.iterdir()) and not (args.force or args.resume):
        raise ConfigError(f"run directory {run_dir} exists; pass --force to overwrite")
    run_id = config.run_id()
    run_dir.mkdir(parents=True, exist_ok=True)
    _write(run_dir / "config.json", json.dumps({"run_id": run_id, "config": config.to_dict()}, indent=2, sort_keys=True) + "\n")

    evo = _evolution_config(config, _workers(args.workers))
    resume_path = _latest_checkpoint(run_dir) if args.resume else None
    old_rows: list[str] = []
    resume_gen = -1
    if resume_path is not None:
        resume_gen = int(json.loads(resume_path.read_text())["generation"])
        stats_file = run_dir / "stats.csv"
        if stats_file.exists():
            old_rows = [
                ",".join(r)
                for r in render.parse_stats_csv(stats_file.read_text())
                if int(r[0]) <= resume_gen
            ]
    run = evolve(
        evo,
        hexapod=config.hexapod,
        duration=config.simulation.duration_s,
        control_dt=config.simulation.control_dt_s,
        checkpoint_dir=run_dir / "checkpoints",
        resume_from=resume_path,
    )

    new_rows = [s.csv_row() for s in run.stats]
    body = "\n".join([f"# run_id={run_id}", "generation,best_P,median_P,best_F,best_Theta"] + old_rows + new_rows) + "\n"
    _write(run_dir / "stats.csv", body)

    best = run.best
    _write(
        run_dir / "best_genome.json",
        json.dumps(
            {
                "run_id": run_id,
                "encoding": config.encoding,
                "genome": genome_to_json_dict(config.encoding, best.genome),
                "eval": {
                    "forward_displacement": best.eval.forward_displacement,
                    "goal_distance": best.eval.goal_distance,
                    "heading_deg": best.eval.heading_deg,
                },
            },
            indent=1,
            sort_keys=True,
        )
        + "\n",
    )
    _write(run_dir / "best_gait.pbm", render.gait_pbm(run_id, best.eval.gait))
    _write(run_dir / "best_gait.svg", render.gait_svg(run_id, best.eval.gait))
    _write(
        run_dir / "best_trajectory.csv",
        render.trajectory_csv(run_id, best.eval.trajectory, config.simulation.control_dt_s),
    )
    render.update_manifest(
        run_dir,
        run_id,
        ["stats.csv", "best_genome.json", "best_gait.pbm", "best_gait.svg", "best_trajectory.csv"],
    )
    print(f"run {run_id}: best forward displacement {best.eval.forward_displacement:.4f} m -> {run_dir}")
    return 0


def _load_run(run_dir: Path) -> tuple[ExperimentConfig, str, dict]:
    config_path = run_dir / "config.json"
    if not config_path.is_file():
        raise ConfigError(f"{config_path} not found; run 'hexevo evolve' first")
    payload = json.loads(config_path.read_text())
    config = config_from_dict(payload["config"])
    best_path = run_dir / "best_genome.json"
    if not best_path.is_file():
        raise ConfigError(f"{best_path} not found; run 'hexevo evolve' first")
    best_data = json.loads(best_path.read_text())
    return config, payload["run_id"], best_data


def _champion(config: ExperimentConfig, best_data: dict, ctx: EvalContext) -> Individual:
    genome = genome_from_json_dict(config.encoding, best_data["genome"])
    result = ctx.evaluate_genome(genome)
    return Individual(genome=genome, eval=result, behavior=behavior_vector(result.gait))


def cmd_signature(args) -> int:
    run_dir = Path(args.run_dir)
    config, run_id, best_data = _load_run(run_dir)
    n = args.samples if args.samples is not None else config.signature.samples
    multipliers = {
        "low": config.signature.low_multiplier,
        "medium": 1.0,
        "high": config.signature.high_multiplier,
    }
    chosen = ["low", "medium", "high"] if args.sweep else [args.intensity]
    with EvalContext(
        config.encoding,
        config.hexapod,
        config.simulation.duration_s,
        config.simulation.control_dt_s,
        workers=_workers(args.workers),
    ) as ctx:
        parent = _champion(config, best_data, ctx)
        if parent.eval.forward_displacement <= 0:
            raise RuntimeFailure("champion has no forward displacement; signature undefined")
        written = []
        for name in chosen:
            samples = sample_signature(
                parent,
                ctx,
                config.mutation,
                n=n,
                intensity=multipliers[name],
                seed=config.seed,
                stream_name=f"signature-{name}",
            )
            grid = kde_grid(samples)
            _write(run_dir / f"signature_{name}.csv", render.samples_csv(run_id, samples))
            _write(run_dir / f"signature_{name}_grid.csv", render.grid_csv(run_id, grid))
            _write(run_dir / f"signature_{name}_heatmap.svg", render.heatmap_svg(run_id, grid))
            written += [
                f"signature_{name}.csv",
                f"signature_{name}_grid.csv",
                f"signature_{name}_heatmap.svg",
            ]
            med_f2 = float(np.median([s.divergence for s in samples]))
            med_f1 = float(np.median([s.fitness_change for s in samples]))
            print(f"{name}: {n} mutants, median divergence {med_f2:.3f}, median fitness change {med_f1:.3f}")
    render.update_manifest(run_dir, run_id, written)
    return 0


def cmd_damage(args) -> int:
    from .evolution import recovery_experiment

    run_dir = Path(args.run_dir)
    config, run_id, best_data = _load_run(run_dir)
    scenario = DAMAGE_SCENARIOS[args.scenario]
    budget = args.generations if args.generations is not None else config.damage.generations
    with EvalContext(
        config.encoding,
        config.hexapod,
        config.simulation.duration_s,
        config.simulation.control_dt_s,
        workers=_workers(args.workers),
    ) as ctx:
        parent = _champion(config, best_data, ctx)
        if parent.eval.forward_displacement <= 0:
            raise RuntimeFailure("champion has no forward displacement; recovery ratio undefined")
        evo = _evolution_config(config, _workers(args.workers), generations=budget)
        rec = recovery_experiment(
            parent,
            scenario,
            evo,
            hexapod=config.hexapod,
            duration=config.simulation.duration_s,
            control_dt=config.simulation.control_dt_s,
            threshold=config.damage.restore_threshold,
        )
    _write(run_dir / f"damage_{scenario.name}.csv", render.recovery_csv(run_id, rec.curve))
    summary = {
        "run_id": run_id,
        "scenario": scenario.name,
        "removed_legs": sorted(scenario.removed_legs),
        "generations_budget": budget,
        "original_displacement": rec.original_displacement,
        "proportion_restored": rec.proportion_restored,
        "restore_threshold": rec.threshold,
        "generations_to_threshold": rec.generations_to_threshold,
        "capped": rec.capped,
    }
    _write(run_dir / f"damage_{scenario.name}_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    render.update_manifest(
        run_dir, run_id, [f"damage_{scenario.name}.csv", f"damage_{scenario.name}_summary.json"]
    )
    flag = " (budget cap)" if rec.capped else ""
    print(
        f"{scenario.name}: restored {rec.proportion_restored:.3f} of original, "
        f"threshold reached at generation {rec.generations_to_threshold}{flag}"
    )
    return 0


def cmd_render(args) -> int:
    run_dir = Path(args.run_dir)
    config_path = run_dir / "config.json"
    if not config_path.is_file():
        raise ConfigError(f"{config_path} not found")
    run_id = json.loads(config_path.read_text())["run_id"]
    written = []
    pbm = run_dir / "best_gait.pbm"
    if pbm.is_file():
        gait = render.parse_gait_pbm(pbm.read_text())
        _write(run_dir / "best_gait.svg", render.gait_svg(run_id, gait))
        written.append("best_gait.svg")
    for grid_file in sorted(run_dir.glob("signature_*_grid.csv")):
        grid = render.parse_grid_csv(grid_file.read_text())
        name = grid_file.name.replace("_grid.csv", "_heatmap.svg")
        _write(run_dir / name, render.heatmap_svg(run_id, grid))
        written.append(name)
    if written:
        render.update_manifest(run_dir, run_id, written)
    print(f"rendered {len(written)} figure(s)")
    return 0


def cmd_verify(args) -> int:
    run_dir = Path(args.run_dir)
    problems = render.verify_manifest(run_dir)
    config_path = run_dir / "config.json"
    if config_path.is_file():
        payload = json.loads(config_path.read_text())
        recomputed = config_from_dict(payload["config"]).run_id()
        if recomputed != payload.get("run_id"):
            problems.append("config.json: run id does not match the configuration hash")
    else:
        problems.append("config.json: missing")
    if problems:
        for p in problems:
            print(f"verify: {p}", file=sys.stderr)
        raise RuntimeFailure(f"{len(problems)} problem(s) found")
    print("verify: all hashes match")
    return 0


_COMMANDS = {
    "evolve": cmd_evolve,
    "signature": cmd_signature,
    "damage": cmd_damage,
    "render": cmd_render,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
