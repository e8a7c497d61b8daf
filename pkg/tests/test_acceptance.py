"""Acceptance gate: one test per criterion, each printing a PASS line.

The heavy criteria run real desk-scale evolution (population 32, 300
generations); on a small machine the whole module takes tens of minutes.
Evolution runs are cached per (encoding, seed) and shared between criteria
that do not carry their own runtime budget.
"""

import os
import time

import numpy as np
import pytest

from hexevo.cppn import MutationConfig
from hexevo.cpg import (
    HEXAPOD_EDGES,
    LOOPS,
    OscillatorParams,
    OscillatorState,
    CouplingGraph,
    TWO_PI,
    complete_loop_biases,
    empty_graph,
    loop_bias_sum,
    step,
    uncoupled_params,
)
from hexevo.diversity import entropy_corrected, nmi_distance
from hexevo.evolution import (
    DAMAGE_SCENARIOS,
    EvalContext,
    EvolutionConfig,
    evolve,
    fast_nondominated_sort,
    recovery_experiment,
)
from hexevo.signature import (
    intensity_sweep,
    kde_grid_points,
    median_divergence,
    median_fitness_change,
    sample_signature,
)
from hexevo.simulator import HexapodConfig

WORKERS = min(4, os.cpu_count() or 1)
HEX = HexapodConfig()
DESK_POP = 32
DESK_GENERATIONS = 300

DIRECT_MUTATION = MutationConfig(weight_mutation_rate=0.1, weight_step_sigma=0.1)
CPPN_MUTATION = MutationConfig()

_RUN_CACHE: dict = {}


def mutation_for(encoding: str) -> MutationConfig:
    return DIRECT_MUTATION if encoding == "direct" else CPPN_MUTATION


def desk_run(encoding: str, seed: int):
    key = (encoding, seed)
    if key not in _RUN_CACHE:
        config = EvolutionConfig(
            seed=seed,
            encoding=encoding,
            population_size=DESK_POP,
            generations=DESK_GENERATIONS,
            mutation=mutation_for(encoding),
            workers=WORKERS,
        )
        _RUN_CACHE[key] = evolve(config, hexapod=HEX)
    return _RUN_CACHE[key]


def mutant_samples(run, encoding: str, seed: int, n: int = 200, intensity: float = 1.0):
    with EvalContext(encoding, HEX, workers=WORKERS) as ctx:
        return sample_signature(
            run.best,
            ctx,
            mutation_for(encoding),
            n=n,
            intensity=intensity,
            seed=seed,
            stream_name="signature-medium",
        )


def report(number: int, text: str) -> None:
    print(f"PASS: criterion {number} - {text}")


def test_criterion_01_nondominated_sort_oracle():
    started = time.monotonic()

    def oracle(objs):
        n = len(objs)

        def dominates(a, b):
            return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))

        remaining = list(range(n))
        fronts = []
        while remaining:
            front = [
                i
                for i in remaining
                if not any(dominates(objs[j], objs[i]) for j in remaining if j != i)
            ]
            fronts.append(front)
            remaining = [i for i in remaining if i not in front]
        return fronts

    rng = np.random.default_rng(12345)
    for _ in range(200):
        n = int(rng.integers(1, 33))
        objs = np.round(rng.normal(size=(n, 3)), 2)
        assert fast_nondominated_sort(objs) == oracle(objs.tolist())
    elapsed = time.monotonic() - started
    assert elapsed < 5.0
    report(1, f"sorting matches the pairwise-dominance oracle on 200 populations ({elapsed:.2f}s)")


def test_criterion_02_cpg_limit_cycle():
    started = time.monotonic()
    params = uncoupled_params(0.6)
    state = OscillatorState.initial(1)
    for _ in range(400):  # 2 s at the 5 ms substep
        state, _ = step(state, params, empty_graph(1), 0.005)
    assert abs(state.amplitude[0] - 0.6) < 1e-3

    pair = OscillatorParams(intrinsic_amplitudes=(1.0, 1.0))
    graph = CouplingGraph(edges=((1, 2),), biases=[np.pi / 2], count=2)
    state = OscillatorState.initial(2)
    for _ in range(1000):  # 5 s
        state, _ = step(state, pair, graph, 0.005)
    diff = (state.phase[1] - state.phase[0]) % TWO_PI
    assert abs(diff - np.pi / 2) < 0.05
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    report(2, f"amplitude converges within 1e-3 and the pair locks to pi/2 ({elapsed:.2f}s)")


def test_criterion_03_loop_closure():
    started = time.monotonic()
    rng = np.random.default_rng(7)
    for _ in range(1000):
        graph = complete_loop_biases(rng.uniform(0.0, TWO_PI, size=11))
        for loop in LOOPS:
            total = loop_bias_sum(graph, loop) % TWO_PI
            assert min(total, TWO_PI - total) < 1e-9
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    report(3, f"all 6 loop sums are multiples of 2*pi for 1000 random bias vectors ({elapsed:.2f}s)")


def test_criterion_04_diversity_metric():
    started = time.monotonic()
    rng = np.random.default_rng(99)

    for _ in range(100):
        bits = rng.integers(0, 2, size=2004).astype(np.uint8)
        assert nmi_distance(bits, bits) == 0.0

    for _ in range(100):
        a = rng.integers(0, 2, size=2004).astype(np.uint8)
        b = rng.integers(0, 2, size=2004).astype(np.uint8)
        assert abs(nmi_distance(a, b) - nmi_distance(b, a)) <= 1e-12

    distances = [
        nmi_distance(
            rng.integers(0, 2, size=2004).astype(np.uint8),
            rng.integers(0, 2, size=2004).astype(np.uint8),
        )
        for _ in range(1000)
    ]
    med = float(np.median(distances))
    assert med > 0.9

    entropies = [
        entropy_corrected(rng.integers(0, 2, size=2004).astype(np.uint8)).corrected
        for _ in range(1000)
    ]
    mean_entropy = float(np.mean(entropies))
    assert abs(mean_entropy - 1.0005) < 0.01

    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    report(
        4,
        f"identity exact, symmetry 1e-12, median f2 {med:.3f} > 0.9, "
        f"mean corrected entropy {mean_entropy:.4f} ({elapsed:.1f}s)",
    )


def test_criterion_05_evolution_improves():
    started = time.monotonic()
    run = desk_run("supg", 103)
    elapsed = time.monotonic() - started
    assert elapsed < 300.0

    gen0_best = run.stats[0].best_P
    final_best = run.stats[-1].best_P
    assert final_best >= 3.0 * gen0_best

    front0 = [s.front0_best_P for s in run.stats]
    for a, b in zip(front0, front0[1:]):
        assert b >= a - 1e-12, "front-0 best forward displacement decreased"

    goal = [s.best_F for s in run.stats]
    for a, b in zip(goal, goal[1:]):
        assert b <= a + 1e-12

    report(
        5,
        f"desk SUPG run: gen-0 best {gen0_best:.4f} m -> final {final_best:.4f} m "
        f"({final_best / gen0_best:.0f}x), front-0 best non-decreasing ({elapsed:.0f}s)",
    )


def test_criterion_06_signature_ordering_supg_vs_direct():
    started = time.monotonic()
    supg_seeds = [101, 102, 103, 104, 105]
    direct_seeds = [201, 202, 203, 204, 205]
    wins = 0
    medians = []
    for i, (ss, ds) in enumerate(zip(supg_seeds, direct_seeds)):
        supg = desk_run("supg", ss)
        direct = desk_run("direct", ds)
        supg_med = median_divergence(mutant_samples(supg, "supg", seed=1000 + i))
        direct_med = median_divergence(mutant_samples(direct, "direct", seed=2000 + i))
        medians.append((supg_med, direct_med))
        wins += supg_med > direct_med
    elapsed = time.monotonic() - started
    assert wins >= 4, f"SUPG won only {wins}/5 paired comparisons: {medians}"
    assert elapsed < 1800.0
    pairs = ", ".join(f"{s:.2f}>{d:.2f}" for s, d in medians)
    report(6, f"median mutant divergence SUPG > direct in {wins}/5 pairs ({pairs}) ({elapsed:.0f}s)")


def test_criterion_07_intensity_monotonicity():
    parents = {
        "direct": desk_run("direct", 201),
        "cpg": desk_run("cpg", 301),
        "cpg_fb": desk_run("cpg_fb", 301),
        "ann": desk_run("ann", 301),
        "supg": desk_run("supg", 103),
    }
    lines = []
    for encoding, run in parents.items():
        with EvalContext(encoding, HEX, workers=WORKERS) as ctx:
            sweep = intensity_sweep(
                run.best, ctx, mutation_for(encoding), n=200, seed=777
            )
        f2_low = median_divergence(sweep["low"])
        f2_high = median_divergence(sweep["high"])
        f1_low = median_fitness_change(sweep["low"])
        f1_high = median_fitness_change(sweep["high"])
        assert f2_high >= f2_low, f"{encoding}: divergence not monotone ({f2_low} vs {f2_high})"
        assert f1_high <= f1_low, f"{encoding}: fitness change not monotone ({f1_low} vs {f1_high})"
        lines.append(f"{encoding} f2 {f2_low:.2f}->{f2_high:.2f} f1 {f1_low:.2f}->{f1_high:.2f}")
    report(7, "intensity sweep monotone for all encodings: " + "; ".join(lines))


def test_criterion_08_damage_semantics_and_recovery():
    # mask semantics: every evaluation of every scenario zeroes the removed legs
    rng_genomes = desk_run("supg", 103).population[:4]
    for name, scenario in DAMAGE_SCENARIOS.items():
        damaged = HEX.with_damage(scenario.removed_legs)
        with EvalContext("supg", damaged, workers=1) as ctx:
            for ind in rng_genomes:
                result = ctx.evaluate_genome(ind.genome)
                for leg in scenario.removed_legs:
                    assert np.all(result.gait[:, leg] == 0), f"{name}: leg {leg} shows contact"

    champion_run = desk_run("supg", 103)
    config = EvolutionConfig(
        seed=103,
        encoding="supg",
        population_size=DESK_POP,
        generations=500,
        mutation=CPPN_MUTATION,
        workers=WORKERS,
    )
    rec = recovery_experiment(champion_run.best, DAMAGE_SCENARIOS["S1"], config, hexapod=HEX)
    gen0 = rec.curve[0][2]
    assert rec.proportion_restored > gen0
    report(
        8,
        f"masks zero the removed legs in every evaluation; S1 recovery improves "
        f"{gen0:.3f} -> {rec.proportion_restored:.3f} over 500 generations",
    )


def test_criterion_09_kde_correctness():
    rng = np.random.default_rng(4242)
    sx, sy = 0.1, 0.4
    pts = rng.normal([0.5, -1.0], [sx, sy], size=(10_000, 2))
    grid = kde_grid_points(pts, window=((-0.5, 1.5), (-5.0, 3.0)))
    mass = grid.mass()
    assert abs(mass - 1.0) < 1e-6
    iy = int(np.argmin(np.abs(grid.y_centers + 1.0)))
    ix = int(np.argmin(np.abs(grid.x_centers - 0.5)))
    analytic = 1.0 / (2 * np.pi * sx * sy)
    rel = abs(grid.density[iy, ix] - analytic) / analytic
    assert rel < 0.10
    report(9, f"grid mass {mass:.8f}, mode density within {rel:.1%} of the analytic pdf")


def test_criterion_10_end_to_end_determinism(tmp_path):
    import json

    from hexevo.cli import main

    def config_dict(out):
        return {
            "seed": 77,
            "encoding": "direct",
            "output_dir": str(out),
            "evolution": {"population_size": 8, "generations": 20, "checkpoint_every": 10},
            "mutation": {"weight_mutation_rate": 0.2, "weight_step_sigma": 0.1},
            "signature": {"samples": 50},
            "damage": {"generations": 10},
        }

    def run_pipeline(tag, workers):
        out = tmp_path / tag
        path = tmp_path / f"{tag}.json"
        path.write_text(json.dumps(config_dict(out)))
        assert main(["evolve", str(path), "--workers", str(workers)]) == 0
        assert main(["signature", str(out), "--workers", str(workers)]) == 0
        assert main(["damage", str(out), "--scenario", "S1", "--workers", str(workers)]) == 0
        return {
            name: (out / name).read_bytes()
            for name in ("stats.csv", "signature_medium.csv", "signature_medium_grid.csv", "damage_S1.csv")
        }

    serial_a = run_pipeline("serial-a", 1)
    serial_b = run_pipeline("serial-b", 1)
    parallel = run_pipeline("parallel", 2)
    assert serial_a == serial_b
    assert serial_a == parallel
    report(10, "evolve+signature+damage byte-identical across reruns and worker pools")
