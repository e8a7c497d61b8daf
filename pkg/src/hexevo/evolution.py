"""Multiobjective evolutionary loop (nondominated sorting + crowding).

Three objectives are maximized per individual: the negated distance to a
goal 25 m straight ahead, the negated absolute heading angle, and the mean
Hamming distance between the individual's gait vector and every gait in the
reference population.  Variation is mutation only; parents are picked by
binary tournament on (rank, crowding distance).

Determinism: every random draw comes from a named stream keyed by
(seed, purpose, generation, slot), so runs are reproducible bit for bit
across serial and parallel evaluation and across checkpoint resume.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .controllers import decode, genome_from_json_dict, genome_to_json_dict, mutate_genome, random_genome_for
from .cppn import MutationConfig
from .simulator import (
    DEFAULT_CONTROL_DT_S,
    DEFAULT_DURATION_S,
    EvalResult,
    HexapodConfig,
    behavior_vector,
    simulate,
)

BEST_HEADING_GATE_DEG = 1.0


class EvolutionError(ValueError):
    pass


@dataclass(frozen=True)
class DamageScenario:
    """Named leg-removal scenario."""

    name: str
    removed_legs: frozenset[int]

    def __post_init__(self) -> None:
        if not self.removed_legs:
            raise EvolutionError("a damage scenario must remove at least one leg")
        if not self.removed_legs <= set(range(6)):
            raise EvolutionError("leg indices must lie in 0..5")


DAMAGE_SCENARIOS: dict[str, DamageScenario] = {
    "S1": DamageScenario("S1", frozenset({1})),        # right-middle leg
    "S2": DamageScenario("S2", frozenset({1, 4})),     # both middle legs
    "S3": DamageScenario("S3", frozenset({1, 3})),     # right-middle + left-rear
}


@dataclass(frozen=True)
class EvolutionConfig:
    seed: int
    encoding: str = "supg"
    population_size: int = 32
    generations: int = 300
    mutation: MutationConfig = field(default_factory=MutationConfig)
    tournament_size: int = 2
    diversity_reference: str = "merged"   # or "population"
    checkpoint_every: int = 100
    workers: int = 1

    def __post_init__(self) -> None:
        if self.seed is None:
            raise EvolutionError("seed is mandatory; wall-clock seeding is not allowed")
        if self.population_size < 2 or self.population_size % 2 != 0:
            raise EvolutionError("population_size must be an even number >= 2")
        if self.generations < 0:
            raise EvolutionError("generations must be >= 0")
        if self.diversity_reference not in ("merged", "population"):
            raise EvolutionError("diversity_reference must be 'merged' or 'population'")
        if self.tournament_size < 2:
            raise EvolutionError("tournament_size must be >= 2")


@dataclass
class Individual:
    genome: object
    eval: EvalResult
    behavior: np.ndarray
    objectives: np.ndarray | None = None
    rank: int = -1
    crowding: float = 0.0

    @property
    def forward_displacement(self) -> float:
        return self.eval.forward_displacement


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_P: float
    median_P: float
    best_F: float
    best_Theta: float
    front0_best_P: float

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.generation),
                repr(float(self.best_P)),
                repr(float(self.median_P)),
                repr(float(self.best_F)),
                repr(float(self.best_Theta)),
            ]
        )


STATS_CSV_HEADER = "generation,best_P,median_P,best_F,best_Theta"


@dataclass
class RunArtifacts:
    config: EvolutionConfig
    stats: list[GenerationStats]
    population: list[Individual]
    best: Individual


@dataclass
class RecoveryArtifacts:
    scenario: DamageScenario
    original_displacement: float
    curve: list[tuple[int, float, float]]   # (generation, best_P, proportion_restored)
    proportion_restored: float
    generations_to_threshold: int
    threshold: float
    capped: bool
    population: list[Individual]


# --- evaluation fan-out -----------------------------------------------------

def _evaluate_task(args) -> EvalResult:
    kind, genome, hexapod, duration, control_dt = args
    return simulate(decode(kind, genome, control_dt), hexapod, duration, control_dt)


class EvalContext:
    """Evaluation fan-out for one (encoding, robot, timing) setting.

    Results are aggregated by task index, so worker count and scheduling
    never change the outcome.
    """

    def __init__(
        self,
        encoding: str,
        hexapod: HexapodConfig,
        duration: float = DEFAULT_DURATION_S,
        control_dt: float = DEFAULT_CONTROL_DT_S,
        workers: int = 1,
    ):
        self.encoding = encoding
        self.hexapod = hexapod
        self.duration = duration
        self.control_dt = control_dt
        self.workers = max(1, int(workers))
        self._pool: ProcessPoolExecutor | None = None

    def evaluate_genome(self, genome) -> EvalResult:
        return _evaluate_task((self.encoding, genome, self.hexapod, self.duration, self.control_dt))

    def evaluate_genomes(self, genomes) -> list[EvalResult]:
        tasks = [
            (self.encoding, g, self.hexapod, self.duration, self.control_dt) for g in genomes
        ]
        if self.workers == 1 or len(tasks) < 2:
            return [_evaluate_task(t) for t in tasks]
        if self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.workers)
        chunk = max(1, len(tasks) // (self.workers * 4))
        return list(self._pool.map(_evaluate_task, tasks, chunksize=chunk))

    def make_individual(self, genome) -> Individual:
        result = self.evaluate_genome(genome)
        return Individual(genome=genome, eval=result, behavior=behavior_vector(result.gait))

    def make_individuals(self, genomes) -> list[Individual]:
        results = self.evaluate_genomes(genomes)
        return [
            Individual(genome=g, eval=r, behavior=behavior_vector(r.gait))
            for g, r in zip(genomes, results)
        ]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self) -> "EvalContext":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# --- objectives and sorting -------------------------------------------------

def mean_hamming_to_pool(behaviors: np.ndarray, pool: np.ndarray) -> np.ndarray:
    """Mean Hamming distance from each row of ``behaviors`` to all rows of ``pool``."""
    diffs = (behaviors[:, None, :] != pool[None, :, :]).sum(axis=2)
    return diffs.mean(axis=1)


def compute_objectives(individuals: list[Individual], reference: list[Individual]) -> None:
    """Assign the 3-objective vector to each individual against ``reference``.

    Objective values depend on the reference population; callers recompute
    them whenever the reference changes.
    """
    if not individuals:
        return
    behaviors = np.stack([ind.behavior for ind in individuals])
    pool = np.stack([ind.behavior for ind in reference])
    diversity = mean_hamming_to_pool(behaviors, pool)
    for i, ind in enumerate(individuals):
        ind.objectives = np.array(
            [-ind.eval.goal_distance, -abs(ind.eval.heading_deg), diversity[i]]
        )


def fast_nondominated_sort(objectives: np.ndarray) -> list[list[int]]:
    """Pareto fronts (maximization), each front in ascending index order."""
    objs = np.asarray(objectives, dtype=float)
    if objs.ndim != 2:
        raise EvolutionError("objective matrix must be 2-D")
    n = objs.shape[0]
    if n == 0:
        return []
    ge = (objs[:, None, :] >= objs[None, :, :]).all(axis=2)
    gt = (objs[:, None, :] > objs[None, :, :]).any(axis=2)
    dominates = ge & gt
    dominated_count = dominates.sum(axis=0)
    fronts: list[list[int]] = []
    current = [i for i in range(n) if dominated_count[i] == 0]
    assigned = 0
    while current:
        fronts.append(current)
        assigned += len(current)
        if assigned == n:
            break
        nxt_mask = np.zeros(n, dtype=bool)
        for p in current:
            dominated_count[dominates[p]] -= 1
        for p in current:
            dominated_count[p] = -1  # already placed
        current = [i for i in range(n) if dominated_count[i] == 0]
    return fronts


def crowding_distance(front: list[int], objectives: np.ndarray) -> np.ndarray:
    """Crowding distances for one front, aligned with ``front`` order.

    Boundary individuals per objective get +inf; a degenerate objective
    (max == min) contributes 0.  Ties resolve by stable sort on index.
    """
    objs = np.asarray(objectives, dtype=float)
    m = len(front)
    if m == 0:
        raise EvolutionError("front must be nonempty")
    dist = np.zeros(m)
    if m <= 2:
        return np.full(m, np.inf)
    sub = objs[front]
    for k in range(objs.shape[1]):
        order = np.argsort(sub[:, k], kind="stable")
        vmin = sub[order[0], k]
        vmax = sub[order[-1], k]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if vmax > vmin:
            span = vmax - vmin
            for pos in range(1, m - 1):
                i = order[pos]
                if not np.isinf(dist[i]):
                    dist[i] += (sub[order[pos + 1], k] - sub[order[pos - 1], k]) / span
    return dist


def assign_ranks(individuals: list[Individual]) -> list[list[int]]:
    objs = np.stack([ind.objectives for ind in individuals])
    fronts = fast_nondominated_sort(objs)
    for rank, front in enumerate(fronts):
        dists = crowding_distance(front, objs)
        for i, d in zip(front, dists):
            individuals[i].rank = rank
            individuals[i].crowding = float(d)
    return fronts


def truncate_population(individuals: list[Individual], fronts: list[list[int]], size: int) -> list[Individual]:
    survivors: list[int] = []
    for front in fronts:
        if len(survivors) + len(front) <= size:
            survivors.extend(front)
            continue
        remaining = size - len(survivors)
        if remaining > 0:
            ordered = sorted(front, key=lambda i: (-individuals[i].crowding, i))
            survivors.extend(ordered[:remaining])
        break
    return [individuals[i] for i in survivors]


def _tournament_pick(population: list[Individual], rng: np.random.Generator, k: int) -> Individual:
    picks = rng.integers(len(population), size=k)
    best = population[int(picks[0])]
    for idx in picks[1:]:
        cand = population[int(idx)]
        if cand.rank < best.rank or (cand.rank == best.rank and cand.crowding > best.crowding):
            best = cand
    return best


def _stats_for(generation: int, population: list[Individual]) -> GenerationStats:
    displacements = np.array([ind.eval.forward_displacement for ind in population])
    goal = np.array([ind.eval.goal_distance for ind in population])
    best_idx = int(np.argmin(goal))
    front0 = [ind for ind in population if ind.rank == 0]
    front0_best = max(ind.eval.forward_displacement for ind in front0) if front0 else float(displacements.max())
    return GenerationStats(
        generation=generation,
        best_P=float(displacements.max()),
        median_P=float(np.median(displacements)),
        best_F=float(goal[best_idx]),
        best_Theta=float(population[best_idx].eval.heading_deg),
        front0_best_P=float(front0_best),
    )


def select_best(population: list[Individual]) -> Individual:
    """The reporting champion: least goal distance among individuals whose
    heading stays within +-1 degree; falls back to the largest forward
    displacement when nobody meets the gate."""
    gated = [ind for ind in population if abs(ind.eval.heading_deg) <= BEST_HEADING_GATE_DEG]
    if gated:
        return min(gated, key=lambda ind: (ind.eval.goal_distance,))
    return max(population, key=lambda ind: (ind.eval.forward_displacement,))


# --- checkpoints --------------------------------------------------------------

def checkpoint_dict(config: EvolutionConfig, generation: int, population: list[Individual]) -> dict:
    return {
        "format": 1,
        "generation": generation,
        "seed": config.seed,
        "encoding": config.encoding,
        "population": [
            {
                "genome": genome_to_json_dict(config.encoding, ind.genome),
                "rank": ind.rank,
                "crowding": ind.crowding,
            }
            for ind in population
        ],
    }


def write_checkpoint(path: Path, config: EvolutionConfig, generation: int, population: list[Individual]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(checkpoint_dict(config, generation, population), indent=1) + "\n")


def load_checkpoint(path: Path, config: EvolutionConfig, ctx: EvalContext) -> tuple[int, list[Individual]]:
    data = json.loads(Path(path).read_text())
    if data.get("seed") != config.seed or data.get("encoding") != config.encoding:
        raise EvolutionError("checkpoint does not match the run configuration")
    genomes = [genome_from_json_dict(config.encoding, e["genome"]) for e in data["population"]]
    population = ctx.make_individuals(genomes)
    for ind, entry in zip(population, data["population"]):
        ind.rank = int(entry["rank"])
        ind.crowding = float(entry["crowding"])
    compute_objectives(population, population)
    return int(data["generation"]), population


# --- main loops ---------------------------------------------------------------

def evolve(
    config: EvolutionConfig,
    hexapod: HexapodConfig | None = None,
    duration: float = DEFAULT_DURATION_S,
    control_dt: float = DEFAULT_CONTROL_DT_S,
    initial_genomes: list | None = None,
    checkpoint_dir: Path | None = None,
    resume_from: Path | None = None,
    ctx: EvalContext | None = None,
) -> RunArtifacts:
    """Run the generational loop and return stats, final population, and champion.

    ``initial_genomes`` overrides random initialization (used to seed
    damage-recovery populations with mutants of a champion).
    """
    hexapod = hexapod if hexapod is not None else HexapodConfig()
    own_ctx = ctx is None
    if ctx is None:
        ctx = EvalContext(config.encoding, hexapod, duration, control_dt, workers=config.workers)
    try:
        n = config.population_size
        stats: list[GenerationStats] = []
        start_gen = 0
        if resume_from is not None:
            start_gen, population = load_checkpoint(Path(resume_from), config, ctx)
        else:
            if initial_genomes is None:
                genomes = [
                    random_genome_for(config.encoding, rngmod.stream(config.seed, "init", i))
                    for i in range(n)
                ]
            else:
                if len(initial_genomes) != n:
                    raise EvolutionError("initial_genomes must match population_size")
                genomes = list(initial_genomes)
            population = ctx.make_individuals(genomes)
            compute_objectives(population, population)
            assign_ranks(population)
        if resume_from is None:
            stats.append(_stats_for(0, population))
            if checkpoint_dir is not None and config.checkpoint_every > 0:
                write_checkpoint(Path(checkpoint_dir) / "checkpoint_gen000000.json", config, 0, population)

        for gen in range(start_gen + 1, config.generations + 1):
            select_rng = rngmod.stream(config.seed, "select", gen)
            offspring_genomes = []
            for slot in range(n):
                parent = _tournament_pick(population, select_rng, config.tournament_size)
                child = mutate_genome(
                    config.encoding,
                    parent.genome,
                    config.mutation,
                    rngmod.stream(config.seed, "mutate", gen, slot),
                )
                offspring_genomes.append(child)
            offspring = ctx.make_individuals(offspring_genomes)
            merged = population + offspring
            reference = merged if config.diversity_reference == "merged" else population
            compute_objectives(merged, reference)
            fronts = assign_ranks(merged)
            population = truncate_population(merged, fronts, n)
            stats.append(_stats_for(gen, population))
            if (
                checkpoint_dir is not None
                and config.checkpoint_every > 0
                and (gen % config.checkpoint_every == 0 or gen == config.generations)
            ):
                write_checkpoint(
                    Path(checkpoint_dir) / f"checkpoint_gen{gen:06d}.json", config, gen, population
                )
        best = select_best(population)
        return RunArtifacts(config=config, stats=stats, population=population, best=best)
    finally:
        if own_ctx:
            ctx.close()


def recovery_experiment(
    best: Individual,
    scenario: DamageScenario,
    config: EvolutionConfig,
    hexapod: HexapodConfig | None = None,
    duration: float = DEFAULT_DURATION_S,
    control_dt: float = DEFAULT_CONTROL_DT_S,
    threshold: float = 0.85,
    checkpoint_dir: Path | None = None,
) -> RecoveryArtifacts:
    """Re-adapt a champion to a damaged robot.

    The seed population is ``population_size`` mutants of the champion
    (standard mutation operator); selection then runs on the damaged robot.
    The recovery time is the first generation whose best forward displacement
    reaches ``threshold`` times the champion's undamaged displacement, capped
    at the generation budget when unreached.
    """
    hexapod = hexapod if hexapod is not None else HexapodConfig()
    original = best.eval.forward_displacement
    if original <= 0:
        raise EvolutionError("champion has no forward displacement; recovery ratio undefined")
    damaged = hexapod.with_damage(scenario.removed_legs)
    seed = rngmod.derive_seed(config.seed, f"recovery:{scenario.name}")
    recovery_config = replace(config, seed=seed)
    mutants = [
        mutate_genome(
            config.encoding,
            best.genome,
            config.mutation,
            rngmod.stream(recovery_config.seed, "recovery-seed", i),
        )
        for i in range(config.population_size)
    ]
    run = evolve(
        recovery_config,
        hexapod=damaged,
        duration=duration,
        control_dt=control_dt,
        initial_genomes=mutants,
        checkpoint_dir=checkpoint_dir,
    )
    curve = [(s.generation, s.best_P, s.best_P / original) for s in run.stats]
    final_ratio = curve[-1][2]
    reached = [g for g, _, ratio in curve if ratio >= threshold]
    capped = not reached
    gens_to_threshold = reached[0] if reached else config.generations
    return RecoveryArtifacts(
        scenario=scenario,
        original_displacement=original,
        curve=curve,
        proportion_restored=final_ratio,
        generations_to_threshold=gens_to_threshold,
        threshold=threshold,
        capped=capped,
        population=run.population,
    )
