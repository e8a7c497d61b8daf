"""Mutation signatures: the post-mutation joint distribution of fitness
change and gait divergence for one individual.

Each sample mutates the parent once (never chained), evaluates the mutant,
and records

    fitness_change  = (P_mutant - P_parent) / P_parent
    divergence      = nmi_distance(parent gait bits, mutant gait bits)

A fitness change below -1 means the mutant lost all forward motion.  The
divergence is clamped to [0, 1] for the density grid; the raw value is kept
alongside.  Densities are product-Gaussian kernel estimates on a fixed grid
of cell centers with per-axis bandwidths from the sample spread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .controllers import mutate_genome
from .cppn import MutationConfig
from .diversity import nmi_distance
from .evolution import EvalContext, Individual

INTENSITY_MULTIPLIERS = {"low": 0.25, "medium": 1.0, "high": 4.0}
DEFAULT_GRID_SHAPE = (100, 100)
DEFAULT_WINDOW = ((0.0, 1.0), (-3.0, 1.0))  # (divergence axis), (fitness-change axis)
BANDWIDTH_FLOOR = 1e-3
LETHAL_FITNESS_CHANGE = -1.0


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class SignatureSample:
    sample_id: int
    fitness_change: float
    divergence: float          # clamped to [0, 1]
    divergence_raw: float
    parent_displacement: float
    mutant_displacement: float
    mutant_failed: bool

    @property
    def lethal(self) -> bool:
        return self.fitness_change < LETHAL_FITNESS_CHANGE


@dataclass(frozen=True)
class SignatureGrid:
    density: np.ndarray        # (ny, nx) rows over fitness change, cols over divergence
    x_centers: np.ndarray      # divergence axis
    y_centers: np.ndarray      # fitness-change axis
    bandwidth_x: float
    bandwidth_y: float
    window: tuple[tuple[float, float], tuple[float, float]]

    @property
    def cell_area(self) -> float:
        dx = self.x_centers[1] - self.x_centers[0]
        dy = self.y_centers[1] - self.y_centers[0]
        return float(dx * dy)

    def mass(self) -> float:
        return float(self.density.sum() * self.cell_area)


def sample_signature(
    parent: Individual,
    ctx: EvalContext,
    mutation: MutationConfig,
    n: int = 1000,
    intensity: float = 1.0,
    seed: int = 0,
    stream_name: str = "signature",
) -> list[SignatureSample]:
    """Draw ``n`` independent mutants of ``parent`` and score each one.

    Every mutant starts from the parent genome (mutations are never chained)
    and owns the stream (seed, stream_name, index), so sample sets are
    reproducible and order-independent.
    """
    if n < 1:
        raise SignatureError("need at least one sample")
    parent_p = parent.eval.forward_displacement
    if parent_p <= 0:
        raise SignatureError(
            f"parent forward displacement is {parent_p}; fitness change is undefined"
        )
    cfg = mutation.with_intensity(mutation.intensity_multiplier * intensity)
    genomes = [
        mutate_genome(ctx.encoding, parent.genome, cfg, rngmod.stream(seed, stream_name, i))
        for i in range(n)
    ]
    results = ctx.evaluate_genomes(genomes)
    samples = []
    for i, res in enumerate(results):
        raw = nmi_distance(parent.behavior, np.asarray(res.gait, dtype=np.uint8).reshape(-1))
        samples.append(
            SignatureSample(
                sample_id=i,
                fitness_change=(res.forward_displacement - parent_p) / parent_p,
                divergence=float(min(1.0, max(0.0, raw))),
                divergence_raw=float(raw),
                parent_displacement=parent_p,
                mutant_displacement=res.forward_displacement,
                mutant_failed=res.failed,
            )
        )
    return samples


def beneficial_proportion(
    samples: list[SignatureSample],
    fitness_floor: float = -1.0,
    divergence_floor: float = 0.5,
) -> float:
    """Fraction of mutants strictly above both floors.

    The default fitness floor -1 excludes lethal mutants only; the strict
    variant uses -0.5 (at most a 50 percent performance drop).
    """
    if not samples:
        raise SignatureError("empty sample list")
    hits = sum(
        1 for s in samples if s.fitness_change > fitness_floor and s.divergence > divergence_floor
    )
    return hits / len(samples)


def _scott_bandwidth(values: np.ndarray) -> float:
    m = values.size
    spread = float(np.std(values, ddof=1)) if m > 1 else 0.0
    if not np.isfinite(spread) or spread <= 0.0:
        return BANDWIDTH_FLOOR
    return max(BANDWIDTH_FLOOR, spread * m ** (-1.0 / 6.0))


def kde_grid_points(
    points: np.ndarray,
    shape: tuple[int, int] = DEFAULT_GRID_SHAPE,
    window=DEFAULT_WINDOW,
) -> SignatureGrid:
    """Product-Gaussian density estimate of 2-D points on a grid of cell centers."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise SignatureError("points must be a nonempty (m, 2) array")
    (x_lo, x_hi), (y_lo, y_hi) = window
    nx, ny = shape
    dx = (x_hi - x_lo) / nx
    dy = (y_hi - y_lo) / ny
    x_centers = x_lo + (np.arange(nx) + 0.5) * dx
    y_centers = y_lo + (np.arange(ny) + 0.5) * dy
    hx = _scott_bandwidth(pts[:, 0])
    hy = _scott_bandwidth(pts[:, 1])
    # separable kernels: density = Ky^T Kx / m
    gx = np.exp(-0.5 * ((x_centers[None, :] - pts[:, 0:1]) / hx) ** 2) / (hx * np.sqrt(2 * np.pi))
    gy = np.exp(-0.5 * ((y_centers[None, :] - pts[:, 1:2]) / hy) ** 2) / (hy * np.sqrt(2 * np.pi))
    density = (gy.T @ gx) / pts.shape[0]
    return SignatureGrid(
        density=density,
        x_centers=x_centers,
        y_centers=y_centers,
        bandwidth_x=hx,
        bandwidth_y=hy,
        window=((x_lo, x_hi), (y_lo, y_hi)),
    )


def kde_grid(
    samples: list[SignatureSample],
    shape: tuple[int, int] = DEFAULT_GRID_SHAPE,
    window=DEFAULT_WINDOW,
) -> SignatureGrid:
    """Density grid over (divergence, fitness change) for a sample set."""
    if not samples:
        raise SignatureError("empty sample list")
    pts = np.array([[s.divergence, s.fitness_change] for s in samples])
    return kde_grid_points(pts, shape=shape, window=window)


def intensity_sweep(
    parent: Individual,
    ctx: EvalContext,
    mutation: MutationConfig,
    n: int = 1000,
    seed: int = 0,
    multipliers: dict[str, float] | None = None,
) -> dict[str, list[SignatureSample]]:
    """Signature samples at low / medium / high mutation intensity.

    All three sets share the parent but use independent named streams.
    """
    multipliers = dict(INTENSITY_MULTIPLIERS if multipliers is None else multipliers)
    return {
        name: sample_signature(
            parent,
            ctx,
            mutation,
            n=n,
            intensity=mult,
            seed=seed,
            stream_name=f"signature-{name}",
        )
        for name, mult in multipliers.items()
    }


def median_divergence(samples: list[SignatureSample]) -> float:
    return float(np.median([s.divergence for s in samples]))


def median_fitness_change(samples: list[SignatureSample]) -> float:
    return float(np.median([s.fitness_change for s in samples]))
