"""Coupled amplitude-controlled phase oscillators for hexapod gait generation.

Each oscillator carries a phase that advances at a common intrinsic frequency
plus coupling terms, and an amplitude that relaxes to its intrinsic value
through critically damped second-order dynamics:

    phase_rate_i  = 2*pi*f + sum_j amp_j * w * sin(phase_j - phase_i - bias_ij)
    amp_accel_i   = b * (b/4 * (A_i - amp_i) - amp_rate_i)
    output_i      = amp_i * cos(phase_i)

Couplings are undirected edges with antisymmetric phase biases
(bias_ji = -bias_ij); the bias is the target steady-state phase difference
phase_j - phase_i.  The hexapod substrate has 12 oscillators and 17 edges.
Around each of its 6 independent loops the bias sum must be a multiple of
2*pi; 11 biases are free and 6 are derived to close the loops.

Integration is explicit Euler.  State is a plain value object; stepping
returns a new state, so evaluations can run concurrently without sharing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * np.pi

OSCILLATOR_COUNT = 12
COUPLING_WEIGHT = 20.0         # prefixed on every edge for rapid synchronization
INTRINSIC_FREQUENCY_HZ = 1.0
AMPLITUDE_GAIN = 10.0          # rad/s, convergence rate of the amplitude dynamics
STATE_LIMIT = 1e6              # beyond this magnitude the evaluation is declared failed

# Oscillator numbering (1-based, matching the substrate layout):
#   1,2,3   elevation (s2) of left front/middle/rear legs
#   4,5,6   horizontal (s1) of left front/middle/rear legs
#   7,8,9   horizontal (s1) of right front/middle/rear legs
#   10,11,12 elevation (s2) of right front/middle/rear legs
# Edges are stored canonically as (lo, hi); the stored bias means
# phase_hi - phase_lo at steady state.
HEXAPOD_EDGES: tuple[tuple[int, int], ...] = (
    (1, 4), (2, 5), (3, 6), (7, 10), (8, 11), (9, 12),   # per-leg s2-s1 pairs
    (4, 5), (5, 6), (7, 8), (8, 9),                      # s1 chains
    (4, 7), (5, 8), (6, 9),                              # left-right s1 rungs
    (1, 2), (2, 3), (10, 11), (11, 12),                  # s2 chains
)

# The six derived edges, each closing exactly one independent loop.
DERIVED_EDGES: tuple[tuple[int, int], ...] = ((1, 2), (2, 3), (4, 7), (6, 9), (10, 11), (11, 12))

# Free edges in canonical order; this order defines gene/query layout everywhere.
FREE_EDGES: tuple[tuple[int, int], ...] = tuple(
    sorted(e for e in HEXAPOD_EDGES if e not in DERIVED_EDGES)
)

# Each loop is a directed vertex cycle whose first edge is the derived one.
LOOPS: tuple[tuple[int, ...], ...] = (
    (1, 2, 5, 4),
    (2, 3, 6, 5),
    (4, 7, 8, 5),
    (6, 9, 8, 5),
    (10, 11, 8, 7),
    (11, 12, 9, 8),
)

# Leg index -> 1-based horizontal-orientation oscillator (legs: 0 right-front,
# 1 right-middle, 2 right-rear, 3 left-rear, 4 left-middle, 5 left-front).
LEG_TO_HORIZONTAL_OSC: dict[int, int] = {0: 7, 1: 8, 2: 9, 3: 6, 4: 5, 5: 4}


class CouplingError(ValueError):
    """Raised for malformed coupling graphs."""


@dataclass(frozen=True)
class AepConfig:
    """Touchdown phase for the phase-resetting feedback (anterior extreme position)."""

    duty_ratio: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.duty_ratio < 1.0:
            raise ValueError("duty_ratio must lie in (0, 1)")

    @property
    def landing_phase(self) -> float:
        return TWO_PI * (1.0 - self.duty_ratio)


@dataclass(frozen=True)
class OscillatorParams:
    intrinsic_amplitudes: tuple[float, ...]
    frequency_hz: float = INTRINSIC_FREQUENCY_HZ
    amplitude_gain: float = AMPLITUDE_GAIN

    def __post_init__(self) -> None:
        if any(a < 0 or not np.isfinite(a) for a in self.intrinsic_amplitudes):
            raise ValueError("intrinsic amplitudes must be finite and non-negative")

    @property
    def count(self) -> int:
        return len(self.intrinsic_amplitudes)


@dataclass(frozen=True)
class OscillatorState:
    phase: np.ndarray
    amplitude: np.ndarray
    amplitude_rate: np.ndarray

    @staticmethod
    def initial(count: int) -> "OscillatorState":
        return OscillatorState(
            phase=np.zeros(count),
            amplitude=np.zeros(count),
            amplitude_rate=np.zeros(count),
        )

    def blown(self, limit: float = STATE_LIMIT) -> bool:
        for arr in (self.phase, self.amplitude, self.amplitude_rate):
            if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > limit):
                return True
        return False


class CouplingGraph:
    """Undirected coupling topology with antisymmetric phase biases.

    ``edges`` are canonical (lo, hi) 1-based pairs; ``biases[k]`` is the target
    phase_hi - phase_lo for edge k.  ``count`` is the number of oscillators.
    """

    def __init__(self, edges, biases, count: int = OSCILLATOR_COUNT, weight: float = COUPLING_WEIGHT):
        edges = tuple((int(a), int(b)) for a, b in edges)
        biases = np.asarray(biases, dtype=float)
        if biases.shape != (len(edges),):
            raise CouplingError("one bias per edge required")
        if not np.all(np.isfinite(biases)):
            raise CouplingError("biases must be finite")
        for a, b in edges:
            if not (1 <= a < b <= count):
                raise CouplingError(f"edge ({a}, {b}) is not canonical for {count} oscillators")
        if len(set(edges)) != len(edges):
            raise CouplingError("duplicate edges")
        self.edges = edges
        self.biases = biases
        self.count = count
        self.weight = float(weight)
        # Directed arrays for the step kernel: for every edge (i, j) there are
        # two entries, (i with neighbor j, bias_ij) and (j with neighbor i, -bias_ij).
        upd, nbr, bias = [], [], []
        for k, (a, b) in enumerate(edges):
            upd.append(a - 1)
            nbr.append(b - 1)
            bias.append(biases[k])
            upd.append(b - 1)
            nbr.append(a - 1)
            bias.append(-biases[k])
        self._upd = np.array(upd, dtype=np.intp)
        self._nbr = np.array(nbr, dtype=np.intp)
        self._bias = np.array(bias, dtype=float)

    def bias(self, i: int, j: int) -> float:
        """Directed bias: target phase_j - phase_i.  Antisymmetric by construction."""
        if (i, j) in self._index:
            return float(self.biases[self._index[(i, j)]])
        if (j, i) in self._index:
            return -float(self.biases[self._index[(j, i)]])
        raise CouplingError(f"no edge between {i} and {j}")

    @property
    def _index(self) -> dict[tuple[int, int], int]:
        idx = getattr(self, "_index_cache", None)
        if idx is None:
            idx = {e: k for k, e in enumerate(self.edges)}
            self._index_cache = idx
        return idx

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CouplingGraph)
            and self.edges == other.edges
            and self.count == other.count
            and self.weight == other.weight
            and np.array_equal(self.biases, other.biases)
        )

    def to_json_dict(self) -> dict:
        return {
            "count": self.count,
            "weight": self.weight,
            "edges": [[a, b] for a, b in self.edges],
            "biases": [float(b) for b in self.biases],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "CouplingGraph":
        return CouplingGraph(
            edges=[tuple(e) for e in data["edges"]],
            biases=data["biases"],
            count=int(data["count"]),
            weight=float(data["weight"]),
        )


def complete_loop_biases(free_biases, weight: float = COUPLING_WEIGHT) -> CouplingGraph:
    """Build the full 17-edge hexapod graph from the 11 free biases.

    Each derived bias closes exactly one independent loop so that the directed
    bias sum around the loop is a multiple of 2*pi.
    """
    free = np.asarray(free_biases, dtype=float)
    if free.shape != (len(FREE_EDGES),):
        raise CouplingError(f"expected {len(FREE_EDGES)} free biases, got shape {free.shape}")
    if not np.all(np.isfinite(free)):
        raise CouplingError("free biases must be finite")
    assigned: dict[tuple[int, int], float] = {e: float(v) for e, v in zip(FREE_EDGES, free)}

    def lookup(i: int, j: int) -> float:
        if (i, j) in assigned:
            return assigned[(i, j)]
        return -assigned[(j, i)]

    for loop in LOOPS:
        a, b = loop[0], loop[1]
        rest = 0.0
        cycle = list(loop) + [loop[0]]
        for u, v in zip(cycle[1:-1], cycle[2:]):
            rest += lookup(u, v)
        derived = (-rest) % TWO_PI
        assigned[(a, b) if a < b else (b, a)] = derived if a < b else -derived

    biases = [assigned[e] for e in HEXAPOD_EDGES]
    return CouplingGraph(HEXAPOD_EDGES, biases, count=OSCILLATOR_COUNT, weight=weight)


def loop_bias_sum(graph: CouplingGraph, loop: tuple[int, ...]) -> float:
    """Directed bias sum around a vertex cycle (diagnostic for loop closure)."""
    cycle = list(loop) + [loop[0]]
    return float(sum(graph.bias(u, v) for u, v in zip(cycle, cycle[1:])))


def outputs_of(state: OscillatorState) -> np.ndarray:
    return state.amplitude * np.cos(state.phase)


def step(
    state: OscillatorState,
    params: OscillatorParams,
    graph: CouplingGraph,
    dt: float,
) -> tuple[OscillatorState, np.ndarray]:
    """One explicit Euler step; returns the new state and its outputs."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    phase, amp, rate = state.phase, state.amplitude, state.amplitude_rate
    coupling = np.zeros(params.count)
    if len(graph._upd):
        contrib = amp[graph._nbr] * graph.weight * np.sin(
            phase[graph._nbr] - phase[graph._upd] - graph._bias
        )
        coupling = np.bincount(graph._upd, weights=contrib, minlength=params.count)
    phase_rate = TWO_PI * params.frequency_hz + coupling
    gain = params.amplitude_gain
    accel = gain * (gain / 4.0 * (np.asarray(params.intrinsic_amplitudes) - amp) - rate)
    new = OscillatorState(
        phase=phase + dt * phase_rate,
        amplitude=amp + dt * rate,
        amplitude_rate=rate + dt * accel,
    )
    return new, outputs_of(new)


def euler_substeps(
    phase: np.ndarray,
    amp: np.ndarray,
    rate: np.ndarray,
    intrinsic: np.ndarray,
    params: OscillatorParams,
    graph: CouplingGraph,
    dt: float,
    count: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance ``count`` Euler substeps on raw arrays.

    Computes exactly the same update as ``step`` (same expressions, same
    order) without per-substep state objects; the hot path for evaluations.
    """
    upd, nbr, bias = graph._upd, graph._nbr, graph._bias
    weight = graph.weight
    gain = params.amplitude_gain
    base_rate = TWO_PI * params.frequency_hz
    n = params.count
    has_edges = len(upd) > 0
    for _ in range(count):
        if has_edges:
            contrib = amp[nbr] * weight * np.sin(phase[nbr] - phase[upd] - bias)
            coupling = np.bincount(upd, weights=contrib, minlength=n)
            phase_rate = base_rate + coupling
        else:
            phase_rate = base_rate
        accel = gain * (gain / 4.0 * (intrinsic - amp) - rate)
        phase = phase + dt * phase_rate
        new_amp = amp + dt * rate
        rate = rate + dt * accel
        amp = new_amp
    return phase, amp, rate


def phase_reset(
    state: OscillatorState,
    landed_legs,
    aep: AepConfig = AepConfig(),
) -> OscillatorState:
    """Reset the horizontal oscillator of each leg that just touched down.

    Callers pass only contact rising edges; continuous contact must not
    retrigger (see ``contact_rising_edges``).
    """
    legs = sorted(set(landed_legs))
    if not legs:
        return state
    phase = state.phase.copy()
    target = aep.landing_phase
    for leg in legs:
        if leg not in LEG_TO_HORIZONTAL_OSC:
            raise ValueError(f"leg index {leg} out of range 0..5")
        phase[LEG_TO_HORIZONTAL_OSC[leg] - 1] = target
    return replace(state, phase=phase)


def contact_rising_edges(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Boolean mask of legs entering contact (no-contact -> contact)."""
    prev = np.asarray(previous, dtype=bool)
    cur = np.asarray(current, dtype=bool)
    return cur & ~prev


def uncoupled_params(amplitude: float, count: int = 1) -> OscillatorParams:
    return OscillatorParams(intrinsic_amplitudes=(float(amplitude),) * count)


def empty_graph(count: int) -> CouplingGraph:
    return CouplingGraph(edges=(), biases=np.zeros(0), count=count)


def simulate_network(
    params: OscillatorParams,
    graph: CouplingGraph,
    duration: float,
    dt: float,
    state: OscillatorState | None = None,
):
    """Integrate for ``duration`` seconds; returns (times, phases, amps, outputs)."""
    steps = int(round(duration / dt))
    n = params.count
    state = OscillatorState.initial(n) if state is None else state
    times = np.zeros(steps)
    phases = np.zeros((steps, n))
    amps = np.zeros((steps, n))
    outs = np.zeros((steps, n))
    for k in range(steps):
        state, out = step(state, params, graph, dt)
        times[k] = (k + 1) * dt
        phases[k] = state.phase
        amps[k] = state.amplitude
        outs[k] = out
    return times, phases, amps, outs


def trace_csv(params: OscillatorParams, graph: CouplingGraph, duration: float, dt: float) -> str:
    """Debug dump: t, phase_1..n, amp_1..n, out_1..n."""
    times, phases, amps, outs = simulate_network(params, graph, duration, dt)
    n = params.count
    header = (
        ["t"]
        + [f"theta_{i + 1}" for i in range(n)]
        + [f"alpha_{i + 1}" for i in range(n)]
        + [f"gamma_{i + 1}" for i in range(n)]
    )
    lines = [",".join(header)]
    for k in range(len(times)):
        row = [times[k], *phases[k], *amps[k], *outs[k]]
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
