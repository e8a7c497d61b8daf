"""Genotype decoders and per-tick command generation for the five encodings.

Command layout used everywhere downstream: a length-12 vector, channels 0..5
are the horizontal-orientation servo (s1) of legs 0..5 and channels 6..11 the
elevation servo (s2) of legs 0..5.  The extension servo mirrors the elevation
servo (s3 = -s2) inside the kinematics, so it is never commanded here.

Leg numbering runs clockwise around the body: 0 right-front, 1 right-middle,
2 right-rear, 3 left-rear, 4 left-middle, 5 left-front.  Leg k and leg 5-k
are contralateral.

Substrate coordinates (fixed, not evolved; x mirrors left/right):

    unit                          x        y
    s1 / s1-timer unit, right   +0.5   +1 front, 0 middle, -1 rear
    s1 / s1-timer unit, left    -0.5   same
    s2 / s2-timer unit, right   +1.0   same
    s2 / s2-timer unit, left    -1.0   same
    network sine input           0.0   +0.5
    network cosine input         0.0   -0.5

Hidden and output grids of the weight-network encoding reuse the 12-unit
joint layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cpg import (
    AepConfig,
    CouplingGraph,
    FREE_EDGES,
    OSCILLATOR_COUNT,
    OscillatorParams,
    OscillatorState,
    STATE_LIMIT,
    complete_loop_biases,
    euler_substeps,
    outputs_of,
    phase_reset,
)
from .cppn import CppnGenome, MutationConfig, mutate, random_genome

TWO_PI = 2.0 * math.pi

S1_RANGE = math.pi / 8
S2_RANGE = math.pi / 4

# Per-command-channel absolute servo limits (s1 x6, s2 x6).
CHANNEL_RANGE = np.array([S1_RANGE] * 6 + [S2_RANGE] * 6)

ENCODING_KINDS = ("direct", "cpg", "cpg_fb", "ann", "supg")

# Leg geometry shared by all coordinate tables: y by body position, columns
# ordered front, middle, rear.
_LEG_Y = {0: 1.0, 1: 0.0, 2: -1.0, 3: -1.0, 4: 0.0, 5: 1.0}
_LEG_SIDE = {0: 1.0, 1: 1.0, 2: 1.0, 3: -1.0, 4: -1.0, 5: -1.0}  # substrate x sign

# Oscillator coordinates indexed by 1-based oscillator id.
OSC_COORDS: dict[int, tuple[float, float]] = {
    1: (-1.0, 1.0), 2: (-1.0, 0.0), 3: (-1.0, -1.0),
    4: (-0.5, 1.0), 5: (-0.5, 0.0), 6: (-0.5, -1.0),
    7: (0.5, 1.0), 8: (0.5, 0.0), 9: (0.5, -1.0),
    10: (1.0, 1.0), 11: (1.0, 0.0), 12: (1.0, -1.0),
}

# Command channel -> 0-based oscillator index (see module docstring for legs).
OSC_FOR_CHANNEL = np.array([6, 7, 8, 5, 4, 3, 9, 10, 11, 2, 1, 0], dtype=np.intp)

# Per-oscillator amplitude limit (s2 oscillators swing the wider servo).
OSC_RANGE = np.array(
    [S2_RANGE, S2_RANGE, S2_RANGE, S1_RANGE, S1_RANGE, S1_RANGE,
     S1_RANGE, S1_RANGE, S1_RANGE, S2_RANGE, S2_RANGE, S2_RANGE]
)

# Timer-unit coordinates in command-channel order (s1 legs 0..5, s2 legs 0..5).
SUPG_COORDS = np.array(
    [[_LEG_SIDE[l] * 0.5, _LEG_Y[l]] for l in range(6)]
    + [[_LEG_SIDE[l] * 1.0, _LEG_Y[l]] for l in range(6)]
)

ANN_JOINT_COORDS = SUPG_COORDS.copy()
ANN_INPUT_COORDS = np.vstack([ANN_JOINT_COORDS, [[0.0, 0.5], [0.0, -0.5]]])  # + sine, cosine
ANN_HIDDEN_COORDS = ANN_JOINT_COORDS.copy()
ANN_OUTPUT_COORDS = ANN_JOINT_COORDS.copy()

ANN_WEIGHT_RANGE = 3.0
SUPG_PERIOD_S = 1.0
SUPG_OFFSET_MAX_S = 1.0

# Largest double strictly below 2*pi; keeps direct-encoded biases in [0, 2*pi).
TWO_PI_OPEN = float(np.nextafter(TWO_PI, 0.0))


class EncodingError(ValueError):
    pass


class ControllerBlowUp(RuntimeError):
    """Raised when controller state diverges; the evaluation is declared failed."""


def clamp_command(cmd: np.ndarray) -> np.ndarray:
    return np.clip(cmd, -CHANNEL_RANGE, CHANNEL_RANGE)


def _scale_unit_to(value: np.ndarray, low, high):
    """Affine map from [-1, 1] onto [low, high]."""
    return low + (value + 1.0) * 0.5 * (high - low)


@dataclass(frozen=True)
class DirectGenome:
    """23 genes in [0, 1]: 12 oscillator amplitudes then 11 free phase biases.

    Amplitude genes follow oscillator order 1..12; bias genes follow
    ``cpg.FREE_EDGES`` order.  Values are clamped to [0, 1] on construction.
    """

    genes: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.genes) != 23:
            raise EncodingError(f"direct genome needs 23 genes, got {len(self.genes)}")
        clamped = tuple(min(1.0, max(0.0, float(g))) for g in self.genes)
        object.__setattr__(self, "genes", clamped)

    def to_json_dict(self) -> dict:
        return {"genes": list(self.genes)}

    @staticmethod
    def from_json_dict(data: dict) -> "DirectGenome":
        return DirectGenome(genes=tuple(float(g) for g in data["genes"]))


def random_direct_genome(rng: np.random.Generator) -> DirectGenome:
    return DirectGenome(genes=tuple(rng.uniform(0.0, 1.0, size=23)))


def mutate_direct(genome: DirectGenome, config: MutationConfig, rng: np.random.Generator) -> DirectGenome:
    """Per-gene Gaussian perturbation at the weight-mutation rate and step size."""
    eff = config.effective()
    genes = np.array(genome.genes)
    pick = rng.random(23) < eff.weight_mutation_rate
    steps = rng.normal(0.0, eff.weight_step_sigma, size=23)
    genes = np.where(pick, genes + steps, genes)
    return DirectGenome(genes=tuple(np.clip(genes, 0.0, 1.0)))


class ControllerInstance:
    """Single-evaluation controller state; never shared between evaluations."""

    kind: str = ""
    is_open_loop: bool = True

    def begin_run(self) -> None:
        raise NotImplementedError

    def tick(self, landed_legs, t: float) -> np.ndarray:
        """Command for the tick at time ``t``; advances internal state by one tick.

        ``landed_legs`` is the set of legs whose feet entered contact at the
        previous control step (rising edges only).
        """
        raise NotImplementedError

    def command_array(self, ticks: int) -> np.ndarray:
        """All commands for an open-loop run, shape (ticks, 12)."""
        raise NotImplementedError


class OscillatorController(ControllerInstance):
    """Coupled-oscillator network driving the 12 command channels.

    The network integrates with internal Euler substeps (5 ms) and is sampled
    at every control tick.  With ``reset_on_contact`` the horizontal
    oscillator of a landing leg snaps to the touchdown phase.
    """

    def __init__(
        self,
        params: OscillatorParams,
        graph: CouplingGraph,
        kind: str,
        control_dt: float = 0.015,
        substep_dt: float = 0.005,
        reset_on_contact: bool = False,
        aep: AepConfig = AepConfig(),
    ):
        if params.count != OSCILLATOR_COUNT:
            raise EncodingError("hexapod controller needs 12 oscillators")
        substeps = round(control_dt / substep_dt)
        if substeps < 1 or abs(substeps * substep_dt - control_dt) > 1e-12:
            raise EncodingError("substep size must divide the control period")
        self.params = params
        self.graph = graph
        self.kind = kind
        self.control_dt = control_dt
        self.substep_dt = substep_dt
        self.substeps = substeps
        self.reset_on_contact = reset_on_contact
        self.aep = aep
        self.is_open_loop = not reset_on_contact
        self._intrinsic = np.asarray(params.intrinsic_amplitudes)
        self.state = OscillatorState.initial(OSCILLATOR_COUNT)

    def begin_run(self) -> None:
        self.state = OscillatorState.initial(OSCILLATOR_COUNT)

    @staticmethod
    def _check(phase: np.ndarray, amp: np.ndarray, rate: np.ndarray) -> None:
        for arr in (phase, amp, rate):
            if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > STATE_LIMIT):
                raise ControllerBlowUp("oscillator state diverged")

    def _advance_one_tick(self) -> None:
        s = self.state
        phase, amp, rate = euler_substeps(
            s.phase, s.amplitude, s.amplitude_rate,
            self._intrinsic, self.params, self.graph, self.substep_dt, self.substeps,
        )
        self._check(phase, amp, rate)
        self.state = OscillatorState(phase=phase, amplitude=amp, amplitude_rate=rate)

    def tick(self, landed_legs, t: float) -> np.ndarray:
        if self.reset_on_contact and landed_legs:
            self.state = phase_reset(self.state, landed_legs, self.aep)
        cmd = outputs_of(self.state)[OSC_FOR_CHANNEL]
        self._advance_one_tick()
        return cmd

    def command_array(self, ticks: int) -> np.ndarray:
        if not self.is_open_loop:
            raise EncodingError("closed-loop controller has no precomputable commands")
        cmds = np.empty((ticks, 12))
        s = self.state
        phase, amp, rate = s.phase, s.amplitude, s.amplitude_rate
        for k in range(ticks):
            cmds[k] = (amp * np.cos(phase))[OSC_FOR_CHANNEL]
            phase, amp, rate = euler_substeps(
                phase, amp, rate,
                self._intrinsic, self.params, self.graph, self.substep_dt, self.substeps,
            )
        self._check(phase, amp, rate)
        self.state = OscillatorState(phase=phase, amplitude=amp, amplitude_rate=rate)
        return cmds

    def phenotype_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitudes": [float(a) for a in self.params.intrinsic_amplitudes],
            "graph": self.graph.to_json_dict(),
            "reset_on_contact": self.reset_on_contact,
        }


class AnnController(ControllerInstance):
    """Single-hidden-layer feedforward network commanding absolute joint angles.

    Inputs: the 12 previously commanded angles normalized by servo range,
    plus one sine and one cosine wave at 1 Hz.  Four pseudo-commands spaced a
    quarter tick apart are averaged to discourage high-frequency chatter.
    """

    kind = "ann"
    is_open_loop = True

    def __init__(self, w_input_hidden: np.ndarray, w_hidden_output: np.ndarray, control_dt: float = 0.015):
        if w_input_hidden.shape != (12, 14) or w_hidden_output.shape != (12, 12):
            raise EncodingError("weight matrices must be (12,14) and (12,12)")
        self.w_in = w_input_hidden
        self.w_out = w_hidden_output
        self.control_dt = control_dt
        self.prev_cmd = np.zeros(12)

    def begin_run(self) -> None:
        self.prev_cmd = np.zeros(12)

    @staticmethod
    def _squash(x: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return 2.0 / (1.0 + np.exp(-x)) - 1.0

    def _pseudo_outputs(self, t: float) -> np.ndarray:
        quarter = self.control_dt / 4.0
        pseudo_t = t + quarter * np.arange(4)
        inputs = np.empty((4, 14))
        inputs[:, :12] = self.prev_cmd / CHANNEL_RANGE
        inputs[:, 12] = np.sin(TWO_PI * pseudo_t)
        inputs[:, 13] = np.cos(TWO_PI * pseudo_t)
        hidden = self._squash(inputs @ self.w_in.T)
        return self._squash(hidden @ self.w_out.T)

    def tick(self, landed_legs, t: float) -> np.ndarray:
        out = self._pseudo_outputs(t).mean(axis=0)
        cmd = out * CHANNEL_RANGE
        self.prev_cmd = cmd
        return cmd

    def command_array(self, ticks: int) -> np.ndarray:
        cmds = np.empty((ticks, 12))
        for k in range(ticks):
            cmds[k] = self.tick(frozenset(), k * self.control_dt)
        return cmds

    def phenotype_dict(self) -> dict:
        return {
            "kind": self.kind,
            "w_input_hidden": [[float(v) for v in row] for row in self.w_in],
            "w_hidden_output": [[float(v) for v in row] for row in self.w_out],
        }


class SupgController(ControllerInstance):
    """Per-leg timer units producing one shaped cycle per trigger.

    Each leg owns a timer shared by its two command channels.  The timer
    ramps 0 -> 1 over one period and holds at 1 until retriggered.  The first
    trigger is delayed by a per-leg offset; afterwards a foot-contact rising
    edge restarts the timer.  Events are processed on the control clock, so
    every reachable timer value lies on the tick grid; the decoded phenotype
    is the exact table of signal values over that grid.
    """

    kind = "supg"
    is_open_loop = False

    def __init__(
        self,
        signal_table: np.ndarray,
        offsets_s: np.ndarray,
        control_dt: float = 0.015,
        period_s: float = SUPG_PERIOD_S,
    ):
        if signal_table.ndim != 2 or signal_table.shape[0] != 12:
            raise EncodingError("signal table must have 12 rows")
        if offsets_s.shape != (6,):
            raise EncodingError("one offset per leg required")
        self.signal_table = signal_table
        self.offsets_s = offsets_s
        self.control_dt = control_dt
        self.period_s = period_s
        self.max_index = signal_table.shape[1] - 1
        # first trigger fires at the first tick at or after the offset
        self.first_tick = np.array(
            [math.ceil(o / control_dt - 1e-9) for o in offsets_s], dtype=np.intp
        )
        self.triggered = np.zeros(6, dtype=bool)
        self.trigger_tick = np.zeros(6, dtype=np.intp)

    def begin_run(self) -> None:
        self.triggered = np.zeros(6, dtype=bool)
        self.trigger_tick = np.zeros(6, dtype=np.intp)

    def tick(self, landed_legs, t: float) -> np.ndarray:
        k = int(round(t / self.control_dt))
        newly = ~self.triggered & (k >= self.first_tick)
        self.triggered |= newly
        self.trigger_tick[newly] = k
        if landed_legs:
            for leg in landed_legs:
                # contact retriggers only after the offset-scheduled first cycle
                if self.triggered[leg] and not newly[leg]:
                    self.trigger_tick[leg] = k
        idx = np.minimum(k - self.trigger_tick, self.max_index)
        cmd = np.zeros(12)
        live = self.triggered
        legs = np.flatnonzero(live)
        cmd[legs] = self.signal_table[legs, idx[legs]]
        cmd[legs + 6] = self.signal_table[legs + 6, idx[legs]]
        return cmd

    def timer_values(self, tick_index: int) -> np.ndarray:
        """Current timer value per leg (diagnostic)."""
        idx = np.minimum(tick_index - self.trigger_tick, self.max_index)
        raw = idx * self.control_dt / self.period_s
        return np.where(self.triggered, np.minimum(1.0, raw), 0.0)

    def phenotype_dict(self) -> dict:
        return {
            "kind": self.kind,
            "offsets_s": [float(o) for o in self.offsets_s],
            "period_s": self.period_s,
            "signal_table": [[float(v) for v in row] for row in self.signal_table],
        }


def timer_grid(control_dt: float, period_s: float) -> np.ndarray:
    """Reachable timer values at tick resolution: 0, dt/T, ..., capped at 1."""
    max_k = int(math.ceil(period_s / control_dt - 1e-9))
    return np.minimum(1.0, np.arange(max_k + 1) * control_dt / period_s)


def decode_direct(genome: DirectGenome, control_dt: float = 0.015) -> OscillatorController:
    genes = np.array(genome.genes)
    amplitudes = tuple(genes[:12] * OSC_RANGE)
    free = genes[12:23] * TWO_PI_OPEN
    graph = complete_loop_biases(free)
    return OscillatorController(
        OscillatorParams(intrinsic_amplitudes=amplitudes),
        graph,
        kind="direct",
        control_dt=control_dt,
    )


def _cpg_params_from_cppn(genome: CppnGenome) -> tuple[OscillatorParams, CouplingGraph]:
    if genome.input_count != 4 or genome.output_count != 1:
        raise EncodingError("oscillator encoding needs a 4-input, 1-output genome")
    amp_queries = np.zeros((12, 4))
    for i in range(12):
        x, y = OSC_COORDS[i + 1]
        amp_queries[i] = (x, y, 0.0, 0.0)
    amp_out = genome.evaluate_batch(amp_queries)[:, 0]
    amplitudes = tuple(_scale_unit_to(amp_out, 0.0, OSC_RANGE))

    bias_queries = np.zeros((len(FREE_EDGES), 4))
    for k, (lo, hi) in enumerate(FREE_EDGES):
        bias_queries[k] = (*OSC_COORDS[lo], *OSC_COORDS[hi])
    bias_out = genome.evaluate_batch(bias_queries)[:, 0]
    free = _scale_unit_to(bias_out, 0.0, TWO_PI)
    return OscillatorParams(intrinsic_amplitudes=amplitudes), complete_loop_biases(free)


def decode_cpg(genome: CppnGenome, control_dt: float = 0.015) -> OscillatorController:
    params, graph = _cpg_params_from_cppn(genome)
    return OscillatorController(params, graph, kind="cpg", control_dt=control_dt)


def decode_cpg_fb(genome: CppnGenome, control_dt: float = 0.015) -> OscillatorController:
    params, graph = _cpg_params_from_cppn(genome)
    return OscillatorController(
        params, graph, kind="cpg_fb", control_dt=control_dt, reset_on_contact=True
    )


def ann_query_points() -> np.ndarray:
    """CPPN query rows for all proximal-layer pairs: (x_src, y_src, x_tgt, y_tgt, 1)."""
    rows = []
    for h in range(12):
        for a in range(14):
            rows.append((*ANN_INPUT_COORDS[a], *ANN_HIDDEN_COORDS[h], 1.0))
    for o in range(12):
        for h in range(12):
            rows.append((*ANN_HIDDEN_COORDS[h], *ANN_OUTPUT_COORDS[o], 1.0))
    return np.array(rows)


def decode_ann(genome: CppnGenome, control_dt: float = 0.015) -> AnnController:
    if genome.input_count != 5 or genome.output_count != 1:
        raise EncodingError("weight-network encoding needs a 5-input, 1-output genome")
    out = genome.evaluate_batch(ann_query_points())[:, 0] * ANN_WEIGHT_RANGE
    w_in = out[: 12 * 14].reshape(12, 14)
    w_out = out[12 * 14:].reshape(12, 12)
    return AnnController(w_in, w_out, control_dt=control_dt)


def decode_supg(genome: CppnGenome, control_dt: float = 0.015) -> SupgController:
    if genome.input_count != 3 or genome.output_count != 2:
        raise EncodingError("timer encoding needs a 3-input, 2-output genome")
    timers = timer_grid(control_dt, SUPG_PERIOD_S)
    n_t = timers.size
    queries = np.zeros((12 * n_t, 3))
    for u in range(12):
        x, y = SUPG_COORDS[u]
        rows = slice(u * n_t, (u + 1) * n_t)
        queries[rows, 0] = x
        queries[rows, 1] = y
        queries[rows, 2] = timers
    signal = genome.evaluate_batch(queries)[:, 0].reshape(12, n_t)
    table = signal * CHANNEL_RANGE[:, None]

    offset_queries = np.zeros((6, 3))
    offset_queries[:, :2] = SUPG_COORDS[:6]
    offset_out = genome.evaluate_batch(offset_queries)[:, 1]
    offsets = _scale_unit_to(offset_out, 0.0, SUPG_OFFSET_MAX_S)
    return SupgController(table, offsets, control_dt=control_dt, period_s=SUPG_PERIOD_S)


# ---------------------------------------------------------------------------
# Encoding registry: genome init / mutation / decode dispatch per kind.

_CPPN_SHAPES = {"cpg": (4, 1), "cpg_fb": (4, 1), "ann": (5, 1), "supg": (3, 2)}


def random_genome_for(kind: str, rng: np.random.Generator):
    if kind == "direct":
        return random_direct_genome(rng)
    if kind in _CPPN_SHAPES:
        return random_genome(rng, *_CPPN_SHAPES[kind])
    raise EncodingError(f"unknown encoding kind {kind!r}")


def mutate_genome(kind: str, genome, config: MutationConfig, rng: np.random.Generator):
    if kind == "direct":
        return mutate_direct(genome, config, rng)
    if kind in _CPPN_SHAPES:
        return mutate(genome, config, rng)
    raise EncodingError(f"unknown encoding kind {kind!r}")


def decode(kind: str, genome, control_dt: float = 0.015) -> ControllerInstance:
    if kind == "direct":
        return decode_direct(genome, control_dt)
    if kind == "cpg":
        return decode_cpg(genome, control_dt)
    if kind == "cpg_fb":
        return decode_cpg_fb(genome, control_dt)
    if kind == "ann":
        return decode_ann(genome, control_dt)
    if kind == "supg":
        return decode_supg(genome, control_dt)
    raise EncodingError(f"unknown encoding kind {kind!r}")


def genome_to_json_dict(kind: str, genome) -> dict:
    return genome.to_json_dict()


def genome_from_json_dict(kind: str, data: dict):
    if kind == "direct":
        return DirectGenome.from_json_dict(data)
    return CppnGenome.from_json_dict(data)
