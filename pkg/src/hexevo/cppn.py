"""Function-graph genomes mapping geometric coordinates to phenotype attributes.

A genome is a directed acyclic graph of typed activation nodes.  Input nodes
pass their values through unchanged; every other node applies its activation
to the weighted sum of its predecessors.  Node ids follow a fixed convention:
inputs are 0..I-1, outputs are I..I+O-1, hidden nodes take any larger id.

Genomes are immutable values.  Mutation returns a new genome and takes an
explicit generator, so parallel callers own disjoint random streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np


class GenomeError(ValueError):
    """A genome violates a structural invariant (cycle, bad ids, bad counts)."""


class ActivationKind(str, Enum):
    SINE = "sine"
    GAUSSIAN = "gaussian"
    SIGMOID = "sigmoid"
    LINEAR = "linear"


ACTIVATION_KINDS: tuple[ActivationKind, ...] = (
    ActivationKind.SINE,
    ActivationKind.GAUSSIAN,
    ActivationKind.SIGMOID,
    ActivationKind.LINEAR,
)


def apply_activation(kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    """Activation definitions. All are bounded in [-1, 1] except LINEAR,
    which is clamped at output nodes only (hidden linear nodes pass through)."""
    if kind is ActivationKind.SINE:
        return np.sin(np.pi * x)
    if kind is ActivationKind.GAUSSIAN:
        with np.errstate(over="ignore"):
            return np.exp(-(x * x))
    if kind is ActivationKind.SIGMOID:
        with np.errstate(over="ignore"):
            return 2.0 / (1.0 + np.exp(-x)) - 1.0
    return x


@dataclass(frozen=True)
class MutationConfig:
    """Mutation operator parameters.

    ``intensity_multiplier`` scales both the rates and the weight step size;
    rates are clamped to [0, 1] after scaling.  The default per-connection
    rate is deliberately high: evolved genomes are often tiny (5-10
    connections), and a low rate would make a large share of mutations exact
    no-ops, which defeats signature sampling.
    """

    weight_mutation_rate: float = 0.5
    weight_step_sigma: float = 0.5
    node_add_rate: float = 0.05
    node_remove_rate: float = 0.05
    node_type_change_rate: float = 0.05
    connection_add_rate: float = 0.05
    connection_remove_rate: float = 0.05
    intensity_multiplier: float = 1.0

    def __post_init__(self) -> None:
        if self.weight_step_sigma <= 0:
            raise ValueError("weight_step_sigma must be > 0")
        if self.intensity_multiplier <= 0:
            raise ValueError("intensity_multiplier must be > 0")
        for name in (
            "weight_mutation_rate",
            "node_add_rate",
            "node_remove_rate",
            "node_type_change_rate",
            "connection_add_rate",
            "connection_remove_rate",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    def effective(self) -> "EffectiveMutation":
        m = self.intensity_multiplier

        def rate(r: float) -> float:
            return min(1.0, r * m)

        return EffectiveMutation(
            weight_mutation_rate=rate(self.weight_mutation_rate),
            weight_step_sigma=self.weight_step_sigma * m,
            node_add_rate=rate(self.node_add_rate),
            node_remove_rate=rate(self.node_remove_rate),
            node_type_change_rate=rate(self.node_type_change_rate),
            connection_add_rate=rate(self.connection_add_rate),
            connection_remove_rate=rate(self.connection_remove_rate),
        )

    def with_intensity(self, multiplier: float) -> "MutationConfig":
        return MutationConfig(
            weight_mutation_rate=self.weight_mutation_rate,
            weight_step_sigma=self.weight_step_sigma,
            node_add_rate=self.node_add_rate,
            node_remove_rate=self.node_remove_rate,
            node_type_change_rate=self.node_type_change_rate,
            connection_add_rate=self.connection_add_rate,
            connection_remove_rate=self.connection_remove_rate,
            intensity_multiplier=multiplier,
        )


@dataclass(frozen=True)
class EffectiveMutation:
    weight_mutation_rate: float
    weight_step_sigma: float
    node_add_rate: float
    node_remove_rate: float
    node_type_change_rate: float
    connection_add_rate: float
    connection_remove_rate: float


@dataclass(frozen=True)
class _EvalPlan:
    order: tuple[int, ...]                       # non-input nodes, topological
    incoming: dict[int, tuple[tuple[int, float], ...]]
    kinds: dict[int, ActivationKind]
    output_ids: tuple[int, ...]


@dataclass(frozen=True)
class CppnGenome:
    input_count: int
    output_count: int
    nodes: tuple[tuple[int, ActivationKind], ...]
    connections: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        if self.input_count < 1 or self.output_count < 1:
            raise GenomeError("input_count and output_count must be >= 1")
        ids = [nid for nid, _ in self.nodes]
        if len(set(ids)) != len(ids):
            raise GenomeError("duplicate node ids")
        id_set = set(ids)
        for i in range(self.input_count + self.output_count):
            if i not in id_set:
                raise GenomeError(f"missing required node id {i}")
        pairs = set()
        for src, dst, w in self.connections:
            if src not in id_set or dst not in id_set:
                raise GenomeError(f"connection references unknown node ({src}, {dst})")
            if dst < self.input_count:
                raise GenomeError(f"connection targets input node {dst}")
            if (src, dst) in pairs:
                raise GenomeError(f"duplicate connection ({src}, {dst})")
            if not np.isfinite(w):
                raise GenomeError(f"non-finite weight on ({src}, {dst})")
            pairs.add((src, dst))
        self._toposort()  # raises on cycles

    @property
    def input_ids(self) -> tuple[int, ...]:
        return tuple(range(self.input_count))

    @property
    def output_ids(self) -> tuple[int, ...]:
        return tuple(range(self.input_count, self.input_count + self.output_count))

    def _toposort(self) -> tuple[int, ...]:
        ids = sorted(nid for nid, _ in self.nodes)
        indeg = {nid: 0 for nid in ids}
        children: dict[int, list[int]] = {nid: [] for nid in ids}
        for src, dst, _ in self.connections:
            indeg[dst] += 1
            children[src].append(dst)
        ready = sorted(nid for nid in ids if indeg[nid] == 0)
        order: list[int] = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            emitted = []
            for child in children[nid]:
                indeg[child] -= 1
                if indeg[child] == 0:
                    emitted.append(child)
            for child in sorted(emitted):
                # keep 'ready' sorted so the traversal order is canonical
                lo, hi = 0, len(ready)
                while lo < hi:
                    mid = (lo + hi) // 2
                    if ready[mid] < child:
                        lo = mid + 1
                    else:
                        hi = mid
                ready.insert(lo, child)
        if len(order) != len(ids):
            raise GenomeError("cycle detected in genome graph")
        return tuple(order)

    @cached_property
    def _plan(self) -> _EvalPlan:
        kinds = dict(self.nodes)
        incoming: dict[int, list[tuple[int, float]]] = {nid: [] for nid, _ in self.nodes}
        for src, dst, w in self.connections:
            incoming[dst].append((src, w))
        # summation order over predecessors is fixed (sorted by source id)
        frozen = {nid: tuple(sorted(inc)) for nid, inc in incoming.items()}
        order = tuple(nid for nid in self._toposort() if nid >= self.input_count)
        return _EvalPlan(order=order, incoming=frozen, kinds=kinds, output_ids=self.output_ids)

    def evaluate_batch(self, inputs: np.ndarray) -> np.ndarray:
        """Evaluate rows of ``inputs`` (shape (B, input_count)) to (B, output_count)."""
        x = np.asarray(inputs, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.input_count:
            raise GenomeError(f"expected inputs of shape (B, {self.input_count}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise GenomeError("non-finite input values")
        plan = self._plan
        batch = x.shape[0]
        values: dict[int, np.ndarray] = {i: x[:, i] for i in range(self.input_count)}
        out_set = set(plan.output_ids)
        for nid in plan.order:
            inc = plan.incoming[nid]
            if not inc:
                # dangling node: contributes a fixed neutral output
                values[nid] = np.zeros(batch)
                continue
            total = values[inc[0][0]] * inc[0][1]
            for src, w in inc[1:]:
                total = total + values[src] * w
            kind = plan.kinds[nid]
            out = apply_activation(kind, total)
            if nid in out_set and kind is ActivationKind.LINEAR:
                out = np.clip(out, -1.0, 1.0)
            values[nid] = out
        return np.stack([values[oid] for oid in plan.output_ids], axis=1)

    def evaluate(self, inputs) -> np.ndarray:
        """Evaluate one input vector to one output vector."""
        x = np.asarray(inputs, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.input_count:
            raise GenomeError(f"expected {self.input_count} inputs, got shape {x.shape}")
        return self.evaluate_batch(x[None, :])[0]

    def node_count(self) -> int:
        return len(self.nodes)

    def connection_count(self) -> int:
        return len(self.connections)

    def hidden_ids(self) -> tuple[int, ...]:
        first_hidden = self.input_count + self.output_count
        return tuple(sorted(nid for nid, _ in self.nodes if nid >= first_hidden))

    def to_json_dict(self) -> dict:
        return {
            "inputs": self.input_count,
            "outputs": self.output_count,
            "nodes": [{"id": nid, "kind": kind.value} for nid, kind in self.nodes],
            "conns": [{"src": s, "dst": d, "w": w} for s, d, w in self.connections],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "CppnGenome":
        return CppnGenome(
            input_count=int(data["inputs"]),
            output_count=int(data["outputs"]),
            nodes=tuple((int(n["id"]), ActivationKind(n["kind"])) for n in data["nodes"]),
            connections=tuple((int(c["src"]), int(c["dst"]), float(c["w"])) for c in data["conns"]),
        )


def random_genome(rng: np.random.Generator, input_count: int, output_count: int) -> CppnGenome:
    """Minimal genome: every input wired to every output, uniform weights in [-1, 1]."""
    if input_count < 1 or output_count < 1:
        raise GenomeError("counts must be >= 1")
    nodes = [(i, ActivationKind.LINEAR) for i in range(input_count)]
    kinds = rng.integers(0, len(ACTIVATION_KINDS), size=output_count)
    for j in range(output_count):
        nodes.append((input_count + j, ACTIVATION_KINDS[int(kinds[j])]))
    conns = []
    weights = rng.uniform(-1.0, 1.0, size=output_count * input_count)
    k = 0
    for j in range(output_count):
        for i in range(input_count):
            conns.append((i, input_count + j, float(weights[k])))
            k += 1
    return CppnGenome(input_count, output_count, tuple(nodes), tuple(conns))


def _ancestors(genome: CppnGenome) -> dict[int, set[int]]:
    anc: dict[int, set[int]] = {nid: set() for nid, _ in genome.nodes}
    parents: dict[int, list[int]] = {nid: [] for nid, _ in genome.nodes}
    for src, dst, _ in genome.connections:
        parents[dst].append(src)
    for nid in genome._toposort():
        for p in parents[nid]:
            anc[nid].add(p)
            anc[nid] |= anc[p]
    return anc


def mutate(genome: CppnGenome, config: MutationConfig, rng: np.random.Generator) -> CppnGenome:
    """Apply one round of weight and structural mutation.

    The draw order below is fixed; it is part of the reproducibility contract.
    Structural events draw their trigger before checking whether candidates
    exist, so the stream position never depends on genome shape.
    """
    eff = config.effective()
    nodes = list(genome.nodes)
    conns = list(genome.connections)

    # 1. weight perturbation, Gaussian step per selected connection
    n_conns = len(conns)
    pick = rng.random(n_conns) < eff.weight_mutation_rate
    steps = rng.normal(0.0, eff.weight_step_sigma, size=n_conns)
    for i in range(n_conns):
        if pick[i]:
            src, dst, w = conns[i]
            conns[i] = (src, dst, float(w + steps[i]))

    # 2. node addition: split a connection, preserving the downstream weight
    if rng.random() < eff.node_add_rate and conns:
        idx = int(rng.integers(len(conns)))
        kind = ACTIVATION_KINDS[int(rng.integers(len(ACTIVATION_KINDS)))]
        src, dst, w = conns.pop(idx)
        new_id = max(nid for nid, _ in nodes) + 1
        nodes.append((new_id, kind))
        conns.append((src, new_id, 1.0))
        conns.append((new_id, dst, w))

    # 3. node removal: hidden nodes only, incident connections dropped
    if rng.random() < eff.node_remove_rate:
        first_hidden = genome.input_count + genome.output_count
        hidden = sorted(nid for nid, _ in nodes if nid >= first_hidden)
        if hidden:
            victim = hidden[int(rng.integers(len(hidden)))]
            nodes = [(nid, k) for nid, k in nodes if nid != victim]
            conns = [c for c in conns if c[0] != victim and c[1] != victim]

    # 4. activation change on one non-input node
    if rng.random() < eff.node_type_change_rate:
        candidates = sorted(nid for nid, _ in nodes if nid >= genome.input_count)
        victim = candidates[int(rng.integers(len(candidates)))]
        old_kind = dict(nodes)[victim]
        others = [k for k in ACTIVATION_KINDS if k is not old_kind]
        new_kind = others[int(rng.integers(len(others)))]
        nodes = [(nid, new_kind if nid == victim else k) for nid, k in nodes]

    # 5. connection addition: any acyclic (src, dst) pair not already present
    if rng.random() < eff.connection_add_rate:
        interim = CppnGenome(genome.input_count, genome.output_count, tuple(nodes), tuple(conns))
        anc = _ancestors(interim)
        existing = {(s, d) for s, d, _ in conns}
        ids = sorted(nid for nid, _ in nodes)
        candidates = [
            (u, v)
            for u in ids
            for v in ids
            if v >= genome.input_count and u != v and (u, v) not in existing and v not in anc[u]
        ]
        if candidates:
            u, v = candidates[int(rng.integers(len(candidates)))]
            conns.append((u, v, float(rng.uniform(-1.0, 1.0))))

    # 6. connection removal (outputs may dangle; dangling nodes emit 0)
    if rng.random() < eff.connection_remove_rate and conns:
        idx = int(rng.integers(len(conns)))
        conns.pop(idx)

    return CppnGenome(genome.input_count, genome.output_count, tuple(nodes), tuple(conns))
