"""Experiment configuration: one JSON document fully specifies a run.

The canonical serialization (sorted keys, no whitespace, output directory
excluded) is hashed into a run id that is embedded in every output file, so
artifacts can always be traced back to the exact configuration that
produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .controllers import ENCODING_KINDS
from .cppn import MutationConfig
from .simulator import HexapodConfig, SimulationError


class ConfigError(ValueError):
    """Invalid configuration; carries an approximate line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class EvolutionSettings:
    population_size: int = 32
    generations: int = 300
    tournament_size: int = 2
    diversity_reference: str = "merged"
    checkpoint_every: int = 100


@dataclass(frozen=True)
class SimulationSettings:
    duration_s: float = 5.0
    control_dt_s: float = 0.015


@dataclass(frozen=True)
class SignatureSettings:
    samples: int = 1000
    low_multiplier: float = 0.25
    high_multiplier: float = 4.0


@dataclass(frozen=True)
class DamageSettings:
    generations: int = 500
    restore_threshold: float = 0.85


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    encoding: str
    output_dir: str = "runs/run"
    evolution: EvolutionSettings = field(default_factory=EvolutionSettings)
    mutation: MutationConfig = field(default_factory=MutationConfig)
    hexapod: HexapodConfig = field(default_factory=HexapodConfig)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    signature: SignatureSettings = field(default_factory=SignatureSettings)
    damage: DamageSettings = field(default_factory=DamageSettings)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "encoding": self.encoding,
            "output_dir": self.output_dir,
            "evolution": {
                "population_size": self.evolution.population_size,
                "generations": self.evolution.generations,
                "tournament_size": self.evolution.tournament_size,
                "diversity_reference": self.evolution.diversity_reference,
                "checkpoint_every": self.evolution.checkpoint_every,
            },
            "mutation": {
                "weight_mutation_rate": self.mutation.weight_mutation_rate,
                "weight_step_sigma": self.mutation.weight_step_sigma,
                "node_add_rate": self.mutation.node_add_rate,
                "node_remove_rate": self.mutation.node_remove_rate,
                "node_type_change_rate": self.mutation.node_type_change_rate,
                "connection_add_rate": self.mutation.connection_add_rate,
                "connection_remove_rate": self.mutation.connection_remove_rate,
            },
            "hexapod": {
                "body_half_length": self.hexapod.body_half_length,
                "body_half_width": self.hexapod.body_half_width,
                "coxa": self.hexapod.coxa,
                "femur": self.hexapod.femur,
                "tibia": self.hexapod.tibia,
                "body_height": self.hexapod.body_height,
                "contact_tol": self.hexapod.contact_tol,
                "damage_mask": list(self.hexapod.damage_mask),
            },
            "simulation": {
                "duration_s": self.simulation.duration_s,
                "control_dt_s": self.simulation.control_dt_s,
            },
            "signature": {
                "samples": self.signature.samples,
                "low_multiplier": self.signature.low_multiplier,
                "high_multiplier": self.signature.high_multiplier,
            },
            "damage": {
                "generations": self.damage.generations,
                "restore_threshold": self.damage.restore_threshold,
            },
        }

    def run_id(self) -> str:
        payload = self.to_dict()
        payload.pop("output_dir")  # location never changes results
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


_SECTION_FIELDS = {
    "evolution": EvolutionSettings,
    "simulation": SimulationSettings,
    "signature": SignatureSettings,
    "damage": DamageSettings,
}


def _line_of_key(source: str, key: str) -> int | None:
    needle = f'"{key}"'
    for lineno, line in enumerate(source.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def _build_section(cls, data: dict, section: str, source: str):
    known = {f for f in cls.__dataclass_fields__}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}", _line_of_key(source, key))
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {section} section: {exc}", _line_of_key(source, section)) from exc


def config_from_dict(data: dict, source: str = "") -> ExperimentConfig:
    known_top = {
        "seed", "encoding", "output_dir", "evolution", "mutation",
        "hexapod", "simulation", "signature", "damage",
    }
    for key in data:
        if key not in known_top:
            raise ConfigError(f"unknown key {key}", _line_of_key(source, key))
    if "seed" not in data:
        raise ConfigError("seed is required", 1)
    if "encoding" not in data:
        raise ConfigError("encoding is required", 1)
    encoding = data["encoding"]
    if encoding not in ENCODING_KINDS:
        raise ConfigError(
            f"encoding must be one of {ENCODING_KINDS}, got {encoding!r}",
            _line_of_key(source, "encoding"),
        )
    try:
        seed = int(data["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer: {exc}", _line_of_key(source, "seed")) from exc

    sections = {}
    for name, cls in _SECTION_FIELDS.items():
        sections[name] = _build_section(cls, dict(data.get(name, {})), name, source)
    try:
        mutation = MutationConfig(**data.get("mutation", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mutation section: {exc}", _line_of_key(source, "mutation")) from exc
    hexapod_data = dict(data.get("hexapod", {}))
    if "damage_mask" in hexapod_data:
        hexapod_data["damage_mask"] = tuple(bool(b) for b in hexapod_data["damage_mask"])
    try:
        hexapod = HexapodConfig(**hexapod_data)
    except (TypeError, SimulationError) as exc:
        raise ConfigError(f"bad hexapod section: {exc}", _line_of_key(source, "hexapod")) from exc

    pop = sections["evolution"].population_size
    if pop < 2 or pop % 2 != 0:
        raise ConfigError(
            "evolution.population_size must be an even number >= 2",
            _line_of_key(source, "population_size"),
        )
    return ExperimentConfig(
        seed=seed,
        encoding=encoding,
        output_dir=str(data.get("output_dir", "runs/run")),
        evolution=sections["evolution"],
        mutation=mutation,
        hexapod=hexapod,
        simulation=sections["simulation"],
        signature=sections["signature"],
        damage=sections["damage"],
    )


def load_config(path: str | Path) -> ExperimentConfig:
    source = Path(path).read_text()
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    if not isinstance(data, dict):
        raise ConfigError("top-level value must be an object", 1)
    return config_from_dict(data, source)


# --- presets -----------------------------------------------------------------

_DESK = EvolutionSettings(population_size=32, generations=300, checkpoint_every=100)
_PAPER_SCALE = EvolutionSettings(population_size=100, generations=8000, checkpoint_every=500)

# The direct encoding perturbs unit-interval genes, so its step size is a
# fraction of the gene range rather than a connection-weight scale.
_MUTATION_BY_ENCODING = {
    "direct": MutationConfig(weight_mutation_rate=0.1, weight_step_sigma=0.1),
    "cpg": MutationConfig(),
    "cpg_fb": MutationConfig(),
    "ann": MutationConfig(),
    "supg": MutationConfig(),
}


def preset(name: str, seed: int = 1, output_dir: str | None = None) -> ExperimentConfig:
    """Named presets: '<scale>-<encoding>' with scale 'desk' or 'paper'."""
    try:
        scale, encoding = name.split("-", 1)
    except ValueError:
        raise ConfigError(f"preset names look like 'desk-supg'; got {name!r}")
    if scale not in ("desk", "paper"):
        raise ConfigError(f"unknown preset scale {scale!r}")
    if encoding not in ENCODING_KINDS:
        raise ConfigError(f"unknown preset encoding {encoding!r}")
    if scale == "desk":
        evolution = _DESK
        signature = SignatureSettings(samples=200)
        damage = DamageSettings(generations=500)
    else:
        evolution = _PAPER_SCALE
        signature = SignatureSettings(samples=1000)
        damage = DamageSettings(generations=10000)
    return ExperimentConfig(
        seed=seed,
        encoding=encoding,
        output_dir=output_dir if output_dir is not None else f"runs/{name}-seed{seed}",
        evolution=evolution,
        mutation=_MUTATION_BY_ENCODING[encoding],
        signature=signature,
        damage=damage,
    )


def preset_names() -> list[str]:
    return [f"{scale}-{enc}" for scale in ("desk", "paper") for enc in ENCODING_KINDS]
