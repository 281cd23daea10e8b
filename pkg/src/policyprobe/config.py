"""Run manifests: one JSON file describes a whole run.

Sections map one-to-one onto the owning modules' config dataclasses (env ->
EnvSpec, train -> TrainConfig, probe/sweep/spectrum -> command settings), so
every numeric field is validated by the owning module's own preconditions
while the manifest is parsed — before any work starts. CLI flags are merged
into the manifest first, which keeps the echoed config sufficient to re-run
the command bit-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import attack, perturb
from .envs import EnvSpec, make_spec
from .qlearning import TrainConfig

Direction = perturb.PerturbationSpec | attack.AttackSpec


class ConfigError(ValueError):
    """Manifest is structurally wrong: unknown keys, missing sections."""


def _check_keys(section: str, mapping: dict, allowed: set[str]) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")


_INT_DIRECTION_FIELDS = {"kernel", "ti", "tj", "pt_seed"}


def parse_direction(mapping: dict) -> Direction:
    """A direction is either a fixed perturbation ({"family": ...}) or an
    attack ({"method": ...}); field validity is the owning spec's business."""
    if not isinstance(mapping, dict):
        raise ConfigError("direction must be a mapping")
    if "family" in mapping:
        kwargs = {k: int(v) if k in _INT_DIRECTION_FIELDS else v
                  for k, v in mapping.items()}
        try:
            return perturb.PerturbationSpec(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad perturbation direction: {exc}") from exc
    if "method" in mapping:
        kwargs = dict(mapping)
        p = kwargs.get("p", "inf")
        kwargs["p"] = math.inf if p in ("inf", "Inf", "infinity") else float(p)
        try:
            return attack.AttackSpec(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad attack direction: {exc}") from exc
    raise ConfigError("direction needs a 'family' or 'method' key")


@dataclass(frozen=True)
class ProbeSettings:
    direction: Direction
    runs: int = 10
    eps_threshold: float = 0.05    # similarity ceiling for the verdict
    delta_threshold: float = 0.5   # perturbed-score fraction for the verdict
    rollout: bool = False          # attack command: also run a rollout probe
    checkpoint: str = ""

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("probe runs must be >= 1")
        if self.eps_threshold < 0 or not 0 < self.delta_threshold:
            raise ValueError("bad verdict thresholds")


@dataclass(frozen=True)
class SweepSettings:
    family: str
    parameter: str
    values: tuple[float, ...]
    policies: tuple[tuple[str, str], ...]   # (label, checkpoint path)
    runs: int = 10

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep grid must be non-empty")
        if any(b >= a for a, b in zip(self.values[1:], self.values)):
            raise ValueError("sweep grid must be strictly increasing")
        if not self.policies:
            raise ValueError("sweep needs at least one policy")
        if self.runs < 1:
            raise ValueError("sweep runs must be >= 1")
        int_fields = {"kernel", "ti", "tj"}
        for value in self.values:   # surface bad grid points before any work
            cast = int(value) if self.parameter in int_fields else value
            perturb.PerturbationSpec(**{"family": self.family,
                                        self.parameter: cast})


@dataclass(frozen=True)
class SpectrumSettings:
    directions: tuple[Direction, ...]
    source: str = "reset"          # "reset" | "rollout"
    samples: int = 10
    checkpoint: str = ""           # needed when source == "rollout"

    def __post_init__(self):
        if self.source not in ("reset", "rollout"):
            raise ValueError(f"unknown spectrum source {self.source!r}")
        if self.samples < 1:
            raise ValueError("spectrum needs at least one sample")
        if not self.directions:
            raise ValueError("spectrum needs at least one direction")
        for d in self.directions:
            if isinstance(d, attack.AttackSpec) and not self.checkpoint \
                    and self.source == "reset":
                raise ValueError("attack directions in a spectrum run "
                                 "need a checkpoint")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    env: EnvSpec
    train: TrainConfig
    probe: ProbeSettings | None
    sweep: SweepSettings | None
    spectrum: SpectrumSettings | None
    output_dir: str
    echo: str                      # effective manifest, pretty-printed JSON


_TOP_KEYS = {"seed", "env", "train", "probe", "sweep", "spectrum",
             "output_dir"}
_ENV_KEYS = {"id", "size", "seed", "gamma"}
_PROBE_KEYS = {"direction", "runs", "eps_threshold", "delta_threshold",
               "rollout", "checkpoint"}
_SWEEP_KEYS = {"family", "parameter", "values", "policies", "runs"}
_SPECTRUM_KEYS = {"directions", "source", "samples", "checkpoint"}


def build_run_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("manifest must be a JSON object")
    _check_keys("<top level>", raw, _TOP_KEYS)
    seed = int(raw.get("seed", 0))

    env_raw = raw.get("env")
    if not isinstance(env_raw, dict) or "id" not in env_raw:
        raise ConfigError("manifest needs an 'env' section with an 'id'")
    _check_keys("env", env_raw, _ENV_KEYS)
    env = make_spec(env_raw["id"], size=int(env_raw.get("size", 8)),
                    seed=int(env_raw.get("seed", seed)),
                    gamma=float(env_raw.get("gamma", 0.9)))

    train_raw = dict(raw.get("train", {}))
    _check_keys("train", train_raw,
                {f.name for f in TrainConfig.__dataclass_fields__.values()})
    train_raw.setdefault("seed", seed)
    train_raw.setdefault("gamma", env.gamma)
    try:
        train = TrainConfig(**train_raw)
    except TypeError as exc:
        raise ConfigError(f"bad train section: {exc}") from exc

    probe = None
    if "probe" in raw:
        probe_raw = dict(raw["probe"])
        _check_keys("probe", probe_raw, _PROBE_KEYS)
        if "direction" not in probe_raw:
            raise ConfigError("probe section needs a 'direction'")
        probe_raw["direction"] = parse_direction(probe_raw["direction"])
        probe = ProbeSettings(**probe_raw)

    sweep = None
    if "sweep" in raw:
        sweep_raw = dict(raw["sweep"])
        _check_keys("sweep", sweep_raw, _SWEEP_KEYS)
        policies = sweep_raw.get("policies")
        if not isinstance(policies, dict):
            raise ConfigError("sweep section needs a 'policies' mapping "
                              "of label -> checkpoint path")
        sweep_raw["policies"] = tuple(sorted(policies.items()))
        sweep_raw["values"] = tuple(float(v) for v in
                                    sweep_raw.get("values", ()))
        sweep = SweepSettings(**sweep_raw)

    spectrum = None
    if "spectrum" in raw:
        spec_raw = dict(raw["spectrum"])
        _check_keys("spectrum", spec_raw, _SPECTRUM_KEYS)
        directions = spec_raw.get("directions")
        if not isinstance(directions, list) or not directions:
            raise ConfigError("spectrum section needs a 'directions' list")
        spec_raw["directions"] = tuple(parse_direction(d) for d in directions)
        spectrum = SpectrumSettings(**spec_raw)

    echo = json.dumps(raw, indent=2, sort_keys=True)
    return RunConfig(seed=seed, env=env, train=train, probe=probe,
                     sweep=sweep, spectrum=spectrum,
                     output_dir=str(raw.get("output_dir", "")), echo=echo)


def _set_path(raw: dict, dotted: str, value) -> None:
    head, _, rest = dotted.partition(".")
    if rest:
        raw.setdefault(head, {})
        _set_path(raw[head], rest, value)
    else:
        raw[head] = value


def load_run_config(path: Path | str,
                    overrides: dict[str, object] | None = None) -> RunConfig:
    """Parse a manifest file, apply dotted-path CLI overrides (e.g.
    "train.total_steps"), and validate everything."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_path(raw, dotted, value)
    return build_run_config(raw)
