"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments, as is anything after a ``#`` on a
value line. Keys are the field names of :class:`RunConfig`; unknown keys are
rejected. ``seeds`` accepts comma-separated integers and inclusive ranges
such as ``0-19``; when omitted it is ``0`` except for the occupancy
experiments, which default to ``0-19``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..env import GridworldSpec
from ..funcapprox.didactic import DidacticConfig
from ..mdp import ContractError
from ..tabular_learn import TrainConfig

EXPERIMENTS = ("fig3", "fig5", "shift", "didactic", "plan-study")
# occupancy curves report standard errors across seeds, so they need many
DEFAULT_SEEDS = {"fig5": tuple(range(20)), "shift": tuple(range(20))}


class ConfigError(ValueError):
    pass


def parse_seeds(text: str) -> tuple[int, ...]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad seed list entry {part!r}") from exc
    if not seeds:
        raise ConfigError("seed list is empty")
    return tuple(seeds)


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "fig3"
    seeds: tuple[int, ...] = (0,)
    out: str = "out"

    # gridworld
    width: int = 5
    height: int = 5
    wind_prob: float = 0.1
    episode_length: int = 20
    excluded_cell: int = 0
    exclude: bool = True
    gamma: float = 0.9
    rollout_steps: int = 500

    # tabular training
    learning_rate: float = 5e-5
    epochs: int = 10_000
    batch_size: int = 128
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    # ensembles and signals
    ive_horizons: tuple[int, ...] = (1, 2, 20)
    ensemble_size: int = 20
    true_pair: bool = False
    fig5_n: int = 5
    fig5_include_emve: bool = True
    l_max: int = 150
    beta: float = 0.0

    # distribution shift
    wind_eval: float = 0.5

    # didactic
    didactic_gamma: float = 0.9
    n_points: int = 10
    k_max: int = 10
    didactic_learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    didactic_steps: int = 5000
    probe_points: int = 200
    dataset: str = ""

    # planning study
    perturbation_scale: float = 0.3
    plan_n: int = 5
    trials: int = 50
    plan_states: int = 8
    plan_actions: int = 4

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.rollout_steps < 1 or self.l_max < 1 or self.probe_points < 2:
            raise ConfigError("rollout_steps, l_max and probe_points must be positive")
        if self.ensemble_size < 2 or self.fig5_n < 1 or self.plan_n < 1:
            raise ConfigError("ensemble sizes must be >= 2 and horizons >= 1")
        if not 0.0 <= self.wind_eval <= 1.0:
            raise ConfigError("wind_eval must lie in [0, 1]")
        try:
            self.gridworld()
            self.train_config(0)
            self.didactic_config(0)
        except (ContractError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def gridworld(self, wind_prob: float | None = None) -> GridworldSpec:
        return GridworldSpec(
            width=self.width,
            height=self.height,
            wind_prob=self.wind_prob if wind_prob is None else wind_prob,
            episode_length=self.episode_length,
            excluded_cell=self.excluded_cell if self.exclude else None,
            gamma=self.gamma,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            seed=seed,
        )

    def didactic_config(self, seed: int) -> DidacticConfig:
        return DidacticConfig(
            gamma=self.didactic_gamma,
            n_points=self.n_points,
            k_max=self.k_max,
            learning_rate=self.didactic_learning_rate,
            weight_decay=self.weight_decay,
            steps=self.didactic_steps,
            seed=seed,
        )

    def with_seed_offset(self, offset: int) -> RunConfig:
        return replace(self, seeds=tuple(s + offset for s in self.seeds))

    def items(self) -> list[tuple[str, str]]:
        return [(f.name, format_value(getattr(self, f.name))) for f in fields(self)]


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if name == "seeds":
            return parse_seeds(raw)
        if isinstance(default, tuple):
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"invalid value for {name}: {raw!r}") from exc


def parse_config(text: str, **overrides) -> RunConfig:
    defaults = {f.name: f.default for f in fields(RunConfig)}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw, defaults[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    experiment = values.get("experiment", defaults["experiment"])
    if "seeds" not in values and experiment in DEFAULT_SEEDS:
        values["seeds"] = DEFAULT_SEEDS[experiment]
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)
