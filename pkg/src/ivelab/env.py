"""Empty gridworld with actuator-noise wind, rollouts and experience buffers.

States are indexed row-major: 0 is the top-left cell and
``width * height - 1`` the bottom-right one. Actions are N, W, S, E.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mdp import ContractError, TabularMdp

ACTIONS = ("N", "W", "S", "E")
# (row, col) displacement per action
MOVES = ((-1, 0), (0, -1), (1, 0), (0, 1))
RNG_ALGORITHM = "numpy-PCG64"


@dataclass(frozen=True)
class GridworldSpec:
    width: int = 5
    height: int = 5
    wind_prob: float = 0.0
    episode_length: int = 20
    excluded_cell: int | None = 0
    gamma: float = 0.9

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ContractError("grid dimensions must be positive")
        if not 0.0 <= self.wind_prob <= 1.0:
            raise ContractError(f"wind_prob must lie in [0, 1], got {self.wind_prob}")
        if self.episode_length < 1:
            raise ContractError("episode_length must be positive")
        if self.excluded_cell is not None and not 0 <= self.excluded_cell < self.n_states:
            raise ContractError(f"excluded_cell {self.excluded_cell} outside the grid")

    @property
    def n_states(self) -> int:
        return self.width * self.height

    @property
    def n_actions(self) -> int:
        return len(ACTIONS)

    @property
    def top_left(self) -> int:
        return 0

    @property
    def bottom_right(self) -> int:
        return self.n_states - 1

    def cell(self, state: int) -> tuple[int, int]:
        return divmod(state, self.width)

    def state(self, row: int, col: int) -> int:
        return row * self.width + col


def _move(spec: GridworldSpec, state: int, action: int) -> int:
    row, col = spec.cell(state)
    d_row, d_col = MOVES[action]
    row, col = row + d_row, col + d_col
    if 0 <= row < spec.height and 0 <= col < spec.width:
        return spec.state(row, col)
    return state


def build_gridworld(spec: GridworldSpec) -> TabularMdp:
    """Exact dynamics: with probability ``wind_prob`` the chosen action is
    replaced by a uniform draw over all four actions (which may coincide with
    the chosen one). Rewards are identically zero."""
    n_s, n_a = spec.n_states, spec.n_actions
    deterministic = np.zeros((n_s, n_a, n_s))
    for s in range(n_s):
        for a in range(n_a):
            deterministic[s, a, _move(spec, s, a)] = 1.0
    wind = deterministic.mean(axis=1, keepdims=True)
    transition = (1.0 - spec.wind_prob) * deterministic + spec.wind_prob * wind
    return TabularMdp(transition, np.zeros((n_s, n_a)), spec.gamma)


@dataclass(frozen=True)
class Transition:
    s: int
    a: int
    r: float
    s_next: int


@dataclass
class ExperienceBuffer:
    transitions: list[Transition] = field(default_factory=list)
    seed: int = 0
    policy_label: str = "unknown"
    steps: int = 0
    rng_algorithm: str = RNG_ALGORITHM

    def __len__(self) -> int:
        return len(self.transitions)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Column arrays ``(s, a, r, s_next)``."""
        n = len(self.transitions)
        s = np.fromiter((t.s for t in self.transitions), dtype=np.int64, count=n)
        a = np.fromiter((t.a for t in self.transitions), dtype=np.int64, count=n)
        r = np.fromiter((t.r for t in self.transitions), dtype=np.float64, count=n)
        s_next = np.fromiter((t.s_next for t in self.transitions), dtype=np.int64, count=n)
        return s, a, r, s_next

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# seed={self.seed} policy={self.policy_label} steps={self.steps}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["s", "a", "r", "s_next"])
        for t in self.transitions:
            writer.writerow([t.s, t.a, repr(float(t.r)), t.s_next])
        return out.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> ExperienceBuffer:
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("#"):
            for item in lines[0][1:].split():
                key, _, value = item.partition("=")
                meta[key] = value
            lines = lines[1:]
        reader = csv.DictReader(lines)
        if reader.fieldnames != ["s", "a", "r", "s_next"]:
            raise ValueError(f"unexpected buffer header {reader.fieldnames}")
        transitions = [
            Transition(int(row["s"]), int(row["a"]), float(row["r"]), int(row["s_next"]))
            for row in reader
        ]
        return cls(
            transitions,
            seed=int(meta.get("seed", 0)),
            policy_label=meta.get("policy", "unknown"),
            steps=int(meta.get("steps", len(transitions))),
        )

    @classmethod
    def load(cls, path) -> ExperienceBuffer:
        return cls.from_csv(Path(path).read_text())


def rollout(
    mdp: TabularMdp,
    spec: GridworldSpec,
    policy: np.ndarray,
    n_steps: int,
    start: int | None = None,
    rng_seed: int = 0,
    policy_label: str = "custom",
) -> ExperienceBuffer:
    """Collect ``n_steps`` transitions in episodes of ``spec.episode_length``,
    each restarting at ``start`` (bottom-right by default)."""
    if n_steps < 1:
        raise ContractError("n_steps must be at least 1")
    if start is None:
        start = spec.bottom_right
    policy = np.asarray(policy, dtype=float)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    policy_cdf = np.cumsum(policy, axis=1)
    transition_cdf = np.cumsum(mdp.transition, axis=2)
    transitions = []
    state = start
    for t in range(n_steps):
        if t % spec.episode_length == 0:
            state = start
        action = _draw(policy_cdf[state], rng)
        s_next = _draw(transition_cdf[state, action], rng)
        transitions.append(Transition(state, action, float(mdp.reward[state, action]), s_next))
        state = s_next
    return ExperienceBuffer(transitions, seed=rng_seed, policy_label=policy_label, steps=n_steps)


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> int:
    # clip guards against cdf[-1] falling a hair below 1.0
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), cdf.size - 1)


def exclude_cell(buffer: ExperienceBuffer, cell: int) -> ExperienceBuffer:
    kept = [t for t in buffer.transitions if t.s != cell and t.s_next != cell]
    return ExperienceBuffer(
        kept,
        seed=buffer.seed,
        policy_label=buffer.policy_label,
        steps=buffer.steps,
        rng_algorithm=buffer.rng_algorithm,
    )
