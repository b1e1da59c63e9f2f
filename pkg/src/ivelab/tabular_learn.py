"""Gradient-based tabular learning: MLE models, expected-SARSA values, ensembles.

Parameters start from N(0, 1) draws and are trained with Adam on batches
sampled with replacement. One epoch is ``ceil(len(buffer) / batch_size)``
optimizer steps. The inner loops run in ``ivelab._kernels``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import _kernels
from .env import ExperienceBuffer
from .mdp import ContractError, TabularMdp

# epochs of batch indices drawn per kernel call; fixed so sampling is reproducible
EPOCHS_PER_CHUNK = 250


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    epochs: int = 10_000
    batch_size: int = 128
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ContractError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ContractError("epochs must be non-negative")


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> AdamState:
        return cls(np.zeros_like(params, dtype=float), np.zeros_like(params, dtype=float))


def adam_step(
    params: np.ndarray, grads: np.ndarray, state: AdamState, config: TrainConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Inputs are not modified."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise ContractError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"moments {state.first_moment.shape}"
        )
    b1, b2 = config.adam_beta1, config.adam_beta2
    step = state.step_count + 1
    m = b1 * state.first_moment + (1.0 - b1) * grads
    v = b2 * state.second_moment + (1.0 - b2) * (grads * grads)
    m_hat = m / (1.0 - b1**step)
    v_hat = v / (1.0 - b2**step)
    new_params = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new_params, AdamState(m, v, step)


@dataclass
class LearnedTabularModel:
    transition_logits: np.ndarray
    reward: np.ndarray
    empty_buffer: bool = field(default=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.reward.shape

    def transition_probs(self) -> np.ndarray:
        shifted = self.transition_logits - self.transition_logits.max(axis=-1, keepdims=True)
        probs = np.exp(shifted)
        return probs / probs.sum(axis=-1, keepdims=True)


def learned_model_to_mdp(model: LearnedTabularModel, gamma: float) -> TabularMdp:
    return TabularMdp(model.transition_probs(), model.reward.copy(), gamma)


def _steps_per_epoch(n: int, batch_size: int) -> int:
    return math.ceil(n / batch_size)


def _batch_chunks(rng: np.random.Generator, n: int, config: TrainConfig):
    per_epoch = _steps_per_epoch(n, config.batch_size)
    remaining = config.epochs
    while remaining > 0:
        epochs = min(EPOCHS_PER_CHUNK, remaining)
        remaining -= epochs
        yield rng.integers(0, n, size=(epochs * per_epoch, config.batch_size), dtype=np.int64)


def _check_buffer(buffer: ExperienceBuffer, n_states: int, n_actions: int):
    s, a, r, s_next = buffer.arrays()
    if len(s) and (
        s.min() < 0 or s_next.min() < 0 or a.min() < 0
        or s.max() >= n_states or s_next.max() >= n_states or a.max() >= n_actions
    ):
        raise ContractError("buffer indices exceed the model shape")
    return s, a, r, s_next


def fit_model_mle(
    buffer: ExperienceBuffer, shape: tuple[int, int], config: TrainConfig
) -> LearnedTabularModel:
    """Fit transition logits (cross-entropy) and rewards (squared error)."""
    n_states, n_actions = shape
    s, a, r, s_next = _check_buffer(buffer, n_states, n_actions)
    rng = np.random.default_rng(config.seed)
    logits = rng.standard_normal((n_states * n_actions, n_states))
    reward = rng.standard_normal(n_states * n_actions)
    if len(s) == 0:
        warnings.warn("empty buffer: returning the initial model", RuntimeWarning, stacklevel=2)
        return LearnedTabularModel(
            logits.reshape(n_states, n_actions, n_states),
            reward.reshape(n_states, n_actions),
            empty_buffer=True,
        )
    sa = s * n_actions + a
    m_l, v_l = np.zeros_like(logits), np.zeros_like(logits)
    m_r, v_r = np.zeros_like(reward), np.zeros_like(reward)
    step = 0
    for batches in _batch_chunks(rng, len(s), config):
        step = _kernels.mle_steps(
            logits, reward, m_l, v_l, m_r, v_r, sa, r, s_next, batches, step,
            config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps,
        )
    return LearnedTabularModel(
        logits.reshape(n_states, n_actions, n_states), reward.reshape(n_states, n_actions)
    )


def fit_q_expected_sarsa(
    buffer: ExperienceBuffer,
    policy: np.ndarray,
    shape: tuple[int, int],
    config: TrainConfig,
    gamma: float,
) -> np.ndarray:
    """Semi-gradient expected SARSA; the bootstrap target is held fixed per step."""
    n_states, n_actions = shape
    policy = np.ascontiguousarray(policy, dtype=float)
    if policy.shape != (n_states, n_actions):
        raise ContractError(f"policy shape {policy.shape} != {shape}")
    s, a, r, s_next = _check_buffer(buffer, n_states, n_actions)
    rng = np.random.default_rng(config.seed)
    q = rng.standard_normal(n_states * n_actions)
    if len(s) == 0:
        warnings.warn("empty buffer: returning the initial values", RuntimeWarning, stacklevel=2)
        return q.reshape(n_states, n_actions)
    sa = s * n_actions + a
    m, v = np.zeros_like(q), np.zeros_like(q)
    step = 0
    for batches in _batch_chunks(rng, len(s), config):
        step = _kernels.sarsa_steps(
            q, m, v, policy, float(gamma), sa, r, s_next, batches, step,
            config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps,
        )
    return q.reshape(n_states, n_actions)


def train_eve(
    buffer: ExperienceBuffer,
    policy: np.ndarray,
    shape: tuple[int, int],
    config: TrainConfig,
    n: int,
    gamma: float,
) -> list[np.ndarray]:
    """Explicit value ensemble: member ``i`` uses seed ``config.seed + i``."""
    if n < 2:
        raise ContractError("an ensemble needs at least 2 members")
    return [
        fit_q_expected_sarsa(buffer, policy, shape, replace(config, seed=config.seed + i), gamma)
        for i in range(n)
    ]


def train_emve(
    buffer: ExperienceBuffer, shape: tuple[int, int], config: TrainConfig, n: int
) -> list[LearnedTabularModel]:
    """Explicit model ensemble: member ``i`` uses seed ``config.seed + i``."""
    if n < 2:
        raise ContractError("an ensemble needs at least 2 members")
    return [fit_model_mle(buffer, shape, replace(config, seed=config.seed + i)) for i in range(n)]


def params_to_csv(arrays: dict[str, np.ndarray]) -> str:
    """Flat ``name,index,value`` listing; index components joined by ``:``."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["name", "index", "value"])
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        for index in product(*(range(d) for d in arr.shape)):
            writer.writerow([name, ":".join(map(str, index)), repr(float(arr[index]))])
    return out.getvalue()


def params_from_csv(text: str) -> dict[str, np.ndarray]:
    entries: dict[str, list[tuple[tuple[int, ...], float]]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        index = tuple(int(i) for i in row["index"].split(":")) if row["index"] else ()
        entries.setdefault(row["name"], []).append((index, float(row["value"])))
    arrays = {}
    for name, items in entries.items():
        shape = tuple(max(ix[d] for ix, _ in items) + 1 for d in range(len(items[0][0])))
        arr = np.zeros(shape)
        for index, value in items:
            arr[index] = value
        arrays[name] = arr
    return arrays


def model_to_csv(model: LearnedTabularModel) -> str:
    return params_to_csv(
        {"transition_logits": model.transition_logits, "reward": model.reward}
    )


def model_from_csv(text: str) -> LearnedTabularModel:
    arrays = params_from_csv(text)
    return LearnedTabularModel(arrays["transition_logits"], arrays["reward"])


def save_model(model: LearnedTabularModel, path) -> None:
    Path(path).write_text(model_to_csv(model))
