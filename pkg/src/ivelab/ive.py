"""Implicit value ensembles: k-step model-predicted values and their spread.

A k-MPV pushes a value estimate through ``k`` applications of the
model-induced Bellman operator. The members ``k = 0..n`` come from one model
and one value function; their standard deviation (σ-IVE) measures how
inconsistent the two are with each other.
"""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mdp import (
    ContractError,
    TabularMdp,
    action_backup,
    bellman_eval_apply,
    bellman_opt_apply,
)
from .tabular_learn import LearnedTabularModel, learned_model_to_mdp


@dataclass(frozen=True)
class IveReport:
    """k-MPVs stacked along the last axis, with per-entry mean and std.

    ``kmpv`` is ``[state, k]`` or ``[state, action, k]``. ``first_k`` is 0
    for state reports and 1 for action-conditioned ones.
    """

    kmpv: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    first_k: int = 0

    @classmethod
    def from_members(cls, kmpv: np.ndarray, first_k: int = 0) -> IveReport:
        kmpv = np.asarray(kmpv, dtype=float)
        lo, hi = kmpv.min(axis=-1), kmpv.max(axis=-1)
        # rounding can push a float mean one ulp outside the members' range
        mean = np.clip(kmpv.mean(axis=-1), lo, hi)
        # population std: the members are a fixed set, not samples.
        # identical members get exactly zero rather than rounding residue
        std = np.where(lo == hi, 0.0, kmpv.std(axis=-1))
        return cls(kmpv, mean, std, first_k)

    @property
    def n(self) -> int:
        return self.first_k + self.kmpv.shape[-1] - 1

    @property
    def ks(self) -> range:
        return range(self.first_k, self.n + 1)

    def to_csv(self) -> tuple[str, str]:
        """Long-form ``state,k,value`` and summary ``state,mu,sigma`` tables."""
        if self.kmpv.ndim != 2:
            raise ContractError("CSV export expects a [state, k] report")
        members = io.StringIO()
        writer = csv.writer(members, lineterminator="\n")
        writer.writerow(["state", "k", "value"])
        for s in range(self.kmpv.shape[0]):
            for j, k in enumerate(self.ks):
                writer.writerow([s, k, repr(float(self.kmpv[s, j]))])
        summary = io.StringIO()
        writer = csv.writer(summary, lineterminator="\n")
        writer.writerow(["state", "mu", "sigma"])
        for s in range(self.kmpv.shape[0]):
            writer.writerow([s, repr(float(self.mean[s])), repr(float(self.std[s]))])
        return members.getvalue(), summary.getvalue()


def _check_n(n: int, minimum: int = 1) -> None:
    if n < minimum:
        raise ContractError(f"ensemble horizon n must be >= {minimum}, got {n}")


def ive_exact(model_mdp: TabularMdp, policy: np.ndarray, v: np.ndarray, n: int) -> IveReport:
    """Members ``(T^pi)^k v`` for ``k = 0..n``, built incrementally."""
    _check_n(n)
    columns = [np.array(v, dtype=float)]
    for _ in range(n):
        columns.append(bellman_eval_apply(model_mdp, policy, columns[-1]))
    return IveReport.from_members(np.stack(columns, axis=-1))


def ive_exact_q(model_mdp: TabularMdp, policy: np.ndarray, v: np.ndarray, n: int) -> IveReport:
    """Action-conditioned members for ``k = 1..n``: the first action is fixed,
    the remaining ``k - 1`` steps follow ``policy``."""
    _check_n(n)
    columns = []
    tail = np.array(v, dtype=float)
    for _ in range(n):
        columns.append(action_backup(model_mdp, tail))
        tail = bellman_eval_apply(model_mdp, policy, tail)
    return IveReport.from_members(np.stack(columns, axis=-1), first_k=1)


def ive_opt_exact(model_mdp: TabularMdp, v: np.ndarray, n: int) -> IveReport:
    _check_n(n)
    columns = [np.array(v, dtype=float)]
    for _ in range(n):
        columns.append(bellman_opt_apply(model_mdp, columns[-1]))
    return IveReport.from_members(np.stack(columns, axis=-1))


ModelSampler = Callable[[int, int, np.random.Generator], tuple[float, int]]
PolicySampler = Callable[[int, np.random.Generator], int]


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # s_0 .. s_n
    actions: np.ndarray  # a_0 .. a_{n-1}
    rewards: np.ndarray  # r_1 .. r_n


def sample_trajectory(
    model_sampler: ModelSampler,
    policy_sampler: PolicySampler,
    s: int,
    n: int,
    rng: np.random.Generator,
) -> Trajectory:
    states = np.empty(n + 1, dtype=np.int64)
    actions = np.empty(n, dtype=np.int64)
    rewards = np.empty(n)
    states[0] = s
    for i in range(n):
        actions[i] = policy_sampler(int(states[i]), rng)
        rewards[i], states[i + 1] = model_sampler(int(states[i]), int(actions[i]), rng)
    return Trajectory(states, actions, rewards)


def kmpv_from_trajectory(traj: Trajectory, v: Callable[[int], float], gamma: float) -> np.ndarray:
    """Every prefix estimate ``sum_{i<=k} gamma^(i-1) r_i + gamma^k v(s_k)``.

    Built by telescoping: entry ``k + 1`` is entry ``k`` plus
    ``gamma^k (r_{k+1} + gamma v(s_{k+1}) - v(s_k))``, so consecutive
    prefixes differ by exactly that increment.
    """
    n = traj.rewards.size
    values = [float(v(int(s))) for s in traj.states]
    out = np.empty(n + 1)
    out[0] = values[0]
    for k in range(n):
        out[k + 1] = out[k] + gamma**k * (traj.rewards[k] + gamma * values[k + 1] - values[k])
    return out


def mc_k_mpv(
    model_sampler: ModelSampler,
    policy_sampler: PolicySampler,
    v: Callable[[int], float],
    s: int,
    n: int,
    rng_seed: int,
    gamma: float,
    n_samples: int = 1,
) -> np.ndarray:
    """Monte-Carlo k-MPVs for ``k = 0..n`` from shared sampled trajectories.

    Each trajectory of length ``n`` yields all ``n + 1`` estimates through its
    prefixes. With ``n_samples > 1`` the per-trajectory estimates are averaged.
    """
    _check_n(n)
    if n_samples < 1:
        raise ContractError("n_samples must be at least 1")
    rng = np.random.default_rng(rng_seed)
    total = np.zeros(n + 1)
    for _ in range(n_samples):
        traj = sample_trajectory(model_sampler, policy_sampler, s, n, rng)
        total += kmpv_from_trajectory(traj, v, gamma)
    return total / n_samples


def tabular_samplers(mdp: TabularMdp, policy: np.ndarray) -> tuple[ModelSampler, PolicySampler]:
    """Samplers drawing from an explicit tabular model and policy.

    Rewards are the model's expected rewards.
    """
    transition_cdf = np.cumsum(mdp.transition, axis=-1).tolist()
    policy_cdf = np.cumsum(np.asarray(policy, dtype=float), axis=-1).tolist()
    reward = mdp.reward.tolist()

    def draw(cdf, rng):
        return min(bisect.bisect_right(cdf, rng.random()), len(cdf) - 1)

    def model_sampler(s, a, rng):
        return reward[s][a], draw(transition_cdf[s][a], rng)

    def policy_sampler(s, rng):
        return draw(policy_cdf[s], rng)

    return model_sampler, policy_sampler


@dataclass(frozen=True)
class SignalCombiner:
    beta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.beta):
            raise ContractError("beta must be finite")


def combine(report: IveReport, combiner: SignalCombiner) -> np.ndarray:
    """``mu + beta * sigma``: beta > 0 seeks inconsistency, beta < 0 avoids it."""
    return report.mean + combiner.beta * report.std


def eve_stats(members: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    if len(members) < 2:
        raise ContractError("ensemble statistics need at least 2 members")
    stacked = np.stack([np.asarray(m, dtype=float) for m in members])
    return stacked.mean(axis=0), stacked.std(axis=0)


def emve_stats(
    models: list[LearnedTabularModel], policy: np.ndarray, v: np.ndarray, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    """Spread of one-step backups ``T_{m_i} v`` across an explicit model ensemble."""
    if len(models) < 2:
        raise ContractError("ensemble statistics need at least 2 models")
    backups = [
        bellman_eval_apply(learned_model_to_mdp(m, gamma), policy, v) for m in models
    ]
    return eve_stats(backups)
