"""Exact finite MDPs and Bellman-operator machinery.

Arrays follow a fixed layout:

* transition ``[state, action, next_state]``
* reward ``[state, action]`` (expected immediate reward)
* policy ``[state, action]``
* state values ``[state]``, action values ``[state, action]``

Policies and value tables are plain ``numpy`` arrays; ``TabularMdp`` is the
only container type.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

STOCHASTIC_ATOL = 1e-12
DEFAULT_TOL = 1e-10
MAX_ITERATIONS = 100_000


class ContractError(ValueError):
    """Raised when inputs violate an operation's preconditions."""


class ConvergenceError(RuntimeError):
    pass


def _check_stochastic(probs: np.ndarray, name: str) -> None:
    if np.any(probs < 0):
        raise ContractError(f"{name} has negative entries")
    if not np.all(np.isfinite(probs)):
        raise ContractError(f"{name} has non-finite entries")
    if not np.allclose(probs.sum(axis=-1), 1.0, rtol=0.0, atol=STOCHASTIC_ATOL):
        raise ContractError(f"{name} rows must sum to 1")


@dataclass(frozen=True, eq=False)
class TabularMdp:
    transition: np.ndarray
    reward: np.ndarray
    gamma: float

    def __post_init__(self):
        transition = np.array(self.transition, dtype=float)
        reward = np.array(self.reward, dtype=float)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ContractError(f"transition must be [S, A, S], got {transition.shape}")
        if reward.shape != transition.shape[:2]:
            raise ContractError(
                f"reward shape {reward.shape} does not match transition {transition.shape}"
            )
        if not 0.0 <= self.gamma < 1.0:
            raise ContractError(f"gamma must lie in [0, 1), got {self.gamma}")
        _check_stochastic(transition, "transition")
        if not np.all(np.isfinite(reward)):
            raise ContractError("reward has non-finite entries")
        transition.flags.writeable = False
        reward.flags.writeable = False
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


def random_mdp(
    rng: np.random.Generator, n_states: int, n_actions: int, gamma: float | None = None
) -> TabularMdp:
    """Dirichlet transitions, standard-normal rewards. Used by tests and studies."""
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    # renormalise so rows pass the 1e-12 stochasticity check
    transition /= transition.sum(axis=-1, keepdims=True)
    reward = rng.standard_normal((n_states, n_actions))
    if gamma is None:
        gamma = float(rng.uniform(0.0, 0.99))
    return TabularMdp(transition, reward, gamma)


def uniform_policy(n_states: int, n_actions: int) -> np.ndarray:
    return np.full((n_states, n_actions), 1.0 / n_actions)


def deterministic_policy(actions, n_actions: int) -> np.ndarray:
    actions = np.asarray(actions, dtype=int)
    policy = np.zeros((actions.size, n_actions))
    policy[np.arange(actions.size), actions] = 1.0
    return policy


def _check_policy(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise ContractError(
            f"policy shape {policy.shape} != {(mdp.n_states, mdp.n_actions)}"
        )
    _check_stochastic(policy, "policy")
    return policy


def _check_values(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.n_states,):
        raise ContractError(f"value shape {v.shape} != ({mdp.n_states},)")
    if not np.all(np.isfinite(v)):
        raise ContractError("values must be finite")
    return v


def action_backup(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    """``r(s,a) + gamma * sum_s' p(s'|s,a) v(s')`` for every (s, a)."""
    v = _check_values(mdp, v)
    return mdp.reward + mdp.gamma * (mdp.transition @ v)


def bellman_eval_apply(mdp: TabularMdp, policy: np.ndarray, v: np.ndarray) -> np.ndarray:
    policy = _check_policy(mdp, policy)
    return np.sum(policy * action_backup(mdp, v), axis=1)


def bellman_eval_apply_k(
    mdp: TabularMdp, policy: np.ndarray, v: np.ndarray, k: int
) -> np.ndarray:
    if k < 0:
        raise ContractError(f"k must be non-negative, got {k}")
    out = _check_values(mdp, v).copy()
    for _ in range(k):
        out = bellman_eval_apply(mdp, policy, out)
    return out


def bellman_opt_apply(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    return action_backup(mdp, v).max(axis=1)


def bellman_opt_apply_k(mdp: TabularMdp, v: np.ndarray, k: int) -> np.ndarray:
    if k < 0:
        raise ContractError(f"k must be non-negative, got {k}")
    out = _check_values(mdp, v).copy()
    for _ in range(k):
        out = bellman_opt_apply(mdp, out)
    return out


def policy_reward(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    return np.sum(_check_policy(mdp, policy) * mdp.reward, axis=1)


def policy_evaluation_direct(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Solve ``(I - gamma P^pi) v = R^pi`` directly."""
    kernel = policy_transition_kernel(mdp, policy)
    lhs = np.eye(mdp.n_states) - mdp.gamma * kernel
    return np.linalg.solve(lhs, policy_reward(mdp, policy))


def _iterate_to_fixed_point(step, v0: np.ndarray, tol: float) -> np.ndarray:
    if tol <= 0:
        raise ContractError(f"tol must be positive, got {tol}")
    v = v0
    for _ in range(MAX_ITERATIONS):
        v_next = step(v)
        # residual of v is exactly |v_next - v|, so v carries the guarantee
        if np.max(np.abs(v_next - v), initial=0.0) <= tol:
            return v
        v = v_next
    raise ConvergenceError(f"no convergence within {MAX_ITERATIONS} iterations")


def policy_evaluation(
    mdp: TabularMdp, policy: np.ndarray, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Value of ``policy``: the returned ``v`` has Bellman residual <= ``tol``.

    Starts from the direct linear solve and polishes it by iteration, so the
    residual guarantee holds for the value actually returned.
    """
    if tol <= 0:
        raise ContractError(f"tol must be positive, got {tol}")
    policy = _check_policy(mdp, policy)
    v0 = policy_evaluation_direct(mdp, policy)
    return _iterate_to_fixed_point(lambda v: bellman_eval_apply(mdp, policy, v), v0, tol)


def policy_evaluation_iterative(
    mdp: TabularMdp, policy: np.ndarray, tol: float = DEFAULT_TOL
) -> np.ndarray:
    policy = _check_policy(mdp, policy)
    return _iterate_to_fixed_point(
        lambda v: bellman_eval_apply(mdp, policy, v), np.zeros(mdp.n_states), tol
    )


def value_iteration(mdp: TabularMdp, tol: float = DEFAULT_TOL) -> np.ndarray:
    return _iterate_to_fixed_point(
        lambda v: bellman_opt_apply(mdp, v), np.zeros(mdp.n_states), tol
    )


def greedy_policy(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    return deterministic_policy(action_backup(mdp, v).argmax(axis=1), mdp.n_actions)


def enumerate_deterministic_policies(n_states: int, n_actions: int):
    for actions in product(range(n_actions), repeat=n_states):
        yield deterministic_policy(actions, n_actions)


def induce_state_values(q: np.ndarray, policy: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    policy = np.asarray(policy, dtype=float)
    if q.shape != policy.shape:
        raise ContractError(f"q shape {q.shape} != policy shape {policy.shape}")
    return np.sum(policy * q, axis=1)


def policy_transition_kernel(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Row-stochastic ``P[s, s'] = sum_a pi(a|s) p(s'|s,a)``."""
    policy = _check_policy(mdp, policy)
    return np.einsum("sa,sat->st", policy, mdp.transition)


def matrix_power(kernel: np.ndarray, l: int) -> np.ndarray:
    """``kernel ** l`` by repeated multiplication."""
    if l < 0:
        raise ContractError(f"power must be non-negative, got {l}")
    out = np.eye(kernel.shape[0])
    for _ in range(l):
        out = out @ kernel
    return out


def occupancy_curve(kernel: np.ndarray, start: int, target: int, l_max: int) -> np.ndarray:
    """Occupancy probabilities for ``l = 0..l_max`` from one propagated row."""
    kernel = np.asarray(kernel, dtype=float)
    n = kernel.shape[0]
    if not (0 <= start < n and 0 <= target < n):
        raise ContractError(f"state index out of range for {n} states")
    if l_max < 0:
        raise ContractError(f"l_max must be non-negative, got {l_max}")
    row = np.zeros(n)
    row[start] = 1.0
    out = np.empty(l_max + 1)
    out[0] = row[target]
    for l in range(1, l_max + 1):
        row = row @ kernel
        out[l] = row[target]
    return out


def occupancy_probability(kernel: np.ndarray, start: int, target: int, l: int) -> float:
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ContractError(f"kernel must be square, got {kernel.shape}")
    _check_stochastic(kernel, "kernel")
    n = kernel.shape[0]
    if not (0 <= start < n and 0 <= target < n):
        raise ContractError(f"state index out of range for {n} states")
    return float(matrix_power(kernel, l)[start, target])
