"""Acting on disagreement: seeking/averse policies and μ-IVE planning robustness."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .ive import ive_opt_exact
from .mdp import ContractError, TabularMdp, deterministic_policy, random_mdp, value_iteration


def _check_table(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2:
        raise ContractError(f"disagreement table must be [state, action], got {sigma.shape}")
    if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
        raise ContractError("disagreement entries must be finite and non-negative")
    return sigma


def seeking_policy(sigma: np.ndarray) -> np.ndarray:
    """Deterministic argmax over actions; ties go to the lowest action index."""
    sigma = _check_table(sigma)
    return deterministic_policy(np.argmax(sigma, axis=1), sigma.shape[1])


def averse_policy(sigma: np.ndarray) -> np.ndarray:
    sigma = _check_table(sigma)
    return deterministic_policy(np.argmin(sigma, axis=1), sigma.shape[1])


def mu_ive_value_estimate(model_mdp: TabularMdp, v: np.ndarray, n: int) -> np.ndarray:
    return ive_opt_exact(model_mdp, v, n).mean


ESTIMATOR_MU = "mu-ive"


@dataclass
class StudyRow:
    trial: int
    estimator: str
    mean_abs_err: float
    median_abs_err: float


@dataclass
class StudyResult:
    rows: list[StudyRow]
    n: int
    # per trial: |mu-IVE - v*| <= max_k |v^k - v*| at every state
    convexity_holds: list[bool]

    def estimators(self) -> list[str]:
        return [f"k={k}" for k in range(self.n + 1)] + [ESTIMATOR_MU]

    def median_of(self, estimator: str) -> float:
        """Median over trials of the per-trial median absolute error."""
        return float(np.median([r.median_abs_err for r in self.rows if r.estimator == estimator]))

    def mean_of(self, estimator: str) -> float:
        return float(np.mean([r.mean_abs_err for r in self.rows if r.estimator == estimator]))

    def ordering_flags(self, fixed_ks=(1, 5)) -> dict[int, bool]:
        """True where μ-IVE's median error is <= the fixed-k estimator's."""
        mu = self.median_of(ESTIMATOR_MU)
        return {k: mu <= self.median_of(f"k={k}") for k in fixed_ks if k <= self.n}

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["trial", "estimator", "mean_abs_err", "median_abs_err"])
        for row in self.rows:
            writer.writerow(
                [row.trial, row.estimator, repr(row.mean_abs_err), repr(row.median_abs_err)]
            )
        return out.getvalue()


def perturb_mdp(true_mdp: TabularMdp, scale: float, rng: np.random.Generator) -> TabularMdp:
    """Gaussian noise on transition logits and rewards; rows stay stochastic."""
    with np.errstate(divide="ignore"):
        logits = np.log(true_mdp.transition)
    logits = logits + scale * rng.standard_normal(logits.shape)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=-1, keepdims=True)
    reward = true_mdp.reward + scale * rng.standard_normal(true_mdp.reward.shape)
    return TabularMdp(probs, reward, true_mdp.gamma)


def planning_robustness_study(
    true_mdp: TabularMdp | None,
    perturbation_scale: float,
    n: int,
    trials: int,
    seed: int,
    n_states: int = 8,
    n_actions: int = 4,
    gamma: float = 0.9,
) -> StudyResult:
    """Compare fixed-k optimality k-MPVs with their mean under a perturbed model.

    ``true_mdp=None`` draws a fresh random MDP per trial.
    """
    if perturbation_scale < 0:
        raise ContractError("perturbation_scale must be non-negative")
    if trials < 1:
        raise ContractError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    rows: list[StudyRow] = []
    convexity: list[bool] = []
    for trial in range(trials):
        mdp = true_mdp if true_mdp is not None else random_mdp(rng, n_states, n_actions, gamma)
        v_star = value_iteration(mdp)
        model = perturb_mdp(mdp, perturbation_scale, rng)
        v_hat = v_star + perturbation_scale * rng.standard_normal(v_star.shape)
        report = ive_opt_exact(model, v_hat, n)
        errors = np.abs(report.kmpv - v_star[:, None])
        mu_error = np.abs(report.mean - v_star)
        convexity.append(bool(np.all(mu_error <= errors.max(axis=1))))
        for k in range(n + 1):
            rows.append(
                StudyRow(trial, f"k={k}", float(errors[:, k].mean()), float(np.median(errors[:, k])))
            )
        rows.append(StudyRow(trial, ESTIMATOR_MU, float(mu_error.mean()), float(np.median(mu_error))))
    return StudyResult(rows, n, convexity)
