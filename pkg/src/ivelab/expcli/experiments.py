"""End-to-end experiment pipelines behind the CLI commands.

Each ``run_*`` function returns its numbers; each ``cmd_*`` function runs the
pipeline and writes CSV, PGM and ``manifest.txt`` files into the output
directory. Outputs depend only on the config and seed list.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import _kernels
from ..env import RNG_ALGORITHM, ExperienceBuffer, GridworldSpec, build_gridworld, exclude_cell, rollout
from ..funcapprox import didactic
from ..ive import IveReport, emve_stats, eve_stats, ive_exact, ive_exact_q
from ..mdp import (
    action_backup,
    bellman_eval_apply,
    induce_state_values,
    occupancy_curve,
    policy_evaluation,
    policy_transition_kernel,
    uniform_policy,
)
from ..policy_select import averse_policy, planning_robustness_study, seeking_policy
from ..tabular_learn import (
    LearnedTabularModel,
    fit_model_mle,
    fit_q_expected_sarsa,
    learned_model_to_mdp,
    train_emve,
    train_eve,
)
from .config import RunConfig, format_value
from .heatmap import write_heatmap

GREEDY_NOTE = (
    "greedy baseline omitted: with an all-zero reward its construction is unspecified"
)


# -- shared tabular pipeline ------------------------------------------------


def derived_seeds(seed: int) -> dict[str, int]:
    """Independent child seeds for each stochastic stage of one run."""
    state = np.random.SeedSequence(seed).generate_state(5)
    names = ("rollout", "value", "model", "eve", "emve")
    return {name: int(s) for name, s in zip(names, state)}


@dataclass
class TabularArtifacts:
    spec: GridworldSpec
    buffer: ExperienceBuffer
    policy: np.ndarray
    q: np.ndarray
    v: np.ndarray
    model: LearnedTabularModel
    eve: list[np.ndarray] = field(default_factory=list)
    emve: list[LearnedTabularModel] = field(default_factory=list)

    @property
    def model_mdp(self):
        return learned_model_to_mdp(self.model, self.spec.gamma)

    def visited_states(self) -> np.ndarray:
        s, _, _, _ = self.buffer.arrays()
        mask = np.zeros(self.spec.n_states, dtype=bool)
        mask[s] = True
        return mask


def train_artifacts(
    cfg: RunConfig, seed: int, spec: GridworldSpec, eve_n: int = 0, emve_n: int = 0
) -> TabularArtifacts:
    seeds = derived_seeds(seed)
    true_mdp = build_gridworld(spec)
    shape = (spec.n_states, spec.n_actions)
    policy = uniform_policy(*shape)
    buffer = rollout(
        true_mdp, spec, policy, cfg.rollout_steps, start=spec.bottom_right,
        rng_seed=seeds["rollout"], policy_label="uniform",
    )
    if spec.excluded_cell is not None:
        buffer = exclude_cell(buffer, spec.excluded_cell)
    q = fit_q_expected_sarsa(buffer, policy, shape, cfg.train_config(seeds["value"]), spec.gamma)
    model = fit_model_mle(buffer, shape, cfg.train_config(seeds["model"]))
    eve = train_eve(buffer, policy, shape, cfg.train_config(seeds["eve"]), eve_n, spec.gamma) if eve_n else []
    emve = train_emve(buffer, shape, cfg.train_config(seeds["emve"]), emve_n) if emve_n else []
    return TabularArtifacts(spec, buffer, policy, q, induce_state_values(q, policy), model, eve, emve)


def true_pair_artifacts(cfg: RunConfig, spec: GridworldSpec, n: int) -> TabularArtifacts:
    """The exact model with its exact values, replicated into every ensemble."""
    true_mdp = build_gridworld(spec)
    policy = uniform_policy(spec.n_states, spec.n_actions)
    v = policy_evaluation(true_mdp, policy)
    q = action_backup(true_mdp, v)
    with np.errstate(divide="ignore"):
        model = LearnedTabularModel(np.log(true_mdp.transition), true_mdp.reward.copy())
    return TabularArtifacts(
        spec, ExperienceBuffer(policy_label="none"), policy, q, v, model,
        [q.copy() for _ in range(n)], [model for _ in range(n)],
    )


# -- output helpers -----------------------------------------------------------


def _rows_to_csv(header, rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return out.getvalue()


def summary_csv(mean: np.ndarray, std: np.ndarray) -> str:
    return _rows_to_csv(["state", "mu", "sigma"], zip(range(len(mean)), mean, std))


def write_manifest(out: Path, command: str, cfg: RunConfig, extra: dict[str, str]) -> None:
    lines = [f"command = {command}", f"kernel_backend = {_kernels.BACKEND}",
             f"rng_algorithm = {RNG_ALGORITHM}"]
    # the output directory is left out so identical runs match byte for byte
    lines += [f"config.{key} = {value}" for key, value in cfg.items() if key != "out"]
    lines += [f"{key} = {value}" for key, value in extra.items()]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _prepare(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- fig3: out-of-distribution heatmaps ------------------------------------


@dataclass
class Fig3Result:
    seed: int
    panels: dict[str, tuple[np.ndarray, np.ndarray]]  # name -> (mean, std) per state
    members: dict[str, IveReport]
    visited: np.ndarray
    spec: GridworldSpec


def run_fig3(cfg: RunConfig, seed: int) -> Fig3Result:
    spec = cfg.gridworld()
    n_ens = cfg.ensemble_size
    if cfg.true_pair:
        art = true_pair_artifacts(cfg, spec, n_ens)
    else:
        art = train_artifacts(cfg, seed, spec, eve_n=n_ens, emve_n=n_ens)
    model_mdp = art.model_mdp
    panels, members = {}, {}
    for n in cfg.ive_horizons:
        report = ive_exact(model_mdp, art.policy, art.v, n)
        panels[f"sigma_ive_{n}"] = (report.mean, report.std)
        members[f"sigma_ive_{n}"] = report
    eve_values = [induce_state_values(q, art.policy) for q in art.eve]
    panels[f"sigma_eve_{n_ens}"] = eve_stats(eve_values)
    panels[f"sigma_emve_{n_ens}"] = emve_stats(art.emve, art.policy, art.v, spec.gamma)
    return Fig3Result(seed, panels, members, art.visited_states(), spec)


def cmd_fig3(cfg: RunConfig) -> list[Path]:
    out = _prepare(cfg.out)
    written = []
    for seed in cfg.seeds:
        result = run_fig3(cfg, seed)
        grid_shape = (result.spec.height, result.spec.width)
        prefix = f"fig3_seed{seed}"
        visits = np.zeros(result.spec.n_states)
        visits[result.visited] = 1.0
        path = out / f"{prefix}_dataset.pgm"
        write_heatmap(visits.reshape(grid_shape), path)
        written.append(path)
        for name, (mean, std) in result.panels.items():
            path = out / f"{prefix}_{name}.csv"
            path.write_text(summary_csv(mean, std))
            written.append(path)
            path = out / f"{prefix}_{name}.pgm"
            write_heatmap(std.reshape(grid_shape), path)
            written.append(path)
        for name, report in result.members.items():
            path = out / f"{prefix}_{name}_members.csv"
            path.write_text(report.to_csv()[0])
            written.append(path)
    write_manifest(out, "fig3", cfg, {
        "seeds_used": format_value(cfg.seeds),
        "derived_seeds": "; ".join(f"{s}:{derived_seeds(s)}" for s in cfg.seeds),
        "heatmap_normalisation": "min-max per panel, round half up to 0..255",
    })
    return written


# -- fig5 / shift: occupancy of the out-of-distribution cell ------------------


@dataclass
class OccupancyResult:
    ls: np.ndarray
    curves: dict[str, np.ndarray]  # name -> [seed, l]

    def mean(self, name: str) -> np.ndarray:
        return self.curves[name].mean(axis=0)

    def stderr(self, name: str) -> np.ndarray:
        runs = self.curves[name]
        if runs.shape[0] < 2:
            return np.zeros(runs.shape[1])
        return runs.std(axis=0, ddof=1) / np.sqrt(runs.shape[0])

    def to_csv(self) -> str:
        rows = []
        for name in self.curves:
            mean, se = self.mean(name), self.stderr(name)
            rows += [(name, int(l), mean[i], se[i]) for i, l in enumerate(self.ls)]
        return _rows_to_csv(["curve", "l", "mean", "stderr"], rows)

    def raw_csv(self) -> str:
        rows = []
        for name, runs in self.curves.items():
            for j, run in enumerate(runs):
                rows += [(name, j, int(l), run[i]) for i, l in enumerate(self.ls)]
        return _rows_to_csv(["curve", "seed_index", "l", "probability"], rows)


def disagreement_tables(cfg: RunConfig, art: TabularArtifacts) -> dict[str, np.ndarray]:
    """Per-(s, a) spreads: σ-IVE(n) from action-conditioned k-MPVs, σ-EVE, σ-EMVE."""
    tables = {"ive": ive_exact_q(art.model_mdp, art.policy, art.v, cfg.fig5_n).std}
    tables["eve"] = eve_stats(art.eve)[1]
    if art.emve:
        backups = [action_backup(learned_model_to_mdp(m, art.spec.gamma), art.v) for m in art.emve]
        tables["emve"] = eve_stats(backups)[1]
    return tables


def _occupancy(spec_eval: GridworldSpec, policy: np.ndarray, l_max: int) -> np.ndarray:
    kernel = policy_transition_kernel(build_gridworld(spec_eval), policy)
    return occupancy_curve(kernel, spec_eval.bottom_right, spec_eval.top_left, l_max)[1:]


def run_occupancy(cfg: RunConfig, eval_winds: tuple[float, ...], modes=("seeking", "averse")):
    """Train at ``cfg.wind_prob`` and evaluate policies under each eval wind."""
    train_spec = cfg.gridworld()
    ls = np.arange(1, cfg.l_max + 1)
    curves: dict[str, list[np.ndarray]] = {}
    builders = {"seeking": seeking_policy, "averse": averse_policy}
    uniform = uniform_policy(train_spec.n_states, train_spec.n_actions)

    def add(name, values):
        curves.setdefault(name, []).append(values)

    for seed in cfg.seeds:
        art = train_artifacts(
            cfg, seed, train_spec, eve_n=cfg.fig5_n,
            emve_n=cfg.fig5_n if cfg.fig5_include_emve else 0,
        )
        tables = disagreement_tables(cfg, art)
        for wind in dict.fromkeys(eval_winds):
            spec_eval = cfg.gridworld(wind_prob=wind)
            suffix = f"@{wind!r}"
            add(f"uniform{suffix}", _occupancy(spec_eval, uniform, cfg.l_max))
            for mode in modes:
                for signal, sigma in tables.items():
                    policy = builders[mode](sigma)
                    add(f"{signal}_{mode}{suffix}", _occupancy(spec_eval, policy, cfg.l_max))
    return OccupancyResult(ls, {k: np.array(v) for k, v in curves.items()})


def run_fig5(cfg: RunConfig) -> OccupancyResult:
    result = run_occupancy(cfg, (cfg.wind_prob,))
    return OccupancyResult(
        result.ls, {name.partition("@")[0]: runs for name, runs in result.curves.items()}
    )


def cmd_fig5(cfg: RunConfig) -> list[Path]:
    out = _prepare(cfg.out)
    result = run_fig5(cfg)
    paths = [out / "fig5_occupancy.csv", out / "fig5_occupancy_runs.csv"]
    paths[0].write_text(result.to_csv())
    paths[1].write_text(result.raw_csv())
    write_manifest(out, "fig5", cfg, {
        "seeds_used": format_value(cfg.seeds),
        "start_state": "bottom-right",
        "target_state": "top-left",
        "note": GREEDY_NOTE,
    })
    return paths


def cmd_shift(cfg: RunConfig) -> list[Path]:
    out = _prepare(cfg.out)
    result = run_shift(cfg)
    rows = []
    for name in result.curves:
        base, _, wind = name.partition("@")
        mean, se = result.mean(name), result.stderr(name)
        rows += [(base, wind, int(l), mean[i], se[i]) for i, l in enumerate(result.ls)]
    path = out / "shift_occupancy.csv"
    path.write_text(_rows_to_csv(["curve", "wind_prob", "l", "mean", "stderr"], rows))
    write_manifest(out, "shift", cfg, {
        "seeds_used": format_value(cfg.seeds),
        "wind_train": repr(cfg.wind_prob),
        "wind_eval": repr(cfg.wind_eval),
    })
    return [path]


def run_shift(cfg: RunConfig) -> OccupancyResult:
    return run_occupancy(cfg, (cfg.wind_prob, cfg.wind_eval), modes=("averse",))


# -- didactic curves ------------------------------------------------------


@dataclass
class DidacticResult:
    probes: np.ndarray
    dataset: didactic.Dataset
    before: IveReport
    after: IveReport
    at_data: IveReport
    params: didactic.DidacticParams
    per_k_mse: np.ndarray


def load_dataset(cfg: RunConfig) -> didactic.Dataset:
    if cfg.dataset:
        return didactic.Dataset.load(cfg.dataset)
    return didactic.default_dataset(cfg.n_points)


def run_didactic(cfg: RunConfig, seed: int) -> DidacticResult:
    dcfg = cfg.didactic_config(seed)
    data = load_dataset(cfg)
    probes = np.linspace(-3.0, 3.0, cfg.probe_points)
    initial = didactic.init_params(seed)
    trained = didactic.train_didactic(data, dcfg, params=initial)
    curve = lambda p, xs: didactic.ive_curve(p, xs, dcfg.k_max, dcfg.gamma, dcfg.k_max)
    return DidacticResult(
        probes, data, curve(initial, probes), curve(trained, probes),
        curve(trained, data.states), trained,
        didactic.per_k_mse(trained, data.states, data.targets, dcfg.k_max, dcfg.gamma),
    )


def cmd_didactic(cfg: RunConfig) -> list[Path]:
    out = _prepare(cfg.out)
    written = []
    extra = {"seeds_used": format_value(cfg.seeds)}
    for seed in cfg.seeds:
        result = run_didactic(cfg, seed)
        for tag, report in (("before", result.before), ("after", result.after)):
            members, summary = didactic.curve_to_csv(result.probes, report)
            for kind, text in (("members", members), ("summary", summary)):
                path = out / f"didactic_seed{seed}_{tag}_{kind}.csv"
                path.write_text(text)
                written.append(path)
        path = out / f"didactic_seed{seed}_dataset.csv"
        path.write_text(result.dataset.to_csv())
        written.append(path)
        extra[f"seed{seed}.dataset_source"] = result.dataset.source
        extra[f"seed{seed}.per_k_mse"] = ",".join(repr(float(x)) for x in result.per_k_mse)
    write_manifest(out, "didactic", cfg, extra)
    return written


# -- planning robustness ---------------------------------------------------


def cmd_plan_study(cfg: RunConfig) -> list[Path]:
    out = _prepare(cfg.out)
    written = []
    extra = {"seeds_used": format_value(cfg.seeds)}
    for seed in cfg.seeds:
        result = planning_robustness_study(
            None, cfg.perturbation_scale, cfg.plan_n, cfg.trials, seed,
            n_states=cfg.plan_states, n_actions=cfg.plan_actions, gamma=cfg.gamma,
        )
        path = out / f"plan_study_seed{seed}.csv"
        path.write_text(result.to_csv())
        written.append(path)
        extra[f"seed{seed}.convexity_all_trials"] = str(all(result.convexity_holds)).lower()
        for est in result.estimators():
            extra[f"seed{seed}.median[{est}]"] = repr(result.median_of(est))
        for k, ok in result.ordering_flags().items():
            extra[f"seed{seed}.mu_ive_median_le_k{k}"] = str(ok).lower()
    write_manifest(out, "plan-study", cfg, extra)
    return written


COMMANDS = {
    "fig3": cmd_fig3,
    "fig5": cmd_fig5,
    "shift": cmd_shift,
    "didactic": cmd_didactic,
    "plan-study": cmd_plan_study,
}
