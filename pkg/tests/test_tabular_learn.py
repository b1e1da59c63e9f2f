import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ivelab import _kernels
from ivelab.env import ExperienceBuffer, GridworldSpec, Transition, build_gridworld, exclude_cell, rollout
from ivelab.ive import eve_stats
from ivelab.mdp import ContractError, TabularMdp, action_backup, induce_state_values, random_mdp, uniform_policy
from ivelab.tabular_learn import (
    AdamState,
    LearnedTabularModel,
    TrainConfig,
    adam_step,
    fit_model_mle,
    fit_q_expected_sarsa,
    learned_model_to_mdp,
    model_from_csv,
    model_to_csv,
    params_from_csv,
    params_to_csv,
    train_emve,
    train_eve,
)


def buffer_of(*rows):
    return ExperienceBuffer([Transition(*row) for row in rows])


def gridworld_buffer(steps=500, seed=0, exclude=True):
    spec = GridworldSpec(wind_prob=0.1)
    buf = rollout(build_gridworld(spec), spec, uniform_policy(25, 4), steps, rng_seed=seed)
    return exclude_cell(buf, 0) if exclude else buf


def visited_mask(buf, shape=(25, 4)):
    s, a, _, _ = buf.arrays()
    mask = np.zeros(shape, dtype=bool)
    mask[s, a] = True
    return mask


# -- Adam -----------------------------------------------------------------


def test_train_config_validation():
    with pytest.raises(ContractError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ContractError):
        TrainConfig(batch_size=0)


def test_adam_zero_gradient():
    p = np.array([1.0, -2.0])
    new, state = adam_step(p, np.zeros(2), AdamState.zeros_like(p), TrainConfig())
    assert np.array_equal(new, p)
    assert state.step_count == 1


def test_adam_constant_gradient_descends():
    p = np.array([0.0, 0.0])
    g = np.array([2.0, -0.5])
    state = AdamState.zeros_like(p)
    cfg = TrainConfig(learning_rate=0.01)
    for _ in range(50):
        p, state = adam_step(p, g, state, cfg)
    assert p[0] < 0 < p[1]


def test_adam_hand_trace():
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    cfg = TrainConfig(learning_rate=lr)
    grads = [0.5, -1.0, 2.0]
    # hand trace with scalar arithmetic
    p, m, v = 1.0, 0.0, 0.0
    expected = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        expected.append(p)
    # first step of Adam moves by lr * sign(g) up to eps
    assert expected[0] == pytest.approx(0.9, abs=1e-7)
    params, state = np.array([1.0]), AdamState.zeros_like(np.array([1.0]))
    for g, want in zip(grads, expected):
        params, state = adam_step(params, np.array([g]), state, cfg)
        assert params[0] == pytest.approx(want, abs=1e-15)
    assert state.step_count == 3


def test_adam_shape_mismatch():
    with pytest.raises(ContractError):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros_like(np.zeros(2)), TrainConfig())


def test_adam_inputs_untouched():
    p, g = np.ones(3), np.full(3, 0.2)
    state = AdamState.zeros_like(p)
    adam_step(p, g, state, TrainConfig())
    assert np.array_equal(p, np.ones(3)) and not state.first_moment.any()


# -- model MLE --------------------------------------------------------------


def test_empty_buffer_returns_init():
    cfg = TrainConfig(seed=4)
    with pytest.warns(RuntimeWarning):
        model = fit_model_mle(ExperienceBuffer(), (3, 2), cfg)
    rng = np.random.default_rng(4)
    assert np.array_equal(model.transition_logits.reshape(6, 3), rng.standard_normal((6, 3)))
    assert np.array_equal(model.reward.ravel(), rng.standard_normal(6))
    assert model.empty_buffer


def test_mle_matches_empirical_frequencies():
    buf = buffer_of((0, 0, 0.0, 1), (0, 0, 0.0, 1), (0, 0, 0.0, 2))
    cfg = TrainConfig(learning_rate=1e-2, epochs=5000, seed=0)
    probs = fit_model_mle(buf, (3, 1), cfg).transition_probs()[0, 0]
    assert probs == pytest.approx([0.0, 2 / 3, 1 / 3], abs=1e-2)


def test_mle_reward_mean():
    buf = buffer_of((0, 0, 1.0, 0), (0, 0, 3.0, 0))
    model = fit_model_mle(buf, (1, 1), TrainConfig(learning_rate=1e-2, epochs=5000, seed=2))
    assert model.reward[0, 0] == pytest.approx(2.0, abs=5e-2)


def test_mle_consistency_total_variation():
    buf = gridworld_buffer(steps=5000, exclude=False)
    cfg = TrainConfig(learning_rate=2e-3, epochs=1000, seed=3)
    probs = fit_model_mle(buf, (25, 4), cfg).transition_probs()
    s, a, _, s_next = buf.arrays()
    checked = 0
    for state in range(25):
        for action in range(4):
            mask = (s == state) & (a == action)
            if mask.sum() < 30:
                continue
            freq = np.bincount(s_next[mask], minlength=25) / mask.sum()
            assert 0.5 * np.abs(probs[state, action] - freq).sum() <= 2e-2
            checked += 1
    assert checked > 40


def test_unvisited_pairs_keep_init():
    buf = gridworld_buffer()
    cfg = TrainConfig(epochs=200, seed=8)
    model = fit_model_mle(buf, (25, 4), cfg)
    rng = np.random.default_rng(8)
    logits0 = rng.standard_normal((100, 25)).reshape(25, 4, 25)
    reward0 = rng.standard_normal(100).reshape(25, 4)
    unvisited = ~visited_mask(buf)
    assert unvisited.sum() > 0
    assert np.array_equal(model.transition_logits[unvisited], logits0[unvisited])
    assert np.array_equal(model.reward[unvisited], reward0[unvisited])
    assert not np.array_equal(model.reward[~unvisited], reward0[~unvisited])


def test_mle_deterministic():
    buf = gridworld_buffer(seed=2)
    cfg = TrainConfig(epochs=50, seed=6)
    a, b = fit_model_mle(buf, (25, 4), cfg), fit_model_mle(buf, (25, 4), cfg)
    assert np.array_equal(a.transition_logits, b.transition_logits)
    assert np.array_equal(a.reward, b.reward)


def test_buffer_indices_validated():
    with pytest.raises(ContractError):
        fit_model_mle(buffer_of((0, 3, 0.0, 0)), (2, 2), TrainConfig(epochs=1))


# -- expected SARSA ---------------------------------------------------------


def test_sarsa_zero_init_stays_zero():
    q = np.zeros(2)
    m, v = np.zeros(2), np.zeros(2)
    sa = np.array([0, 1])
    batches = np.random.default_rng(0).integers(0, 2, (100, 8))
    for impl in (_kernels, _kernels._tabular_py):
        impl.sarsa_steps(q, m, v, np.full((2, 1), 1.0), 0.9, sa, np.zeros(2),
                         np.array([1, 0]), batches, 0, 1e-2, 0.9, 0.999, 1e-8)
        assert np.array_equal(q, np.zeros(2))


def test_sarsa_self_loop_fixed_point():
    buf = buffer_of((0, 0, 1.0, 0))
    cfg = TrainConfig(learning_rate=1e-2, epochs=20_000, seed=0)
    q = fit_q_expected_sarsa(buf, np.ones((1, 1)), (1, 1), cfg, gamma=0.9)
    assert q[0, 0] == pytest.approx(10.0, abs=0.1)


def test_sarsa_empty_buffer():
    with pytest.warns(RuntimeWarning):
        q = fit_q_expected_sarsa(ExperienceBuffer(), uniform_policy(2, 2), (2, 2), TrainConfig(seed=1), 0.9)
    assert np.array_equal(q.ravel(), np.random.default_rng(1).standard_normal(4))


def test_sarsa_visited_values_shrink_on_covering_buffer():
    buf = gridworld_buffer(steps=5000, exclude=False)
    visited = visited_mask(buf)
    cfg = TrainConfig(learning_rate=1e-3, epochs=1000, seed=1)
    q0 = np.random.default_rng(1).standard_normal((25, 4))
    q = fit_q_expected_sarsa(buf, uniform_policy(25, 4), (25, 4), cfg, 0.9)
    assert np.abs(q[visited]).mean() < 0.1 * np.abs(q0[visited]).mean()


def test_sarsa_bellman_residual_on_exhaustive_buffer():
    rng = np.random.default_rng(11)
    mdp = random_mdp(rng, 3, 2, gamma=0.8)
    policy = rng.dirichlet(np.ones(2), size=3)
    transitions = [
        Transition(s, a, float(mdp.reward[s, a]), int(t))
        for s in range(3) for a in range(2)
        for t in rng.choice(3, size=20, p=mdp.transition[s, a])
    ]
    buf = ExperienceBuffer(transitions)
    cfg = TrainConfig(learning_rate=1e-4, epochs=200_000, seed=0)
    q = fit_q_expected_sarsa(buf, policy, (3, 2), cfg, mdp.gamma)
    # empirical model of the buffer: expected SARSA's fixed point lives there
    counts = np.zeros((3, 2, 3))
    for t in transitions:
        counts[t.s, t.a, t.s_next] += 1
    empirical = TabularMdp(counts / counts.sum(axis=-1, keepdims=True), mdp.reward, mdp.gamma)
    residual = action_backup(empirical, induce_state_values(q, policy)) - q
    assert np.max(np.abs(residual)) <= 1e-2


# -- ensembles --------------------------------------------------------------


def test_eve_length_and_identical_seed_members():
    buf = gridworld_buffer()
    cfg = TrainConfig(epochs=20, seed=3)
    members = train_eve(buf, uniform_policy(25, 4), (25, 4), cfg, 3, 0.9)
    assert len(members) == 3
    assert not np.array_equal(members[0], members[1])
    again = fit_q_expected_sarsa(buf, uniform_policy(25, 4), (25, 4), TrainConfig(epochs=20, seed=4), 0.9)
    assert np.array_equal(members[1], again)


def test_emve_identical_seed_members():
    buf = gridworld_buffer()
    cfg = TrainConfig(epochs=10, seed=3)
    members = train_emve(buf, (25, 4), cfg, 2)
    assert len(members) == 2
    again = fit_model_mle(buf, (25, 4), TrainConfig(epochs=10, seed=3))
    assert np.array_equal(members[0].transition_logits, again.transition_logits)


def test_ensembles_need_two_members():
    buf = gridworld_buffer()
    with pytest.raises(ContractError):
        train_eve(buf, uniform_policy(25, 4), (25, 4), TrainConfig(epochs=1), 1, 0.9)
    with pytest.raises(ContractError):
        train_emve(buf, (25, 4), TrainConfig(epochs=1), 1)


@pytest.mark.slow
def test_eve_disagrees_more_at_excluded_cell():
    buf = gridworld_buffer()
    members = train_eve(buf, uniform_policy(25, 4), (25, 4), TrainConfig(seed=10), 5, 0.9)
    sigma = eve_stats(members)[1]
    assert sigma[visited_mask(buf)].mean() < sigma[0].mean()


@pytest.mark.slow
def test_emve_disagrees_more_at_excluded_cell():
    buf = gridworld_buffer()
    models = train_emve(buf, (25, 4), TrainConfig(seed=20), 5)
    q = fit_q_expected_sarsa(buf, uniform_policy(25, 4), (25, 4), TrainConfig(seed=30), 0.9)
    v = induce_state_values(q, uniform_policy(25, 4))
    backups = [action_backup(learned_model_to_mdp(m, 0.9), v) for m in models]
    sigma = eve_stats(backups)[1]
    assert sigma[visited_mask(buf)].mean() < sigma[0].mean()


# -- model conversion and CSV -----------------------------------------------


def test_equal_logits_give_uniform_rows():
    model = LearnedTabularModel(np.zeros((3, 2, 3)), np.zeros((3, 2)))
    assert np.allclose(learned_model_to_mdp(model, 0.9).transition, 1 / 3)


def test_softmax_hand_value():
    n = 5
    logits = np.zeros((n, 1, n))
    logits[0, 0, 0] = np.log(2.0)
    mdp = learned_model_to_mdp(LearnedTabularModel(logits, np.zeros((n, 1))), 0.5)
    assert mdp.transition[0, 0, 0] == pytest.approx(2 / (2 + (n - 1)), abs=1e-15)


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 80.0))
def test_learned_model_always_valid(seed, scale):
    rng = np.random.default_rng(seed)
    model = LearnedTabularModel(scale * rng.standard_normal((4, 2, 4)), rng.standard_normal((4, 2)))
    mdp = learned_model_to_mdp(model, 0.9)
    assert np.allclose(mdp.transition.sum(axis=-1), 1.0, atol=1e-12)


def test_params_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    model = LearnedTabularModel(rng.standard_normal((3, 2, 3)), rng.standard_normal((3, 2)))
    text = model_to_csv(model)
    assert text.splitlines()[0] == "name,index,value"
    assert "transition_logits,0:1:2," in text
    back = model_from_csv(text)
    assert np.array_equal(back.transition_logits, model.transition_logits)
    assert np.array_equal(back.reward, model.reward)
    arrays = params_from_csv(params_to_csv({"q": np.arange(6.0).reshape(2, 3)}))
    assert np.array_equal(arrays["q"], np.arange(6.0).reshape(2, 3))


# -- compiled kernel vs numpy fallback ----------------------------------------


def _mle_inputs(seed):
    rng = np.random.default_rng(seed)
    n_rows, n_next, n = 12, 6, 40
    logits = rng.standard_normal((n_rows, n_next))
    reward = rng.standard_normal(n_rows)
    sa = rng.integers(0, n_rows, n)
    r = rng.standard_normal(n)
    s_next = rng.integers(0, n_next, n)
    batches = rng.integers(0, n, (30, 16))
    return logits, reward, sa, r, s_next, batches


@pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled kernel not built")
def test_backends_agree_mle():
    logits, reward, sa, r, s_next, batches = _mle_inputs(0)
    out = []
    for impl in (_kernels, _kernels._tabular_py):
        lg, rw = logits.copy(), reward.copy()
        moments = [np.zeros_like(lg), np.zeros_like(lg), np.zeros_like(rw), np.zeros_like(rw)]
        step = impl.mle_steps(lg, rw, *moments, sa, r, s_next, batches, 0, 1e-2, 0.9, 0.999, 1e-8)
        out.append((lg, rw, step))
    assert out[0][2] == out[1][2] == 30
    assert np.allclose(out[0][0], out[1][0], rtol=0, atol=1e-12)
    assert np.allclose(out[0][1], out[1][1], rtol=0, atol=1e-12)


@pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled kernel not built")
def test_backends_agree_sarsa():
    rng = np.random.default_rng(1)
    q = rng.standard_normal(12)
    policy = rng.dirichlet(np.ones(3), size=4)
    sa, r, s_next = rng.integers(0, 12, 40), rng.standard_normal(40), rng.integers(0, 4, 40)
    batches = rng.integers(0, 40, (30, 16))
    out = []
    for impl in (_kernels, _kernels._tabular_py):
        qq = q.copy()
        impl.sarsa_steps(qq, np.zeros(12), np.zeros(12), policy, 0.9, sa, r, s_next, batches,
                         0, 1e-2, 0.9, 0.999, 1e-8)
        out.append(qq)
    assert np.allclose(out[0], out[1], rtol=0, atol=1e-12)


@pytest.mark.parametrize("impl", [_kernels, _kernels._tabular_py], ids=["selected", "numpy"])
def test_kernel_step_matches_adam_step(impl):
    logits, reward, sa, r, s_next, batches = _mle_inputs(2)
    batch = batches[:1]
    lg, rw = logits.copy(), reward.copy()
    moments = [np.zeros_like(lg), np.zeros_like(lg), np.zeros_like(rw), np.zeros_like(rw)]
    impl.mle_steps(lg, rw, *moments, sa, r, s_next, batch, 0, 1e-2, 0.9, 0.999, 1e-8)
    # oracle gradient of the mean batch loss, then the functional Adam step
    g_logits, g_reward = np.zeros_like(logits), np.zeros_like(reward)
    for i in batch[0]:
        row = logits[sa[i]]
        p = np.exp(row - row.max())
        p /= p.sum()
        p[s_next[i]] -= 1.0
        g_logits[sa[i]] += p / batch.shape[1]
        g_reward[sa[i]] += 2 * (reward[sa[i]] - r[i]) / batch.shape[1]
    cfg = TrainConfig(learning_rate=1e-2)
    want_l, _ = adam_step(logits, g_logits, AdamState.zeros_like(logits), cfg)
    want_r, _ = adam_step(reward, g_reward, AdamState.zeros_like(reward), cfg)
    assert np.allclose(lg, want_l, rtol=0, atol=1e-12)
    assert np.allclose(rw, want_r, rtol=0, atol=1e-12)
