import collections

import equinox as eqx

import jax
import jax.numpy as jnp
import numpy as np
import pytest

from pushforward.envs import (
    EnvConfig,
    LatentRiverSwim,
    LatentRiverSwimSpec,
    RiverSwim,
    RiverSwimSpec,
    latent_action,
    latent_decode,
    latent_encode,
    latent_preimage,
    riverswim_reward,
    riverswim_transition_row,
)
from pushforward.envs.latent_riverswim import decoder_matrix, encoder_table, latent_transitions
from pushforward.envs.mdp import TabularMDP, check_row_stochastic
from pushforward.envs.riverswim import desired_state_weights, riverswim_transitions


def _as_dict(row):
    return {i + 1: pytest.approx(float(p)) for i, p in enumerate(row) if p > 0}


def test_riverswim_transition_rows():
    spec = RiverSwimSpec(6, 0.3, 0.1)
    assert _as_dict(riverswim_transition_row(spec, 3, +1)) == {4: 0.3, 3: 0.6, 2: 0.1}
    assert _as_dict(riverswim_transition_row(spec, 4, -1)) == {3: 1.0}
    assert _as_dict(riverswim_transition_row(spec, 1, -1)) == {1: 1.0}
    assert _as_dict(riverswim_transition_row(spec, 1, +1)) == {2: 0.6, 1: 0.4}
    assert _as_dict(riverswim_transition_row(spec, 6, +1)) == {6: 0.6, 5: 0.4}


def test_riverswim_rejects_bad_arguments():
    spec = RiverSwimSpec(6)
    with pytest.raises(ValueError):
        riverswim_transition_row(spec, 0, +1)
    with pytest.raises(ValueError):
        riverswim_transition_row(spec, 7, -1)
    with pytest.raises(ValueError):
        riverswim_transition_row(spec, 3, 0)
    with pytest.raises(ValueError):
        RiverSwimSpec(6, 0.6, 0.4)
    with pytest.raises(ValueError):
        RiverSwimSpec(2)


@pytest.mark.parametrize("n", [3, 4, 7, 12, 30])
@pytest.mark.parametrize("probs", [(0.3, 0.1), (0.05, 0.9), (0.49, 0.5)])
def test_riverswim_rows_are_stochastic(n, probs):
    rows = riverswim_transitions(RiverSwimSpec(n, *probs))
    assert rows.shape == (n, 2, n)
    assert np.all(rows >= 0)
    np.testing.assert_allclose(rows.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_riverswim_reward():
    spec = RiverSwimSpec(6)
    assert riverswim_reward(spec, 6) == pytest.approx(0.99)
    assert riverswim_reward(spec, 1) == pytest.approx(0.005)
    assert riverswim_reward(spec, 3) == pytest.approx(0.00125)
    for n in (3, 6, 30):
        assert desired_state_weights(n).sum() == pytest.approx(1.0, abs=1e-12)


def test_riverswim_step_left_is_deterministic():
    env = RiverSwim(RiverSwimSpec(6))
    next_state, reward = env.step(3, env.left_action, jax.random.PRNGKey(0))  # state 4 is id 3
    assert int(next_state) == 2
    assert float(reward) == pytest.approx(0.00125)


def test_riverswim_step_matches_transition_row():
    env = RiverSwim(RiverSwimSpec(6, 0.3, 0.1))
    num_steps = 200_000
    keys = jax.random.split(jax.random.PRNGKey(0), num_steps)
    next_states, _ = jax.vmap(lambda k: env.step(2, env.right_action, k))(keys)
    freqs = np.bincount(np.asarray(next_states), minlength=6) / num_steps
    expected = np.asarray(env.transitions[2, env.right_action])
    sigma = np.sqrt(expected * (1 - expected) / num_steps)
    assert np.all(np.abs(freqs - expected) <= 4 * sigma + 1e-12)


def test_latent_encode_and_action():
    spec = LatentRiverSwimSpec(4, mix_alpha=0.5)
    assert latent_encode(spec, (3, 1)) == 2
    assert latent_encode(spec, (1, 1)) == 1
    assert latent_encode(spec, (4, 4)) == 4
    assert latent_action(spec, (0, +1)) == +1
    assert latent_action(spec, (-1, 0)) == -1
    assert latent_action(LatentRiverSwimSpec(4, mix_alpha=0.7), (0, -1)) == -1
    with pytest.raises(ValueError):
        latent_encode(spec, (0, 2))
    with pytest.raises(ValueError):
        latent_action(spec, (1, 1))


def test_latent_preimages():
    spec = LatentRiverSwimSpec(4, mix_alpha=0.5)
    assert latent_preimage(spec, 1) == [(1, 1), (1, 2), (2, 1)]
    assert latent_preimage(spec, 4) == [(4, 4)]
    table = encoder_table(spec)
    assert table.shape == (4, 4)
    assert table[2, 0] == 2


@pytest.mark.parametrize("n", [3, 4, 8, 12])
def test_latent_decode_inverts_encode(n):
    spec = LatentRiverSwimSpec(n)
    for k, key in zip(range(1, n + 1), jax.random.split(jax.random.PRNGKey(0), n)):
        assert latent_encode(spec, latent_decode(spec, k, key)) == k


def test_latent_decode_is_uniform_over_the_preimage():
    spec = LatentRiverSwimSpec(4)
    num_draws = 30_000
    counts = collections.Counter(latent_decode(spec, 1, k) for k in jax.random.split(jax.random.PRNGKey(1), num_draws))
    assert set(counts) == {(1, 1), (1, 2), (2, 1)}
    sigma = np.sqrt((1 / 3) * (2 / 3) / num_draws)
    for obs in counts:
        assert abs(counts[obs] / num_draws - 1 / 3) <= 4 * sigma


def test_latent_spec_rejects_empty_preimage():
    with pytest.raises(ValueError):
        LatentRiverSwimSpec(4, mix_alpha=1.0)
    with pytest.raises(ValueError):
        LatentRiverSwimSpec(4, p_forward=0.7, p_backward=0.5)


@pytest.mark.parametrize("n", [3, 4, 6, 12])
def test_latent_kernel_is_stochastic(n):
    spec = LatentRiverSwimSpec(n)
    transitions = latent_transitions(spec)
    assert transitions.shape == (n * n, 4, n * n)
    np.testing.assert_allclose(transitions.sum(axis=-1), 1.0, rtol=0, atol=1e-12)
    np.testing.assert_allclose(decoder_matrix(spec).sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_latent_step_left_at_the_start_stays_in_latent_one():
    spec = LatentRiverSwimSpec(4)
    env = LatentRiverSwim(spec)
    for key in jax.random.split(jax.random.PRNGKey(0), 50):
        next_state, reward = env.step(env.initial_state, env.left_action, key)
        assert latent_encode(spec, spec.obs_of(int(next_state))) == 1
        assert float(reward) == pytest.approx(0.005)


def test_latent_mdp_rows_match_simulation():
    spec = LatentRiverSwimSpec(4)
    env = LatentRiverSwim(spec)
    mdp = env.as_tabular_mdp(0.9)
    state, action = spec.obs_id((2, 3)), 2
    num_steps = 100_000
    keys = jax.random.split(jax.random.PRNGKey(3), num_steps)
    next_states, _ = jax.vmap(lambda k: env.step(state, action, k))(keys)
    freqs = np.bincount(np.asarray(next_states), minlength=16) / num_steps
    expected = np.asarray(mdp.transitions[state, action])
    sigma = np.sqrt(expected * (1 - expected) / num_steps)
    assert np.all(np.abs(freqs - expected) <= 4 * sigma + 1e-12)


def test_latent_occupancy_matches_riverswim():
    # with the same action sequence, the latent process of Latent RiverSwim is RiverSwim
    n, num_steps, num_chains = 5, 40, 4000
    latent_env = LatentRiverSwim(LatentRiverSwimSpec(n))
    plain_env = RiverSwim(RiverSwimSpec(n))
    latent_actions = jnp.tile(jnp.array([latent_env.right_action] * 3 + [latent_env.left_action]), num_steps // 4)
    plain_actions = jnp.tile(jnp.array([plain_env.right_action] * 3 + [plain_env.left_action]), num_steps // 4)

    def run(env, actions, key):
        def step(state, inputs):
            action, k = inputs
            next_state, _ = env.step(state, action, k)
            return next_state.astype(jnp.int32), next_state

        _, states = jax.lax.scan(step, jnp.int32(env.initial_state), (actions, jax.random.split(key, num_steps)))
        return states[-1]

    keys = jax.random.split(jax.random.PRNGKey(4), 2 * num_chains)
    latent_final = jax.vmap(lambda k: run(latent_env, latent_actions, k))(keys[:num_chains])
    plain_final = jax.vmap(lambda k: run(plain_env, plain_actions, k))(keys[num_chains:])

    latent_hist = np.bincount(np.asarray(latent_env.encode(latent_final)), minlength=n) / num_chains
    plain_hist = np.bincount(np.asarray(plain_final), minlength=n) / num_chains
    # difference of two independent binomial proportions
    p = 0.5 * (latent_hist + plain_hist)
    sigma = np.sqrt(2 * p * (1 - p) / num_chains)
    assert np.all(np.abs(latent_hist - plain_hist) <= 4 * sigma + 1e-12)


def test_env_config_builds_both_envs():
    assert isinstance(EnvConfig(name="riverswim", n=5).build(), RiverSwim)
    env = EnvConfig(name="latent_riverswim", n=4).build()
    assert isinstance(env, LatentRiverSwim)
    assert env.num_states == 16 and env.num_actions == 4
    assert bool(env.is_target(env.spec.obs_id((4, 4))))
    with pytest.raises(ValueError):
        EnvConfig(name="gridworld")


@pytest.mark.parametrize("name, n", [("riverswim", 4), ("latent_riverswim", 3)])
def test_envs_build_inside_jit(name, n):
    config = EnvConfig(name=name, n=n)

    @eqx.filter_jit
    def rows_and_step(key):
        env = config.build()
        mdp = env.as_tabular_mdp(0.9)
        return jnp.sum(mdp.transitions, axis=-1), env.step(env.initial_state, 0, key)

    sums, _ = rows_and_step(jax.random.PRNGKey(0))
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)


def test_row_checks_still_reject_bad_rows():
    with pytest.raises(ValueError):
        check_row_stochastic(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        check_row_stochastic(jnp.array([[1.5, -0.5]]))
    with pytest.raises(ValueError):
        TabularMDP(jnp.full((2, 1, 2), 0.4), jnp.zeros(2), 0.9)


def test_row_check_skips_traced_rows():
    @jax.jit
    def build(rows):
        return TabularMDP(rows, jnp.zeros(2), 0.9).transitions

    np.testing.assert_array_equal(build(jnp.full((2, 1, 2), 0.5)), 0.5)
