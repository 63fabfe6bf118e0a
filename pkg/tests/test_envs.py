"""Environment dynamics against closed-form and independent-integrator oracles."""

import numpy as np
import pytest
from scipy import stats

from imle_mbrl.envs import (
    BimodalForkEnv,
    EnvSpec,
    PendulumEnv,
    REGISTRY,
    StepResult,
    make,
)


class TestSpecTypes:
    def test_envspec_validation(self):
        with pytest.raises(ValueError):
            EnvSpec("x", state_dim=0, action_dim=1,
                    action_low=-1, action_high=1, episode_len=10)
        with pytest.raises(ValueError):
            EnvSpec("x", state_dim=1, action_dim=1,
                    action_low=1.0, action_high=-1.0, episode_len=10)
        with pytest.raises(ValueError):
            EnvSpec("x", state_dim=1, action_dim=1,
                    action_low=0.0, action_high=np.inf, episode_len=10)

    def test_stepresult_validation(self):
        with pytest.raises(ValueError):
            StepResult(np.array([np.nan]), 0.0, False, False)
        with pytest.raises(ValueError):
            StepResult(np.array([0.0]), 0.0, True, True)


class TestPendulum:
    def test_upright_equilibrium_is_fixed_point_with_zero_reward(self):
        env = PendulumEnv()
        state = np.array([1.0, 0.0, 0.0])
        nxt, reward = env.transition(state, 0.0)
        np.testing.assert_allclose(nxt, state, atol=1e-15)
        assert reward == 0.0

    def test_hanging_equilibrium_is_fixed_point_with_reward_minus_pi_sq(self):
        env = PendulumEnv()
        state = np.array([np.cos(np.pi), np.sin(np.pi), 0.0])
        nxt, reward = env.transition(state, 0.0)
        np.testing.assert_allclose(nxt, state, atol=1e-12)
        np.testing.assert_allclose(reward, -np.pi ** 2, rtol=1e-12)

    def test_reward_nonpositive_and_zero_only_upright(self):
        env = PendulumEnv()
        rng = np.random.default_rng(0)
        for _ in range(200):
            th = rng.uniform(-np.pi, np.pi)
            thd = rng.uniform(-8, 8)
            tau = rng.uniform(-2, 2)
            _, r = env.transition(np.array([np.cos(th), np.sin(th), thd]), tau)
            assert r <= 0.0
            if abs(th) > 1e-3 or abs(thd) > 1e-3 or abs(tau) > 1e-3:
                assert r < 0.0

    def test_torque_clipped_to_bounds(self):
        env = PendulumEnv()
        state = np.array([np.cos(1.0), np.sin(1.0), 0.5])
        big = env.transition(state, 10.0)
        capped = env.transition(state, 2.0)
        np.testing.assert_array_equal(big[0], capped[0])
        assert big[1] == capped[1]

    def test_speed_clamped_along_rollout(self):
        env = PendulumEnv(np.random.default_rng(1))
        env.reset()
        for _ in range(300):
            res = env.step(np.array([2.0]))
            assert abs(res.state[2]) <= 8.0
            if res.truncated:
                env.reset()

    def test_manifold_preserved_and_validated(self):
        env = PendulumEnv(np.random.default_rng(2))
        s = env.reset()
        for _ in range(50):
            res = env.step(np.array([env._rng.uniform(-2, 2)]))
            s = res.state
            assert abs(s[0] ** 2 + s[1] ** 2 - 1.0) < 1e-12
        with pytest.raises(ValueError):
            env.transition(np.array([1.0, 1.0, 0.0]), 0.0)

    def test_truncates_at_episode_len_never_terminal(self):
        env = PendulumEnv(np.random.default_rng(3))
        env.reset()
        for i in range(1, 201):
            res = env.step(np.array([0.0]))
            assert not res.terminal
            assert res.truncated == (i == 200)

    def test_free_swing_tracks_rk4_integrator(self):
        # dt=0.05 symplectic Euler drifts from the true flow once the swing
        # speeds up, so the tight tolerance applies to the early slow segment
        # and a loose envelope covers the full rollout; a sign or constant
        # error breaks both within a few steps
        env = PendulumEnv()
        a = 3.0 * env.G / (2.0 * env.LENGTH)

        def deriv(y):
            return np.array([y[1], a * np.sin(y[0])])

        y = np.array([0.1, 0.0])
        state = np.array([np.cos(0.1), np.sin(0.1), 0.0])
        dev = []
        for _ in range(50):
            state, _ = env.transition(state, 0.0)
            k1 = deriv(y)
            k2 = deriv(y + 0.025 * k1)
            k3 = deriv(y + 0.025 * k2)
            k4 = deriv(y + 0.05 * k3)
            y = y + 0.05 / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            y[1] = np.clip(y[1], -8.0, 8.0)
            ref = np.array([np.cos(y[0]), np.sin(y[0]), y[1]])
            dev.append(np.max(np.abs(state - ref)))
        assert max(dev[:4]) < 1e-2
        assert max(dev) < 0.25

    def test_reset_seed_deterministic_and_on_manifold(self):
        env = PendulumEnv()
        s1 = env.reset(seed=7)
        s2 = env.reset(seed=7)
        np.testing.assert_array_equal(s1, s2)
        assert abs(s1[0] ** 2 + s1[1] ** 2 - 1.0) < 1e-12
        assert -1.0 <= s1[2] <= 1.0

    def test_reset_angle_uniformity(self):
        env = PendulumEnv(np.random.default_rng(8))
        angles = np.array([env.state_angle(env.reset()) for _ in range(10_000)])
        counts, _ = np.histogram(angles, bins=10, range=(-np.pi, np.pi))
        assert stats.chisquare(counts).pvalue > 0.01


class TestBimodalFork:
    def force_state(self, env, s):
        env._s = s
        return env

    def test_two_point_support_and_balance(self):
        env = BimodalForkEnv(np.random.default_rng(10))
        draws = []
        for _ in range(1000):
            self.force_state(env, 0.0)
            draws.append(env.step(np.array([0.0])).state[0])
        draws = np.array(draws)
        assert set(np.unique(draws)) == {-0.5, 0.5}
        assert abs(np.mean(draws > 0) - 0.5) < 0.03

    def test_conditional_mean_is_the_unvisited_midpoint(self):
        env = BimodalForkEnv(np.random.default_rng(11))
        draws = []
        for _ in range(2000):
            self.force_state(env, 0.0)
            draws.append(env.step(np.array([0.0])).state[0])
        draws = np.array(draws)
        assert abs(draws.mean()) < 0.05
        assert not np.any(draws == 0.0)

    def test_clip_at_boundary(self):
        env = BimodalForkEnv(np.random.default_rng(12))
        seen = set()
        for _ in range(100):
            self.force_state(env, 2.0)
            seen.add(env.step(np.array([1.0])).state[0])
        assert seen == {1.6, 2.0}  # upper branch clipped to the bound

    def test_mode_locations_interior_and_clipped(self):
        env = BimodalForkEnv()
        np.testing.assert_allclose(
            env.mode_locations(np.array([0.3]), np.array([-1.0])), [-0.3, 0.7],
            rtol=1e-15)
        np.testing.assert_array_equal(
            env.mode_locations(np.array([2.0]), np.array([1.0])), [1.6, 2.0])

    def test_step_lands_on_an_exported_mode(self):
        env = BimodalForkEnv(np.random.default_rng(13))
        s = env.reset()
        for _ in range(100):
            a = np.array([env._rng.uniform(-1, 1)])
            modes = env.mode_locations(s, a)
            res = env.step(a)
            assert res.state[0] in modes
            s = res.state

    def test_reward_is_negative_abs_next_state(self):
        env = BimodalForkEnv(np.random.default_rng(14))
        env.reset()
        for _ in range(50):
            res = env.step(np.array([0.3]))
            assert res.reward == -abs(res.state[0])

    def test_truncates_at_episode_len(self):
        env = BimodalForkEnv(np.random.default_rng(15))
        env.reset()
        for i in range(1, 101):
            res = env.step(np.array([0.0]))
            assert not res.terminal
            assert res.truncated == (i == 100)

    def test_reset_range_and_determinism(self):
        env = BimodalForkEnv()
        s1 = env.reset(seed=9)
        assert -1.0 <= s1[0] <= 1.0
        np.testing.assert_array_equal(s1, env.reset(seed=9))


class TestRegistry:
    def test_names_and_types(self):
        assert sorted(REGISTRY) == ["bimodal-fork", "pendulum"]
        assert isinstance(make("pendulum"), PendulumEnv)
        assert isinstance(make("bimodal-fork"), BimodalForkEnv)

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown environment"):
            make("cartpole")

    def test_injected_rng_reproduces_trajectories(self):
        def rollout():
            env = make("pendulum", np.random.default_rng(42))
            s = env.reset()
            out = [s]
            for i in range(20):
                out.append(env.step(np.array([np.sin(i)])).state)
            return np.array(out)

        np.testing.assert_array_equal(rollout(), rollout())
