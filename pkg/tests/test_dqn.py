import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridnav.dqn import (DqnAgent, DqnConfig, InsufficientBufferError, ReplayBuffer,
                         dqn_loss_and_grads, dqn_update, greedy_policy, push_transition,
                         q_values, sample_minibatch, select_action, sync_target, td_targets,
                         train_dqn)
from gridnav.env import GridWorld, Transition
from gridnav.episode import play_episode
from gridnav.mlp import NeuralNet, forward, init_net
from oracles import central_diff, naive_forward, rel_error


def bias_only_net(n_in, values):
    return NeuralNet([np.zeros((4, n_in))], [np.asarray(values, dtype=float)])


def random_transition(rng, n=6, done=None):
    return Transition(rng.normal(size=n), int(rng.integers(4)), float(rng.normal()),
                      rng.normal(size=n), bool(rng.integers(2)) if done is None else done)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(gamma=1.0), dict(gamma=-0.1), dict(epsilon_end=0.5, epsilon_start=0.2),
                                    dict(batch_size=20, buffer_capacity=10), dict(target_sync_interval=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            DqnConfig(**kw)


class TestQValues:
    def test_bias_only(self):
        agent = DqnAgent(bias_only_net(5, [1, 2, 3, 4]), DqnConfig())
        for x in (np.zeros(5), np.ones(5)):
            assert np.array_equal(q_values(agent, x), [1, 2, 3, 4])

    def test_shape_and_recompute(self, rng):
        agent = DqnAgent.create(100, DqnConfig(), seed=4)
        x = np.zeros(100)
        x[37] = 1.0
        q = q_values(agent, x)
        assert q.shape == (4,) and np.isfinite(q).all()
        ref = naive_forward(agent.online_net.weights, agent.online_net.biases, x)
        np.testing.assert_allclose(q, ref, rtol=0, atol=1e-12)


class TestSelectAction:
    def test_argmax(self, rng):
        agent = DqnAgent(bias_only_net(3, [1, 3, 2, 0]), DqnConfig())
        assert select_action(agent, np.zeros(3), 0.0, rng) == 1

    def test_tie_breaks_low(self, rng):
        agent = DqnAgent(bias_only_net(3, [5, 5, 1, 1]), DqnConfig())
        assert select_action(agent, np.zeros(3), 0.0, rng) == 0

    def test_uniform_when_epsilon_one(self):
        agent = DqnAgent(bias_only_net(3, [9, 0, 0, 0]), DqnConfig())
        rng = np.random.default_rng(0)
        counts = np.bincount([select_action(agent, np.zeros(3), 1.0, rng) for _ in range(100_000)],
                             minlength=4)
        freq = counts / counts.sum()
        assert ((freq >= 0.24) & (freq <= 0.26)).all()

    def test_rejects_bad_epsilon(self, rng):
        agent = DqnAgent(bias_only_net(3, [0, 0, 0, 0]), DqnConfig())
        with pytest.raises(ValueError):
            select_action(agent, np.zeros(3), 1.5, rng)


class TestReplay:
    def test_fifo_eviction(self):
        buf = ReplayBuffer(2)
        for t in "abc":
            push_transition(buf, t)
        assert buf.items() == ["b", "c"]

    def test_sizes(self):
        buf = ReplayBuffer(5)
        push_transition(buf, 1)
        assert len(buf) == 1
        for i in range(4):
            push_transition(buf, i)
        assert len(buf) == 5
        push_transition(buf, 99)
        assert len(buf) == 5

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 100))
    def test_fifo_by_sequence_tags(self, capacity, n_push):
        buf = ReplayBuffer(capacity)
        for tag in range(n_push):
            buf.push(tag)
            assert len(buf) <= capacity
        assert buf.items() == list(range(max(0, n_push - capacity), n_push))

    def test_single_item_sample(self, rng):
        buf = ReplayBuffer(4)
        buf.push("only")
        assert sample_minibatch(buf, 1, rng) == ["only"]

    def test_insufficient(self, rng):
        buf = ReplayBuffer(10)
        for i in range(3):
            buf.push(i)
        with pytest.raises(InsufficientBufferError):
            sample_minibatch(buf, 4, rng)


    def test_uniform_goodness_of_fit(self):
        buf = ReplayBuffer(1000)
        for i in range(1000):
            buf.push(i)
        rng = np.random.default_rng(0)
        draws = [sample_minibatch(buf, 1, rng)[0] for _ in range(100_000)]
        counts = np.bincount(draws, minlength=1000)
        chi2 = ((counts - 100.0) ** 2 / 100.0).sum()
        # Wilson-Hilferty upper 0.1% point of chi-square with 999 dof
        df, z = 999, 3.0902
        crit = df * (1 - 2 / (9 * df) + z * (2 / (9 * df)) ** 0.5) ** 3
        assert chi2 < crit


class TestTargets:
    def test_terminal(self):
        t = Transition(np.zeros(3), 0, 5.0, np.zeros(3), True)
        assert td_targets([t], bias_only_net(3, [100, 100, 100, 100]), 0.95)[0] == 5.0

    def test_gamma_zero(self):
        t = Transition(np.zeros(3), 0, -1.0, np.zeros(3), False)
        assert td_targets([t], bias_only_net(3, [7, 8, 9, 10]), 0.0)[0] == -1.0

    def test_bootstrap(self):
        t = Transition(np.zeros(3), 0, -1.0, np.zeros(3), False)
        y = td_targets([t], bias_only_net(3, [2.0, 1.0, 0.5, 1.5]), 0.95)[0]
        assert abs(y - 0.9) < 1e-12

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            td_targets([], bias_only_net(3, [0, 0, 0, 0]), 0.9)


class TestUpdate:
    def test_zero_loss_when_fitted(self):
        # online Q(s, .) = 0.9 everywhere; target yields y = -1 + 0.95 * 2 = 0.9
        online = bias_only_net(3, [0.9] * 4)
        agent = DqnAgent(online, DqnConfig(batch_size=2, buffer_capacity=10),
                         bias_only_net(3, [2.0, 1.0, 0.5, 1.5]))
        batch = [Transition(np.ones(3), a, -1.0, np.ones(3), False) for a in (0, 3)]
        loss, grads = dqn_loss_and_grads(agent.online_net, agent.target_net, batch, 0.95)
        assert loss == pytest.approx(0.0, abs=1e-24)
        assert np.abs(grads.flat()).max() < 1e-12

    def test_single_transition_loss(self):
        online = bias_only_net(3, [0.4, 0, 0, 0])
        target = bias_only_net(3, [2.0, 1.0, 0.5, 1.5])
        batch = [Transition(np.ones(3), 0, -1.0, np.ones(3), False)]
        loss, _ = dqn_loss_and_grads(online, target, batch, 0.95)
        assert abs(loss - 0.25) < 1e-12

    def test_gradient_matches_finite_differences(self, rng):
        online, target = init_net([6, 8, 4], 1), init_net([6, 8, 4], 2)
        batch = [random_transition(rng) for _ in range(5)]
        loss, grads = dqn_loss_and_grads(online, target, batch, 0.9)
        params, g = list(online.params()), list(grads.params())
        fd = central_diff(lambda: dqn_loss_and_grads(online, target, batch, 0.9)[0], params)
        assert max(rel_error(g[k].reshape(-1)[i], n) for k, i, n in fd) < 1e-5

    def test_only_taken_actions_get_gradient(self, rng):
        online, target = NeuralNet([rng.normal(size=(4, 6))], [np.zeros(4)]), init_net([6, 4], 0)
        batch = [Transition(rng.normal(size=6), 2, 1.0, rng.normal(size=6), False)]
        _, grads = dqn_loss_and_grads(online, target, batch, 0.9)
        assert (grads.weights[0][[0, 1, 3]] == 0).all() and (grads.weights[0][2] != 0).any()

    def test_target_perturbation_changes_loss_not_gradient_form(self, rng):
        online, target = init_net([6, 8, 4], 1), init_net([6, 8, 4], 2)
        batch = [random_transition(rng, done=False) for _ in range(4)]
        loss_a, g_a = dqn_loss_and_grads(online, target, batch, 0.9)
        bumped = target.copy()
        bumped.biases[-1] += 1.0
        loss_b, g_b = dqn_loss_and_grads(online, bumped, batch, 0.9)
        assert loss_a != loss_b
        # same gradient as a plain regression onto the (constant) targets
        y = td_targets(batch, bumped, 0.9)
        q, cache = forward(online, np.stack([t.state for t in batch]))
        dq = np.zeros_like(q)
        rows, acts = np.arange(4), [t.action for t in batch]
        dq[rows, acts] = 2 * (q[rows, acts] - y) / 4
        from gridnav.mlp import backward
        np.testing.assert_allclose(g_b.flat(), backward(online, cache, dq).flat(), atol=1e-14)

    def test_update_counts_and_syncs(self, rng):
        cfg = DqnConfig(batch_size=4, buffer_capacity=16, target_sync_interval=3, lr=1e-2)
        agent = DqnAgent(init_net([6, 8, 4], 0), cfg)
        target_before = agent.target_net.copy()
        for step_no in range(1, 7):
            dqn_update(agent, [random_transition(rng) for _ in range(4)])
            assert agent.gradient_steps == step_no
            if step_no % 3 == 0:
                assert agent.target_net.equals(agent.online_net)
            elif step_no < 3:
                assert agent.target_net.equals(target_before)
                assert not agent.online_net.equals(agent.target_net)

    def test_update_rejects_wrong_batch_size(self, rng):
        agent = DqnAgent(init_net([6, 4], 0), DqnConfig(batch_size=4, buffer_capacity=8))
        with pytest.raises(ValueError):
            dqn_update(agent, [random_transition(rng)])


class TestSync:
    def test_sync_makes_equal(self, rng):
        agent = DqnAgent(init_net([6, 8, 4], 0), DqnConfig(batch_size=2, buffer_capacity=4), init_net([6, 8, 4], 1))
        sync_target(agent)
        x = rng.normal(size=6)
        assert np.array_equal(forward(agent.target_net, x)[0], forward(agent.online_net, x)[0])
        sync_target(agent)
        assert agent.target_net.equals(agent.online_net)
        dqn_update(agent, [random_transition(rng) for _ in range(2)])
        assert not agent.target_net.equals(agent.online_net)

    def test_target_is_a_copy(self):
        agent = DqnAgent(init_net([6, 4], 0), DqnConfig())
        assert agent.target_net is not agent.online_net
        assert agent.target_net.weights[0] is not agent.online_net.weights[0]


class TestTrain:
    def test_single_episode_cap(self):
        w = GridWorld(2, 2, (0, 0), (1, 1), max_steps=50)
        recs = train_dqn(DqnAgent.create(4, DqnConfig(batch_size=8, learn_start=8), 0), w, 1, seed=0)
        assert len(recs) == 1 and recs[0].steps <= 50

    def test_deterministic(self):
        w = GridWorld(4, 4, (0, 0), (3, 3), max_steps=40)
        cfg = DqnConfig(batch_size=8, learn_start=16, epsilon_decay_episodes=10)
        runs = [train_dqn(DqnAgent.create(16, cfg, 3), w, 15, seed=11) for _ in range(2)]
        assert runs[0] == runs[1]

    def test_records_are_consistent(self):
        w = GridWorld(4, 4, (0, 0), (3, 3), {(1, 1)}, max_steps=30)
        recs = train_dqn(DqnAgent.create(16, DqnConfig(batch_size=8, learn_start=8), 0), w, 10, seed=2)
        for r in recs:
            r.validate()
            assert r.path[0] == w.start
            assert r.reached_goal == (r.path[-1] == w.goal)

    @pytest.mark.slow
    def test_converges_on_empty_4x4(self, empty4):
        agent = DqnAgent.create(16, DqnConfig(), seed=0)
        train_dqn(agent, empty4, 500, seed=1)
        rec = play_episode(empty4, greedy_policy(agent, empty4))
        assert rec.reached_goal and rec.steps == 6
