"""The training loop: collect, fit the world model, roll out, update.

One logical loop per run; every stochastic consumer owns a named stream
from the run seed, so the metric series are a pure function of (config,
seed) regardless of how the work is scheduled internally.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from ..agent import SacAgent
from ..buffers import (
    Batch,
    ReplayStore,
    RolloutStats,
    generate_rollouts,
    refresh_model_store,
    sample_mixed_batch,
)
from ..envs import make
from ..numkit import NonFiniteGradient
from ..worldmodel import GaussianEnsemble, ImleEnsemble, make_targets
from .config import ExperimentConfig
from .metrics import MetricSeries
from .rngs import RngPool


@dataclass(frozen=True)
class RunResult:
    config: ExperimentConfig
    series: list[MetricSeries]
    model_path: str | None = None
    agent_path: str | None = None


def _build_model(config: ExperimentConfig, state_dim: int, action_dim: int,
                 rngs):
    if config.model == "imle":
        return ImleEnsemble(state_dim, action_dim, k=config.members,
                            latent_dim=config.latent_dim,
                            hidden=config.model_hidden,
                            blocks=config.model_blocks,
                            lr=config.model_lr, rngs=rngs)
    if config.model == "gaussian":
        return GaussianEnsemble(state_dim, action_dim, k=config.members,
                                hidden=config.model_hidden,
                                blocks=config.model_blocks,
                                lr=config.model_lr, rngs=rngs)
    return None


def _train_model_cycle(model, env_store: ReplayStore,
                       config: ExperimentConfig) -> float:
    data = env_store.contents()
    targets = make_targets(data.rewards, data.next_states)
    if isinstance(model, ImleEnsemble):
        traces = model.train_ensemble(data.states, data.actions, targets,
                                      updates=config.model_updates,
                                      m=config.candidates,
                                      batch_size=config.model_batch)
    else:
        traces = model.train_ensemble(data.states, data.actions, targets,
                                      updates=config.model_updates,
                                      batch_size=config.model_batch)
    return float(np.mean(traces))


def _evaluate(env, agent: SacAgent, episodes: int) -> float:
    returns = []
    for _ in range(episodes):
        state = env.reset()
        total = 0.0
        while True:
            action = agent.select_action(state, deterministic=True)
            res = env.step(action)
            total += res.reward
            state = res.state
            if res.terminal or res.truncated:
                break
        returns.append(total)
    return float(np.mean(returns))


def run_experiment(config: ExperimentConfig,
                   out_dir: str | None = None) -> RunResult:
    """Execute one seed of the configured experiment.

    Warm-up collects uniform-random transitions without any updates.  After
    warm-up, every train_freq-th step refits the world model on the full
    env store and refreshes the synthetic store with fresh rollouts; every
    step runs updates_per_step agent updates on mixed batches.  Aborts
    with a diagnostic if any update produces a non-finite loss.
    """
    pool = RngPool(config.seed)
    env = make(config.env, pool.stream("env"))
    eval_env = make(config.env, pool.stream("eval_env"))
    spec = env.spec
    horizon = config.resolved_horizon()

    agent = SacAgent(spec.state_dim, spec.action_dim,
                     spec.action_low, spec.action_high,
                     n_quantiles=config.quantiles, gamma=0.99,
                     actor_lr=config.actor_lr, critic_lr=config.critic_lr,
                     alpha_lr=config.alpha_lr,
                     weight_actor=config.weight_actor,
                     rng=pool.stream("agent"))
    model = _build_model(config, spec.state_dim, spec.action_dim,
                         pool.member_streams("model_members", config.members))
    env_store = ReplayStore(config.steps, spec.state_dim, spec.action_dim)
    model_store = ReplayStore(config.rollouts * horizon,
                              spec.state_dim, spec.action_dim)

    warmup_rng = pool.stream("warmup_actions")
    batch_rng = pool.stream("batches")
    rollout_rng = pool.stream("rollouts")

    series: dict[str, MetricSeries] = {}

    def record(name: str, step: int, value: float) -> None:
        if name not in series:
            series[name] = MetricSeries(name, config.seed)
        series[name].append(step, value)

    state = env.reset()
    try:
        for step in range(1, config.steps + 1):
            if step <= config.warmup:
                action = warmup_rng.uniform(spec.action_low, spec.action_high,
                                            size=spec.action_dim)
            else:
                action = agent.select_action(state)
            res = env.step(action)
            # time-limit truncation bootstraps through, so done stays false
            env_store.add(state, action, res.reward, res.state,
                          res.terminal, 1.0)
            state = env.reset() if (res.terminal or res.truncated) else res.state

            if step > config.warmup:
                if model is not None and step % config.train_freq == 0:
                    loss = _train_model_cycle(model, env_store, config)
                    record("model_loss", step, loss)
                    rollouts, stats = generate_rollouts(
                        model, agent.policy, env_store, horizon,
                        config.rollouts, config.candidates, rollout_rng)
                    if config.force_zero_sigma:
                        rollouts = replace(rollouts,
                                           weights=np.ones(len(rollouts)))
                        depth = np.ones(horizon)
                        stats = RolloutStats(depth, 0.0 * depth,
                                             0.0 * depth, 0.0 * depth)
                    refresh_model_store(model_store, rollouts)
                    for t in range(horizon):
                        record(f"weight_depth_{t + 1}", step,
                               stats.weight_mean[t])
                    record("sigma_mean", step, float(stats.sigma_mean.mean()))
                    record("epistemic_mean", step,
                           float(stats.epistemic_mean.mean()))
                    record("aleatoric_mean", step,
                           float(stats.aleatoric_mean.mean()))
                for _ in range(config.updates_per_step):
                    batch = sample_mixed_batch(env_store, model_store,
                                               config.agent_batch,
                                               config.real_fraction, batch_rng)
                    weights = (batch.weights if config.weighting
                               else np.ones(len(batch)))
                    agent.update(batch.states, batch.actions, batch.rewards,
                                 batch.next_states, batch.dones, weights)

            if step % config.eval_interval == 0:
                record("eval_return", step,
                       _evaluate(eval_env, agent, config.eval_episodes))
    except NonFiniteGradient as exc:
        raise RuntimeError(
            f"run aborted at env step {step}: {exc}") from exc

    model_path = agent_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        agent_path = os.path.join(out_dir, "agent_final.npz")
        agent.save(agent_path)
        if model is not None:
            model_path = os.path.join(out_dir, "model_final.npz")
            model.save(model_path)
    return RunResult(config, list(series.values()), model_path, agent_path)


def run_many(config: ExperimentConfig, seeds: list[int],
             out_dir: str | None = None) -> list[RunResult]:
    """One run per seed, sequentially, with per-seed checkpoint dirs."""
    results = []
    for seed in seeds:
        sub = None if out_dir is None else os.path.join(out_dir, f"seed_{seed}")
        results.append(run_experiment(replace(config, seed=seed), sub))
    return results
