"""Tabular policy-gradient training loops over the weighted replay buffer.

Four slot-selection modes share one update rule (bias-corrected replay
gradient, plain gradient ascent on the logits):

``adaptive``
    Interleaved loop: each policy update samples under the learned FTRL
    distribution, feeds the realized squared-gradient losses back into the
    accumulators, resets them every ``reset_period`` updates, then collects a
    fresh episode that overwrites a victim slot drawn from the complement
    distribution.
``adaptive_epoch``
    Epoch variant: collect one episode, zero the accumulators, then run a
    fixed number of updates before the next collection.  The per-episode
    update count must stay below ``buffer_capacity / batch_size``.
``uniform``
    The same interleaved loop with the uniform-mixing coefficient forced to
    1, which fixes the sampling distribution to uniform throughout.
``td_priority``
    Proportional prioritization by summed absolute one-step TD errors under
    a tabular value function learned alongside, with the standard 0.6
    exponent; the same inverse-probability correction keeps the gradient
    unbiased.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .envs import TabularEnv
from .gradients import (
    empirical_gradient_variance,
    gradient_sample,
    ratio_cap_activations,
    replay_gradient,
)
from .policies import TabularSoftmaxPolicy
from .sampler import SamplerConfig, SamplerState
from .store import NotReadyError, Trajectory, WeightedStore

MODES = ("uniform", "td_priority", "adaptive", "adaptive_epoch")


@dataclass
class TrainingConfig:
    total_steps: int
    batch_size: int
    buffer_capacity: int
    learning_rate: float = 0.05
    selection_mode: str = "adaptive"
    seed: int = 0
    warmup_episodes: int | None = None
    updates_per_episode: int = 1
    sampler: SamplerConfig | None = None
    eval_every: int = 100
    eval_episodes: int = 20
    probe_every: int = 0
    probe_repeats: int = 200
    ratio_log_cap: float = 50.0
    td_priority_exponent: float = 0.6

    def __post_init__(self) -> None:
        if self.selection_mode not in MODES:
            raise ValueError(f"selection_mode must be one of {MODES}, got {self.selection_mode!r}")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not 1 <= self.batch_size <= self.buffer_capacity:
            raise ValueError("batch_size must lie in [1, buffer_capacity]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.updates_per_episode < 1 and self.selection_mode != "adaptive_epoch":
            raise ValueError("updates_per_episode must be >= 1")
        if self.updates_per_episode < 0:
            raise ValueError("updates_per_episode must be >= 0")
        if self.selection_mode == "adaptive_epoch" and (
            self.updates_per_episode >= self.buffer_capacity / self.batch_size
        ):
            raise ValueError(
                "adaptive_epoch requires updates_per_episode < buffer_capacity / batch_size"
            )
        if self.warmup_episodes is not None and self.warmup_episodes < self.buffer_capacity:
            raise ValueError("warmup must fill the buffer: warmup_episodes >= buffer_capacity")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.probe_every and self.probe_every % self.eval_every != 0:
            raise ValueError("probe_every must be a multiple of eval_every")
        if self.sampler is not None and self.sampler.capacity != self.buffer_capacity:
            raise ValueError("sampler capacity must match buffer_capacity")

    def resolved_sampler(self) -> SamplerConfig:
        base = self.sampler or SamplerConfig(capacity=self.buffer_capacity)
        if self.selection_mode == "uniform":
            return replace(base, kappa=1.0)
        return base

    def hash(self, env_name: str) -> str:
        payload = {"env": env_name, **{k: _jsonable(v) for k, v in self.__dict__.items()}}
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
        return digest.hexdigest()[:12]


def _jsonable(value):
    if isinstance(value, SamplerConfig):
        return value.__dict__
    return value


@dataclass
class TrainingTrace:
    """Evaluation-point series for one training run."""

    seed: int
    mode: str
    env_name: str
    config_hash: str
    steps: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    returns: np.ndarray = field(default_factory=lambda: np.empty(0))
    probes: np.ndarray = field(default_factory=lambda: np.empty(0))
    probes_uniform: np.ndarray = field(default_factory=lambda: np.empty(0))
    entropies: np.ndarray = field(default_factory=lambda: np.empty(0))
    reset_counts: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    ratio_cap_hits: int = 0

    @property
    def final_return(self) -> float:
        return float(self.returns[-1])

    def probe_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(own-distribution, uniform) variance probe pairs, probes-only rows.

        Both sides of each pair are measured on the same frozen policy and
        buffer with a shared random stream, so they differ only through the
        sampling distribution.
        """
        mask = ~np.isnan(self.probes)
        return self.probes[mask], self.probes_uniform[mask]


class _AccumulatorStrategy:
    """FTRL accumulators drive both sampling scores and eviction; used by the
    adaptive modes and (with full uniform mixing) the uniform baseline."""

    def __init__(
        self,
        sampler: SamplerState,
        store: WeightedStore,
        periodic_reset: bool,
    ):
        self.sampler = sampler
        self.store = store
        self.periodic_reset = periodic_reset

    def distribution(self) -> np.ndarray:
        return self.sampler.distribution()

    def sample(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        return self.store.sample_indices(self.sampler, batch, rng)

    def after_update(self, unique_slots, samples, p_used) -> bool:
        d = {int(i): samples[int(i)].d for i in unique_slots}
        self.sampler.record_feedback(unique_slots, d, p_used)
        self.store.update_scores(self.sampler, unique_slots)
        if self.periodic_reset and self.sampler.maybe_reset():
            self.store.rebuild_index(self.sampler)
            return True
        return False

    def on_insert(self, slot: int, traj: Trajectory) -> None:
        pass

    def epoch_reset(self) -> None:
        self.sampler.w[:] = 0.0
        self.store.rebuild_index(self.sampler)


class _TDPriorityStrategy:
    """Proportional prioritization by summed |one-step TD error| per trajectory."""

    def __init__(
        self,
        sampler: SamplerState,
        store: WeightedStore,
        env: TabularEnv,
        learning_rate: float,
        exponent: float,
    ):
        self.sampler = sampler
        self.store = store
        self.env = env
        self.values = np.zeros(env.n_states)
        self.priorities = np.zeros(store.capacity)
        self.learning_rate = learning_rate
        self.exponent = exponent
        self.eps = 1e-6

    def _scores(self, slots: np.ndarray) -> np.ndarray:
        return (self.priorities[slots] + self.eps) ** self.exponent

    def distribution(self) -> np.ndarray:
        scores = (self.priorities + self.eps) ** self.exponent
        return scores / scores.sum()

    def sample(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        return self.store.sample_mixture(0.0, batch, rng)

    def _sweep(self, traj: Trajectory, learn: bool) -> float:
        total = 0.0
        gamma = self.env.gamma
        for t in range(len(traj)):
            s = int(traj.states[t])
            s_next = int(traj.next_states[t])
            bootstrap = 0.0 if self.env.terminal[s_next] else self.values[s_next]
            delta = traj.rewards[t] + gamma * bootstrap - self.values[s]
            if learn:
                self.values[s] += self.learning_rate * delta
            total += abs(delta)
        return total

    def after_update(self, unique_slots, samples, p_used) -> bool:
        slots = np.asarray(list(unique_slots), dtype=np.int64)
        for i in slots:
            self.priorities[i] = self._sweep(self.store.slots[int(i)], learn=True)
        self.store.set_scores(slots, self._scores(slots))
        return False

    def on_insert(self, slot: int, traj: Trajectory) -> None:
        self.priorities[slot] = self._sweep(traj, learn=False)
        self.store.set_scores(np.array([slot]), self._scores(np.array([slot])))

    def epoch_reset(self) -> None:
        raise NotImplementedError("td_priority has no epoch variant")


def _make_strategy(config: TrainingConfig, sampler, store, env):
    mode = config.selection_mode
    if mode == "td_priority":
        return _TDPriorityStrategy(
            sampler, store, env, config.learning_rate, config.td_priority_exponent
        )
    return _AccumulatorStrategy(sampler, store, periodic_reset=(mode != "adaptive_epoch"))


def run_training(env: TabularEnv, config: TrainingConfig) -> TrainingTrace:
    """Train a tabular softmax policy on ``env`` under the configured mode."""
    root = np.random.SeedSequence(config.seed)
    train_ss, eval_ss, probe_ss = root.spawn(3)
    rng = np.random.default_rng(train_ss)
    eval_rng = np.random.default_rng(eval_ss)
    probe_rng = np.random.default_rng(probe_ss)

    policy = TabularSoftmaxPolicy(env.n_states, env.n_actions)
    store = WeightedStore(config.buffer_capacity)
    sampler = SamplerState(config.resolved_sampler())
    strategy = _make_strategy(config, sampler, store, env)

    trace = TrainingTrace(
        seed=config.seed,
        mode=config.selection_mode,
        env_name=env.name,
        config_hash=config.hash(env.name),
    )
    state = _LoopState(env, config, policy, store, sampler, strategy, rng, eval_rng, probe_rng, trace)

    warmup = config.warmup_episodes or config.buffer_capacity
    for _ in range(warmup):
        state.collect_episode(policy_tag=0)
    if not store.warmed_up:
        raise NotReadyError("warm-up did not fill the buffer")

    cap_hits_before = ratio_cap_activations()
    if config.selection_mode == "adaptive_epoch":
        _epoch_loop(state)
    else:
        _interleaved_loop(state)
    state.flush_rows()
    trace.ratio_cap_hits = ratio_cap_activations() - cap_hits_before
    return _finalize(trace)


class _LoopState:
    def __init__(self, env, config, policy, store, sampler, strategy, rng, eval_rng, probe_rng, trace):
        self.env = env
        self.config = config
        self.policy = policy
        self.store = store
        self.sampler = sampler
        self.strategy = strategy
        self.rng = rng
        self.eval_rng = eval_rng
        self.probe_rng = probe_rng
        self.trace = trace
        self.env_steps = 0
        self.reset_count = 0
        self._rows: list[tuple] = []

    def collect_episode(self, policy_tag: int) -> None:
        traj = self.env.rollout(self.policy, self.rng, policy_tag=policy_tag)
        self.env_steps += len(traj)
        p = self.strategy.distribution() if self.store.warmed_up else None
        slot = self.store.insert(traj, self.sampler, self.rng, p=p)
        self.strategy.on_insert(slot, traj)

    def update_policy(self) -> None:
        cfg = self.config
        p = self.strategy.distribution()
        indices = self.strategy.sample(cfg.batch_size, self.rng)
        unique = np.unique(indices)
        samples = {
            int(i): gradient_sample(
                int(i), self.store.slots[int(i)], self.policy, self.env.gamma,
                log_cap=cfg.ratio_log_cap,
            )
            for i in unique
        }
        batch = [samples[int(i)] for i in indices]
        grad = replay_gradient(batch, p)
        self.policy.set_params(self.policy.get_params() + cfg.learning_rate * grad)
        if self.strategy.after_update(unique, samples, p):
            self.reset_count += 1

    def record_eval(self, update_index: int) -> None:
        cfg = self.config
        test_return = self.env.evaluate(self.policy, cfg.eval_episodes, self.eval_rng)
        probe = probe_uniform = np.nan
        if cfg.probe_every and update_index % cfg.probe_every == 0:
            # Paired probe: identical frozen state and probe stream, only the
            # sampling distribution differs.
            seed = self.probe_rng.integers(2**63)
            uniform_p = np.full(self.store.capacity, 1.0 / self.store.capacity)
            probe, probe_uniform = (
                empirical_gradient_variance(
                    self.store,
                    self.sampler,
                    self.policy,
                    self.env.gamma,
                    cfg.batch_size,
                    cfg.probe_repeats,
                    np.random.default_rng(seed),
                    p=p_choice,
                )
                for p_choice in (self.strategy.distribution(), uniform_p)
            )
        p = self.strategy.distribution()
        entropy = float(-(p * np.log(p)).sum())
        self._rows.append(
            (self.env_steps, test_return, probe, probe_uniform, entropy, self.reset_count)
        )

    def maybe_eval(self, update_index: int) -> None:
        if update_index % self.config.eval_every == 0 or update_index == self.config.total_steps:
            self.record_eval(update_index)

    def flush_rows(self) -> None:
        rows = self._rows
        self.trace.steps = np.array([r[0] for r in rows], dtype=np.int64)
        self.trace.returns = np.array([r[1] for r in rows])
        self.trace.probes = np.array([r[2] for r in rows])
        self.trace.probes_uniform = np.array([r[3] for r in rows])
        self.trace.entropies = np.array([r[4] for r in rows])
        self.trace.reset_counts = np.array([r[5] for r in rows], dtype=np.int64)


def _interleaved_loop(state: _LoopState) -> None:
    cfg = state.config
    for t in range(1, cfg.total_steps + 1):
        state.update_policy()
        if t % cfg.updates_per_episode == 0:
            state.collect_episode(policy_tag=t)
        state.maybe_eval(t)


def _epoch_loop(state: _LoopState) -> None:
    cfg = state.config
    if cfg.updates_per_episode == 0:
        # Degenerate epoch budget: pure data collection, the policy never moves.
        for t in range(1, cfg.total_steps + 1):
            state.collect_episode(policy_tag=t)
            state.maybe_eval(t)
        return
    t = 0
    while t < cfg.total_steps:
        state.collect_episode(policy_tag=t)
        state.strategy.epoch_reset()
        for _ in range(cfg.updates_per_episode):
            if t >= cfg.total_steps:
                break
            t += 1
            state.update_policy()
            state.maybe_eval(t)


def _finalize(trace: TrainingTrace) -> TrainingTrace:
    if len(trace.steps) == 0:
        raise RuntimeError("training produced no evaluation rows")
    return trace


def run_group(
    env_factory,
    base_config: TrainingConfig,
    seeds,
) -> list[TrainingTrace]:
    """Run one trace per seed with an otherwise identical configuration."""
    traces = []
    for seed in seeds:
        config = replace(base_config, seed=int(seed))
        traces.append(run_training(env_factory(), config))
    return traces
