"""Importance ratios, trajectory gradients, and the variance objective.

The replay gradient estimator averages ``lambda_k * omega_k * g_k`` over a
sampled batch, where ``omega`` is the product of per-step target-to-behavior
probability ratios, ``g`` is the score-function gradient scaled by the
discounted return, and ``lambda_k = 1 / (p(k) * n)`` undoes the non-uniform
slot sampling.  The estimator's expectation is the full-buffer mean
``(1/n) sum_i omega_i g_i`` for every valid sampling distribution; only its
variance depends on ``p``, through ``f(p) = sum_i d(i) / p(i)`` with
``d(i) = ||omega_i g_i||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .store import NotReadyError, Trajectory, WeightedStore
from .sampler import SamplerState

_ratio_cap_activations = 0


def ratio_cap_activations() -> int:
    """Number of importance ratios clamped at the exponential cap so far."""
    return _ratio_cap_activations


def reset_ratio_cap_activations() -> None:
    global _ratio_cap_activations
    _ratio_cap_activations = 0


@dataclass
class GradientSample:
    """Per-trajectory quantities entering the replay estimator and the sampler feedback."""

    slot: int
    omega: float
    g: np.ndarray
    d: float

    def __post_init__(self) -> None:
        expected = self.omega**2 * float(self.g @ self.g)
        if not np.isclose(self.d, expected, rtol=1e-9, atol=1e-300):
            raise ValueError("d must equal omega^2 * ||g||^2")


def importance_ratio(traj: Trajectory, target, log_cap: float = 50.0) -> float:
    """Product of per-step probability ratios pi(a|s) / mu(a|s), in log space.

    The log ratio is clamped at ``log_cap`` before exponentiating so a long
    streak of near-zero behavior probabilities cannot overflow; clamp events
    are counted and retrievable via :func:`ratio_cap_activations`.
    """
    global _ratio_cap_activations
    log_ratio = 0.0
    for t in range(len(traj)):
        log_ratio += target.log_prob(int(traj.states[t]), int(traj.actions[t]))
        log_ratio -= np.log(traj.behavior_probs[t])
    if log_ratio > log_cap:
        log_ratio = log_cap
        _ratio_cap_activations += 1
    return float(np.exp(log_ratio))


def trajectory_return(traj: Trajectory, gamma: float) -> float:
    """Discounted return ``sum_t gamma^t r_t``."""
    return float(traj.rewards @ gamma ** np.arange(len(traj)))


def score_return_grad(traj: Trajectory, target, gamma: float) -> np.ndarray:
    """Gradient of the trajectory log-probability times the discounted return.

    Transition terms do not depend on the policy parameters, so the gradient
    reduces to the summed per-step score functions scaled by the return.
    """
    score = np.zeros(target.n_params)
    for t in range(len(traj)):
        score += target.grad_log_prob(int(traj.states[t]), int(traj.actions[t]))
    return score * trajectory_return(traj, gamma)


def gradient_sample(
    slot: int, traj: Trajectory, target, gamma: float, log_cap: float = 50.0
) -> GradientSample:
    omega = importance_ratio(traj, target, log_cap=log_cap)
    g = score_return_grad(traj, target, gamma)
    return GradientSample(slot=slot, omega=omega, g=g, d=omega**2 * float(g @ g))


def replay_gradient(batch: Sequence[GradientSample], p: np.ndarray) -> np.ndarray:
    """Bias-corrected batch mean ``(1/|batch|) sum_k omega_k g_k / (p(k) n)``."""
    if len(batch) == 0:
        raise ValueError("cannot estimate a gradient from an empty batch")
    p = np.asarray(p, dtype=np.float64)
    n = len(p)
    total = np.zeros_like(batch[0].g)
    for sample in batch:
        if p[sample.slot] <= 0.0:
            raise ValueError(f"sampled slot {sample.slot} has zero probability")
        total += sample.omega / (p[sample.slot] * n) * sample.g
    return total / len(batch)


def onpolicy_gradient(trajs: Sequence[Trajectory], target, gamma: float) -> np.ndarray:
    """Monte Carlo policy gradient from on-policy rollouts (mean score-return gradient)."""
    if len(trajs) == 0:
        raise ValueError("cannot estimate a gradient from zero trajectories")
    total = np.zeros(target.n_params)
    for traj in trajs:
        total += score_return_grad(traj, target, gamma)
    return total / len(trajs)


def variance_objective(d: np.ndarray, p: np.ndarray) -> float:
    """Per-step variance proxy ``sum_i d(i) / p(i)`` minimized by the sampler.

    Slots with zero loss contribute nothing regardless of their probability;
    a positive loss on a zero-probability slot makes the objective infinite
    and is rejected.
    """
    d = np.asarray(d, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    active = d > 0
    if np.any(p[active] <= 0.0):
        raise ValueError("positive loss on a zero-probability slot: objective is infinite")
    return float((d[active] / p[active]).sum())


def buffer_gradient_samples(
    store: WeightedStore, target, gamma: float, log_cap: float = 50.0
) -> list[GradientSample]:
    """One :class:`GradientSample` per filled slot, in slot order."""
    samples = []
    for slot, traj in enumerate(store.slots):
        if traj is not None:
            samples.append(gradient_sample(slot, traj, target, gamma, log_cap=log_cap))
    return samples


def full_buffer_mean(samples: Sequence[GradientSample]) -> np.ndarray:
    """The p-independent expectation of the replay gradient: ``(1/n) sum_i omega_i g_i``."""
    total = np.zeros_like(samples[0].g)
    for sample in samples:
        total += sample.omega * sample.g
    return total / len(samples)


def empirical_gradient_variance(
    store: WeightedStore,
    sampler: SamplerState,
    target,
    gamma: float,
    batch: int,
    repeats: int,
    rng: np.random.Generator,
    p: np.ndarray | None = None,
) -> float:
    """Summed per-coordinate sample variance of the replay gradient at fixed parameters.

    Draws ``repeats`` independent batches under ``p`` (the sampler's current
    distribution unless given), computes the bias-corrected gradient for
    each, and returns the trace of the sample covariance.  Pure read: the
    store, sampler and policy are not modified.
    """
    if repeats < 2:
        raise ValueError("variance estimation requires at least 2 repeats")
    if not store.warmed_up:
        raise NotReadyError("variance probe requires a full buffer")
    if p is None:
        p = sampler.distribution()
    p = np.asarray(p, dtype=np.float64)
    samples = buffer_gradient_samples(store, target, gamma)
    n = store.capacity
    weighted = np.stack([s.omega / (p[s.slot] * n) * s.g for s in samples])
    indices = rng.choice(n, size=(repeats, batch), p=p)
    estimates = weighted[indices].mean(axis=1)
    return float(estimates.var(axis=0, ddof=1).sum())
