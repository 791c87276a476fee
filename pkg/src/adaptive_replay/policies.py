"""Softmax policy families with closed-form log-probability gradients.

Both families put strictly positive probability on every action (softmax of
bounded logits), and both expose the score function ``grad_log_prob`` in flat
parameter coordinates so trajectory-level gradients are plain vector sums.
"""

from __future__ import annotations

import numpy as np


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


class TabularSoftmaxPolicy:
    """One logit per (state, action); parameters are the flattened logit table."""

    def __init__(self, n_states: int, n_actions: int, logits: np.ndarray | None = None):
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        if logits is None:
            logits = np.zeros((self.n_states, self.n_actions))
        self.logits = np.asarray(logits, dtype=np.float64).copy()
        if self.logits.shape != (self.n_states, self.n_actions):
            raise ValueError("logits shape must be (n_states, n_actions)")

    @property
    def n_params(self) -> int:
        return self.n_states * self.n_actions

    def get_params(self) -> np.ndarray:
        return self.logits.ravel().copy()

    def set_params(self, params: np.ndarray) -> None:
        self.logits = np.asarray(params, dtype=np.float64).reshape(
            self.n_states, self.n_actions
        )

    def action_probs(self, state: int) -> np.ndarray:
        return _softmax(self.logits[state])

    def prob(self, state: int, action: int) -> float:
        return float(self.action_probs(state)[action])

    def log_prob(self, state: int, action: int) -> float:
        row = self.logits[state]
        z = row - row.max()
        return float(z[action] - np.log(np.exp(z).sum()))

    def grad_log_prob(self, state: int, action: int) -> np.ndarray:
        """Score function: one-hot(action) minus the action distribution, on the state's row."""
        g = np.zeros((self.n_states, self.n_actions))
        g[state] = -self.action_probs(state)
        g[state, action] += 1.0
        return g.ravel()

    def sample_action(self, state: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_actions, p=self.action_probs(state)))

    def greedy_action(self, state: int) -> int:
        return int(np.argmax(self.logits[state]))

    def min_action_prob(self) -> float:
        """Smallest probability over all (state, action) pairs."""
        probs = np.apply_along_axis(_softmax, 1, self.logits)
        return float(probs.min())

    def max_score_norm(self) -> float:
        """Largest ``||grad log pi(a|s)||`` over all (state, action) pairs."""
        best = 0.0
        for s in range(self.n_states):
            pi = self.action_probs(s)
            base = float(pi @ pi)
            for a in range(self.n_actions):
                norm_sq = base - 2.0 * pi[a] + 1.0
                best = max(best, norm_sq)
        return float(np.sqrt(best))

    def copy(self) -> "TabularSoftmaxPolicy":
        return TabularSoftmaxPolicy(self.n_states, self.n_actions, self.logits)


class LinearSoftmaxPolicy:
    """Logits are linear in fixed state features: ``logits(s) = features[s] @ weights``."""

    def __init__(
        self,
        features: np.ndarray,
        n_actions: int,
        weights: np.ndarray | None = None,
    ):
        self.features = np.asarray(features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a (n_states, n_features) matrix")
        self.n_states, self.n_features = self.features.shape
        self.n_actions = int(n_actions)
        if weights is None:
            weights = np.zeros((self.n_features, self.n_actions))
        self.weights = np.asarray(weights, dtype=np.float64).copy()
        if self.weights.shape != (self.n_features, self.n_actions):
            raise ValueError("weights shape must be (n_features, n_actions)")

    @property
    def n_params(self) -> int:
        return self.n_features * self.n_actions

    def get_params(self) -> np.ndarray:
        return self.weights.ravel().copy()

    def set_params(self, params: np.ndarray) -> None:
        self.weights = np.asarray(params, dtype=np.float64).reshape(
            self.n_features, self.n_actions
        )

    def action_probs(self, state: int) -> np.ndarray:
        return _softmax(self.features[state] @ self.weights)

    def prob(self, state: int, action: int) -> float:
        return float(self.action_probs(state)[action])

    def log_prob(self, state: int, action: int) -> float:
        logits = self.features[state] @ self.weights
        z = logits - logits.max()
        return float(z[action] - np.log(np.exp(z).sum()))

    def grad_log_prob(self, state: int, action: int) -> np.ndarray:
        residual = -self.action_probs(state)
        residual[action] += 1.0
        return np.outer(self.features[state], residual).ravel()

    def sample_action(self, state: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_actions, p=self.action_probs(state)))

    def greedy_action(self, state: int) -> int:
        return int(np.argmax(self.features[state] @ self.weights))

    def min_action_prob(self) -> float:
        return float(min(self.action_probs(s).min() for s in range(self.n_states)))

    def max_score_norm(self) -> float:
        best = 0.0
        for s in range(self.n_states):
            for a in range(self.n_actions):
                best = max(best, float(np.linalg.norm(self.grad_log_prob(s, a))))
        return best

    def copy(self) -> "LinearSoftmaxPolicy":
        return LinearSoftmaxPolicy(self.features, self.n_actions, self.weights)
