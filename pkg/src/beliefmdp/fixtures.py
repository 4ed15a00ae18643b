"""Reference models used by the tests, the CLI and the documentation.

``m1``
    two states, two observations, two actions; the state stays put with
    probability 0.9 and is reported correctly with probability 0.8; cost
    ``|x - a|``.
``smooth_family``
    M1-based parametric model whose transition and observation kernels move
    linearly (hence continuously in total variation) with the action.
``step_family``
    same transitions, but the observation kernel jumps from uninformative to
    informative at ``a = 0.5``.
"""

import numpy as np

from .filtration import LinearGaussianInstance
from .model import FinitePOMDP, ParametricKernelFamily, ParametricPOMDP


def _stay(p):
    return np.array([[p, 1 - p], [1 - p, p]])


def m1(alpha=0.9, assumption="D") -> FinitePOMDP:
    P = np.stack([_stay(0.9), _stay(0.9)])
    Q = np.stack([_stay(0.8), _stay(0.8)])
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    return FinitePOMDP(
        P=P, Q=Q, Q0=_stay(0.8), cost=cost, alpha=alpha, assumption=assumption,
        state_names=("0", "1"), obs_names=("0", "1"), action_names=("0", "1"),
        prior=np.array([0.5, 0.5]),
    )


def smooth_family() -> ParametricPOMDP:
    return ParametricPOMDP(
        ParametricKernelFamily(_stay(0.9), _stay(0.6), "linear"),
        ParametricKernelFamily(_stay(0.8), _stay(0.6), "linear"),
        Q0=_stay(0.8),
        cost=lambda x, a: abs(x - a),
    )


def step_family() -> ParametricPOMDP:
    return ParametricPOMDP(
        ParametricKernelFamily(_stay(0.9), _stay(0.6), "linear"),
        ParametricKernelFamily(np.full((2, 2), 0.5), _stay(0.8), "step"),
        Q0=_stay(0.8),
        cost=lambda x, a: abs(x - a),
    )


def random_stochastic(rng, shape, sparsity=0.0):
    """Random row-stochastic array; ``sparsity`` is the chance of zeroing an entry (one entry per row survives)."""
    M = rng.random(shape)
    if sparsity:
        M = M * (rng.random(shape) >= sparsity)
        rows = M.reshape(-1, shape[-1])
        dead = rows.sum(axis=1) == 0
        rows[dead, rng.integers(shape[-1], size=dead.sum())] = 1.0
        M = rows.reshape(shape)
    return M / M.sum(axis=-1, keepdims=True)


def random_model(rng, n_states, n_obs, n_actions, alpha=0.9, assumption="D", cost_range=(0.0, 1.0), sparsity=0.0) -> FinitePOMDP:
    return FinitePOMDP(
        P=random_stochastic(rng, (n_actions, n_states, n_states), sparsity),
        Q=random_stochastic(rng, (n_actions, n_states, n_obs), sparsity),
        Q0=random_stochastic(rng, (n_states, n_obs)),
        cost=rng.uniform(*cost_range, size=(n_states, n_actions)),
        alpha=alpha,
        assumption=assumption,
    )


def random_family(rng, n_states, n_obs, link="linear") -> ParametricPOMDP:
    return ParametricPOMDP(
        ParametricKernelFamily(random_stochastic(rng, (n_states, n_states)), random_stochastic(rng, (n_states, n_states)), link),
        ParametricKernelFamily(random_stochastic(rng, (n_states, n_obs)), random_stochastic(rng, (n_states, n_obs)), link),
        Q0=random_stochastic(rng, (n_states, n_obs)),
    )


def kalman_1d() -> LinearGaussianInstance:
    """The bundled scalar linear-Gaussian instance."""
    return LinearGaussianInstance(
        A=[[0.8]], B=[[1.0]], C=[[1.0]],
        process_cov=[[0.09]], obs_cov=[[1.0]],
        prior_mean=[0.0], prior_cov=[[0.25]],
    )


def kalman_1d_noiseless() -> LinearGaussianInstance:
    return LinearGaussianInstance(
        A=[[1.0]], B=[[1.0]], C=[[1.0]],
        process_cov=[[0.0]], obs_cov=[[0.0]],
        prior_mean=[0.0], prior_cov=[[0.0]],
    )
