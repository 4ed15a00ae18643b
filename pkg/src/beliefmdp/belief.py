"""The belief-MDP reduction on finite spaces.

Given a belief ``z`` over states and an action ``a``:

* ``joint_R(B x C | z, a)``: probability that the next state lies in ``B`` and
  the emitted observation in ``C``;
* ``obs_marginal``: the observation law ``R'(. | z, a)``;
* ``bayes_posterior``: the filter update ``H(z, a, y)``;
* ``belief_kernel_q``: the law of the next belief, a finite mixture of
  posteriors weighted by ``R'``.

Every function takes a model exposing ``transition(a)`` (``|X| x |X|``),
``observation(a)`` (``|X| x |Y|``), and, where needed, ``cost_vector(a)`` and
``Q0``. Both :class:`~beliefmdp.model.FinitePOMDP` (integer actions) and
:class:`~beliefmdp.model.ParametricPOMDP` (actions in [0, 1]) qualify.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, UnobservableEvidence
from .measures import FiniteMeasure

BELIEF_TOL = 1e-12
MERGE_L1 = 1e-10
# above this many states, contractions use compensated (fsum) column sums
COMPENSATED_ABOVE = 1000


def as_belief(z, n_states: int = None) -> np.ndarray:
    """Validate and return ``z`` as a float array."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DomainError("a belief is a one-dimensional weight vector")
    if n_states is not None and len(z) != n_states:
        raise DomainError(f"belief has {len(z)} entries, model has {n_states} states")
    if not np.all(np.isfinite(z)) or np.any(z < 0):
        raise DomainError("belief weights must be finite and nonnegative")
    if abs(math.fsum(z) - 1.0) > BELIEF_TOL:
        raise DomainError(f"belief sums to {math.fsum(z)!r}, not 1")
    return z


def _mask(S, n: int) -> np.ndarray:
    if S is None:
        return np.ones(n, dtype=bool)
    arr = np.asarray(S)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise DomainError(f"boolean set mask must have length {n}")
        return arr
    m = np.zeros(n, dtype=bool)
    idx = arr.astype(int).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DomainError(f"set index out of range 0..{n - 1}")
    m[idx] = True
    return m


def _contract(z: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``z @ M``, with compensated summation for large state spaces."""
    if len(z) > COMPENSATED_ABOVE:
        terms = z[:, None] * M
        return np.array([math.fsum(col) for col in terms.T])
    return z @ M


def predict(model, z, a) -> np.ndarray:
    """State marginal after one transition: ``sum_x P(. | x, a) z(x)``."""
    z = as_belief(z, model.n_states)
    return _contract(z, model.transition(a))


def joint_matrix(model, z, a) -> np.ndarray:
    """``J[x', y] = Q(y | a, x') * sum_x P(x' | x, a) z(x)``."""
    return predict(model, z, a)[:, None] * model.observation(a)


def joint_R(model, z, a, B=None, C=None) -> float:
    """``R(B x C | z, a)``; ``B`` and ``C`` are index collections or boolean masks (None = everything)."""
    J = joint_matrix(model, z, a)
    b = _mask(B, J.shape[0])
    c = _mask(C, J.shape[1])
    return math.fsum(J[np.ix_(b, c)].ravel())


def joint_R_row(model, z, a, B=None) -> np.ndarray:
    """The vector ``y -> R(B x {y} | z, a)``."""
    J = joint_matrix(model, z, a)
    return J[_mask(B, J.shape[0])].sum(axis=0)


def obs_marginal(model, z, a) -> np.ndarray:
    """``R'(. | z, a)`` as a probability vector over observations."""
    J = joint_matrix(model, z, a)
    if J.shape[0] > COMPENSATED_ABOVE:
        return np.array([math.fsum(col) for col in J.T])
    return J.sum(axis=0)


def bayes_posterior(model, z, a, y: int) -> np.ndarray:
    """``H(z, a, y)``: the belief after acting with ``a`` and observing ``y``.

    Raises :class:`UnobservableEvidence` when ``R'(y | z, a) = 0``; the
    posterior is only determined almost surely, so no value is invented.
    """
    J = joint_matrix(model, z, a)
    if not 0 <= y < J.shape[1]:
        raise DomainError(f"observation {y} out of range")
    col = J[:, y]
    norm = math.fsum(col)
    if norm <= 0.0:
        raise UnobservableEvidence(f"observation {y} has probability zero after action {a}")
    return col / norm


@dataclass(frozen=True)
class Branch:
    """One atom of ``q(. | z, a)``.

    ``observations`` lists every observation leading to this posterior and
    ``obs_weights`` their individual probabilities; ``weight`` is their sum.
    """

    observations: tuple
    obs_weights: tuple
    weight: float
    posterior: np.ndarray


@dataclass(frozen=True)
class BeliefBranchSet:
    branches: tuple

    def __len__(self):
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    @property
    def weights(self) -> np.ndarray:
        return np.array([b.weight for b in self.branches])

    @property
    def posteriors(self) -> np.ndarray:
        return np.array([b.posterior for b in self.branches])

    def as_measure(self) -> FiniteMeasure:
        """The next-belief law as a measure on the simplex with the L1 ground metric."""
        w = self.weights
        return FiniteMeasure(self.posteriors, w / math.fsum(w), metric="l1")

    def reconstruct(self, B=None, C=None) -> float:
        """``sum_{y in C} H(B | z, a, y) R'(y | z, a)``."""
        n_states = len(self.branches[0].posterior)
        b = _mask(B, n_states)
        terms = []
        for br in self.branches:
            mass_b = br.posterior[b].sum()
            for y, w in zip(br.observations, br.obs_weights):
                if C is None or _in_set(y, C):
                    terms.append(w * mass_b)
        return math.fsum(terms)


def _in_set(y, C) -> bool:
    arr = np.asarray(C)
    if arr.dtype == bool:
        return bool(arr[y])
    return y in set(arr.astype(int).ravel().tolist())


def belief_kernel_q(model, z, a) -> BeliefBranchSet:
    """Law of the next belief: ``{(y, R'(y | z, a), H(z, a, y)) : R'(y) > 0}``.

    Observations whose posteriors agree within L1 distance ``1e-10`` share one
    atom.
    """
    J = joint_matrix(model, z, a)
    groups = []
    for y in range(J.shape[1]):
        col = J[:, y]
        w = math.fsum(col)
        if w <= 0.0:
            continue
        post = col / w
        for g in groups:
            if np.abs(g["posterior"] - post).sum() < MERGE_L1:
                g["obs"].append(y)
                g["w"].append(w)
                break
        else:
            groups.append({"obs": [y], "w": [w], "posterior": post})
    branches = []
    for g in groups:
        post = g["posterior"]
        post.setflags(write=False)
        branches.append(Branch(tuple(g["obs"]), tuple(g["w"]), math.fsum(g["w"]), post))
    return BeliefBranchSet(tuple(branches))


def expected_cost(model, z, a) -> float:
    """``sum_x c(x, a) z(x)``; states with zero belief are ignored, so ``+inf`` there is harmless."""
    z = as_belief(z, model.n_states)
    c = np.asarray(model.cost_vector(a), dtype=float)
    live = z > 0
    if np.any(np.isposinf(c[live])):
        return math.inf
    return math.fsum(c[live] * z[live])


def initial_belief(model, p, y0: int) -> np.ndarray:
    """Condition the prior ``p`` on the initial observation ``y0`` through ``Q0``."""
    p = as_belief(p, model.n_states)
    if model.Q0 is None:
        raise DomainError("model has no initial observation kernel")
    Q0 = np.asarray(model.Q0)
    if not 0 <= y0 < Q0.shape[1]:
        raise DomainError(f"observation {y0} out of range")
    un = Q0[:, y0] * p
    norm = math.fsum(un)
    if norm <= 0.0:
        raise UnobservableEvidence(f"initial observation {y0} has probability zero under the prior", step=0)
    return un / norm


def filter_beliefs(model, prior, observations: Sequence[int], actions: Sequence) -> list:
    """Posterior trajectory ``z_0, z_1, ...`` for ``y_0, a_0, y_1, a_1, ...``.

    ``observations`` starts with ``y_0`` and is one longer than ``actions``.
    :class:`UnobservableEvidence` carries the failing ``step``.
    """
    if not observations:
        raise DomainError("need at least the initial observation")
    if len(actions) != len(observations) - 1:
        raise DomainError(f"{len(observations)} observations need {len(observations) - 1} actions, got {len(actions)}")
    beliefs = [initial_belief(model, prior, observations[0])]
    for t, (a, y) in enumerate(zip(actions, observations[1:]), start=1):
        try:
            beliefs.append(bayes_posterior(model, beliefs[-1], a, y))
        except UnobservableEvidence as exc:
            raise UnobservableEvidence(f"step {t}: {exc}", step=t) from None
    return beliefs


def trajectory_csv(beliefs, observations, actions, state_names: Iterable[str]) -> str:
    """Belief trajectory as CSV: ``step, observation, action, z_<state>...``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "observation", "action"] + [f"z_{s}" for s in state_names])
    for t, z in enumerate(beliefs):
        act = "" if t == 0 else actions[t - 1]
        w.writerow([t, observations[t], act] + [repr(float(v)) for v in z])
    return buf.getvalue()
