"""Dynamic programming on the belief MDP.

Two solvers:

* :func:`solve_finite_horizon`: exact backward induction over the tree of
  beliefs reachable from the initial posterior;
* :func:`solve_infinite_horizon`: value iteration on a regular grid over the
  probability simplex, projecting every posterior to its nearest grid node.
  Projection keeps the sweep a sup-norm contraction with modulus ``alpha``, so
  the stopping rule ``||v_{k+1} - v_k|| <= tol (1 - alpha) / (2 alpha)`` bounds
  the distance to the fixed point of the *projected* dynamics by ``tol``. No
  claim is made about the distance to the continuous belief-MDP value.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .belief import as_belief, belief_kernel_q, expected_cost, initial_belief
from .errors import AssumptionViolation, BudgetExceeded, CoverageError, DomainError
from .model import FinitePOMDP, cost_lower_bound

TIE_TOL = 1e-12
MATCH_L1 = 1e-10
NODE_BUDGET = 10**6


def _argmin(values) -> int:
    """Lowest index attaining the minimum up to a relative ``1e-12``."""
    values = np.asarray(values, dtype=float)
    best = values.min()
    if math.isinf(best):
        return int(np.argmin(values))
    slack = TIE_TOL * max(1.0, abs(best))
    return int(np.nonzero(values <= best + slack)[0][0])


# --- simplex grids -------------------------------------------------------------


def simplex_grid(n_states: int, resolution: int) -> np.ndarray:
    """All beliefs with coordinates in ``{0, 1/m, ..., 1}``, in lexicographic order."""
    if n_states < 1 or resolution < 1:
        raise DomainError("need at least one state and a positive resolution")
    rows = []

    def rec(prefix, left, slots):
        if slots == 1:
            rows.append(prefix + [left])
            return
        for k in range(left + 1):
            rec(prefix + [k], left - k, slots - 1)

    rec([], resolution, n_states)
    return np.array(rows, dtype=float) / resolution


def nearest_nodes(grid: np.ndarray, beliefs: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Index of the Euclidean-nearest grid node for each row of ``beliefs``.

    Ties within ``1e-12`` go to the lexicographically smallest node, which is
    the lowest index of a grid from :func:`simplex_grid`.
    """
    beliefs = np.atleast_2d(beliefs)
    out = np.empty(len(beliefs), dtype=int)
    g2 = (grid * grid).sum(axis=1)
    for start in range(0, len(beliefs), chunk):
        b = beliefs[start:start + chunk]
        d2 = g2[None, :] - 2.0 * b @ grid.T + (b * b).sum(axis=1)[:, None]
        d = np.sqrt(np.maximum(d2, 0.0))
        best = d.min(axis=1, keepdims=True)
        out[start:start + chunk] = np.argmax(d <= best + 1e-12, axis=1)
    return out


# --- value tables ----------------------------------------------------------------


@dataclass
class ValueTable:
    beliefs: np.ndarray
    values: np.ndarray
    resolution: Optional[int] = None

    def __post_init__(self):
        self.beliefs = np.atleast_2d(np.asarray(self.beliefs, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.beliefs):
            raise DomainError("one value per belief is required")

    def locate(self, z, projection: Optional[str] = None) -> int:
        """Index of belief ``z`` in the table (or its nearest node with ``projection='nearest'``)."""
        dist = np.abs(self.beliefs - z).sum(axis=1)
        hit = np.nonzero(dist < MATCH_L1)[0]
        if len(hit):
            return int(hit[0])
        if projection == "nearest":
            return int(nearest_nodes(self.beliefs, np.asarray(z)[None, :])[0])
        raise CoverageError(f"belief {np.asarray(z).tolist()} is not in the value table")


@dataclass
class Policy:
    actions: np.ndarray


def bellman_backup(v: ValueTable, z, model, projection: Optional[str] = None):
    """``min_a { cbar(z, a) + alpha * sum_branches weight * v(posterior) }`` and its argmin.

    Ties go to the lowest action index.
    """
    z = as_belief(z, model.n_states)
    q = np.empty(model.n_actions)
    for a in model.actions():
        c = expected_cost(model, z, a)
        if math.isinf(c):
            q[a] = math.inf
            continue
        if model.alpha == 0:
            q[a] = c
            continue
        cont = math.fsum(br.weight * v.values[v.locate(br.posterior, projection)] for br in belief_kernel_q(model, z, a))
        q[a] = c + model.alpha * cont
    best = _argmin(q)
    return float(q[best]), best


class GridBellmanOperator:
    """One synchronous Bellman sweep over a simplex grid with nearest-node projection.

    All posteriors and their projections are computed once at construction;
    :meth:`apply` is then a gather-and-reduce over fixed index arrays.
    """

    def __init__(self, model: FinitePOMDP, resolution: int):
        self.model = model
        self.resolution = resolution
        self.grid = simplex_grid(model.n_states, resolution)
        n, nA, nY = len(self.grid), model.n_actions, model.n_obs
        self.cbar = np.empty((n, nA))
        self.succ = np.zeros((n, nA, nY), dtype=int)
        self.weight = np.zeros((n, nA, nY))
        posts, slots = [], []
        for i, z in enumerate(self.grid):
            for a in range(nA):
                self.cbar[i, a] = expected_cost(model, z, a)
                for k, br in enumerate(belief_kernel_q(model, z, a)):
                    self.weight[i, a, k] = br.weight
                    posts.append(br.posterior)
                    slots.append((i, a, k))
        if posts:
            idx = nearest_nodes(self.grid, np.array(posts))
            for (i, a, k), j in zip(slots, idx):
                self.succ[i, a, k] = j

    def q_values(self, v: np.ndarray) -> np.ndarray:
        if self.model.alpha == 0:
            return self.cbar.copy()
        with np.errstate(invalid="ignore"):
            cont = np.where(self.weight > 0, self.weight * v[self.succ], 0.0).sum(axis=2)
            return np.where(np.isinf(self.cbar), np.inf, self.cbar + self.model.alpha * cont)

    def apply(self, v: np.ndarray):
        """``(T v, greedy actions)``."""
        q = self.q_values(np.asarray(v, dtype=float))
        acts = np.array([_argmin(row) for row in q])
        return q[np.arange(len(q)), acts], acts


def _sup_diff(u, w) -> float:
    both_inf = np.isinf(u) & np.isinf(w) & (np.sign(u) == np.sign(w))
    with np.errstate(invalid="ignore"):
        d = np.where(both_inf, 0.0, np.abs(u - w))
    return float(d.max()) if d.size else 0.0


def check_assumption(model: FinitePOMDP) -> None:
    """Raise :class:`AssumptionViolation` unless the model's declared assumption holds."""
    low = cost_lower_bound(model.cost)
    a = model.alpha
    if model.assumption == "D":
        if not 0 <= a < 1:
            raise AssumptionViolation(f"assumption D needs alpha in [0, 1), got {a}")
        if low == -math.inf:
            raise AssumptionViolation("assumption D needs costs bounded below")
    else:
        if not 0 <= a <= 1:
            raise AssumptionViolation(f"assumption P needs alpha in [0, 1], got {a}")
        if low < 0:
            raise AssumptionViolation(f"assumption P needs nonnegative costs, min cost is {low}")


@dataclass
class InfiniteHorizonResult:
    table: ValueTable
    policy: Policy
    iterations: int
    converged: bool
    criterion: str
    residual: float
    history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "nodes": len(self.table.values),
            "resolution": self.table.resolution,
            "iterations": self.iterations,
            "converged": self.converged,
            "stopping_criterion": self.criterion,
            "final_residual": self.residual,
        }


def solve_infinite_horizon(
    model: FinitePOMDP,
    resolution: int,
    tol: float = 1e-6,
    max_iter: int = 100_000,
    keep_history: bool = False,
) -> InfiniteHorizonResult:
    """Grid value iteration from ``v = 0``.

    With ``alpha < 1`` iteration stops once the sup-norm change falls below
    ``tol (1 - alpha) / (2 alpha)``. Under assumption P with ``alpha = 1`` no
    stopping rule is sound: exactly ``max_iter`` sweeps run and the result is
    the monotone lower approximation ``v_{max_iter}``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    check_assumption(model)
    op = GridBellmanOperator(model, resolution)
    alpha = model.alpha
    v = np.zeros(len(op.grid))
    history = [v.copy()] if keep_history else []
    if alpha < 1:
        threshold = tol * (1 - alpha) / (2 * alpha) if alpha > 0 else 0.0
        criterion = f"sup|v_k+1 - v_k| <= {threshold:.3e}"
    else:
        threshold = None
        criterion = f"fixed budget of {max_iter} sweeps (alpha = 1, lower bound only)"
    converged = False
    residual = math.inf
    it = 0
    while it < max_iter:
        new, acts = op.apply(v)
        it += 1
        residual = _sup_diff(new, v)
        v = new
        if keep_history:
            history.append(v.copy())
        if threshold is not None and residual <= threshold:
            converged = True
            break
    _, acts = op.apply(v)
    table = ValueTable(op.grid, v, resolution)
    return InfiniteHorizonResult(table, Policy(acts), it, converged, criterion, residual, history)


# --- finite horizon -------------------------------------------------------------


@dataclass
class PolicyNode:
    """A node of the optimal policy tree.

    ``steps_left`` counts remaining decisions; leaves have ``steps_left == 0``
    and no action. ``children`` maps each positive-probability observation to
    the successor node.
    """

    belief: np.ndarray
    steps_left: int
    value: float
    action: Optional[int] = None
    children: dict = field(default_factory=dict)


@dataclass
class FiniteHorizonResult:
    value: float
    root: PolicyNode
    nodes: int


def solve_finite_horizon(model, p, y0: int, N: int, node_budget: int = NODE_BUDGET) -> FiniteHorizonResult:
    """Exact ``N``-horizon optimal cost from prior ``p`` after observing ``y0``.

    Identical beliefs at the same depth share one node, so the budget counts
    distinct ``(belief, steps_left)`` pairs.
    """
    if N < 0:
        raise DomainError("horizon must be nonnegative")
    z0 = initial_belief(model, p, y0)
    memo = {}

    def solve(z, k):
        key = (k, np.round(z, 13).tobytes())
        hit = memo.get(key)
        if hit is not None:
            return hit
        if len(memo) >= node_budget:
            raise BudgetExceeded(f"reachable belief tree exceeds {node_budget} nodes")
        if k == 0:
            node = PolicyNode(z, 0, 0.0)
            memo[key] = node
            return node
        best = None
        for a in model.actions():
            c = expected_cost(model, z, a)
            if math.isinf(c):
                cand = (math.inf, a, {})
            else:
                children, terms = {}, []
                for br in belief_kernel_q(model, z, a):
                    child = solve(br.posterior, k - 1)
                    terms.append(br.weight * child.value)
                    for y in br.observations:
                        children[y] = child
                cand = (c + model.alpha * math.fsum(terms), a, children)
            slack = TIE_TOL * max(1.0, abs(best[0])) if best is not None and math.isfinite(best[0]) else 0.0
            if best is None or cand[0] < best[0] - slack:
                best = cand
        node = PolicyNode(z, k, best[0], best[1], best[2])
        memo[key] = node
        return node

    root = solve(z0, N)
    return FiniteHorizonResult(root.value, root, len(memo))


def policy_tree_rows(root: PolicyNode):
    """Depth-first rows ``(history, steps_left, belief, value, action)``; history is the observation path."""
    stack = [((), root)]
    while stack:
        hist, node = stack.pop()
        yield hist, node.steps_left, node.belief, node.value, node.action
        for y in sorted(node.children, reverse=True):
            stack.append((hist + (y,), node.children[y]))


def evaluate_policy_tree(model, root: PolicyNode, episodes: int = 100_000, seed: int = 0):
    """Monte Carlo estimate of the discounted cost of following ``root``.

    Initial states are drawn from the root belief, then states and
    observations are simulated from ``P`` and ``Q``. Returns ``(mean, stderr)``.
    """
    rng = np.random.default_rng(seed)
    x = rng.choice(model.n_states, size=episodes, p=root.belief)
    groups = {id(root): (root, np.arange(episodes))}
    total = np.zeros(episodes)
    disc = 1.0
    for _ in range(root.steps_left):
        nxt = {}
        for node, sel in groups.values():
            a = node.action
            total[sel] += disc * model.cost_vector(a)[x[sel]]
            x[sel] = _sample_rows(rng, model.transition(a), x[sel])
            ys = _sample_rows(rng, model.observation(a), x[sel])
            for y in np.unique(ys):
                child = node.children[int(y)]
                idx = sel[ys == y]
                if id(child) in nxt:
                    idx = np.concatenate([nxt[id(child)][1], idx])
                nxt[id(child)] = (child, idx)
        groups = nxt
        disc *= model.alpha
    return float(total.mean()), float(total.std(ddof=1) / math.sqrt(episodes))


def _sample_rows(rng, M, rows):
    cdf = np.cumsum(M[rows], axis=1)
    u = rng.random(len(rows))[:, None]
    return np.minimum((u >= cdf).sum(axis=1), M.shape[1] - 1)


# --- cost shift --------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftedModel:
    """A nonnegative-cost model with ``c + K`` and the exact value correspondence."""

    model: FinitePOMDP
    K: float
    offset: float

    def value_map(self, v):
        """Map a value of the original model to the shifted one: ``v + K / (1 - alpha)``."""
        return np.asarray(v, dtype=float) + self.offset


def shift_costs(model: FinitePOMDP, K: float) -> ShiftedModel:
    if not model.alpha < 1:
        raise AssumptionViolation("the cost shift is undefined for the infinite horizon with alpha = 1")
    low = cost_lower_bound(model.cost)
    if not K >= -low:
        raise AssumptionViolation(f"K={K} does not make costs nonnegative (min cost {low})")
    shifted = model.replace(cost=model.cost + K, assumption="P")
    return ShiftedModel(shifted, float(K), float(K) / (1 - model.alpha))


# --- CSV ------------------------------------------------------------------------------


def value_table_csv(result: InfiniteHorizonResult, state_names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"z_{s}" for s in state_names] + ["value", "action"])
    for z, val, a in zip(result.table.beliefs, result.table.values, result.policy.actions):
        w.writerow([repr(float(c)) for c in z] + [repr(float(val)), int(a)])
    return buf.getvalue()


def policy_tree_csv(root: PolicyNode, state_names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["history", "steps_left"] + [f"z_{s}" for s in state_names] + ["value", "action"])
    for hist, k, z, val, a in policy_tree_rows(root):
        w.writerow([" ".join(map(str, hist)), k] + [repr(float(c)) for c in z] + [repr(float(val)), "" if a is None else a])
    return buf.getvalue()
