"""Partially observed control systems, their grid discretization, and the Kalman filter.

The system is

    x_{t+1} = F(x_t, a_t, xi_t),    y_{t+1} = G(a_t, x_{t+1}, eta_{t+1}),    y_0 = G0(x_0, eta_0)

with ``xi_t ~ mu`` and ``eta_t`` uniform on ``(0, 1)^T``, all draws mutually
independent.

Batch convention: ``F(x, a, xi)`` receives one state ``x`` of shape ``(N,)``,
one action ``a`` of shape ``(M,)`` and a batch of noise values ``xi`` of shape
``(k, S)``, and returns ``(k, N)``. Likewise ``G(a, x, eta)`` with ``eta`` of
shape ``(k, T)`` returns ``(k, L)`` and ``G0(x, eta)`` returns ``(k, L)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .belief import filter_beliefs
from .errors import CoverageError, DomainError, NumericalError, PolicyError, SchemaError
from .measures import FiniteMeasure
from .model import FinitePOMDP, validate_model

COVERAGE_TOL = 1e-3
HERMITE_NODES = 32
MIDPOINT_NODES = 64
_BISECT_STEPS = 64
_Z_RANGE = 40.0


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


@dataclass(frozen=True, eq=False)
class GaussianNoise:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (len(mean), len(mean)):
            raise SchemaError("covariance shape does not match mean")
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() < -1e-12:
            raise SchemaError("covariance must be symmetric positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_root", _psd_sqrt(cov))

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def degenerate(self) -> bool:
        return not np.any(self.cov)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self._root @ rng.standard_normal(self.dim)


NoiseLaw = Union[GaussianNoise, FiniteMeasure]


@dataclass
class ControlSystem:
    F: Callable
    G: Callable
    G0: Callable
    noise: NoiseLaw
    prior: NoiseLaw
    state_dim: int
    action_dim: int
    obs_dim: int
    obs_noise_dim: int
    cost: Optional[Callable] = None
    action_bounds: Optional[tuple] = None

    @property
    def noise_dim(self) -> int:
        return self.noise.dim


def _draw(law: NoiseLaw, rng) -> np.ndarray:
    if isinstance(law, FiniteMeasure):
        return np.atleast_1d(law.sample(rng)).astype(float)
    return law.sample(rng)


@dataclass
class Trajectory:
    states: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    costs: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        N, L, M = self.states.shape[1], self.observations.shape[1], self.actions.shape[1]
        w.writerow(["t"] + [f"x{i}" for i in range(N)] + [f"y{i}" for i in range(L)] + [f"a{i}" for i in range(M)] + ["cost"])
        for t in range(len(self.states)):
            acts = self.actions[t].tolist() if t < len(self.actions) else [""] * M
            cost = repr(float(self.costs[t])) if t < len(self.costs) else ""
            w.writerow([t] + [repr(float(v)) for v in self.states[t]] + [repr(float(v)) for v in self.observations[t]] + acts + [cost])
        return buf.getvalue()


def simulate(system: ControlSystem, policy: Callable, T_steps: int, seed: int) -> Trajectory:
    """Run the system for ``T_steps`` transitions.

    ``policy(observations, actions)`` receives read-only arrays holding
    ``y_0..y_t`` and ``a_0..a_{t-1}`` and returns ``a_t``. Every noise draw
    comes from one ``numpy`` generator seeded with ``seed``.
    """
    if T_steps < 1:
        raise DomainError("T_steps must be at least 1")
    rng = np.random.default_rng(seed)
    N, M, L = system.state_dim, system.action_dim, system.obs_dim
    xs = np.empty((T_steps + 1, N))
    ys = np.empty((T_steps + 1, L))
    acts = np.empty((T_steps, M))
    costs = np.empty(T_steps)
    xs[0] = _draw(system.prior, rng)
    ys[0] = np.asarray(system.G0(xs[0], rng.random((1, system.obs_noise_dim))), dtype=float).reshape(-1)
    for t in range(T_steps):
        seen_y, seen_a = ys[: t + 1], acts[:t]
        seen_y.flags.writeable = False
        seen_a.flags.writeable = False
        a = np.atleast_1d(np.asarray(policy(seen_y, seen_a), dtype=float))
        if a.shape != (M,) or not np.all(np.isfinite(a)):
            raise PolicyError(f"policy returned {a!r}, expected a finite vector of length {M}")
        if system.action_bounds is not None:
            lo, hi = system.action_bounds
            if np.any(a < lo) or np.any(a > hi):
                raise PolicyError(f"action {a.tolist()} outside bounds [{lo}, {hi}]")
        acts[t] = a
        costs[t] = float(system.cost(xs[t], a)) if system.cost is not None else 0.0
        xi = _draw(system.noise, rng)
        xs[t + 1] = np.asarray(system.F(xs[t], a, xi[None, :]), dtype=float).reshape(-1)
        ys[t + 1] = np.asarray(system.G(a, xs[t + 1], rng.random((1, system.obs_noise_dim))), dtype=float).reshape(-1)
    return Trajectory(xs, ys, acts, costs)


# --- grids -----------------------------------------------------------------------------


class Grid:
    """Tensor grid of cells; each axis is given by its increasing cell centers.

    Cell boundaries sit halfway between centers; the outer cells extend half a
    spacing beyond the outermost centers. Points outside the box are clamped
    to the boundary cells.
    """

    def __init__(self, axes):
        if isinstance(axes, np.ndarray) and axes.ndim == 1:
            axes = [axes]
        self.axes = [np.asarray(ax, dtype=float) for ax in axes]
        for ax in self.axes:
            if ax.ndim != 1 or len(ax) < 1 or np.any(np.diff(ax) <= 0):
                raise SchemaError("grid axes must be strictly increasing 1-D arrays")
        self.edges = []
        for ax in self.axes:
            if len(ax) == 1:
                self.edges.append(np.array([ax[0] - 0.5, ax[0] + 0.5]))
                continue
            mid = 0.5 * (ax[1:] + ax[:-1])
            self.edges.append(np.concatenate([[ax[0] - (mid[0] - ax[0])], mid, [ax[-1] + (ax[-1] - mid[-1])]]))

    @classmethod
    def uniform(cls, lo, hi, n) -> "Grid":
        lo, hi, n = np.atleast_1d(lo), np.atleast_1d(hi), np.atleast_1d(n)
        dim = max(len(lo), len(hi), len(n))
        lo, hi, n = (np.broadcast_to(v, dim) for v in (lo, hi, n))
        return cls([np.linspace(l, h, int(k)) for l, h, k in zip(lo, hi, n)])

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(ax) for ax in self.axes)

    def __len__(self):
        return int(np.prod(self.shape))

    @property
    def centers(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def snap(self, points) -> np.ndarray:
        """Flat cell index of each point (rows of ``points``)."""
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(-1, 1) if self.dim == 1 and pts.ndim <= 1 else np.atleast_2d(pts)
        idx = [np.clip(np.searchsorted(e[1:-1], pts[:, d], side="right"), 0, len(ax) - 1)
               for d, (e, ax) in enumerate(zip(self.edges, self.axes))]
        return np.ravel_multi_index(idx, self.shape)

    def outside(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([e[0] for e in self.edges])
        hi = np.array([e[-1] for e in self.edges])
        return np.any((pts < lo) | (pts > hi), axis=1)


def _as_grid(g) -> Grid:
    return g if isinstance(g, Grid) else Grid(g)


# --- pushforward quadrature ----------------------------------------------------------


def _monotone_direction(fn, lo, hi) -> int:
    """+1 / -1 if the scalar map ``fn`` is monotone on ``[lo, hi]`` (sampled), else 0."""
    t = np.linspace(lo, hi, 33)[:, None]
    v = fn(t)
    if v.ndim != 2 or v.shape[1] != 1:
        return 0
    d = np.diff(v[:, 0])
    if np.all(d >= 0) and np.any(d > 0):
        return 1
    if np.all(d <= 0) and np.any(d < 0):
        return -1
    return 0


def _invert_edges(fn, edges, lo, hi, direction) -> np.ndarray:
    """For each edge ``e``, the point ``t`` in ``[lo, hi]`` with ``fn(t) = e`` (bisection, vectorized)."""
    left = np.full(len(edges), lo, dtype=float)
    right = np.full(len(edges), hi, dtype=float)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (left + right)
        val = fn(mid[:, None])[:, 0]
        below = val <= edges if direction > 0 else val >= edges
        left = np.where(below, mid, left)
        right = np.where(below, right, mid)
    return 0.5 * (left + right)


def _cell_probs_from_cdf(cdf_inner, cdf_lo, cdf_hi):
    """Cell masses with tails clamped into the boundary cells, and the escaping mass."""
    cdf = np.concatenate([[0.0], cdf_inner, [1.0]])
    probs = np.diff(cdf)
    probs = np.clip(probs, 0.0, None)
    escape = cdf_lo + (1.0 - cdf_hi)
    return probs / probs.sum(), float(escape)


def _row_by_inversion(fn, grid: Grid, lo, hi, cdf, direction):
    """Exact cell masses of ``fn(U)`` for a scalar noise ``U`` with distribution function ``cdf``."""
    e = grid.edges[0]
    pts = _invert_edges(fn, e, lo, hi, direction)
    c = cdf(pts)
    if direction < 0:
        c = 1.0 - c
    c = np.maximum.accumulate(c)
    return _cell_probs_from_cdf(c[1:-1], c[0], c[-1])


def _row_by_nodes(fn, grid: Grid, nodes, weights):
    vals = np.asarray(fn(nodes), dtype=float)
    cells = grid.snap(vals)
    row = np.bincount(cells, weights=weights, minlength=len(grid)).astype(float)
    escape = float(weights[grid.outside(vals)].sum())
    return row / row.sum(), escape


def _gauss_hermite(law: GaussianNoise, n: int):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    grids = np.meshgrid(*([x] * law.dim), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([w] * law.dim), indexing="ij")
    wt = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return law.mean + z @ _psd_sqrt(law.cov).T, wt


def _midpoint_nodes(T: int, n: int):
    m = (np.arange(n) + 0.5) / n
    grids = np.meshgrid(*([m] * T), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    return nodes, np.full(len(nodes), 1.0 / len(nodes))


def _noise_row(fn, law: NoiseLaw, grid: Grid, hermite_nodes: int):
    """Cell masses of ``fn(xi)`` with ``xi ~ law``."""
    if isinstance(law, FiniteMeasure):
        return _row_by_nodes(fn, grid, law.support, law.weights)
    if law.degenerate:
        return _row_by_nodes(fn, grid, law.mean[None, :], np.ones(1))
    if law.dim == 1 and grid.dim == 1:
        m, s = law.mean[0], math.sqrt(law.cov[0, 0])
        std = lambda z: fn(m + s * z)
        direction = _monotone_direction(std, -_Z_RANGE, _Z_RANGE)
        if direction:
            return _row_by_inversion(std, grid, -_Z_RANGE, _Z_RANGE, ndtr, direction)
    nodes, weights = _gauss_hermite(law, hermite_nodes)
    return _row_by_nodes(fn, grid, nodes, weights)


def _uniform_row(fn, T: int, grid: Grid, midpoint_nodes: int):
    """Cell masses of ``fn(eta)`` with ``eta`` uniform on ``(0, 1)^T``."""
    if T == 1 and grid.dim == 1:
        direction = _monotone_direction(fn, 1e-12, 1 - 1e-12)
        if direction:
            return _row_by_inversion(fn, grid, 0.0, 1.0, lambda t: np.clip(t, 0.0, 1.0), direction)
    nodes, weights = _midpoint_nodes(T, midpoint_nodes)
    return _row_by_nodes(fn, grid, nodes, weights)


@dataclass
class DiscretizationReport:
    escaping_mass: dict = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.escaping_mass.values(), default=0.0)


def discretize_with_report(
    system: ControlSystem,
    state_grid,
    obs_grid,
    action_grid,
    hermite_nodes: int = HERMITE_NODES,
    midpoint_nodes: int = MIDPOINT_NODES,
    coverage_tol: float = COVERAGE_TOL,
    alpha: float = 0.9,
    prior: Optional[np.ndarray] = None,
):
    """Finite POMDP on the given grids, plus the per-kernel escaping mass.

    Scalar Gaussian state noise and scalar observation noise are pushed
    through ``F`` / ``G`` exactly (cell-edge inversion) whenever the map is
    monotone in the noise; otherwise tensor Gauss-Hermite (state noise) or a
    tensor midpoint rule (observation noise) is used. Mass leaving the grid box
    is clamped into boundary cells; if more than ``coverage_tol`` escapes
    from any row, :class:`CoverageError` is raised.
    """
    sg, og = _as_grid(state_grid), _as_grid(obs_grid)
    acts = np.asarray(action_grid, dtype=float)
    if acts.ndim == 1:
        acts = acts[:, None]
    centers = sg.centers
    nX, nY, nA = len(sg), len(og), len(acts)
    P = np.zeros((nA, nX, nX))
    Q = np.zeros((nA, nX, nY))
    Q0 = np.zeros((nX, nY))
    escape = {"P": 0.0, "Q": 0.0, "Q0": 0.0}
    for ai, a in enumerate(acts):
        for i, x in enumerate(centers):
            P[ai, i], e = _noise_row(lambda xi, x=x, a=a: system.F(x, a, xi), system.noise, sg, hermite_nodes)
            escape["P"] = max(escape["P"], e)
            Q[ai, i], e = _uniform_row(lambda eta, x=x, a=a: system.G(a, x, eta), system.obs_noise_dim, og, midpoint_nodes)
            escape["Q"] = max(escape["Q"], e)
    for i, x in enumerate(centers):
        Q0[i], e = _uniform_row(lambda eta, x=x: system.G0(x, eta), system.obs_noise_dim, og, midpoint_nodes)
        escape["Q0"] = max(escape["Q0"], e)
    report = DiscretizationReport(escape)
    if report.worst > coverage_tol:
        raise CoverageError(
            f"grid misses {report.worst:.3e} probability mass (limit {coverage_tol:.0e}); widen the grid",
            escaping_mass=report.worst,
        )
    cost = np.zeros((nX, nA))
    if system.cost is not None:
        cost = np.array([[float(system.cost(x, a)) for a in acts] for x in centers])
    model = FinitePOMDP(P=P, Q=Q, Q0=Q0, cost=cost, alpha=alpha, assumption="D", prior=prior)
    bad = validate_model(model)
    if bad:
        raise AssertionError(f"discretization produced an invalid model: {bad[:3]}")
    return model, report


def discretize(system, state_grid, obs_grid, action_grid, **kw) -> FinitePOMDP:
    return discretize_with_report(system, state_grid, obs_grid, action_grid, **kw)[0]


def discretize_prior(law: NoiseLaw, state_grid, hermite_nodes: int = HERMITE_NODES) -> np.ndarray:
    """Cell masses of the initial-state law on ``state_grid`` (tails clamped)."""
    row, _ = _noise_row(lambda v: v, law, _as_grid(state_grid), hermite_nodes)
    return row


# --- linear-Gaussian instance and the Kalman filter ----------------------------------------


@dataclass(frozen=True, eq=False)
class LinearGaussianInstance:
    """``x' = A x + B a + xi``, ``y = C x + v``, ``xi ~ N(0, process_cov)``, ``v ~ N(0, obs_cov)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    process_cov: np.ndarray
    obs_cov: np.ndarray
    prior_mean: np.ndarray
    prior_cov: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise SchemaError("A must be square")
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.shape[1] != n:
            raise SchemaError("C must have one column per state")
        m = C.shape[0]
        pc = np.atleast_2d(np.asarray(self.process_cov, dtype=float))
        oc = np.atleast_2d(np.asarray(self.obs_cov, dtype=float))
        mean = np.atleast_1d(np.asarray(self.prior_mean, dtype=float))
        P0 = np.atleast_2d(np.asarray(self.prior_cov, dtype=float))
        for name, M, k in (("process_cov", pc, n), ("obs_cov", oc, m), ("prior_cov", P0, n)):
            if M.shape != (k, k):
                raise SchemaError(f"{name} must be {k}x{k}")
            if not np.allclose(M, M.T) or np.linalg.eigvalsh(M).min() < -1e-12:
                raise SchemaError(f"{name} must be symmetric positive semidefinite")
        if mean.shape != (n,):
            raise SchemaError(f"prior_mean must have length {n}")
        for key, val in dict(A=A, B=B, C=C, process_cov=pc, obs_cov=oc, prior_mean=mean, prior_cov=P0).items():
            object.__setattr__(self, key, val)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.C.shape[0]

    @property
    def action_dim(self) -> int:
        return self.B.shape[1]

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(),
            "process_cov": self.process_cov.tolist(), "obs_cov": self.obs_cov.tolist(),
            "prior_mean": self.prior_mean.tolist(), "prior_cov": self.prior_cov.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearGaussianInstance":
        try:
            return cls(**{k: doc[k] for k in ("A", "B", "C", "process_cov", "obs_cov", "prior_mean", "prior_cov")})
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad linear-Gaussian instance: {exc}") from exc

    @classmethod
    def load(cls, path) -> "LinearGaussianInstance":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read instance {path}: {exc}") from exc

    def to_control_system(self) -> ControlSystem:
        A, B, C = self.A, self.B, self.C
        R_half = _psd_sqrt(self.obs_cov)

        def F(x, a, xi):
            return (A @ x + B @ a)[None, :] + xi

        def obs(x, eta):
            # eta in (0,1)^L -> N(0, R) through the normal quantile; only
            # evaluated on interior points so ndtri stays finite
            v = ndtri(eta) @ R_half.T if np.any(R_half) else np.zeros_like(eta, dtype=float)
            return (C @ x)[None, :] + v

        return ControlSystem(
            F=F,
            G=lambda a, x, eta: obs(x, eta),
            G0=obs,
            noise=GaussianNoise(np.zeros(self.state_dim), self.process_cov),
            prior=GaussianNoise(self.prior_mean, self.prior_cov),
            state_dim=self.state_dim,
            action_dim=self.action_dim,
            obs_dim=self.obs_dim,
            obs_noise_dim=self.obs_dim,
        )


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "cov", np.atleast_2d(np.asarray(self.cov, dtype=float)))


def kalman_predict(b: GaussianBelief, a, inst: LinearGaussianInstance) -> GaussianBelief:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    mean = inst.A @ b.mean + inst.B @ a
    cov = inst.A @ b.cov @ inst.A.T + inst.process_cov
    return GaussianBelief(mean, 0.5 * (cov + cov.T))


def kalman_update(b: GaussianBelief, y, inst: LinearGaussianInstance) -> GaussianBelief:
    """Condition ``b`` on ``y = C x + v``.

    A belief with zero covariance already pins the state down and is
    returned unchanged, whatever the observation noise.
    """
    if not np.any(b.cov):
        return b
    y = np.atleast_1d(np.asarray(y, dtype=float))
    C = inst.C
    S = C @ b.cov @ C.T + inst.obs_cov
    if np.linalg.matrix_rank(S) < S.shape[0]:
        raise NumericalError("innovation covariance is singular")
    try:
        K = np.linalg.solve(S.T, (b.cov @ C.T).T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"innovation covariance is singular: {exc}") from exc
    mean = b.mean + K @ (y - C @ b.mean)
    cov = (np.eye(len(b.mean)) - K @ C) @ b.cov
    return GaussianBelief(mean, 0.5 * (cov + cov.T))


def kalman_step(b: GaussianBelief, a, y, inst: LinearGaussianInstance) -> GaussianBelief:
    """One predict/update cycle; ``y=None`` gives the prediction only."""
    pred = kalman_predict(b, a, inst)
    return pred if y is None else kalman_update(pred, y, inst)


def kalman_filter(inst: LinearGaussianInstance, observations, actions) -> list:
    """Posterior means and covariances for ``y_0, a_0, y_1, ...``."""
    b = kalman_update(GaussianBelief(inst.prior_mean, inst.prior_cov), observations[0], inst)
    out = [b]
    for a, y in zip(actions, observations[1:]):
        b = kalman_step(b, a, y, inst)
        out.append(b)
    return out


# --- cross-validation ------------------------------------------------------------------------


def zero_policy(action_dim: int) -> Callable:
    return lambda ys, acts: np.zeros(action_dim)


def compare_filters(
    inst: LinearGaussianInstance,
    T_steps: int,
    grid_sizes: Sequence[int],
    seed: int,
    state_range: tuple = (-5.0, 5.0),
    obs_range: Optional[tuple] = None,
    policy: Optional[Callable] = None,
    trajectory: Optional[Trajectory] = None,
) -> list:
    """Sup-over-time distance between the grid filter mean and the Kalman mean, per grid size.

    One trajectory is simulated (or supplied) and filtered by both methods.
    Each grid has ``n`` cells per state axis on ``state_range`` and ``n`` cells
    per observation axis on ``obs_range``. The default observation range is
    the image of the state box under ``C`` widened by four observation-noise
    standard deviations, so that edge states keep their likelihood mass.
    """
    if inst.state_dim > 2:
        raise DomainError("grid comparison supports one- or two-dimensional states")
    if list(grid_sizes) != sorted(grid_sizes):
        raise DomainError("grid sizes must be increasing")
    system = inst.to_control_system()
    if trajectory is None:
        trajectory = simulate(system, policy or zero_policy(inst.action_dim), T_steps, seed)
    kal = kalman_filter(inst, trajectory.observations, trajectory.actions)
    kal_means = np.array([b.mean for b in kal])
    if obs_range is None:
        corners = np.array(list(np.ndindex(*(2,) * inst.state_dim)), dtype=float)
        box = state_range[0] + corners * (state_range[1] - state_range[0])
        img = box @ inst.C.T
        pad = 4.0 * np.sqrt(np.diag(inst.obs_cov)).max()
        obs_range = (float(img.min() - pad), float(img.max() + pad))
    action_grid, action_idx = np.unique(trajectory.actions, axis=0, return_inverse=True)
    action_idx = np.asarray(action_idx).reshape(-1)
    rows = []
    for n in grid_sizes:
        sg = Grid.uniform(state_range[0], state_range[1], [n] * inst.state_dim)
        og = Grid.uniform(obs_range[0], obs_range[1], [n] * inst.obs_dim)
        model = discretize(system, sg, og, action_grid)
        prior = discretize_prior(system.prior, sg)
        obs_idx = og.snap(trajectory.observations).tolist()
        beliefs = filter_beliefs(model, prior, obs_idx, action_idx.tolist())
        means = np.array(beliefs) @ sg.centers
        err = np.linalg.norm(means - kal_means, axis=1).max()
        rows.append({"grid": int(n), "cells": len(sg), "sup_mean_error": float(err)})
    return rows


def error_table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "cells", "sup_mean_error"])
    for r in rows:
        w.writerow([r["grid"], r["cells"], repr(r["sup_mean_error"])])
    return buf.getvalue()
