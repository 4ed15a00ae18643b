"""Finitely supported probability measures and the metrics used to compare them.

Two metrics matter here:

* the total variation (Radon) distance, normalized as a supremum over test
  functions bounded by one, so that mutually singular measures sit at distance 2
  (not 1, as in many texts). On a finite support the supremum over bounded
  continuous functions coincides with the supremum over all bounded measurable
  functions, and both equal the L1 distance between weight vectors;
* the Levy-Prokhorov distance, computed through Strassen's coupling
  characterization: ``rho_LP(mu, nu) <= eps`` iff a coupling leaves at most
  ``eps`` mass unmatched by pairs at ground distance ``< eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import networkx as nx
import numpy as np

from .errors import EvaluationError, SchemaError

MERGE_TOL = 1e-12
SUM_TOL = 1e-12
LP_TOL = 1e-9

METRICS = ("euclidean", "l1")


@dataclass(frozen=True)
class GroundMetric:
    """A metric on R^d, either Euclidean or L1."""

    kind: str = "euclidean"
    dim: int = 1

    def __post_init__(self):
        if self.kind not in METRICS:
            raise SchemaError(f"unknown ground metric {self.kind!r}; expected one of {METRICS}")
        if self.dim < 1:
            raise SchemaError("metric dimension must be positive")

    def pairwise(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Matrix of distances between the rows of ``xs`` and the rows of ``ys``."""
        diff = xs[:, None, :] - ys[None, :, :]
        if self.kind == "l1":
            return np.abs(diff).sum(axis=-1)
        return np.sqrt((diff * diff).sum(axis=-1))

    def __call__(self, x, y) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return float(self.pairwise(x[None, :], y[None, :])[0, 0])


class FiniteMeasure:
    """Probability measure with finite support in R^d.

    Support points closer than ``1e-12`` under the ground metric are merged on
    construction and their weights summed. Weights must be nonnegative and sum
    to one within ``1e-12``.

    Parameters
    ----------
    support : array_like
        Either a flat sequence of scalars (d = 1) or an ``(n, d)`` array.
    weights : array_like
        Nonnegative weights, one per support point.
    metric : str or GroundMetric
        ``"euclidean"`` or ``"l1"``.
    """

    __slots__ = ("support", "weights", "metric")

    def __init__(self, support, weights, metric="euclidean"):
        pts = np.asarray(support, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise SchemaError("support must be a list of points")
        w = np.asarray(weights, dtype=float).ravel()
        if len(w) != len(pts):
            raise SchemaError(f"support has {len(pts)} points but {len(w)} weights")
        if len(w) == 0:
            raise SchemaError("a probability measure needs at least one support point")
        if not np.all(np.isfinite(pts)):
            raise SchemaError("support points must be finite")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise SchemaError("weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > SUM_TOL:
            raise SchemaError(f"weights sum to {math.fsum(w)!r}, not 1")
        if not isinstance(metric, GroundMetric):
            metric = GroundMetric(metric, pts.shape[1])
        elif metric.dim != pts.shape[1]:
            raise SchemaError("metric dimension does not match support dimension")
        pts, w = _merge_close(pts, w, metric)
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "metric", metric)

    def __setattr__(self, name, value):
        raise AttributeError("FiniteMeasure is immutable")

    @classmethod
    def dirac(cls, point, metric="euclidean") -> "FiniteMeasure":
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(pt[None, :], [1.0], metric)

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        pts = self.support[:, 0] if self.dim == 1 else self.support
        return f"FiniteMeasure({pts.tolist()}, {self.weights.tolist()}, metric={self.metric.kind!r})"

    def __eq__(self, other):
        if not isinstance(other, FiniteMeasure):
            return NotImplemented
        return (
            self.metric == other.metric
            and self.support.shape == other.support.shape
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def to_record(self) -> dict:
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_record(cls, record: dict, metric="euclidean") -> "FiniteMeasure":
        try:
            return cls(record["support"], record["weights"], metric)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad measure record: {exc}") from exc

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        idx = rng.choice(len(self.weights), size=size, p=self.weights)
        pts = self.support[idx]
        return pts[..., 0] if self.dim == 1 else pts


def _merge_close(pts, w, metric):
    if len(w) == 1:
        return pts.copy(), w.copy()
    dist = metric.pairwise(pts, pts)
    keep = []
    owner = np.full(len(w), -1)
    for i in range(len(w)):
        if owner[i] >= 0:
            continue
        owner[i] = len(keep)
        close = np.nonzero((dist[i] < MERGE_TOL) & (owner < 0))[0]
        owner[close] = len(keep)
        keep.append(i)
    merged = np.zeros(len(keep))
    np.add.at(merged, owner, w)
    return pts[keep].copy(), merged


def _align(mu: FiniteMeasure, nu: FiniteMeasure):
    """Weight vectors of ``mu`` and ``nu`` over the union of their supports."""
    if mu.metric != nu.metric:
        raise SchemaError("measures live in different metric spaces")
    dist = mu.metric.pairwise(nu.support, mu.support)
    wmu = list(mu.weights)
    wnu = [0.0] * len(mu)
    for j in range(len(nu)):
        match = np.nonzero(dist[j] < MERGE_TOL)[0]
        if len(match):
            wnu[match[0]] += nu.weights[j]
        else:
            wmu.append(0.0)
            wnu.append(nu.weights[j])
    return np.array(wmu), np.array(wnu)


def integrate(f: Callable, mu: FiniteMeasure) -> float:
    """Return ``sum_i f(x_i) w_i``.

    ``f`` receives a float when the support is one-dimensional and a length-d
    array otherwise. A non-finite value at any support point raises
    :class:`EvaluationError`, even where the weight is zero.
    """
    vals = []
    for pt in mu.support:
        v = float(f(pt[0] if mu.dim == 1 else pt.copy()))
        if not math.isfinite(v):
            raise EvaluationError(f"integrand is {v} at support point {pt.tolist()}")
        vals.append(v)
    return math.fsum(v * w for v, w in zip(vals, mu.weights))


def tv_distance(mu: FiniteMeasure, nu: FiniteMeasure) -> float:
    """Total variation distance with range [0, 2]."""
    return tv_weights(*_align(mu, nu))


def tv_weights(p, q) -> float:
    """Total variation distance between weight vectors on a common index set."""
    return math.fsum(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))


def sup_set_discrepancy(mu: Sequence[float], nu: Sequence[float]) -> float:
    """``sup_C |mu(C) - nu(C)|`` for weight vectors on a common finite index set.

    The inputs may be signed or sub-probability measures. The supremum is
    attained at the positive (or negative) set of ``mu - nu``.
    """
    d = np.asarray(mu, dtype=float) - np.asarray(nu, dtype=float)
    if d.ndim != 1:
        raise SchemaError("expected weight vectors")
    return max(math.fsum(d[d > 0]), math.fsum(-d[d < 0]))


def strassen_coupling(mu: FiniteMeasure, nu: FiniteMeasure, eps: float, strict: bool = True):
    """Maximal partial coupling of ``mu`` and ``nu`` using only pairs at distance < eps.

    Returns ``(plan, unmatched)`` where ``plan[i, j]`` is the mass moved from
    ``mu.support[i]`` to ``nu.support[j]`` and ``unmatched = 1 - plan.sum()``.
    With ``strict=False`` pairs at distance exactly ``eps`` are also allowed.
    """
    dist = mu.metric.pairwise(mu.support, nu.support)
    allowed = dist < eps if strict else dist <= eps
    plan = np.zeros(dist.shape)
    if not allowed.any():
        return plan, 1.0
    g = nx.DiGraph()
    for i, w in enumerate(mu.weights):
        g.add_edge("s", ("m", i), capacity=float(w))
    for j, w in enumerate(nu.weights):
        g.add_edge(("n", j), "t", capacity=float(w))
    for i, j in zip(*np.nonzero(allowed)):
        g.add_edge(("m", int(i)), ("n", int(j)))
    value, flow = nx.maximum_flow(g, "s", "t")
    for i in range(len(mu)):
        for node, f in flow[("m", i)].items():
            plan[i, node[1]] = f
    return plan, max(0.0, 1.0 - value)


def lp_distance(mu: FiniteMeasure, nu: FiniteMeasure, tol: float = LP_TOL) -> float:
    """Levy-Prokhorov distance, accurate to ``tol``.

    Bisection over ``eps`` in [0, 1]; each step asks whether the maximal
    coupling restricted to pairs at ground distance ``< eps`` leaves at most
    ``eps`` mass unmatched. The returned value is the upper end of the final
    bracket, so it is always a feasible ``eps``.
    """
    if mu.metric != nu.metric:
        raise SchemaError("measures live in different metric spaces")
    if tv_distance(mu, nu) == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if strassen_coupling(mu, nu, mid)[1] <= mid:
            hi = mid
        else:
            lo = mid
    return hi
