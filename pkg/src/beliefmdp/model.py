"""Finite POMDP models, their validation, and parametric kernel families.

Array conventions
-----------------
``P[a, x, x']``  state transition law
``Q[a, x', y]``  observation kernel (observation emitted after landing in x')
``Q0[x, y]``     initial observation kernel
``cost[x, a]``   one-step cost; ``+inf`` is allowed, ``-inf`` is not
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, SchemaError

STOCH_TOL = 1e-12
RENORMALIZE_TOL = 1e-9
LINKS = ("linear", "smoothstep", "step")


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    index: tuple = ()

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "index": list(self.index)}


def _as_array(value, name, ndim):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{name} is not a numeric array: {exc}") from exc
    if arr.ndim != ndim:
        raise SchemaError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FinitePOMDP:
    """A POMDP with finite state, observation and action sets.

    Construction only checks shapes; call :func:`validate_model` for the
    stochasticity and cost invariants.
    """

    P: np.ndarray
    Q: np.ndarray
    Q0: np.ndarray
    cost: np.ndarray
    alpha: float
    assumption: str = "D"
    state_names: tuple = ()
    obs_names: tuple = ()
    action_names: tuple = ()
    prior: Optional[np.ndarray] = None

    def __post_init__(self):
        P = _as_array(self.P, "P", 3)
        Q = _as_array(self.Q, "Q", 3)
        Q0 = _as_array(self.Q0, "Q0", 2)
        cost = _as_array(self.cost, "cost", 2)
        nA, nX, nX2 = P.shape
        if nX != nX2:
            raise SchemaError(f"P must be [action][state][state], got shape {P.shape}")
        if Q.shape[:2] != (nA, nX):
            raise SchemaError(f"Q must have shape ({nA}, {nX}, |Y|), got {Q.shape}")
        nY = Q.shape[2]
        if Q0.shape != (nX, nY):
            raise SchemaError(f"Q0 must have shape ({nX}, {nY}), got {Q0.shape}")
        if cost.shape != (nX, nA):
            raise SchemaError(f"cost must have shape ({nX}, {nA}), got {cost.shape}")
        if min(nA, nX, nY) < 1:
            raise SchemaError("state, observation and action sets must be nonempty")
        if self.assumption not in ("D", "P"):
            raise SchemaError(f"assumption must be 'D' or 'P', got {self.assumption!r}")
        try:
            alpha = float(self.alpha)
        except (TypeError, ValueError) as exc:
            raise SchemaError("alpha must be a real number") from exc
        names = {}
        for attr, n, prefix in (("state_names", nX, "x"), ("obs_names", nY, "y"), ("action_names", nA, "a")):
            got = tuple(str(s) for s in getattr(self, attr))
            if not got:
                got = tuple(f"{prefix}{i}" for i in range(n))
            if len(got) != n:
                raise SchemaError(f"{attr} has {len(got)} entries, expected {n}")
            names[attr] = got
        prior = None
        if self.prior is not None:
            prior = _as_array(self.prior, "prior", 1)
            if prior.shape != (nX,):
                raise SchemaError(f"prior must have length {nX}")
        for key, val in dict(P=P, Q=Q, Q0=Q0, cost=cost, alpha=alpha, prior=prior, **names).items():
            object.__setattr__(self, key, val)

    @property
    def n_states(self) -> int:
        return self.P.shape[1]

    @property
    def n_obs(self) -> int:
        return self.Q.shape[2]

    @property
    def n_actions(self) -> int:
        return self.P.shape[0]

    def actions(self):
        return range(self.n_actions)

    def transition(self, a) -> np.ndarray:
        return self.P[a]

    def observation(self, a) -> np.ndarray:
        return self.Q[a]

    def cost_vector(self, a) -> np.ndarray:
        return self.cost[:, a]

    def replace(self, **changes) -> "FinitePOMDP":
        fields = dict(
            P=self.P, Q=self.Q, Q0=self.Q0, cost=self.cost, alpha=self.alpha,
            assumption=self.assumption, state_names=self.state_names,
            obs_names=self.obs_names, action_names=self.action_names, prior=self.prior,
        )
        fields.update(changes)
        return FinitePOMDP(**fields)

    def __eq__(self, other):
        if not isinstance(other, FinitePOMDP):
            return NotImplemented
        same_prior = (self.prior is None and other.prior is None) or (
            self.prior is not None and other.prior is not None and np.array_equal(self.prior, other.prior)
        )
        return (
            all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("P", "Q", "Q0", "cost"))
            and self.alpha == other.alpha
            and self.assumption == other.assumption
            and self.state_names == other.state_names
            and self.obs_names == other.obs_names
            and self.action_names == other.action_names
            and same_prior
        )

    __hash__ = None


def _row_violations(arr, name, index_names):
    out = []
    flat = arr.reshape(-1, arr.shape[-1])
    for k, row in enumerate(flat):
        idx = np.unravel_index(k, arr.shape[:-1])
        idx = tuple(int(i) for i in idx)
        label = ", ".join(f"{n}={i}" for n, i in zip(index_names, idx))
        if not np.all(np.isfinite(row)):
            out.append(Violation("non_finite_entry", f"{name} row ({label}) has non-finite entries", idx))
            continue
        if np.any(row < 0):
            out.append(Violation("negative_probability", f"{name} row ({label}) has negative entries", idx))
        s = math.fsum(row)
        if abs(s - 1.0) > STOCH_TOL:
            out.append(Violation("row_sum", f"{name} row ({label}) sums to {s!r}", idx))
    return out


def validate_model(model: FinitePOMDP) -> list:
    """Every violated invariant of ``model``, with index coordinates.

    An empty list means the model is valid.
    """
    if not isinstance(model, FinitePOMDP):
        raise SchemaError("validate_model expects a FinitePOMDP")
    report = []
    report += _row_violations(model.P, "P", ("a", "x"))
    report += _row_violations(model.Q, "Q", ("a", "x"))
    report += _row_violations(model.Q0, "Q0", ("x",))
    if model.prior is not None:
        report += _row_violations(model.prior[None, :], "prior", ())

    c = model.cost
    for x, a in zip(*np.nonzero(np.isnan(c))):
        report.append(Violation("nan_cost", f"cost(x={x}, a={a}) is NaN", (int(x), int(a))))
    for x, a in zip(*np.nonzero(np.isneginf(c))):
        report.append(Violation("unbounded_below_cost", f"cost(x={x}, a={a}) is -inf", (int(x), int(a))))
    for x in range(model.n_states):
        if np.all(np.isposinf(c[x])):
            report.append(Violation("no_finite_action", f"every action has +inf cost at state x={x}", (x,)))

    alpha = model.alpha
    if not math.isfinite(alpha) or alpha < 0:
        report.append(Violation("discount", f"alpha={alpha} must be a finite nonnegative number"))
    if model.assumption == "D":
        if not alpha < 1:
            report.append(Violation("discount", f"assumption D needs alpha in [0, 1), got {alpha}"))
    else:
        if not alpha <= 1:
            report.append(Violation("discount", f"assumption P needs alpha in [0, 1], got {alpha}"))
        for x, a in zip(*np.nonzero(c < 0)):
            if np.isfinite(c[x, a]):
                report.append(Violation("negative_cost", f"assumption P needs cost >= 0, cost(x={x}, a={a}) = {c[x, a]}", (int(x), int(a))))
    return report


@dataclass(frozen=True)
class CostAssumptions:
    holds_D: bool
    holds_P: bool
    K: float
    kinf_diagnostic: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"holds_D": self.holds_D, "holds_P": self.holds_P, "K": self.K, "kinf_diagnostic": self.kinf_diagnostic}


def cost_lower_bound(cost: np.ndarray) -> float:
    """Smallest cost entry, ignoring ``+inf`` (``-inf`` if any entry is ``-inf``)."""
    c = np.asarray(cost, dtype=float)
    if np.any(np.isneginf(c)):
        return -math.inf
    finite = c[np.isfinite(c)]
    return float(finite.min()) if finite.size else math.inf


def check_cost_assumptions(model: FinitePOMDP) -> CostAssumptions:
    """Which of Assumptions (D) and (P) the model satisfies, and the shift constant.

    ``K = max(0, -min c)`` is the constant making ``c + K`` nonnegative. On
    finite state and action sets the cost is automatically K-inf-compact:
    every function on a finite discrete space is lower semicontinuous and every
    action sequence takes some value infinitely often.
    """
    low = cost_lower_bound(model.cost)
    a = model.alpha
    holds_D = low > -math.inf and 0 <= a < 1
    holds_P = low >= 0 and 0 <= a <= 1
    K = max(0.0, -low)
    diag = {
        "status": "trivially_satisfied",
        "lower_semicontinuous": True,
        "action_sequences_accumulate": True,
        "reason": "finite state and action sets",
    }
    return CostAssumptions(holds_D=bool(holds_D), holds_P=bool(holds_P), K=K, kinf_diagnostic=diag)


@dataclass(frozen=True)
class CostDiagnostics:
    """Sampled check of the K-inf-compactness condition on one sequence pair.

    ``cost_bounded`` says whether ``c(x_n, a_n) <= level`` along the sample;
    ``accumulates`` whether the actions stay in a bounded region (and hence,
    in finite dimension, have a limit point). This is a heuristic, not a
    decision procedure.
    """

    K: float
    level: float
    x_seq: tuple
    a_seq: tuple
    cost_bounded: bool
    accumulates: bool

    @property
    def consistent(self) -> bool:
        return (not self.cost_bounded) or self.accumulates


def kinf_probe(cost: Callable, x_seq: Sequence, a_seq: Sequence, level: float = None, radius: float = 1e6) -> CostDiagnostics:
    """Probe condition (b) of K-inf-compactness along a sampled sequence."""
    if len(x_seq) != len(a_seq) or not len(x_seq):
        raise DomainError("x_seq and a_seq must be nonempty and of equal length")
    vals = np.array([float(cost(x, a)) for x, a in zip(x_seq, a_seq)])
    if level is None:
        level = float(np.max(vals[np.isfinite(vals)])) if np.any(np.isfinite(vals)) else math.inf
    acts = np.array([np.linalg.norm(np.atleast_1d(a)) for a in a_seq])
    accumulates = bool(np.all(np.isfinite(acts)) and acts.max() <= radius)
    low = float(np.min(vals)) if vals.size else 0.0
    return CostDiagnostics(
        K=max(0.0, -low), level=level, x_seq=tuple(x_seq), a_seq=tuple(a_seq),
        cost_bounded=bool(np.all(vals <= level)), accumulates=accumulates,
    )


# --- parametric kernel families -------------------------------------------------


def link_value(link: str, a: float) -> float:
    if link == "linear":
        return a
    if link == "smoothstep":
        return a * a * (3.0 - 2.0 * a)
    if link == "step":
        return 1.0 if a >= 0.5 else 0.0
    raise SchemaError(f"unknown link {link!r}; expected one of {LINKS}")


@dataclass(frozen=True, eq=False)
class ParametricKernelFamily:
    """The curve ``a -> (1 - g(a)) K0 + g(a) K1`` of stochastic matrices, ``a`` in [0, 1].

    The ``step`` link jumps at ``a = 0.5`` (``g(0.5) = 1``) and serves as a
    discontinuous counterexample.
    """

    K0: np.ndarray
    K1: np.ndarray
    link: str = "linear"

    def __post_init__(self):
        K0 = _as_array(self.K0, "K0", 2)
        K1 = _as_array(self.K1, "K1", 2)
        if K0.shape != K1.shape:
            raise SchemaError(f"K0 and K1 shapes differ: {K0.shape} vs {K1.shape}")
        if self.link not in LINKS:
            raise SchemaError(f"unknown link {self.link!r}; expected one of {LINKS}")
        for name, K in (("K0", K0), ("K1", K1)):
            if np.any(K < 0) or np.any(np.abs(K.sum(axis=1) - 1.0) > STOCH_TOL):
                raise SchemaError(f"{name} is not row-stochastic")
        object.__setattr__(self, "K0", K0)
        object.__setattr__(self, "K1", K1)

    @property
    def shape(self):
        return self.K0.shape

    def g(self, a: float) -> float:
        return link_value(self.link, a)

    def __call__(self, a: float) -> np.ndarray:
        return kernel_at(self, a)

    def to_record(self) -> dict:
        return {"K0": self.K0.tolist(), "K1": self.K1.tolist(), "link": self.link}

    @classmethod
    def from_record(cls, rec: dict) -> "ParametricKernelFamily":
        try:
            return cls(rec["K0"], rec["K1"], rec.get("link", "linear"))
        except (KeyError, TypeError, AttributeError) as exc:
            raise SchemaError(f"bad kernel family record: {exc}") from exc


def kernel_at(family: ParametricKernelFamily, a: float) -> np.ndarray:
    """The stochastic matrix of ``family`` at parameter ``a``."""
    a = float(a)
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"parameter a={a} outside [0, 1]")
    g = family.g(a)
    K = (1.0 - g) * family.K0 + g * family.K1
    if np.any(np.abs(K.sum(axis=1) - 1.0) > STOCH_TOL):
        raise AssertionError("convex combination lost stochasticity")
    return K


@dataclass(frozen=True, eq=False)
class ParametricPOMDP:
    """A POMDP whose action set is the interval [0, 1].

    ``P(.|x, a)`` is row ``x`` of ``transition_family(a)`` and ``Q(.|a, x')``
    is row ``x'`` of ``observation_family(a)``. It exposes the same
    ``transition``/``observation``/``cost_vector`` interface as
    :class:`FinitePOMDP`, so every belief operation accepts either.
    """

    transition_family: ParametricKernelFamily
    observation_family: ParametricKernelFamily
    Q0: Optional[np.ndarray] = None
    cost: Optional[Callable] = None

    def __post_init__(self):
        nX = self.transition_family.shape[0]
        if self.transition_family.shape != (nX, nX):
            raise SchemaError("transition family must be square")
        if self.observation_family.shape[0] != nX:
            raise SchemaError("observation family must have one row per state")
        if self.Q0 is not None:
            Q0 = _as_array(self.Q0, "Q0", 2)
            if Q0.shape != self.observation_family.shape:
                raise SchemaError("Q0 must have shape (|X|, |Y|)")
            object.__setattr__(self, "Q0", Q0)

    @property
    def n_states(self) -> int:
        return self.transition_family.shape[0]

    @property
    def n_obs(self) -> int:
        return self.observation_family.shape[1]

    def transition(self, a) -> np.ndarray:
        return kernel_at(self.transition_family, a)

    def observation(self, a) -> np.ndarray:
        return kernel_at(self.observation_family, a)

    def cost_vector(self, a) -> np.ndarray:
        if self.cost is None:
            raise DomainError("this parametric model has no cost function")
        return np.array([float(self.cost(x, a)) for x in range(self.n_states)])

    def to_record(self) -> dict:
        rec = {"P": self.transition_family.to_record(), "Q": self.observation_family.to_record()}
        if self.Q0 is not None:
            rec["Q0"] = self.Q0.tolist()
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ParametricPOMDP":
        if not isinstance(rec, dict) or "P" not in rec or "Q" not in rec:
            raise SchemaError("parametric model needs 'P' and 'Q' family records")
        return cls(
            ParametricKernelFamily.from_record(rec["P"]),
            ParametricKernelFamily.from_record(rec["Q"]),
            rec.get("Q0"),
        )


# --- model files ------------------------------------------------------------------


def _encode_cost(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _decode_cost(v):
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError as exc:
            raise SchemaError(f"bad cost entry {v!r}") from exc
    if isinstance(v, list):
        return [_decode_cost(u) for u in v]
    if v is None or isinstance(v, bool):
        raise SchemaError(f"bad cost entry {v!r}")
    return v


def _renormalize(arr: np.ndarray, name: str) -> np.ndarray:
    sums = arr.sum(axis=-1, keepdims=True)
    off = np.abs(sums - 1.0)
    fix = (off > STOCH_TOL) & (off <= RENORMALIZE_TOL) & np.all(arr >= 0, axis=-1, keepdims=True)
    if not fix.any():
        return arr
    warnings.warn(f"{name}: renormalized {int(fix.sum())} row(s) off by at most {RENORMALIZE_TOL}", stacklevel=3)
    return np.where(fix, arr / sums, arr)


def _names(value, key):
    if value is None:
        return ()
    if isinstance(value, int) and not isinstance(value, bool):
        return ()
    if isinstance(value, list):
        return tuple(str(v) for v in value)
    raise SchemaError(f"{key} must be a list of names or a count")


def model_from_dict(doc: dict) -> FinitePOMDP:
    """Build a model from the JSON document layout."""
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    missing = [k for k in ("P", "Q", "Q0", "cost", "alpha") if k not in doc]
    if missing:
        raise SchemaError(f"model document is missing {missing}")
    P = _renormalize(np.array(doc["P"], dtype=float), "P") if _is_numeric(doc["P"]) else doc["P"]
    Q = _renormalize(np.array(doc["Q"], dtype=float), "Q") if _is_numeric(doc["Q"]) else doc["Q"]
    Q0 = _renormalize(np.array(doc["Q0"], dtype=float), "Q0") if _is_numeric(doc["Q0"]) else doc["Q0"]
    prior = doc.get("prior")
    if prior is not None and _is_numeric(prior):
        prior = _renormalize(np.array(prior, dtype=float), "prior")
    model = FinitePOMDP(
        P=P, Q=Q, Q0=Q0, cost=_decode_cost(doc["cost"]), alpha=doc["alpha"],
        assumption=doc.get("assumption", "D"),
        state_names=_names(doc.get("states"), "states"),
        obs_names=_names(doc.get("observations"), "observations"),
        action_names=_names(doc.get("actions"), "actions"),
        prior=prior,
    )
    for key, n in (("states", model.n_states), ("observations", model.n_obs), ("actions", model.n_actions)):
        v = doc.get(key)
        if isinstance(v, int) and not isinstance(v, bool) and v != n:
            raise SchemaError(f"{key} says {v} but arrays imply {n}")
    return model


def _is_numeric(value) -> bool:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        return False
    return arr.dtype != object


def model_to_dict(model: FinitePOMDP) -> dict:
    doc = {
        "states": list(model.state_names),
        "observations": list(model.obs_names),
        "actions": list(model.action_names),
        "P": model.P.tolist(),
        "Q": model.Q.tolist(),
        "Q0": model.Q0.tolist(),
        "cost": [[_encode_cost(v) for v in row] for row in model.cost.tolist()],
        "alpha": model.alpha,
        "assumption": model.assumption,
    }
    if model.prior is not None:
        doc["prior"] = model.prior.tolist()
    return doc


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc


def load_model(path) -> FinitePOMDP:
    return model_from_dict(load_json(path))


def save_model(model: FinitePOMDP, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))


def load_family(path):
    """Load either a single kernel family ``{K0, K1, link}`` or a parametric model ``{P, Q}``."""
    doc = load_json(path)
    if isinstance(doc, dict) and "K0" in doc:
        return ParametricKernelFamily.from_record(doc)
    return ParametricPOMDP.from_record(doc)
