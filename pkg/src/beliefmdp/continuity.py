"""Numeric probes of kernel continuity along convergent sequences.

A probe fixes a limit point ``(z, a)`` and a sequence ``(z_n, a_n)`` converging
to it, evaluates a distance ("modulus") at every term, and classifies the
sequence of moduli:

``decaying``
    final modulus below ``tolerance`` and nothing above ``2 * tolerance`` in
    the final third;
``non-vanishing``
    every modulus in the final third is at least ``10 * tolerance``;
``inconclusive``
    anything else.

Belief sequences converge in total variation, which on a finite state space
implies weak convergence. The next-belief laws ``q(. | z, a)`` are compared in
the Levy-Prokhorov metric with L1 as ground metric on the simplex.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .belief import _mask, as_belief, belief_kernel_q, joint_R, joint_R_row, predict
from .errors import DomainError
from .measures import lp_distance, sup_set_discrepancy, tv_weights
from .model import ParametricKernelFamily, kernel_at

TOLERANCE = 1e-6
HORIZON = 64

VERDICTS = ("decaying", "non-vanishing", "inconclusive")


@dataclass
class ContinuityReport:
    probe: dict
    moduli: np.ndarray
    verdict: str
    tolerance: float = TOLERANCE
    horizon: int = HORIZON

    def summary(self) -> dict:
        return {
            "probe": self.probe,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "horizon": self.horizon,
            "final_modulus": float(self.moduli[-1]) if len(self.moduli) else None,
            "max_modulus": float(self.moduli.max()) if len(self.moduli) else None,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "modulus"])
        for n, m in enumerate(self.moduli, start=1):
            w.writerow([n, repr(float(m))])
        return buf.getvalue()


def classify(moduli, tolerance: float = TOLERANCE) -> str:
    m = np.asarray(moduli, dtype=float)
    if m.size == 0:
        return "inconclusive"
    tail = m[len(m) - max(1, len(m) // 3):]
    if m[-1] < tolerance and tail.max() < 2 * tolerance:
        return "decaying"
    if tail.min() >= 10 * tolerance:
        return "non-vanishing"
    return "inconclusive"


def _report(probe, moduli, tolerance):
    moduli = np.asarray(moduli, dtype=float)
    return ContinuityReport(probe, moduli, classify(moduli, tolerance), tolerance, len(moduli))


# --- sequences ---------------------------------------------------------------------


def geometric_actions(a: float, r: float = 0.25, direction: int = 1, horizon: int = HORIZON) -> np.ndarray:
    """``a_n = a + direction * r * 2**-n`` for ``n = 1..horizon``.

    Once ``r * 2**-n`` drops below the float spacing at ``a`` the sum rounds
    to ``a`` itself; those terms are replaced by the neighbouring float on the
    requested side, so a one-sided probe never lands on its limit. ``r = 0``
    gives the constant (identity) sequence.
    """
    if direction not in (-1, 1):
        raise DomainError("direction must be +1 or -1")
    n = np.arange(1, horizon + 1)
    seq = a + direction * r * np.exp2(-n)
    if r > 0:
        seq[seq == a] = np.nextafter(a, a + direction)
    if seq.min() < 0 or seq.max() > 1:
        raise DomainError("geometric sequence leaves [0, 1]; shrink r or flip direction")
    return seq


def geometric_beliefs(z, w, horizon: int = HORIZON) -> np.ndarray:
    """``z_n = (1 - 2**-n) z + 2**-n w``: a belief sequence converging to ``z`` in total variation."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    t = np.exp2(-np.arange(1, horizon + 1))[:, None]
    seq = (1 - t) * z + t * w
    return seq / seq.sum(axis=1, keepdims=True)


# --- probes -------------------------------------------------------------------------


def tv_modulus_kernel(family: ParametricKernelFamily, x: int, a: float, a_seq, tolerance: float = TOLERANCE) -> ContinuityReport:
    """``rho_TV(K(a_n)[x], K(a)[x])`` along ``a_seq``."""
    row = kernel_at(family, a)[x]
    moduli = [tv_weights(kernel_at(family, an)[x], row) for an in a_seq]
    probe = {"kind": "tv_modulus", "row": int(x), "a": float(a), "link": family.link}
    return _report(probe, moduli, tolerance)


def equicontinuity_report(model, B, z, a, probes, tolerance: float = TOLERANCE) -> ContinuityReport:
    """``sup_C |R(B x C | z_n, a_n) - R(B x C | z, a)|`` along ``probes = [(z_n, a_n), ...]``."""
    base = joint_R_row(model, z, a, B)
    moduli = [sup_set_discrepancy(joint_R_row(model, zn, an, B), base) for zn, an in probes]
    b = np.nonzero(_mask(B, model.n_states))[0].tolist()
    probe = {"kind": "equicontinuity", "B": b, "z": np.asarray(z, float).tolist(), "a": _jsonable(a)}
    return _report(probe, moduli, tolerance)


def base_sets(n_states: int, max_size: int = None):
    """Nonempty state sets of size at most ``max_size``.

    On a finite state space every set is open, so singletons form a countable
    base and its finite unions are all sets of bounded size.
    """
    max_size = n_states if max_size is None else min(max_size, n_states)
    for k in range(1, max_size + 1):
        yield from itertools.combinations(range(n_states), k)


def equicontinuity_over_base(model, z, a, probes, max_size: int = None, tolerance: float = TOLERANCE) -> dict:
    """One :func:`equicontinuity_report` per base set ``B``."""
    return {B: equicontinuity_report(model, list(B), z, a, probes, tolerance) for B in base_sets(model.n_states, max_size)}


def q_weak_continuity_report(model, z, a, probes, tolerance: float = TOLERANCE, lp_tol: float = 1e-9) -> ContinuityReport:
    """``rho_LP(q(. | z_n, a_n), q(. | z, a))`` along ``probes``."""
    target = belief_kernel_q(model, z, a).as_measure()
    moduli = [lp_distance(belief_kernel_q(model, zn, an).as_measure(), target, lp_tol) for zn, an in probes]
    probe = {"kind": "q_weak", "z": np.asarray(z, float).tolist(), "a": _jsonable(a)}
    return _report(probe, moduli, tolerance)


# --- proof-term decomposition ----------------------------------------------------------


@dataclass(frozen=True)
class ProofTerms:
    """The three swap terms bounding ``|R(B x C | z_n, a_n) - R(B x C | z, a)|``.

    ``I1`` swaps the transition action, ``I2`` the observation action and
    ``I3`` the belief. ``bound1`` and ``bound2`` are the total-variation
    integrals dominating ``I1`` and ``I2``.
    """

    I1: float
    I2: float
    I3: float
    bound1: float
    bound2: float
    difference: float
    slack: dict = field(default_factory=dict)

    def holds(self, tol: float = 1e-12) -> bool:
        return (
            self.I1 <= self.bound1 + tol
            and self.I2 <= self.bound2 + tol
            and self.difference <= self.I1 + self.I2 + self.I3 + tol
        )


def _swap_term(model, z, a_trans, a_obs, b, c) -> float:
    P = model.transition(a_trans)
    Q = model.observation(a_obs)
    inner = (P[:, b] * Q[b][:, c].sum(axis=1)).sum(axis=1)
    return float(np.dot(z, inner))


def proof_term_decomposition(model, z_n, a_n, z, a, B, C) -> ProofTerms:
    z_n = as_belief(z_n, model.n_states)
    z = as_belief(z, model.n_states)
    b = _mask(B, model.n_states)
    c = _mask(C, model.n_obs)
    f_nn = _swap_term(model, z_n, a_n, a_n, b, c)
    f_n0 = _swap_term(model, z_n, a, a_n, b, c)
    f_00n = _swap_term(model, z_n, a, a, b, c)
    f_000 = _swap_term(model, z, a, a, b, c)
    I1 = abs(f_nn - f_n0)
    I2 = abs(f_n0 - f_00n)
    I3 = abs(f_00n - f_000)
    Pn, P0 = model.transition(a_n), model.transition(a)
    bound1 = float(sum(z_n[x] * tv_weights(Pn[x], P0[x]) for x in range(model.n_states)))
    mu_n = predict(model, z_n, a)
    Qn, Q0 = model.observation(a_n), model.observation(a)
    bound2 = float(sum(mu_n[s] * tv_weights(Qn[s], Q0[s]) for s in range(model.n_states)))
    diff = abs(joint_R(model, z_n, a_n, b, c) - joint_R(model, z, a, b, c))
    return ProofTerms(I1, I2, I3, bound1, bound2, diff)


def _jsonable(a):
    return a.item() if isinstance(a, np.generic) else a
