"""``beliefmdp`` command-line interface.

Subcommands: ``validate``, ``filter``, ``solve``, ``diagnose``, ``demo-kalman``.
Structured output is JSON on stdout; numeric tables are CSV. Exit codes are
0 for success, 1 for domain errors and 2 for usage or schema errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fixtures
from .belief import filter_beliefs, initial_belief, trajectory_csv
from .continuity import (
    HORIZON,
    TOLERANCE,
    ContinuityReport,
    classify,
    equicontinuity_report,
    geometric_actions,
    geometric_beliefs,
    proof_term_decomposition,
    q_weak_continuity_report,
    tv_modulus_kernel,
)
from .errors import BeliefMDPError, DomainError, SchemaError
from .filtration import LinearGaussianInstance, compare_filters, error_table_csv
from .model import ParametricKernelFamily, ParametricPOMDP, load_family, load_model, validate_model
from .solver import (
    policy_tree_csv,
    solve_finite_horizon,
    solve_infinite_horizon,
    value_table_csv,
)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
SEED_MAX = 2**64 - 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SchemaError(f"{self.prog}: {message}")


# --- argument types -------------------------------------------------------------------


def _seed(text: str) -> int:
    try:
        s = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed {text!r} is not an integer") from None
    if not 0 <= s <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 0:
        raise argparse.ArgumentTypeError("value must be nonnegative")
    return v


def _resolution(text: str) -> int:
    """Grid resolution as a cell count ``m`` or a spacing ``1/m`` (``"1/200"`` or ``"0.005"``)."""
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad grid resolution {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("grid resolution must be positive")
    m = 1 / v if v < 1 else v
    if m.denominator != 1:
        m = Fraction(round(m))
    return int(m)


def _int_list(text: str) -> list:
    if text.strip() == "":
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated list of integers") from None


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated list of numbers") from None


def _grids(text: str) -> list:
    sizes = _int_list(text)
    if not sizes or min(sizes) < 2:
        raise argparse.ArgumentTypeError("grid sizes must be integers >= 2")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beliefmdp", description="Belief-MDP reduction, solvers and continuity diagnostics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model file and print a JSON report")
    v.add_argument("--model", required=True)

    f = sub.add_parser("filter", help="belief trajectory for an observation/action history")
    f.add_argument("--model", required=True)
    f.add_argument("--observations", type=_int_list, required=True, help="y0,y1,... (indices)")
    f.add_argument("--actions", type=_int_list, default=[], help="a0,a1,... (one fewer than observations)")
    f.add_argument("--prior", type=_float_list, help="prior over states; defaults to the model's prior or uniform")
    f.add_argument("--out")

    s = sub.add_parser("solve", help="finite- or infinite-horizon optimal cost")
    s.add_argument("--model", required=True)
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--horizon", type=_nonneg_int)
    mode.add_argument("--infinite", action="store_true")
    s.add_argument("--grid", type=_resolution, help="simplex grid resolution: m, 1/m or a spacing below 1")
    s.add_argument("--tol", type=_positive_float, default=1e-6)
    s.add_argument("--max-iter", type=_nonneg_int, default=100_000)
    s.add_argument("--prior", type=_float_list)
    s.add_argument("--y0", type=_nonneg_int, default=0)
    s.add_argument("--out")

    d = sub.add_parser("diagnose", help="continuity probes on a parametric family")
    d.add_argument("--model", required=True, help="kernel family or parametric model JSON")
    d.add_argument("--probes", required=True, help="probe specification JSON")
    d.add_argument("--tol", type=_positive_float, default=TOLERANCE)
    d.add_argument("--out")

    k = sub.add_parser("demo-kalman", help="grid filter vs Kalman filter error table")
    k.add_argument("--grids", type=_grids, default=[51, 101, 201])
    k.add_argument("--steps", type=_nonneg_int, default=50)
    k.add_argument("--seed", type=_seed, default=0)
    k.add_argument("--model", help="linear-Gaussian instance JSON; defaults to the bundled instance")
    k.add_argument("--zero-noise", action="store_true", help="use the noiseless variant")
    k.add_argument("--out")
    return p


# --- output helpers ---------------------------------------------------------------------


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True)


def _outdir(path):
    if path is None:
        return None
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SchemaError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _emit_csv(text: str, out, name: str, stdout) -> None:
    if out is None:
        stdout.write(text)
    else:
        (out / name).write_text(text)


def _prior(model, values):
    if values is not None:
        return np.asarray(values, dtype=float)
    if model.prior is not None:
        return model.prior
    return np.full(model.n_states, 1.0 / model.n_states)


def _require_valid(model):
    report = validate_model(model)
    if report:
        raise DomainError("model is invalid: " + "; ".join(v.message for v in report))


# --- commands ---------------------------------------------------------------------------


def cmd_validate(args, stdout) -> int:
    model = load_model(args.model)
    report = validate_model(model)
    stdout.write(_json({"valid": not report, "violations": [v.to_dict() for v in report]}) + "\n")
    return EXIT_OK if not report else EXIT_DOMAIN


def cmd_filter(args, stdout) -> int:
    model = load_model(args.model)
    _require_valid(model)
    beliefs = filter_beliefs(model, _prior(model, args.prior), args.observations, args.actions)
    text = trajectory_csv(beliefs, args.observations, args.actions, model.state_names)
    _emit_csv(text, _outdir(args.out), "beliefs.csv", stdout)
    return EXIT_OK


def cmd_solve(args, stdout) -> int:
    model = load_model(args.model)
    _require_valid(model)
    out = _outdir(args.out)
    prior = _prior(model, args.prior)
    if args.infinite:
        if args.grid is None:
            raise SchemaError("--infinite needs --grid")
        res = solve_infinite_horizon(model, args.grid, tol=args.tol, max_iter=args.max_iter)
        z0 = initial_belief(model, prior, args.y0)
        i = res.table.locate(z0, projection="nearest")
        summary = {"mode": "infinite", "alpha": model.alpha, "assumption": model.assumption, **res.summary()}
        summary.update(root_belief=z0.tolist(), root_node=res.table.beliefs[i].tolist(),
                       root_value=float(res.table.values[i]), root_action=int(res.policy.actions[i]))
        if out is not None:
            (out / "value_table.csv").write_text(value_table_csv(res, model.state_names))
    else:
        res = solve_finite_horizon(model, prior, args.y0, args.horizon)
        summary = {"mode": "finite", "horizon": args.horizon, "alpha": model.alpha, "nodes": res.nodes,
                   "root_belief": res.root.belief.tolist(), "root_value": float(res.value),
                   "root_action": res.root.action, "iterations": args.horizon,
                   "stopping_criterion": f"exact backward induction over {args.horizon} steps"}
        if out is not None:
            (out / "policy_tree.csv").write_text(policy_tree_csv(res.root, model.state_names))
    text = _json(summary) + "\n"
    if out is not None:
        (out / "summary.json").write_text(text)
    stdout.write(text)
    return EXIT_OK


def cmd_diagnose(args, stdout) -> int:
    family = load_family(args.model)
    spec = _load_probes(args.probes)
    out = _outdir(args.out)
    summaries = []
    for i, probe in enumerate(spec):
        try:
            report = run_probe(family, probe, args.tol)
        except (KeyError, TypeError, IndexError) as exc:
            raise SchemaError(f"probe {i}: bad field {exc}") from None
        summaries.append(report.summary())
        if out is not None:
            (out / f"probe_{i:03d}_{report.probe['kind']}.csv").write_text(report.to_csv())
    text = _json({"probes": summaries}) + "\n"
    if out is not None:
        (out / "verdicts.json").write_text(text)
    stdout.write(text)
    return EXIT_OK


def cmd_demo_kalman(args, stdout) -> int:
    if args.model:
        inst = LinearGaussianInstance.load(args.model)
    else:
        inst = fixtures.kalman_1d_noiseless() if args.zero_noise else fixtures.kalman_1d()
    rows = compare_filters(inst, args.steps, args.grids, args.seed)
    _emit_csv(error_table_csv(rows), _outdir(args.out), "kalman_errors.csv", stdout)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "filter": cmd_filter,
    "solve": cmd_solve,
    "diagnose": cmd_diagnose,
    "demo-kalman": cmd_demo_kalman,
}


# --- probe specs ------------------------------------------------------------------------

PROBE_KINDS = ("tv_modulus", "equicontinuity", "q_weak", "proof_terms")


def _load_probes(path) -> list:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict):
        doc = doc.get("probes")
    if not isinstance(doc, list) or not doc:
        raise SchemaError("probe spec must be a nonempty list (or an object with a 'probes' list)")
    for i, p in enumerate(doc):
        if not isinstance(p, dict) or p.get("kind") not in PROBE_KINDS:
            raise SchemaError(f"probe {i}: 'kind' must be one of {PROBE_KINDS}")
        if "a" not in p:
            raise SchemaError(f"probe {i}: missing limit action 'a'")
    return doc


def _action_sequence(p) -> np.ndarray:
    """Explicit ``a_seq`` or a geometric sequence; ``r = 0`` gives the identity probe."""
    if "a_seq" in p:
        seq = np.asarray(p["a_seq"], dtype=float)
        if seq.ndim != 1 or seq.size == 0:
            raise SchemaError("a_seq must be a nonempty list of numbers")
        return seq
    return geometric_actions(float(p["a"]), float(p.get("r", 0.25)), int(p.get("direction", 1)), int(p.get("horizon", HORIZON)))


def _as_model(family, p):
    if isinstance(family, ParametricPOMDP):
        return family
    raise SchemaError(f"probe kind {p['kind']!r} needs a parametric model file with 'P' and 'Q'")


def run_probe(family, p: dict, tol: float = TOLERANCE) -> ContinuityReport:
    """Evaluate one probe specification against a kernel family or parametric model."""
    kind = p["kind"]
    a = float(p["a"])
    a_seq = _action_sequence(p)
    if kind == "tv_modulus":
        fam = family
        if isinstance(family, ParametricPOMDP):
            fam = family.observation_family if p.get("kernel", "P") == "Q" else family.transition_family
        if not isinstance(fam, ParametricKernelFamily):
            raise SchemaError("tv_modulus needs a kernel family")
        return tv_modulus_kernel(fam, int(p.get("x", 0)), a, a_seq, tol)
    model = _as_model(family, p)
    z = np.asarray(p.get("z", np.full(model.n_states, 1.0 / model.n_states)), dtype=float)
    z_seq = geometric_beliefs(z, p["w"], len(a_seq)) if "w" in p else np.tile(z, (len(a_seq), 1))
    probes = list(zip(z_seq, a_seq))
    if kind == "equicontinuity":
        return equicontinuity_report(model, p.get("B"), z, a, probes, tol)
    if kind == "q_weak":
        return q_weak_continuity_report(model, z, a, probes, tol)
    # proof_terms: the modulus is the left-hand difference; the verdict also records whether the bounds held
    terms = [proof_term_decomposition(model, zn, an, z, a, p.get("B"), p.get("C")) for zn, an in probes]
    moduli = np.array([t.difference for t in terms])
    probe = {"kind": "proof_terms", "a": a, "z": z.tolist(), "bounds_hold": all(t.holds() for t in terms),
             "max_I1": max(t.I1 for t in terms), "max_I2": max(t.I2 for t in terms), "max_I3": max(t.I3 for t in terms)}
    return ContinuityReport(probe, moduli, classify(moduli, tol), tol, len(moduli))


# --- entry point ------------------------------------------------------------------------


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, stdout)
    except SchemaError as exc:
        stderr.write(_json({"error": "schema", "message": str(exc)}) + "\n")
        return EXIT_USAGE
    except DomainError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "step", None) is not None:
            err["step"] = exc.step
        stderr.write(_json(err) + "\n")
        return EXIT_DOMAIN
    except BeliefMDPError as exc:
        stderr.write(_json({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
