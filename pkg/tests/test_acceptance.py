"""The ten acceptance criteria, each at its stated tolerance and runtime budget.

Each test records one PASS/FAIL line, printed in the terminal summary (and
immediately, when run with ``-s``).
"""

import contextlib
import math
import time

import numpy as np

from beliefmdp import fixtures
from beliefmdp.belief import bayes_posterior, belief_kernel_q, joint_matrix, joint_R_row, obs_marginal
from beliefmdp.continuity import (
    equicontinuity_report,
    geometric_actions,
    geometric_beliefs,
    proof_term_decomposition,
    q_weak_continuity_report,
)
from beliefmdp.filtration import compare_filters
from beliefmdp.measures import FiniteMeasure, lp_distance, sup_set_discrepancy
from beliefmdp.solver import GridBellmanOperator, shift_costs, solve_finite_horizon, solve_infinite_horizon

import conftest
from oracles import brute_force_value, lp_exact, random_belief, random_masks, simulate_pairs, subsets


@contextlib.contextmanager
def criterion(number, title, budget_s):
    start = time.perf_counter()
    outcome = "FAIL"
    detail = ""
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"took {elapsed:.1f} s, budget {budget_s} s"
        outcome = "PASS"
        detail = f"{elapsed:.2f} s / {budget_s} s"
    except AssertionError as exc:
        detail = str(exc).splitlines()[0] if str(exc) else "assertion failed"
        raise
    finally:
        line = f"criterion {number:2d} {outcome}: {title} ({detail})"
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)


def test_criterion_01_reconstruction_identity():
    with criterion(1, "reconstruction identity, 100 models, all (B, C)", 10):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            nX, nY, nA = rng.integers(1, 7, size=3)
            model = fixtures.random_model(rng, nX, nY, nA, sparsity=0.3)
            z = random_belief(rng, nX)
            a = int(rng.integers(nA))
            IB, IC = subsets(nX).astype(float), subsets(nY).astype(float)
            R = IB @ joint_matrix(model, z, a) @ IC.T
            # right side: observation-wise posteriors weighted by R'(y), built from the branch set
            rp = obs_marginal(model, z, a)
            H = np.zeros((nX, nY))
            for br in belief_kernel_q(model, z, a):
                for y in br.observations:
                    H[:, y] = br.posterior
            recon = IB @ (H * rp) @ IC.T
            worst = max(worst, np.abs(R - recon).max())
            for y in np.nonzero(rp > 0)[0]:
                assert np.abs(bayes_posterior(model, z, a, int(y)) - H[:, y]).sum() < 1e-10
        assert worst <= 1e-12, f"max residual {worst:.3e}"


def test_criterion_02_filter_vs_monte_carlo():
    with criterion(2, "branch weights within 4 SE of 1e5 simulated draws on M1", 5):
        model = fixtures.m1()
        rng = np.random.default_rng(2)
        n = 100_000
        for z in ([0.5, 0.5], [0.8, 0.2], [0.1, 0.9]):
            z = np.array(z)
            for a in model.actions():
                xp, y = simulate_pairs(rng, z, model.transition(a), model.observation(a), n)
                for br in belief_kernel_q(model, z, a):
                    hit = np.isin(y, br.observations)
                    freq = hit.mean()
                    se = math.sqrt(br.weight * (1 - br.weight) / n)
                    assert abs(freq - br.weight) <= 4 * se, (z, a, freq, br.weight)
                    # and the posterior itself, on the draws that produced this branch
                    k = hit.sum()
                    emp = np.bincount(xp[hit], minlength=2) / k
                    se_post = np.sqrt(br.posterior * (1 - br.posterior) / k)
                    assert np.all(np.abs(emp - br.posterior) <= 4 * se_post + 1e-15)


def test_criterion_03_proof_bounds():
    with criterion(3, "term-wise proof bounds on 1000 random probes", 10):
        rng = np.random.default_rng(3)
        fams = [fixtures.smooth_family()] + [fixtures.random_family(rng, 3, 4) for _ in range(3)]
        worst = -math.inf
        for i in range(1000):
            fam = fams[i % len(fams)]
            nX, nY = fam.n_states, fam.n_obs
            z, zn = random_belief(rng, nX), random_belief(rng, nX)
            a, an = rng.random(2)
            B, C = random_masks(rng, nX), random_masks(rng, nY)
            t = proof_term_decomposition(fam, zn, an, z, a, B, C)
            worst = max(worst, t.I1 - t.bound1, t.I2 - t.bound2, t.difference - (t.I1 + t.I2 + t.I3))
            assert t.holds(1e-12), t
        assert worst <= 1e-12


def test_criterion_04_weak_continuity_fixtures():
    with criterion(4, "q weakly continuous on the positive fixture, not on the step fixture", 30):
        good, bad = fixtures.smooth_family(), fixtures.step_family()
        for z, w in (([0.5, 0.5], [0.5, 0.5]), ([0.7, 0.3], [0.2, 0.8])):
            z_seq = geometric_beliefs(z, w, 64)
            up = geometric_actions(0.5, 0.25, 1, 64)
            down = geometric_actions(0.5, 0.25, -1, 64)
            for a_seq in (up, down):
                rep = q_weak_continuity_report(good, z, 0.5, list(zip(z_seq, a_seq)))
                assert rep.moduli[-1] < 1e-6 and rep.verdict == "decaying", rep.summary()
            rep = q_weak_continuity_report(bad, z, 0.5, list(zip(z_seq, down)))
            assert rep.moduli.min() > 1e-2 and rep.verdict == "non-vanishing", rep.summary()


def test_criterion_05_equicontinuity_sup_vs_enumeration():
    with criterion(5, "equicontinuity sup equals subset enumeration, |Y| <= 12", 10):
        rng = np.random.default_rng(5)
        for i in range(100):
            nX = int(rng.integers(1, 5))
            nY = 12 if i % 4 == 0 else int(rng.integers(1, 13))
            fam = fixtures.random_family(rng, nX, nY)
            z, w = random_belief(rng, nX), random_belief(rng, nX)
            a = float(rng.random())
            B = random_masks(rng, nX)
            a_seq = [float(rng.random()) for _ in range(3)]
            rep = equicontinuity_report(fam, B, z, a, list(zip(geometric_beliefs(z, w, 3), a_seq)))
            base = joint_R_row(fam, z, a, B)
            C = subsets(nY)
            for zn, an, m in zip(geometric_beliefs(z, w, 3), a_seq, rep.moduli):
                d = joint_R_row(fam, zn, an, B) - base
                sums = [math.fsum(d[c]) for c in C]
                assert m == max(abs(s) for s in sums)
                # independent route: every set sum from the joint matrices directly
                Jn, J0 = joint_matrix(fam, zn, an)[B], joint_matrix(fam, z, a)[B]
                direct = np.abs(C.astype(float) @ (Jn.sum(axis=0) - J0.sum(axis=0))).max()
                assert abs(m - direct) <= 1e-12
                assert m == sup_set_discrepancy(joint_R_row(fam, zn, an, B), base)


def test_criterion_06_solver_vs_brute_force():
    with criterion(6, "finite horizon equals policy-tree enumeration on 50 models", 60):
        rng = np.random.default_rng(6)
        sizes = [(3, 3, 3, 3)] * 5
        while len(sizes) < 50:
            sizes.append(tuple(int(v) for v in rng.integers(1, 4, size=3)) + (int(rng.integers(0, 4)),))
        for nX, nY, nA, N in sizes:
            model = fixtures.random_model(rng, nX, nY, nA, alpha=float(rng.uniform(0.5, 1.0)), sparsity=0.2)
            p = random_belief(rng, nX)
            y0 = int(np.argmax(p @ model.Q0))
            got = solve_finite_horizon(model, p, y0, N).value
            want = brute_force_value(model.P, model.Q, model.Q0, model.cost, model.alpha, p, y0, N)
            assert abs(got - want) <= 1e-10, (nX, nY, nA, N, got, want)


def test_criterion_07_contraction_and_monotonicity():
    with criterion(7, "sweep contracts with modulus alpha; monotone under P", 30):
        rng = np.random.default_rng(7)
        for k in range(100):
            nX = int(rng.integers(2, 4))
            model = fixtures.random_model(rng, nX, int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                                          alpha=float(rng.uniform(0.1, 0.99)), cost_range=(-1, 1))
            op = GridBellmanOperator(model, 6)
            v = rng.normal(scale=5, size=len(op.grid))
            w = rng.normal(scale=5, size=len(op.grid))
            lhs = np.abs(op.apply(v)[0] - op.apply(w)[0]).max()
            rhs = model.alpha * np.abs(v - w).max()
            assert lhs <= rhs * (1 + 1e-12), (k, lhs, rhs)
        for alpha in (1.0, 0.95):
            for _ in range(3):
                model = fixtures.random_model(rng, 3, 2, 2, alpha=alpha, assumption="P")
                res = solve_infinite_horizon(model, 8, max_iter=100, keep_history=True)
                hist = np.array(res.history)
                assert alpha < 1 or len(hist) == 101
                assert np.all(np.diff(hist, axis=0) >= 0)


def test_criterion_08_cost_shift():
    with criterion(8, "shifted value equals v + K/(1 - alpha) with identical actions", 30):
        rng = np.random.default_rng(8)
        for _ in range(10):
            alpha = float(rng.uniform(0.5, 0.95))
            model = fixtures.random_model(rng, 3, 2, 3, alpha=alpha, cost_range=(-2, 1))
            K = -float(model.cost.min()) + float(rng.uniform(0, 1))
            shifted = shift_costs(model, K)
            v = solve_infinite_horizon(model, 10, tol=1e-11)
            vh = solve_infinite_horizon(shifted.model, 10, tol=1e-11)
            assert np.abs(vh.table.values - v.table.values - K / (1 - alpha)).max() <= 1e-9
            assert np.array_equal(vh.policy.actions, v.policy.actions)


def test_criterion_09_kalman_cross_validation():
    with criterion(9, "grid filter mean converges to the Kalman mean, 51/101/201", 60):
        rows = compare_filters(fixtures.kalman_1d(), 50, [51, 101, 201], seed=0)
        err = [r["sup_mean_error"] for r in rows]
        assert err[0] > err[1] > err[2], err
        assert err[2] < 0.02, err


def _lp_corpus(rng):
    pairs = []
    for i in range(50):
        dim = 1 if i % 2 else 2
        n, m = rng.integers(1, 7, size=2)
        xs = rng.random((n, dim)) * (0.5 if i % 5 == 0 else 2.0)
        ys = rng.random((m, dim)) * (0.5 if i % 5 == 0 else 2.0)
        if i % 7 == 0:
            ys = xs.copy()
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(len(ys)))
        pairs.append((xs, p, ys, q, "l1" if i % 3 == 0 else "euclidean"))
    return pairs


def test_criterion_10_lp_oracle():
    with criterion(10, "lp_distance matches exhaustive set verification on 50 pairs", 30):
        rng = np.random.default_rng(10)
        for xs, p, ys, q, kind in _lp_corpus(rng):
            mu, nu = FiniteMeasure(xs, p, kind), FiniteMeasure(ys, q, kind)
            got = lp_distance(mu, nu)
            want = lp_exact(xs, p, ys, q, kind)
            assert abs(got - want) <= 1e-6, (got, want)
