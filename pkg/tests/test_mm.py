import numpy as np
import pytest

from hypermarg import Box, build_psi, deblur_problem, tomo_problem
from hypermarg.mm import (
    InnerResult,
    build_surrogate,
    exact_surrogate,
    exact_surrogate_grad,
    m3c_optimize,
    mm_optimize_exact,
    projected_gradient_min,
)
from hypermarg.objective import eval_F_exact, grad_fd
from hypermarg.operators import NumericalError, dense_logdet
from hypermarg.probes import canonical_probes, rademacher_probes

from test_objective import noise_only_problem, relerr


class TestExactSurrogate:
    @pytest.mark.parametrize(
        "make",
        [
            lambda: deblur_problem(s=6, seed=1),
            lambda: tomo_problem(s=6, n_src=5, n_rec=6, seed=1),
        ],
        ids=["deblur", "tomo"],
    )
    def test_tangent_at_anchor(self, make):
        problem = make()
        theta_t = problem.theta_true
        g = exact_surrogate(problem, theta_t, theta_t)
        f = eval_F_exact(problem, theta_t).value
        assert abs(g - f) < 1e-10 * max(1.0, abs(f))

    @pytest.mark.parametrize(
        "make",
        [
            lambda: deblur_problem(s=6, seed=1),
            lambda: tomo_problem(s=6, n_src=5, n_rec=6, seed=1),
        ],
        ids=["deblur", "tomo"],
    )
    def test_dominates_objective(self, make):
        problem = make()
        rng = np.random.default_rng(42)
        for _ in range(3):
            theta_t = problem.box.sample_interior(rng)
            for _ in range(50):
                theta = problem.box.sample_interior(rng)
                g = exact_surrogate(problem, theta, theta_t)
                f = eval_F_exact(problem, theta).value
                assert g >= f - 1e-9 * max(1.0, abs(f))

    def test_scaled_anchor_gap_closed_form(self):
        # With Psi(theta) = theta_1 I the anchor at 1 gives
        # G - F = (m/2) (c - 1 - ln c) at theta_1 = c.
        problem = noise_only_problem(np.zeros(7))
        theta_t = np.array([1.0])
        for c in (0.3, 0.9, 1.0, 2.5):
            g = exact_surrogate(problem, np.array([c]), theta_t)
            f = eval_F_exact(problem, np.array([c])).value
            expected = 3.5 * (c - 1.0 - np.log(c))
            assert abs((g - f) - expected) < 1e-12

    def test_gradient_matches_finite_differences(self):
        problem = tomo_problem(s=6, n_src=5, n_rec=6, seed=3)
        theta_t = problem.theta_true
        theta = problem.box.project(1.15 * theta_t)
        g = exact_surrogate_grad(problem, theta, theta_t)
        g_fd = grad_fd(
            lambda th: exact_surrogate(problem, th, theta_t),
            theta,
            problem.box,
            eps_rel=1e-6,
            scheme="central",
        )
        assert relerr(g_fd, g) < 1e-5


class TestStochasticSurrogate:
    def test_canonical_probes_reproduce_exact_surrogate_gradient(self):
        problem = tomo_problem(s=6, n_src=5, n_rec=6, seed=5)
        theta_t = problem.theta_true
        theta = problem.box.project(1.2 * theta_t)
        surrogate = build_surrogate(
            problem, theta_t, canonical_probes(problem.m), pcg_tol=1e-13
        )
        g_hat = surrogate.gradient(theta)
        g = exact_surrogate_grad(problem, theta, theta_t)
        assert relerr(g_hat, g) < 1e-7

    def test_canonical_probes_reproduce_exact_surrogate_value(self):
        # Up to the anchor constant (logdet Psi_t - m)/2, which the sampled
        # surrogate deliberately omits.
        problem = tomo_problem(s=6, n_src=5, n_rec=6, seed=5)
        theta_t = problem.theta_true
        theta = problem.box.project(0.8 * theta_t)
        surrogate = build_surrogate(
            problem, theta_t, canonical_probes(problem.m), pcg_tol=1e-13
        )
        shift = 0.5 * (dense_logdet(build_psi(problem, theta_t).dense()) - problem.m)
        g_hat = surrogate.value(theta) + shift
        g = exact_surrogate(problem, theta, theta_t)
        assert abs(g_hat - g) < 1e-7 * max(1.0, abs(g))

    def test_unbiased_over_probe_draws(self):
        problem = tomo_problem(s=4, n_src=3, n_rec=5, seed=7)
        theta_t = problem.theta_true
        theta = problem.box.project(1.3 * theta_t)
        shift = 0.5 * (dense_logdet(build_psi(problem, theta_t).dense()) - problem.m)
        target = exact_surrogate(problem, theta, theta_t)
        values = []
        for seed in range(150):
            probes = rademacher_probes(problem.m, 32, seed)
            surrogate = build_surrogate(problem, theta_t, probes, pcg_tol=1e-11)
            values.append(surrogate.value(theta) + shift)
        values = np.array(values)
        se = values.std(ddof=1) / np.sqrt(values.size)
        assert abs(values.mean() - target) < 5.0 * se + 1e-9

    def test_gradient_matches_finite_differences(self):
        problem = deblur_problem(s=6, seed=2)
        theta_t = problem.theta_true
        theta = problem.box.project(
            theta_t + np.array([0.2 * theta_t[0], 0.1, 0.05, 0.05, -0.05])
        )
        probes = rademacher_probes(problem.m, 8, seed=3)
        surrogate = build_surrogate(problem, theta_t, probes, pcg_tol=1e-12)
        g = surrogate.gradient(theta)
        g_fd = grad_fd(
            surrogate.value, theta, problem.box, eps_rel=1e-6, scheme="central"
        )
        assert relerr(g_fd, g) < 1e-5

    def test_anchor_solve_failure_is_hard_error(self):
        problem = tomo_problem(s=6, n_src=5, n_rec=6, seed=1)
        probes = rademacher_probes(problem.m, 2, seed=0)
        with pytest.raises(NumericalError, match="anchor solve"):
            build_surrogate(
                problem, problem.theta_true, probes, pcg_tol=1e-14, pcg_maxit=1
            )

    def test_solved_block_attached_to_probes(self):
        problem = tomo_problem(s=4, n_src=3, n_rec=5, seed=1)
        probes = rademacher_probes(problem.m, 5, seed=0)
        assert probes.z is None
        build_surrogate(problem, problem.theta_true, probes)
        assert probes.z.shape == (problem.m, 5)


class TestProjectedGradient:
    def test_quadratic_converges_to_box_projection(self):
        box = Box(lower=np.zeros(2), upper=np.ones(2))
        a = np.array([2.0, -1.0])
        out = projected_gradient_min(
            lambda t: 0.5 * float(np.sum((t - a) ** 2)),
            lambda t: t - a,
            np.array([0.5, 0.5]),
            box,
            tol=1e-12,
        )
        assert isinstance(out, InnerResult)
        assert out.converged
        np.testing.assert_allclose(out.theta, [1.0, 0.0], atol=1e-8)

    def test_rosenbrock_descends_monotonically(self):
        box = Box(lower=np.array([-2.0, -2.0]), upper=np.array([2.0, 2.0]))
        f = lambda t: float((1 - t[0]) ** 2 + 100.0 * (t[1] - t[0] ** 2) ** 2)

        def g(t):
            return np.array(
                [
                    -2.0 * (1 - t[0]) - 400.0 * t[0] * (t[1] - t[0] ** 2),
                    200.0 * (t[1] - t[0] ** 2),
                ]
            )

        seen = []
        fun = lambda t: seen.append(f(t)) or seen[-1]
        out = projected_gradient_min(
            fun, g, np.array([-1.2, 1.0]), box, max_iters=2000, tol=1e-12
        )
        # every accepted iterate must not increase the objective
        assert out.value <= seen[0]
        assert out.value < 0.5
        accepted = [seen[0]]
        for v in seen[1:]:
            if v <= accepted[-1]:
                accepted.append(v)
        assert accepted[-1] == pytest.approx(out.value)

    def test_stationary_start_returns_immediately(self):
        box = Box(lower=np.array([-1.0]), upper=np.array([1.0]))
        out = projected_gradient_min(
            lambda t: 0.5 * float(t @ t),
            lambda t: np.asarray(t),
            np.array([0.0]),
            box,
            tol=1e-12,
        )
        assert out.converged
        assert out.iterations == 1
        assert out.theta[0] == 0.0

    def test_descent_against_active_bound_stops(self):
        # minimum at -3, box floor at 0: iterates pin to the floor and the
        # null projected step signals stationarity
        box = Box(lower=np.array([0.0]), upper=np.array([5.0]))
        out = projected_gradient_min(
            lambda t: 0.5 * float((t[0] + 3.0) ** 2),
            lambda t: np.array([t[0] + 3.0]),
            np.array([1.0]),
            box,
            tol=1e-12,
        )
        assert out.converged
        assert abs(out.theta[0]) < 1e-10


class TestExactMMChain:
    def test_monotone_descent_on_tomo(self):
        problem = tomo_problem(s=6, n_src=5, n_rec=6, seed=4)
        f0 = eval_F_exact(problem, problem.box.center()).value
        out = mm_optimize_exact(problem, outer_iters=8, tol=1e-8)
        values = [rec.f_audit for rec in out.records]
        assert values[-1] < f0
        for prev, cur in zip(values, values[1:]):
            assert cur <= prev + 1e-9 * max(1.0, abs(prev))

    def test_converges_to_closed_form_minimizer(self):
        # F(t) = (m/2) ln t + |b|^2/(2t): minimizer t* = |b|^2/m, and the MM
        # iteration is the geometric-mean map t -> sqrt(t * t*), a contraction
        # in log t.  Here t* = 4 exactly.
        b = np.full(4, 2.0)
        problem = noise_only_problem(b, box=Box(np.array([0.01]), np.array([50.0])))
        out = mm_optimize_exact(
            problem, theta0=np.array([20.0]), outer_iters=60, tol=1e-9,
            inner_iters=200, inner_tol=1e-12,
        )
        assert out.converged
        assert abs(out.theta[0] - 4.0) < 1e-5

    def test_restart_at_minimizer_stops_after_one_outer(self):
        b = np.full(4, 2.0)
        problem = noise_only_problem(b, box=Box(np.array([0.01]), np.array([50.0])))
        first = mm_optimize_exact(
            problem, theta0=np.array([20.0]), outer_iters=60, tol=1e-9,
            inner_iters=200, inner_tol=1e-12,
        )
        # Re-anchoring at the minimizer moves by at most inner-solver noise,
        # so at the chain's own working tolerance it stops immediately.
        again = mm_optimize_exact(
            problem, theta0=first.theta, outer_iters=25, tol=1e-6,
            inner_iters=200, inner_tol=1e-12,
        )
        assert again.converged
        assert again.outer_iters == 1
        assert again.f_value <= first.f_value + 1e-9 * abs(first.f_value)

    def test_start_outside_box_raises(self):
        problem = tomo_problem(s=4, n_src=3, n_rec=5, seed=4)
        bad = problem.box.upper + 1.0
        with pytest.raises(ValueError, match="box"):
            mm_optimize_exact(problem, theta0=bad)


class TestM3cChain:
    def test_descends_and_mostly_accepts(self):
        problem = tomo_problem(s=6, n_src=5, n_rec=6, seed=8)
        f0 = eval_F_exact(problem, problem.box.center()).value
        out = m3c_optimize(
            problem, outer_iters=10, n_probes=16, seed=0, tol=1e-6
        )
        assert out.audit_mode == "exact"
        assert out.f_value < f0
        values = [rec.f_audit for rec in out.records]
        for prev, cur in zip(values, values[1:]):
            assert cur <= prev + 1e-9 * max(1.0, abs(prev))
        accept_rate = np.mean([rec.accepted for rec in out.records])
        assert accept_rate >= 0.8

    def test_rejection_keeps_anchor_and_doubles_probes(self):
        problem = tomo_problem(s=4, n_src=3, n_rec=5, seed=8)
        theta0 = problem.theta_true
        # A hugely negative slack makes the audit unpassable, forcing the
        # rejection path deterministically.
        out = m3c_optimize(
            problem,
            theta0=theta0,
            outer_iters=3,
            n_probes=4,
            seed=1,
            audit_slack_rel=-100.0,
        )
        assert not out.converged
        assert all(not rec.accepted for rec in out.records)
        assert [rec.n_probes for rec in out.records] == [4, 8, 16]
        np.testing.assert_array_equal(out.theta, theta0)
        assert all(np.isnan(rec.rel_step) for rec in out.records)

    def test_deterministic_given_seed(self):
        problem_a = tomo_problem(s=4, n_src=3, n_rec=5, seed=2)
        problem_b = tomo_problem(s=4, n_src=3, n_rec=5, seed=2)
        out_a = m3c_optimize(problem_a, outer_iters=4, n_probes=8, seed=5)
        out_b = m3c_optimize(problem_b, outer_iters=4, n_probes=8, seed=5)
        np.testing.assert_array_equal(out_a.theta, out_b.theta)
        assert [r.f_audit for r in out_a.records] == [r.f_audit for r in out_b.records]
        out_c = m3c_optimize(problem_a, outer_iters=4, n_probes=8, seed=6)
        assert np.any(out_c.theta != out_a.theta)

    def test_slq_audit_mode_runs(self):
        problem = tomo_problem(s=4, n_src=3, n_rec=5, seed=3)
        out = m3c_optimize(
            problem,
            outer_iters=3,
            n_probes=8,
            seed=0,
            audit="slq",
            audit_probes=16,
            audit_k=12,
        )
        assert out.audit_mode == "slq"
        assert np.isfinite(out.f_value)

    def test_unknown_audit_mode_raises(self):
        problem = tomo_problem(s=4, n_src=3, n_rec=5, seed=3)
        with pytest.raises(ValueError, match="audit"):
            m3c_optimize(problem, audit="majority-vote")

    def test_counters_recorded_monotone(self):
        problem = tomo_problem(s=4, n_src=3, n_rec=5, seed=3)
        out = m3c_optimize(problem, outer_iters=4, n_probes=8, seed=0)
        a_counts = [rec.counters["a"] for rec in out.records]
        assert all(b > a for a, b in zip(a_counts, a_counts[1:]))
