"""Interior-point driver: steps, filter, line search, full solves."""

import numpy as np
import pytest

from ocpik import autodiff as ad
from ocpik.ocp import FunctionStage, Iterate, OcpProblem, assemble_nlp, kkt_error
from ocpik.solver import (
    DirectionBundle,
    Filter,
    FilterDecision,
    SolveStatus,
    SolverOptions,
    _RegState,
    compute_direction,
    filter_accept,
    fraction_to_boundary,
    init_slacks_duals,
    solve,
    update_barrier,
)


def scalar_bound_problem(lower=-1.0, upper=np.inf):
    """One decision state with a one-sided bound; no controls anywhere."""
    st0 = FunctionStage(
        nu=0, nx=1, cost=lambda w: 0.5 * w[0] * w[0], dynamics=lambda w: np.zeros(0),
        ineq=lambda w: w * 1.0, lower=np.array([lower]), upper=np.array([upper]),
    )
    stT = FunctionStage(nu=0, nx=0, cost=lambda w: 0.0)
    return OcpProblem([st0, stT])


class TestFractionToBoundary:
    def test_nonnegative_step_gives_full_alpha(self):
        assert fraction_to_boundary(np.array([1.0, 2.0]), np.array([0.5, 0.0]), 0.99) == 1.0

    def test_scalar_binding(self):
        assert fraction_to_boundary(np.array([1.0]), np.array([-1.0]), 0.99) == pytest.approx(0.99)

    def test_componentwise_binding(self):
        alpha = fraction_to_boundary(np.array([2.0, 1.0]), np.array([-4.0, -0.5]), 0.95)
        assert alpha == pytest.approx(0.475)

    def test_guarantee_holds_randomly(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = 0.1 + rng.random(8)
            dv = rng.standard_normal(8) * 3
            tau = 0.5 + 0.49 * rng.random()
            a = fraction_to_boundary(v, dv, tau)
            assert np.all(v + a * dv >= (1 - tau) * v - 1e-14)
            assert 0 < a <= 1


class TestUpdateBarrier:
    def test_linear_branch(self):
        opts = SolverOptions(kappa_mu=0.2, theta_mu=1.5, tol=1e-8)
        assert update_barrier(100.0, opts) == pytest.approx(20.0)

    def test_superlinear_branch(self):
        opts = SolverOptions(kappa_mu=0.2, theta_mu=1.5, tol=1e-8)
        assert update_barrier(1e-2, opts) == pytest.approx(1e-3)

    def test_floor(self):
        opts = SolverOptions(tol=1e-8)
        assert update_barrier(1e-9, opts) == pytest.approx(1e-9)

    def test_monotone(self):
        opts = SolverOptions()
        mu = opts.mu_init
        seen = [mu]
        for _ in range(60):
            mu = update_barrier(mu, opts)
            seen.append(mu)
        assert all(b <= a for a, b in zip(seen, seen[1:]))
        assert seen[-1] >= opts.tol / 10


class TestFilter:
    def test_accept_on_theta_decrease(self):
        opts = SolverOptions()
        filt = Filter(opts.gamma_theta, opts.gamma_phi)
        filt.reset(1e4)
        out = filter_accept(filt, 0.5, 10.0, 1.0, 5.0, grad_phi_dot_d=0.0, alpha=1.0, opts=opts)
        assert out is FilterDecision.ACCEPT

    def test_reject_pair_blocked_by_itself(self):
        opts = SolverOptions()
        filt = Filter(opts.gamma_theta, opts.gamma_phi)
        filt.add(1.0, 0.0)
        out = filter_accept(filt, 1.0, 0.0, 2.0, 1.0, grad_phi_dot_d=0.0, alpha=1.0, opts=opts)
        assert out is FilterDecision.REJECT

    def test_margin_acceptance(self):
        opts = SolverOptions()
        filt = Filter(opts.gamma_theta, opts.gamma_phi)
        filt.add(1.0, 0.0)
        out = filter_accept(filt, 0.4, -1.0, 1.0, 0.0, grad_phi_dot_d=0.0, alpha=1.0, opts=opts)
        assert out is FilterDecision.ACCEPT

    def test_armijo_branch_rejects_insufficient_decrease(self):
        opts = SolverOptions()
        filt = Filter(opts.gamma_theta, opts.gamma_phi, theta_min=1.0)
        filt.reset(1e4)
        # strong descent direction: switching holds, so Armijo is required
        out = filter_accept(filt, 1e-9, 5.0, 1e-9, 5.0, grad_phi_dot_d=-10.0, alpha=1.0, opts=opts)
        assert out is FilterDecision.REJECT

    def test_dominated_entries_pruned(self):
        filt = Filter(1e-5, 1e-5)
        filt.add(1.0, 1.0)
        filt.add(2.0, 2.0)  # dominated by (1, 1)
        assert len(filt) == 1
        filt.add(0.5, 2.0)  # incomparable
        assert len(filt) == 2


class TestInitSlacksDuals:
    def test_at_bound_pushed_interior(self):
        prob = scalar_bound_problem(lower=0.0)
        opts = SolverOptions(bound_relax=1e-2)
        it = init_slacks_duals(prob, ([np.array([0.0]), np.zeros(0)], [np.zeros(0)]), opts)
        assert it.s[0] == pytest.approx(1e-2)
        assert it.z[0] > 0

    def test_comfortably_interior_keeps_margin(self):
        prob = scalar_bound_problem(lower=0.0)
        opts = SolverOptions(bound_relax=1e-2)
        it = init_slacks_duals(prob, ([np.array([5.0]), np.zeros(0)], [np.zeros(0)]), opts)
        assert it.s[0] == pytest.approx(5.0)

    def test_dual_clipping(self):
        prob = scalar_bound_problem(lower=0.0)
        opts = SolverOptions(mu_init=100.0, z_min=1e-4, bound_relax=1e-2)
        it = init_slacks_duals(prob, ([np.array([1e6]), np.zeros(0)], [np.zeros(0)]), opts)
        assert it.s[0] == pytest.approx(1e6)
        assert it.z[0] == pytest.approx(1e-4)

    def test_slack_stationarity_vanishes(self):
        prob = scalar_bound_problem(lower=-2.0, upper=3.0)
        it = init_slacks_duals(prob, ([np.array([0.5]), np.zeros(0)], [np.zeros(0)]))
        np.testing.assert_allclose(-it.lam_g - it.z, 0.0)


class TestComputeDirection:
    def test_zero_at_subproblem_solution(self):
        # perfectly centered interior point of min x^2/2 s.t. x >= 1
        prob = scalar_bound_problem(lower=1.0)
        view = assemble_nlp(prob)
        mu = 0.75
        # stationarity: x + lam = 0, lam = -z, z = mu/s, s = x - 1
        # x - mu/(x-1) = 0  =>  x = (1 + sqrt(1 + 4 mu)) / 2
        x = 0.5 * (1 + np.sqrt(1 + 4 * mu))
        s = x - 1.0
        z = mu / s
        it = Iterate(
            x=[np.array([x]), np.zeros(0)], u=[np.zeros(0)],
            s=np.array([s]), z=np.array([z]), lam_g=np.array([-z]),
            lam_h=[np.zeros(0), np.zeros(0)], pi=[np.zeros(0)], mu=mu,
        )
        bundle = compute_direction(prob, it, mu, _RegState(), view=view)
        assert abs(bundle.step.dx[0][0]) < 1e-10
        assert abs(bundle.ds[0]) < 1e-10
        assert abs(bundle.dz[0]) < 1e-10

    def test_scalar_recovery_matches_full_primal_dual_solve(self):
        # min x^2/2 s.t. x >= -1 at x=1, s=2, z=mu/2, mu=1
        prob = scalar_bound_problem(lower=-1.0)
        view = assemble_nlp(prob)
        mu = 1.0
        it = Iterate(
            x=[np.array([1.0]), np.zeros(0)], u=[np.zeros(0)],
            s=np.array([2.0]), z=np.array([0.5]), lam_g=np.array([-0.5]),
            lam_h=[np.zeros(0), np.zeros(0)], pi=[np.zeros(0)], mu=mu,
        )
        bundle = compute_direction(prob, it, mu, _RegState(), view=view)
        # dense unreduced system over (dx, ds, dlam_g, dz)
        x, s, z, lam = 1.0, 2.0, 0.5, -0.5
        M = np.array([
            [1.0, 0.0, 1.0, 0.0],   # stationarity x: x + lam_g
            [0.0, 0.0, -1.0, -1.0],  # stationarity s: -lam_g - z
            [1.0, -1.0, 0.0, 0.0],  # g - s row
            [0.0, z, 0.0, s],       # centering
        ])
        rhs = -np.array([x + lam, -lam - z, (x + 1) - s, s * z - mu])
        sol = np.linalg.solve(M, rhs)
        np.testing.assert_allclose(bundle.step.dx[0], sol[0], atol=1e-12)
        np.testing.assert_allclose(bundle.ds, sol[1], atol=1e-12)
        np.testing.assert_allclose(bundle.dlam_g, sol[2], atol=1e-12)
        np.testing.assert_allclose(bundle.dz, sol[3], atol=1e-12)
        np.testing.assert_allclose(bundle.step.dx[0][0], -0.4)

    def test_negative_curvature_triggers_regularization(self):
        # free direction with eigenvalue -4 at the start point
        st0 = FunctionStage(
            nu=1, nx=1,
            cost=lambda w: -2.0 * w[0] ** 2 + 0.5 * w[0] ** 4,
            dynamics=lambda w: w[:1] + w[1:2],
            eq=lambda w: w[1:2] - 0.0, nh=1,
        )
        stT = FunctionStage(nu=0, nx=1, cost=lambda w: 0.5 * w[0] ** 2)
        prob = OcpProblem([st0, stT])
        view = assemble_nlp(prob)
        it = Iterate(
            x=[np.zeros(1), np.array([0.3])], u=[np.array([0.3])],
            s=np.zeros(0), z=np.zeros(0), lam_g=np.zeros(0),
            lam_h=[np.zeros(1), np.zeros(0)], pi=[np.zeros(1)], mu=1.0,
        )
        bundle = compute_direction(prob, it, 1.0, _RegState(), view=view)
        assert bundle.delta > 0
        assert np.all(np.isfinite(bundle.step.dx[1]))


class TestSolve:
    def test_unconstrained_quadratic_few_iterations(self):
        K = 3
        A = np.array([[1.0, 0.1], [0.0, 1.0]])
        B = np.array([[0.005], [0.1]])
        x0 = np.array([1.0, -0.5])

        def mk(k):
            return FunctionStage(
                nu=1, nx=2,
                cost=lambda w: 0.5 * np.dot(w, w),
                dynamics=lambda w: np.dot(A, w[1:]) + np.dot(B, w[:1]),
                eq=(lambda w: w[1:] - x0) if k == 0 else None,
                nh=2 if k == 0 else 0,
            )

        stages = [mk(k) for k in range(K)]
        stages.append(FunctionStage(nu=0, nx=2, cost=lambda w: 0.5 * np.dot(w, w)))
        prob = OcpProblem(stages)
        guess = ([x0.copy() for _ in range(K + 1)], [np.zeros(1) for _ in range(K)])
        result = solve(prob, guess)
        assert result.status is SolveStatus.SOLVED
        assert result.n_iter <= 3

    def test_active_bound_solution(self):
        st0 = FunctionStage(
            nu=1, nx=1,
            cost=lambda w: 0.5 * (w[0] - 3.0) ** 2 + 0.5 * w[1] ** 2,
            dynamics=lambda w: w[:1] * 1.0,
            ineq=lambda w: w[:1] * 1.0, lower=np.array([4.0]), upper=np.array([10.0]),
        )
        stT = FunctionStage(nu=0, nx=1, cost=lambda w: 0.5 * w[0] ** 2)
        prob = OcpProblem([st0, stT])
        result = solve(prob, ([np.array([5.0]), np.array([5.0])], [np.array([5.0])]))
        assert result.status is SolveStatus.SOLVED
        np.testing.assert_allclose(result.iterate.u[0], 4.0, atol=1e-6)

    def test_backtracks_on_steep_nonlinearity(self):
        # exponential dynamics make the full Newton step blow the gap up
        st0 = FunctionStage(
            nu=1, nx=1,
            cost=lambda w: 0.5 * w[0] ** 2,
            dynamics=lambda w: ad.pack([ad.exp(3.0 * w[1]) - 1.0 + w[0]]),
            eq=lambda w: w[1:] - 1.2, nh=1,
        )
        stT = FunctionStage(nu=0, nx=1, cost=lambda w: 0.5 * (w[0] - 1.0) ** 2)
        prob = OcpProblem([st0, stT])
        guess = ([np.array([1.2]), np.array([0.0])], [np.array([0.0])])
        result = solve(prob, guess, SolverOptions(max_iter=100))
        assert result.status is SolveStatus.SOLVED
        assert any(rec.alpha_primal < 1.0 for rec in result.iterations)

    def test_maratos_instance_uses_one_soc(self):
        t = 0.1
        st0 = FunctionStage(nu=2, nx=0, cost=lambda w: 0.0 * w[0],
                            dynamics=lambda w: w[:2] * 1.0)
        stT = FunctionStage(
            nu=0, nx=2,
            cost=lambda w: 2.0 * (w[0] ** 2 + w[1] ** 2 - 1.0) - w[0],
            eq=lambda w: np.atleast_1d(w[0] ** 2 + w[1] ** 2 - 1.0), nh=1,
        )
        prob = OcpProblem([st0, stT])
        x0 = np.array([np.cos(t), np.sin(t)])
        result = solve(prob, ([np.zeros(0), x0.copy()], [x0.copy()]))
        assert result.status is SolveStatus.SOLVED
        assert any(rec.soc_count == 1 for rec in result.iterations)
        np.testing.assert_allclose(result.iterate.x[1], [1.0, 0.0], atol=1e-7)

    def test_nonconvex_solved_with_regularization(self):
        st0 = FunctionStage(
            nu=1, nx=1,
            cost=lambda w: -2.0 * w[0] ** 2 + 0.5 * w[0] ** 4,
            dynamics=lambda w: w[:1] + w[1:2],
            eq=lambda w: w[1:2] - 0.0, nh=1,
        )
        stT = FunctionStage(nu=0, nx=1, cost=lambda w: 0.5 * w[0] ** 2)
        prob = OcpProblem([st0, stT])
        result = solve(prob, ([np.zeros(1), np.array([0.3])], [np.array([0.3])]),
                       SolverOptions(max_iter=100))
        assert result.status is SolveStatus.SOLVED
        assert any(rec.delta > 0 for rec in result.iterations)

    def test_evaluation_failure_at_initial_point(self):
        st0 = FunctionStage(
            nu=0, nx=1, cost=lambda w: 0.5 * w[0] ** 2, dynamics=lambda w: np.zeros(0),
            ineq=lambda w: ad.pack([ad.log(w[0])]),
            lower=np.array([0.0]), upper=np.array([np.inf]),
        )
        stT = FunctionStage(nu=0, nx=0, cost=lambda w: 0.0)
        prob = OcpProblem([st0, stT])
        result = solve(prob, ([np.array([-1.0]), np.zeros(0)], [np.zeros(0)]))
        assert result.status is SolveStatus.EVALUATION_FAILURE

    def test_max_iterations_status(self):
        from ocpik.problems import build_benchmark

        bench = build_benchmark("cart_pendulum_swing")
        result = solve(bench.problem, bench.guess, SolverOptions(max_iter=1))
        assert result.status is SolveStatus.MAX_ITERATIONS
        assert result.n_iter == 1


class TestSolveInvariants:
    @pytest.fixture(scope="class")
    def solved(self):
        from ocpik.problems import build_benchmark

        bench = build_benchmark("quadrotor_mpc")
        opts = SolverOptions()
        return opts, solve(bench.problem, bench.guess, opts)

    def test_strict_interiority(self, solved):
        _, result = solved
        assert all(rec.min_slack > 0 and rec.min_zdual > 0 for rec in result.iterations)

    def test_fraction_to_boundary_margins(self, solved):
        _, result = solved
        assert all(rec.ftb_margin_primal >= -1e-12 for rec in result.iterations)
        assert all(rec.ftb_margin_dual >= -1e-12 for rec in result.iterations)

    def test_mu_nonincreasing(self, solved):
        _, result = solved
        mus = [rec.mu for rec in result.iterations]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(mus, mus[1:]))

    def test_barrier_decrease_implies_subproblem_converged(self, solved):
        opts, result = solved
        for (_, mu_old, emu, mu_new) in result.barrier_updates:
            assert emu <= opts.kappa_eps * mu_old * (1 + 1e-9)
            assert mu_new < mu_old

    def test_solved_iff_tolerance_met(self, solved):
        opts, result = solved
        assert result.status is SolveStatus.SOLVED
        assert result.kkt.total <= opts.tol

    def test_determinism(self):
        from ocpik.problems import build_benchmark

        logs = []
        for _ in range(2):
            bench = build_benchmark("cart_pendulum_mpc")
            result = solve(bench.problem, bench.guess, SolverOptions())
            logs.append([
                (r.iter, r.mu, r.objective, r.theta, r.kkt_total,
                 r.alpha_primal, r.alpha_dual, r.delta, r.soc_count)
                for r in result.iterations
            ])
        assert logs[0] == logs[1]


class TestOptionsValidation:
    def test_bad_kappa_mu(self):
        from ocpik.errors import ApiMisuseError

        with pytest.raises(ApiMisuseError):
            SolverOptions(kappa_mu=1.5).validate()

    def test_from_mapping_rejects_unknown(self):
        from ocpik.errors import ApiMisuseError

        with pytest.raises(ApiMisuseError):
            SolverOptions.from_mapping({"no_such_option": "1"})

    def test_from_mapping_parses(self):
        opts = SolverOptions.from_mapping({"tol": "1e-6", "max_iter": "42"})
        assert opts.tol == 1e-6
        assert opts.max_iter == 42
