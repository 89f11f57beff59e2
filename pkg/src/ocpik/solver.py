"""Primal-dual interior-point loop with filter line search.

The driver homotopes the barrier parameter downward, solving each barrier
subproblem with Newton steps on the primal-dual conditions. Search
directions come from the structured factorization in :mod:`ocpik.riccati`;
when the reduced Hessian is not positive definite the full-space Hessian
diagonal is shifted by an adaptively grown multiple of the identity. Step
sizes respect the fraction-to-boundary rule separately for slacks and
bound duals, and candidate points are vetted by a filter on (constraint
violation, barrier objective) pairs with second-order corrections after a
rejected full step. There is no feasibility restoration phase.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import riccati as rc
from .errors import ApiMisuseError, DomainError, EvaluationError, RankDeficientError
from .ocp import (
    Iterate,
    KktError,
    NlpView,
    OcpProblem,
    Residuals,
    assemble_nlp,
    build_blocks,
    residual_pass,
)

__all__ = [
    "SolverOptions",
    "SolveStatus",
    "Filter",
    "FilterDecision",
    "IterationRecord",
    "SolveResult",
    "fraction_to_boundary",
    "update_barrier",
    "filter_accept",
    "init_slacks_duals",
    "compute_direction",
    "DirectionBundle",
    "line_search",
    "solve",
]

_EPS = float(np.finfo(float).eps)


@dataclass
class SolverOptions:
    """Algorithm parameters; defaults follow common interior-point practice."""

    tol: float = 1e-8
    mu_init: float = 1e2
    gamma_theta: float = 1e-12
    gamma_phi: float = 1e-8
    kappa_mu: float = 0.2
    theta_mu: float = 1.5
    kappa_eps: float = 10.0
    tau_min: float = 0.99
    delta_0: float = 1e-4
    delta_growth: float = 8.0
    delta_cap: float = 1e14
    max_iter: int = 500
    max_soc: int = 4
    bound_relax: float = 1e-2
    # line search / filter internals
    eta_phi: float = 1e-4
    s_theta: float = 1.1
    s_phi: float = 2.3
    delta_switch: float = 1.0
    backtrack: float = 0.5
    kappa_soc: float = 0.99
    kappa_sigma: float = 1e10
    z_min: float = 1e-4
    z_max: float = 1e8
    eq_dual_reg: float = 1e-8

    def validate(self) -> "SolverOptions":
        if not self.tol > 0:
            raise ApiMisuseError("tol must be positive")
        if not 0 < self.kappa_mu < 1:
            raise ApiMisuseError("kappa_mu must lie in (0, 1)")
        if not 1 < self.theta_mu < 2:
            raise ApiMisuseError("theta_mu must lie in (1, 2)")
        if not (0 < self.gamma_theta < 1 and 0 < self.gamma_phi < 1):
            raise ApiMisuseError("filter margins must lie in (0, 1)")
        if self.mu_init <= 0 or self.kappa_eps <= 0 or self.max_iter < 1:
            raise ApiMisuseError("invalid solver options")
        return self

    @classmethod
    def from_mapping(cls, mapping) -> "SolverOptions":
        """Build options from string key-value pairs (CLI/config files)."""
        opts = cls()
        for key, raw in mapping.items():
            name = key.replace("-", "_")
            if not hasattr(opts, name):
                raise ApiMisuseError(f"unknown solver option '{key}'")
            cur = getattr(opts, name)
            setattr(opts, name, int(raw) if isinstance(cur, int) and not isinstance(cur, bool) else float(raw))
        return opts.validate()

    @property
    def mu_floor(self) -> float:
        return self.tol / 10.0


class SolveStatus(enum.Enum):
    SOLVED = "Solved"
    MAX_ITERATIONS = "MaxIterations"
    INDEFINITE_UNRECOVERABLE = "Indefinite-Unrecoverable"
    EVALUATION_FAILURE = "EvaluationFailure"
    SEARCH_DIRECTION_TOO_SMALL = "SearchDirectionTooSmall"


class FilterDecision(enum.Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


class Filter:
    """Blocking set of (violation, barrier objective) corner pairs.

    ``theta_min`` bounds the infeasibility region in which pure objective
    progress (the Armijo branch) may be used instead of filter progress.
    """

    def __init__(self, gamma_theta: float, gamma_phi: float, theta_min: float = math.inf):
        self.gamma_theta = gamma_theta
        self.gamma_phi = gamma_phi
        self.theta_min = theta_min
        self.entries: List[Tuple[float, float]] = []

    def reset(self, theta_max: float):
        self.entries = [(theta_max, -math.inf)]

    def _corner(self, th: float, ph: float) -> Tuple[float, float]:
        return ((1.0 - self.gamma_theta) * th, ph - self.gamma_phi * th)

    def blocks(self, th: float, ph: float) -> bool:
        for tf, pf in self.entries:
            ct, cp = self._corner(tf, pf)
            noise = 10.0 * _EPS * max(1.0, abs(cp)) if math.isfinite(cp) else 0.0
            if th >= ct and ph >= cp + noise:
                return True
        return False

    def add(self, th: float, ph: float):
        ct, cp = self._corner(th, ph)
        kept = []
        for tf, pf in self.entries:
            et, ep = self._corner(tf, pf)
            if et <= ct and ep <= cp:
                return  # new region already covered
            if not (ct <= et and cp <= ep):
                kept.append((tf, pf))
        kept.append((th, ph))
        self.entries = kept

    def __len__(self):
        return len(self.entries)


def fraction_to_boundary(v: np.ndarray, dv: np.ndarray, tau: float) -> float:
    """Largest step in (0, 1] keeping ``v + alpha dv >= (1 - tau) v``."""
    alpha = 1.0
    neg = dv < 0.0
    if np.any(neg):
        alpha = min(1.0, float(np.min(-tau * v[neg] / dv[neg])))
    return alpha


def update_barrier(mu: float, opts: SolverOptions) -> float:
    """Monotone decrease with a superlinear branch and a floor of tol/10."""
    return max(opts.mu_floor, min(opts.kappa_mu * mu, mu**opts.theta_mu))


def _filter_check(
    filt: Filter,
    theta_new: float,
    phi_new: float,
    theta_cur: float,
    phi_cur: float,
    grad_phi_dot_d: float,
    alpha: float,
    opts: SolverOptions,
) -> Tuple[bool, bool]:
    """(accepted, accepted via the Armijo/switching branch)."""
    if filt.blocks(theta_new, phi_new):
        return False, False
    switching = (
        theta_cur <= filt.theta_min
        and grad_phi_dot_d < 0.0
        and alpha * (-grad_phi_dot_d) ** opts.s_phi
        > opts.delta_switch * theta_cur**opts.s_theta
    )
    noise = 10.0 * _EPS * max(1.0, abs(phi_cur))
    if switching:
        armijo = phi_new <= phi_cur + opts.eta_phi * alpha * grad_phi_dot_d + noise
        return (armijo, armijo)
    sufficient = (
        theta_new <= (1.0 - opts.gamma_theta) * theta_cur
        or phi_new <= phi_cur - opts.gamma_phi * theta_cur + noise
    )
    return sufficient, False


def filter_accept(
    filt: Filter,
    theta_new: float,
    phi_new: float,
    theta_cur: float,
    phi_cur: float,
    grad_phi_dot_d: float,
    alpha: float,
    opts: Optional[SolverOptions] = None,
) -> FilterDecision:
    """Accept or reject a trial pair against the filter and progress rules."""
    opts = opts or SolverOptions()
    ok, _ = _filter_check(filt, theta_new, phi_new, theta_cur, phi_cur, grad_phi_dot_d, alpha, opts)
    return FilterDecision.ACCEPT if ok else FilterDecision.REJECT


def init_slacks_duals(
    problem: OcpProblem,
    guess: Tuple[List[np.ndarray], List[np.ndarray]],
    opts: Optional[SolverOptions] = None,
    view: Optional[NlpView] = None,
) -> Iterate:
    """Initial point: slacks pushed interior, bound duals from the barrier.

    Slacks start at the constraint margin, pushed to at least
    ``bound_relax * max(1, |margin|)``; bound duals at ``mu_init / s``
    clipped to ``[z_min, z_max]``; equality and dynamics duals start at
    zero and the inequality duals at ``-z`` so the slack stationarity rows
    vanish.
    """
    opts = (opts or SolverOptions()).validate()
    view = view if view is not None else assemble_nlp(problem)
    xs, us = guess
    dims = problem.dims
    xs = [np.asarray(x, dtype=float).ravel().copy() for x in xs]
    us = [np.asarray(u, dtype=float).ravel().copy() for u in us]
    if len(xs) != dims.K + 1 or len(us) != dims.K:
        raise ApiMisuseError("guess must supply K+1 states and K controls")
    for k in range(dims.K + 1):
        if xs[k].size != dims.nx[k] or (k < dims.K and us[k].size != dims.nu[k]):
            raise ApiMisuseError(f"guess dimensions do not match stage {k}")
        if not np.all(np.isfinite(xs[k])) or (k < dims.K and not np.all(np.isfinite(us[k]))):
            raise EvaluationError("non-finite initial guess", stage=k)

    s = np.zeros(view.n_slack)
    it = Iterate(
        x=xs,
        u=us,
        s=np.ones(max(view.n_slack, 0)),
        z=np.ones(max(view.n_slack, 0)),
        lam_g=np.zeros(view.n_slack),
        lam_h=[np.zeros(dims.nh[k]) for k in range(dims.K + 1)],
        pi=[np.zeros(dims.nx[k + 1]) for k in range(dims.K)],
        mu=opts.mu_init,
    )
    for k in range(dims.K + 1):
        sl = view.slack_slice[k]
        if sl.stop == sl.start:
            continue
        gval = problem.evaluators[k].ineq(it.w(k))
        if not np.all(np.isfinite(gval)):
            raise EvaluationError("non-finite inequality value at the initial guess", stage=k)
        margin = view.slack_values(k, gval)
        s[sl] = np.maximum(margin, opts.bound_relax * np.maximum(1.0, np.abs(margin)))
    it.s = s
    it.z = np.clip(opts.mu_init / s, opts.z_min, opts.z_max) if s.size else s.copy()
    it.lam_g = -it.z.copy()
    return it


@dataclass
class DirectionBundle:
    """A primal-dual search direction with eliminated rows recovered."""

    step: rc.StepDirection
    ds: np.ndarray
    dlam_g: np.ndarray
    dz: np.ndarray
    delta: float
    fact: rc.RiccatiFactorization
    blocks: rc.StageBlocks
    extras: list
    soc_count: int = 0

    def dw(self, k: int) -> np.ndarray:
        if k < len(self.step.du):
            return np.concatenate([self.step.du[k], self.step.dx[k]])
        return self.step.dx[k]


class _Unrecoverable(Exception):
    pass


class _StepTooSmall(Exception):
    pass


@dataclass
class _RegState:
    last: float = 0.0


def _recover_slack_steps(it: Iterate, step: rc.StepDirection, extras, mu: float):
    ds = np.zeros_like(it.s)
    for k, ex in enumerate(extras):
        if ex.sl.stop > ex.sl.start:
            dwk = np.concatenate([step.du[k], step.dx[k]]) if k < len(step.du) else step.dx[k]
            ds[ex.sl] = ex.Gsig @ dwk + ex.gres
    centered = (mu - it.z * ds) / it.s
    dz = -it.z + centered
    dlam_g = -it.lam_g - centered
    return ds, dlam_g, dz


def _fold_equalities(blocks: rc.StageBlocks, delta_c: float):
    """Replace equality rows by a quadratic penalty coupling (dual regularization).

    Turns the rows ``H dw = -h`` into Hessian and gradient contributions
    ``H'H / delta_c`` and ``H'h / delta_c`` so the structured factorization
    sees no equality rows at all; multipliers are recovered afterwards as
    ``(H dw + h) / delta_c``.
    """
    folded = []
    for s in blocks.stages:
        if s.terminal:
            Hw = s.Hx
            W = s.Q + Hw.T @ Hw / delta_c if Hw.size else s.Q
            g = s.q + Hw.T @ s.h / delta_c if Hw.size else s.q
            folded.append(
                rc.StageData(Q=W, q=g, Hx=np.zeros((0, s.nx)), h=np.zeros(0))
            )
            continue
        Hw = np.hstack([s.Hu, s.Hx])
        nu = s.nu
        if Hw.size:
            Wfull = np.block([[s.R, s.S.T], [s.S, s.Q]]) + Hw.T @ Hw / delta_c
            g = np.concatenate([s.r, s.q]) + Hw.T @ s.h / delta_c
        else:
            Wfull = np.block([[s.R, s.S.T], [s.S, s.Q]])
            g = np.concatenate([s.r, s.q])
        folded.append(
            rc.StageData(
                Q=Wfull[nu:, nu:],
                q=g[nu:],
                Hx=np.zeros((0, s.nx)),
                h=np.zeros(0),
                R=Wfull[:nu, :nu],
                S=Wfull[nu:, :nu],
                r=g[:nu],
                A=s.A,
                B=s.B,
                b=s.b,
                Hu=np.zeros((0, s.nu)),
            )
        )
    return rc.StageBlocks(folded)


def _recover_folded_duals(blocks: rc.StageBlocks, step: rc.StepDirection, delta_c: float):
    for k, s in enumerate(blocks.stages):
        if s.nh == 0:
            step.dlam[k] = np.zeros(0)
            continue
        if s.terminal:
            Hw = s.Hx
            dwk = step.dx[k]
        else:
            Hw = np.hstack([s.Hu, s.Hx])
            dwk = np.concatenate([step.du[k], step.dx[k]])
        step.dlam[k] = (Hw @ dwk + s.h) / delta_c


def compute_direction(
    problem: OcpProblem,
    it: Iterate,
    mu: float,
    reg: _RegState,
    opts: Optional[SolverOptions] = None,
    view: Optional[NlpView] = None,
) -> DirectionBundle:
    """Newton direction on the reduced system with inertia correction.

    The factorization is tried with no regularization first; on an
    indefinite verdict the Hessian shift starts at ``max(delta_0_scaled,
    delta_last / 3)`` and grows multiplicatively until the reduced Hessian
    passes, giving up beyond the cap. Rank-deficient stagewise equalities
    are retried once with a small dual regularization, then reported.
    """
    opts = opts or SolverOptions()
    view = view if view is not None else assemble_nlp(problem)
    blocks, extras = build_blocks(problem, it, mu, view)
    # scale from the Lagrangian Hessian alone: barrier rows can be huge near
    # active bounds and would push the first shift far beyond what inertia
    # correction needs
    scale = max(1.0, max(ex.hess_scale for ex in extras))
    delta0 = opts.delta_0 * scale
    cap = opts.delta_cap * scale

    solve_blocks = blocks
    folded = None
    delta = 0.0
    while True:
        try:
            fact = rc.factorize(solve_blocks, delta)
        except RankDeficientError:
            if folded is not None:
                raise
            folded = _fold_equalities(blocks, opts.eq_dual_reg)
            solve_blocks = folded
            continue
        if isinstance(fact, rc.RiccatiFactorization):
            break
        if delta == 0.0:
            delta = max(delta0, reg.last / 3.0)
        else:
            delta *= opts.delta_growth
        if delta > cap:
            raise _Unrecoverable(f"regularization exceeded cap at stage {fact.stage}")
    if delta > 0.0:
        reg.last = delta

    step = rc.solve(fact, solve_blocks)
    step = rc.iterative_refinement(fact, solve_blocks, step)
    if folded is not None:
        _recover_folded_duals(blocks, step, opts.eq_dual_reg)
    ds, dlam_g, dz = _recover_slack_steps(it, step, extras, mu)
    return DirectionBundle(
        step=step, ds=ds, dlam_g=dlam_g, dz=dz, delta=delta,
        fact=fact, blocks=solve_blocks, extras=extras,
    )


def _soc_direction(
    bundle: DirectionBundle, it: Iterate, mu: float, b_soc, h_soc, gres_soc
) -> DirectionBundle:
    """Re-solve with combined constraint residuals, keeping the same matrix."""
    blocks = bundle.blocks
    K = blocks.K
    rhs = blocks.rhs()
    for k in range(K):
        rhs.b[k] = b_soc[k]
    for k in range(K + 1):
        if rhs.h[k].size:
            rhs.h[k] = h_soc[k]
        ex = bundle.extras[k]
        if ex.sl.stop > ex.sl.start:
            s_st = it.s[ex.sl]
            gamma = ex.grad - ex.Gsig.T @ (mu / s_st - ex.sigma * gres_soc[k])
            nu = blocks.stages[k].nu if k < K else 0
            if k < K:
                rhs.r[k] = gamma[:nu]
            rhs.q[k] = gamma[nu:]
    step = rc._solve_rhs(bundle.fact, rhs)
    ds = np.zeros_like(it.s)
    for k, ex in enumerate(bundle.extras):
        if ex.sl.stop > ex.sl.start:
            dwk = np.concatenate([step.du[k], step.dx[k]]) if k < K else step.dx[k]
            ds[ex.sl] = ex.Gsig @ dwk + gres_soc[k]
    centered = (mu - it.z * ds) / it.s
    return DirectionBundle(
        step=step, ds=ds, dlam_g=-it.lam_g - centered, dz=-it.z + centered,
        delta=bundle.delta, fact=bundle.fact, blocks=bundle.blocks, extras=bundle.extras,
    )


@dataclass
class IterationRecord:
    """One row of the per-iteration log (pre-step state plus step data)."""

    iter: int
    mu: float
    objective: float
    theta: float
    kkt_total: float
    alpha_primal: float
    alpha_dual: float
    delta: float
    soc_count: int
    kkt_mu: float = 0.0
    tau: float = 0.0
    ftb_margin_primal: float = 0.0
    ftb_margin_dual: float = 0.0
    min_slack: float = 0.0
    min_zdual: float = 0.0


@dataclass
class SolveResult:
    status: SolveStatus
    iterate: Iterate
    kkt: KktError
    iterations: List[IterationRecord]
    barrier_updates: List[Tuple[int, float, float, float]]
    timing: dict

    @property
    def n_iter(self) -> int:
        return len(self.iterations)

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.SOLVED


class _TrialEvaluator:
    """Values-only evaluation of candidate points during the line search."""

    def __init__(self, problem: OcpProblem, view: NlpView):
        self.problem = problem
        self.view = view

    def __call__(self, xs, us, s, mu):
        K = self.problem.K
        cost = 0.0
        theta = 0.0
        b_list, h_list, gres_list = [], [], []
        for k in range(K + 1):
            ev = self.problem.evaluators[k]
            w = np.concatenate([us[k], xs[k]]) if k < K else xs[k]
            cost += ev.cost(w)
            if k < K:
                gap = ev.dyn(w) - xs[k + 1]
                b_list.append(gap)
                theta = max(theta, float(np.max(np.abs(gap))) if gap.size else 0.0)
            hval = ev.eq(w)
            h_list.append(hval)
            if hval.size:
                theta = max(theta, float(np.max(np.abs(hval))))
            sl = self.view.slack_slice[k]
            if sl.stop > sl.start:
                gres = self.view.slack_values(k, ev.ineq(w)) - s[sl]
                gres_list.append(gres)
                theta = max(theta, float(np.max(np.abs(gres))))
            else:
                gres_list.append(np.zeros(0))
        phi = cost - mu * float(np.sum(np.log(s))) if s.size else cost
        if not np.isfinite(cost) or not np.isfinite(theta):
            raise EvaluationError("non-finite trial point")
        return cost, theta, phi, b_list, h_list, gres_list


@dataclass
class _LsOutcome:
    bundle: DirectionBundle
    alpha: float
    alpha_dual: float
    xs: list
    us: list
    s: np.ndarray
    theta: float
    phi: float
    cost: float
    soc_count: int
    augment: bool


def line_search(
    trial_eval: _TrialEvaluator,
    it: Iterate,
    bundle: DirectionBundle,
    filt: Filter,
    mu: float,
    tau: float,
    theta_cur: float,
    phi_cur: float,
    grad_phi_dot_d: float,
    opts: SolverOptions,
    b_cur=None,
    h_cur=None,
    gres_cur=None,
) -> _LsOutcome:
    """Backtracking filter line search with second-order corrections."""
    K = trial_eval.problem.K
    alpha_max = fraction_to_boundary(it.s, bundle.ds, tau) if it.s.size else 1.0
    dmax = max(bundle.step.inf_norm(), float(np.max(np.abs(bundle.ds))) if bundle.ds.size else 0.0)
    wmax = max((float(np.max(np.abs(v))) for v in it.x + it.u if v.size), default=0.0)
    alpha_floor = 10.0 * _EPS * max(1.0, wmax)

    def trial_point(bun, alpha):
        xs = [x + alpha * dx for x, dx in zip(it.x, bun.step.dx)]
        us = [u + alpha * du for u, du in zip(it.u, bun.step.du)]
        s = it.s + alpha * bun.ds
        return xs, us, s

    alpha = alpha_max
    first = True
    while True:
        xs, us, s = trial_point(bundle, alpha)
        try:
            cost, theta_t, phi_t, b_t, h_t, gres_t = trial_eval(xs, us, s, mu)
            ok, via_armijo = _filter_check(
                filt, theta_t, phi_t, theta_cur, phi_cur, grad_phi_dot_d, alpha, opts
            )
        except (EvaluationError, FloatingPointError):
            ok, via_armijo = False, False
            theta_t = math.inf
        if ok:
            alpha_dual = fraction_to_boundary(it.z, bundle.dz, tau) if it.z.size else 1.0
            return _LsOutcome(
                bundle=bundle, alpha=alpha, alpha_dual=alpha_dual, xs=xs, us=us, s=s,
                theta=theta_t, phi=phi_t, cost=cost, soc_count=bundle.soc_count,
                augment=not via_armijo,
            )
        if first and np.isfinite(theta_t) and theta_t >= theta_cur and opts.max_soc > 0:
            soc = _try_soc(
                trial_eval, it, bundle, filt, mu, tau, theta_cur, phi_cur,
                grad_phi_dot_d, alpha, opts, b_cur, h_cur, gres_cur, b_t, h_t, gres_t, theta_t,
            )
            if soc is not None:
                return soc
        first = False
        alpha *= opts.backtrack
        if alpha * dmax < alpha_floor:
            raise _StepTooSmall


def _try_soc(
    trial_eval, it, bundle, filt, mu, tau, theta_cur, phi_cur, gphi_d,
    alpha_full, opts, b_cur, h_cur, gres_cur, b_t, h_t, gres_t, theta_prev,
):
    if b_cur is None:
        return None
    K = trial_eval.problem.K
    b_soc = [alpha_full * bc + bt for bc, bt in zip(b_cur, b_t)]
    h_soc = [alpha_full * hc + ht for hc, ht in zip(h_cur, h_t)]
    gres_soc = [alpha_full * gc + gt for gc, gt in zip(gres_cur, gres_t)]
    alpha_prev = alpha_full
    for count in range(1, opts.max_soc + 1):
        cand = _soc_direction(bundle, it, mu, b_soc, h_soc, gres_soc)
        cand.soc_count = count
        alpha_soc = fraction_to_boundary(it.s, cand.ds, tau) if it.s.size else 1.0
        xs = [x + alpha_soc * dx for x, dx in zip(it.x, cand.step.dx)]
        us = [u + alpha_soc * du for u, du in zip(it.u, cand.step.du)]
        s = it.s + alpha_soc * cand.ds
        try:
            cost, theta_t, phi_t, b_t2, h_t2, gres_t2 = trial_eval(xs, us, s, mu)
        except (EvaluationError, FloatingPointError):
            return None
        ok, via_armijo = _filter_check(
            filt, theta_t, phi_t, theta_cur, phi_cur, gphi_d, alpha_full, opts
        )
        if ok:
            alpha_dual = fraction_to_boundary(it.z, cand.dz, tau) if it.z.size else 1.0
            return _LsOutcome(
                bundle=cand, alpha=alpha_soc, alpha_dual=alpha_dual, xs=xs, us=us, s=s,
                theta=theta_t, phi=phi_t, cost=cost, soc_count=count, augment=not via_armijo,
            )
        if theta_t > opts.kappa_soc * theta_prev:
            return None
        b_soc = [alpha_soc * bc + bt for bc, bt in zip(b_soc, b_t2)]
        h_soc = [alpha_soc * hc + ht for hc, ht in zip(h_soc, h_t2)]
        gres_soc = [alpha_soc * gc + gt for gc, gt in zip(gres_soc, gres_t2)]
        theta_prev = theta_t
    return None


def _grad_phi_dot_d(problem: OcpProblem, it: Iterate, bundle: DirectionBundle, mu: float) -> float:
    total = 0.0
    for k in range(problem.K + 1):
        _, g = problem.evaluators[k].cost_grad(it.w(k))
        total += float(np.dot(g, bundle.dw(k)))
    if it.s.size:
        total -= mu * float(np.sum(bundle.ds / it.s))
    return total


def _direction_small(it: Iterate, bundle: DirectionBundle) -> bool:
    worst = 0.0
    for k in range(len(it.x)):
        dw = bundle.dw(k)
        w = it.w(k)
        if dw.size:
            worst = max(worst, float(np.max(np.abs(dw) / (1.0 + np.abs(w)))))
    if bundle.ds.size:
        worst = max(worst, float(np.max(np.abs(bundle.ds) / (1.0 + it.s))))
    return worst < 10.0 * _EPS


def solve(
    problem: OcpProblem,
    initial_guess: Tuple[List[np.ndarray], List[np.ndarray]],
    options: Optional[SolverOptions] = None,
) -> SolveResult:
    """Run the interior-point loop from a (possibly dynamically infeasible) guess.

    Deterministic: identical problems, guesses and options produce
    identical iteration logs.
    """
    opts = (options or SolverOptions()).validate()
    t_start = time.perf_counter()
    rc_la0 = rc.la_time
    problem.reset_fe_time()
    view = assemble_nlp(problem)
    trial_eval = _TrialEvaluator(problem, view)

    def make_result(status, it, kkt, records, barrier_log):
        return SolveResult(
            status=status,
            iterate=it,
            kkt=kkt,
            iterations=records,
            barrier_updates=barrier_log,
            timing={
                "total": time.perf_counter() - t_start,
                "function_eval": problem.fe_time,
                "linear_algebra": rc.la_time - rc_la0,
            },
        )

    try:
        it = init_slacks_duals(problem, initial_guess, opts, view)
    except EvaluationError:
        empty = KktError(math.inf, math.inf, math.inf, math.inf)
        dummy = Iterate(x=[], u=[], s=np.zeros(0), z=np.zeros(0), lam_g=np.zeros(0),
                        lam_h=[], pi=[], mu=opts.mu_init)
        return make_result(SolveStatus.EVALUATION_FAILURE, dummy, empty, [], [])

    mu = opts.mu_init
    it.mu = mu
    tau = max(opts.tau_min, 1.0 - mu)
    try:
        res = residual_pass(problem, view, it)
    except (EvaluationError, DomainError):
        empty = KktError(math.inf, math.inf, math.inf, math.inf)
        return make_result(SolveStatus.EVALUATION_FAILURE, it, empty, [], [])
    theta_max = 1e4 * max(1.0, res.theta)
    theta_min = 1e-4 * max(1.0, res.theta)
    filt = Filter(opts.gamma_theta, opts.gamma_phi, theta_min=theta_min)
    filt.reset(theta_max)

    reg = _RegState()
    records: List[IterationRecord] = []
    barrier_log: List[Tuple[int, float, float, float]] = []
    status = SolveStatus.MAX_ITERATIONS
    kkt_final = None

    def advance_mu(k, emu_total):
        nonlocal mu, tau
        mu_old = mu
        mu = update_barrier(mu, opts)
        tau = max(opts.tau_min, 1.0 - mu)
        it.mu = mu
        barrier_log.append((k, mu_old, emu_total, mu))
        filt.reset(theta_max)

    for k in range(opts.max_iter):
        try:
            res = residual_pass(problem, view, it)
        except EvaluationError:
            status = SolveStatus.EVALUATION_FAILURE
            kkt_final = KktError(math.inf, math.inf, math.inf, math.inf)
            break
        e0 = res.error_at(0.0)
        if e0.total <= opts.tol:
            status = SolveStatus.SOLVED
            kkt_final = e0
            break
        emu = res.error_at(mu)
        if emu.total <= opts.kappa_eps * mu and mu > opts.mu_floor * (1.0 + 1e-12):
            advance_mu(k, emu.total)
            emu = res.error_at(mu)

        try:
            bundle = compute_direction(problem, it, mu, reg, opts, view)
        except _Unrecoverable:
            status = SolveStatus.INDEFINITE_UNRECOVERABLE
            kkt_final = e0
            break
        except EvaluationError:
            status = SolveStatus.EVALUATION_FAILURE
            kkt_final = e0
            break

        if _direction_small(it, bundle):
            if mu > opts.mu_floor * (1.0 + 1e-12):
                advance_mu(k, emu.total)
                continue
            status = SolveStatus.SEARCH_DIRECTION_TOO_SMALL
            kkt_final = e0
            break

        theta_cur = res.theta
        phi_cur = res.cost - mu * float(np.sum(np.log(it.s))) if it.s.size else res.cost
        gphi_d = _grad_phi_dot_d(problem, it, bundle, mu)
        cost_c, theta_c, phi_c, b_cur, h_cur, gres_cur = trial_eval(it.x, it.u, it.s, mu)
        try:
            out = line_search(
                trial_eval, it, bundle, filt, mu, tau, theta_cur, phi_cur, gphi_d, opts,
                b_cur=b_cur, h_cur=h_cur, gres_cur=gres_cur,
            )
        except _StepTooSmall:
            if mu > opts.mu_floor * (1.0 + 1e-12):
                advance_mu(k, emu.total)
                continue
            status = SolveStatus.SEARCH_DIRECTION_TOO_SMALL
            kkt_final = e0
            break

        if out.augment:
            filt.add(theta_cur, phi_cur)

        s_old = it.s.copy()
        z_old = it.z.copy()
        it.x = out.xs
        it.u = out.us
        it.s = out.s
        for i in range(problem.K):
            it.pi[i] = it.pi[i] + out.alpha * out.bundle.step.dpi[i]
        for i in range(problem.K + 1):
            it.lam_h[i] = it.lam_h[i] + out.alpha * out.bundle.step.dlam[i]
        it.lam_g = it.lam_g + out.alpha * out.bundle.dlam_g
        z_new = it.z + out.alpha_dual * out.bundle.dz
        if it.s.size:
            z_new = np.minimum(np.maximum(z_new, mu / (opts.kappa_sigma * it.s)),
                               opts.kappa_sigma * mu / it.s)
        it.z = z_new

        ftb_p = float(np.min(it.s - (1.0 - tau) * s_old)) if it.s.size else 0.0
        ftb_d = float(np.min(it.z - (1.0 - tau) * z_old)) if it.z.size else 0.0
        records.append(
            IterationRecord(
                iter=k,
                mu=mu,
                objective=res.cost,
                theta=theta_cur,
                kkt_total=e0.total,
                alpha_primal=out.alpha,
                alpha_dual=out.alpha_dual,
                delta=out.bundle.delta,
                soc_count=out.soc_count,
                kkt_mu=emu.total,
                tau=tau,
                ftb_margin_primal=ftb_p,
                ftb_margin_dual=ftb_d,
                min_slack=float(np.min(it.s)) if it.s.size else math.inf,
                min_zdual=float(np.min(it.z)) if it.z.size else math.inf,
            )
        )

    if kkt_final is None:
        kkt_final = residual_pass(problem, view, it).error_at(0.0)
    return make_result(status, it, kkt_final, records, barrier_log)
