"""Stagewise problem model, slack-form view, KKT residuals and block assembly.

A problem is a list of stages. Every non-terminal stage supplies a cost,
discrete dynamics mapping into the next state, and optional inequality
(``L <= g(w) <= U``) and equality (``h(w) = 0``) path constraints over
``w = (u, x)``. The terminal stage has no controls and no dynamics.

All stage functions are written against the autodiff conventions of
:mod:`ocpik.autodiff`; first and second derivatives, including the
multiplier-contracted Lagrangian Hessian, are obtained by forward sweeps,
so no third-order tensors are ever materialized. Evaluators for distinct
stages are independent (no shared mutable state during evaluation);
single-threaded use is the baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, DomainError, InfeasibleBoundsError
from .riccati import StageBlocks, StageData

__all__ = [
    "OcpDims",
    "FunctionStage",
    "OcpProblem",
    "Iterate",
    "NlpView",
    "assemble_nlp",
    "KktError",
    "kkt_error",
    "eval_stage_blocks",
    "build_blocks",
    "Residuals",
    "residual_pass",
    "S_MAX",
]

S_MAX = 100.0  # cap in the multiplier-size scaling of the stopping test


@dataclass
class OcpDims:
    """Per-stage dimensions; index K is the terminal stage (nu[K] = 0)."""

    K: int
    nx: List[int]
    nu: List[int]
    ng: List[int]
    nh: List[int]

    def validate(self):
        if self.K < 1:
            raise DimensionError("horizon length must be at least 1")
        for name in ("nx", "nu", "ng", "nh"):
            v = getattr(self, name)
            if len(v) != self.K + 1:
                raise DimensionError(f"{name} must have K+1 entries")
            if any(d < 0 for d in v):
                raise DimensionError(f"{name} entries must be nonnegative")
        if self.nu[self.K] != 0:
            raise DimensionError("terminal stage cannot have controls")
        for k in range(self.K + 1):
            if self.nh[k] > self.nu[k] + self.nx[k]:
                raise DimensionError(
                    f"stage {k}: {self.nh[k]} equalities over {self.nu[k] + self.nx[k]} variables"
                )
        return self

    @property
    def n_dec(self) -> int:
        return sum(self.nx) + sum(self.nu)


@dataclass
class FunctionStage:
    """User-facing stage definition with plain callables over ``w = (u, x)``.

    ``lower``/``upper`` bound the inequality rows; either side may be
    infinite but not both. ``dynamics`` maps ``w`` to the next state and is
    None exactly at the terminal stage.
    """

    nu: int
    nx: int
    cost: Callable
    dynamics: Optional[Callable] = None
    ineq: Optional[Callable] = None
    eq: Optional[Callable] = None
    lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nh: int = 0

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.lower.shape != self.upper.shape:
            raise DimensionError("lower and upper bounds must have equal length")
        if self.ineq is None and self.lower.size:
            raise DimensionError("bounds given without an inequality function")
        if self.ineq is not None and self.lower.size == 0:
            raise DimensionError("inequality function given without bounds")
        if self.eq is None and self.nh:
            raise DimensionError("nh > 0 without an equality function")
        if self.eq is not None and self.nh == 0:
            raise DimensionError("equality function given with nh = 0")

    @property
    def ng(self) -> int:
        return self.lower.size


class _FeTimer:
    __slots__ = ("seconds",)

    def __init__(self):
        self.seconds = 0.0


class StageEvaluator:
    """Derivative-supplying wrapper around one :class:`FunctionStage`.

    Values and first derivatives are cached for the most recent evaluation
    point, so a residual pass followed by a block build costs one sweep.
    """

    def __init__(self, stage: FunctionStage, k: int, next_nx: Optional[int], timer: _FeTimer):
        self.stage = stage
        self.k = k
        self.nu = stage.nu
        self.nx = stage.nx
        self.nw = stage.nu + stage.nx
        self.ng = stage.ng
        self.nh = stage.nh
        self.next_nx = next_nx
        self._timer = timer
        self._val_cache = {}
        self._jac_cache = {}

    def _vals(self, name, fun, w, size):
        if fun is None:
            return np.zeros(size)
        key = w.tobytes()
        hit = self._val_cache.get(name)
        if hit is not None and hit[0] == key:
            return hit[1]
        jac_hit = self._jac_cache.get(name)
        if jac_hit is not None and jac_hit[0] == key:
            return jac_hit[1][0]
        t0 = time.perf_counter()
        out = np.atleast_1d(np.asarray(ad._call(fun, w), dtype=float))
        self._timer.seconds += time.perf_counter() - t0
        if out.shape != (size,):
            raise DimensionError(f"stage {self.k}: {name} returned shape {out.shape}, expected ({size},)")
        self._val_cache[name] = (key, out)
        return out

    def _jac(self, name, fun, w, size):
        if fun is None:
            return np.zeros(size), np.zeros((size, self.nw))
        key = w.tobytes()
        hit = self._jac_cache.get(name)
        if hit is not None and hit[0] == key:
            return hit[1]
        t0 = time.perf_counter()
        val, jac = ad.eval_jacobian(fun, w, m=size)
        self._timer.seconds += time.perf_counter() - t0
        if jac.shape != (size, self.nw):
            raise DimensionError(f"stage {self.k}: {name} Jacobian shape {jac.shape}")
        self._jac_cache[name] = (key, (val, jac))
        return val, jac

    # value-only paths (line search)
    def cost(self, w) -> float:
        key = w.tobytes()
        hit = self._val_cache.get("cost")
        if hit is not None and hit[0] == key:
            return hit[1]
        jac_hit = self._jac_cache.get("cost")
        if jac_hit is not None and jac_hit[0] == key:
            return jac_hit[1][0]
        t0 = time.perf_counter()
        out = float(ad._call(self.stage.cost, w))
        self._timer.seconds += time.perf_counter() - t0
        self._val_cache["cost"] = (key, out)
        return out

    def dyn(self, w):
        return self._vals("dyn", self.stage.dynamics, w, self.next_nx or 0)

    def ineq(self, w):
        return self._vals("ineq", self.stage.ineq, w, self.ng)

    def eq(self, w):
        return self._vals("eq", self.stage.eq, w, self.nh)

    # derivative paths
    def cost_grad(self, w):
        key = w.tobytes()
        hit = self._jac_cache.get("cost")
        if hit is not None and hit[0] == key:
            return hit[1]
        t0 = time.perf_counter()
        val, grad = ad.eval_gradient(self.stage.cost, w)
        self._timer.seconds += time.perf_counter() - t0
        self._jac_cache["cost"] = (key, (val, grad))
        return val, grad

    def dyn_jac(self, w):
        return self._jac("dyn", self.stage.dynamics, w, self.next_nx or 0)

    def ineq_jac(self, w):
        return self._jac("ineq", self.stage.ineq, w, self.ng)

    def eq_jac(self, w):
        return self._jac("eq", self.stage.eq, w, self.nh)

    def lag_hess(self, w, pi, ineq_mult, eq_mult):
        """Hessian of cost + pi'f + c_g'g + c_h'h in one hyper-dual sweep."""
        st = self.stage

        def scalarized(wd):
            acc = st.cost(wd)
            if st.dynamics is not None and pi is not None and pi.size:
                acc = acc + np.dot(pi, st.dynamics(wd))
            if st.ineq is not None and ineq_mult.size and np.any(ineq_mult):
                acc = acc + np.dot(ineq_mult, st.ineq(wd))
            if st.eq is not None and eq_mult.size:
                acc = acc + np.dot(eq_mult, st.eq(wd))
            return acc

        t0 = time.perf_counter()
        H = ad.hessian(scalarized, w)
        self._timer.seconds += time.perf_counter() - t0
        return H


class OcpProblem:
    """A constrained optimal control problem over a fixed horizon."""

    def __init__(self, stages: List[FunctionStage]):
        if len(stages) < 2:
            raise DimensionError("need at least one interval plus a terminal stage")
        term = stages[-1]
        if term.dynamics is not None or term.nu != 0:
            raise DimensionError("terminal stage must have no controls and no dynamics")
        for k, s in enumerate(stages[:-1]):
            if s.dynamics is None:
                raise DimensionError(f"stage {k} must supply dynamics")
        self.stages = stages
        self.dims = OcpDims(
            K=len(stages) - 1,
            nx=[s.nx for s in stages],
            nu=[s.nu for s in stages],
            ng=[s.ng for s in stages],
            nh=[s.nh for s in stages],
        ).validate()
        self._fe_timer = _FeTimer()
        self.evaluators = [
            StageEvaluator(
                s, k, self.dims.nx[k + 1] if k < self.dims.K else None, self._fe_timer
            )
            for k, s in enumerate(stages)
        ]

    @property
    def K(self) -> int:
        return self.dims.K

    @property
    def fe_time(self) -> float:
        return self._fe_timer.seconds

    def reset_fe_time(self):
        self._fe_timer.seconds = 0.0


@dataclass
class Iterate:
    """Full primal-dual point, including the current barrier parameter."""

    x: List[np.ndarray]
    u: List[np.ndarray]
    s: np.ndarray
    z: np.ndarray
    lam_g: np.ndarray
    lam_h: List[np.ndarray]
    pi: List[np.ndarray]
    mu: float

    def w(self, k: int) -> np.ndarray:
        if k < len(self.u):
            return np.concatenate([self.u[k], self.x[k]])
        return self.x[k]

    def copy(self) -> "Iterate":
        return Iterate(
            x=[v.copy() for v in self.x],
            u=[v.copy() for v in self.u],
            s=self.s.copy(),
            z=self.z.copy(),
            lam_g=self.lam_g.copy(),
            lam_h=[v.copy() for v in self.lam_h],
            pi=[v.copy() for v in self.pi],
            mu=self.mu,
        )


class NlpView:
    """Index maps from the stagewise problem to the slack-form NLP.

    Every finite bound side of an inequality row owns one slack: a lower
    side contributes the row ``g - L - s = 0`` and an upper side the row
    ``U - g - s = 0``, both with ``s >= 0``. Slacks are ordered stage by
    stage, lower sides before upper sides within a stage.
    """

    def __init__(self, problem: OcpProblem):
        dims = problem.dims
        self.dims = dims
        self.lo_rows: List[np.ndarray] = []
        self.hi_rows: List[np.ndarray] = []
        self.slack_slice: List[slice] = []
        self.lower: List[np.ndarray] = []
        self.upper: List[np.ndarray] = []
        self.labels: List[tuple] = []
        self._index = {}
        off = 0
        for k, st in enumerate(problem.stages):
            lo_fin = np.isfinite(st.lower)
            hi_fin = np.isfinite(st.upper)
            if np.any(st.lower > st.upper):
                raise InfeasibleBoundsError(f"stage {k}: lower bound above upper bound")
            if st.ng and np.any(~lo_fin & ~hi_fin):
                raise InfeasibleBoundsError(f"stage {k}: inequality row with no finite side")
            lo = np.flatnonzero(lo_fin)
            hi = np.flatnonzero(hi_fin)
            self.lo_rows.append(lo)
            self.hi_rows.append(hi)
            self.lower.append(st.lower)
            self.upper.append(st.upper)
            count = lo.size + hi.size
            self.slack_slice.append(slice(off, off + count))
            for row in lo:
                self._index[(k, int(row), "lo")] = len(self.labels)
                self.labels.append((k, int(row), "lo"))
            for row in hi:
                self._index[(k, int(row), "hi")] = len(self.labels)
                self.labels.append((k, int(row), "hi"))
            off += count
        self.n_slack = off
        self.n_dec = dims.n_dec
        self.n_eq_rows = sum(dims.nx[1:]) + sum(dims.nh)

    def slack_index(self, k: int, row: int, side: str) -> int:
        return self._index[(k, row, side)]

    def stage_slack_count(self, k: int) -> int:
        return self.lo_rows[k].size + self.hi_rows[k].size

    def slack_values(self, k: int, gval: np.ndarray) -> np.ndarray:
        """Distances to the finite bound sides (the slack targets)."""
        lo, hi = self.lo_rows[k], self.hi_rows[k]
        return np.concatenate([gval[lo] - self.lower[k][lo], self.upper[k][hi] - gval[hi]])

    def signed_rows(self, k: int, gjac: np.ndarray) -> np.ndarray:
        lo, hi = self.lo_rows[k], self.hi_rows[k]
        return np.vstack([gjac[lo], -gjac[hi]])

    def fold_ineq_mult(self, k: int, lam_stage: np.ndarray) -> np.ndarray:
        """Per-inequality-row contraction weights from per-slack multipliers."""
        lo, hi = self.lo_rows[k], self.hi_rows[k]
        out = np.zeros(self.lower[k].size)
        np.add.at(out, lo, lam_stage[: lo.size])
        np.add.at(out, hi, -lam_stage[lo.size :])
        return out


def assemble_nlp(problem: OcpProblem) -> NlpView:
    """Build the slack-form view of the problem; validates dims and bounds."""
    problem.dims.validate()
    return NlpView(problem)


@dataclass
class KktError:
    """Componentwise first-order error, scaled Ipopt style."""

    stationarity: float
    eq_violation: float
    ineq_violation: float
    centering: float

    @property
    def total(self) -> float:
        return max(self.stationarity, self.eq_violation, self.ineq_violation, self.centering)


def _inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass
class Residuals:
    """Raw residual vectors of one iterate, reusable for several mu values."""

    stat: List[np.ndarray]  # per-stage stationarity over w
    stat_s: np.ndarray  # -lam_g - z rows
    eq: List[np.ndarray]  # dynamics gaps then stagewise equality values
    ineq: List[np.ndarray]  # per-stage slack-row residuals g~ - s
    comp: np.ndarray  # s * z
    cost: float
    s_d: float
    s_c: float

    @property
    def theta(self) -> float:
        m = 0.0
        for v in self.eq:
            m = max(m, _inf(v))
        for v in self.ineq:
            m = max(m, _inf(v))
        return m

    def error_at(self, mu: float) -> KktError:
        stat = max(max((_inf(v) for v in self.stat), default=0.0), _inf(self.stat_s))
        eq = max((_inf(v) for v in self.eq), default=0.0)
        ineq = max((_inf(v) for v in self.ineq), default=0.0)
        cen = _inf(self.comp - mu) if self.comp.size else 0.0
        return KktError(
            stationarity=stat / self.s_d,
            eq_violation=eq,
            ineq_violation=ineq,
            centering=cen / self.s_c,
        )


def residual_pass(problem: OcpProblem, view: NlpView, it: Iterate) -> Residuals:
    """Evaluate all first-order residual vectors at an iterate."""
    if np.any(it.s <= 0.0) or np.any(it.z <= 0.0):
        raise DomainError("slacks and bound duals must be strictly positive")
    K = problem.K
    stat, eqs, ineqs = [], [], []
    cost = 0.0
    mult_sum = float(np.sum(np.abs(it.lam_g))) + float(np.sum(np.abs(it.z)))
    mult_cnt = it.lam_g.size + it.z.size
    for k in range(K + 1):
        ev = problem.evaluators[k]
        w = it.w(k)
        lval, lgrad = ev.cost_grad(w)
        cost += lval
        grad = lgrad.copy()
        if k < K:
            fval, fjac = ev.dyn_jac(w)
            grad += fjac.T @ it.pi[k]
            eqs.append(fval - it.x[k + 1])
        if ev.nh:
            hval, hjac = ev.eq_jac(w)
            grad += hjac.T @ it.lam_h[k]
            eqs.append(hval)
            mult_sum += float(np.sum(np.abs(it.lam_h[k])))
        mult_cnt += it.lam_h[k].size
        if k >= 1:
            grad[ev.nu :] -= it.pi[k - 1]
        sl = view.slack_slice[k]
        if sl.stop > sl.start:
            gval, gjac = ev.ineq_jac(w)
            Gsig = view.signed_rows(k, gjac)
            gtil = view.slack_values(k, gval)
            grad += Gsig.T @ it.lam_g[sl]
            ineqs.append(gtil - it.s[sl])
        elif ev.ng:
            pass  # all rows unbounded cannot happen (validated)
        stat.append(grad)
    for k in range(K):
        mult_cnt += it.pi[k].size
        mult_sum += float(np.sum(np.abs(it.pi[k])))
    s_d = max(S_MAX, mult_sum / mult_cnt) / S_MAX if mult_cnt else 1.0
    s_c = (
        max(S_MAX, float(np.sum(np.abs(it.z))) / it.z.size) / S_MAX if it.z.size else 1.0
    )
    return Residuals(
        stat=stat,
        stat_s=-it.lam_g - it.z,
        eq=eqs,
        ineq=ineqs,
        comp=it.s * it.z,
        cost=cost,
        s_d=s_d,
        s_c=s_c,
    )


def kkt_error(problem: OcpProblem, it: Iterate, mu: float, view: Optional[NlpView] = None) -> KktError:
    """First-order error of the barrier conditions at ``(iterate, mu)``.

    With ``mu = 0`` this is the original problem's KKT error. Stationarity
    and centering norms are divided by multiplier-size divisors capped at
    ``S_MAX`` so tolerances stay comparable across problem magnitudes.
    """
    view = view if view is not None else assemble_nlp(problem)
    return residual_pass(problem, view, it).error_at(mu)


@dataclass
class StageExtras:
    """Per-stage recovery data for eliminated slack and bound-dual steps."""

    Gsig: np.ndarray  # signed slack-row Jacobian
    gres: np.ndarray  # slack-row residuals g~ - s
    sl: slice  # global slack slice of this stage
    grad: np.ndarray  # Lagrangian gradient over w without the barrier correction
    sigma: np.ndarray  # z / s on this stage's slack rows
    hess_scale: float = 0.0  # magnitude of the Hessian before barrier augmentation


def _stage_blocks(problem: OcpProblem, view: NlpView, it: Iterate, mu: float, k: int):
    K = problem.K
    ev = problem.evaluators[k]
    w = it.w(k)
    nu = ev.nu
    lval, lgrad = ev.cost_grad(w)
    grad = lgrad.copy()
    if k < K:
        fval, fjac = ev.dyn_jac(w)
        grad += fjac.T @ it.pi[k]
    hval, hjac = ev.eq_jac(w)
    if ev.nh:
        grad += hjac.T @ it.lam_h[k]
    if k >= 1:
        grad[nu:] -= it.pi[k - 1]

    sl = view.slack_slice[k]
    s_st, z_st, lam_st = it.s[sl], it.z[sl], it.lam_g[sl]
    if sl.stop > sl.start:
        gval, gjac = ev.ineq_jac(w)
        Gsig = view.signed_rows(k, gjac)
        gres = view.slack_values(k, gval) - s_st
        sigma = z_st / s_st
        contract = view.fold_ineq_mult(k, lam_st)
    else:
        Gsig = np.zeros((0, ev.nw))
        gres = np.zeros(0)
        sigma = np.zeros(0)
        contract = np.zeros(ev.ng)

    W = ev.lag_hess(w, it.pi[k] if k < K else None, contract, it.lam_h[k])
    hess_scale = float(np.max(np.abs(W))) if W.size else 0.0
    if Gsig.shape[0]:
        W = W + Gsig.T @ (sigma[:, None] * Gsig)
    gamma = grad - (Gsig.T @ (mu / s_st - sigma * gres) if Gsig.shape[0] else 0.0)

    if k < K:
        data = StageData(
            Q=W[nu:, nu:],
            q=gamma[nu:],
            Hx=hjac[:, nu:],
            h=hval,
            R=W[:nu, :nu],
            S=W[nu:, :nu],
            r=gamma[:nu],
            A=fjac[:, nu:],
            B=fjac[:, :nu],
            b=fval - it.x[k + 1],
            Hu=hjac[:, :nu],
        )
    else:
        data = StageData(Q=W, q=gamma, Hx=hjac, h=hval)
    return data, StageExtras(
        Gsig=Gsig, gres=gres, sl=sl, grad=grad, sigma=sigma, hess_scale=hess_scale
    )


def eval_stage_blocks(
    problem: OcpProblem, it: Iterate, mu: float, k: int, view: Optional[NlpView] = None
) -> StageData:
    """Blocks of stage ``k`` of the reduced system at ``(iterate, mu)``."""
    if np.any(it.s <= 0.0) or np.any(it.z <= 0.0):
        raise DomainError("slacks and bound duals must be strictly positive")
    view = view if view is not None else assemble_nlp(problem)
    return _stage_blocks(problem, view, it, mu, k)[0]


def build_blocks(
    problem: OcpProblem, it: Iterate, mu: float, view: Optional[NlpView] = None
):
    """All stage blocks plus slack-recovery extras for one iterate."""
    view = view if view is not None else assemble_nlp(problem)
    datas, extras = [], []
    for k in range(problem.K + 1):
        d, e = _stage_blocks(problem, view, it, mu, k)
        datas.append(d)
        extras.append(e)
    return StageBlocks(datas), extras
