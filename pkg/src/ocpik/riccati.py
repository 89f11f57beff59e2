"""Block-structured factorization and solve of the stagewise saddle system.

The system couples, per control interval ``k``, the symmetric Hessian
blocks ``[R_k S_k'; S_k Q_k]`` over ``w_k = (u_k, x_k)``, the linearized
dynamics rows ``B_k du_k + A_k dx_k - dx_{k+1} = -b_k`` with multipliers
``pi_{k+1}``, and stagewise equality rows ``H_{k,u} du_k + H_{k,x} dx_k =
-h_k`` with multipliers ``lam_k`` (``v_K`` at the terminal stage).

The factorization runs backward over the stages. At each stage the
incoming pending equality set (constraints that later stages could not
absorb) is transported through the dynamics, stacked with the stage's own
equality rows, and split by an orthogonal (SVD-based) elimination into a
part absorbed into the controls and a part propagated to the previous
stage. The cost-to-go update then happens on the remaining free control
directions, whose Cholesky pivots double as the positive-definiteness test
of the reduced Hessian. Work per stage is constant in the horizon length,
so factorize + solve is linear in the number of stages.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from .errors import ApiMisuseError, DimensionError, EvaluationError, RankDeficientError, SingularSystemError

__all__ = [
    "StageData",
    "StageBlocks",
    "RhsParts",
    "StepDirection",
    "RiccatiFactorization",
    "IndefiniteReport",
    "factorize",
    "solve",
    "iterative_refinement",
    "dense_oracle_solve",
    "dense_oracle_inertia",
    "system_matvec",
    "system_residual",
    "PIVOT_TOL",
    "RANK_TOL",
    "MAX_REFINE",
    "STALL_FACTOR",
]

PIVOT_TOL = 1e-12
RANK_TOL = 1e-10
MAX_REFINE = 5
STALL_FACTOR = 0.9

# cumulative wall time spent in factorize / solve / refinement, for reports
la_time = 0.0


@dataclass
class StageData:
    """Blocks of one stage. Terminal stages carry only Q, q, Hx, h."""

    Q: np.ndarray
    q: np.ndarray
    Hx: np.ndarray
    h: np.ndarray
    R: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    Hu: Optional[np.ndarray] = None

    @property
    def terminal(self) -> bool:
        return self.R is None

    @property
    def nx(self) -> int:
        return self.Q.shape[0]

    @property
    def nu(self) -> int:
        return 0 if self.R is None else self.R.shape[0]

    @property
    def nh(self) -> int:
        return self.Hx.shape[0]


class StageBlocks:
    """Whole-horizon container of :class:`StageData`, terminal stage last."""

    def __init__(self, stages: List[StageData]):
        if len(stages) < 2:
            raise DimensionError("need at least one interval plus a terminal stage")
        if not stages[-1].terminal:
            raise DimensionError("last stage must be terminal (no dynamics)")
        self.stages = stages
        self.K = len(stages) - 1
        self.nx = [s.nx for s in stages]
        self.nu = [s.nu for s in stages]
        self.nh = [s.nh for s in stages]
        for k in range(self.K):
            s = stages[k]
            if s.terminal:
                raise DimensionError(f"stage {k} lacks dynamics blocks")
            nxn = self.nx[k + 1]
            if s.A.shape != (nxn, s.nx) or s.B.shape != (nxn, s.nu) or s.b.shape != (nxn,):
                raise DimensionError(f"stage {k}: dynamics block shapes inconsistent")
            if s.Hu.shape != (s.nh, s.nu) or s.Hx.shape != (s.nh, s.nx):
                raise DimensionError(f"stage {k}: equality block shapes inconsistent")

    def rhs(self) -> "RhsParts":
        st = self.stages
        return RhsParts(
            r=[st[k].r.copy() for k in range(self.K)],
            q=[st[k].q.copy() for k in range(self.K + 1)],
            b=[st[k].b.copy() for k in range(self.K)],
            h=[st[k].h.copy() for k in range(self.K + 1)],
        )

    def n_primal(self) -> int:
        return sum(self.nx) + sum(self.nu)

    def n_dual(self) -> int:
        return sum(self.nx[1:]) + sum(self.nh)


@dataclass
class RhsParts:
    """Right-hand-side (or residual) vectors in system row layout."""

    r: List[np.ndarray]
    q: List[np.ndarray]
    b: List[np.ndarray]
    h: List[np.ndarray]

    def inf_norm(self) -> float:
        m = 0.0
        for group in (self.r, self.q, self.b, self.h):
            for v in group:
                if v.size:
                    m = max(m, float(np.max(np.abs(v))))
        return m


@dataclass
class StepDirection:
    """Primal-dual step: states, controls, dynamics and equality multipliers."""

    dx: List[np.ndarray]
    du: List[np.ndarray]
    dpi: List[np.ndarray]
    dlam: List[np.ndarray]
    residual_norm: Optional[float] = None

    def axpy(self, alpha: float, other: "StepDirection") -> "StepDirection":
        return StepDirection(
            dx=[a + alpha * c for a, c in zip(self.dx, other.dx)],
            du=[a + alpha * c for a, c in zip(self.du, other.du)],
            dpi=[a + alpha * c for a, c in zip(self.dpi, other.dpi)],
            dlam=[a + alpha * c for a, c in zip(self.dlam, other.dlam)],
        )

    def inf_norm(self) -> float:
        m = 0.0
        for group in (self.dx, self.du, self.dpi, self.dlam):
            for v in group:
                if v.size:
                    m = max(m, float(np.max(np.abs(v))))
        return m


@dataclass
class IndefiniteReport:
    """Reduced Hessian failed the positivity test during the recursion."""

    stage: int
    delta: float


@dataclass
class _StageFactor:
    A: np.ndarray
    B: np.ndarray
    C_in: np.ndarray  # pending equality rows entering from stage k+1
    P_in: np.ndarray  # cost-to-go matrix of stage k+1
    U: np.ndarray  # row rotation of the stacked constraint set
    sr: np.ndarray  # nonzero singular values of its control Jacobian
    Vr: np.ndarray  # control-space basis absorbed by the constraints
    Zb: np.ndarray  # free control directions
    E: np.ndarray  # constrained control feedback u_c = E x + e
    Huu: np.ndarray
    Hux: np.ndarray
    Lvv: tuple  # Cholesky factor of the free-direction Hessian
    Mvx: np.ndarray  # free-direction cross term
    Kv: np.ndarray  # free-direction feedback gain
    P: np.ndarray  # cost-to-go at stage k
    C_out: np.ndarray  # pending rows handed to stage k-1


@dataclass
class _HeadFactor:
    C: np.ndarray  # pending rows constraining the initial state
    P: np.ndarray
    U: np.ndarray
    sr: np.ndarray
    Vr: np.ndarray
    Zb: np.ndarray
    Lred: tuple


@dataclass
class RiccatiFactorization:
    """Matrix factors of the backward recursion; immutable once built.

    Safe for concurrent read access; creating it and solving with it are
    single-threaded operations.
    """

    delta: float
    K: int
    stage: List[_StageFactor]
    head: _HeadFactor
    inertia: str = "PD"
    _blocks_id: int = 0


def _symlower(M: np.ndarray) -> np.ndarray:
    """Symmetric matrix from the lower triangle; upper triangle is ignored."""
    L = np.tril(M)
    return L + np.tril(M, -1).T


def _chol_pd(M: np.ndarray, pivot_tol: float):
    """Cholesky factor when all pivots clear the tolerance, else None.

    Each pivot is compared against its own diagonal entry, so rows of very
    different magnitude (barrier-dominated next to lightly weighted ones)
    are judged on their own scale.
    """
    if M.shape[0] == 0:
        return (np.zeros((0, 0)), True)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    piv = np.diag(L) ** 2
    if np.any(piv <= pivot_tol * np.maximum(1.0, np.diag(M))):
        return None
    return (L, True)


def _cho_solve(L, rhs):
    if L[0].shape[0] == 0:
        return np.zeros_like(rhs)
    return sla.cho_solve(L, rhs)


def _check_finite_blocks(blocks: StageBlocks):
    for k, s in enumerate(blocks.stages):
        for name in ("Q", "q", "Hx", "h", "R", "S", "r", "A", "B", "b", "Hu"):
            v = getattr(s, name)
            if v is not None and v.size and not np.all(np.isfinite(v)):
                raise EvaluationError(f"non-finite entry in block {name}", stage=k)


def factorize(
    blocks: StageBlocks,
    delta: float = 0.0,
    pivot_tol: float = PIVOT_TOL,
    rank_tol: float = RANK_TOL,
):
    """Backward factorization; returns the factors or an IndefiniteReport.

    ``delta`` is added to the diagonal of every Hessian block (all Q_k and
    R_k), never to constraint rows. Raises :class:`RankDeficientError`
    when the stacked stagewise equalities lose row rank during
    elimination.
    """
    global la_time
    t0 = time.perf_counter()
    if delta < 0:
        raise ApiMisuseError("regularization must be nonnegative")
    _check_finite_blocks(blocks)
    K = blocks.K
    st = blocks.stages

    term = st[K]
    P = _symlower(term.Q) + delta * np.eye(term.nx)
    C = term.Hx.copy()
    factors: List[Optional[_StageFactor]] = [None] * K

    for k in range(K - 1, -1, -1):
        s = st[k]
        nu, nx = s.nu, s.nx
        Gu = np.vstack([C @ s.B, s.Hu]) if (C.shape[0] or s.nh) else np.zeros((0, nu))
        Gx = np.vstack([C @ s.A, s.Hx]) if (C.shape[0] or s.nh) else np.zeros((0, nx))
        m = Gu.shape[0]
        scale = max(1.0, float(np.max(np.abs(Gu))) if Gu.size else 0.0,
                    float(np.max(np.abs(Gx))) if Gx.size else 0.0)

        U, sig, Vt = np.linalg.svd(Gu, full_matrices=True)
        sig_tol = rank_tol * (float(sig[0]) if sig.size and sig[0] > 0 else 1.0)
        rho = int(np.sum(sig > sig_tol))
        sr = sig[:rho]
        Vr = Vt[:rho].T
        Zb = Vt[rho:].T
        Gxr = U.T @ Gx if m else Gx
        Tx = Gxr[:rho]
        C_out = Gxr[rho:]
        if C_out.shape[0] > nx:
            la_time += time.perf_counter() - t0
            raise RankDeficientError(
                f"{C_out.shape[0]} propagated equalities exceed {nx} states", stage=k
            )
        for row in C_out:
            if row.size == 0 or float(np.max(np.abs(row))) <= rank_tol * scale:
                la_time += time.perf_counter() - t0
                raise RankDeficientError("dependent stagewise equality rows", stage=k)

        E = -Vr @ (Tx / sr[:, None]) if rho else np.zeros((nu, nx))
        R = _symlower(s.R) + delta * np.eye(nu)
        Q = _symlower(s.Q) + delta * np.eye(nx)
        Huu = R + s.B.T @ P @ s.B
        Huu = 0.5 * (Huu + Huu.T)
        Hux = s.S.T + s.B.T @ P @ s.A
        Hxx = Q + s.A.T @ P @ s.A

        Mvv = Zb.T @ Huu @ Zb
        Mvv = 0.5 * (Mvv + Mvv.T)
        L = _chol_pd(Mvv, pivot_tol)
        if L is None:
            la_time += time.perf_counter() - t0
            return IndefiniteReport(stage=k, delta=delta)
        Mvx = Zb.T @ (Huu @ E + Hux)
        Kv = -_cho_solve(L, Mvx)
        HE = Huu @ E
        Pk = Hxx + E.T @ HE + E.T @ Hux + Hux.T @ E + Mvx.T @ Kv
        Pk = 0.5 * (Pk + Pk.T)

        factors[k] = _StageFactor(
            A=s.A, B=s.B, C_in=C, P_in=P, U=U, sr=sr, Vr=Vr, Zb=Zb, E=E,
            Huu=Huu, Hux=Hux, Lvv=L, Mvx=Mvx, Kv=Kv, P=Pk, C_out=C_out,
        )
        P = Pk
        C = C_out

    # initial-stage reduced solve over the remaining pending equalities
    m0 = C.shape[0]
    nx0 = blocks.nx[0]
    U0, sig0, V0t = np.linalg.svd(C, full_matrices=True) if m0 else (
        np.zeros((0, 0)), np.zeros(0), np.zeros((0, nx0)))
    sig_tol0 = rank_tol * (float(sig0[0]) if sig0.size and sig0[0] > 0 else 1.0)
    if int(np.sum(sig0 > sig_tol0)) < m0:
        la_time += time.perf_counter() - t0
        raise RankDeficientError("dependent equalities at the initial state", stage=0)
    Vr0 = V0t[:m0].T if m0 else np.zeros((nx0, 0))
    Zb0 = V0t[m0:].T if m0 else np.eye(nx0)
    red = Zb0.T @ P @ Zb0
    red = 0.5 * (red + red.T)
    Lred = _chol_pd(red, pivot_tol)
    if Lred is None:
        la_time += time.perf_counter() - t0
        return IndefiniteReport(stage=0, delta=delta)

    head = _HeadFactor(C=C, P=P, U=U0, sr=sig0[:m0], Vr=Vr0, Zb=Zb0, Lred=Lred)
    fact = RiccatiFactorization(delta=delta, K=K, stage=factors, head=head,
                                inertia="PD", _blocks_id=id(blocks))
    la_time += time.perf_counter() - t0
    return fact


def _solve_rhs(fact: RiccatiFactorization, rhs: RhsParts) -> StepDirection:
    """Backward-forward vector sweep for one right-hand side."""
    K = fact.K
    # backward: cost-to-go gradients p, pending offsets c, stage vectors
    p = rhs.q[K].copy()
    c = rhs.h[K].copy()
    e_s: List[np.ndarray] = [None] * K
    kv_s: List[np.ndarray] = [None] * K
    lin_u_s: List[np.ndarray] = [None] * K
    p_in_s: List[np.ndarray] = [None] * K
    for k in range(K - 1, -1, -1):
        f = fact.stage[k]
        gvec = np.concatenate([f.C_in @ rhs.b[k] + c, rhs.h[k]])
        ghat = f.U.T @ gvec
        rho = f.sr.size
        w0 = -ghat[:rho] / f.sr if rho else np.zeros(0)
        c = ghat[rho:]
        e = f.Vr @ w0 if rho else np.zeros(f.B.shape[1])
        Pb_p = f.P_in @ rhs.b[k] + p
        lin_u = rhs.r[k] + f.B.T @ Pb_p
        lin_x = rhs.q[k] + f.A.T @ Pb_p
        t = f.Huu @ e + lin_u
        fv = f.Zb.T @ t
        kv = -_cho_solve(f.Lvv, fv)
        p_in_s[k] = p
        p = lin_x + f.E.T @ t + f.Hux.T @ e + f.Mvx.T @ kv
        e_s[k], kv_s[k], lin_u_s[k] = e, kv, lin_u

    # initial state
    h = fact.head
    m0 = h.C.shape[0]
    if m0:
        wfix = -(h.U.T @ c) / h.sr
        xpart = h.Vr @ wfix
    else:
        xpart = np.zeros(h.P.shape[0])
    xi = -_cho_solve(h.Lred, h.Zb.T @ (h.P @ xpart + p))
    x = xpart + h.Zb @ xi
    if m0:
        nu_mult = h.U @ (-(h.Vr.T @ (h.P @ x + p)) / h.sr)
    else:
        nu_mult = np.zeros(0)

    dx: List[np.ndarray] = [x]
    du: List[np.ndarray] = []
    dpi: List[np.ndarray] = [None] * K
    dlam: List[np.ndarray] = [None] * (K + 1)

    # forward: roll out the step and recover multipliers
    for k in range(K):
        f = fact.stage[k]
        u = f.Zb @ (f.Kv @ x + kv_s[k]) + f.E @ x + e_s[k]
        gu = f.Huu @ u + f.Hux @ x + lin_u_s[k]
        rho = f.sr.size
        zeta_rho = -(f.Vr.T @ gu) / f.sr if rho else np.zeros(0)
        eta = f.U @ np.concatenate([zeta_rho, nu_mult])
        m_in = f.C_in.shape[0]
        nu_next = eta[:m_in]
        dlam[k] = eta[m_in:]
        x_next = f.A @ x + f.B @ u + rhs.b[k]
        dpi[k] = f.P_in @ x_next + p_in_s[k] + f.C_in.T @ nu_next
        du.append(u)
        dx.append(x_next)
        x = x_next
        nu_mult = nu_next
    dlam[K] = nu_mult
    return StepDirection(dx=dx, du=du, dpi=dpi, dlam=dlam)


def solve(fact: RiccatiFactorization, blocks: StageBlocks) -> StepDirection:
    """Solve the system defined by ``blocks`` with factors from the same blocks."""
    global la_time
    if not isinstance(fact, RiccatiFactorization):
        raise ApiMisuseError("factorize() did not return a usable factorization")
    if fact._blocks_id != id(blocks) or fact.K != blocks.K:
        raise ApiMisuseError("factorization does not belong to these blocks")
    t0 = time.perf_counter()
    out = _solve_rhs(fact, blocks.rhs())
    la_time += time.perf_counter() - t0
    return out


def system_matvec(blocks: StageBlocks, delta: float, d: StepDirection) -> RhsParts:
    """Product of the delta-regularized system matrix with a direction."""
    K = blocks.K
    st = blocks.stages
    out_r, out_q, out_b, out_h = [], [], [], []
    for k in range(K):
        s = st[k]
        R = _symlower(s.R)
        Q = _symlower(s.Q)
        ru = R @ d.du[k] + s.S.T @ d.dx[k] + s.B.T @ d.dpi[k] + s.Hu.T @ d.dlam[k] + delta * d.du[k]
        qx = s.S @ d.du[k] + Q @ d.dx[k] + s.A.T @ d.dpi[k] + s.Hx.T @ d.dlam[k] + delta * d.dx[k]
        if k > 0:
            qx = qx - d.dpi[k - 1]
        out_r.append(ru)
        out_q.append(qx)
        out_b.append(s.B @ d.du[k] + s.A @ d.dx[k] - d.dx[k + 1])
        out_h.append(s.Hu @ d.du[k] + s.Hx @ d.dx[k])
    sK = st[K]
    QK = _symlower(sK.Q)
    qx = QK @ d.dx[K] + sK.Hx.T @ d.dlam[K] + delta * d.dx[K]
    if K > 0:
        qx = qx - d.dpi[K - 1]
    out_q.append(qx)
    out_h.append(sK.Hx @ d.dx[K])
    return RhsParts(r=out_r, q=out_q, b=out_b, h=out_h)


def system_residual(blocks: StageBlocks, delta: float, d: StepDirection) -> RhsParts:
    """Residual ``M d + rhs`` of the delta-regularized system."""
    mv = system_matvec(blocks, delta, d)
    rhs = blocks.rhs()
    return RhsParts(
        r=[a + b for a, b in zip(mv.r, rhs.r)],
        q=[a + b for a, b in zip(mv.q, rhs.q)],
        b=[a + b for a, b in zip(mv.b, rhs.b)],
        h=[a + b for a, b in zip(mv.h, rhs.h)],
    )


def iterative_refinement(
    fact: RiccatiFactorization,
    blocks: StageBlocks,
    direction: StepDirection,
    max_refine: int = MAX_REFINE,
    stall_factor: float = STALL_FACTOR,
) -> StepDirection:
    """Refine a solve result against the exact delta-regularized system.

    Re-solves on the true residual until it drops below
    ``1e-12 * max(1, |rhs|_inf)``, the round budget runs out, or the
    residual stalls; the best direction seen is returned with its final
    residual norm recorded.
    """
    global la_time
    t0 = time.perf_counter()
    rhs_norm = blocks.rhs().inf_norm()
    refine_tol = 1e-12 * max(1.0, rhs_norm)
    best = direction
    res = system_residual(blocks, fact.delta, best)
    rn = res.inf_norm()
    for _ in range(max_refine):
        if rn <= refine_tol:
            break
        corr = _solve_rhs(fact, res)
        cand = best.axpy(1.0, corr)
        res2 = system_residual(blocks, fact.delta, cand)
        rn2 = res2.inf_norm()
        if rn2 < rn:
            best, res, rn = cand, res2, rn2
        if rn2 > stall_factor * rn:
            break
    best.residual_norm = rn
    la_time += time.perf_counter() - t0
    return best


# -- dense oracle ----------------------------------------------------------


class _DenseLayout:
    def __init__(self, blocks: StageBlocks):
        K = blocks.K
        self.off_u = []
        self.off_x = []
        off = 0
        for k in range(K + 1):
            self.off_u.append(off)
            off += blocks.nu[k]
            self.off_x.append(off)
            off += blocks.nx[k]
        self.n_primal = off
        self.off_pi = []
        for k in range(K):
            self.off_pi.append(off)
            off += blocks.nx[k + 1]
        self.off_lam = []
        for k in range(K + 1):
            self.off_lam.append(off)
            off += blocks.nh[k]
        self.n = off


def _assemble_dense(blocks: StageBlocks, delta: float):
    lay = _DenseLayout(blocks)
    K = blocks.K
    st = blocks.stages
    M = np.zeros((lay.n, lay.n))
    rhs = np.zeros(lay.n)

    def put(i, j, A):
        if A.size:
            M[i : i + A.shape[0], j : j + A.shape[1]] += A

    for k in range(K + 1):
        s = st[k]
        ou, ox = lay.off_u[k], lay.off_x[k]
        Q = _symlower(s.Q) + delta * np.eye(s.nx)
        put(ox, ox, Q)
        rhs[ox : ox + s.nx] = s.q
        ol = lay.off_lam[k]
        put(ol, ox, s.Hx)
        put(ox, ol, s.Hx.T)
        rhs[ol : ol + s.nh] = s.h
        if k < K:
            R = _symlower(s.R) + delta * np.eye(s.nu)
            put(ou, ou, R)
            put(ox, ou, s.S)
            put(ou, ox, s.S.T)
            rhs[ou : ou + s.nu] = s.r
            put(ol, ou, s.Hu)
            put(ou, ol, s.Hu.T)
            op = lay.off_pi[k]
            put(op, ou, s.B)
            put(ou, op, s.B.T)
            put(op, ox, s.A)
            put(ox, op, s.A.T)
            oxn = lay.off_x[k + 1]
            nxn = blocks.nx[k + 1]
            put(op, oxn, -np.eye(nxn))
            put(oxn, op, -np.eye(nxn))
            rhs[op : op + nxn] = s.b
    return M, rhs, lay


def _sytrf(M: np.ndarray):
    sytrf, = sla.get_lapack_funcs(("sytrf",), (M,))
    ld, ipiv, info = sytrf(M, lower=1)
    if info > 0:
        raise SingularSystemError("exactly singular pivot in dense factorization")
    if info < 0:
        raise SingularSystemError(f"dense factorization failed (info={info})")
    return ld, ipiv


def _sytrs(M: np.ndarray, ld, ipiv, rhs: np.ndarray) -> np.ndarray:
    sytrs, = sla.get_lapack_funcs(("sytrs",), (M,))
    x, info = sytrs(ld, ipiv, rhs, lower=1)
    if info != 0:
        raise SingularSystemError("dense triangular solve failed")
    return x

def _inertia_from_factor(ld: np.ndarray, ipiv: np.ndarray, scale: float):
    n = ld.shape[0]
    npos = nneg = nzero = 0
    tiny = 1e-14 * max(1.0, scale)
    i = 0
    while i < n:
        if ipiv[i] >= 0:
            d = ld[i, i]
            if abs(d) <= tiny:
                nzero += 1
            elif d > 0:
                npos += 1
            else:
                nneg += 1
            i += 1
        else:
            # 2x2 pivot block [[a, b], [b, c]]
            a, b, c = ld[i, i], ld[i + 1, i], ld[i + 1, i + 1]
            tr, det = a + c, a * c - b * b
            if abs(det) <= tiny * tiny:
                nzero += 1
                npos += 1 if tr > 0 else 0
                nneg += 1 if tr < 0 else 0
            elif det < 0:
                npos += 1
                nneg += 1
            elif tr > 0:
                npos += 2
            else:
                nneg += 2
            i += 2
    return npos, nneg, nzero


def dense_oracle_solve(blocks: StageBlocks, delta: float = 0.0) -> StepDirection:
    """Assemble the full system densely and solve it with Bunch-Kaufman.

    Reference path for testing the structured solver; intended for
    desk-scale systems (total dimension up to a couple of thousand).
    """
    M, rhs, lay = _assemble_dense(blocks, delta)
    ld, ipiv = _sytrf(M)
    sol = _sytrs(M, ld, ipiv, -rhs)
    K = blocks.K
    dx = [sol[lay.off_x[k] : lay.off_x[k] + blocks.nx[k]].copy() for k in range(K + 1)]
    du = [sol[lay.off_u[k] : lay.off_u[k] + blocks.nu[k]].copy() for k in range(K)]
    dpi = [sol[lay.off_pi[k] : lay.off_pi[k] + blocks.nx[k + 1]].copy() for k in range(K)]
    dlam = [sol[lay.off_lam[k] : lay.off_lam[k] + blocks.nh[k]].copy() for k in range(K + 1)]
    return StepDirection(dx=dx, du=du, dpi=dpi, dlam=dlam)


def dense_oracle_inertia(blocks: StageBlocks, delta: float = 0.0):
    """Inertia (positive, negative, zero eigenvalue counts) of the dense system."""
    M, _, _ = _assemble_dense(blocks, delta)
    ld, ipiv = _sytrf(M)
    scale = float(np.max(np.abs(M))) if M.size else 1.0
    return _inertia_from_factor(ld, ipiv, scale)
