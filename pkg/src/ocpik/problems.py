"""Benchmark problems and formulation transforms.

Physical parameters are round-number engineering choices documented on
each builder; published dimension tables pin only horizon lengths and
variable/constraint counts, which the builders reproduce exactly.

All model functions are written against :mod:`ocpik.autodiff` conventions
so first and second derivatives come from forward sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .errors import ApiMisuseError, EvaluationError, UnknownProblemError
from .ocp import FunctionStage, OcpProblem

__all__ = [
    "ContinuousDynamics",
    "MinTimeSpec",
    "SoftConstraintSpec",
    "rk4_step",
    "make_min_time",
    "l1_soften",
    "Benchmark",
    "build_benchmark",
    "BENCHMARK_NAMES",
    "cartpole_dynamics",
    "chain_dynamics",
    "chain_equilibrium",
    "quadrotor_dynamics",
]


@dataclass
class ContinuousDynamics:
    """State-space model ``xdot = rhs(x, u)`` with named states."""

    nx: int
    nu: int
    rhs: Callable
    params: dict = field(default_factory=dict)
    state_names: Optional[Tuple[str, ...]] = None


def rk4_step(f_c, x, u, dt):
    """Classical fourth-order Runge-Kutta step with zero-order-hold control.

    ``dt`` may itself be a decision-dependent quantity (e.g. ``T / K`` in
    minimum-time problems).
    """
    k1 = f_c(x, u)
    k2 = f_c(x + (0.5 * dt) * k1, u)
    k3 = f_c(x + (0.5 * dt) * k2, u)
    k4 = f_c(x + dt * k3, u)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if isinstance(out, np.ndarray) and out.dtype != object:
        if not np.all(np.isfinite(out)):
            raise EvaluationError("non-finite integrator output")
    return out


# ---------------------------------------------------------------------------
# minimum-time transform


@dataclass
class MinTimeSpec:
    """Continuous-time problem to be solved for minimum total duration.

    The total time becomes an extra state, constant across the horizon,
    with ``dt = T / K`` inside the integrator, the constraint
    ``T_0 >= t_min`` at the first stage, and ``T_0`` as the objective.
    """

    dynamics: ContinuousDynamics
    K: int
    x_init: np.ndarray
    terminal: List[Tuple[int, float]]  # (state index, target value) rows
    path_ineq: Optional[Callable] = None  # g(u, x) over physical variables
    path_lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    path_upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t_min: float = 0.0
    t_guess: float = 1.0
    control_reg: float = 0.0


def make_min_time(spec: MinTimeSpec) -> OcpProblem:
    """Transcribe a minimum-time problem into the stagewise form.

    The appended time state obeys ``T_{k+1} = T_k``; positivity is enforced
    through the ordinary lower-bound slack machinery at the first stage.
    """
    dyn = spec.dynamics
    if dyn.state_names is not None and "T" in dyn.state_names:
        raise ApiMisuseError("dynamics already carry a total-time state")
    nxp, nu, K = dyn.nx, dyn.nu, spec.K
    nx = nxp + 1
    x_init = np.asarray(spec.x_init, dtype=float)
    if x_init.size != nxp:
        raise ApiMisuseError("x_init does not match the physical state dimension")
    n_path = spec.path_lower.size
    reg = spec.control_reg

    def dynamics(w):
        u, x, T = w[:nu], w[nu : nu + nxp], w[nu + nxp]
        xn = rk4_step(dyn.rhs, x, u, T / K)
        return ad.pack(list(xn) + [T])

    def path_rows(w):
        u, x = w[:nu], w[nu : nu + nxp]
        return spec.path_ineq(u, x)

    def ineq_first(w):
        rows = list(path_rows(w)) if n_path else []
        rows.append(w[nu + nxp])
        return ad.pack(rows)

    def cost_first(w):
        c = w[nu + nxp]
        if reg:
            c = c + reg * np.dot(w[:nu], w[:nu])
        return c

    def cost_mid(w):
        if reg:
            return reg * np.dot(w[:nu], w[:nu])
        return 0.0 * w[0]

    def eq_init(w):
        return w[nu : nu + nxp] - x_init

    term_idx = np.array([i for i, _ in spec.terminal], dtype=int)
    term_val = np.array([v for _, v in spec.terminal], dtype=float)

    def eq_term(w):
        return ad.pack([w[i] - v for i, v in zip(term_idx, term_val)])

    stages = []
    for k in range(K):
        if k == 0:
            lower = np.concatenate([spec.path_lower, [spec.t_min]])
            upper = np.concatenate([spec.path_upper, [np.inf]])
            stages.append(
                FunctionStage(
                    nu=nu, nx=nx, cost=cost_first, dynamics=dynamics,
                    ineq=ineq_first, lower=lower, upper=upper,
                    eq=eq_init, nh=nxp,
                )
            )
        else:
            stages.append(
                FunctionStage(
                    nu=nu, nx=nx, cost=cost_mid, dynamics=dynamics,
                    ineq=path_rows if n_path else None,
                    lower=spec.path_lower, upper=spec.path_upper,
                )
            )
    stages.append(
        FunctionStage(
            nu=0, nx=nx, cost=lambda w: 0.0 * w[0],
            eq=eq_term if term_idx.size else None, nh=term_idx.size,
        )
    )
    return OcpProblem(stages)


def min_time_guess(spec: MinTimeSpec):
    """Cold start: the initial boundary state held constant, controls zero.

    Holding the starting state across the horizon keeps the shooting gaps
    small at the first iterate; the terminal conditions are pulled in
    through their multipliers rather than baked into an inconsistent state
    trajectory.
    """
    nxp, nu, K = spec.dynamics.nx, spec.dynamics.nu, spec.K
    x0 = np.concatenate([np.asarray(spec.x_init, dtype=float), [spec.t_guess]])
    xs = [x0.copy() for _ in range(K + 1)]
    us = [np.zeros(nu) for _ in range(K)]
    return xs, us


# ---------------------------------------------------------------------------
# L1-penalized soft constraints


@dataclass
class SoftConstraintSpec:
    """Rows ``c(w) <= 0`` enforced through an exact L1 penalty.

    Each row gets a control-like slack ``t >= 0`` with ``c(w) - t <= 0``
    and stage cost ``weight * t``; everything added stays smooth.
    """

    constraint: Callable  # c(w) over original stage variables (u, x)
    weight: float
    n_rows: int = 1


def l1_soften(spec: SoftConstraintSpec, problem: OcpProblem) -> OcpProblem:
    """Append penalty slacks for ``spec`` to every non-terminal stage."""
    if not spec.weight > 0:
        raise ApiMisuseError("penalty weight must be positive")
    m = spec.n_rows
    rho = spec.weight
    stages = []
    for k, st in enumerate(problem.stages):
        if st.dynamics is None:
            stages.append(st)
            continue
        nu = st.nu

        def strip(w, nu=nu):
            return np.concatenate([w[:nu], w[nu + m :]])

        def cost(w, st=st, nu=nu):
            return st.cost(strip(w, nu)) + rho * np.sum(w[nu : nu + m])

        def dynamics(w, st=st, nu=nu):
            return st.dynamics(strip(w, nu))

        def ineq(w, st=st, nu=nu):
            wo = strip(w, nu)
            t = w[nu : nu + m]
            rows = list(st.ineq(wo)) if st.ineq is not None else []
            rows.extend(list(spec.constraint(wo) - t))
            rows.extend(list(t))
            return ad.pack(rows)

        eq = None
        if st.eq is not None:
            def eq(w, st=st, nu=nu):
                return st.eq(strip(w, nu))

        lower = np.concatenate([st.lower, np.full(m, -np.inf), np.zeros(m)])
        upper = np.concatenate([st.upper, np.zeros(m), np.full(m, np.inf)])
        stages.append(
            FunctionStage(
                nu=nu + m, nx=st.nx, cost=cost, dynamics=dynamics,
                ineq=ineq, lower=lower, upper=upper, eq=eq, nh=st.nh,
            )
        )
    return OcpProblem(stages)


# ---------------------------------------------------------------------------
# dynamical models


def cartpole_dynamics(M=1.0, m=0.1, length=0.5, grav=9.81) -> ContinuousDynamics:
    """Cart with an unactuated point-mass pendulum; angle zero is upright.

    State ``[p, th, v, om]``, control ``[F]`` (horizontal force on the cart).
    """

    def rhs(x, u):
        th, v, om, F = x[1], x[2], x[3], u[0]
        sth, cth = ad.sin(th), ad.cos(th)
        vdot = (F + m * sth * (length * om * om - grav * cth)) / (M + m * sth * sth)
        omdot = (grav * sth - vdot * cth) / length
        return ad.pack([v, om, vdot, omdot])

    return ContinuousDynamics(
        nx=4, nu=1, rhs=rhs,
        params={"M": M, "m": m, "length": length, "grav": grav},
        state_names=("p", "th", "v", "om"),
    )


def chain_dynamics(dim, n_free=6, mass=0.03, stiffness=1.0, rest_len=0.033, grav=9.81):
    """Chain of point masses joined by linear springs, hanging under gravity.

    One end is anchored at the origin; the opposite end is a massless
    handle whose velocity is the control. State layout:
    positions of the free masses, their velocities, handle position.
    """
    d = dim
    nx = d * (2 * n_free + 1)

    def rhs(x, u):
        rows = list(x[d * n_free : 2 * d * n_free])  # velocities of free masses
        nodes = [np.zeros(d)] + [x[i * d : (i + 1) * d] for i in range(n_free)] + [
            x[2 * d * n_free : 2 * d * n_free + d]
        ]
        tension = []
        for j in range(n_free + 1):
            delta = nodes[j + 1] - nodes[j]
            dist = ad.sqrt(np.dot(delta, delta))
            tension.append((stiffness * (1.0 - rest_len / dist)) * delta)
        for j in range(n_free):
            acc = (tension[j + 1] - tension[j]) / mass
            acc = list(acc)
            acc[-1] = acc[-1] - grav
            rows.extend(acc)
        rows.extend(list(u))
        return ad.pack(rows)

    return ContinuousDynamics(
        nx=nx, nu=d, rhs=rhs,
        params={"dim": d, "n_free": n_free, "mass": mass, "stiffness": stiffness,
                "rest_len": rest_len, "grav": grav},
        state_names=tuple(f"s{i}" for i in range(nx)),
    )


def chain_equilibrium(dyn: ContinuousDynamics, handle_pos: np.ndarray) -> np.ndarray:
    """Static state (zero velocities) of the chain for a fixed handle position.

    Solved by damped Newton iteration on the force balance of the free
    masses; the result is a fixed point of the dynamics under zero control.
    """
    p = dyn.params
    d, n_free = p["dim"], p["n_free"]
    handle_pos = np.asarray(handle_pos, dtype=float)

    def forces(pos_flat):
        state = np.concatenate([pos_flat, np.zeros(d * n_free, dtype=object)
                                if pos_flat.dtype == object else np.zeros(d * n_free),
                                handle_pos])
        rows = dyn.rhs(state, np.zeros(d))
        return rows[d * n_free : 2 * d * n_free]

    # straight-line warm start between the anchor and the handle
    pos = np.concatenate([handle_pos * ((i + 1) / (n_free + 1)) for i in range(n_free)])
    pos = pos + 0.0
    for _ in range(100):
        val, jac = ad.eval_jacobian(forces, pos)
        if np.max(np.abs(val)) < 1e-13:
            break
        step = np.linalg.solve(jac, -val)
        limit = np.max(np.abs(step))
        if limit > 0.5 * p["rest_len"] * (n_free + 1):
            step = step * (0.5 * p["rest_len"] * (n_free + 1) / limit)
        pos = pos + step
    return np.concatenate([pos, np.zeros(d * n_free), handle_pos])


def quadrotor_dynamics(grav=9.81) -> ContinuousDynamics:
    """Quadrotor with yaw-pitch-roll orientation and thrust-rate actuation.

    State ``[p(3), v(3), roll, pitch, yaw, a]`` where ``a`` is the upward
    thrust acceleration; controls are the thrust rate and the three Euler
    angle rates. The thrust state (rather than direct thrust control) is a
    documented modelling choice that fixes the state dimension at ten.
    """

    def rhs(x, u):
        vx, vy, vz = x[3], x[4], x[5]
        roll, pitch, yaw, a = x[6], x[7], x[8], x[9]
        sr, cr = ad.sin(roll), ad.cos(roll)
        sp, cp = ad.sin(pitch), ad.cos(pitch)
        sy, cy = ad.sin(yaw), ad.cos(yaw)
        # body z-axis in world coordinates (yaw-pitch-roll)
        nx_ = cy * sp * cr + sy * sr
        ny_ = sy * sp * cr - cy * sr
        nz_ = cp * cr
        return ad.pack([
            vx, vy, vz,
            a * nx_, a * ny_, a * nz_ - grav,
            u[1], u[2], u[3],
            u[0],
        ])

    return ContinuousDynamics(
        nx=10, nu=4, rhs=rhs, params={"grav": grav},
        state_names=("px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw", "a"),
    )


def double_integrator_dynamics() -> ContinuousDynamics:
    """Point mass on a line: position, velocity, bounded acceleration input."""

    def rhs(x, u):
        return ad.pack([x[1], u[0]])

    return ContinuousDynamics(nx=2, nu=1, rhs=rhs, state_names=("pos", "vel"))


# ---------------------------------------------------------------------------
# benchmark builders


@dataclass
class Benchmark:
    name: str
    problem: OcpProblem
    x_guess: List[np.ndarray]
    u_guess: List[np.ndarray]
    params: dict
    table_dims: Tuple[int, int, int, int, int, int]  # (K, nx, nu, ni, ne0, neK)

    @property
    def guess(self):
        return self.x_guess, self.u_guess


def _reported_dims(problem: OcpProblem) -> Tuple[int, int, int, int, int, int]:
    d = problem.dims
    mid = min(1, d.K - 1)
    return (d.K, d.nx[mid], d.nu[mid], d.ng[mid], d.nh[0], d.nh[d.K])


def _mpc_problem(dyn, K, dt, x0, x_ref, u_ref, wx, wu, wterm, bounds=None) -> OcpProblem:
    """Quadratic tracking problem with a fixed initial state.

    ``bounds``: optional (g(u, x), lower, upper) path constraint triple.
    """
    nu, nxp = dyn.nu, dyn.nx
    wx = np.asarray(wx, float)
    wu = np.asarray(wu, float)
    wterm = np.asarray(wterm, float)

    def dynamics(w):
        return rk4_step(dyn.rhs, w[nu:], w[:nu], dt)

    def cost(w):
        du = w[:nu] - u_ref
        dx = w[nu:] - x_ref
        return 0.5 * (np.dot(du, wu * du) + np.dot(dx, wx * dx))

    def cost_term(w):
        dx = w - x_ref
        return 0.5 * np.dot(dx, wterm * dx)

    def eq_init(w):
        return w[nu:] - x0

    g_fun, lower, upper = (None, np.zeros(0), np.zeros(0)) if bounds is None else bounds
    ineq = (lambda w: g_fun(w[:nu], w[nu:])) if g_fun is not None else None

    stages = []
    for k in range(K):
        stages.append(
            FunctionStage(
                nu=nu, nx=nxp, cost=cost, dynamics=dynamics,
                ineq=ineq, lower=lower, upper=upper,
                eq=eq_init if k == 0 else None, nh=nxp if k == 0 else 0,
            )
        )
    stages.append(FunctionStage(nu=0, nx=nxp, cost=cost_term))
    return OcpProblem(stages)


def _build_cart_pendulum_mpc(p):
    dyn = cartpole_dynamics(**{k: p[k] for k in ("M", "m", "length", "grav")})
    K, dt = p["K"], p["dt"]
    x0 = np.array([0.0, p["th0"], 0.0, p["om0"]])
    x_ref = np.zeros(4)
    prob = _mpc_problem(
        dyn, K, dt, x0, x_ref, np.zeros(1),
        wx=[1.0, 40.0, 0.5, 0.5], wu=[0.1], wterm=[2.0, 80.0, 1.0, 1.0],
    )
    xs = [x0.copy() for _ in range(K + 1)]
    us = [np.zeros(1) for _ in range(K)]
    return prob, xs, us


def _build_cart_pendulum_swing(p):
    dyn = cartpole_dynamics(**{k: p[k] for k in ("M", "m", "length", "grav")})

    def path(u, x):
        return ad.pack([u[0], x[0], x[2]])

    spec = MinTimeSpec(
        dynamics=dyn, K=p["K"],
        x_init=np.array([0.0, np.pi, 0.0, 0.0]),
        terminal=[(1, 0.0), (2, 0.0), (3, 0.0)],
        path_ineq=path,
        path_lower=np.array([-p["f_max"], -p["p_max"], -p["v_max"]]),
        path_upper=np.array([p["f_max"], p["p_max"], p["v_max"]]),
        t_guess=1.0, control_reg=p["control_reg"],
    )
    return make_min_time(spec), *min_time_guess(spec)


def _build_hanging_chain(p, dim):
    dyn = chain_dynamics(dim, mass=p["mass"], stiffness=p["stiffness"],
                         rest_len=p["rest_len"], grav=p["grav"])
    span = p["span"]
    handle_a = np.zeros(dim)
    handle_a[0] = span
    handle_b = handle_a.copy()
    handle_b[0] = span + p["shift"]
    handle_b[-1] = p["lift"]
    x0 = chain_equilibrium(dyn, handle_a)
    x_ref = chain_equilibrium(dyn, handle_b)
    nxp = dyn.nx
    wx = np.concatenate([
        np.full(dim * 6, 1.0),          # free mass positions
        np.full(dim * 6, 2.0),          # free mass velocities
        np.full(dim, 25.0),             # handle position
    ])

    def g_fun(u, x):
        return u * 1.0

    bounds = (g_fun, np.full(dim, -p["u_max"]), np.full(dim, p["u_max"]))
    prob = _mpc_problem(
        dyn, p["K"], p["dt"], x0, x_ref, np.zeros(dim),
        wx=wx, wu=np.full(dim, 0.05), wterm=4.0 * wx, bounds=bounds,
    )
    xs = [x0.copy() for _ in range(p["K"] + 1)]
    us = [np.zeros(dim) for _ in range(p["K"])]
    return prob, xs, us


_QUAD_BOUND_KEYS = ("da_max", "om_max", "a_min", "a_max", "vz_max")


def _quad_path(p):
    def path(u, x):
        return ad.pack([u[0], u[1], u[2], u[3], x[9], x[5]])

    lower = np.array([-p["da_max"], -p["om_max"], -p["om_max"], -p["om_max"],
                      p["a_min"], -p["vz_max"]])
    upper = np.array([p["da_max"], p["om_max"], p["om_max"], p["om_max"],
                      p["a_max"], p["vz_max"]])
    return path, lower, upper


def _build_quadrotor_mpc(p):
    dyn = quadrotor_dynamics(grav=p["grav"])
    hover = np.zeros(10)
    hover[9] = p["grav"]
    x0 = hover.copy()
    x0[3:6] = [0.4, -0.3, 0.2]
    x0[6] = 0.15
    x0[7] = -0.1
    path, lower, upper = _quad_path(p)
    prob = _mpc_problem(
        dyn, p["K"], p["dt"], x0, hover, np.zeros(4),
        wx=[4.0, 4.0, 4.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.2],
        wu=[0.05, 0.1, 0.1, 0.1],
        wterm=[8.0, 8.0, 8.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 0.4],
        bounds=(lambda u, x: path(u, x), lower, upper),
    )
    xs = [x0.copy() for _ in range(p["K"] + 1)]
    us = [np.zeros(4) for _ in range(p["K"])]
    return prob, xs, us


def _quad_p2p_spec(p) -> MinTimeSpec:
    dyn = quadrotor_dynamics(grav=p["grav"])
    x_init = np.zeros(10)
    x_init[9] = p["grav"]
    target = p["target"]
    terminal = [(0, target[0]), (1, target[1]), (2, target[2]),
                (3, 0.0), (4, 0.0), (5, 0.0), (6, 0.0), (7, 0.0)]
    path, lower, upper = _quad_path(p)
    return MinTimeSpec(
        dynamics=dyn, K=p["K"], x_init=x_init, terminal=terminal,
        path_ineq=path, path_lower=lower, path_upper=upper,
        t_guess=1.0, control_reg=p["control_reg"],
    )


def _build_quadrotor_p2p(p):
    spec = _quad_p2p_spec(p)
    return make_min_time(spec), *min_time_guess(spec)


def _build_quadrotor_one_obstacle(p):
    spec = _quad_p2p_spec(p)
    base = make_min_time(spec)
    cx, cy, radius = p["obstacle"]
    nu = spec.dynamics.nu

    def obstacle(w):
        px, py = w[nu + 0], w[nu + 1]
        return ad.pack([radius * radius - ((px - cx) ** 2 + (py - cy) ** 2)])

    prob = l1_soften(SoftConstraintSpec(constraint=obstacle, weight=p["rho"], n_rows=1), base)
    xs, us_base = min_time_guess(spec)
    us = [np.concatenate([u, np.full(1, p["soft_guess"])]) for u in us_base]
    return prob, xs, us


def _build_double_integrator_min_time(p):
    spec = MinTimeSpec(
        dynamics=double_integrator_dynamics(), K=p["K"],
        x_init=np.array([0.0, 0.0]), terminal=[(0, p["distance"]), (1, 0.0)],
        path_ineq=lambda u, x: u * 1.0,
        path_lower=np.array([-1.0]), path_upper=np.array([1.0]),
        t_guess=1.0,
    )
    return make_min_time(spec), *min_time_guess(spec)


_DEFAULTS = {
    "cart_pendulum_mpc": {
        "K": 25, "dt": 0.04, "M": 1.0, "m": 0.1, "length": 0.5, "grav": 9.81,
        "th0": 0.12, "om0": 0.4,
    },
    "cart_pendulum_swing": {
        "K": 100, "M": 1.0, "m": 0.1, "length": 0.5, "grav": 9.81,
        "f_max": 10.0, "p_max": 1.0, "v_max": 4.0, "control_reg": 1e-5,
    },
    "hanging_chain_2d": {
        "K": 25, "dt": 0.1, "mass": 0.03, "stiffness": 1.0, "rest_len": 0.033,
        "grav": 9.81, "span": 0.2, "shift": 0.06, "lift": 0.03, "u_max": 1.0,
    },
    "hanging_chain_3d": {
        "K": 25, "dt": 0.1, "mass": 0.03, "stiffness": 1.0, "rest_len": 0.033,
        "grav": 9.81, "span": 0.2, "shift": 0.06, "lift": 0.03, "u_max": 1.0,
    },
    "quadrotor_mpc": {
        "K": 25, "dt": 0.08, "grav": 9.81,
        "da_max": 40.0, "om_max": 4.0, "a_min": 1.0, "a_max": 18.0, "vz_max": 5.0,
    },
    "quadrotor_p2p": {
        "K": 25, "grav": 9.81, "target": (4.0, 3.0, 1.5), "control_reg": 1e-4,
        "da_max": 40.0, "om_max": 3.0, "a_min": 1.0, "a_max": 14.0, "vz_max": 5.0,
    },
    "quadrotor_p2p_one_obstacle_soft": {
        "K": 25, "grav": 9.81, "target": (4.0, 3.0, 1.5), "control_reg": 1e-4,
        "da_max": 40.0, "om_max": 3.0, "a_min": 1.0, "a_max": 14.0, "vz_max": 5.0,
        "obstacle": (2.0, 1.5, 0.5), "rho": 100.0, "soft_guess": 0.1,
    },
    "double_integrator_min_time": {"K": 20, "distance": 1.0},
}

_BUILDERS = {
    "cart_pendulum_mpc": _build_cart_pendulum_mpc,
    "cart_pendulum_swing": _build_cart_pendulum_swing,
    "hanging_chain_2d": lambda p: _build_hanging_chain(p, 2),
    "hanging_chain_3d": lambda p: _build_hanging_chain(p, 3),
    "quadrotor_mpc": _build_quadrotor_mpc,
    "quadrotor_p2p": _build_quadrotor_p2p,
    "quadrotor_p2p_one_obstacle_soft": _build_quadrotor_one_obstacle,
    "double_integrator_min_time": _build_double_integrator_min_time,
}

BENCHMARK_NAMES = tuple(_BUILDERS)


def build_benchmark(name: str, overrides: Optional[dict] = None) -> Benchmark:
    """Construct a named benchmark problem with its deterministic cold start.

    ``overrides`` replaces individual default physical or horizon
    parameters (unknown keys are rejected).
    """
    if name not in _BUILDERS:
        raise UnknownProblemError(name)
    params = dict(_DEFAULTS[name])
    for key, val in (overrides or {}).items():
        if key not in params:
            raise ApiMisuseError(f"unknown parameter '{key}' for problem '{name}'")
        params[key] = type(params[key])(val) if not isinstance(params[key], tuple) else val
    prob, xs, us = _BUILDERS[name](params)
    return Benchmark(
        name=name, problem=prob, x_guess=xs, u_guess=us, params=params,
        table_dims=_reported_dims(prob),
    )
