"""Forward-mode automatic differentiation with dual and hyper-dual numbers.

Stage functions are written against plain numpy semantics (indexing,
elementwise arithmetic, ``np.dot``, and the math wrappers below). They are
evaluated on object arrays whose elements are :class:`Dual` or
:class:`HyperDual` scalars. Tangent channels broadcast, so seeding every
coordinate direction at once yields the whole gradient, Jacobian row or
Hessian in a single function sweep.

Supported primitives: ``+ - * / **``, ``sin``, ``cos``, ``tan``, ``exp``,
``log``, ``sqrt``. Nonsmooth primitives (``abs``, ``min``/``max``) are
deliberately unsupported; formulations that need them introduce slack
variables instead.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EvaluationError

__all__ = [
    "Dual",
    "HyperDual",
    "gradient",
    "jacobian",
    "hessian",
    "value",
    "pack",
    "sin",
    "cos",
    "tan",
    "exp",
    "log",
    "sqrt",
]


class Dual:
    """First-order dual number ``val + dot * eps``.

    ``dot`` may be a scalar tangent or an ndarray of simultaneous tangents.
    Binary operations against plain ndarrays return ``NotImplemented`` so
    numpy distributes them elementwise over object arrays.
    """

    __slots__ = ("val", "dot")

    def __init__(self, val, dot=0.0):
        self.val = val
        self.dot = dot

    def __repr__(self):
        return f"Dual({self.val!r}, {self.dot!r})"

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.dot + other.dot)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.val + other, self.dot)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.dot - other.dot)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.val - other, self.dot)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(other - self.val, -self.dot)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.dot * other.val + self.val * other.dot)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.val * other, self.dot * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self.dot - self.val * inv * other.dot) * inv)
        if isinstance(other, np.ndarray):
            return NotImplemented
        inv = 1.0 / other
        return Dual(self.val * inv, self.dot * inv)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        inv = 1.0 / self.val
        return Dual(other * inv, -other * inv * inv * self.dot)

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, Dual):
            return (self.log() * p).exp()
        if isinstance(p, np.ndarray):
            return NotImplemented
        if p == 0:
            return Dual(1.0, 0.0 * self.dot)
        return Dual(self.val**p, p * self.val ** (p - 1) * self.dot)

    def __rpow__(self, base):
        if isinstance(base, np.ndarray):
            return NotImplemented
        lb = math.log(base)
        v = base**self.val
        return Dual(v, v * lb * self.dot)

    # -- primitives (named so numpy ufuncs dispatch on object arrays) -----
    def sin(self):
        return Dual(math.sin(self.val), math.cos(self.val) * self.dot)

    def cos(self):
        return Dual(math.cos(self.val), -math.sin(self.val) * self.dot)

    def tan(self):
        t = math.tan(self.val)
        return Dual(t, (1.0 + t * t) * self.dot)

    def exp(self):
        e = math.exp(self.val)
        return Dual(e, e * self.dot)

    def log(self):
        return Dual(math.log(self.val), self.dot / self.val)

    def sqrt(self):
        r = math.sqrt(self.val)
        return Dual(r, 0.5 / r * self.dot)


class HyperDual:
    """Second-order number with two tangent channels and their product.

    Seeding ``d1 = e_i`` and ``d2 = e_j`` yields ``d12 = d²f/dx_i dx_j``
    after evaluation. Channels broadcast: with ``d1`` a row of seeds and
    ``d2`` a column of seeds, ``d12`` accumulates the full Hessian in a
    single sweep.
    """

    __slots__ = ("val", "d1", "d2", "d12")

    def __init__(self, val, d1=0.0, d2=0.0, d12=0.0):
        self.val = val
        self.d1 = d1
        self.d2 = d2
        self.d12 = d12

    def __repr__(self):
        return f"HyperDual({self.val!r}, {self.d1!r}, {self.d2!r}, {self.d12!r})"

    def _chain(self, f, df, ddf):
        return HyperDual(f, df * self.d1, df * self.d2, df * self.d12 + ddf * self.d1 * self.d2)

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.val + other.val, self.d1 + other.d1, self.d2 + other.d2, self.d12 + other.d12
            )
        if isinstance(other, np.ndarray):
            return NotImplemented
        return HyperDual(self.val + other, self.d1, self.d2, self.d12)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.val - other.val, self.d1 - other.d1, self.d2 - other.d2, self.d12 - other.d12
            )
        if isinstance(other, np.ndarray):
            return NotImplemented
        return HyperDual(self.val - other, self.d1, self.d2, self.d12)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return HyperDual(other - self.val, -self.d1, -self.d2, -self.d12)

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.val * other.val,
                self.d1 * other.val + self.val * other.d1,
                self.d2 * other.val + self.val * other.d2,
                self.d12 * other.val
                + self.val * other.d12
                + self.d1 * other.d2
                + other.d1 * self.d2,
            )
        if isinstance(other, np.ndarray):
            return NotImplemented
        return HyperDual(self.val * other, self.d1 * other, self.d2 * other, self.d12 * other)

    __rmul__ = __mul__

    def _reciprocal(self):
        inv = 1.0 / self.val
        inv2 = inv * inv
        return HyperDual(
            inv,
            -inv2 * self.d1,
            -inv2 * self.d2,
            -inv2 * self.d12 + 2.0 * inv2 * inv * self.d1 * self.d2,
        )

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other._reciprocal()
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self._reciprocal() * other

    def __neg__(self):
        return HyperDual(-self.val, -self.d1, -self.d2, -self.d12)

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, HyperDual):
            return (self.log() * p).exp()
        if isinstance(p, np.ndarray):
            return NotImplemented
        if p == 0:
            z = 0.0 * self.d1
            return HyperDual(1.0, z, 0.0 * self.d2, 0.0 * self.d12)
        if p == 1:
            return self
        return self._chain(self.val**p, p * self.val ** (p - 1), p * (p - 1) * self.val ** (p - 2))

    def __rpow__(self, base):
        if isinstance(base, np.ndarray):
            return NotImplemented
        lb = math.log(base)
        v = base**self.val
        return self._chain(v, v * lb, v * lb * lb)

    # -- primitives ------------------------------------------------------
    def sin(self):
        s, c = math.sin(self.val), math.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = math.sin(self.val), math.cos(self.val)
        return self._chain(c, -s, -c)

    def tan(self):
        t = math.tan(self.val)
        d = 1.0 + t * t
        return self._chain(t, d, 2.0 * t * d)

    def exp(self):
        e = math.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        inv = 1.0 / self.val
        return self._chain(math.log(self.val), inv, -inv * inv)

    def sqrt(self):
        r = math.sqrt(self.val)
        return self._chain(r, 0.5 / r, -0.25 / (r * self.val))


_AD_TYPES = (Dual, HyperDual)


def value(v):
    """Strip any differentiation payload and return the plain value."""
    if isinstance(v, _AD_TYPES):
        return v.val
    if isinstance(v, np.ndarray) and v.dtype == object:
        return np.array([value(e) for e in v.ravel()], dtype=float).reshape(v.shape)
    return v


def pack(values):
    """Stack scalars into a 1-d array, object-typed when any is dual-valued."""
    values = list(values)
    if any(isinstance(v, _AD_TYPES) for v in values):
        out = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            out[i] = v
        return out
    return np.asarray(values, dtype=float)


# -- scalar math wrappers (work on plain floats, duals and arrays) --------


def _dispatch(name, np_fun):
    def fun(x):
        if isinstance(x, _AD_TYPES):
            return getattr(x, name)()
        return np_fun(x)

    fun.__name__ = name
    return fun


sin = _dispatch("sin", np.sin)
cos = _dispatch("cos", np.cos)
tan = _dispatch("tan", np.tan)
exp = _dispatch("exp", np.exp)
log = _dispatch("log", np.log)
sqrt = _dispatch("sqrt", np.sqrt)


# -- sweep drivers ---------------------------------------------------------


def _seed_dual(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    eye = np.eye(n)
    seeds = np.empty(n, dtype=object)
    for i in range(n):
        seeds[i] = Dual(float(x[i]), eye[i])
    return seeds, n


def _tangent(out, n):
    """Extract the (n,) tangent from one output element of a dual sweep."""
    if isinstance(out, Dual):
        return np.broadcast_to(np.asarray(out.dot, dtype=float), (n,)).copy()
    return np.zeros(n)


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"non-finite {what} encountered")
    return arr


def _call(f, arg):
    """Evaluate a user function, mapping math-domain failures to one error type."""
    try:
        return f(arg)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvaluationError(f"function evaluation failed: {exc}") from exc


def eval_gradient(f, x):
    """One dual sweep: return ``(f(x), grad f(x))``."""
    seeds, n = _seed_dual(x)
    out = _call(f, seeds)
    val = out.val if isinstance(out, Dual) else float(out)
    grad = _tangent(out, n)
    _check_finite(val, "function value")
    return float(val), _check_finite(grad, "gradient")


def gradient(f, x):
    """Exact gradient of a scalar function of ``n`` reals."""
    return eval_gradient(f, x)[1]


def eval_jacobian(f, x, m=None):
    """One dual sweep: return ``(F(x), J_F(x))`` for a vector function."""
    seeds, n = _seed_dual(x)
    out = np.atleast_1d(_call(f, seeds))
    if m is not None and out.size != m:
        raise EvaluationError(f"vector function returned {out.size} outputs, expected {m}")
    m = out.size
    vals = np.empty(m)
    jac = np.empty((m, n))
    for i, o in enumerate(out):
        vals[i] = o.val if isinstance(o, Dual) else float(o)
        jac[i] = _tangent(o, n)
    _check_finite(vals, "function value")
    return vals, _check_finite(jac, "Jacobian")


def jacobian(f, x):
    """Exact Jacobian of an ``m``-vector function of ``n`` reals."""
    return eval_jacobian(f, x)[1]


def hessian(f, x):
    """Exact, exactly-symmetric Hessian of a scalar function.

    All coordinate pairs are seeded at once through broadcast tangent
    channels, so a single function sweep produces the full matrix.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    eye = np.eye(n)
    seeds = np.empty(n, dtype=object)
    for i in range(n):
        seeds[i] = HyperDual(float(x[i]), eye[i], eye[i].reshape(n, 1), 0.0)
    out = _call(f, seeds)
    if isinstance(out, HyperDual):
        h = np.broadcast_to(np.asarray(out.d12, dtype=float), (n, n))
    else:
        h = np.zeros((n, n))
    h = 0.5 * (h + h.T)
    return _check_finite(h, "Hessian")
