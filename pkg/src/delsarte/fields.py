"""Matrix-valued fields on (x, y, t) with exact derivative propagation.

Every field evaluates to a 2-D matrix per sample point: vectors are ``(N, 1)``
columns, scalars are ``(1, 1)``, wave families are ``(N, K)``. Fields form an
expression DAG; derivatives are new nodes built by the product/chain rules and
memoized, so repeated differentiation stays polynomial in the DAG size.

The Volterra primitive :class:`Cumulative` realizes ``∫_{-∞}^x f(s) ds`` on a
truncated :class:`Domain` with composite Gauss-Legendre panels. Its
x-derivative is the integrand itself and its y/t-derivatives are cumulative
integrals of the parameter derivatives.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .errors import ContractError, DecayError, DomainError, TAU_DECAY

__all__ = [
    "Domain",
    "Field",
    "Const",
    "Zero",
    "ExpFamily",
    "PolyGauss",
    "SymField",
    "OracleField",
    "FDField",
    "Cumulative",
    "as_field",
    "zero",
    "identity",
    "richardson_derivative",
]

_AXES = ("x", "y", "t")


def _shape2(shape):
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        return (1, 1)
    if len(shape) == 1:
        return (shape[0], 1)
    if len(shape) != 2:
        raise ContractError(f"field values must be at most 2-D, got shape {shape}")
    return shape


# ----------------------------------------------------------------------------
# Domain and quadrature tables
# ----------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _gl_tables(q):
    """Gauss-Legendre nodes/weights and the value -> partial-integral map.

    Row ``B(s)`` of the returned function maps nodal values on [-1, 1] to the
    integral from -1 to ``s`` of the interpolating polynomial.
    """
    nodes, weights = legendre.leggauss(q)
    vander = legendre.legvander(nodes, q - 1)  # (q, q): P_k(node_i)
    # coefficient c_k = (2k+1)/2 * sum_i w_i P_k(s_i) f_i
    scale = (2.0 * np.arange(q) + 1.0) / 2.0
    to_coeffs = scale[:, None] * (vander * weights[:, None]).T  # (q, q)
    return nodes, weights, to_coeffs


def _partial_integral_rows(s, q):
    """Rows A(s) @ to_coeffs for local coordinates ``s`` in [-1, 1]."""
    _, _, to_coeffs = _gl_tables(q)
    s = np.asarray(s, dtype=float)
    # integrals of P_k from -1 to s: k=0 -> s+1 ; k>=1 -> (P_{k+1}-P_{k-1})/(2k+1)
    pv = legendre.legvander(s, q)  # (n, q+1)
    rows = np.empty((s.shape[0], q))
    rows[:, 0] = s + 1.0
    k = np.arange(1, q)
    rows[:, 1:] = (pv[:, 2:] - pv[:, :-2]) / (2.0 * k + 1.0)
    return rows @ to_coeffs


class Domain:
    """Truncated x-line ``[x_min, x_max]`` with composite Gauss-Legendre panels.

    The left edge stands in for ``-∞``; integrands must have decayed there to
    ``tau_decay`` relative to their maximum.
    """

    def __init__(self, x_min=-20.0, x_max=20.0, panel_width=0.5, order=16,
                 tau_decay=TAU_DECAY):
        if not x_max > x_min:
            raise ContractError("Domain needs x_max > x_min")
        self.x_min = float(x_min)
        self.x_max = float(x_max)
        self.panels = max(1, int(math.ceil((self.x_max - self.x_min) / panel_width - 1e-12)))
        self.width = (self.x_max - self.x_min) / self.panels
        self.order = int(order)
        self.tau_decay = float(tau_decay)
        nodes, weights, _ = _gl_tables(self.order)
        left = self.x_min + self.width * np.arange(self.panels)
        self.nodes = (left[:, None] + 0.5 * self.width * (nodes[None, :] + 1.0)).ravel()
        self.weights = np.tile(0.5 * self.width * weights, self.panels)

    def __repr__(self):
        return (f"Domain({self.x_min}, {self.x_max}, panels={self.panels}, "
                f"order={self.order})")

    def key(self):
        return (self.x_min, self.x_max, self.panels, self.order)

    def integrate(self, values):
        """Full-line quadrature of nodal values (leading axis = nodes)."""
        return np.tensordot(self.weights, values, axes=(0, 0))


# ----------------------------------------------------------------------------
# Evaluation context
# ----------------------------------------------------------------------------


class EvalContext:
    """Per-call memo so shared sub-expressions are evaluated once."""

    def __init__(self):
        self._memo = {}
        self._keep = []
        self._grids = {}

    def eval(self, node, x, y, t):
        key = (id(node), id(x), id(y), id(t))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        val = node._eval(self, x, y, t)
        self._memo[key] = val
        self._keep.append((node, x, y, t))
        return val

    def grid(self, domain, yt):
        """Canonical node arrays for ``domain`` at the distinct (y, t) rows."""
        key = (domain.key(), yt.tobytes())
        g = self._grids.get(key)
        if g is None:
            n = domain.nodes.size
            u = yt.shape[0]
            X = np.tile(domain.nodes, u)
            Y = np.repeat(yt[:, 0], n)
            T = np.repeat(yt[:, 1], n)
            g = (X, Y, T)
            self._grids[key] = g
        return g


# ----------------------------------------------------------------------------
# Base class
# ----------------------------------------------------------------------------


class Field:
    """Abstract matrix-valued field; subclasses implement ``_eval`` and ``_d``."""

    is_zero = False

    def __init__(self, shape):
        self.shape = _shape2(shape)
        self._dcache = {}

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x, y=0.0, t=0.0):
        xb, yb, tb = np.broadcast_arrays(np.asarray(x, dtype=float),
                                         np.asarray(y, dtype=float),
                                         np.asarray(t, dtype=float))
        pshape = xb.shape
        xf = np.ascontiguousarray(xb.ravel())
        yf = np.ascontiguousarray(yb.ravel())
        tf = np.ascontiguousarray(tb.ravel())
        val = EvalContext().eval(self, xf, yf, tf)
        return val.reshape(pshape + self.shape)

    def eval(self, x, y=0.0, t=0.0, k=0):
        """k-th x-derivative evaluated at the given points."""
        return self.d(k)(x, y, t)

    def _eval(self, ctx, x, y, t):  # pragma: no cover - abstract
        raise NotImplementedError

    # -- derivatives --------------------------------------------------------

    def _d(self, axis):  # pragma: no cover - abstract
        raise NotImplementedError

    def _deriv(self, axis):
        f = self._dcache.get(axis)
        if f is None:
            f = self._d(axis)
            self._dcache[axis] = f
        return f

    def dx(self):
        return self._deriv(0)

    def dy(self):
        return self._deriv(1)

    def dt(self):
        return self._deriv(2)

    def d(self, kx=0, ky=0, kt=0):
        f = self
        for _ in range(kt):
            f = f.dt()
        for _ in range(ky):
            f = f.dy()
        for _ in range(kx):
            f = f.dx()
        return f

    # -- algebra ------------------------------------------------------------

    @property
    def H(self):
        return dagger(self)

    def __add__(self, other):
        return add(self, as_field(other, self.shape))

    def __radd__(self, other):
        return add(as_field(other, self.shape), self)

    def __sub__(self, other):
        return add(self, scale(-1.0, as_field(other, self.shape)))

    def __rsub__(self, other):
        return add(as_field(other, self.shape), scale(-1.0, self))

    def __neg__(self):
        return scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, Field):
            return matmul(self, other)
        return scale(complex(other), self)

    def __rmul__(self, other):
        if isinstance(other, Field):
            return matmul(other, self)
        return scale(complex(other), self)

    def __matmul__(self, other):
        return matmul(self, as_field(other))

    def __rmatmul__(self, other):
        return matmul(as_field(other), self)

    def column(self, k):
        return matmul(self, Const(np.eye(self.shape[1])[:, [k]]))


# ----------------------------------------------------------------------------
# Leaves
# ----------------------------------------------------------------------------


class Const(Field):
    """Constant matrix."""

    def __init__(self, value):
        value = np.asarray(value, dtype=complex)
        if value.ndim < 2:
            value = value.reshape(_shape2(value.shape))
        super().__init__(value.shape)
        self.value = value

    def _eval(self, ctx, x, y, t):
        return np.broadcast_to(self.value, (x.shape[0],) + self.shape)

    def _d(self, axis):
        return zero(self.shape)

    def __repr__(self):
        return f"Const({self.value.tolist()})"


class Zero(Const):
    is_zero = True

    def __init__(self, shape):
        super().__init__(np.zeros(_shape2(shape), dtype=complex))

    def _d(self, axis):
        return self

    def __repr__(self):
        return f"Zero{self.shape}"


_ZEROS = {}


def zero(shape):
    shape = _shape2(shape)
    z = _ZEROS.get(shape)
    if z is None:
        z = _ZEROS[shape] = Zero(shape)
    return z


def identity(n):
    return Const(np.eye(n, dtype=complex))


def as_field(obj, shape=None):
    """Coerce numbers and arrays to :class:`Const` (broadcast to ``shape``)."""
    if isinstance(obj, Field):
        return obj
    arr = np.asarray(obj, dtype=complex)
    if arr.ndim == 0 and shape is not None:
        shape = _shape2(shape)
        if arr == 0:
            return zero(shape)
        if shape[0] == shape[1]:
            return Const(arr * np.eye(shape[0]))
        return Const(np.full(shape, arr))
    if arr.ndim == 0 and arr == 0:
        return zero((1, 1))
    return Const(arr)


class ExpFamily(Field):
    """Columns ``amp[:, k] * exp(a_k x + b_k y + c_k t)``."""

    def __init__(self, amp, a, b, c):
        amp = np.asarray(amp, dtype=complex)
        if amp.ndim == 1:
            amp = amp[:, None]
        super().__init__(amp.shape)
        k = amp.shape[1]
        self.amp = amp
        self.rates = np.stack([np.broadcast_to(np.asarray(r, dtype=complex), (k,))
                               for r in (a, b, c)])

    def _eval(self, ctx, x, y, t):
        a, b, c = self.rates
        phase = np.exp(np.outer(x, a) + np.outer(y, b) + np.outer(t, c))  # (n, K)
        return self.amp[None, :, :] * phase[:, None, :]

    def _d(self, axis):
        new = ExpFamily(self.amp * self.rates[axis][None, :], *self.rates)
        return new


class PolyGauss(Field):
    """``vec * P(x - c) * exp(-(x - c)^2 / (2 s^2))`` with y, t independence."""

    def __init__(self, coeffs, center, sigma, vec=(1.0,)):
        vec = np.asarray(vec, dtype=complex)
        if vec.ndim == 1:
            vec = vec[:, None]
        super().__init__(vec.shape)
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.center = float(center)
        self.sigma = float(sigma)
        self.vec = vec

    def _eval(self, ctx, x, y, t):
        s = x - self.center
        p = np.polynomial.polynomial.polyval(s, self.coeffs)
        g = np.exp(-0.5 * (s / self.sigma) ** 2)
        return (p * g)[:, None, None] * self.vec[None]

    def _d(self, axis):
        if axis != 0:
            return zero(self.shape)
        c = self.coeffs
        dc = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1, complex)
        sc = np.concatenate([[0.0], c]) / self.sigma ** 2
        n = max(dc.size, sc.size)
        new = np.zeros(n, dtype=complex)
        new[:dc.size] += dc
        new[:sc.size] -= sc
        return PolyGauss(new, self.center, self.sigma, self.vec)


class SymField(Field):
    """Field from a sympy expression (or matrix) in the symbols x, y, t."""

    def __init__(self, expr, symbols=None):
        import sympy as sp

        if symbols is None:
            symbols = sp.symbols("x y t", real=True)
        self.symbols = tuple(symbols)
        mat = expr if isinstance(expr, sp.MatrixBase) else sp.Matrix([[expr]])
        # rebind same-named symbols with other assumptions so diff sees them
        by_name = {s.name: s for s in self.symbols}
        mat = mat.xreplace({s: by_name[s.name] for s in mat.free_symbols
                            if s.name in by_name and s != by_name[s.name]})
        super().__init__(mat.shape)
        self.expr = sp.ImmutableMatrix(mat)
        self._fns = [[sp.lambdify(self.symbols, mat[i, j], modules="numpy")
                      for j in range(mat.shape[1])] for i in range(mat.shape[0])]

    def _eval(self, ctx, x, y, t):
        n = x.shape[0]
        out = np.empty((n,) + self.shape, dtype=complex)
        for i, row in enumerate(self._fns):
            for j, fn in enumerate(row):
                out[:, i, j] = fn(x, y, t)
        return out

    def _d(self, axis):
        import sympy as sp

        e = self.expr.diff(self.symbols[axis])
        if all(v == 0 for v in e):
            return zero(self.shape)
        return SymField(e, self.symbols)


def _normalize_values(val, n, shape):
    val = np.asarray(val, dtype=complex)
    size = shape[0] * shape[1]
    if val.ndim == 0:
        return np.broadcast_to(val, (n,) + shape)
    if val.shape == shape:
        return np.broadcast_to(val, (n,) + shape)
    if val.shape[0] == n and val.size == n * size:
        return val.reshape((n,) + shape)
    raise ContractError(f"field callback returned shape {val.shape}, expected ({n},)+{shape}")


class OracleField(Field):
    """User-supplied analytic oracle ``fn(x, y, t, kx, ky, kt)``.

    ``max_deriv`` bounds the total derivative order the oracle can supply;
    requesting more is a contract violation.
    """

    def __init__(self, fn, shape, max_deriv=4, orders=(0, 0, 0)):
        super().__init__(shape)
        self.fn = fn
        self.max_deriv = int(max_deriv)
        self.orders = tuple(orders)

    def _eval(self, ctx, x, y, t):
        return _normalize_values(self.fn(x, y, t, *self.orders), x.shape[0], self.shape)

    def _d(self, axis):
        orders = list(self.orders)
        orders[axis] += 1
        if sum(orders) > self.max_deriv:
            raise ContractError(
                f"oracle supplies derivatives up to total order {self.max_deriv}, "
                f"requested {tuple(orders)}")
        return OracleField(self.fn, self.shape, self.max_deriv, orders)


# ----------------------------------------------------------------------------
# Finite-difference fallback
# ----------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _central_weights(k):
    """O(h^2) central stencil for the k-th derivative on offsets -m..m."""
    m = (k + 1) // 2 if k > 0 else 0
    offs = np.arange(-m, m + 1, dtype=float)
    A = np.vander(offs, len(offs), increasing=True).T
    rhs = np.zeros(len(offs))
    rhs[k] = math.factorial(k)
    w = np.linalg.solve(A, rhs)
    return offs, w


def richardson_derivative(fn, pts, axis, k, h, levels=4):
    """k-th partial derivative of ``fn`` along ``axis`` at ``pts`` (n, 3).

    A central O(h^2) stencil is evaluated at steps h, h/2, ... and Richardson
    extrapolated over ``levels`` steps, giving O(h^(2*levels)) accuracy.
    ``fn`` maps an (n, 3) array to an array with leading axis n.
    """
    if k == 0:
        return fn(pts)
    offs, w = _central_weights(k)
    table = []
    for lev in range(levels):
        hl = h / 2 ** lev
        acc = None
        for o, wi in zip(offs, w):
            if wi == 0.0:
                continue
            shifted = pts.copy()
            shifted[:, axis] += o * hl
            v = wi * fn(shifted)
            acc = v if acc is None else acc + v
        table.append(acc / hl ** k)
    for j in range(1, levels):
        f = 4.0 ** j
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
    return table[0]


class FDField(Field):
    """Field known only through values; derivatives by Richardson differences."""

    def __init__(self, fn, shape, step=0.05, orders=(0, 0, 0), levels=4):
        super().__init__(shape)
        self.fn = fn
        self.step = float(step)
        self.orders = tuple(orders)
        self.levels = int(levels)

    def _raw(self, pts):
        return _normalize_values(self.fn(pts[:, 0], pts[:, 1], pts[:, 2]),
                                 pts.shape[0], self.shape)

    def _eval(self, ctx, x, y, t):
        pts = np.stack([x, y, t], axis=1)
        fn = self._raw
        for axis, k in enumerate(self.orders):
            if k:
                fn = (lambda g, a, kk: (lambda p: richardson_derivative(
                    g, p, a, kk, self.step, self.levels)))(fn, axis, k)
        return fn(pts)

    def _d(self, axis):
        orders = list(self.orders)
        orders[axis] += 1
        return FDField(self.fn, self.shape, self.step, orders, self.levels)


# ----------------------------------------------------------------------------
# Composite nodes
# ----------------------------------------------------------------------------


class Sum(Field):
    def __init__(self, terms):
        super().__init__(terms[0].shape)
        self.terms = tuple(terms)

    def _eval(self, ctx, x, y, t):
        acc = np.array(ctx.eval(self.terms[0], x, y, t), dtype=complex, copy=True)
        for term in self.terms[1:]:
            acc += ctx.eval(term, x, y, t)
        return acc

    def _d(self, axis):
        return add(*[term._deriv(axis) for term in self.terms])


def add(*fields):
    terms = []
    shape = None
    for f in fields:
        if shape is None:
            shape = f.shape
        elif f.shape != shape:
            raise ContractError(f"cannot add fields of shapes {shape} and {f.shape}")
        if f.is_zero:
            continue
        if isinstance(f, Sum):
            terms.extend(f.terms)
        else:
            terms.append(f)
    if not terms:
        return zero(shape)
    if len(terms) == 1:
        return terms[0]
    return Sum(terms)


class Scale(Field):
    def __init__(self, c, f):
        super().__init__(f.shape)
        self.c = complex(c)
        self.f = f

    def _eval(self, ctx, x, y, t):
        return self.c * ctx.eval(self.f, x, y, t)

    def _d(self, axis):
        return scale(self.c, self.f._deriv(axis))


def scale(c, f):
    c = complex(c)
    if c == 0 or f.is_zero:
        return zero(f.shape)
    if c == 1:
        return f
    if isinstance(f, Scale):
        return scale(c * f.c, f.f)
    if isinstance(f, Const):
        return Const(c * f.value)
    return Scale(c, f)


class Product(Field):
    """Matrix product; a (1, 1) factor acts as a scalar."""

    def __init__(self, a, b, shape):
        super().__init__(shape)
        self.a = a
        self.b = b

    def _eval(self, ctx, x, y, t):
        return _mul_values(ctx.eval(self.a, x, y, t), ctx.eval(self.b, x, y, t),
                           self.a.shape, self.b.shape)

    def _d(self, axis):
        return add(matmul(self.a._deriv(axis), self.b),
                   matmul(self.a, self.b._deriv(axis)))


def _mul_values(av, bv, sa, sb):
    if (sa == (1, 1) and sb[0] != 1) or (sb == (1, 1) and sa[1] != 1):
        return av * bv
    return np.matmul(av, bv)


def _product_shape(sa, sb):
    if sa == (1, 1) and sb[0] != 1:
        return sb
    if sb == (1, 1) and sa[1] != 1:
        return sa
    if sa[1] != sb[0]:
        raise ContractError(f"incompatible shapes for product: {sa} @ {sb}")
    return (sa[0], sb[1])


def matmul(a, b):
    a = as_field(a)
    b = as_field(b)
    shape = _product_shape(a.shape, b.shape)
    if a.is_zero or b.is_zero:
        return zero(shape)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_mul_values(a.value, b.value, a.shape, b.shape))
    if isinstance(a, Const) and a.shape[0] == a.shape[1] and a.shape == (shape[0], shape[0]) \
            and np.array_equal(a.value, np.eye(a.shape[0])) and shape == b.shape:
        return b
    if isinstance(b, Const) and b.shape[0] == b.shape[1] and shape == a.shape \
            and np.array_equal(b.value, np.eye(b.shape[0])):
        return a
    if isinstance(a, Const) and a.shape == (1, 1):
        return scale(a.value[0, 0], b)
    if isinstance(b, Const) and b.shape == (1, 1):
        return scale(b.value[0, 0], a)
    return Product(a, b, shape)


class Dagger(Field):
    """Conjugate transpose."""

    def __init__(self, f):
        super().__init__((f.shape[1], f.shape[0]))
        self.f = f

    def _eval(self, ctx, x, y, t):
        return np.conj(np.swapaxes(ctx.eval(self.f, x, y, t), -1, -2))

    def _d(self, axis):
        return dagger(self.f._deriv(axis))

    @property
    def H(self):
        return self.f


def dagger(f):
    if f.is_zero:
        return zero((f.shape[1], f.shape[0]))
    if isinstance(f, Dagger):
        return f.f
    if isinstance(f, Const):
        return Const(np.conj(f.value.T))
    if isinstance(f, Scale):
        return scale(np.conj(f.c), dagger(f.f))
    return Dagger(f)


class Inverse(Field):
    """Pointwise matrix inverse of a square field."""

    def __init__(self, f):
        if f.shape[0] != f.shape[1]:
            raise ContractError("Inverse needs a square field")
        super().__init__(f.shape)
        self.f = f

    def _eval(self, ctx, x, y, t):
        return np.linalg.inv(ctx.eval(self.f, x, y, t))

    def _d(self, axis):
        return scale(-1.0, matmul(matmul(self, self.f._deriv(axis)), self))


def inverse(f):
    if isinstance(f, Const):
        return Const(np.linalg.inv(f.value))
    if isinstance(f, Inverse):
        return f.f
    return Inverse(f)


class Cumulative(Field):
    """``∫_{x_min}^{x} f(s, y, t) ds`` on a :class:`Domain` (stands for ∫_{-∞})."""

    _cache_size = 8

    def __init__(self, f, domain):
        super().__init__(f.shape)
        self.f = f
        self.domain = domain
        self._lock = threading.Lock()
        self._tables = OrderedDict()

    def _table(self, ctx, yt):
        key = yt.tobytes()
        with self._lock:
            hit = self._tables.get(key)
            if hit is not None:
                self._tables.move_to_end(key)
                return hit
        dom = self.domain
        X, Y, T = ctx.grid(dom, yt)
        u = yt.shape[0]
        vals = ctx.eval(self.f, X, Y, T).reshape((u, dom.panels, dom.order) + self.shape)
        mag = np.abs(vals).reshape(u, -1, *self.shape)
        peak = mag.max(axis=1)
        edge = mag[:, 0]
        bad = edge > dom.tau_decay * peak
        if np.any(bad & (peak > 0)):
            raise DecayError(
                "Volterra integrand has not decayed at the left grid edge "
                f"x={dom.x_min} (edge/peak ratio {float((edge / np.where(peak > 0, peak, 1)).max()):.3g}"
                f" > {dom.tau_decay:g})")
        _, w, _ = _gl_tables(dom.order)
        panel = 0.5 * dom.width * np.einsum("q,upq...->up...", w, vals)
        offs = np.concatenate([np.zeros((u, 1) + self.shape, dtype=complex),
                               np.cumsum(panel, axis=1)], axis=1)
        table = (vals, offs)
        with self._lock:
            self._tables[key] = table
            if len(self._tables) > self._cache_size:
                self._tables.popitem(last=False)
        return table

    def _eval(self, ctx, x, y, t):
        dom = self.domain
        if x.size and x.max() > dom.x_max + 1e-9 * max(1.0, abs(dom.x_max)):
            raise DomainError(f"cumulative integral queried at x={x.max()} beyond x_max={dom.x_max}")
        yt = np.stack([y, t], axis=1)
        uniq, inv = np.unique(yt, axis=0, return_inverse=True)
        inv = inv.ravel()
        vals, offs = self._table(ctx, uniq)
        out = np.zeros((x.shape[0],) + self.shape, dtype=complex)
        inside = x > dom.x_min
        if not np.any(inside):
            return out
        xi = x[inside]
        p = np.clip(((xi - dom.x_min) / dom.width).astype(int), 0, dom.panels - 1)
        s = 2.0 * (xi - (dom.x_min + p * dom.width)) / dom.width - 1.0
        s = np.clip(s, -1.0, 1.0)
        rows = _partial_integral_rows(s, dom.order)
        ui = inv[inside]
        local = np.einsum("nq,nq...->n...", rows, vals[ui, p]) * (0.5 * dom.width)
        out[inside] = offs[ui, p] + local
        return out

    def _d(self, axis):
        if axis == 0:
            return self.f
        return cumulative(self.f._deriv(axis), self.domain)


def cumulative(f, domain):
    if f.is_zero:
        return zero(f.shape)
    return Cumulative(f, domain)
