"""Matrix differential operators extended by degenerate Volterra tails.

An :class:`ExtendedOp` is ``Σ_i a_i ∂^i + Σ_k g_k ∂⁻¹ h_k†`` where ``∂⁻¹`` is
integration from the left edge of the :class:`~delsarte.fields.Domain`
(standing for -∞). Tail pairs may carry several columns at once: a pair of
``(N, K)`` fields means ``Σ_columns g_c ∂⁻¹ h_c†``.

Composition is closed-form, using

    ∂ ∘ g∂⁻¹h†          = g′∂⁻¹h† + g h†
    g∂⁻¹h† ∘ ∂          = g h† − g∂⁻¹(h′)†
    g₁∂⁻¹h₁† ∘ g₂∂⁻¹h₂† = g₁c∂⁻¹h₂† − g₁∂⁻¹(h₂c†)†,   c = ∂⁻¹(h₁†g₂)

so the differential part of any product is available exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from math import comb

import numpy as np

from .errors import ContractError, TAU_ALG, TAU_ZERO
from .fields import Domain, Field, add, as_field, cumulative, identity, matmul, scale, zero

__all__ = [
    "MatrixDiffOp",
    "VolterraTail",
    "ExtendedOp",
    "diff_op",
    "derivative_op",
    "identity_op",
    "apply_field",
    "apply",
    "formal_adjoint",
    "compose",
    "project_plus",
    "param_derivative",
    "trace_pairing",
    "differentiality_residual",
    "tail_kernel_norm",
    "prune_tail",
]


@dataclass(frozen=True)
class MatrixDiffOp:
    """``Σ_{i=0}^{n} a_i(x; y, t) ∂_x^i`` with ``(N, N)`` coefficient fields."""

    coeffs: tuple

    def __post_init__(self):
        if not self.coeffs:
            raise ContractError("MatrixDiffOp needs at least one coefficient")
        n = self.coeffs[0].shape[0]
        for a in self.coeffs:
            if a.shape != (n, n):
                raise ContractError(f"coefficient shape {a.shape} != ({n}, {n})")

    @property
    def dim(self):
        return self.coeffs[0].shape[0]

    @property
    def order(self):
        return len(self.coeffs) - 1

    def effective_order(self, x, y=0.0, t=0.0, tol=TAU_ZERO):
        """Largest index whose coefficient is not numerically zero on the samples."""
        for i in range(self.order, -1, -1):
            a = self.coeffs[i]
            if a.is_zero:
                continue
            if np.abs(a(x, y, t)).max() > tol:
                return i
        return 0

    def __add__(self, other):
        n = max(self.order, other.order) + 1
        zeros = zero((self.dim, self.dim))
        a = self.coeffs + (zeros,) * (n - len(self.coeffs))
        b = other.coeffs + (zeros,) * (n - len(other.coeffs))
        return MatrixDiffOp(tuple(add(p, q) for p, q in zip(a, b)))

    def scaled(self, c):
        return MatrixDiffOp(tuple(scale(c, a) for a in self.coeffs))


def diff_op(*coeffs, n=None):
    """Build a :class:`MatrixDiffOp` from fields or constants (``a_0`` first)."""
    if n is None:
        shapes = [c.shape[0] for c in coeffs if isinstance(c, Field)]
        shapes += [np.atleast_2d(c).shape[0] for c in coeffs
                   if not isinstance(c, Field) and np.ndim(c) > 0]
        n = shapes[0] if shapes else 1
    return MatrixDiffOp(tuple(as_field(c, (n, n)) for c in coeffs))


@dataclass(frozen=True)
class VolterraTail:
    """``Σ_k g_k ∂⁻¹ h_k†`` on a shared :class:`Domain`."""

    pairs: tuple = ()
    domain: Domain = None

    def __post_init__(self):
        for g, h in self.pairs:
            if g.shape[1] != h.shape[1] or g.shape[0] != h.shape[0]:
                raise ContractError(f"tail pair shapes {g.shape} / {h.shape} disagree")
        if self.pairs and self.domain is None:
            raise ContractError("a non-empty tail needs a Domain")

    def __bool__(self):
        return bool(self.pairs)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class ExtendedOp:
    """Differential part plus Volterra tail; the element that dressing acts on."""

    diff: MatrixDiffOp
    tail: VolterraTail = dc_field(default_factory=VolterraTail)

    @property
    def dim(self):
        return self.diff.dim

    @property
    def domain(self):
        return self.tail.domain

    def __add__(self, other):
        return ExtendedOp(self.diff + other.diff,
                          _merge_tails(self.tail, other.tail))

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, c):
        pairs = tuple((scale(c, g), h) for g, h in self.tail.pairs)
        return ExtendedOp(self.diff.scaled(c), VolterraTail(pairs, self.tail.domain))


def _merge_tails(*tails):
    pairs = []
    domain = None
    for tl in tails:
        if tl.pairs:
            if domain is None:
                domain = tl.domain
            elif tl.domain is not domain and tl.domain.key() != domain.key():
                raise ContractError("cannot combine tails on different domains")
            pairs.extend(tl.pairs)
    return VolterraTail(tuple(pairs), domain)


def _as_op(op):
    if isinstance(op, MatrixDiffOp):
        return ExtendedOp(op)
    return op


def identity_op(n=1):
    return ExtendedOp(MatrixDiffOp((identity(n),)))


def derivative_op(k=1, n=1):
    """``∂^k`` on ``C^n``."""
    zs = zero((n, n))
    return ExtendedOp(MatrixDiffOp((zs,) * k + (identity(n),)))


# ----------------------------------------------------------------------------
# Application
# ----------------------------------------------------------------------------


def apply_field(op, f, domain=None):
    """The field ``op f``; tail integrals become :class:`Cumulative` nodes."""
    op = _as_op(op)
    if f.shape[0] != op.dim:
        raise ContractError(f"operator on C^{op.dim} applied to field of shape {f.shape}")
    terms = [matmul(a, f.d(i)) for i, a in enumerate(op.diff.coeffs) if not a.is_zero]
    dom = op.tail.domain or domain
    for g, h in op.tail.pairs:
        terms.append(matmul(g, cumulative(matmul(h.H, f), dom)))
    if not terms:
        return zero(f.shape)
    return add(*terms)


def apply(op, f, point):
    """``(op f)`` at ``point = (x, y, t)`` (arrays broadcast)."""
    x, y, t = point
    return apply_field(op, f)(x, y, t)


# ----------------------------------------------------------------------------
# Adjoint and composition
# ----------------------------------------------------------------------------


def formal_adjoint(op):
    """Standard form of ``L*φ = Σ_i (-1)^i ∂^i (a_i† φ)`` via the Leibniz rule."""
    if isinstance(op, ExtendedOp):
        if op.tail:
            raise ContractError("formal_adjoint is defined for differential operators only")
        op = op.diff
    n = op.order
    out = []
    for l in range(n + 1):
        terms = []
        for i in range(l, n + 1):
            a = op.coeffs[i]
            if a.is_zero:
                continue
            terms.append(scale((-1) ** i * comb(i, l), a.H.d(i - l)))
        out.append(add(*terms) if terms else zero(op.coeffs[0].shape))
    return MatrixDiffOp(tuple(out))


class _DiffAccumulator:
    def __init__(self, n):
        self.n = n
        self.terms = {}

    def put(self, order, coeff):
        if coeff.is_zero:
            return
        self.terms.setdefault(order, []).append(coeff)

    def result(self):
        top = max(self.terms) if self.terms else 0
        zs = zero((self.n, self.n))
        return MatrixDiffOp(tuple(add(*self.terms[i]) if i in self.terms else zs
                                  for i in range(top + 1)))


def _left_mul_derivative(acc, a, k, g, h, pairs):
    """(a ∂^k) ∘ (g ∂⁻¹ h†)."""
    # ∂^k g∂⁻¹h† = g^(k) ∂⁻¹h† + Σ_{j<k} C(k,j) g^(j) ∂^{k-1-j} ∘ h†
    pairs.append((matmul(a, g.d(k)), h))
    hd = h.H
    for j in range(k):
        m = k - 1 - j
        gj = matmul(a, g.d(j))
        for l in range(m + 1):
            acc.put(m - l, scale(comb(k, j) * comb(m, l), matmul(gj, hd.d(l))))


def _right_mul_derivative(acc, g, h, b, k, pairs):
    """(g ∂⁻¹ h†) ∘ (b ∂^k)."""
    eta = matmul(b.H, h)
    for j in range(k):
        acc.put(k - 1 - j, scale((-1) ** j, matmul(g, eta.d(j).H)))
    pairs.append((scale((-1) ** k, g), eta.d(k)))


def compose(A, B):
    """Closed-form product ``A ∘ B`` of extended operators."""
    A = _as_op(A)
    B = _as_op(B)
    if A.dim != B.dim:
        raise ContractError("compose: dimension mismatch")
    n = A.dim
    acc = _DiffAccumulator(n)
    pairs = []
    domain = A.tail.domain or B.tail.domain
    # diff ∘ diff
    for i, a in enumerate(A.diff.coeffs):
        if a.is_zero:
            continue
        for j, b in enumerate(B.diff.coeffs):
            if b.is_zero:
                continue
            for l in range(i + 1):
                acc.put(i + j - l, scale(comb(i, l), matmul(a, b.d(l))))
    # diff ∘ tail
    for i, a in enumerate(A.diff.coeffs):
        if a.is_zero:
            continue
        for g, h in B.tail.pairs:
            _left_mul_derivative(acc, a, i, g, h, pairs)
    # tail ∘ diff
    for g, h in A.tail.pairs:
        for k, b in enumerate(B.diff.coeffs):
            if b.is_zero:
                continue
            _right_mul_derivative(acc, g, h, b, k, pairs)
    # tail ∘ tail
    for g1, h1 in A.tail.pairs:
        for g2, h2 in B.tail.pairs:
            c = cumulative(matmul(h1.H, g2), domain)
            pairs.append((matmul(g1, c), h2))
            pairs.append((scale(-1.0, g1), matmul(h2, c.H)))
    pairs = tuple((g, h) for g, h in pairs if not (g.is_zero or h.is_zero))
    return ExtendedOp(acc.result(), VolterraTail(pairs, domain if pairs else None))


def project_plus(op):
    """Differential part ``(op)_+``."""
    if isinstance(op, MatrixDiffOp):
        return op
    return op.diff


def param_derivative(op, axis):
    """Coefficientwise derivative in a parameter (``axis`` 1 = y, 2 = t)."""
    op = _as_op(op)
    if axis not in (1, 2):
        raise ContractError("param_derivative axis must be 1 (y) or 2 (t)")
    diff = MatrixDiffOp(tuple(a._deriv(axis) for a in op.diff.coeffs))
    pairs = []
    for g, h in op.tail.pairs:
        pairs.append((g._deriv(axis), h))
        pairs.append((g, h._deriv(axis)))
    pairs = tuple((g, h) for g, h in pairs if not (g.is_zero or h.is_zero))
    return ExtendedOp(diff, VolterraTail(pairs, op.tail.domain if pairs else None))


# ----------------------------------------------------------------------------
# Trace pairing and differentiality
# ----------------------------------------------------------------------------


def trace_pairing(P, f, h, domain, y=0.0, t=0.0):
    """``(h, P_+ f)_H = ∫ h† (P_+ f) dx`` at fixed (y, t)."""
    g = matmul(h.H, apply_field(ExtendedOp(project_plus(_as_op(P))), f))
    X = domain.nodes
    vals = g(X, y, t)
    return complex(np.trace(domain.integrate(vals)))


def differentiality_residual(P, i_max, probes, domain, y=0.0, t=0.0):
    """``max_{i ≤ i_max, (f, h)} |(h, (P∂^i)_+ f) − (h, P_+ ∂^i f)|``."""
    P = _as_op(P)
    worst = 0.0
    Pplus = ExtendedOp(project_plus(P))
    for i in range(i_max + 1):
        Di = derivative_op(i, P.dim)
        lhs_op = ExtendedOp(project_plus(compose(P, Di)))
        for f, h in probes:
            a = trace_pairing(lhs_op, f, h, domain, y, t)
            b = trace_pairing(Pplus, f.d(i), h, domain, y, t)
            worst = max(worst, abs(a - b))
    return worst


def tail_kernel_norm(op, x, y=0.0, t=0.0, relative=False):
    """``max_{s<x} |Σ_k g_k(x) h_k(s)†|`` over the sample points ``x``.

    With ``relative=True`` the value is divided by ``max Σ_k |g_k||h_k|``,
    which measures cancellation between pairs.
    """
    op = _as_op(op)
    if not op.tail:
        return 0.0
    x = np.asarray(x, dtype=float)
    K = None
    S = None
    for g, h in op.tail.pairs:
        gv = g(x, y, t)  # (n, N, c)
        hv = h(x, y, t)
        term = np.einsum("anc,bmc->abnm", gv, np.conj(hv))
        mag = np.einsum("anc,bmc->ab", np.abs(gv), np.abs(hv))
        K = term if K is None else K + term
        S = mag if S is None else S + mag
    lower = np.tril(np.ones((x.size, x.size), dtype=bool))
    val = np.abs(K).max(axis=(2, 3))[lower].max()
    if relative:
        return float(val / max(S[lower].max(), np.finfo(float).tiny))
    return float(val)


def prune_tail(op, x, y=0.0, t=0.0, tol=TAU_ZERO):
    """Drop tail pairs whose sampled ``‖g‖·‖h‖`` is at most ``tol``."""
    op = _as_op(op)
    keep = []
    dropped = 0
    for g, h in op.tail.pairs:
        ng = np.abs(g(x, y, t)).max()
        nh = np.abs(h(x, y, t)).max()
        if ng * nh <= tol:
            dropped += 1
        else:
            keep.append((g, h))
    tail = VolterraTail(tuple(keep), op.tail.domain if keep else None)
    return ExtendedOp(op.diff, tail), dropped
