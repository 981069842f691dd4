"""Lagrange identities, bilinear concomitants and the closed forms built from them.

Conventions: ``𝓛 = ∂_y − L``, ``𝓜 = ∂_t − M`` on ``ℝ × (y, t)`` and
``𝓛 = ∂_t − L(x, y | ∂)`` in 2+1 dimensions, with formal adjoints
``𝓛* = −∂_y − L*`` and so on. The 1-form is

    W dx + Z_L dy + Z_M dt,        W = φ†ψ,

and the 2+1 2-form is ``W dx∧dy + ZX dy∧dt + ZY dt∧dx``.
All assemblies are built as field expressions, so every component can be
differentiated exactly; closedness residuals use Richardson-extrapolated
centered differences on a :class:`~delsarte.geometry.Box` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import ExtendedOp, MatrixDiffOp, apply_field, formal_adjoint
from .errors import ContractError
from .fields import add, matmul, richardson_derivative, scale, zero

__all__ = [
    "ParametricPair",
    "Op2Plus1",
    "OneFormSample",
    "TwoFormSample",
    "concomitant_x_field",
    "concomitant_x",
    "divergence_residual_1d",
    "divergence_residual_fd",
    "oneform_fields",
    "oneform",
    "closedness_residual_1form",
    "concomitant_xy_fields",
    "concomitant_xy",
    "twoform_fields",
    "twoform",
    "closedness_residual_2form",
    "sample",
]


def sample(f, point):
    """Evaluate ``f`` at ``point``; 1×1 values are returned as complex scalars."""
    x, y, t = point
    v = f(x, y, t)
    if f.shape == (1, 1):
        v = v[..., 0, 0]
        if np.ndim(v) == 0:
            return complex(v)
    return v


@dataclass(frozen=True)
class ParametricPair:
    """``(𝓛, 𝓜) = (∂_y − L, ∂_t − M)`` with (y, t)-dependent coefficients."""

    L: MatrixDiffOp
    M: MatrixDiffOp

    def __post_init__(self):
        if self.L.dim != self.M.dim:
            raise ContractError("L and M must act on the same C^N")

    @property
    def dim(self):
        return self.L.dim

    def op(self, which):
        return {"L": self.L, "M": self.M}[which]

    @staticmethod
    def axis(which):
        return {"L": 1, "M": 2}[which]

    def kernel_residual(self, which, psi):
        """Field ``𝓛ψ = ψ_y − Lψ`` (or the 𝓜 analogue)."""
        ax = self.axis(which)
        return add(psi._deriv(ax), scale(-1.0, apply_field(ExtendedOp(self.op(which)), psi)))

    def adjoint_kernel_residual(self, which, phi):
        """Field ``𝓛*φ = −φ_y − L*φ``."""
        ax = self.axis(which)
        Ls = ExtendedOp(formal_adjoint(self.op(which)))
        return scale(-1.0, add(phi._deriv(ax), apply_field(Ls, phi)))


@dataclass(frozen=True)
class OneFormSample:
    W: complex
    ZL: complex
    ZM: complex


@dataclass(frozen=True)
class TwoFormSample:
    W: complex
    ZX: complex
    ZY: complex


# ----------------------------------------------------------------------------
# 1-D concomitant and the 1-form
# ----------------------------------------------------------------------------


def concomitant_x_field(L, phi, psi):
    """``Z_L[φ, ψ]`` with ``φ†(Lψ) − (L*φ)†ψ = ∂_x Z_L``."""
    terms = []
    for i, a in enumerate(L.coeffs):
        if i == 0 or a.is_zero:
            continue
        chi = matmul(a.H, phi)
        for k in range(i):
            terms.append(scale((-1) ** k, matmul(chi.d(k).H, psi.d(i - 1 - k))))
    if not terms:
        return zero((phi.shape[1], psi.shape[1]))
    return add(*terms)


def concomitant_x(L, phi, psi, point):
    return sample(concomitant_x_field(L, phi, psi), point)


def divergence_residual_1d(pair, phi, psi, point, which="L"):
    """``|⟨𝓛*φ,ψ⟩ − ⟨φ,𝓛ψ⟩ + ∂_y(φ†ψ) − ∂_x Z_L|`` (``∂_t`` for ``which='M'``)."""
    ax = pair.axis(which)
    lhs = matmul(pair.adjoint_kernel_residual(which, phi).H, psi)
    rhs = matmul(phi.H, pair.kernel_residual(which, psi))
    W = matmul(phi.H, psi)
    Z = concomitant_x_field(pair.op(which), phi, psi)
    res = add(lhs, scale(-1.0, rhs), W._deriv(ax), scale(-1.0, Z.dx()))
    return float(np.abs(sample(res, point)).max())


def divergence_residual_fd(pair, phi, psi, x, y=0.0, t=0.0, which="L", h=0.1, levels=2):
    """Same residual with ``∂_x Z`` and the parameter derivative of ``φ†ψ`` by differences.

    Only sampled values of ``W`` and ``Z`` are used, so this is the fallback
    when exact derivatives of the concomitant are unavailable.
    """
    ax = pair.axis(which)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pts = np.stack([x, np.full_like(x, y), np.full_like(x, t)], axis=1)
    p = (pts[:, 0], pts[:, 1], pts[:, 2])
    lhs = matmul(pair.adjoint_kernel_residual(which, phi).H, psi)
    rhs = matmul(phi.H, pair.kernel_residual(which, psi))
    W = matmul(phi.H, psi)
    Z = concomitant_x_field(pair.op(which), phi, psi)
    res = lhs(*p) - rhs(*p) + _fd(W, pts, ax, h, levels) - _fd(Z, pts, 0, h, levels)
    return float(np.abs(res).max())


def oneform_fields(pair, phi, psi):
    """``(W, Z_L, Z_M)`` as fields."""
    return (matmul(phi.H, psi),
            concomitant_x_field(pair.L, phi, psi),
            concomitant_x_field(pair.M, phi, psi))


def oneform(pair, phi, psi, point):
    W, ZL, ZM = oneform_fields(pair, phi, psi)
    return OneFormSample(sample(W, point), sample(ZL, point), sample(ZM, point))


def _fd(f, pts, axis, h, levels):
    fn = lambda p: f(p[:, 0], p[:, 1], p[:, 2])
    return richardson_derivative(fn, pts, axis, 1, h, levels)


def _steps(box, step):
    if step is not None:
        return np.broadcast_to(np.asarray(step, dtype=float), (3,))
    return box.fd_steps()


def closedness_residual_1form(pair, phi, psi, box, levels=4, step=None):
    """Largest curl component of the 1-form over the samples of ``box``."""
    W, ZL, ZM = oneform_fields(pair, phi, psi)
    pts = box.points()
    hx, hy, ht = _steps(box, step)
    r1 = _fd(W, pts, 1, hy, levels) - _fd(ZL, pts, 0, hx, levels)
    r2 = _fd(W, pts, 2, ht, levels) - _fd(ZM, pts, 0, hx, levels)
    r3 = _fd(ZL, pts, 2, ht, levels) - _fd(ZM, pts, 1, hy, levels)
    return float(max(np.abs(r).max() for r in (r1, r2, r3)))


# ----------------------------------------------------------------------------
# 2+1 operators
# ----------------------------------------------------------------------------


class Op2Plus1:
    """``L = Σ u_ij ∂_x^i ∂_y^j`` with ``𝓛 = ∂_t − L``."""

    def __init__(self, coeffs, order=None):
        if not coeffs:
            raise ContractError("Op2Plus1 needs at least one coefficient")
        self.coeffs = {tuple(k): v for k, v in coeffs.items()}
        shapes = {u.shape for u in self.coeffs.values()}
        if len(shapes) != 1:
            raise ContractError("all coefficients must share one shape")
        n, m = shapes.pop()
        if n != m:
            raise ContractError("coefficients must be square")
        self.dim = n
        top = max(i + j for i, j in self.coeffs)
        self.order = top if order is None else int(order)
        if top > self.order:
            raise ContractError("stored entry exceeds the declared order")

    def apply_field(self, psi):
        terms = [matmul(u, psi.d(i, j)) for (i, j), u in self.coeffs.items() if not u.is_zero]
        return add(*terms) if terms else zero(psi.shape)

    def adjoint_apply_field(self, phi):
        terms = [scale((-1) ** (i + j), matmul(u.H, phi).d(i, j))
                 for (i, j), u in self.coeffs.items() if not u.is_zero]
        return add(*terms) if terms else zero(phi.shape)

    def kernel_residual(self, psi):
        return add(psi.dt(), scale(-1.0, self.apply_field(psi)))

    def adjoint_kernel_residual(self, phi):
        return scale(-1.0, add(phi.dt(), self.adjoint_apply_field(phi)))


def concomitant_xy_fields(op, phi, psi):
    """``(Z^(x), Z^(y))`` with ``φ†Lψ − (L*φ)†ψ = ∂_x Z^(x) + ∂_y Z^(y)``.

    Each term is integrated by parts in x first, then in y.
    """
    zx, zy = [], []
    for (i, j), u in op.coeffs.items():
        if u.is_zero:
            continue
        chi = matmul(u.H, phi)
        for k in range(i):
            zx.append(scale((-1) ** k, matmul(chi.d(k).H, psi.d(i - 1 - k, j))))
        for m in range(j):
            zy.append(scale((-1) ** (i + m), matmul(chi.d(i, m).H, psi.d(0, j - 1 - m))))
    shape = (phi.shape[1], psi.shape[1])
    return (add(*zx) if zx else zero(shape), add(*zy) if zy else zero(shape))


def concomitant_xy(op, phi, psi, point):
    zx, zy = concomitant_xy_fields(op, phi, psi)
    return sample(zx, point), sample(zy, point)


def twoform_fields(op, phi, psi, sign=1.0):
    """``(W, ZX, ZY)`` with ``ZX = −Z^(x)``, ``ZY = −Z^(y)``.

    On kernels ``∂_t W = ∂_x Z^(x) + ∂_y Z^(y)``, so this choice makes the
    form closed. ``sign=-1`` flips the lateral components (negative control).
    """
    zx, zy = concomitant_xy_fields(op, phi, psi)
    return matmul(phi.H, psi), scale(-sign, zx), scale(-sign, zy)


def twoform(op, phi, psi, point, sign=1.0):
    W, ZX, ZY = twoform_fields(op, phi, psi, sign)
    return TwoFormSample(sample(W, point), sample(ZX, point), sample(ZY, point))


def closedness_residual_2form(op, phi, psi, box, levels=4, step=None, sign=1.0):
    """``max |∂_t W + ∂_x ZX + ∂_y ZY|`` over the samples of ``box``."""
    W, ZX, ZY = twoform_fields(op, phi, psi, sign)
    pts = box.points()
    hx, hy, ht = _steps(box, step)
    r = _fd(W, pts, 2, ht, levels) + _fd(ZX, pts, 0, hx, levels) + _fd(ZY, pts, 1, hy, levels)
    return float(np.abs(r).max())
