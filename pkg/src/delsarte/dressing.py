"""Dressed operators, coefficient extraction and compatibility residuals.

With ``𝓛 = ∂_y − L`` and a dressing pair ``(𝛀, 𝛀⁻¹)`` the dressed operator
``𝓛̃ = 𝛀 𝓛 𝛀⁻¹ = ∂_y − L̃`` is available along two algebraically distinct
routes:

    conjugation:  L̃ = 𝛀 L 𝛀⁻¹ − 𝛀 (𝛀⁻¹)_y
    commutator:   L̃ = L + 𝛀_y 𝛀⁻¹ + (𝛀 L − L 𝛀) 𝛀⁻¹

Both are expanded exactly in the extended-operator algebra; the tails of the
result cancel only numerically, which the differentiality check measures.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .algebra import (
    ExtendedOp, MatrixDiffOp, apply_field, compose, differentiality_residual,
    param_derivative, project_plus, tail_kernel_norm,
)
from .concomitant import ParametricPair
from .errors import ConditioningError, ContractError
from .fields import PolyGauss, add, scale

__all__ = [
    "DressedPairReport",
    "dress_operator",
    "dressed_pair",
    "lax_apply",
    "intertwining_residual",
    "extract_coefficients",
    "extracted_order",
    "order_preservation_check",
    "compatibility_operator",
    "zs_compatibility_residual",
]

_AXIS = {"L": 1, "M": 2}


def dress_operator(pair, omega_op, omega_inv, which="L", path="conjugation"):
    """``L̃`` (or ``M̃``) as an extended operator."""
    op = ExtendedOp(pair.op(which))
    ax = _AXIS[which]
    if path == "conjugation":
        main = compose(compose(omega_op, op), omega_inv)
        corr = compose(omega_op, param_derivative(omega_inv, ax))
        return main - corr
    if path == "commutator":
        comm = compose(omega_op, op) - compose(op, omega_op)
        return op + compose(param_derivative(omega_op, ax), omega_inv) + compose(comm, omega_inv)
    raise ContractError(f"unknown dressing path {path!r}")


def dressed_pair(pair, omega_op, omega_inv, path="conjugation"):
    """Dressed ``(L̃, M̃)`` as extended operators."""
    return (dress_operator(pair, omega_op, omega_inv, "L", path),
            dress_operator(pair, omega_op, omega_inv, "M", path))


def lax_apply(op, f, which="L"):
    """``(∂_y − op) f`` (``∂_t`` for ``which='M'``) as a field."""
    return add(f._deriv(_AXIS[which]), scale(-1.0, apply_field(op, f)))


def intertwining_residual(pair, dressed, omega_op, probes, x, y=0.0, t=0.0, which="L"):
    """``max ‖𝛀𝓛f − 𝓛̃𝛀f‖`` over probe fields at the sample points."""
    op = ExtendedOp(pair.op(which))
    worst = 0.0
    for f in probes:
        lhs = apply_field(omega_op, lax_apply(op, f, which))
        rhs = lax_apply(dressed, apply_field(omega_op, f), which)
        worst = max(worst, float(np.abs(lhs(x, y, t) - rhs(x, y, t)).max()))
    return worst


# ----------------------------------------------------------------------------
# Coefficient extraction
# ----------------------------------------------------------------------------


def _probe_matrix(n, sigma):
    """``V[j, k] = p_j^(k)(0)`` for ``p_j = s^j exp(−s²/2σ²)``."""
    V = np.zeros((n + 1, n + 1), dtype=complex)
    for j in range(n + 1):
        c = np.zeros(j + 1)
        c[j] = 1.0
        p = PolyGauss(c, 0.0, sigma)
        for k in range(n + 1):
            V[j, k] = p.d(k)(0.0)[0, 0]
    return V


def extract_coefficients(op_apply, n, points, dim=1, sigma=0.5, max_cond=1e10):
    """Recover ``ã_0..ã_n`` at each point from probe responses.

    ``op_apply`` maps a field to the field obtained by applying the operator.
    Returns an array ``(len(points), n + 1, dim, dim)``.
    """
    pts = np.atleast_2d(points).astype(float)
    V = _probe_matrix(n, sigma)
    cond = np.linalg.cond(V)
    if cond > max_cond:
        raise ConditioningError(
            f"probe system for order {n} has condition {cond:.3g}; rescale the probes (sigma)")
    out = np.zeros((len(pts), n + 1, dim, dim), dtype=complex)
    for i, (x, y, t) in enumerate(pts):
        for c in range(dim):
            e = np.zeros(dim)
            e[c] = 1.0
            R = np.zeros((n + 1, dim), dtype=complex)
            for j in range(n + 1):
                coef = np.zeros(j + 1)
                coef[j] = 1.0
                probe = PolyGauss(coef, x, sigma, e)
                R[j] = op_apply(probe)(x, y, t)[:, 0]
            # R[j] = Σ_k V[j, k] a_k[:, c]
            a = np.linalg.solve(V, R)
            out[i, :, :, c] = a
    return out


def extracted_order(coeffs, tol=1e-8):
    """Largest index whose extracted coefficient exceeds ``tol`` anywhere."""
    mags = np.abs(coeffs).max(axis=(0, 2, 3))
    nz = np.flatnonzero(mags > tol)
    return int(nz[-1]) if nz.size else 0


def order_preservation_check(L, dressed, probes, domain, points, i_max=2, tol_diff=1e-8,
                             tol_coeff=1e-8, sigma=0.5):
    """Differentiality of ``dressed`` and equality of its extracted order with ``L``'s."""
    if isinstance(L, ExtendedOp):
        L = L.diff
    res = differentiality_residual(dressed, i_max, probes, domain)
    n = L.order
    coeffs = extract_coefficients(lambda f: apply_field(dressed, f), n + 1, points, L.dim, sigma)
    order = extracted_order(coeffs, tol_coeff)
    return {"differentiality_residual": res, "order": order, "expected_order": n,
            "leading_excess": float(np.abs(coeffs[:, n + 1]).max()),
            "passed": bool(res <= tol_diff and order == n)}


# ----------------------------------------------------------------------------
# Compatibility
# ----------------------------------------------------------------------------


def _diff(op):
    if isinstance(op, MatrixDiffOp):
        return ExtendedOp(op)
    return ExtendedOp(project_plus(op))


def compatibility_operator(L, M):
    """``∂_t L − ∂_y M + [L, M]`` (differential parts) as an extended operator."""
    L, M = _diff(L), _diff(M)
    return (param_derivative(L, 2) - param_derivative(M, 1)
            + compose(L, M) - compose(M, L))


def zs_compatibility_residual(pair, box=None, points=None):
    """Max coefficient of the compatibility operator over the samples."""
    P = compatibility_operator(pair.L, pair.M)
    pts = box.points() if points is None else np.atleast_2d(points)
    worst = 0.0
    for a in P.diff.coeffs:
        if a.is_zero:
            continue
        worst = max(worst, float(np.abs(a(pts[:, 0], pts[:, 1], pts[:, 2])).max()))
    return worst


@dataclass
class DressedPairReport:
    orders: dict = dc_field(default_factory=dict)
    differentiality_residual: dict = dc_field(default_factory=dict)
    intertwining_residual: dict = dc_field(default_factory=dict)
    compatibility_residual: float = 0.0
    identity_residual: float = 0.0
    tail_norm: dict = dc_field(default_factory=dict)
    condition_number: float = 1.0
    coefficients: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        vals = [self.compatibility_residual, self.identity_residual, self.condition_number]
        for d in (self.differentiality_residual, self.intertwining_residual, self.tail_norm):
            vals.extend(d.values())
        if any(v < 0 for v in vals):
            raise ContractError("report residuals must be nonnegative")

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def dressed_pair_report(pair, omega_op, omega_inv, probes, domain, window, y=0.0, t=0.0,
                        tail_points=None):
    """Full report for the dressed pair on a sample window in x."""
    Lt, Mt = dressed_pair(pair, omega_op, omega_inv)
    pts = np.stack([window, np.full_like(window, y), np.full_like(window, t)], axis=1)
    rep = DressedPairReport()
    fields = [f for f, _ in probes]
    for name, op, base in (("L", Lt, pair.L), ("M", Mt, pair.M)):
        rep.differentiality_residual[name] = differentiality_residual(op, 2, probes, domain, y, t)
        rep.intertwining_residual[name] = intertwining_residual(
            pair, op, omega_op, fields, window, y, t, name)
        coeffs = extract_coefficients(lambda f: apply_field(op, f), base.order, pts, base.dim)
        rep.orders[name] = extracted_order(coeffs)
        tp = window if tail_points is None else tail_points
        rep.tail_norm[name] = tail_kernel_norm(op, tp, y, t)
    dressed = ParametricPair(project_plus(Lt), project_plus(Mt))
    rep.compatibility_residual = zs_compatibility_residual(dressed, points=pts)
    ident = compose(omega_op, omega_inv)
    rep.identity_residual = max(
        float(np.abs(apply_field(ident, f)(window, y, t) - f(window, y, t)).max()) for f in fields)
    return rep, Lt, Mt
