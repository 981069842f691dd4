"""Spectral sets, wave families, transmutation kernels and dressing operators.

A spectral set is a finite list of labels ``(λ_k, ξ_k)`` with weights
``ρ_k > 0``. A family of K waves is stored as one ``(N, K)`` field whose
columns follow the label order; kernels are ``K × K`` matrices with rows
indexed by adjoint labels and columns by direct labels.

Weighted sums hit inverses that are kernel inverses with respect to ``ρ``
(``Σ_ν ρ_ν Ω(λ|ν) Ω⁻¹(ν|μ) = δ_λμ / ρ_μ``), so in matrix form
``Ω⁻¹_kernel = D⁻¹ Ω⁻¹ D⁻¹`` with ``D = diag(ρ)``. The weights are applied
literally and cancel in the results.

The running kernel used for dressing is anchored at the left edge of the
domain (standing for ``x → −∞``) and reached by the canonical t/y/x path;
there the first two legs vanish and ``Ω(x, y, t) = Ω₀ + ∫_{−∞}^x φ†ψ ds``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .algebra import ExtendedOp, MatrixDiffOp, VolterraTail
from .concomitant import Op2Plus1, oneform_fields, sample, twoform_fields
from .errors import (
    ContractError, DomainError, SingularKernelError, TAU_KERNEL, TAU_SING,
)
from .fields import Const, add, cumulative, identity, inverse, matmul, scale
from .geometry import canonical_path, line_integral, surface_integral
from .io import Grid, read_grid, write_grid

__all__ = [
    "SpectralSet",
    "WaveFamily",
    "AdjointWaveFamily",
    "TransmutationKernel",
    "verify_kernel_membership",
    "require_membership",
    "assemble_kernel_1d",
    "assemble_kernel_2d",
    "running_kernel",
    "invert_kernel",
    "kernel_inverse",
    "dress_wave",
    "dress_adjoint_wave",
    "tilde_kernel",
    "tilde_differential_residual",
    "check_conditioning",
    "build_dressing_op",
    "build_inverse_dressing_op",
]


@dataclass(frozen=True)
class SpectralSet:
    labels: tuple = ()
    weights: tuple = None

    def __post_init__(self):
        labels = tuple((complex(lam), str(xi)) for lam, xi in self.labels)
        weights = (1.0,) * len(labels) if self.weights is None else tuple(float(w) for w in self.weights)
        if len(weights) != len(labels):
            raise ContractError("one weight per label is required")
        if len(set(labels)) != len(labels):
            raise ContractError("spectral labels must be pairwise distinct")
        if any(not w > 0 for w in weights):
            raise ContractError("spectral weights must be positive")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_rates(cls, rates, tag="", weights=None):
        return cls(tuple((r, tag) for r in rates), weights)

    def __len__(self):
        return len(self.labels)

    @property
    def rates(self):
        return np.array([lam for lam, _ in self.labels], dtype=complex)

    @property
    def D(self):
        return np.diag(np.asarray(self.weights, dtype=float))

    def names(self):
        out = []
        for lam, xi in self.labels:
            s = f"{lam.real:.12g}" if lam.imag == 0 else f"{lam.real:.12g}{lam.imag:+.12g}j"
            out.append(f"{s};{xi}" if xi else s)
        return out

    def subset(self, idx):
        return SpectralSet(tuple(self.labels[i] for i in idx), tuple(self.weights[i] for i in idx))

    def to_dict(self):
        return {"labels": [[lam.real, lam.imag, xi] for lam, xi in self.labels],
                "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple((complex(re, im), xi) for re, im, xi in d["labels"]), tuple(d["weights"]))


@dataclass(frozen=True)
class WaveFamily:
    """Columns of ``field`` are ``ψ(λ_k; ξ_k)``."""

    field: object
    spectral: SpectralSet
    residuals: dict = None
    adjoint = False

    def __post_init__(self):
        if self.field.shape[1] != len(self.spectral):
            raise ContractError(f"family has {self.field.shape[1]} columns for "
                                f"{len(self.spectral)} labels")

    def __len__(self):
        return len(self.spectral)

    @property
    def dim(self):
        return self.field.shape[0]

    def column(self, k):
        return self.field.column(k)

    def with_residuals(self, report):
        return replace(self, residuals=dict(report))


class AdjointWaveFamily(WaveFamily):
    """Columns are ``φ(λ_k; ξ_k)`` in the kernel of the adjoint pair."""

    adjoint = True


# ----------------------------------------------------------------------------
# Membership
# ----------------------------------------------------------------------------


def _residual_fields(pair, fam):
    if isinstance(pair, Op2Plus1):
        f = pair.adjoint_kernel_residual if fam.adjoint else pair.kernel_residual
        return {"L": f(fam.field)}
    f = pair.adjoint_kernel_residual if fam.adjoint else pair.kernel_residual
    return {w: f(w, fam.field) for w in ("L", "M")}


def _column_max(vals):
    # vals (n, N, K) -> (K,)
    return np.abs(vals).max(axis=(0, 1)) if vals.size else np.zeros(vals.shape[-1])


def verify_kernel_membership(pair, family, box=None, points=None):
    """Per-label kernel residuals ``max|𝓛ψ| / max(1, max|ψ|)`` over the samples.

    Returns ``{label: {"L": r, "M": r}}`` (only ``"L"`` for 2+1 operators).
    """
    if len(family) == 0:
        return {}
    pts = box.points() if points is None else np.atleast_2d(points)
    p = (pts[:, 0], pts[:, 1], pts[:, 2])
    scale_ = np.maximum(1.0, _column_max(family.field(*p)))
    report = {name: {} for name in family.spectral.names()}
    for which, res in _residual_fields(pair, family).items():
        r = _column_max(res(*p)) / scale_
        for name, v in zip(family.spectral.names(), r):
            report[name][which] = float(v)
    return report


def require_membership(pair, family, points, tol=TAU_KERNEL):
    report = verify_kernel_membership(pair, family, points=points)
    bad = [name for name, r in report.items() if max(r.values()) > tol]
    if bad:
        kind = "adjoint " if family.adjoint else ""
        raise DomainError(f"{kind}wave family fails kernel membership (> {tol:g}) for labels {bad}")
    return report


# ----------------------------------------------------------------------------
# Kernels
# ----------------------------------------------------------------------------


@dataclass
class TransmutationKernel:
    """Kernel matrix at an anchor plus, optionally, its running field."""

    omega: np.ndarray
    omega0: np.ndarray
    spectral: SpectralSet
    anchor: dict = dc_field(default_factory=dict)
    cond: float = None
    field: object = None
    domain: object = None

    def __post_init__(self):
        self.omega = np.atleast_2d(np.asarray(self.omega, dtype=complex))
        self.omega0 = np.atleast_2d(np.asarray(self.omega0, dtype=complex))
        k = len(self.spectral)
        if self.omega.shape != (k, k) or self.omega0.shape != (k, k):
            raise ContractError(f"kernel matrices must be {k}×{k}")
        if self.cond is None:
            self.cond = float(np.linalg.cond(self.omega)) if k else 1.0

    @property
    def K(self):
        return len(self.spectral)

    def running(self):
        return self.field if self.field is not None else Const(self.omega)

    def header(self):
        return {"labels": self.spectral.to_dict(), "anchor": self.anchor,
                "condition_number": self.cond, "size": self.K}

    def save(self, prefix):
        """Write ``prefix.json`` (header) and ``prefix.ddxg`` (Ω then Ω₀)."""
        k = self.K
        axes = [(k, 0.0, max(k - 1, 0)), (k, 0.0, max(k - 1, 0))]
        write_grid(f"{prefix}.ddxg", Grid(axes, np.stack([self.omega, self.omega0])))
        with open(f"{prefix}.json", "w") as fh:
            json.dump(self.header(), fh, sort_keys=True, indent=2)

    @classmethod
    def load(cls, prefix):
        with open(f"{prefix}.json") as fh:
            head = json.load(fh)
        grid = read_grid(f"{prefix}.ddxg")
        return cls(grid.data[0], grid.data[1], SpectralSet.from_dict(head["labels"]),
                   head["anchor"], head["condition_number"])


def _omega0(omega0, k):
    if omega0 is None:
        return np.eye(k, dtype=complex)
    return np.atleast_2d(np.asarray(omega0, dtype=complex))


def _fields_form(fields, sample_cls):
    def form(x, y, t):
        return sample_cls(*(f(x, y, t) for f in fields))
    return form


def assemble_kernel_1d(pair, phifam, psifam, P, P0, omega0=None, path=None, tol=TAU_KERNEL):
    """``Ω = Ω₀ + ∫_{P₀}^{P} Z⁽¹⁾[φ, ψ]`` along ``path`` (canonical by default)."""
    from .concomitant import OneFormSample

    spec = psifam.spectral
    if len(phifam) != len(psifam):
        raise ContractError("adjoint and direct families need the same labels")
    O0 = _omega0(omega0, len(spec))
    P, P0 = np.asarray(P, dtype=float), np.asarray(P0, dtype=float)
    if path is None:
        path = canonical_path(P0, P)
    anchor = {"kind": "path", "P": P.tolist(), "P0": P0.tolist(),
              "path": None if path is None else path.to_dict()}
    if path is None:
        return TransmutationKernel(O0.copy(), O0, spec, anchor)
    if (np.linalg.norm(path.start - P0) > 1e-9) or (np.linalg.norm(path.end - P) > 1e-9):
        raise ContractError("path must run from P0 to P")
    nodes = _path_nodes(path)
    require_membership(pair, psifam, nodes, tol)
    require_membership(pair, phifam, nodes, tol)
    form = _fields_form(oneform_fields(pair, phifam.field, psifam.field), OneFormSample)
    omega = O0 + np.atleast_2d(line_integral(form, path))
    return TransmutationKernel(omega, O0, spec, anchor)


def _path_nodes(path):
    v = path.vertices
    s = np.linspace(0.0, 1.0, 5)
    return np.concatenate([a + s[:, None] * (b - a) for a, b in zip(v[:-1], v[1:])])


def assemble_kernel_2d(op, phifam, psifam, surf, omega0=None, tol=TAU_KERNEL):
    """``Ω = Ω₀ + ∬_S Z⁽²⁾[φ, ψ]``."""
    from .concomitant import TwoFormSample

    spec = psifam.spectral
    O0 = _omega0(omega0, len(spec))
    anchor = {"kind": "surface", "surface": surf.to_dict()}
    if len(surf.triangles) == 0 or surf.area() == 0.0:
        return TransmutationKernel(O0.copy(), O0, spec, anchor)
    require_membership(op, psifam, surf.vertices, tol)
    require_membership(op, phifam, surf.vertices, tol)
    form = _fields_form(twoform_fields(op, phifam.field, psifam.field), TwoFormSample)
    omega = O0 + np.atleast_2d(surface_integral(form, surf))
    return TransmutationKernel(omega, O0, spec, anchor)


def running_kernel(phifam, psifam, domain, omega0=None, pair=None, check_points=None,
                   tol=TAU_KERNEL):
    """Kernel field ``Ω₀ + ∫_{x_min}^x Φ†Ψ ds`` anchored at the left domain edge."""
    spec = psifam.spectral
    O0 = _omega0(omega0, len(spec))
    if pair is not None and check_points is not None:
        require_membership(pair, psifam, check_points, tol)
        require_membership(pair, phifam, check_points, tol)
    fieldv = add(Const(O0), cumulative(matmul(phifam.field.H, psifam.field), domain))
    anchor = {"kind": "running", "x0": domain.x_min, "path": "t,y,x"}
    cond = float(np.linalg.cond(O0)) if len(spec) else 1.0
    return TransmutationKernel(O0.copy(), O0, spec, anchor, cond=cond, field=fieldv, domain=domain)


def _null_labels(omega, names, tau_sing):
    """Labels carrying weight in the numerical null space of ``omega``."""
    _, s, vh = np.linalg.svd(omega)
    null = vh[s <= s[0] * tau_sing] if s[0] > 0 else vh
    if len(null) == 0:
        null = vh[-1:]
    v = np.abs(null).max(axis=0)
    return [names[i] for i in np.flatnonzero(v > 0.1 * v.max())]


def invert_kernel(K, tau_sing=TAU_SING):
    """``Ω⁻¹`` by pivoted LU, refusing condition numbers above ``1/τ_sing``."""
    omega = K.omega if isinstance(K, TransmutationKernel) else np.atleast_2d(K)
    names = K.spectral.names() if isinstance(K, TransmutationKernel) else \
        [str(i) for i in range(omega.shape[0])]
    if omega.shape[0] != omega.shape[1]:
        raise ContractError("kernel matrix must be square")
    if omega.size == 0:
        return omega.copy(), 1.0
    s = np.linalg.svd(omega, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    if not cond <= 1.0 / tau_sing:
        bad = _null_labels(omega, names, tau_sing)
        raise SingularKernelError(
            f"transmutation kernel is singular (condition number {cond:.3g}); "
            f"offending labels: {bad}", bad)
    inv = np.linalg.solve(omega, np.eye(omega.shape[0], dtype=complex))
    return inv, cond


def kernel_inverse(matrix, spectral):
    """Inverse with respect to the ``ρ``-weighted sum: ``D⁻¹ Ω⁻¹ D⁻¹``."""
    Dinv = np.diag(1.0 / np.asarray(spectral.weights))
    return Dinv @ np.linalg.inv(matrix) @ Dinv


def _kernel_inverse_field(om, spectral):
    Dinv = Const(np.diag(1.0 / np.asarray(spectral.weights)).astype(complex))
    return matmul(matmul(Dinv, inverse(om)), Dinv)


def check_conditioning(K, points, tau_sing=TAU_SING):
    """Condition numbers of the running kernel at ``points``; raises when singular."""
    pts = np.atleast_2d(points)
    vals = K.running()(pts[:, 0], pts[:, 1], pts[:, 2])
    conds = np.linalg.cond(vals)
    worst = float(np.max(conds)) if conds.size else 1.0
    if not worst <= 1.0 / tau_sing:
        i = int(np.argmax(conds))
        bad = _null_labels(vals[i], K.spectral.names(), tau_sing)
        raise SingularKernelError(
            f"running kernel singular near {pts[i].tolist()} (condition {worst:.3g}); labels {bad}", bad)
    return worst


def dress_wave(psifam, K):
    """``ψ̃(λ) = Σ ρ_μ ρ_ν ψ(μ) Ω⁻¹(μ|ν) Ω₀(ν|λ)`` with the running kernel."""
    if K.K == 0:
        return psifam
    spec = K.spectral
    D = Const(spec.D.astype(complex))
    Oinv = _kernel_inverse_field(K.running(), spec)
    f = matmul(matmul(matmul(matmul(psifam.field, D), Oinv), D), Const(K.omega0))
    return WaveFamily(f, psifam.spectral)


def dress_adjoint_wave(phifam, K):
    """``φ̃ = Σ ρρ φ Ω^⊛⁻¹ Ω₀^⊛`` with ``Ω^⊛ = Ω†``."""
    if K.K == 0:
        return phifam
    spec = K.spectral
    D = Const(spec.D.astype(complex))
    Oinv = _kernel_inverse_field(K.running().H, spec)
    f = matmul(matmul(matmul(matmul(phifam.field, D), Oinv), D), Const(K.omega0.conj().T))
    return AdjointWaveFamily(f, phifam.spectral)


def tilde_kernel(K):
    """``Ω̃ = −Ω₀ Ω⁻¹ Ω₀`` with ``Ω̃₀ = −Ω₀``."""
    inv, _ = invert_kernel(K)
    O0 = K.omega0
    omega_t = -O0 @ inv @ O0
    fieldv = None
    if K.field is not None:
        fieldv = scale(-1.0, matmul(matmul(Const(O0), inverse(K.field)), Const(O0)))
    anchor = dict(K.anchor, tilde=True)
    return TransmutationKernel(omega_t, -O0, K.spectral, anchor, field=fieldv, domain=K.domain)


def tilde_differential_residual(K, points, h=1e-3, levels=3):
    """``max |∂Ω̃ − Ω₀Ω⁻¹(∂Ω)Ω⁻¹Ω₀|`` over axes, both sides by finite differences."""
    from .fields import richardson_derivative

    Kt = tilde_kernel(K)
    om, omt = K.running(), Kt.running()
    O0 = K.omega0
    pts = np.atleast_2d(points).astype(float)
    ev = lambda f: (lambda p: f(p[:, 0], p[:, 1], p[:, 2]))
    inv = np.linalg.inv(ev(om)(pts))
    worst = 0.0
    for axis in range(3):
        d_t = richardson_derivative(ev(omt), pts, axis, 1, h, levels)
        d_o = richardson_derivative(ev(om), pts, axis, 1, h, levels)
        rhs = O0 @ inv @ d_o @ inv @ O0
        worst = max(worst, float(np.abs(d_t - rhs).max()))
    return worst


# ----------------------------------------------------------------------------
# Dressing operators
# ----------------------------------------------------------------------------


def _volterra(g, h, domain, n):
    return ExtendedOp(MatrixDiffOp((identity(n),)), VolterraTail(((g, h),), domain))


def build_dressing_op(tilde_fam, fam, K, mode="forward"):
    """``𝛀 = 1 − Σ ρρ ψ̃ Ω₀⁻¹ ∂⁻¹ φ†`` (forward) or ``𝛀^⊛ = 1 − Σ ρρ φ̃ Ω₀^⊛⁻¹ ∂⁻¹ ψ†``.

    ``forward``: ``tilde_fam`` is ψ̃, ``fam`` is φ. ``adjoint``: ``tilde_fam`` is
    φ̃, ``fam`` is ψ.
    """
    n = fam.dim
    if K.K == 0:
        return ExtendedOp(MatrixDiffOp((identity(n),)))
    if mode not in ("forward", "adjoint"):
        raise ContractError("mode must be 'forward' or 'adjoint'")
    O0 = K.omega0 if mode == "forward" else K.omega0.conj().T
    invert_kernel(O0)
    spec = K.spectral
    D = spec.D.astype(complex)
    weight = D @ kernel_inverse(O0, spec) @ D
    g = scale(-1.0, matmul(tilde_fam.field, Const(weight)))
    return _volterra(g, fam.field, K.domain, n)


def build_inverse_dressing_op(fam, tilde_other, Kt, mode="forward"):
    """``𝛀⁻¹ = 1 − Σ ρρ ψ Ω̃₀⁻¹ ∂⁻¹ φ̃†`` (forward) or ``1 − Σ ρρ φ Ω̃₀^⊛⁻¹ ∂⁻¹ ψ̃†``.

    ``Kt`` is the tilde kernel; ``forward`` takes ``fam`` = ψ and
    ``tilde_other`` = φ̃, ``adjoint`` takes φ and ψ̃.
    """
    n = fam.dim
    if Kt.K == 0:
        return ExtendedOp(MatrixDiffOp((identity(n),)))
    O0 = Kt.omega0 if mode == "forward" else Kt.omega0.conj().T
    invert_kernel(O0)
    spec = Kt.spectral
    D = spec.D.astype(complex)
    weight = D @ kernel_inverse(O0, spec) @ D
    g = scale(-1.0, matmul(fam.field, Const(weight)))
    return _volterra(g, tilde_other.field, Kt.domain, n)
