"""Concrete seed pairs, wave families, N-soliton generation and closed-form oracles.

The 1+1 pair lives in the two-parameter frame with ``y`` as the heat time of
``𝓛`` and ``t`` as the KdV time of ``𝓜``::

    L = ∂² + u,        M = 4∂³ + 6u∂ + 3u_x.

For y-independent ``u`` their compatibility is ``u_t = u_xxx + 6 u u_x``,
whose one-soliton is ``2κ² sech²(κ(x − x₀) + 4κ³t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import ExtendedOp, apply_field, diff_op, project_plus
from .concomitant import Op2Plus1, ParametricPair
from .dressing import dress_operator
from .errors import ContractError, SingularKernelError, TAU_SING
from .fields import Const, Domain, ExpFamily, add, matmul, zero
from .transmutation import (
    AdjointWaveFamily, SpectralSet, WaveFamily, build_dressing_op, build_inverse_dressing_op,
    check_conditioning, dress_adjoint_wave, dress_wave, running_kernel, tilde_kernel,
)

__all__ = [
    "heat_pair",
    "zero_seed_waves",
    "KdVSolitonSpec",
    "DressingStage",
    "dress_chain",
    "kdv_nsoliton",
    "kdv_nsoliton_field",
    "soliton_oracle",
    "WronskianOracle",
    "wronskian_oracle",
    "pde_residual_kdv",
    "kdv_mass",
    "heat2d_instance",
    "DEFAULT_DOMAIN",
]

DEFAULT_DOMAIN = Domain(-20.0, 20.0)


def heat_pair(u=None):
    """``(∂_y − (∂² + u), ∂_t − (4∂³ + 6u∂ + 3u_x))``; ``u=None`` is the zero seed."""
    if u is None:
        return ParametricPair(diff_op(0.0, 0.0, 1.0), diff_op(0.0, 0.0, 0.0, 4.0))
    if u.shape != (1, 1):
        raise ContractError("heat_pair expects a scalar potential")
    one = Const([[1.0]])
    return ParametricPair(diff_op(u, 0.0, one),
                          diff_op(3.0 * u.dx(), 6.0 * u, 0.0, 4.0 * one))


def zero_seed_waves(spec, branch="decaying", second=None):
    """Exponential kernel families of the zero-potential heat pair.

    ``ψ(λ) = exp(λx + λ²y + 4λ³t)``. The adjoint kernel is spanned by
    ``exp(−μx − μ²y − 4μ³t)``; ``branch='decaying'`` takes ``μ = −λ̄`` so that
    ``φ(λ)†ψ(λ')`` decays as ``x → −∞`` for ``Re λ > 0``, while
    ``branch='literal'`` takes ``μ = λ``. ``second`` adds ``b_k`` times the
    reflected branch ``exp(−λx + λ²y − 4λ³t)`` to each ψ.
    """
    lam = spec.rates
    k = len(lam)
    psi = ExpFamily(np.ones((1, k)), lam, lam ** 2, 4 * lam ** 3)
    if second is not None:
        b = np.asarray(second, dtype=complex).reshape(1, k)
        psi = add(psi, ExpFamily(b, -lam, lam ** 2, -4 * lam ** 3))
    if branch == "decaying":
        mu = -np.conj(lam)
    elif branch == "literal":
        mu = lam
    else:
        raise ContractError(f"unknown adjoint branch {branch!r}")
    phi = ExpFamily(np.ones((1, k)), -mu, -mu ** 2, -4 * mu ** 3)
    return WaveFamily(psi, spec), AdjointWaveFamily(phi, spec)


@dataclass(frozen=True)
class KdVSolitonSpec:
    kappas: tuple
    offsets: tuple = None

    def __post_init__(self):
        kap = tuple(float(k) for k in self.kappas)
        off = (0.0,) * len(kap) if self.offsets is None else tuple(float(x) for x in self.offsets)
        if len(off) != len(kap):
            raise ContractError("one offset per rate is required")
        if any(not k > 0 for k in kap):
            raise ContractError("soliton rates must be positive")
        if len(set(kap)) != len(kap):
            raise ContractError("soliton rates must be pairwise distinct")
        if len(kap) > 8:
            raise ContractError("at most 8 solitons are supported")
        object.__setattr__(self, "kappas", kap)
        object.__setattr__(self, "offsets", off)

    @property
    def N(self):
        return len(self.kappas)

    def phases(self):
        """Per-stage ``Ω₀ = exp(2κx₀)/(2κ)`` placing soliton j at ``x_j`` in isolation."""
        k = np.asarray(self.kappas)
        return np.exp(2 * k * np.asarray(self.offsets)) / (2 * k)


@dataclass
class DressingStage:
    kernel: object
    omega_op: ExtendedOp
    omega_inv: ExtendedOp
    omega_adj: ExtendedOp
    pair: ParametricPair
    psi: WaveFamily
    phi: AdjointWaveFamily
    L_ext: ExtendedOp = None
    M_ext: ExtendedOp = None


def dress_chain(spec, domain=DEFAULT_DOMAIN, check_points=None, tau_sing=TAU_SING):
    """Iterated one-point dressing of the zero seed, one rate per stage.

    Stage ``j`` dresses the seed waves of ``κ_j`` through all earlier
    ``𝛀``/``𝛀^⊛`` and then applies its own scalar dressing.
    Conditioning failures raise :class:`SingularKernelError` naming the stage.
    """
    pair = heat_pair()
    stages = []
    omegas = spec.phases()
    for j, kap in enumerate(spec.kappas):
        s = SpectralSet.from_rates([kap], tag=f"stage{j + 1}")
        psi0, phi0 = zero_seed_waves(s)
        psi_f, phi_f = psi0.field, phi0.field
        for st in stages:
            psi_f = apply_field(st.omega_op, psi_f)
            phi_f = apply_field(st.omega_adj, phi_f)
        psi = WaveFamily(psi_f, s)
        phi = AdjointWaveFamily(phi_f, s)
        K = running_kernel(phi, psi, domain, np.array([[omegas[j]]]))
        if check_points is not None:
            try:
                check_conditioning(K, check_points, tau_sing)
            except SingularKernelError as exc:
                raise SingularKernelError(f"dressing stage {j + 1}: {exc}", exc.labels) from exc
        psi_t = dress_wave(psi, K)
        phi_t = dress_adjoint_wave(phi, K)
        Om = build_dressing_op(psi_t, phi, K, "forward")
        Om_adj = build_dressing_op(phi_t, psi, K, "adjoint")
        Oi = build_inverse_dressing_op(psi, phi_t, tilde_kernel(K), "forward")
        Lt = dress_operator(pair, Om, Oi, "L")
        Mt = dress_operator(pair, Om, Oi, "M")
        stage = DressingStage(K, Om, Oi, Om_adj, pair, psi, phi, Lt, Mt)
        stages.append(stage)
        pair = ParametricPair(project_plus(Lt), project_plus(Mt))
    return stages, pair


def kdv_nsoliton_field(spec, domain=DEFAULT_DOMAIN, check_points=None):
    """The potential ``ũ`` (zeroth coefficient of the dressed ``L``) as a field."""
    if spec.N == 0:
        return zero((1, 1)), []
    stages, pair = dress_chain(spec, domain, check_points)
    return pair.L.coeffs[0], stages


def kdv_nsoliton(spec, box=None, domain=DEFAULT_DOMAIN, xs=None, ts=None, y=0.0):
    """Sampled ``u(x, t)``, shape ``(nt, nx)``.

    Samples come from ``box`` (y fixed at its lower value) or from explicit
    ``xs`` and ``ts`` arrays.
    """
    if box is not None:
        xs, ys, ts = box.axes()
        y = ys[0]
    X, T = np.meshgrid(np.atleast_1d(xs), np.atleast_1d(ts))
    if spec.N == 0:
        return np.zeros(X.shape)
    u, _ = kdv_nsoliton_field(spec, domain)
    return u(X, y, T)[..., 0, 0].real


def soliton_oracle(kappa, x0, x, t):
    return 2 * kappa ** 2 / np.cosh(kappa * (x - x0) + 4 * kappa ** 3 * t) ** 2


class WronskianOracle:
    """``u = 2 ∂²_x ln W(f_1, …, f_N)`` from a symbolic Wronskian.

    ``f_j = e^{θ_j} + b_j e^{−θ_j}``, ``θ_j = κ_j x + 4κ_j³ t``,
    ``b_j = e^{2κ_j x_j} Π_{k≠j} (κ_j + κ_k)/(κ_k − κ_j)``.
    Only ``W`` and its derivatives are symbolic; the log-derivatives are
    assembled numerically. Exposes ``u``, ``u_x``, ``u_t``, ``u_xxx``.
    """

    def __init__(self, spec):
        import sympy as sp

        x, t = sp.symbols("x t", real=True)
        N = spec.N
        self.spec = spec
        if N == 0:
            W = sp.Integer(1)
        else:
            kap = [sp.Float(k, 30) for k in spec.kappas]
            fs = []
            for j in range(N):
                P = sp.Integer(1)
                for k in range(N):
                    if k != j:
                        P *= (kap[j] + kap[k]) / (kap[k] - kap[j])
                b = sp.exp(2 * kap[j] * sp.Float(spec.offsets[j], 30)) * P
                th = kap[j] * x + 4 * kap[j] ** 3 * t
                fs.append(sp.exp(th) + b * sp.exp(-th))
            W = sp.Matrix(N, N, lambda i, j: sp.diff(fs[j], x, i)).det()
        self.W = W
        mk = lambda e: _vectorize(sp.lambdify((x, t), e, modules="numpy"))
        self._dW = [mk(sp.diff(W, x, k)) for k in range(6)]
        Wt = sp.diff(W, t)
        self._dWt = [mk(sp.diff(Wt, x, k)) for k in range(3)]

    def _ratios(self, x, t):
        w0 = self._dW[0](x, t)
        return [f(x, t) / w0 for f in self._dW], [f(x, t) / w0 for f in self._dWt]

    def u(self, x, t):
        (_, w1, w2, *_), _ = self._ratios(x, t)
        return 2 * (w2 - w1 ** 2)

    def u_x(self, x, t):
        (_, w1, w2, w3, *_), _ = self._ratios(x, t)
        return 2 * (w3 - 3 * w1 * w2 + 2 * w1 ** 3)

    def u_xxx(self, x, t):
        (_, w1, w2, w3, w4, w5), _ = self._ratios(x, t)
        l5 = (w5 - 5 * w1 * w4 - 10 * w2 * w3 + 20 * w1 ** 2 * w3 + 30 * w1 * w2 ** 2
              - 60 * w1 ** 3 * w2 + 24 * w1 ** 5)
        return 2 * l5

    def u_t(self, x, t):
        # ∂_t ln W = a0, so u_t = 2 ∂²_x (W_t / W)
        (_, w1, w2, *_), (a0, a1, a2) = self._ratios(x, t)
        return 2 * (a2 - 2 * a1 * w1 - a0 * w2 + 2 * a0 * w1 ** 2)

    def pde_residual(self, x, t):
        return self.u_t(x, t) - 6 * self.u(x, t) * self.u_x(x, t) - self.u_xxx(x, t)


def wronskian_oracle(spec):
    return WronskianOracle(spec)


def _vectorize(fn):
    def call(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        return np.real(np.broadcast_to(fn(x, t), x.shape)).astype(float)
    return call


def pde_residual_kdv(u, x, t, y=0.0):
    """``max |u_t − 6 u u_x − u_xxx|`` at the samples.

    ``u`` may be a field (exact derivatives) or an object with ``u``, ``u_x``,
    ``u_t``, ``u_xxx`` callables of ``(x, t)``.
    """
    if hasattr(u, "u_xxx"):
        return float(np.abs(u.pde_residual(x, t)).max())
    if u.is_zero:
        return 0.0
    v = lambda f: f(x, y, t)[..., 0, 0]
    res = v(u.dt()) - 6 * v(u) * v(u.dx()) - v(u.d(3))
    return float(np.abs(res).max())


def kdv_mass(u, ts, domain=DEFAULT_DOMAIN, y=0.0):
    """``∫ u dx`` over the domain at each time in ``ts`` (Gauss-Legendre nodes)."""
    ts = np.atleast_1d(ts)
    X = np.tile(domain.nodes, ts.size)
    T = np.repeat(ts, domain.nodes.size)
    vals = u(X, y, T)[..., 0, 0].reshape(ts.size, -1)
    return (vals * domain.weights[None, :]).sum(axis=1).real


def heat2d_instance(u=None, rates=((1.0, 1.0),), adjoint_rates=None):
    """``𝓛 = ∂_t − (∂_x∂_y + u)`` with zero-seed families.

    ``ψ(α, β) = exp(αx + βy + αβt)`` and ``φ(a, b) = exp(−ax − by − abt)``
    (kernels of 𝓛 and 𝓛* when ``u = 0``).
    """
    coeffs = {(1, 1): Const([[1.0]])}
    if u is not None:
        coeffs[(0, 0)] = u
    op = Op2Plus1(coeffs)
    rates = np.asarray(rates, dtype=complex).reshape(-1, 2)
    arates = rates if adjoint_rates is None else np.asarray(adjoint_rates, dtype=complex).reshape(-1, 2)
    spec = SpectralSet(tuple((a + 1j * 0, f"beta={b.real:g}") for a, b in rates))
    aspec = SpectralSet(tuple((a + 1j * 0, f"b={b.real:g}") for a, b in arates))
    k = len(rates)
    psi = ExpFamily(np.ones((1, k)), rates[:, 0], rates[:, 1], rates[:, 0] * rates[:, 1])
    a, b = arates[:, 0], arates[:, 1]
    phi = ExpFamily(np.ones((1, len(arates))), -a, -b, -a * b)
    return op, WaveFamily(psi, spec), AdjointWaveFamily(phi, aspec)
