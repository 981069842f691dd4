import numpy as np
import sympy as sp
from hypothesis import given, settings, strategies as st

from delsarte.algebra import ExtendedOp, apply_field, diff_op, formal_adjoint
from delsarte.concomitant import (
    Op2Plus1, ParametricPair, closedness_residual_1form, closedness_residual_2form,
    concomitant_x, concomitant_x_field, concomitant_xy, divergence_residual_1d,
    divergence_residual_fd, oneform,
    sample, twoform,
)
from delsarte.fields import Const, ExpFamily, PolyGauss, SymField, richardson_derivative
from delsarte.geometry import Box

X = np.linspace(-1.5, 1.5, 7)
LAM = 0.7
HEAT = ParametricPair(diff_op(0.0, 0.0, 1.0), diff_op(0.0, 0.0, 0.0, 4.0))
PSI = ExpFamily([1.0], LAM, LAM ** 2, 4 * LAM ** 3)
PHI = ExpFamily([1.0], LAM, -LAM ** 2, 4 * LAM ** 3)
BOX = Box((-1.0, 1.0), (0.0, 0.5), (0.0, 0.2), (32, 32, 32))


def pg(rng, n=1):
    return PolyGauss(rng.normal(size=3) + 1j * rng.normal(size=3), rng.uniform(-0.5, 0.5),
                     rng.uniform(0.8, 1.3), rng.normal(size=n) + 1j * rng.normal(size=n))


def numeric_divergence(L, phi, psi, x):
    """∂_x Z by differences against φ†Lψ − (L*φ)†ψ."""
    Z = concomitant_x_field(L, phi, psi)
    fn = lambda p: sample(Z, (p[:, 0], p[:, 1], p[:, 2]))
    pts = np.stack([x, 0 * x, 0 * x], axis=1)
    dZ = richardson_derivative(fn, pts, 0, 1, 0.05)
    lhs = sample(phi.H @ apply_field(ExtendedOp(L), psi), (x, 0, 0))
    lhs = lhs - sample(apply_field(ExtendedOp(formal_adjoint(L)), phi).H @ psi, (x, 0, 0))
    return np.abs(dZ - lhs).max()


def test_order_zero_concomitant():
    rng = np.random.default_rng(0)
    L = diff_op(pg(rng))
    assert concomitant_x(L, pg(rng), pg(rng), (0.3, 0.0, 0.0)) == 0


def test_first_order_concomitant():
    rng = np.random.default_rng(1)
    a, phi, psi = pg(rng), pg(rng), pg(rng)
    L = diff_op(0.0, a)
    got = concomitant_x(L, phi, psi, (X, 0, 0))
    assert np.allclose(got, sample(phi.H @ a @ psi, (X, 0, 0)))
    assert numeric_divergence(L, phi, psi, X) < 1e-9


def test_wronskian_concomitant():
    rng = np.random.default_rng(2)
    phi, psi = pg(rng), pg(rng)
    L = diff_op(0.0, 0.0, 1.0)
    got = concomitant_x(L, phi, psi, (X, 0, 0))
    expect = sample(phi.H @ psi.dx() - phi.dx().H @ psi, (X, 0, 0))
    assert np.allclose(got, expect)
    assert numeric_divergence(L, phi, psi, X) < 1e-9


def test_matrix_concomitant_divergence():
    rng = np.random.default_rng(3)
    x, y, t = sp.symbols("x y t", real=True)
    a = SymField(sp.Matrix([[sp.exp(-x ** 2), sp.I * x], [1 + y, sp.cos(x)]]))
    L = diff_op(Const(np.eye(2)), a, a @ a, n=2)
    assert numeric_divergence(L, pg(rng, 2), pg(rng, 2), X) < 1e-8


def test_divergence_residual_zero_phi():
    rng = np.random.default_rng(4)
    zero_phi = Const(np.zeros((1, 1)))
    assert divergence_residual_1d(HEAT, zero_phi, pg(rng), (0.1, 0.0, 0.0)) == 0.0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_divergence_identity_holds_for_any_fields(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    pair = ParametricPair(diff_op(*c[:3]), diff_op(*c))
    phi, psi = pg(rng), pg(rng)
    for which in ("L", "M"):
        assert divergence_residual_1d(pair, phi, psi, (X, 0.2, 0.1), which) <= 1e-8


def test_divergence_identity_variable_coefficients():
    x, y, t = sp.symbols("x y t", real=True)
    u = SymField(2 * sp.exp(-(x - y) ** 2 - t))
    pair = ParametricPair(diff_op(u, 0.0, 1.0),
                          diff_op(3 * u.dx(), 6 * u, 0.0, 4.0))
    phi = SymField(sp.exp(-x ** 2 + sp.I * y) * (1 + x))
    psi = SymField(sp.exp(-(x - 0.3) ** 2 - t) * x ** 2)
    for which in ("L", "M"):
        assert divergence_residual_1d(pair, phi, psi, (X, 0.3, 0.2), which) <= 1e-8


def test_oneform_zero_psi():
    s = oneform(HEAT, PHI, Const([[0.0]]), (0.1, 0.1, 0.1))
    assert (s.W, s.ZL, s.ZM) == (0, 0, 0)


def test_oneform_exponential_components():
    p = (0.3, 0.2, 0.1)
    s = oneform(HEAT, PHI, PSI, p)
    w = np.exp(2 * LAM * p[0] + 8 * LAM ** 3 * p[2])
    assert np.isclose(s.W, w, rtol=1e-14)
    assert np.isclose(s.ZL, 0.0, atol=1e-14)  # (λ − λ) W
    # Z_M = 4(φ†ψ'' − φ'†ψ' + φ''†ψ) = 4λ² W
    assert np.isclose(s.ZM, 4 * LAM ** 2 * w, rtol=1e-13)


def test_oneform_term_by_term_oracle():
    rng = np.random.default_rng(5)
    phi, psi = pg(rng), pg(rng)
    p = (X, 0.0, 0.0)
    s = oneform(HEAT, phi, psi, p)
    v = lambda f, k: sample(f.d(k), p)
    zl = np.conj(v(phi, 0)) * v(psi, 1) - np.conj(v(phi, 1)) * v(psi, 0)
    zm = 4 * (np.conj(v(phi, 0)) * v(psi, 2) - np.conj(v(phi, 1)) * v(psi, 1)
              + np.conj(v(phi, 2)) * v(psi, 0))
    assert np.allclose(s.ZL, zl) and np.allclose(s.ZM, zm)


def test_closedness_1form_on_kernel_waves():
    assert closedness_residual_1form(HEAT, PHI, PSI, BOX) <= 1e-7


def test_closedness_1form_negative_control():
    psi = PolyGauss([1.0, 0.3], 0.2, 1.0)
    assert closedness_residual_1form(HEAT, PHI, psi, BOX) >= 1e-2


def test_closedness_1form_zero_phi():
    assert closedness_residual_1form(HEAT, Const([[0.0]]), PSI, BOX) == 0.0


def test_closedness_converges_at_second_order():
    r = []
    for n in (10, 20):
        box = Box((-1.0, 1.0), (0.0, 0.5), (0.0, 0.2), (n, n, n))
        r.append(closedness_residual_1form(HEAT, PHI, PSI, box, levels=1))
    assert np.log2(r[0] / r[1]) >= 1.8


# ----------------------------------------------------------------------------
# 2+1
# ----------------------------------------------------------------------------

A, B = 0.6, -0.4
a, b = -0.5, 0.3
OP = Op2Plus1({(1, 1): Const([[1.0]])})
PSI2 = ExpFamily([1.0], A, B, A * B)
PHI2 = ExpFamily([1.0], -a, -b, -a * b)
BOX2 = Box((-0.5, 0.5), (-0.5, 0.5), (0.0, 0.3), (16, 16, 16))


def numeric_divergence_2d(op, phi, psi, pts):
    from delsarte.concomitant import concomitant_xy_fields

    zx, zy = concomitant_xy_fields(op, phi, psi)
    f = lambda F: (lambda p: sample(F, (p[:, 0], p[:, 1], p[:, 2])))
    div = richardson_derivative(f(zx), pts, 0, 1, 0.05) + richardson_derivative(f(zy), pts, 1, 1, 0.05)
    p = (pts[:, 0], pts[:, 1], pts[:, 2])
    lhs = sample(phi.H @ op.apply_field(psi), p) - sample(op.adjoint_apply_field(phi).H @ psi, p)
    return np.abs(div - lhs).max()


def test_order_zero_2p1():
    rng = np.random.default_rng(6)
    op = Op2Plus1({(0, 0): pg(rng)})
    zx, zy = concomitant_xy(op, pg(rng), pg(rng), (0.1, 0.2, 0.0))
    assert zx == 0 and zy == 0


def test_first_order_2p1():
    rng = np.random.default_rng(7)
    u = pg(rng)
    op = Op2Plus1({(1, 0): u})
    phi = SymField(sp.exp(-sp.Symbol("x", real=True) ** 2 - sp.Symbol("y", real=True) ** 2))
    psi = SymField(sp.exp(-(sp.Symbol("x", real=True) - 0.2) ** 2 + sp.Symbol("y", real=True)))
    pts = np.stack([X, 0.3 + 0 * X, 0 * X], axis=1)
    zx, zy = concomitant_xy(op, phi, psi, (X, 0.3, 0.0))
    assert np.allclose(zx, sample(phi.H @ u @ psi, (X, 0.3, 0.0))) and np.all(zy == 0)
    assert numeric_divergence_2d(op, phi, psi, pts) < 1e-9


def test_mixed_term_x_first():
    xs, ys = sp.symbols("x y", real=True)
    phi = SymField(sp.exp(-xs ** 2 - ys ** 2) * (1 + sp.I * xs))
    psi = SymField(sp.exp(-(xs - 0.2) ** 2 - (ys + 0.1) ** 2) * (ys + 2))
    p = (X, 0.3, 0.0)
    zx, zy = concomitant_xy(OP, phi, psi, p)
    assert np.allclose(zx, sample(phi.H @ psi.dy(), p))
    assert np.allclose(zy, -sample(phi.dx().H @ psi, p))
    pts = np.stack([X, 0.3 + 0 * X, 0 * X], axis=1)
    assert numeric_divergence_2d(OP, phi, psi, pts) < 1e-9


def test_higher_order_2p1_divergence():
    rng = np.random.default_rng(8)
    xs, ys = sp.symbols("x y", real=True)
    u = SymField(sp.exp(-xs ** 2) * (1 + ys))
    op = Op2Plus1({(2, 1): u, (0, 2): Const([[1.0 + 1j]]), (1, 0): u})
    phi = SymField(sp.exp(-xs ** 2 - ys ** 2))
    psi = SymField(sp.exp(-(xs - 0.3) ** 2 - ys ** 2) * (xs + 1j))
    pts = np.stack([X, 0.1 + 0 * X, 0 * X], axis=1)
    assert numeric_divergence_2d(op, phi, psi, pts) < 1e-8


def test_twoform_zero_psi():
    s = twoform(OP, PHI2, Const([[0.0]]), (0.0, 0.0, 0.0))
    assert (s.W, s.ZX, s.ZY) == (0, 0, 0)


def test_twoform_exponential_components():
    p = (0.2, -0.1, 0.1)
    s = twoform(OP, PHI2, PSI2, p)
    w = np.exp((A - a) * p[0] + (B - b) * p[1] + (A * B - a * b) * p[2])
    assert np.isclose(s.W, w)
    assert np.isclose(s.ZX, -B * w)   # −φ†ψ_y
    assert np.isclose(s.ZY, -a * w)   # +(φ_x)†ψ = −a W


def test_closedness_2form_kernel_waves():
    assert closedness_residual_2form(OP, PHI2, PSI2, BOX2) <= 1e-7
    assert OP.kernel_residual(PSI2)(0.1, 0.2, 0.3)[0, 0] == 0
    assert abs(OP.adjoint_kernel_residual(PHI2)(0.1, 0.2, 0.3)[0, 0]) < 1e-15


def test_closedness_2form_sign_self_test():
    assert closedness_residual_2form(OP, PHI2, PSI2, BOX2, sign=-1.0) >= 1e-2


def test_closedness_2form_negative_control():
    xs, ys = sp.symbols("x y", real=True)
    psi = SymField(sp.exp(-xs ** 2 - ys ** 2))
    assert closedness_residual_2form(OP, PHI2, psi, BOX2) >= 1e-2


def test_closedness_2form_zero_phi():
    assert closedness_residual_2form(OP, Const([[0.0]]), PSI2, BOX2) == 0.0


def test_divergence_fd_fallback_converges():
    rng = np.random.default_rng(9)
    c = rng.normal(size=4)
    pair = ParametricPair(diff_op(*c[:3]), diff_op(*c))
    phi, psi = pg(rng), pg(rng)
    r = [divergence_residual_fd(pair, phi, psi, X, 0.2, 0.1, "M", h) for h in (0.2, 0.1)]
    assert np.log2(r[0] / r[1]) >= 3.5
    assert divergence_residual_fd(pair, phi, psi, X, 0.2, 0.1, "M", 0.05) <= 1e-4
