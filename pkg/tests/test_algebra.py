import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from delsarte.algebra import (
    ExtendedOp, MatrixDiffOp, VolterraTail, apply, apply_field, compose, derivative_op,
    diff_op, differentiality_residual, formal_adjoint, identity_op, param_derivative,
    project_plus, prune_tail, trace_pairing,
)
from delsarte.errors import ContractError, DecayError, TAU_ALG, TAU_ZERO
from delsarte.fields import Const, Domain, ExpFamily, OracleField, PolyGauss, SymField

DOM = Domain(-12.0, 12.0)
X = np.linspace(-3.0, 3.0, 9)


def gauss(rng, n=1, center=None):
    c = rng.normal(size=3) + 1j * rng.normal(size=3)
    vec = rng.normal(size=n) + 1j * rng.normal(size=n)
    mu = rng.uniform(-1, 1) if center is None else center
    return PolyGauss(c, mu, rng.uniform(0.8, 1.5), vec)


def gauss_mat(rng, n):
    return PolyGauss(rng.normal(size=2) + 1j * rng.normal(size=2), rng.uniform(-1, 1),
                     rng.uniform(0.8, 1.5), np.ones(n)) @ Const(rng.normal(size=(1, n)))


def random_op(rng, order, ntail, n=1, amp=1.0):
    if n == 1:
        coeffs = tuple(gauss(rng) for _ in range(order + 1))
    else:
        coeffs = tuple(gauss_mat(rng, n) for _ in range(order + 1))
    pairs = tuple((gauss(rng, n) * amp, gauss(rng, n)) for _ in range(ntail))
    return ExtendedOp(MatrixDiffOp(coeffs), VolterraTail(pairs, DOM if pairs else None))


def test_identity_apply():
    rng = np.random.default_rng(1)
    f = gauss(rng)
    got = apply(identity_op(), f, (X, 0.0, 0.0))
    assert np.allclose(got, f(X))


def test_derivative_of_constant():
    f = Const([[2.0 + 1j]])
    assert np.abs(apply(derivative_op(1), f, (X, 0.0, 0.0))).max() == 0.0


def test_gaussian_tail_matches_adaptive_quadrature():
    g = PolyGauss([1.0], 0.3, 1.0)
    h = PolyGauss([1.0, 0.5j], -0.2, 1.2)
    f = PolyGauss([0.5, 1.0], 0.1, 0.9)
    op = ExtendedOp(MatrixDiffOp((Const([[0.0]]),)), VolterraTail(((g, h),), DOM))
    for x in (-2.0, 0.0, 1.5):
        integrand = lambda s: np.conj(h(s)[0, 0]) * f(s)[0, 0]
        re = quad(lambda s: integrand(s).real, -np.inf, x, epsabs=1e-14, epsrel=1e-13)[0]
        im = quad(lambda s: integrand(s).imag, -np.inf, x, epsabs=1e-14, epsrel=1e-13)[0]
        expect = g(x)[0, 0] * (re + 1j * im)
        got = apply(op, f, (x, 0.0, 0.0))[0, 0]
        assert abs(got - expect) <= 1e-10 * abs(expect)


def test_tail_decay_violation():
    g = PolyGauss([1.0], 0.0, 1.0)
    h = ExpFamily([1.0], 0.1, 0.0, 0.0)
    op = ExtendedOp(MatrixDiffOp((Const([[0.0]]),)), VolterraTail(((g, h),), DOM))
    with pytest.raises(DecayError):
        apply(op, Const([[1.0]]), (0.0, 0.0, 0.0))


def test_oracle_derivative_limit():
    f = OracleField(lambda x, y, t, kx, ky, kt: np.sin(x + kx * np.pi / 2), (1, 1), max_deriv=1)
    with pytest.raises(ContractError):
        apply(derivative_op(2), f, (0.0, 0.0, 0.0))


def test_adjoint_of_derivative():
    adj = formal_adjoint(derivative_op(1).diff)
    assert np.allclose(adj.coeffs[1](0.0), -1.0)
    assert adj.coeffs[0].is_zero


def test_adjoint_of_constant():
    a = np.array([[1.0, 2j], [3.0, 4.0 - 1j]])
    adj = formal_adjoint(MatrixDiffOp((Const(a),)))
    assert np.allclose(adj.coeffs[0](0.0), a.conj().T)


def test_adjoint_second_order_coefficients_and_pairing():
    import sympy as sp

    x = sp.symbols("x y t", real=True)[0]
    a = SymField(sp.exp(-x ** 2) * (1 + sp.I * x))
    L = MatrixDiffOp((Const([[0.0]]), Const([[0.0]]), a))
    adj = formal_adjoint(L)
    ah = a.H
    for got, expect in zip(adj.coeffs, (ah.d(2), 2 * ah.d(1), ah)):
        assert np.allclose(got(X), expect(X), atol=1e-13)
    rng = np.random.default_rng(2)
    phi, psi = gauss(rng), gauss(rng)
    lhs = DOM.integrate((apply_field(ExtendedOp(adj), phi).H @ psi)(DOM.nodes))[0, 0]
    rhs = DOM.integrate((phi.H @ apply_field(ExtendedOp(L), psi))(DOM.nodes))[0, 0]
    assert abs(lhs - rhs) <= 1e-9 * abs(rhs)


def test_compose_derivatives():
    op = compose(derivative_op(1), derivative_op(1))
    assert op.diff.order == 2 and not op.tail
    rng = np.random.default_rng(3)
    a, b = gauss(rng), gauss(rng)
    ab = compose(ExtendedOp(diff_op(0.0, a)), ExtendedOp(diff_op(0.0, b)))
    assert np.allclose(ab.diff.coeffs[2](X), (a * b)(X))
    assert np.allclose(ab.diff.coeffs[1](X), (a * b.dx())(X))
    assert ab.diff.coeffs[0].is_zero


def test_tail_then_derivative_nested_quadrature():
    g = PolyGauss([1.0, 0.2], -0.4, 1.0)
    h = PolyGauss([0.7, -0.3j], 0.2, 1.1)
    f = PolyGauss([1.0, 0.0, 0.4], 0.5, 0.8)
    tail = ExtendedOp(MatrixDiffOp((Const([[0.0]]),)), VolterraTail(((g, h),), DOM))
    op = compose(tail, derivative_op(1))
    fp = f.dx()
    for x in (-1.0, 0.7):
        integrand = lambda s: np.conj(h(s)[0, 0]) * fp(s)[0, 0]
        re = quad(lambda s: integrand(s).real, -np.inf, x, epsabs=1e-14, epsrel=1e-13)[0]
        im = quad(lambda s: integrand(s).imag, -np.inf, x, epsabs=1e-14, epsrel=1e-13)[0]
        expect = g(x)[0, 0] * (re + 1j * im)
        got = apply(op, f, (x, 0.0, 0.0))[0, 0]
        assert abs(got - expect) <= 1e-9 * abs(expect)
    plus = project_plus(op)
    assert np.allclose(plus.coeffs[0](X), (g * h.H)(X))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), oa=st.integers(0, 3), ob=st.integers(0, 3),
       ta=st.integers(0, 2), tb=st.integers(0, 2))
def test_composition_soundness(seed, oa, ob, ta, tb):
    rng = np.random.default_rng(seed)
    A = random_op(rng, oa, ta)
    B = random_op(rng, ob, tb)
    f = gauss(rng)
    lhs = apply_field(compose(A, B), f, DOM)(X)
    rhs = apply_field(A, apply_field(B, f, DOM), DOM)(X)
    assert np.abs(lhs - rhs).max() <= 1e-8 * max(1.0, np.abs(rhs).max())


def test_composition_soundness_matrix():
    rng = np.random.default_rng(4)
    A = random_op(rng, 2, 2, n=2)
    B = random_op(rng, 1, 1, n=2)
    f = gauss(rng, 2)
    lhs = apply_field(compose(A, B), f)(X)
    rhs = apply_field(A, apply_field(B, f))(X)
    assert np.abs(lhs - rhs).max() <= 1e-8 * np.abs(rhs).max()


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), order=st.integers(0, 4))
def test_adjoint_involution_and_pairing(seed, order):
    rng = np.random.default_rng(seed)
    L = random_op(rng, order, 0).diff
    back = formal_adjoint(formal_adjoint(L))
    for a, b in zip(L.coeffs, back.coeffs):
        assert np.abs(a(X) - b(X)).max() <= TAU_ALG
    phi, psi = gauss(rng), gauss(rng)
    lhs = DOM.integrate((apply_field(ExtendedOp(formal_adjoint(L)), phi).H @ psi)(DOM.nodes))
    rhs = DOM.integrate((phi.H @ apply_field(ExtendedOp(L), psi))(DOM.nodes))
    assert abs(lhs - rhs).max() <= 1e-9 * max(1.0, abs(rhs).max())


def test_project_plus():
    rng = np.random.default_rng(5)
    g, h = gauss(rng), gauss(rng)
    op = derivative_op(1) + ExtendedOp(MatrixDiffOp((Const([[0.0]]),)),
                                       VolterraTail(((g, h),), DOM))
    plus = project_plus(op)
    assert plus.order == 1 and np.allclose(plus.coeffs[1](0.0), 1.0)
    assert project_plus(plus) is plus


def test_trace_pairing_examples():
    rng = np.random.default_rng(6)
    f, h, a = gauss(rng), gauss(rng), gauss(rng)
    ip = DOM.integrate((h.H @ f)(DOM.nodes))[0, 0]
    assert abs(trace_pairing(identity_op(), f, h, DOM) - ip) <= 1e-13 * abs(ip)
    g, k = gauss(rng), gauss(rng)
    pure_tail = ExtendedOp(MatrixDiffOp((Const([[0.0]]),)), VolterraTail(((g, k),), DOM))
    assert trace_pairing(pure_tail, f, h, DOM) == 0
    P = ExtendedOp(diff_op(0.0, a))
    direct = quad(lambda s: (np.conj(h(s)) * a(s) * f.dx()(s))[0, 0].real, -np.inf, np.inf,
                  epsabs=1e-14, epsrel=1e-13)[0]
    direct += 1j * quad(lambda s: (np.conj(h(s)) * a(s) * f.dx()(s))[0, 0].imag, -np.inf, np.inf,
                        epsabs=1e-14, epsrel=1e-13)[0]
    assert abs(trace_pairing(P, f, h, DOM) - direct) <= 1e-10 * abs(direct)


def test_trace_pairing_associativity():
    rng = np.random.default_rng(7)
    P = random_op(rng, 2, 2)
    f, h = gauss(rng), gauss(rng)
    a = trace_pairing(P, f, h, DOM)
    b = trace_pairing(compose(P, identity_op()), f, h, DOM)
    c = trace_pairing(compose(identity_op(), P), f, h, DOM)
    assert abs(a - b) <= TAU_ALG and abs(a - c) <= TAU_ALG


def test_differentiality_pure_differential():
    rng = np.random.default_rng(8)
    P = random_op(rng, 3, 0)
    probes = [(gauss(rng), gauss(rng)) for _ in range(8)]
    assert differentiality_residual(P, 3, probes, DOM) <= 1e-12


def test_differentiality_pure_tail():
    g = PolyGauss([1.0], 0.0, 1.0)
    h = PolyGauss([1.0], 0.5, 1.0)
    P = ExtendedOp(MatrixDiffOp((Const([[0.0]]),)), VolterraTail(((g, h),), DOM))
    rng = np.random.default_rng(9)
    probes = [(gauss(rng), gauss(rng)) for _ in range(8)]
    assert differentiality_residual(P, 1, probes, DOM) > 1e-3


def test_trace_criterion_matches_tail_vanishing():
    rng = np.random.default_rng(10)
    probes = [(gauss(rng), gauss(rng)) for _ in range(8)]
    outcomes = []
    for k in range(24):
        amp = [0.0, 1e-15, 1e-6, 1.0][k % 4]
        P = random_op(rng, int(rng.integers(0, 3)), 1 + k % 2, amp=amp)
        tail_is_zero = all(np.abs(g(DOM.nodes)).max() * np.abs(h(DOM.nodes)).max() <= TAU_ZERO
                           for g, h in P.tail.pairs)
        res = differentiality_residual(P, 2, probes, DOM)
        outcomes.append((res <= TAU_ALG) == tail_is_zero)
    assert all(outcomes)


def test_param_derivative_of_exp_tail():
    g = ExpFamily([1.0], -1.0, 0.5, 0.0)
    h = ExpFamily([1.0], 1.0, 0.25, 0.0)
    op = ExtendedOp(diff_op(0.0, g * h.H), VolterraTail(((g, h),), DOM))
    dy = param_derivative(op, 1)
    f = PolyGauss([1.0], 0.0, 1.0)
    y = np.array([0.3])
    got = apply_field(dy, f)(0.2, y)
    eps = 1e-5
    num = (apply_field(op, f)(0.2, y + eps) - apply_field(op, f)(0.2, y - eps)) / (2 * eps)
    assert np.allclose(got, num, atol=1e-8)


def test_prune_tail():
    rng = np.random.default_rng(11)
    g, h = gauss(rng), gauss(rng)
    op = ExtendedOp(MatrixDiffOp((Const([[1.0]]),)),
                    VolterraTail(((g * 1e-14, h), (g, h)), DOM))
    pruned, dropped = prune_tail(op, DOM.nodes)
    assert dropped == 1 and len(pruned.tail) == 1
