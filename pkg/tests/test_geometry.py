import numpy as np
import pytest

from delsarte.algebra import diff_op
from delsarte.concomitant import (
    OneFormSample, Op2Plus1, ParametricPair, TwoFormSample, oneform, twoform,
)
from delsarte.errors import ContractError
from delsarte.fields import Const, ExpFamily
from delsarte.geometry import (
    DUNAVANT6, Box, Cycle1, Path3, Surface2, boundary_matches, canonical_path,
    cylinder_surface, from_json, line_integral, path_independence_check, rectangle_cycle,
    rectangle_surface, staircase_path, straight_path, surface_independence_check,
    surface_integral, tent_surface, to_json,
)

LAM = 0.7
HEAT = ParametricPair(diff_op(0.0, 0.0, 1.0), diff_op(0.0, 0.0, 0.0, 4.0))
PSI = ExpFamily([1.0], LAM, LAM ** 2, 4 * LAM ** 3)
PHI = ExpFamily([1.0], LAM, -LAM ** 2, 4 * LAM ** 3)
KERNEL_FORM = lambda x, y, t: oneform(HEAT, PHI, PSI, (x, y, t))

OP = Op2Plus1({(1, 1): Const([[1.0]])})
PSI2 = ExpFamily([1.0], 0.6, -0.4, -0.24)
PHI2 = ExpFamily([1.0], 0.5, -0.3, 0.15)
KERNEL_2FORM = lambda x, y, t: twoform(OP, PHI2, PSI2, (x, y, t))

P0 = np.array([-1.0, 0.0, 0.0])
P1 = np.array([0.5, 0.4, 0.1])


def zero_form(x, y, t):
    z = np.zeros_like(x, dtype=complex)
    return OneFormSample(z, z, z)


def dxy_form(x, y, t):
    return OneFormSample(y + 0j, x + 0j, 0 * x + 0j)


def open_form(x, y, t):
    return OneFormSample(y + 0j, 0 * x + 0j, 0 * x + 0j)


def test_box_validation():
    with pytest.raises(ContractError):
        Box((0, 1), (0, 1), (0, 1), (4, 8, 8))
    with pytest.raises(ContractError):
        Box((1, 0), (0, 1), (0, 1), (8, 8, 8))
    b = Box((0, 1), (0, 1), (0.0, 0.0), (8, 8, 1))
    assert b.points().shape == (64, 3)
    assert b.fd_steps()[2] == pytest.approx(1 / 7)


def test_path_validation():
    with pytest.raises(ContractError):
        Path3([[0, 0, 0], [0, 0, 0], [1, 0, 0]])
    with pytest.raises(ContractError):
        Path3([[0, 0, 0], [3, 0, 0]], box=Box((0, 1), (0, 1), (0, 1), (8, 8, 8)))


def test_zero_form_line_integral():
    assert line_integral(zero_form, straight_path(P0, P1)) == 0


def test_exact_form_any_path():
    a, b = np.zeros(3), np.array([1.0, 2.0, 0.0])
    for path in (straight_path(a, b), staircase_path(a, b, 4), canonical_path(a, b)):
        assert abs(line_integral(dxy_form, path) - 2.0) <= 1e-13
    assert path_independence_check(dxy_form, straight_path(a, b), staircase_path(a, b)) <= 1e-12


def test_kernel_form_matches_antiderivative():
    W = PHI.H @ PSI
    exact = (W(*P1) - W(*P0))[0, 0] / (2 * LAM)
    for path in (canonical_path(P0, P1), straight_path(P0, P1), staircase_path(P0, P1, 5)):
        assert abs(line_integral(KERNEL_FORM, path) - exact) <= 1e-10 * abs(exact)


def test_kernel_form_path_independence():
    assert path_independence_check(KERNEL_FORM, staircase_path(P0, P1, 4),
                                   straight_path(P0, P1)) <= 1e-7


def test_open_form_path_dependence():
    a, b = np.zeros(3), np.array([1.0, 1.0, 0.0])
    pa = Path3([a, [1.0, 0.0, 0.0], b])
    pb = Path3([a, [0.0, 1.0, 0.0], b])
    assert path_independence_check(open_form, pa, pb) >= 1e-2


def test_endpoint_mismatch():
    with pytest.raises(ContractError):
        path_independence_check(dxy_form, straight_path(P0, P1), straight_path(P0, 2 * P1))


def test_path_reverse_and_split():
    path = staircase_path(P0, P1, 3)
    I = line_integral(KERNEL_FORM, path)
    assert line_integral(KERNEL_FORM, path.reversed()) == -I
    a, b = path.split(4)
    assert abs(line_integral(KERNEL_FORM, a) + line_integral(KERNEL_FORM, b) - I) <= 1e-10


def test_line_quadrature_converges():
    f = lambda x, y, t: OneFormSample(np.exp(3 * x) * np.sin(5 * y), 0 * x, 0 * x)
    path = Path3([[0, 0, 0], [1.0, 1.0, 0]], order=4)
    ref = line_integral(f, Path3(path.vertices, 20, 8))
    errs = [abs(line_integral(f, Path3(path.vertices, 4, s)) - ref) for s in (2, 4)]
    assert np.log2(errs[0] / errs[1]) >= 4 - 1


def test_dunavant_exactness():
    bary, w = DUNAVANT6
    assert abs(w.sum() - 1.0) < 1e-12
    # ∫_T u^p v^q over the reference triangle = p! q! / (p + q + 2)!
    from math import factorial
    u, v = bary[:, 1], bary[:, 2]
    for p in range(7):
        for q in range(7 - p):
            exact = factorial(p) * factorial(q) / factorial(p + q + 2)
            assert abs(0.5 * np.sum(w * u ** p * v ** q) - exact) < 1e-12


def test_unit_square_area():
    surf = rectangle_surface([0, 0, 0], [1, 0, 0], [0, 1, 0], 3, 3)
    form = lambda x, y, t: TwoFormSample(np.ones_like(x) + 0j, 0 * x, 0 * x)
    assert abs(surface_integral(form, surf) - 1.0) < 1e-13
    zero = lambda x, y, t: TwoFormSample(0 * x + 0j, 0 * x, 0 * x)
    assert surface_integral(zero, surf) == 0


def test_surface_orientation_and_additivity():
    surf = tent_surface([-0.5, -0.5, 0.1], [1, 0, 0], [0, 1, 0], [0, 0, 0.2], 4, 4)
    I = surface_integral(KERNEL_2FORM, surf)
    assert surface_integral(KERNEL_2FORM, surf.reversed()) == -I
    half1 = Surface2(surf.vertices, surf.triangles[: len(surf.triangles) // 2])
    half2 = Surface2(surf.vertices, surf.triangles[len(surf.triangles) // 2:])
    total = surface_integral(KERNEL_2FORM, half1) + surface_integral(KERNEL_2FORM, half2)
    assert abs(total - I) <= 1e-10


def test_tent_matches_refined_quadrature():
    surf = tent_surface([-0.5, -0.5, 0.0], [1, 0, 0], [0, 1, 0.1], [0.1, 0.0, 0.3], 6, 6,
                        profile="bump")
    coarse = surface_integral(KERNEL_2FORM, surf)
    fine = surface_integral(KERNEL_2FORM, surf, refine=4)
    assert abs(coarse - fine) <= 1e-8 * abs(fine)


def test_surface_independence_closed_form():
    corner, e1, e2 = [-0.5, -0.5, 0.1], [1, 0, 0], [0, 1, 0]
    sigma = rectangle_cycle(corner, e1, e2, 6, 6)
    flat = rectangle_surface(corner, e1, e2, 6, 6)
    tent = tent_surface(corner, e1, e2, [0, 0, 0.25], 6, 6)
    assert boundary_matches(flat, sigma) and boundary_matches(tent, sigma)
    assert surface_independence_check(KERNEL_2FORM, flat, tent, sigma) <= 1e-7


def test_surface_independence_negative_control():
    corner, e1, e2 = [-0.5, -0.5, 0.1], [1, 0, 0], [0, 1, 0]
    flat = rectangle_surface(corner, e1, e2, 6, 6)
    tent = tent_surface(corner, e1, e2, [0, 0, 0.25], 6, 6)
    open2 = lambda x, y, t: TwoFormSample(np.exp(t) + 0j, 0 * x, 0 * x)
    assert surface_independence_check(open2, flat, tent) >= 1e-2


def test_degenerate_surfaces():
    sigma0 = rectangle_cycle([0, 0, 0], [1, 0, 0], [0, 1, 0], 2, 2)
    surf, sigma = cylinder_surface(sigma0, [0, 0, 0.0], layers=1)
    assert surf.area() == 0
    assert surface_independence_check(KERNEL_2FORM, surf, surf, sigma, sigma0) == 0


def test_cylinder_boundary():
    sigma0 = rectangle_cycle([-0.5, -0.5, 0.0], [1, 0, 0], [0, 1, 0], 3, 3)
    surf, sigma = cylinder_surface(sigma0, [0, 0, 0.3], layers=3)
    assert boundary_matches(surf, sigma, sigma0)
    assert not boundary_matches(surf.reversed(), sigma, sigma0)


def test_boundary_mismatch_raises():
    a = rectangle_surface([0, 0, 0], [1, 0, 0], [0, 1, 0], 2, 2)
    b = rectangle_surface([0, 0, 0], [2, 0, 0], [0, 1, 0], 2, 2)
    with pytest.raises(ContractError):
        surface_independence_check(KERNEL_2FORM, a, b)


def test_cycle_checks():
    with pytest.raises(ContractError):
        Cycle1([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    with pytest.raises(ContractError):
        Cycle1([[0, 0, 0], [1, 1, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0]])
    c = rectangle_cycle([0, 0, 0], [1, 0, 0], [0, 1, 0])
    assert len(c.edges()) == 4


def test_json_roundtrip():
    objs = [staircase_path(P0, P1), rectangle_cycle([0, 0, 0], [1, 0, 0], [0, 1, 0]),
            tent_surface([0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], 2, 2)]
    for obj in objs:
        back = from_json(to_json(obj))
        assert np.array_equal(back.vertices, obj.vertices)
        assert to_json(back) == to_json(obj)


def test_canonical_path_legs():
    path = canonical_path(P0, P1)
    legs = np.diff(path.vertices, axis=0)
    assert [int(np.flatnonzero(l)[0]) for l in legs] == [2, 1, 0]
    assert canonical_path(P0, P0) is None
