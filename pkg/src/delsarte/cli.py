"""Command-line driver: ``verify``, ``kernel``, ``dress``, ``soliton``, ``stokes``, ``export``.

Configuration is an INI file (sections ``run``, ``box``, ``spectral``,
``soliton``, ``kernel``, ``tolerances``, ``export``); command-line flags
override it. Reports are JSON with sorted keys and no timestamps, so a fixed
seed gives byte-identical output for any ``--threads``.

Exit codes: 0 pass, 1 check failure, 2 usage or configuration error,
3 numerical failure (singular kernel, ill-conditioned probes, decay).
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .errors import ConditioningError, ContractError, DomainError, SingularKernelError

__all__ = ["RunConfig", "ConfigError", "TOLERANCES", "SUITES", "load_config", "run_suites",
           "cmd_verify", "cmd_kernel", "cmd_dress", "cmd_soliton", "cmd_stokes", "cmd_export",
           "main"]

SUITES = ("lagrange", "closedness-1d", "closedness-2d", "path-independence", "stokes",
          "kernel-consistency", "dressing", "compatibility", "soliton")

TOLERANCES = {
    "lagrange": 1e-8,
    "convergence_order": 2.0,
    "closedness": 1e-7,
    "negative_control": 1e-2,
    "path": 1e-7,
    "surface": 1e-7,
    "kernel_algebra": 1e-12,
    "kernel_fd": 1e-7,
    "intertwining": 1e-6,
    "differentiality": 1e-8,
    "identity": 1e-7,
    "darboux": 1e-6,
    "compatibility": 1e-6,
    "oracle": 1e-6,
    "pde_single": 1e-7,
    "pde": 1e-5,
    "mass": 1e-5,
    "tau_sing": 1e-12,
}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
_NUMERIC_ERRORS = (SingularKernelError, ConditioningError, DomainError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    suites: tuple = SUITES
    box_x: tuple = (-1.0, 1.0)
    box_y: tuple = (0.0, 0.5)
    box_t: tuple = (0.0, 0.2)
    box_counts: tuple = (32, 32, 32)
    rates: tuple = (0.6, 1.1)
    weights: tuple = None
    omega0: tuple = (2.0, 0.5)
    kappas: tuple = (0.6, 1.0, 1.4)
    offsets: tuple = (-3.0, 0.0, 2.0)
    n: int = None
    soliton_x: tuple = (-20.0, 20.0)
    soliton_t: tuple = (0.0, 1.0)
    soliton_nx: int = 1024
    soliton_nt: int = 64
    kernel_mode: str = "1d"
    P: tuple = (0.7, 0.3, 0.2)
    P0: tuple = (-0.5, 0.0, 0.0)
    path: str = "canonical"
    rates2: tuple = ((1.0, 0.5), (0.4, -0.3))
    adjoint_rates2: tuple = ((0.2, 0.4), (-0.6, 0.1))
    surface_corner: tuple = (-0.3, 0.1, 0.0)
    surface_e1: tuple = (0.8, 0.0, 0.0)
    surface_e2: tuple = (0.0, 0.6, 0.0)
    surface_lift: tuple = (0.0, 0.0, 0.3)
    surface_profile: str = "flat"
    tolerances: dict = dc_field(default_factory=lambda: dict(TOLERANCES))
    out: str = None
    seed: int = 0
    threads: int = 1
    export_input: str = None
    export_output: str = None
    export_axes: tuple = None

    def validate(self):
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suite(s) {unknown}; choose from {list(SUITES)}")
        for name, v in self.tolerances.items():
            if name not in TOLERANCES:
                raise ConfigError(f"unknown tolerance {name!r}")
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"tolerance {name} must be positive, got {v}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.n is not None and not 0 <= self.n <= 8:
            raise ConfigError("--n must lie in 0..8")
        if len(self.omega0) != len(self.rates):
            raise ConfigError("omega0 needs one diagonal entry per rate")
        if self.weights is not None and len(self.weights) != len(self.rates):
            raise ConfigError("weights need one entry per rate")
        if len(self.kappas) != len(self.offsets):
            raise ConfigError("offsets need one entry per soliton rate")
        if self.kernel_mode not in ("1d", "2d"):
            raise ConfigError("kernel mode must be 1d or 2d")
        if self.path not in ("canonical", "straight", "staircase"):
            raise ConfigError("path must be canonical, straight or staircase")
        if len(self.box_counts) != 3 or any(c < 1 for c in self.box_counts):
            raise ConfigError("box counts need three positive integers")
        return self

    def tol(self, name):
        return float(self.tolerances[name])

    def box(self):
        from .geometry import Box

        return Box(self.box_x, self.box_y, self.box_t, self.box_counts)

    def soliton_spec(self):
        from .instances import KdVSolitonSpec

        kap, off = self.kappas, self.offsets
        if self.n is not None:
            if self.n <= len(kap):
                kap, off = kap[:self.n], off[:self.n]
            else:
                kap = tuple(0.6 + 0.4 * k for k in range(self.n))
                off = tuple(2.5 * (k - (self.n - 1) / 2) for k in range(self.n))
        return KdVSolitonSpec(kap, off)

    def public(self):
        """Config fields that enter reports (thread count and paths excluded)."""
        skip = {"threads", "out", "export_input", "export_output"}
        return {k: v for k, v in sorted(vars(self).items()) if k not in skip}


# ----------------------------------------------------------------------------
# Config parsing
# ----------------------------------------------------------------------------


def _floats(text, n=None):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {text!r}")
    return vals


def _ints(text, n=None):
    try:
        vals = tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected integers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} integers, got {text!r}")
    return vals


def _pairs(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"expected a:b pairs, got {item!r}")
        out.append(_floats(" ".join(parts), 2))
    return tuple(out)


def _axes(text):
    out = []
    for item in text.split(","):
        parts = item.strip().split(":")
        if len(parts) != 3:
            raise ConfigError(f"axes are count:min:max, got {item!r}")
        out.append((_ints(parts[0], 1)[0],) + _floats(" ".join(parts[1:]), 2))
    return tuple(out)


def _tol_pair(text):
    if "=" not in text:
        raise ConfigError(f"--tol expects name=value, got {text!r}")
    name, val = text.split("=", 1)
    try:
        return name.strip(), float(val)
    except ValueError as exc:
        raise ConfigError(f"tolerance {name} needs a number, got {val!r}") from exc


_KEYS = {
    "run": {"suite": ("suites", lambda s: tuple(x.strip() for x in s.split(",") if x.strip())),
            "seed": ("seed", lambda s: _ints(s, 1)[0]),
            "threads": ("threads", lambda s: _ints(s, 1)[0]),
            "out": ("out", str)},
    "box": {"x": ("box_x", lambda s: _floats(s, 2)), "y": ("box_y", lambda s: _floats(s, 2)),
            "t": ("box_t", lambda s: _floats(s, 2)), "counts": ("box_counts", lambda s: _ints(s, 3))},
    "spectral": {"rates": ("rates", _floats), "weights": ("weights", _floats),
                 "omega0": ("omega0", _floats), "rates2": ("rates2", _pairs),
                 "adjoint_rates2": ("adjoint_rates2", _pairs)},
    "soliton": {"kappas": ("kappas", _floats), "offsets": ("offsets", _floats),
                "n": ("n", lambda s: _ints(s, 1)[0]), "x": ("soliton_x", lambda s: _floats(s, 2)),
                "t": ("soliton_t", lambda s: _floats(s, 2)),
                "nx": ("soliton_nx", lambda s: _ints(s, 1)[0]),
                "nt": ("soliton_nt", lambda s: _ints(s, 1)[0])},
    "kernel": {"mode": ("kernel_mode", str.strip), "P": ("P", lambda s: _floats(s, 3)),
               "P0": ("P0", lambda s: _floats(s, 3)), "path": ("path", str.strip),
               "corner": ("surface_corner", lambda s: _floats(s, 3)),
               "e1": ("surface_e1", lambda s: _floats(s, 3)),
               "e2": ("surface_e2", lambda s: _floats(s, 3)),
               "lift": ("surface_lift", lambda s: _floats(s, 3)),
               "profile": ("surface_profile", str.strip)},
    "export": {"input": ("export_input", str), "output": ("export_output", str),
               "axes": ("export_axes", _axes)},
}


def load_config(path=None, text=None):
    """Parse an INI config into a :class:`RunConfig` (defaults where absent)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        if path is not None:
            with open(path) as fh:
                parser.read_file(fh)
        elif text is not None:
            parser.read_string(text)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = RunConfig()
    updates = {}
    tols = dict(TOLERANCES)
    for section in parser.sections():
        if section == "tolerances":
            for k, v in parser.items(section):
                tols[k] = _tol_pair(f"{k}={v}")[1]
            continue
        if section not in _KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for k, v in parser.items(section):
            if k not in _KEYS[section]:
                raise ConfigError(f"unknown key {k!r} in [{section}]")
            name, conv = _KEYS[section][k]
            updates[name] = conv(v)
    return replace(cfg, tolerances=tols, **updates)


# ----------------------------------------------------------------------------
# Checks and suites
# ----------------------------------------------------------------------------


def _le(value, tol):
    value = float(value)
    return {"value": value, "tol": float(tol), "op": "<=", "passed": bool(value <= tol)}


def _ge(value, tol):
    value = float(value)
    return {"value": value, "tol": float(tol), "op": ">=", "passed": bool(value >= tol)}


def _pg(rng, n=1, width=(0.8, 1.3)):
    from .fields import PolyGauss

    vec = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PolyGauss(rng.normal(size=3) + 1j * rng.normal(size=3), rng.uniform(-0.5, 0.5),
                     rng.uniform(*width), vec)


def _rand_coeff(rng, n):
    from .fields import Const, PolyGauss, add, matmul

    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    g = PolyGauss([1.0, rng.normal()], rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.3))
    return add(Const(A), matmul(g, Const(B)))


def suite_lagrange(cfg, rng):
    from .algebra import diff_op
    from .concomitant import ParametricPair, divergence_residual_1d, divergence_residual_fd

    x = np.linspace(-1.0, 1.0, 7)
    pt = (x, 0.2, 0.1)
    worst = 0.0
    cases = []
    for _ in range(20):
        n = int(rng.integers(1, 3))
        ol, om = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        pair = ParametricPair(diff_op(*[_rand_coeff(rng, n) for _ in range(ol + 1)]),
                              diff_op(*[_rand_coeff(rng, n) for _ in range(om + 1)]))
        phi, psi = _pg(rng, n), _pg(rng, n)
        r = max(divergence_residual_1d(pair, phi, psi, pt, w) for w in ("L", "M"))
        worst = max(worst, r)
        cases.append((pair, phi, psi))
    # values-only fallback: Richardson differences of W and Z at two steps
    pair, phi, psi = max(cases, key=lambda c: c[0].L.order + c[0].M.order)
    steps = (0.2, 0.1)
    res = [max(divergence_residual_fd(pair, phi, psi, x, 0.2, 0.1, w, h) for w in ("L", "M"))
           for h in steps]
    order = np.log2(res[0] / res[1]) if res[1] > 0 else np.inf
    return {"divergence_residual": _le(worst, cfg.tol("lagrange")),
            "fd_convergence_order": _ge(order, cfg.tol("convergence_order")),
            "fd_residuals": {"h": list(steps), "values": [float(r) for r in res]},
            "cases": 20}


def _zero_seed(cfg):
    from .instances import zero_seed_waves
    from .transmutation import SpectralSet

    spec = SpectralSet.from_rates(cfg.rates, weights=cfg.weights)
    return spec, *zero_seed_waves(spec)


def suite_closedness_1d(cfg, rng):
    from .concomitant import closedness_residual_1form
    from .fields import PolyGauss, matmul
    from .instances import heat_pair

    pair = heat_pair()
    _, psi, phi = _zero_seed(cfg)
    box = cfg.box()
    r = closedness_residual_1form(pair, phi.field, psi.field, box)
    bent = matmul(psi.field, PolyGauss([1.0, 0.3], 0.0, 1e6))
    neg = closedness_residual_1form(pair, phi.field, bent, box)
    return {"closedness_residual": _le(r, cfg.tol("closedness")),
            "negative_control": _ge(neg, cfg.tol("negative_control"))}


def _heat2d(cfg):
    from .instances import heat2d_instance

    return heat2d_instance(rates=cfg.rates2, adjoint_rates=cfg.adjoint_rates2)


def suite_closedness_2d(cfg, rng):
    from .concomitant import closedness_residual_2form
    from .fields import PolyGauss, matmul
    from .geometry import Box

    op, psi, phi = _heat2d(cfg)
    b = cfg.box()
    box = Box((-0.5, 0.5), (-0.5, 0.5), b.t, b.counts)
    r = closedness_residual_2form(op, phi.field, psi.field, box)
    bent = matmul(psi.field, PolyGauss([1.0, 0.3], 0.0, 1e6))
    neg = closedness_residual_2form(op, phi.field, bent, box)
    return {"closedness_residual": _le(r, cfg.tol("closedness")),
            "negative_control": _ge(neg, cfg.tol("negative_control"))}


def _oneform(cfg):
    from .concomitant import OneFormSample, oneform_fields
    from .instances import heat_pair

    _, psi, phi = _zero_seed(cfg)
    fields = oneform_fields(heat_pair(), phi.field, psi.field)
    return lambda x, y, t: OneFormSample(*(f(x, y, t) for f in fields))


def suite_path_independence(cfg, rng):
    from .geometry import (
        Path3, canonical_path, path_independence_check, staircase_path, straight_path,
    )

    form = _oneform(cfg)
    P0, P = np.asarray(cfg.P0, float), np.asarray(cfg.P, float)
    wiggle = [P0 + s * (P - P0) + rng.uniform(-0.3, 0.3, 3) for s in (0.3, 0.6)]
    wander = Path3(np.array([P0] + wiggle + [P]))
    pairs = {"canonical~straight": (canonical_path(P0, P), straight_path(P0, P)),
             "straight~staircase": (straight_path(P0, P), staircase_path(P0, P, steps=4)),
             "canonical~random": (canonical_path(P0, P), wander)}
    out = {}
    for name, (a, b) in pairs.items():
        out[name] = _le(path_independence_check(form, a, b), cfg.tol("path"))
    return out


def suite_stokes(cfg, rng):
    from .concomitant import TwoFormSample, twoform_fields
    from .geometry import (
        cylinder_surface, rectangle_cycle, rectangle_surface, surface_independence_check,
        tent_surface,
    )

    op, psi, phi = _heat2d(cfg)
    fields = twoform_fields(op, phi.field, psi.field)
    form = lambda x, y, t: TwoFormSample(*(f(x, y, t) for f in fields))
    c, e1, e2 = cfg.surface_corner, cfg.surface_e1, cfg.surface_e2
    lift = rng.uniform(-0.3, 0.3, 3)
    flat = rectangle_surface(c, e1, e2, 6, 6)
    sigma = rectangle_cycle(c, e1, e2, 6, 6)
    pyramid = tent_surface(c, e1, e2, cfg.surface_lift, 6, 6, "pyramid")
    bump = tent_surface(c, e1, e2, lift, 6, 6, "bump")
    # cylinder: σ₀ in a t-slice swept along t, capped by the two flat faces
    out = {"flat~pyramid": _le(surface_independence_check(form, flat, pyramid, sigma),
                               cfg.tol("surface")),
           "flat~random_bump": _le(surface_independence_check(form, flat, bump, sigma),
                                   cfg.tol("surface"))}
    sigma0 = rectangle_cycle(c, e1, e2, 3, 3)
    shift = np.array([0.0, 0.0, 0.25])
    side, sig1 = cylinder_surface(sigma0, shift, layers=3)
    top = rectangle_surface(np.asarray(c) + shift, e1, e2, 3, 3)
    base = rectangle_surface(c, e1, e2, 3, 3)
    from .geometry import surface_integral

    # ∮ over the closed cylinder vanishes: bottom + side = top
    closed = abs(np.asarray(surface_integral(form, base)) + np.asarray(surface_integral(form, side))
                 - np.asarray(surface_integral(form, top))).max()
    out["closed_cylinder"] = _le(closed, cfg.tol("surface"))
    return out


def suite_kernel_consistency(cfg, rng):
    from .fields import Domain
    from .transmutation import (
        SpectralSet, TransmutationKernel, running_kernel, tilde_differential_residual,
        tilde_kernel,
    )

    worst = 0.0
    for k in (1, 2, 3, 5):
        om = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)) + 2 * k * np.eye(k)
        O0 = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)) + 2 * k * np.eye(k)
        K = TransmutationKernel(om, O0, SpectralSet.from_rates(np.arange(1.0, k + 1)))
        Kt = tilde_kernel(K)
        e1 = np.abs(Kt.omega - (-O0 @ np.linalg.inv(om) @ O0)).max() / np.abs(Kt.omega).max()
        e2 = np.abs(Kt.omega0 + O0).max()
        e3 = np.abs(tilde_kernel(Kt).omega - om).max() / np.abs(om).max()
        worst = max(worst, e1, e2, e3)
    spec, psi, phi = _zero_seed(cfg)
    K = running_kernel(phi, psi, Domain(-20.0, 20.0), np.diag(cfg.omega0))
    x = np.linspace(-2.0, 2.0, 5)
    pts = np.stack([x, np.full_like(x, 0.1), np.full_like(x, 0.05)], axis=1)
    fd = tilde_differential_residual(K, pts)
    return {"tilde_algebra": _le(worst, cfg.tol("kernel_algebra")),
            "tilde_differential": _le(fd, cfg.tol("kernel_fd"))}


def _dressing_ops(cfg, rates, omega0):
    from .fields import Domain
    from .instances import zero_seed_waves
    from .transmutation import (
        SpectralSet, build_dressing_op, build_inverse_dressing_op, check_conditioning,
        dress_adjoint_wave, dress_wave, invert_kernel, running_kernel, tilde_kernel,
    )

    spec = SpectralSet.from_rates(rates)
    psi, phi = zero_seed_waves(spec)
    K = running_kernel(phi, psi, Domain(-20.0, 20.0), np.diag(omega0))
    invert_kernel(K.omega0, cfg.tol("tau_sing"))
    x = np.linspace(-4.0, 4.0, 9)
    check_conditioning(K, np.stack([x, 0 * x + 0.1, 0 * x + 0.05], axis=1), cfg.tol("tau_sing"))
    Om = build_dressing_op(dress_wave(psi, K), phi, K)
    Oi = build_inverse_dressing_op(psi, dress_adjoint_wave(phi, K), tilde_kernel(K))
    return K, Om, Oi


def _window():
    x = np.linspace(-4.0, 4.0, 9)
    return x, 0.1, 0.05


def _darboux_oracle(kappa, x0):
    import sympy as sp

    x, t = sp.symbols("x t", real=True)
    f = sp.cosh(kappa * (x - x0) + 4 * kappa ** 3 * t)
    return sp.lambdify((x, t), 2 * sp.diff(sp.log(f), x, 2), "numpy")


def suite_dressing(cfg, rng):
    from .algebra import apply_field, compose, project_plus
    from .dressing import dressed_pair, dressed_pair_report
    from .fields import Domain
    from .instances import heat_pair

    pair = heat_pair()
    x, y, t = _window()
    probes = [(_pg(rng), _pg(rng)) for _ in range(6)]
    K, Om, Oi = _dressing_ops(cfg, cfg.rates, cfg.omega0)
    rep, Lt, Mt = dressed_pair_report(pair, Om, Oi, probes, Domain(-20.0, 20.0), x, y, t)
    out = {"intertwining_" + k: _le(v, cfg.tol("intertwining"))
           for k, v in rep.intertwining_residual.items()}
    out.update({"differentiality_" + k: _le(v, cfg.tol("differentiality"))
                for k, v in rep.differentiality_residual.items()})
    out["orders"] = {"value": rep.orders, "expected": {"L": pair.L.order, "M": pair.M.order},
                     "passed": rep.orders == {"L": pair.L.order, "M": pair.M.order}}
    ident = compose(Om, Oi)
    gauss = [_pg(rng) for _ in range(10)]
    idres = max(float(np.abs(apply_field(ident, f)(x, y, t) - f(x, y, t)).max()) for f in gauss)
    out["identity"] = _le(idres, cfg.tol("identity"))
    # one-point dressing against the classical Darboux map
    kap, w0 = cfg.rates[0], cfg.omega0[0]
    x0 = np.log(2 * kap * w0) / (2 * kap)
    _, O1, I1 = _dressing_ops(cfg, (kap,), (w0,))
    L1, _ = dressed_pair(pair, O1, I1)
    u = project_plus(L1).coeffs[0](x, y, t)[:, 0, 0]
    out["darboux"] = _le(np.abs(u - _darboux_oracle(kap, x0)(x, t)).max(), cfg.tol("darboux"))
    return out


def suite_compatibility(cfg, rng):
    from .algebra import project_plus
    from .concomitant import ParametricPair
    from .dressing import dressed_pair, zs_compatibility_residual
    from .instances import heat_pair

    pair = heat_pair()
    x, y, t = _window()
    pts = np.stack([x, np.full_like(x, y), np.full_like(x, t)], axis=1)
    K, Om, Oi = _dressing_ops(cfg, cfg.rates, cfg.omega0)
    Lt, Mt = dressed_pair(pair, Om, Oi)
    good = zs_compatibility_residual(ParametricPair(project_plus(Lt), project_plus(Mt)), points=pts)
    bad = zs_compatibility_residual(ParametricPair(project_plus(Lt), pair.M), points=pts)
    return {"dressed_pair": _le(good, cfg.tol("compatibility")),
            "mismatched_pair": _ge(bad, cfg.tol("negative_control"))}


def _soliton_checks(cfg, spec):
    from .instances import kdv_mass, kdv_nsoliton_field, pde_residual_kdv, wronskian_oracle

    x = np.linspace(-8.0, 8.0, 33)
    u, _ = kdv_nsoliton_field(spec)
    if spec.N == 0:
        mx = 0.0 if u.is_zero else float(np.abs(u(x, 0.0, 0.0)).max())
        return {"max_abs": _le(mx, cfg.tol("oracle"))}
    W = wronskian_oracle(spec)
    delta = max(float(np.abs(u(x, 0.0, t)[:, 0, 0] - W.u(x, t)).max()) for t in (0.0, 0.4))
    pde = pde_residual_kdv(u, x[::2], 0.2)
    m = kdv_mass(u, np.linspace(0.0, 1.0, 5))
    ptol = cfg.tol("pde_single") if spec.N == 1 else cfg.tol("pde")
    return {"oracle_delta": _le(delta, cfg.tol("oracle")),
            "pde_residual": _le(pde, ptol),
            "mass_drift": _le(np.abs(m - m[0]).max(), cfg.tol("mass"))}


def suite_soliton(cfg, rng):
    full = cfg.soliton_spec()
    if cfg.n is not None:
        return {f"N={full.N}": _soliton_checks(cfg, full)}
    from .instances import KdVSolitonSpec

    return {f"N={k}": _soliton_checks(cfg, KdVSolitonSpec(full.kappas[:k], full.offsets[:k]))
            for k in range(1, full.N + 1)}


_SUITE_FNS = {
    "lagrange": suite_lagrange,
    "closedness-1d": suite_closedness_1d,
    "closedness-2d": suite_closedness_2d,
    "path-independence": suite_path_independence,
    "stokes": suite_stokes,
    "kernel-consistency": suite_kernel_consistency,
    "dressing": suite_dressing,
    "compatibility": suite_compatibility,
    "soliton": suite_soliton,
}


def _all_passed(node):
    if isinstance(node, dict):
        if "passed" in node and isinstance(node["passed"], bool) and "error" not in node:
            own = node["passed"]
        else:
            own = True
        return own and all(_all_passed(v) for k, v in node.items() if k != "passed")
    return True


def _run_one(cfg, name):
    rng = np.random.default_rng([cfg.seed, SUITES.index(name)])
    try:
        checks = _SUITE_FNS[name](cfg, rng)
    except _NUMERIC_ERRORS as exc:
        return {"error": f"{type(exc).__name__}: {exc}", "numerical": True, "passed": False}
    except ContractError as exc:
        return {"error": f"{type(exc).__name__}: {exc}", "numerical": False, "passed": False}
    return {"checks": checks, "passed": _all_passed(checks)}


def run_suites(cfg):
    """Run the selected suites (in parallel when ``threads > 1``); order is fixed."""
    names = list(cfg.suites)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda n: _run_one(cfg, n), names))
    else:
        results = [_run_one(cfg, n) for n in names]
    return dict(zip(names, results))


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj):
    return json.dumps(_to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _emit(cfg, name, report):
    text = dumps(report)
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, name), "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _exit_for(results):
    if any(r.get("numerical") for r in results.values()):
        return EXIT_NUMERIC
    return EXIT_OK if all(r["passed"] for r in results.values()) else EXIT_FAIL


def cmd_verify(cfg):
    results = run_suites(cfg)
    report = {"command": "verify", "config": cfg.public(), "suites": results,
              "passed": all(r["passed"] for r in results.values())}
    _emit(cfg, "report.json", report)
    return _exit_for(results)


def cmd_stokes(cfg):
    cfg = replace(cfg, suites=("path-independence", "stokes"))
    results = run_suites(cfg)
    report = {"command": "stokes", "config": cfg.public(), "suites": results,
              "passed": all(r["passed"] for r in results.values())}
    _emit(cfg, "stokes.json", report)
    return _exit_for(results)


# ----------------------------------------------------------------------------
# Artifact commands
# ----------------------------------------------------------------------------


def _require_out(cfg):
    if not cfg.out:
        raise ConfigError("this command needs --out <dir>")
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def cmd_kernel(cfg):
    from .geometry import canonical_path, staircase_path, straight_path, tent_surface
    from .transmutation import SpectralSet, assemble_kernel_1d, assemble_kernel_2d, invert_kernel

    out = _require_out(cfg)
    if cfg.kernel_mode == "1d":
        from .instances import heat_pair

        spec, psi, phi = _zero_seed(cfg)
        P0, P = np.asarray(cfg.P0, float), np.asarray(cfg.P, float)
        make = {"canonical": canonical_path, "straight": straight_path,
                "staircase": staircase_path}[cfg.path]
        path = make(P0, P) if np.linalg.norm(P - P0) > 0 else None
        K = assemble_kernel_1d(heat_pair(), phi, psi, P, P0, np.diag(cfg.omega0), path=path)
    else:
        op, psi, phi = _heat2d(cfg)
        if len(cfg.omega0) != len(psi):
            O0 = None
        else:
            O0 = np.diag(cfg.omega0)
        surf = tent_surface(cfg.surface_corner, cfg.surface_e1, cfg.surface_e2,
                            cfg.surface_lift, 6, 6, cfg.surface_profile)
        K = assemble_kernel_2d(op, phi, psi, surf, O0)
    _, cond = invert_kernel(K, cfg.tol("tau_sing"))
    K.cond = cond
    K.save(os.path.join(out, "kernel"))
    report = {"command": "kernel", "header": K.header(), "passed": True,
              "omega": [[[v.real, v.imag] for v in row] for row in K.omega]}
    _emit(cfg, "kernel_report.json", report)
    return EXIT_OK


def cmd_dress(cfg):
    from .algebra import project_plus
    from .dressing import dressed_pair_report
    from .fields import Domain
    from .instances import heat_pair
    from .io import Grid, write_grid

    out = _require_out(cfg)
    rng = np.random.default_rng([cfg.seed, len(SUITES)])
    pair = heat_pair()
    x, y, t = _window()
    K, Om, Oi = _dressing_ops(cfg, cfg.rates, cfg.omega0)
    probes = [(_pg(rng), _pg(rng)) for _ in range(4)]
    rep, Lt, Mt = dressed_pair_report(pair, Om, Oi, probes, Domain(-20.0, 20.0), x, y, t)
    xs = np.linspace(-10.0, 10.0, 201)
    comps = [c(xs, y, t)[:, 0, 0] for op in (Lt, Mt) for c in project_plus(op).coeffs]
    write_grid(os.path.join(out, "dressed_coeffs.ddxg"),
               Grid([(xs.size, xs[0], xs[-1])], np.stack(comps)))
    rep.coefficients = {"file": "dressed_coeffs.ddxg",
                        "components": [f"L{k}" for k in range(3)] + [f"M{k}" for k in range(4)],
                        "y": y, "t": t}
    rep.condition_number = float(K.cond)
    with open(os.path.join(out, "dressed.json"), "w") as fh:
        fh.write(rep.to_json() + "\n")
    ok = (all(v <= cfg.tol("intertwining") for v in rep.intertwining_residual.values())
          and all(v <= cfg.tol("differentiality") for v in rep.differentiality_residual.values())
          and rep.orders == {"L": 2, "M": 3}
          and rep.compatibility_residual <= cfg.tol("compatibility"))
    sys.stdout.write(rep.to_json() + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_soliton(cfg):
    from .io import Grid, grid_to_csv, write_grid
    from .instances import kdv_nsoliton

    out = _require_out(cfg)
    spec = cfg.soliton_spec()
    nx, nt = cfg.soliton_nx, cfg.soliton_nt
    if nx < 1 or nt < 1:
        raise ConfigError("soliton grids need nx, nt >= 1")
    xs = np.linspace(*cfg.soliton_x, nx) if nx > 1 else np.array([cfg.soliton_x[0]])
    ts = np.linspace(*cfg.soliton_t, nt) if nt > 1 else np.array([cfg.soliton_t[0]])
    U = kdv_nsoliton(spec, xs=xs, ts=ts)
    grid = Grid([(nx, *cfg.soliton_x), (1, 0.0, 0.0), (nt, *cfg.soliton_t)],
                U.reshape(1, nt, 1, nx))
    write_grid(os.path.join(out, "soliton.ddxg"), grid)
    grid_to_csv(os.path.join(out, "soliton.csv"), grid)
    checks = _soliton_checks(cfg, spec)
    meta = {"command": "soliton", "spec": {"kappas": spec.kappas, "offsets": spec.offsets},
            "grid": {"x": [nx, *cfg.soliton_x], "t": [nt, *cfg.soliton_t]},
            "max": float(np.abs(U).max()) if U.size else 0.0,
            "checks": checks, "passed": _all_passed(checks)}
    _emit(cfg, "soliton.json", meta)
    return EXIT_OK if meta["passed"] else EXIT_FAIL


def cmd_export(cfg):
    from .io import Grid, csv_to_grid, grid_to_csv, read_grid, write_grid

    src, dst = cfg.export_input, cfg.export_output
    if not src or not dst:
        raise ConfigError("export needs --input and --output")
    if src.endswith(".csv"):
        grid = csv_to_grid(src, cfg.export_axes)
        write_grid(dst, grid)
    else:
        grid = read_grid(src)
        if dst.endswith(".csv"):
            grid_to_csv(dst, grid)
        else:
            write_grid(dst, grid)
    sys.stdout.write(dumps({"command": "export", "input": src, "output": dst,
                            "axes": [list(a) for a in grid.axes], "components": grid.components,
                            "passed": True}))
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "kernel": cmd_kernel, "dress": cmd_dress,
            "soliton": cmd_soliton, "stokes": cmd_stokes, "export": cmd_export}


# ----------------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--suite", help="comma-separated suite names")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for randomized probes (u64)")
    common.add_argument("--threads", type=int, help="worker threads for suites")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="tolerance override (repeatable)")
    common.add_argument("--n", type=int, help="number of solitons")
    common.add_argument("--input", help="export: source grid (.ddxg or .csv)")
    common.add_argument("--output", help="export: destination (.csv or .ddxg)")
    common.add_argument("--axes", help="export from CSV: count:min:max per axis, comma-separated")
    parser = argparse.ArgumentParser(prog="delsarte", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    upd = {}
    if args.suite:
        upd["suites"] = tuple(s.strip() for s in args.suite.split(",") if s.strip())
    for key in ("out", "seed", "threads", "n"):
        if getattr(args, key) is not None:
            upd[key] = getattr(args, key)
    if args.input:
        upd["export_input"] = args.input
    if args.output:
        upd["export_output"] = args.output
    if args.axes:
        upd["export_axes"] = _axes(args.axes)
    tols = dict(cfg.tolerances)
    for item in args.tol:
        name, val = _tol_pair(item)
        tols[name] = val
    return replace(cfg, tolerances=tols, **upd).validate()


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"delsarte: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SingularKernelError as exc:
        print(f"delsarte: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _NUMERIC_ERRORS as exc:
        print(f"delsarte: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ContractError, OSError) as exc:
        print(f"delsarte: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
