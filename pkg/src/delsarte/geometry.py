"""Boxes, paths, cycles, triangulated surfaces and the quadrature of forms on them.

Forms are callables ``form(x, y, t)`` taking equal-length 1-D arrays and
returning a :class:`~delsarte.concomitant.OneFormSample` (line integrals) or
:class:`~delsarte.concomitant.TwoFormSample` (surface integrals) whose
components have leading axis equal to the number of points.

JSON layout::

    {"kind": "path",    "vertices": [[x, y, t], ...], "order": 8, "subdivisions": 1}
    {"kind": "cycle",   "vertices": [[x, y, t], ...], "orientation": 1}
    {"kind": "surface", "vertices": [[x, y, t], ...], "triangles": [[i, j, k], ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, TAU_ALG

__all__ = [
    "Box",
    "Path3",
    "Cycle1",
    "Surface2",
    "DUNAVANT6",
    "line_integral",
    "surface_integral",
    "path_independence_check",
    "surface_independence_check",
    "canonical_path",
    "straight_path",
    "staircase_path",
    "rectangle_cycle",
    "rectangle_surface",
    "tent_surface",
    "cylinder_surface",
    "to_json",
    "from_json",
]

_VERTEX_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Uniform sample grid; an axis with ``lo == hi`` and count 1 is collapsed."""

    x: tuple = (-1.0, 1.0)
    y: tuple = (0.0, 1.0)
    t: tuple = (0.0, 1.0)
    counts: tuple = (16, 16, 16)

    def __post_init__(self):
        for name, (lo, hi), n in zip("xyt", (self.x, self.y, self.t), self.counts):
            if n == 1 and lo == hi:
                continue
            if not hi > lo:
                raise ContractError(f"box axis {name} has empty range ({lo}, {hi})")
            if n < 8:
                raise ContractError(f"box axis {name} needs at least 8 samples, got {n}")

    @property
    def ranges(self):
        return (self.x, self.y, self.t)

    def axes(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.ranges, self.counts)]

    def spacings(self):
        return tuple(0.0 if n == 1 else (hi - lo) / (n - 1)
                     for (lo, hi), n in zip(self.ranges, self.counts))

    def fd_steps(self):
        """Difference steps per axis; collapsed axes borrow the finest active spacing."""
        h = np.array(self.spacings())
        active = h[h > 0]
        fallback = active.min() if active.size else 0.05
        return np.where(h > 0, h, fallback)

    def points(self):
        X, Y, T = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), T.ravel()], axis=1)

    def contains(self, pts, tol=_VERTEX_TOL):
        pts = np.atleast_2d(pts)
        ok = np.ones(len(pts), dtype=bool)
        for k, (lo, hi) in enumerate(self.ranges):
            ok &= (pts[:, k] >= lo - tol) & (pts[:, k] <= hi + tol)
        return bool(ok.all())


def _as_vertices(vertices):
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 3:
        raise ContractError(f"vertices must be an (m, 3) array, got shape {v.shape}")
    return v


class Path3:
    """Polyline in (x, y, t) with per-segment Gauss-Legendre order."""

    def __init__(self, vertices, order=8, subdivisions=1, box=None):
        v = _as_vertices(vertices)
        if len(v) < 2:
            raise ContractError("a path needs at least two vertices")
        if np.any(np.linalg.norm(np.diff(v, axis=0), axis=1) <= _VERTEX_TOL):
            raise ContractError("consecutive path vertices must be distinct")
        if box is not None and not box.contains(v):
            raise ContractError("path leaves the box")
        self.vertices = v
        self.order = int(order)
        self.subdivisions = int(subdivisions)

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    def reversed(self):
        return Path3(self.vertices[::-1], self.order, self.subdivisions)

    def split(self, k):
        """Two paths meeting at vertex ``k``."""
        return (Path3(self.vertices[:k + 1], self.order, self.subdivisions),
                Path3(self.vertices[k:], self.order, self.subdivisions))

    def to_dict(self):
        return {"kind": "path", "vertices": self.vertices.tolist(), "order": self.order,
                "subdivisions": self.subdivisions}


def _segments_distance(p0, p1, q0, q1):
    """Minimum distance between two 3-D segments."""
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c, b = d1 @ r, d1 @ d2
    den = a * e - b * b
    s = np.clip((b * f - c * e) / den, 0.0, 1.0) if den > 1e-14 * a * e else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p0 + s * d1 - (q0 + t * d2)))


class Cycle1:
    """Closed polyline (first vertex repeated at the end)."""

    def __init__(self, vertices, orientation=1):
        v = _as_vertices(vertices)
        if len(v) < 4:
            raise ContractError("a cycle needs at least three distinct vertices")
        if np.linalg.norm(v[0] - v[-1]) > _VERTEX_TOL:
            raise ContractError("cycle is not closed")
        if orientation not in (1, -1):
            raise ContractError("orientation must be +1 or -1")
        self.vertices = v if orientation == 1 else v[::-1].copy()
        self.orientation = 1
        self._check_simple()

    def _check_simple(self):
        v = self.vertices
        m = len(v) - 1
        for i in range(m):
            for j in range(i + 2, m):
                if i == 0 and j == m - 1:
                    continue
                if _segments_distance(v[i], v[i + 1], v[j], v[j + 1]) <= _VERTEX_TOL:
                    raise ContractError(f"cycle self-intersects (segments {i} and {j})")

    def edges(self):
        return [(self.vertices[i], self.vertices[i + 1]) for i in range(len(self.vertices) - 1)]

    def reversed(self):
        return Cycle1(self.vertices[::-1])

    def as_path(self, order=8, subdivisions=1):
        return Path3(self.vertices, order, subdivisions)

    def to_dict(self):
        return {"kind": "cycle", "vertices": self.vertices.tolist(), "orientation": self.orientation}


class Surface2:
    """Oriented triangulated surface; triangle ``(i, j, k)`` has normal ``(v_j−v_i)×(v_k−v_i)``."""

    def __init__(self, vertices, triangles):
        self.vertices = _as_vertices(vertices)
        tri = np.asarray(triangles, dtype=int).reshape(-1, 3)
        if tri.size and (tri.min() < 0 or tri.max() >= len(self.vertices)):
            raise ContractError("triangle index out of range")
        self.triangles = tri
        seen = set()
        for a, b, c in tri:
            for e in ((a, b), (b, c), (c, a)):
                if e in seen:
                    raise ContractError("inconsistent triangle orientation (repeated directed edge)")
                seen.add(e)

    def reversed(self):
        return Surface2(self.vertices, self.triangles[:, [0, 2, 1]])

    def area(self):
        v = self.vertices[self.triangles]
        return float(0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1).sum())

    def boundary_edges(self):
        """Directed boundary edges as coordinate pairs."""
        directed = set()
        for a, b, c in self.triangles:
            directed.update(((a, b), (b, c), (c, a)))
        out = [(i, j) for i, j in directed if (j, i) not in directed]
        out.sort()
        return [(self.vertices[i], self.vertices[j]) for i, j in out]

    def to_dict(self):
        return {"kind": "surface", "vertices": self.vertices.tolist(),
                "triangles": self.triangles.tolist()}


def _edge_key(p, q, tol=_VERTEX_TOL):
    r = lambda v: tuple(np.round(np.asarray(v) / (10 * tol)).astype(np.int64))
    return r(p), r(q)


def _cancel(counts):
    """Drop pairs of opposite edges (coincident pieces of σ and σ₀ or degenerate strips)."""
    for (a, b) in list(counts):
        n = min(counts.get((a, b), 0), counts.get((b, a), 0))
        if n and a != b:
            counts[(a, b)] -= n
            counts[(b, a)] -= n
    return {k: v for k, v in counts.items() if v and k[0] != k[1]}


def _edge_counts(edges, flip=False, tol=_VERTEX_TOL):
    out = {}
    for p, q in edges:
        k = _edge_key(q, p, tol) if flip else _edge_key(p, q, tol)
        out[k] = out.get(k, 0) + 1
    return out


def boundary_matches(surf, sigma, sigma0=None, tol=_VERTEX_TOL):
    """Whether the oriented edges of ``∂surf`` equal those of ``σ − σ₀``."""
    want = _edge_counts(sigma.edges() if sigma is not None else [], tol=tol)
    for k, v in _edge_counts(sigma0.edges() if sigma0 is not None else [], True, tol).items():
        want[k] = want.get(k, 0) + v
    have = _edge_counts(surf.boundary_edges(), tol=tol)
    return _cancel(have) == _cancel(want)


# ----------------------------------------------------------------------------
# Quadrature
# ----------------------------------------------------------------------------


def _dunavant6():
    w = [0.116786275726379, 0.050844906370207, 0.082851075618374]
    pts, wts = [], []
    a, b = 0.501426509658179, 0.249286745170910
    for p in ((a, b, b), (b, a, b), (b, b, a)):
        pts.append(p), wts.append(w[0])
    a, b = 0.873821971016996, 0.063089014491502
    for p in ((a, b, b), (b, a, b), (b, b, a)):
        pts.append(p), wts.append(w[1])
    a, b, c = 0.053145049844817, 0.310352451033784, 0.636502499121399
    for p in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
        pts.append(p), wts.append(w[2])
    return np.array(pts), np.array(wts)


DUNAVANT6 = _dunavant6()


def _sum_form_values(values, weights):
    return np.tensordot(weights, np.asarray(values), axes=(0, 0))


def _finish(total):
    total = np.asarray(total)
    if total.shape in ((), (1, 1)):
        return complex(total.reshape(()))
    return total


def line_integral(form, path, q=None):
    """``∫ W dx + ZL dy + ZM dt`` along ``path``, Gauss-Legendre per segment."""
    q = path.order if q is None else int(q)
    nodes, weights = np.polynomial.legendre.leggauss(q)
    s = 0.5 * (nodes + 1.0)
    v = path.vertices
    sub = max(1, path.subdivisions)
    starts, deltas = [], []
    for a, b in zip(v[:-1], v[1:]):
        for k in range(sub):
            starts.append(a + (b - a) * k / sub)
            deltas.append((b - a) / sub)
    starts = np.array(starts)
    deltas = np.array(deltas)
    pts = starts[:, None, :] + s[None, :, None] * deltas[:, None, :]
    pts = pts.reshape(-1, 3)
    f = form(pts[:, 0], pts[:, 1], pts[:, 2])
    comps = [np.asarray(c) for c in (f.W, f.ZL, f.ZM)]
    d = np.repeat(deltas, q, axis=0)
    w = np.tile(0.5 * weights, len(deltas))
    total = 0.0
    for axis, c in enumerate(comps):
        coef = w * d[:, axis]
        total = total + _sum_form_values(c, coef)
    return _finish(total)


def surface_integral(form, surf, refine=1):
    """Pull-back integral of ``W dx∧dy + ZX dy∧dt + ZY dt∧dx`` over ``surf``."""
    if refine > 1:
        surf = _refine(surf, refine)
    if len(surf.triangles) == 0:
        return 0j
    bary, w = DUNAVANT6
    v = surf.vertices[surf.triangles]  # (T, 3, 3)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    normal = 0.5 * np.cross(e1, e2)  # area vector
    pts = np.einsum("qa,tad->tqd", bary, v).reshape(-1, 3)
    f = form(pts[:, 0], pts[:, 1], pts[:, 2])
    nrm = np.repeat(normal, len(w), axis=0)
    ww = np.tile(w, len(v))
    total = 0.0
    # (ZX, ZY, W) pair with the x-, y-, t-components of the normal
    for axis, c in zip((0, 1, 2), (f.ZX, f.ZY, f.W)):
        total = total + _sum_form_values(np.asarray(c), ww * nrm[:, axis])
    return _finish(total)


def _refine(surf, m):
    """Split every triangle into ``m²`` similar triangles (shared vertices not merged)."""
    verts, tris = [], []
    for a, b, c in surf.vertices[surf.triangles]:
        idx = {}
        for i in range(m + 1):
            for j in range(m + 1 - i):
                idx[i, j] = len(verts)
                verts.append(a + (b - a) * i / m + (c - a) * j / m)
        for i in range(m):
            for j in range(m - i):
                tris.append((idx[i, j], idx[i + 1, j], idx[i, j + 1]))
                if i + j < m - 1:
                    tris.append((idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]))
    surf2 = Surface2.__new__(Surface2)
    surf2.vertices = np.array(verts)
    surf2.triangles = np.array(tris, dtype=int).reshape(-1, 3)
    return surf2


def path_independence_check(form, path_a, path_b):
    if (np.linalg.norm(path_a.start - path_b.start) > _VERTEX_TOL
            or np.linalg.norm(path_a.end - path_b.end) > _VERTEX_TOL):
        raise ContractError("paths do not share endpoints")
    return float(np.abs(np.asarray(line_integral(form, path_a))
                        - np.asarray(line_integral(form, path_b))).max())


def surface_independence_check(form, surf_a, surf_b, sigma=None, sigma0=None):
    """``|∫_A Z − ∫_B Z|`` for two surfaces with the same boundary.

    When ``sigma`` is given both boundaries are checked against ``σ − σ₀``;
    otherwise they are compared with each other.
    """
    if sigma is not None or sigma0 is not None:
        ok = boundary_matches(surf_a, sigma, sigma0) and boundary_matches(surf_b, sigma, sigma0)
    else:
        ok = _cancel(_edge_counts(surf_a.boundary_edges())) == \
            _cancel(_edge_counts(surf_b.boundary_edges()))
    if not ok:
        raise ContractError("surfaces do not share the same boundary")
    return float(np.abs(np.asarray(surface_integral(form, surf_a))
                        - np.asarray(surface_integral(form, surf_b))).max())


# ----------------------------------------------------------------------------
# Constructors
# ----------------------------------------------------------------------------


def canonical_path(p0, p, order=8, subdivisions=1):
    """Axis-aligned legs from ``p0`` to ``p``: t first, then y, then x.

    Returns ``None`` when ``p == p0``.
    """
    p0 = np.asarray(p0, dtype=float)
    p = np.asarray(p, dtype=float)
    verts = [p0]
    for axis in (2, 1, 0):
        nxt = verts[-1].copy()
        nxt[axis] = p[axis]
        if np.linalg.norm(nxt - verts[-1]) > _VERTEX_TOL:
            verts.append(nxt)
    if len(verts) == 1:
        return None
    return Path3(np.array(verts), order, subdivisions)


def straight_path(p0, p, order=8, subdivisions=1):
    return Path3(np.array([p0, p], dtype=float), order, subdivisions)


def staircase_path(p0, p, steps=3, order=8, subdivisions=1):
    """Axis-aligned staircase with ``steps`` x/y/t increments."""
    p0 = np.asarray(p0, dtype=float)
    d = (np.asarray(p, dtype=float) - p0) / steps
    verts = [p0]
    for _ in range(steps):
        for axis in range(3):
            if abs(d[axis]) > _VERTEX_TOL:
                nxt = verts[-1].copy()
                nxt[axis] += d[axis]
                verts.append(nxt)
    return Path3(np.array(verts), order, subdivisions)


def _grid_triangles(n1, n2, offset=0):
    tris = []
    idx = lambda i, j: offset + i * (n2 + 1) + j
    for i in range(n1):
        for j in range(n2):
            tris.append((idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)))
            tris.append((idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)))
    return tris


def rectangle_cycle(corner, e1, e2, n1=1, n2=1):
    """Boundary loop of the parallelogram ``corner + u e1 + v e2``, counter-clockwise in (u, v)."""
    c, e1, e2 = (np.asarray(a, dtype=float) for a in (corner, e1, e2))
    pts = [c + e1 * i / n1 for i in range(n1)]
    pts += [c + e1 + e2 * j / n2 for j in range(n2)]
    pts += [c + e1 * (1 - i / n1) + e2 for i in range(n1)]
    pts += [c + e2 * (1 - j / n2) for j in range(n2)]
    pts.append(c)
    return Cycle1(np.array(pts))


def tent_surface(corner, e1, e2, lift, n1=8, n2=8, profile="pyramid"):
    """Grid surface over a parallelogram with interior vertices displaced by ``lift``.

    ``profile='pyramid'`` lifts by ``2·min(u, 1−u, v, 1−v)``, ``'bump'`` by
    ``16 u(1−u) v(1−v)`` and ``'flat'`` not at all. The boundary is always
    :func:`rectangle_cycle` with the same subdivision.
    """
    c, e1, e2, lift = (np.asarray(a, dtype=float) for a in (corner, e1, e2, lift))
    verts = []
    for i in range(n1 + 1):
        for j in range(n2 + 1):
            u, v = i / n1, j / n2
            if profile == "pyramid":
                h = 2.0 * min(u, 1 - u, v, 1 - v)
            elif profile == "bump":
                h = 16.0 * u * (1 - u) * v * (1 - v)
            elif profile == "flat":
                h = 0.0
            else:
                raise ContractError(f"unknown tent profile {profile!r}")
            verts.append(c + u * e1 + v * e2 + h * lift)
    return Surface2(np.array(verts), _grid_triangles(n1, n2))


def rectangle_surface(corner, e1, e2, n1=8, n2=8):
    return tent_surface(corner, e1, e2, np.zeros(3), n1, n2, profile="flat")


def cylinder_surface(sigma0, shift, layers=4):
    """Lateral surface swept by translating ``σ₀`` by ``shift``; boundary is ``σ − σ₀``.

    ``σ`` is the translated cycle, so ``∂S = σ − σ₀`` when the triangles are
    oriented with the sweep direction second.
    """
    base = sigma0.vertices[:-1]
    m = len(base)
    shift = np.asarray(shift, dtype=float)
    verts = [base + shift * k / layers for k in range(layers + 1)]
    verts = np.concatenate(verts)
    tris = []
    for k in range(layers):
        for i in range(m):
            a = k * m + i
            b = k * m + (i + 1) % m
            tris.append((a, b, b + m))
            tris.append((a, b + m, a + m))
    surf = Surface2(verts, tris)
    sigma = Cycle1(np.concatenate([base + shift, base[:1] + shift]))
    # orient so that the boundary equals σ − σ₀
    if not boundary_matches(surf, sigma, sigma0):
        surf = surf.reversed()
    return surf, sigma


def to_json(obj):
    return json.dumps(obj.to_dict(), sort_keys=True)


def from_json(text):
    d = json.loads(text) if isinstance(text, str) else text
    kind = d.get("kind")
    if kind == "path":
        return Path3(d["vertices"], d.get("order", 8), d.get("subdivisions", 1))
    if kind == "cycle":
        return Cycle1(d["vertices"], d.get("orientation", 1))
    if kind == "surface":
        return Surface2(d["vertices"], d["triangles"])
    raise ContractError(f"unknown geometry kind {kind!r}")
