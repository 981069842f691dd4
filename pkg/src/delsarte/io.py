"""Binary grid and CSV persistence.

Binary grid layout (all little-endian)::

    b"DDXG"                      magic
    uint32  version (= 1)
    uint32  axis count A
    uint32  component count C
    A × (uint64 count, float64 min, float64 max)
    payload: count_0 · … · count_{A-1} · C pairs of float64 (re, im)

The payload is ordered with axis 0 fastest, then axis 1, …, and the component
index slowest. In memory a grid is an array of shape
``(C, count_{A-1}, …, count_0)``.

CSV layout: header ``x,y,t,component,re,im``, one row per sample per
component, values written with 17 significant digits.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ContractError

__all__ = ["Grid", "write_grid", "read_grid", "grid_to_csv", "csv_to_grid"]

MAGIC = b"DDXG"
VERSION = 1
_AXIS_NAMES = ("x", "y", "t")


class Grid:
    """Axes ``[(count, min, max), ...]`` (x first) and data ``(C, …, count_0)``."""

    def __init__(self, axes, data):
        self.axes = [(int(n), float(lo), float(hi)) for n, lo, hi in axes]
        data = np.asarray(data, dtype=complex)
        want = tuple(n for n, _, _ in reversed(self.axes))
        if data.ndim == len(want):
            data = data[None]
        if data.shape[1:] != want:
            raise ContractError(f"grid data shape {data.shape} does not match axes {want}")
        self.data = data

    @property
    def components(self):
        return self.data.shape[0]

    def coords(self):
        return [np.linspace(lo, hi, n) if n > 1 else np.full(n, lo) for n, lo, hi in self.axes]

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.axes == other.axes
                and self.data.shape == other.data.shape
                and np.array_equal(self.data.view(float), other.data.view(float)))


def write_grid(path, grid):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, len(grid.axes), grid.components))
        for n, lo, hi in grid.axes:
            fh.write(struct.pack("<Qdd", n, lo, hi))
        payload = np.ascontiguousarray(grid.data).astype("<c16")
        fh.write(payload.tobytes())


def read_grid(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ContractError(f"{path}: not a DDXG grid file")
    version, naxes, ncomp = struct.unpack_from("<III", raw, 4)
    if version != VERSION:
        raise ContractError(f"{path}: unsupported grid version {version}")
    off = 16
    axes = []
    for _ in range(naxes):
        axes.append(struct.unpack_from("<Qdd", raw, off))
        off += 24
    shape = (ncomp,) + tuple(int(n) for n, _, _ in reversed(axes))
    count = int(np.prod(shape))
    if len(raw) - off != 16 * count:
        raise ContractError(f"{path}: payload size does not match header")
    data = np.frombuffer(raw, dtype="<c16", count=count, offset=off).reshape(shape)
    return Grid(axes, data.astype(complex))


def grid_to_csv(path, grid):
    if len(grid.axes) > 3:
        raise ContractError("CSV export supports at most three axes")
    coords = grid.coords() + [np.zeros(1)] * (3 - len(grid.axes))
    with open(path, "w", newline="") as fh:
        fh.write("x,y,t,component,re,im\n")
        if grid.data.size == 0:
            return
        # rows in payload order: x fastest, component slowest
        T, Y, X = np.meshgrid(coords[2], coords[1], coords[0], indexing="ij")
        xs, ys, ts = X.ravel(), Y.ravel(), T.ravel()
        for c in range(grid.components):
            vals = grid.data[c].reshape(-1)
            block = np.column_stack([xs, ys, ts, np.full(xs.size, c), vals.real, vals.imag])
            np.savetxt(fh, block, fmt=["%.17g"] * 3 + ["%d"] + ["%.17g"] * 2, delimiter=",")


def _infer_axes(rows):
    axes = []
    for col in range(3):
        vals = np.unique(rows[:, col])
        axes.append((vals.size, vals[0], vals[-1]))
    # drop padding axes (single zero coordinate) from the end
    while len(axes) > 1 and axes[-1] == (1, 0.0, 0.0):
        axes.pop()
    return axes


def csv_to_grid(path, axes=None):
    """Rebuild a grid from CSV; ``axes`` defaults to those implied by the coordinates."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if axes is None:
        if rows.size == 0:
            raise ContractError("cannot infer axes from an empty CSV; pass them explicitly")
        axes = _infer_axes(rows)
    shape = tuple(int(n) for n, _, _ in reversed(axes))
    per = int(np.prod(shape)) if shape else 1
    if rows.size == 0:
        return Grid(axes, np.zeros((0,) + shape, dtype=complex))
    comps = int(rows[:, 3].max()) + 1
    if rows.shape[0] != comps * per:
        raise ContractError("CSV row count does not match the grid dimensions")
    grid = Grid(axes, np.zeros((comps,) + shape, dtype=complex))
    coords = grid.coords() + [np.zeros(1)] * (3 - len(grid.axes))
    T, Y, X = np.meshgrid(coords[2], coords[1], coords[0], indexing="ij")
    expect = np.column_stack([X.ravel(), Y.ravel(), T.ravel()])
    got = rows[:, :3].reshape(comps, per, 3)
    if not np.allclose(got, expect[None], rtol=1e-12, atol=1e-12):
        raise ContractError("CSV coordinates do not match the grid axes")
    if not np.array_equal(rows[:, 3].reshape(comps, per), np.repeat(np.arange(comps), per).reshape(comps, per)):
        raise ContractError("CSV component column is out of order")
    vals = rows[:, 4] + 1j * rows[:, 5]
    return Grid(axes, vals.reshape((comps,) + shape))
