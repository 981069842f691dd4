import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delsarte.errors import ContractError
from delsarte.io import Grid, csv_to_grid, grid_to_csv, read_grid, write_grid


def random_grid(rng, dims, comps):
    axes = [(n, rng.uniform(-5, 0), rng.uniform(0.1, 5)) for n in dims]
    shape = (comps,) + tuple(reversed(dims))
    data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return Grid(axes, data)


def test_binary_header_layout(tmp_path):
    g = Grid([(3, 0.0, 1.0), (2, -1.0, 1.0)], np.arange(6).reshape(1, 2, 3) * (1 + 1j))
    write_grid(tmp_path / "g.ddxg", g)
    raw = (tmp_path / "g.ddxg").read_bytes()
    assert raw[:4] == b"DDXG"
    assert struct.unpack_from("<III", raw, 4) == (1, 2, 1)
    assert struct.unpack_from("<Qdd", raw, 16) == (3, 0.0, 1.0)
    # payload: x fastest, pairs of (re, im)
    vals = np.frombuffer(raw, dtype="<f8", offset=16 + 2 * 24)
    assert vals[:6].tolist() == [0.0, 0.0, 1.0, 1.0, 2.0, 2.0]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.lists(st.integers(1, 4), min_size=1, max_size=3),
       st.integers(1, 3))
def test_binary_round_trip_is_exact(tmp_path_factory, s, dims, comps):
    g = random_grid(np.random.default_rng(s), dims, comps)
    p = tmp_path_factory.mktemp("g") / "g.ddxg"
    write_grid(p, g)
    assert read_grid(p) == g


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.lists(st.integers(1, 4), min_size=1, max_size=3),
       st.integers(1, 3))
def test_binary_csv_binary_round_trip(tmp_path_factory, s, dims, comps):
    g = random_grid(np.random.default_rng(s), dims, comps)
    d = tmp_path_factory.mktemp("c")
    grid_to_csv(d / "g.csv", g)
    back = csv_to_grid(d / "g.csv", g.axes)
    assert back == g
    write_grid(d / "a.ddxg", g)
    write_grid(d / "b.ddxg", back)
    assert (d / "a.ddxg").read_bytes() == (d / "b.ddxg").read_bytes()


def test_csv_axes_inferred(tmp_path):
    g = random_grid(np.random.default_rng(1), (4, 3), 2)
    grid_to_csv(tmp_path / "g.csv", g)
    assert csv_to_grid(tmp_path / "g.csv") == g


def test_empty_grid_gives_header_only_csv(tmp_path):
    g = Grid([(0, 0.0, 1.0)], np.zeros((1, 0)))
    grid_to_csv(tmp_path / "e.csv", g)
    assert (tmp_path / "e.csv").read_text() == "x,y,t,component,re,im\n"


def test_mismatched_dimensions_rejected(tmp_path):
    g = random_grid(np.random.default_rng(2), (4, 3), 1)
    grid_to_csv(tmp_path / "g.csv", g)
    with pytest.raises(ContractError):
        csv_to_grid(tmp_path / "g.csv", [(5, 0.0, 1.0)])
    with pytest.raises(ContractError):
        csv_to_grid(tmp_path / "g.csv", [(3, 0.0, 1.0), (4, 0.0, 1.0)])
    with pytest.raises(ContractError):
        Grid([(3, 0, 1)], np.zeros((1, 4)))


def test_corrupt_files_rejected(tmp_path):
    (tmp_path / "bad.ddxg").write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ContractError):
        read_grid(tmp_path / "bad.ddxg")
    g = random_grid(np.random.default_rng(3), (3,), 1)
    write_grid(tmp_path / "g.ddxg", g)
    raw = (tmp_path / "g.ddxg").read_bytes()
    (tmp_path / "short.ddxg").write_bytes(raw[:-8])
    with pytest.raises(ContractError):
        read_grid(tmp_path / "short.ddxg")
