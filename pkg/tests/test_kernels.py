import importlib
import math

import numpy as np
import pytest

from specbound import _kernels_py, kernels
from specbound.quadrature import icosphere


def _lengths(v, f):
    return np.stack([np.linalg.norm(v[f[:, (j + 1) % 3]] - v[f[:, (j + 2) % 3]], axis=1)
                     for j in range(3)], axis=1)


def test_heron_values():
    a = _kernels_py.triangle_areas(np.array([[3.0, 4.0, 5.0], [1.0, 1.0, 1.0], [1.0, 2.0, 3.0]]))
    assert a[0] == 6.0
    assert a[1] == pytest.approx(math.sqrt(3) / 4, rel=1e-15)
    assert a[2] == -1.0


def test_needle_triangle_stable():
    # Kahan's ordering keeps relative accuracy where the naive formula cancels
    a = _kernels_py.triangle_areas(np.array([[1.0, 1.0, 1e-9]]))[0]
    assert a == pytest.approx(0.5e-9, rel=1e-6)


def test_equilateral_cotangent():
    f = np.array([[0, 1, 2]])
    rows, cols, vals, mass, area = _kernels_py.cotan_assemble(f, np.ones((1, 3)))
    off = vals[(rows != cols)]
    assert np.allclose(-off, 0.5 / math.sqrt(3), rtol=1e-15)
    assert np.allclose(mass, area[0] / 3)


def test_row_sums_zero():
    v, f = icosphere(2)
    rows, cols, vals, mass, _ = _kernels_py.cotan_assemble(f, _lengths(v, f))
    s = np.zeros(len(v))
    np.add.at(s, rows, vals)
    assert np.max(np.abs(s)) < 1e-13
    assert math.fsum(mass) < 4 * math.pi


def test_degenerate_rejected():
    with pytest.raises(ValueError):
        _kernels_py.cotan_assemble(np.array([[0, 1, 2]]), np.array([[1.0, 2.0, 3.0]]))


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_backends_agree():
    from specbound._ext import _kernels as ext
    v, f = icosphere(3)
    L = _lengths(v, f) * (1 + 0.1 * np.sin(np.arange(len(f))))[:, None]
    L = np.ascontiguousarray(L)
    a_py = _kernels_py.triangle_areas(L)
    a_cy = np.asarray(ext.triangle_areas(L))
    assert np.allclose(a_py, a_cy, rtol=1e-14, atol=0)
    out_py = _kernels_py.cotan_assemble(f, L)
    out_cy = ext.cotan_assemble(np.asarray(f), L)
    for x, y in zip(out_py, out_cy):
        assert np.allclose(np.asarray(x), np.asarray(y), rtol=1e-13, atol=1e-15)


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("SPECBOUND_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.triangle_areas is _kernels_py.triangle_areas
    finally:
        monkeypatch.delenv("SPECBOUND_PURE_PYTHON")
        importlib.reload(kernels)
