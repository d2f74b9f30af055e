import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _oracles import bfs_components, brute_nearest, random_mask

masks = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 1))


def test_nearest_site_matches_brute_force_random(backend, rng):
    for _ in range(60):
        h, w = rng.integers(1, 40, size=2)
        m = random_mask(rng, h, w, rng.uniform(0, 0.3))
        d2, r, c = backend.nearest_site(m)
        bd2, br, bc = brute_nearest(m)
        np.testing.assert_array_equal(d2, bd2)
        np.testing.assert_array_equal(r, br)
        np.testing.assert_array_equal(c, bc)


@settings(max_examples=150, deadline=None)
@given(masks)
def test_nearest_site_matches_brute_force_property(m):
    from stopline import _pykernels

    try:
        from stopline import _ckernels
        impls = (_pykernels, _ckernels)
    except ImportError:
        impls = (_pykernels,)
    bd2, br, bc = brute_nearest(m)
    for impl in impls:
        d2, r, c = impl.nearest_site(m)
        assert (d2 == bd2).all() and (r == br).all() and (c == bc).all()


def test_tie_goes_to_smaller_row_then_col(backend):
    m = np.zeros((1, 5), np.uint8)
    m[0, 0] = m[0, 4] = 1
    d2, r, c = backend.nearest_site(m)
    assert (d2[0, 2], r[0, 2], c[0, 2]) == (4, 0, 0)

    # (2,2) is equidistant from (0,2), (2,0), (2,4), (4,2)
    m = np.zeros((5, 5), np.uint8)
    for y, x in [(4, 2), (2, 4), (2, 0), (0, 2)]:
        m[y, x] = 1
    d2, r, c = backend.nearest_site(m)
    assert (d2[2, 2], r[2, 2], c[2, 2]) == (4, 0, 2)


def test_empty_and_full(backend):
    d2, r, c = backend.nearest_site(np.zeros((3, 4), np.uint8))
    assert (d2 == -1).all() and (r == -1).all() and (c == -1).all()
    d2, r, c = backend.nearest_site(np.ones((3, 4), np.uint8))
    rr, cc = np.mgrid[0:3, 0:4]
    assert (d2 == 0).all() and (r == rr).all() and (c == cc).all()


def test_non_contiguous_and_bool_input(backend):
    m = random_mask(np.random.default_rng(1), 20, 30, 0.1)
    expect = brute_nearest(m)
    got = backend.nearest_site(np.asfortranarray(m.astype(bool)))
    for a, b in zip(got, expect):
        np.testing.assert_array_equal(a, b)


def _canonical(labels, n):
    comps = {}
    for (r, c), v in np.ndenumerate(labels):
        if v:
            comps.setdefault(int(v), set()).add((r, c))
    assert sorted(comps) == list(range(1, n + 1))
    return [comps[k] for k in range(1, n + 1)]


def test_label8_matches_flood_fill(backend, rng):
    for _ in range(60):
        h, w = rng.integers(1, 48, size=2)
        m = random_mask(rng, h, w, rng.uniform(0, 0.6))
        labels, n = backend.label8(m)
        assert _canonical(labels, n) == bfs_components(m)


@settings(max_examples=150, deadline=None)
@given(masks)
def test_label8_property(m):
    from stopline import kernels

    labels, n = kernels.label8(m)
    assert _canonical(labels, n) == bfs_components(m)
    assert ((labels > 0) == (m > 0)).all()


def test_label8_diagonal_is_connected(backend):
    m = np.eye(6, dtype=np.uint8)
    labels, n = backend.label8(m)
    assert n == 1
    m = np.eye(6, dtype=np.uint8)[::-1].copy()
    assert backend.label8(m)[1] == 1


def test_label8_u_shape_merges(backend):
    # two arms that only join at the bottom row exercise union-find merging
    m = np.zeros((5, 5), np.uint8)
    m[:, 0] = m[:, 4] = 1
    m[4, :] = 1
    labels, n = backend.label8(m)
    assert n == 1 and labels[0, 0] == labels[0, 4] == 1


def test_backends_agree_bit_for_bit():
    pytest.importorskip("stopline._ckernels")
    from stopline import _ckernels, _pykernels

    m = random_mask(np.random.default_rng(7), 97, 131, 0.05)
    for a, b in zip(_ckernels.nearest_site(m), _pykernels.nearest_site(m)):
        assert a.dtype == b.dtype
        np.testing.assert_array_equal(a, b)
    la, na = _ckernels.label8(m)
    lb, nb = _pykernels.label8(m)
    assert na == nb and (la == lb).all()


def test_pure_python_env_forces_fallback():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "from stopline import kernels; print(kernels.BACKEND)"],
        env={"STOPLINE_PURE_PYTHON": "1", "PATH": ""},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"
