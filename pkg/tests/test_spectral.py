import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from polykin.spectral import Harmonics, SphereGrid, funk_hecke_sine


def test_grid_weights_sum_to_sphere_area():
    assert abs(SphereGrid(16, 32).weights.sum() - 4 * np.pi) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_forward_backward_round_trip(seed):
    h = Harmonics(8)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=h.ls.size) + 0j
    # real field: enforce the conjugate symmetry by projecting real values
    vals = h.backward(c).real
    c2 = h.forward(vals)
    np.testing.assert_allclose(h.backward(c2).real, vals, atol=1e-10)


def test_laplacian_eigenvalues():
    h = Harmonics(6)
    np.testing.assert_allclose(h.laplacian, -h.ls * (h.ls + 1))


def test_rotgrad_of_linear_function():
    h = Harmonics(4)
    a = np.array([0.5, -1.0, 2.0])
    c = h.forward(h.grid.points @ a)
    g = np.stack([h.backward(x).real for x in h.rotgrad(c)], -1)
    np.testing.assert_allclose(g, np.cross(h.grid.points, a), atol=1e-12)


def test_funk_hecke_sine_leading_values():
    lam = funk_hecke_sine(4)
    # int |n x n'| dn' = pi^2 over the sphere
    assert abs(lam[0] - np.pi**2) < 1e-10
    assert abs(lam[2] + np.pi**2 / 8) < 1e-10
    assert np.allclose(lam[1::2], 0)
