import numpy as np
import pytest

from sbmech import mesh
from sbmech.exceptions import ConfigurationError
from sbmech.mesh import Dirichlet, Grid, Neumann


def test_grid_spacing_and_shapes():
    g = Grid((0.0, -1.0), (2.0, 1.0), (4, 8))
    assert np.allclose(g.dx, [0.5, 0.25])
    assert g.node_shape == (5, 9)
    assert g.cell_shape == (4, 8)
    assert g.cell_volume == pytest.approx(0.125)
    xc, yc = g.cell_centers()
    assert xc[0, 0] == pytest.approx(0.25)
    assert yc[0, 0] == pytest.approx(-0.875)


@pytest.mark.parametrize(
    "lo,hi,n",
    [((0, 0), (1, 1), (1, 4)), ((0, 0), (0, 1), (4, 4)), ((0,), (1, 1), (4, 4))],
)
def test_grid_rejects_bad_input(lo, hi, n):
    with pytest.raises(ConfigurationError):
        Grid(lo, hi, n)


def test_coarsen_halves_cells():
    g = Grid((0, 0), (1, 1), (8, 4)).coarsen()
    assert g.ncells == (4, 2)


def test_fill_ghosts_dirichlet_is_linear_extrapolation():
    g = Grid((0.0,), (1.0,), (2,))
    arr = g.ghosted("node")
    arr[1:-1] = [5.0, 1.0, 2.0]
    mesh.fill_ghosts(arr, g, {"xlo": Dirichlet(0.0), "xhi": Neumann()})
    assert arr[1] == 0.0
    assert arr[0] == pytest.approx(-1.0)
    assert arr[-1] == pytest.approx(1.0)


def test_fill_ghosts_neumann_constant_and_cell_copy():
    g = Grid((0, 0), (1, 1), (3, 3))
    rules = {f: Neumann() for f in mesh.face_names(2)}
    arr = g.ghosted("node")
    arr[1:-1, 1:-1] = 4.0
    mesh.fill_ghosts(arr, g, rules)
    assert np.all(arr == 4.0)
    cells = g.ghosted("cell")
    cells[1:-1, 1:-1] = 0.7
    mesh.fill_ghosts(cells, g, rules, centering="cell")
    assert np.allclose(cells, 0.7)


def test_fill_ghosts_idempotent_and_missing_rule():
    g = Grid((0, 0), (1, 1), (4, 4))
    rng = np.random.default_rng(0)
    arr = g.ghosted("node")
    arr[1:-1, 1:-1] = rng.random(g.node_shape)
    rules = {"xlo": Dirichlet(1.0), "xhi": Neumann(), "ylo": Neumann(), "yhi": Dirichlet(-2.0)}
    once = mesh.fill_ghosts(arr.copy(), g, rules)
    twice = mesh.fill_ghosts(once.copy(), g, rules)
    assert np.array_equal(once, twice)
    with pytest.raises(ConfigurationError):
        mesh.fill_ghosts(arr, g, {"xlo": Neumann()})


def test_cell_to_node_examples():
    assert mesh.cell_to_node_avg(np.array([0.2, 0.6]))[1] == pytest.approx(0.4)
    cf = np.array([[0.0, 1.0], [0.0, 1.0]])
    assert mesh.cell_to_node_avg(cf)[1, 1] == pytest.approx(0.5)
    assert np.allclose(mesh.cell_to_node_avg(np.ones((3, 3))), 1.0)


def test_node_to_cell_examples():
    nf = np.array([[0.0, 2.0], [0.0, 2.0]])
    assert mesh.node_to_cell_avg(nf)[0, 0] == pytest.approx(1.0)
    assert mesh.node_to_cell_avg(np.array([3.0, 5.0]))[0] == pytest.approx(4.0)


def test_transfer_roundtrip_constant_exact_smooth_second_order():
    assert np.array_equal(mesh.node_to_cell_avg(mesh.cell_to_node_avg(np.full((6, 6), 2.5))), np.full((6, 6), 2.5))
    errs = []
    for n in (16, 32, 64):
        g = Grid((0, 0), (1, 1), (n, n))
        xc, yc = g.cell_centers()
        f = np.sin(np.pi * xc) * np.cos(np.pi * yc)
        back = mesh.node_to_cell_avg(mesh.cell_to_node_avg(f))
        errs.append(np.max(np.abs(back - f)[2:-2, 2:-2]))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_gradient_exact_for_affine_and_bilinear():
    g = Grid((0, 0), (1, 2), (4, 4))
    x, y = g.node_coords()
    G = mesh.grad_node_to_cell(3.0 * x - 2.0 * y + 1.0, g.dx)
    assert np.allclose(G[..., 0], 3.0, atol=1e-13) and np.allclose(G[..., 1], -2.0, atol=1e-13)
    G = mesh.grad_node_to_cell(x * y, g.dx)
    xc, yc = g.cell_centers()
    assert np.allclose(G[..., 0], yc) and np.allclose(G[..., 1], xc)
    assert np.allclose(mesh.grad_node_to_cell(np.full(g.node_shape, 7.0), g.dx), 0.0)


def test_divergence_is_negative_adjoint_of_gradient():
    g = Grid((0, 0), (1, 1), (5, 7))
    rng = np.random.default_rng(1)
    u = rng.standard_normal(g.node_shape)
    q = rng.standard_normal(g.cell_shape + (2,))
    lhs = np.sum(mesh.grad_node_to_cell(u, g.dx) * q) * g.cell_volume
    rhs = -np.sum(u * mesh.div_cell_to_node(q, g.dx)) * g.cell_volume
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_interior_l2_norm():
    g = Grid((0, 0), (1, 1), (4, 4))
    ones = np.ones(g.cell_shape)
    assert mesh.interior_l2_norm(np.zeros(g.node_shape), ones, 0.5, g) == 0.0
    assert mesh.interior_l2_norm(np.ones(g.node_shape), ones, 0.5, g, normalized=True) == pytest.approx(1.0)
    assert mesh.interior_l2_norm(np.ones(g.node_shape), ones, 0.5, g) == pytest.approx(np.sqrt(25 * g.cell_volume))
    with pytest.raises(ValueError):
        mesh.interior_l2_norm(np.ones(g.node_shape), np.zeros(g.cell_shape), 0.5, g)


def test_three_dimensional_gradient():
    g = Grid((0, 0, 0), (1, 1, 1), (3, 3, 3))
    x, y, z = g.node_coords()
    G = mesh.grad_node_to_cell(x + 2 * y + 3 * z, g.dx)
    assert np.allclose(G, [1.0, 2.0, 3.0])
