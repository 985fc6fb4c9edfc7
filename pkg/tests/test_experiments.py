import numpy as np
import pytest

from sbmech.experiments import (
    cyclic_path,
    hysteresis_metrics,
    plate_hole_solve,
    run_jacobi_instability_demo,
    run_void_plasticity,
)
from sbmech.mesh import Grid


def test_jacobi_demo_node_variant_blows_up_cell_variant_bounded():
    r = run_jacobi_instability_demo(cell_sweeps=2000)
    assert r.node_diverged and 1 <= r.first_bad_sweep <= 100
    assert r.cell_bounded
    cell = r.log.column("max_u_cell")[:2000]
    assert np.all(np.isfinite(cell)) and cell.max() <= 10 * r.static_max


def test_jacobi_demo_uniform_phi_variants_agree():
    r = run_jacobi_instability_demo(node_sweeps=200, cell_sweeps=200, phi="uniform")
    a = r.log.column("max_u_node")
    b = r.log.column("max_u_cell")
    assert not r.node_diverged
    # the two placements give the same iterates when nothing is cut away
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_cyclic_path_shape():
    p = cyclic_path(0.004, 0.1)
    assert len(p) == 100
    assert p[24] == pytest.approx(0.1) and p[74] == pytest.approx(-0.1) and p[-1] == 0.0
    assert np.allclose(np.abs(np.diff(p)), 0.004)


def test_hysteresis_metrics_on_synthetic_loop():
    from sbmech.io import RunLog

    log = RunLog(["displacement", "traction", "dissipation"])
    for d, t in [(0.0, 0.0), (1.0, 1.0), (0.0, -0.2), (-1.0, -1.0), (0.0, 0.2)]:
        log.append(displacement=d, traction=t, dissipation=0.0)
    m = hysteresis_metrics(log)
    assert m["peak"] == 1.0 and m["t_cross"] == -0.2 and m["closure_gap"] == pytest.approx(0.0)


def test_plate_hole_kirsch_solution_is_accurate_away_from_hole():
    from sbmech.oracles import kirsch_stress

    g = Grid((-4, -4), (4, 4), (64, 64))
    u, op, phi, rep, s = plate_hole_solve(g, 0.25, load="kirsch")
    assert rep.converged and s == 1.0
    sig = op.cell_stress(u)
    xc, yc = g.cell_centers()
    far = np.hypot(xc, yc) > 2.0
    sxx, syy, sxy = kirsch_stress(xc[far], yc[far])
    assert np.max(np.abs(sig[far][:, 0, 0] - sxx)) < 0.05
    assert np.max(np.abs(sig[far][:, 1, 1] - syy)) < 0.05
    with pytest.raises(ValueError):
        plate_hole_solve(g, 0.25, load="magnets")


def test_elastic_limit_retraces_loading_path():
    # huge yield stress: no plastic flow, unloading returns along the loading line
    path = cyclic_path(0.01, 0.02)
    r = run_void_plasticity((2.0, 0.5), ncells=8, sigma_y=1e6, path=path)
    t = r.log.column("traction")
    d = r.log.column("displacement")
    k = t[0] / d[0]
    assert np.allclose(t, k * d, rtol=1e-6, atol=1e-12)
    assert np.all(r.log.column("dissipation") == 0)
