import json

import numpy as np
import pytest

import flexicubes as fc


def sphere_sdf(res, r=0.5):
    n = res + 1
    axis = np.linspace(-1.0, 1.0, n)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    # lattice layout is x-fastest: transpose to (z, y, x) then flatten
    d = np.sqrt(x**2 + y**2 + z**2) - r
    return np.ascontiguousarray(d.transpose(2, 1, 0)).ravel()


def test_sphere_extraction_topology():
    res = 16
    verts, tris = fc.extract_surface(res, sphere_sdf(res))
    assert len(verts) > 0 and len(tris) > 0
    topo = fc.check_topology(verts, tris)
    assert topo["euler_characteristic"] == 2
    assert topo["boundary_edges"] == 0
    assert topo["non_manifold_edges"] == 0
    assert topo["non_manifold_vertices"] == 0
    # everything inside the domain
    assert np.abs(verts).max() <= 1.0


def test_training_split_adds_midpoints():
    res = 12
    v_final, t_final = fc.extract_surface(res, sphere_sdf(res))
    v_train, t_train = fc.extract_surface(res, sphere_sdf(res), training_split=True)
    assert len(t_train) == 2 * len(t_final)  # 4 tris/quad vs 2
    assert len(v_train) > len(v_final)


def test_mc_baseline_agrees_on_topology():
    res = 16
    verts, tris = fc.extract_mc(res, sphere_sdf(res))
    topo = fc.check_topology(verts, tris)
    assert topo["euler_characteristic"] == 2
    assert topo["boundary_edges"] == 0


def test_empty_field_gives_empty_mesh():
    res = 8
    verts, tris = fc.extract_surface(res, np.ones((res + 1) ** 3))
    assert len(verts) == 0 and len(tris) == 0


def test_weights_move_vertices():
    res = 8
    base, _ = fc.extract_surface(res, sphere_sdf(res))
    ncells = res**3
    alpha = np.full(8 * ncells, 0.7)
    moved, _ = fc.extract_surface(res, sphere_sdf(res), alpha=alpha)
    assert base.shape == moved.shape
    assert not np.allclose(base, moved)


def test_tets_fill_the_sphere():
    res = 12
    verts, tets = fc.extract_tets(res, sphere_sdf(res))
    assert len(tets) > 0
    a, b, c, d = (verts[tets[:, k]] for k in range(4))
    vol = np.einsum("ij,ij->i", b - a, np.cross(c - a, d - a)) / 6.0
    assert (vol > 0).all()
    assert abs(vol.sum() - 4 / 3 * np.pi * 0.5**3) < 0.05 * 4 / 3 * np.pi * 0.5**3


def test_fit_converges_and_is_deterministic():
    out1 = fc.fit("builtin:sphere", res=8, iters=12, seed=3)
    out2 = fc.fit("builtin:sphere", res=8, iters=12, seed=3)
    assert out1["loss_history"] == out2["loss_history"]
    assert out1["loss_history"][-1] < out1["loss_history"][0]
    verts, tris = out1["mesh"]
    assert len(tris) > 0


def test_gradcheck_tolerance():
    assert fc.gradcheck(res=5, seed=2) < 1e-4


def test_tables_dump():
    tables = json.loads(fc.dump_tables_json())
    assert tables["format"] == "flexicubes-dmc-tables"
    assert len(tables["cases"]) == 256
    assert tables["cases"][0]["loops"] == []
