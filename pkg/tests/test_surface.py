"""Mesh construction, validation, surgery and perturbation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from nodal_contact import (
    DiscreteSurface,
    GluedFamilySpec,
    build_flat_torus,
    build_genus_g,
    build_round_sphere,
    flatten_star,
    glue_family,
    perturb_metric,
    remove_disc,
    remove_vertex_star,
)
from nodal_contact.errors import (
    DiscRemovalError,
    GluingError,
    InvalidSurfaceError,
    PerturbationError,
)
from nodal_contact.surface import edge_key, triangle_area


# ---------------------------------------------------------------------------
# builders


def test_icosahedron_combinatorics():
    s = build_round_sphere(0)
    assert s.n_vertices == 12
    assert len(s.edge_lengths) == 30
    assert len(s.faces) == 20
    assert s.euler_characteristic == 2
    assert s.genus == 0
    assert not s.boundary_loops


@pytest.mark.parametrize("subdiv,verts", [(1, 42), (2, 162), (3, 642)])
def test_icosphere_vertex_counts(subdiv, verts):
    # 10 * 4^k + 2
    assert build_round_sphere(subdiv).n_vertices == verts


def test_sphere_total_area_converges_to_4pi():
    s = build_round_sphere(4)
    assert sum(s.face_areas) == pytest.approx(4.0 * math.pi, rel=2e-3)


def test_sphere_subdivision_guard():
    from nodal_contact.errors import SizeGuardError
    with pytest.raises(SizeGuardError):
        build_round_sphere(9)
    with pytest.raises(SizeGuardError):
        build_round_sphere(-1)


def test_flat_torus_combinatorics():
    t = build_flat_torus(8, 8)
    assert t.n_vertices == 64
    assert len(t.edge_lengths) == 192
    assert len(t.faces) == 128
    assert t.euler_characteristic == 0
    assert t.genus == 1


def test_flat_torus_is_flat():
    t = build_flat_torus(6, 9)
    for v, d in t.angle_defects().items():
        assert abs(d) < 1e-12


def test_flat_torus_size_guard():
    with pytest.raises(InvalidSurfaceError):
        build_flat_torus(2, 8)


def test_genus_builder_euler_characteristic():
    for g in (1, 2, 3):
        s = build_genus_g(g)
        assert s.genus == g
        assert s.euler_characteristic == 2 - 2 * g
        assert not s.boundary_loops
        assert s.marked_vertex in s.vertex_index


def test_genus_builder_guard():
    with pytest.raises(InvalidSurfaceError):
        build_genus_g(0)


# ---------------------------------------------------------------------------
# validation


def test_triangle_inequality_rejected():
    faces = [(0, 1, 2)]
    lengths = {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 3.0}
    with pytest.raises(InvalidSurfaceError):
        DiscreteSurface(faces, lengths)


def test_nonpositive_length_rejected():
    faces = [(0, 1, 2)]
    lengths = {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 0.0}
    with pytest.raises(InvalidSurfaceError):
        DiscreteSurface(faces, lengths)


def test_inconsistent_orientation_rejected():
    faces = [(0, 1, 2), (0, 1, 3)]  # edge (0,1) traversed twice forwards
    lengths = {e: 1.0 for e in [(0, 1), (1, 2), (0, 2), (1, 3), (0, 3)]}
    with pytest.raises(InvalidSurfaceError):
        DiscreteSurface(faces, lengths)


def test_disconnected_rejected():
    faces = [(0, 1, 2), (3, 4, 5)]
    lengths = {e: 1.0 for e in
               [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]}
    with pytest.raises(InvalidSurfaceError):
        DiscreteSurface(faces, lengths)


def test_missing_edge_length_rejected():
    faces = [(0, 1, 2)]
    lengths = {(0, 1): 1.0, (1, 2): 1.0}
    with pytest.raises(InvalidSurfaceError):
        DiscreteSurface(faces, lengths)


def test_triangle_area_heron():
    assert triangle_area(3.0, 4.0, 5.0) == pytest.approx(6.0)
    assert triangle_area(1.0, 1.0, 1.0) == pytest.approx(math.sqrt(3) / 4)


# ---------------------------------------------------------------------------
# geodesics


def test_geodesic_distances_flat_torus():
    t = build_flat_torus(8, 8)
    d = t.geodesic_distances([0])
    idx = t.vertex_index
    assert d[idx[0]] == 0.0
    # vertex one grid step away in x: ids are i*m + j
    assert d[idx[8]] == pytest.approx(1.0 / 8.0)
    # graph distance overestimates the straight diagonal but is bounded
    assert d.max() <= 1.0


# ---------------------------------------------------------------------------
# surgery


def test_remove_disc_creates_one_boundary_loop():
    s = build_round_sphere(3)
    cut = remove_disc(s, center=s.vertices[0], radius=0.4)
    assert len(cut.boundary_loops) == 1
    assert cut.genus == 0
    assert len(cut.faces) < len(s.faces)


def test_remove_disc_radius_guards():
    s = build_round_sphere(2)
    with pytest.raises(DiscRemovalError):
        remove_disc(s, center=s.vertices[0], radius=1e-6)  # no face inside
    with pytest.raises(DiscRemovalError):
        remove_disc(s, center=s.vertices[0], radius=100.0)  # swallows all
    with pytest.raises(DiscRemovalError):
        remove_disc(s, center=-1, radius=0.4)


def test_remove_vertex_star_is_a_disc():
    t = build_flat_torus(8, 8)
    cut = remove_vertex_star(t, 0)
    assert len(cut.boundary_loops) == 1
    assert len(cut.boundary_loops[0]) == 6
    assert len(cut.faces) == len(t.faces) - 6
    assert cut.genus == 1


def test_flatten_star_zeroes_angle_defect():
    s = build_round_sphere(2)
    vf = s.vertex_faces()
    center = next(v for v in s.vertices if len(vf[v]) == 6)
    flat = flatten_star(s, center, radius=0.1)
    assert abs(flat.angle_defects()[center]) < 1e-12
    # only star edges were touched
    star = {edge_key(center, u) for u in s.vertex_index
            if edge_key(center, u) in s.edge_lengths}
    for e, l in s.edge_lengths.items():
        if e not in star and not set(e) & {center}:
            ring = False
            if flat.edge_lengths[e] != l:
                ring = True  # ring edges around the center may change
            if ring:
                faces = [s.faces[t] for t in s.edge_faces()[e]]
                assert any(center in f for f in faces)


# ---------------------------------------------------------------------------
# gluing


def _one_holed_torus(n=12):
    t = build_flat_torus(n, n)
    t = flatten_star(t, 0, radius=1.0 / (2 * n))
    return remove_vertex_star(t, 0)


def test_glue_direct_reinsertion_at_epsilon_two():
    """Removing a flat star and gluing back its mirror at eps=2 must close
    the surface without touching the sphere-side metric."""
    part = _one_holed_torus()
    glued = glue_family(GluedFamilySpec(
        sphere_part=part, handle_part=part, epsilon=2.0))
    assert not glued.boundary_loops
    assert glued.genus == 2
    assert set(glued.face_groups) == {"sphere_part", "handle_part"}
    # sphere-part lengths unchanged
    for t_idx in glued.face_groups["sphere_part"]:
        for e in (edge_key(*p) for p in
                  zip(glued.faces[t_idx], glued.faces[t_idx][1:] + glued.faces[t_idx][:1])):
            if e in part.edge_lengths:
                assert glued.edge_lengths[e] == part.edge_lengths[e]


def test_glue_annulus_path_small_epsilon():
    part = _one_holed_torus()
    glued = glue_family(GluedFamilySpec(
        sphere_part=part, handle_part=part, epsilon=0.125))
    assert not glued.boundary_loops
    assert glued.genus == 2
    assert set(glued.face_groups) == {"sphere_part", "neck", "handle_part"}
    n_ring = len(part.boundary_loops[0])
    assert len(glued.face_groups["neck"]) == 2 * n_ring


def test_glue_preserves_sphere_metric_in_annulus_path():
    part = _one_holed_torus()
    glued = glue_family(GluedFamilySpec(
        sphere_part=part, handle_part=part, epsilon=0.25))
    for e, l in part.edge_lengths.items():
        assert glued.edge_lengths[e] == l


def test_glue_rejects_bad_inputs():
    part = _one_holed_torus()
    with pytest.raises(GluingError):
        glue_family(GluedFamilySpec(part, part, epsilon=0.0))
    closed = build_flat_torus(8, 8)
    with pytest.raises(GluingError):
        glue_family(GluedFamilySpec(closed, part, epsilon=0.5))
    # eps >= 2 with mismatched rings: inner ring not smaller than outer
    with pytest.raises(GluingError):
        glue_family(GluedFamilySpec(part, part, epsilon=3.0))


def test_glue_rejects_irregular_rings():
    part = _one_holed_torus()
    irregular = remove_vertex_star(build_flat_torus(12, 12), 0)
    assert len(irregular.boundary_loops[0]) == len(part.boundary_loops[0])
    with pytest.raises(GluingError):
        glue_family(GluedFamilySpec(part, irregular, epsilon=0.125))


# ---------------------------------------------------------------------------
# perturbation


def test_perturb_metric_deterministic():
    t = build_flat_torus(8, 8)
    a = perturb_metric(t, amplitude=0.05, seed=3)
    b = perturb_metric(t, amplitude=0.05, seed=3)
    c = perturb_metric(t, amplitude=0.05, seed=4)
    assert a.edge_lengths == b.edge_lengths
    assert a.edge_lengths != c.edge_lengths
    assert a.ref == b.ref != c.ref


def test_perturb_metric_amplitude_bounds():
    t = build_flat_torus(8, 8)
    for amp in (0.0, 0.1, -0.01, 1.0):
        with pytest.raises(PerturbationError):
            perturb_metric(t, amplitude=amp, seed=0)


def test_perturb_metric_relative_amplitude():
    t = build_flat_torus(8, 8)
    p = perturb_metric(t, amplitude=0.05, seed=0)
    for e, l in t.edge_lengths.items():
        assert abs(p.edge_lengths[e] / l - 1.0) <= 0.05


def test_perturb_metric_support_restriction():
    t = build_flat_torus(8, 8)
    support = list(range(0, 32))
    p = perturb_metric(t, amplitude=0.05, seed=0, support=support)
    supported = set(support)
    ef = t.edge_faces()
    changed = {e for e in t.edge_lengths
               if p.edge_lengths[e] != t.edge_lengths[e]}
    for e in changed:
        assert all(f in supported for f in ef[e])
    assert changed  # interior edges of the support did move


def test_perturb_metric_empty_support_is_identity():
    t = build_flat_torus(8, 8)
    p = perturb_metric(t, amplitude=0.05, seed=0, support=[])
    assert p.edge_lengths == t.edge_lengths


# ---------------------------------------------------------------------------
# serialization


def test_descriptor_round_trip(tmp_path):
    s = perturb_metric(build_round_sphere(1), amplitude=0.03, seed=1)
    path = tmp_path / "s.json"
    s.save_json(path)
    back = DiscreteSurface.load_json(path)
    assert back.faces == s.faces
    assert back.edge_lengths == pytest.approx(s.edge_lengths)
    assert back.euler_characteristic == s.euler_characteristic


def test_descriptor_round_trip_with_groups():
    part = _one_holed_torus()
    glued = glue_family(GluedFamilySpec(part, part, epsilon=0.25))
    desc = glued.to_descriptor()
    back = DiscreteSurface.from_descriptor(desc)
    assert back.genus == glued.genus
    assert set(back.face_groups) == set(glued.face_groups)


def test_off_round_trip(tmp_path):
    s = build_round_sphere(1)
    path = tmp_path / "s.off"
    s.write_off(path)
    back = DiscreteSurface.read_off(path)
    assert back.n_vertices == s.n_vertices
    assert len(back.faces) == len(s.faces)
    for e, l in s.edge_lengths.items():
        assert back.edge_lengths[e] == pytest.approx(l, rel=1e-12)
