"""Nodal set extraction, domain counting, contractibility, containment."""

from __future__ import annotations

import numpy as np
import pytest

from nodal_contact import (
    analyze,
    assemble,
    build_flat_torus,
    build_round_sphere,
    check_containment,
    count_nodal_domains,
    extract_nodal_set,
    is_contractible,
    perturb_metric,
    remove_disc,
    solve_lowest,
)
from nodal_contact.errors import NodalContactError
from nodal_contact.nodal import (
    cut_euler_characteristics,
    nodal_svg,
    nodal_to_json,
    save_nodal,
)


def torus_coords(t):
    n = max(t.vertices) + 1
    m = int(round(n ** 0.5))
    ids = np.array(t.vertices)
    return (ids // m) / m, (ids % m) / m


@pytest.fixture(scope="module")
def sphere_pair():
    s = perturb_metric(build_round_sphere(3), amplitude=0.02, seed=7)
    pairs = solve_lowest(assemble(s), 1, seed=0)
    return s, pairs[1].eigenfunction


# ---------------------------------------------------------------------------
# extraction


def test_sphere_first_eigenfunction_single_circle(sphere_pair):
    s, f = sphere_pair
    nodal = extract_nodal_set(s, f)
    assert nodal.component_count == 1
    assert nodal.closed_flags == [True]
    assert not nodal.near_singular
    # crossings sit strictly inside their edges
    for e, t in nodal.components[0]:
        assert 0.0 < t < 1.0


def test_torus_vertical_line_crossing_count():
    """One vertical nodal line crosses n horizontal and n diagonal edges."""
    n = 32
    t = build_flat_torus(n, n)
    x, _ = torus_coords(t)
    f = np.sin(2 * np.pi * (x - 1.0 / (2 * n)))
    nodal = extract_nodal_set(t, f)
    assert nodal.component_count == 2
    for c in range(2):
        assert len(nodal.crossed_edges(c)) == 2 * n
    assert nodal.closed_flags == [True, True]
    assert not nodal.near_singular


def test_vertex_zero_flagging():
    n = 16
    t = build_flat_torus(n, n)
    x, _ = torus_coords(t)
    f = np.sin(2 * np.pi * x)  # zero exactly on two vertex columns
    nodal = extract_nodal_set(t, f)
    assert nodal.near_singular
    assert len(nodal.vertex_zeros) == 2 * n


def test_open_chains_on_boundary_surface():
    s = build_round_sphere(2)
    top = max(s.vertices, key=lambda v: s.embedding[v][2])
    cut = remove_disc(s, center=top, radius=0.5)
    # plane through the removed pole: the circle is cut into an open arc
    f = np.array([s.embedding[v][0] + 0.01 * s.embedding[v][1]
                  for v in cut.vertices])
    nodal = extract_nodal_set(cut, f)
    assert nodal.component_count >= 1
    assert False in nodal.closed_flags  # the line runs into the boundary


def test_function_size_mismatch():
    t = build_flat_torus(8, 8)
    with pytest.raises(NodalContactError):
        extract_nodal_set(t, np.zeros(3))


# ---------------------------------------------------------------------------
# domain counting


def test_sphere_first_eigenfunction_two_domains(sphere_pair):
    s, f = sphere_pair
    assert count_nodal_domains(s, f) == 2


def test_torus_sine_two_domains():
    n = 32
    t = build_flat_torus(n, n)
    x, _ = torus_coords(t)
    assert count_nodal_domains(t, np.sin(2 * np.pi * (x - 1.0 / (2 * n)))) == 2


def test_product_function_domain_counts():
    """Product sine zero sets run through the saddles of the grid.

    With zeros exactly on vertices the + quadrants merge through the
    (sign-convention +) zero vertices: 3 domains.  Shifted off the
    vertices, the (+1,+1) diagonal of each saddle cell joins equal-sign
    quadrants: 2 domains.  The analytic count 4 is unreachable on this
    triangulation for any product function.
    """
    n = 64
    t = build_flat_torus(n, n)
    x, y = torus_coords(t)
    on_vertices = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    assert count_nodal_domains(t, on_vertices) == 3
    shifted = (np.sin(2 * np.pi * (x - 1.0 / (4 * n)))
               * np.sin(2 * np.pi * (y - 1.0 / (4 * n))))
    assert count_nodal_domains(t, shifted) == 2


def test_all_zero_function_rejected():
    t = build_flat_torus(8, 8)
    with pytest.raises(NodalContactError):
        count_nodal_domains(t, np.zeros(t.n_vertices))


def test_courant_bound_small_sample():
    for seed in (0, 1, 2):
        t = perturb_metric(build_flat_torus(12, 12), amplitude=0.05, seed=seed)
        pairs = solve_lowest(assemble(t), 4, seed=seed)
        for k in range(1, 5):
            d = count_nodal_domains(t, pairs[k].eigenfunction)
            assert 2 <= d <= k + 1


# ---------------------------------------------------------------------------
# contractibility


def test_sphere_nodal_circle_is_contractible(sphere_pair):
    s, f = sphere_pair
    nodal = extract_nodal_set(s, f)
    assert is_contractible(s, nodal, 0)
    chi = cut_euler_characteristics(s, nodal, 0)
    assert sorted(chi) == [1, 1]  # two discs


def test_torus_lines_not_contractible():
    n = 24
    t = build_flat_torus(n, n)
    x, _ = torus_coords(t)
    nodal = extract_nodal_set(t, np.sin(2 * np.pi * (x - 1.0 / (2 * n))))
    # each line alone does not separate the torus
    for c in range(nodal.component_count):
        assert not is_contractible(t, nodal, c)
        assert len(cut_euler_characteristics(t, nodal, c)) == 1


def test_contractibility_index_guard(sphere_pair):
    s, f = sphere_pair
    nodal = extract_nodal_set(s, f)
    with pytest.raises(NodalContactError):
        is_contractible(s, nodal, 5)


# ---------------------------------------------------------------------------
# containment


def test_containment_flags(sphere_pair):
    s, f = sphere_pair
    nodal = extract_nodal_set(s, f)
    assert check_containment(s, nodal, range(len(s.faces))) == [True]
    assert check_containment(s, nodal, []) == [False]
    crossed = set(nodal.crossed_edges(0))
    ef = s.edge_faces()
    touching = {t for e in crossed for t in ef[e]}
    assert check_containment(s, nodal, touching) == [True]
    assert check_containment(s, nodal, list(touching)[:-1]) == [False]


# ---------------------------------------------------------------------------
# analyze + export


def test_analyze_report(sphere_pair):
    s, f = sphere_pair
    nodal, report = analyze(s, f, region=range(len(s.faces)))
    assert report.component_count == 1
    assert report.domain_count == 2
    assert report.contractible_flags == [True]
    assert report.containment_flags == [True]
    assert not report.near_singular
    assert report.to_json()["domain_count"] == 2


def test_nodal_json_and_svg(tmp_path, sphere_pair):
    s, f = sphere_pair
    nodal = extract_nodal_set(s, f)
    data = nodal_to_json(nodal)
    assert len(data["components"]) == 1
    save_nodal(nodal, tmp_path / "n.json")
    assert (tmp_path / "n.json").exists()
    svg_a = nodal_svg(s, nodal)
    svg_b = nodal_svg(s, nodal)
    assert svg_a == svg_b
    assert "<polygon" in svg_a


def test_svg_requires_embedding():
    t = build_flat_torus(8, 8)
    x, _ = torus_coords(t)
    nodal = extract_nodal_set(t, np.sin(2 * np.pi * (x - 1.0 / 16)))
    with pytest.raises(NodalContactError):
        nodal_svg(t, nodal)
