"""Nodal sets of vertex-sampled functions: extraction, domain counting,
contractibility and containment checks.

Zero crossings are linear along edges, so all output depends only on the
sign pattern and value ratios of the input function.  Vertices whose value
falls below the zero threshold are treated as positive for determinism and
flagged, marking the result near-singular.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NodalContactError
from .surface import DiscreteSurface, EdgeKey, edge_key, face_edges

ZERO_THRESHOLD = 1e-10  # relative to the sup norm


@dataclass
class NodalSet:
    """Closed polyline components of the zero level set.

    Each component is an ordered cyclic list of (edge, t) crossings: the
    crossing sits at parameter t from the smaller-id endpoint of ``edge``.
    """

    components: list[list[tuple[EdgeKey, float]]]
    vertex_zeros: list[int]
    closed_flags: list[bool] = field(default_factory=list)

    @property
    def component_count(self) -> int:
        return len(self.components)

    @property
    def near_singular(self) -> bool:
        return bool(self.vertex_zeros)

    def crossed_edges(self, component_index: int) -> list[EdgeKey]:
        return [e for e, _ in self.components[component_index]]


@dataclass
class NodalReport:
    component_count: int
    domain_count: int
    contractible_flags: list[bool]
    near_singular: bool
    containment_flags: list[bool] | None = None

    def to_json(self) -> dict:
        return {
            "component_count": self.component_count,
            "domain_count": self.domain_count,
            "contractible_flags": self.contractible_flags,
            "near_singular": self.near_singular,
            "containment_flags": self.containment_flags,
        }


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def count(self, items: Iterable[int]) -> int:
        return len({self.find(i) for i in items})


def _signs(surface: DiscreteSurface, f: np.ndarray) -> tuple[np.ndarray, list[int]]:
    f = np.asarray(f, dtype=float)
    if f.shape != (surface.n_vertices,):
        raise NodalContactError(
            f"function has {f.shape} entries, surface has {surface.n_vertices} vertices"
        )
    sup = np.abs(f).max()
    zeros_mask = np.abs(f) < ZERO_THRESHOLD * sup if sup > 0 else np.ones_like(f, bool)
    signs = np.where(zeros_mask | (f > 0), 1, -1)
    vertex_zeros = [surface.vertices[i] for i in np.flatnonzero(zeros_mask)]
    return signs, vertex_zeros


def extract_nodal_set(surface: DiscreteSurface, f: np.ndarray) -> NodalSet:
    """Zero level set of the linear interpolant, chained into components.

    ``f`` is indexed in the surface's canonical (sorted) vertex order.
    """
    f = np.asarray(f, dtype=float)
    signs, vertex_zeros = _signs(surface, f)
    idx = surface.vertex_index
    crossings: dict[EdgeKey, float] = {}
    for (i, j) in surface.edge_lengths:
        si, sj = signs[idx[i]], signs[idx[j]]
        if si != sj:
            fi, fj = f[idx[i]], f[idx[j]]
            denom = fi - fj
            t = fi / denom if denom != 0 else 0.5
            crossings[(i, j)] = float(min(max(t, 1e-12), 1.0 - 1e-12))
    # each mixed-sign face links its two crossed edges
    edge_neighbors: dict[EdgeKey, list[EdgeKey]] = {e: [] for e in crossings}
    for face in surface.faces:
        crossed = [e for e in face_edges(face) if e in crossings]
        if len(crossed) == 2:
            a, b = crossed
            edge_neighbors[a].append(b)
            edge_neighbors[b].append(a)
    components = []
    closed_flags = []
    visited: set[EdgeKey] = set()
    for start in sorted(crossings):
        if start in visited:
            continue
        # walk to one end of the chain (or all the way around a loop)
        chain = [start]
        visited.add(start)
        grew = True
        while grew:
            grew = False
            for nb in edge_neighbors[chain[-1]]:
                if nb not in visited:
                    chain.append(nb)
                    visited.add(nb)
                    grew = True
                    break
        # extend from the other side for open chains (boundary surfaces)
        grew = True
        while grew:
            grew = False
            for nb in edge_neighbors[chain[0]]:
                if nb not in visited:
                    chain.insert(0, nb)
                    visited.add(nb)
                    grew = True
                    break
        closed = len(chain) > 2 and chain[0] in edge_neighbors[chain[-1]]
        components.append([(e, crossings[e]) for e in chain])
        closed_flags.append(closed)
    return NodalSet(components=components, vertex_zeros=vertex_zeros,
                    closed_flags=closed_flags)


def count_nodal_domains(surface: DiscreteSurface, f: np.ndarray) -> int:
    """Connected components of the same-sign induced vertex subgraphs.

    Two vertices lie in the same domain iff they are joined by a path of
    equal-sign vertices; around a vertex the interpolant keeps that
    vertex's sign on part of every incident face, which is what makes
    this the right discrete reading of "component of the complement of
    the zero set" (and the one the Courant bound holds for).
    """
    f = np.asarray(f, dtype=float)
    if np.abs(f).max() == 0.0:
        raise NodalContactError("function is identically zero")
    signs, _ = _signs(surface, f)
    idx = surface.vertex_index
    uf = _UnionFind(surface.n_vertices)
    for (i, j) in surface.edge_lengths:
        if signs[idx[i]] == signs[idx[j]]:
            uf.union(idx[i], idx[j])
    return uf.count(range(surface.n_vertices))


def _vertex_sides(surface: DiscreteSurface,
                  cut_edges: set[EdgeKey]) -> tuple[_UnionFind, list[int]]:
    idx = surface.vertex_index
    uf = _UnionFind(surface.n_vertices)
    for e in surface.edge_lengths:
        if e not in cut_edges:
            uf.union(idx[e[0]], idx[e[1]])
    roots = sorted({uf.find(i) for i in range(surface.n_vertices)})
    return uf, roots


def cut_euler_characteristics(surface: DiscreteSurface, nodal: NodalSet,
                              component_index: int) -> list[int]:
    """Euler characteristics of the pieces obtained by cutting the surface
    along one nodal component.

    The crossing points, partial edges and partial faces along the cut
    cancel in V - E + F, so each piece reduces to counting the vertices,
    edges and faces strictly on its side.
    """
    cut = set(nodal.crossed_edges(component_index))
    uf, roots = _vertex_sides(surface, cut)
    idx = surface.vertex_index
    side_of = {r: p for p, r in enumerate(roots)}
    chi = [0] * len(roots)
    for v in surface.vertices:
        chi[side_of[uf.find(idx[v])]] += 1
    for (i, j) in surface.edge_lengths:
        if (i, j) in cut:
            continue
        chi[side_of[uf.find(idx[i])]] -= 1
    for face in surface.faces:
        if any(e in cut for e in face_edges(face)):
            continue
        chi[side_of[uf.find(idx[face[0]])]] += 1
    return chi


def is_contractible(surface: DiscreteSurface, nodal: NodalSet,
                    component_index: int) -> bool:
    """True iff cutting along the component leaves a disc on one side."""
    if not (0 <= component_index < nodal.component_count):
        raise NodalContactError(f"component {component_index} out of range")
    chi = cut_euler_characteristics(surface, nodal, component_index)
    if len(chi) == 1:
        return False  # non-separating curve
    return any(c == 1 for c in chi)


def check_containment(surface: DiscreteSurface, nodal: NodalSet,
                      region: Iterable[int]) -> list[bool]:
    """Per component: does every crossed edge bound only faces in region?"""
    region = set(int(i) for i in region)
    ef = surface.edge_faces()
    flags = []
    for c in range(nodal.component_count):
        flags.append(all(
            all(t in region for t in ef[e]) for e in nodal.crossed_edges(c)
        ))
    return flags


def analyze(surface: DiscreteSurface, f: np.ndarray,
            region: Iterable[int] | None = None) -> tuple[NodalSet, NodalReport]:
    """Full nodal summary for one function."""
    nodal = extract_nodal_set(surface, f)
    domains = count_nodal_domains(surface, f)
    flags = [is_contractible(surface, nodal, c) for c in range(nodal.component_count)]
    contain = None
    if region is not None:
        contain = check_containment(surface, nodal, region)
    report = NodalReport(
        component_count=nodal.component_count,
        domain_count=domains,
        contractible_flags=flags,
        near_singular=nodal.near_singular,
        containment_flags=contain,
    )
    return nodal, report


# ---------------------------------------------------------------------------
# export


def nodal_to_json(nodal: NodalSet) -> dict:
    return {
        "components": [
            [{"edge": [int(e[0]), int(e[1])], "t": t} for e, t in comp]
            for comp in nodal.components
        ],
        "closed": [bool(c) for c in nodal.closed_flags],
        "vertex_zeros": [int(v) for v in nodal.vertex_zeros],
    }


def save_nodal(nodal: NodalSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(nodal_to_json(nodal), fh)
        fh.write("\n")


def _project(p: np.ndarray) -> tuple[float, float]:
    return float(p[0]), float(p[1])


def nodal_svg(surface: DiscreteSurface, nodal: NodalSet,
              width: int = 640) -> str:
    """Wireframe projection (drop z) with nodal components stroked on top.

    Requires an embedding; deterministic output for identical inputs.
    """
    if surface.embedding is None:
        raise NodalContactError("surface has no embedding; cannot plot")
    emb = surface.embedding
    pts = np.array([emb[v] for v in surface.vertices])
    lo = pts[:, :2].min(axis=0)
    hi = pts[:, :2].max(axis=0)
    span = max(float((hi - lo).max()), 1e-12)
    pad = 0.05 * span

    def to_px(p) -> tuple[float, float]:
        x = (p[0] - lo[0] + pad) / (span + 2 * pad) * width
        y = width - (p[1] - lo[1] + pad) / (span + 2 * pad) * width
        return x, y

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{width}" '
        f'viewBox="0 0 {width} {width}">',
        '<g stroke="#bbbbbb" stroke-width="0.5">',
    ]
    for (i, j) in sorted(surface.edge_lengths):
        if i not in emb or j not in emb:
            continue
        x1, y1 = to_px(emb[i])
        x2, y2 = to_px(emb[j])
        out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}"/>')
    out.append("</g>")
    out.append('<g stroke="#cc2222" stroke-width="2" fill="none">')
    for comp, closed in zip(nodal.components, nodal.closed_flags):
        coords = []
        usable = True
        for (i, j), t in comp:
            if i not in emb or j not in emb:
                usable = False
                break
            p = (1.0 - t) * emb[i] + t * emb[j]
            coords.append(to_px(p))
        if not usable or not coords:
            continue
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
        tag = "polygon" if closed else "polyline"
        out.append(f'<{tag} points="{path}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
