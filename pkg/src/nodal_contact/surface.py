"""Intrinsic triangulated surfaces.

A surface is a consistently oriented triangle complex together with a
positive length per edge.  The edge lengths *are* the metric; vertex
coordinates, when present, are only used for plotting.  All surfaces are
immutable: operations return new instances.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import (
    DiscRemovalError,
    GluingError,
    InvalidSurfaceError,
    PerturbationError,
    SizeGuardError,
)

EdgeKey = tuple[int, int]

#: relative (to the squared longest edge) face-area threshold below which a
#: face counts as degenerate
DEGENERATE_AREA_REL = 1e-12

#: relative tolerance for boundary-ring length matching during gluing
RING_MATCH_RTOL = 1e-9


def edge_key(i: int, j: int) -> EdgeKey:
    return (i, j) if i < j else (j, i)


def face_edges(face: Sequence[int]) -> list[EdgeKey]:
    i, j, k = face
    return [edge_key(i, j), edge_key(j, k), edge_key(k, i)]


def triangle_area(a: float, b: float, c: float) -> float:
    """Heron's formula in the numerically stable (Kahan) form."""
    x, y, z = sorted((a, b, c), reverse=True)
    s = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    if s <= 0.0:
        return 0.0
    return 0.25 * math.sqrt(s)


class DiscreteSurface:
    """Oriented triangle mesh with an intrinsic edge-length metric.

    Parameters
    ----------
    faces : sequence of (i, j, k)
        Consistently oriented triangles over integer vertex ids.
    edge_lengths : mapping (i, j) -> float
        Positive length for every mesh edge, keyed by the sorted id pair.
    embedding : mapping vertex -> (x, y, z), optional
        Coordinates used for report plotting only.
    marked_vertex : int, optional
        A vertex whose star is flat (angle sum 2*pi); used as the disc
        center for surgery.
    face_groups : mapping name -> face-index set, optional
        Named face subsets (e.g. ``sphere_part`` of a glued surface).
    """

    def __init__(
        self,
        faces: Iterable[Sequence[int]],
        edge_lengths: Mapping[EdgeKey, float],
        embedding: Mapping[int, Sequence[float]] | None = None,
        marked_vertex: int | None = None,
        face_groups: Mapping[str, Iterable[int]] | None = None,
    ):
        self.faces: tuple[tuple[int, int, int], ...] = tuple(
            (int(f[0]), int(f[1]), int(f[2])) for f in faces
        )
        if not self.faces:
            raise InvalidSurfaceError("surface has no faces")
        needed: set[EdgeKey] = set()
        for f in self.faces:
            if len(set(f)) != 3:
                raise InvalidSurfaceError(f"degenerate face {f}")
            needed.update(face_edges(f))
        try:
            self.edge_lengths: dict[EdgeKey, float] = {
                e: float(edge_lengths[e]) for e in sorted(needed)
            }
        except KeyError as exc:
            raise InvalidSurfaceError(f"missing edge length for {exc.args[0]}") from exc
        self.vertices: tuple[int, ...] = tuple(sorted({v for f in self.faces for v in f}))
        self.vertex_index: dict[int, int] = {v: i for i, v in enumerate(self.vertices)}
        self.embedding = (
            {int(v): np.asarray(p, dtype=float) for v, p in embedding.items()}
            if embedding is not None
            else None
        )
        self.marked_vertex = marked_vertex
        self.face_groups = (
            {str(k): frozenset(int(i) for i in v) for k, v in face_groups.items()}
            if face_groups
            else None
        )
        self._validate()
        self.boundary_loops: tuple[tuple[int, ...], ...] = self._trace_boundary()
        chi = self.euler_characteristic
        g2 = 2 - len(self.boundary_loops) - chi
        if g2 < 0 or g2 % 2:
            raise InvalidSurfaceError(
                f"chi={chi} with {len(self.boundary_loops)} boundary loops is not "
                "an orientable surface"
            )
        self.genus: int = g2 // 2
        self._ref: str | None = None

    # -- derived quantities -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> tuple[EdgeKey, ...]:
        return tuple(sorted(self.edge_lengths))

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edge_lengths) + len(self.faces)

    @property
    def face_areas(self) -> np.ndarray:
        areas = getattr(self, "_areas", None)
        if areas is None:
            el = self.edge_lengths
            areas = np.array(
                [triangle_area(*(el[e] for e in face_edges(f))) for f in self.faces]
            )
            self._areas = areas
        return areas

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    @property
    def ref(self) -> str:
        """Stable content hash identifying this surface."""
        if self._ref is None:
            h = hashlib.sha1()
            h.update(repr(self.faces).encode())
            h.update(repr(sorted(self.edge_lengths.items())).encode())
            self._ref = h.hexdigest()[:16]
        return self._ref

    def vector(self, values: Mapping[int, float]) -> np.ndarray:
        """Pack a per-vertex mapping into the canonical vertex order."""
        return np.array([values[v] for v in self.vertices])

    def vertex_faces(self) -> dict[int, list[int]]:
        vf: dict[int, list[int]] = {v: [] for v in self.vertices}
        for idx, f in enumerate(self.faces):
            for v in f:
                vf[v].append(idx)
        return vf

    def edge_faces(self) -> dict[EdgeKey, list[int]]:
        ef: dict[EdgeKey, list[int]] = {e: [] for e in self.edge_lengths}
        for idx, f in enumerate(self.faces):
            for e in face_edges(f):
                ef[e].append(idx)
        return ef

    def corner_angles(self) -> np.ndarray:
        """(F, 3) interior angles, angle [t, c] at corner ``faces[t][c]``."""
        el = self.edge_lengths
        out = np.empty((len(self.faces), 3))
        for t, (i, j, k) in enumerate(self.faces):
            a = el[edge_key(j, k)]  # opposite i
            b = el[edge_key(k, i)]  # opposite j
            c = el[edge_key(i, j)]  # opposite k
            out[t, 0] = math.acos(max(-1.0, min(1.0, (b * b + c * c - a * a) / (2 * b * c))))
            out[t, 1] = math.acos(max(-1.0, min(1.0, (a * a + c * c - b * b) / (2 * a * c))))
            out[t, 2] = math.acos(max(-1.0, min(1.0, (a * a + b * b - c * c) / (2 * a * b))))
        return out

    def angle_defects(self) -> dict[int, float]:
        """2*pi minus the incident angle sum, per interior vertex."""
        angles = self.corner_angles()
        acc = {v: 0.0 for v in self.vertices}
        for t, f in enumerate(self.faces):
            for c, v in enumerate(f):
                acc[v] += angles[t, c]
        boundary = {v for loop in self.boundary_loops for v in loop}
        return {v: 2 * math.pi - s for v, s in acc.items() if v not in boundary}

    def geodesic_distances(self, sources: Iterable[int]) -> np.ndarray:
        """Dijkstra edge-graph distances from ``sources`` (canonical order)."""
        idx = self.vertex_index
        rows, cols, vals = [], [], []
        for (i, j), l in self.edge_lengths.items():
            rows += [idx[i], idx[j]]
            cols += [idx[j], idx[i]]
            vals += [l, l]
        n = self.n_vertices
        graph = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        src = [idx[s] for s in sources]
        d = dijkstra(graph, directed=False, indices=src)
        return d.min(axis=0) if d.ndim == 2 else d

    # -- validation ---------------------------------------------------------

    def _validate(self) -> None:
        for e, l in self.edge_lengths.items():
            if not l > 0.0:
                raise InvalidSurfaceError(f"edge {e} has nonpositive length {l}")
        el = self.edge_lengths
        for t, f in enumerate(self.faces):
            a, b, c = (el[e] for e in face_edges(f))
            mx = max(a, b, c)
            if a + b + c - 2 * mx <= 0.0:
                raise InvalidSurfaceError(f"face {t} {f} violates the triangle inequality")
            if triangle_area(a, b, c) < DEGENERATE_AREA_REL * mx * mx:
                raise InvalidSurfaceError(f"face {t} {f} is numerically degenerate")
        directed: set[tuple[int, int]] = set()
        for f in self.faces:
            i, j, k = f
            for d in ((i, j), (j, k), (k, i)):
                if d in directed:
                    raise InvalidSurfaceError(
                        f"directed edge {d} used twice: inconsistent orientation"
                    )
                directed.add(d)
        ef = self.edge_faces()
        for e, fs in ef.items():
            if len(fs) > 2:
                raise InvalidSurfaceError(f"edge {e} bounds {len(fs)} faces (non-manifold)")
        self._check_vertex_links()
        self._check_connected()

    def _check_vertex_links(self) -> None:
        vf = self.vertex_faces()
        for v, fs in vf.items():
            # neighbors of v in each incident face, as directed pairs (a, b)
            # meaning the face reads v -> a -> b; fan adjacency a->b
            succ: dict[int, int] = {}
            for t in fs:
                f = self.faces[t]
                p = f.index(v)
                a, b = f[(p + 1) % 3], f[(p + 2) % 3]
                if a in succ:
                    raise InvalidSurfaceError(f"vertex {v} has a non-manifold link")
                succ[a] = b
            starts = set(succ) - set(succ.values())
            if len(starts) > 1:
                raise InvalidSurfaceError(f"vertex {v} has a disconnected link")
            if not starts:
                # closed fan: must be a single cycle
                seen = set()
                cur = next(iter(succ))
                while cur not in seen:
                    seen.add(cur)
                    cur = succ[cur]
                if len(seen) != len(succ):
                    raise InvalidSurfaceError(f"vertex {v} has a disconnected link")

    def _check_connected(self) -> None:
        idx = self.vertex_index
        rows, cols = [], []
        for i, j in self.edge_lengths:
            rows.append(idx[i])
            cols.append(idx[j])
        n = self.n_vertices
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        ncomp, _ = connected_components(graph, directed=False)
        if ncomp != 1:
            raise InvalidSurfaceError(f"surface has {ncomp} connected components")

    def _trace_boundary(self) -> tuple[tuple[int, ...], ...]:
        directed = set()
        for i, j, k in self.faces:
            directed.update(((i, j), (j, k), (k, i)))
        # boundary edges, oriented opposite to their face so loops run
        # with the surface on the left
        succ: dict[int, int] = {}
        for i, j in directed:
            if (j, i) not in directed:
                if j in succ:
                    raise InvalidSurfaceError("non-manifold boundary")
                succ[j] = i
        loops = []
        remaining = dict(succ)
        while remaining:
            start = min(remaining)
            loop = [start]
            cur = remaining.pop(start)
            while cur != start:
                loop.append(cur)
                cur = remaining.pop(cur)
            loops.append(tuple(loop))
        return tuple(sorted(loops))

    # -- serialization ------------------------------------------------------

    def to_descriptor(self) -> dict:
        """JSON-ready descriptor with contiguous vertex ids."""
        relabel = {v: i for i, v in enumerate(self.vertices)}
        desc: dict = {
            "vertices": self.n_vertices,
            "faces": [[relabel[v] for v in f] for f in self.faces],
            "edge_lengths": {
                f"{relabel[i]}-{relabel[j]}" if relabel[i] < relabel[j]
                else f"{relabel[j]}-{relabel[i]}": l
                for (i, j), l in sorted(self.edge_lengths.items())
            },
            "boundary_loops": [[relabel[v] for v in loop] for loop in self.boundary_loops],
        }
        if self.embedding is not None:
            desc["embedding"] = {
                str(relabel[v]): [float(x) for x in p] for v, p in self.embedding.items()
            }
        if self.marked_vertex is not None and self.marked_vertex in relabel:
            desc["marked_vertex"] = relabel[self.marked_vertex]
        if self.face_groups:
            desc["face_groups"] = {k: sorted(v) for k, v in sorted(self.face_groups.items())}
        return desc

    @classmethod
    def from_descriptor(cls, desc: Mapping) -> "DiscreteSurface":
        lengths = {}
        for key, l in desc["edge_lengths"].items():
            i, j = (int(x) for x in key.split("-"))
            lengths[edge_key(i, j)] = float(l)
        emb = desc.get("embedding")
        if emb is not None:
            emb = {int(v): p for v, p in emb.items()}
        return cls(
            desc["faces"],
            lengths,
            embedding=emb,
            marked_vertex=desc.get("marked_vertex"),
            face_groups=desc.get("face_groups"),
        )

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_descriptor(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "DiscreteSurface":
        with open(path) as fh:
            return cls.from_descriptor(json.load(fh))

    def write_off(self, path) -> None:
        """OFF file; intrinsic-only surfaces get zero coordinates plus a
        ``<path>.lengths.json`` sidecar carrying the metric."""
        relabel = {v: i for i, v in enumerate(self.vertices)}
        with open(path, "w") as fh:
            fh.write("OFF\n")
            fh.write(f"{self.n_vertices} {len(self.faces)} {len(self.edge_lengths)}\n")
            for v in self.vertices:
                p = self.embedding.get(v) if self.embedding else None
                if p is None:
                    p = (0.0, 0.0, 0.0)
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            for f in self.faces:
                fh.write(f"3 {relabel[f[0]]} {relabel[f[1]]} {relabel[f[2]]}\n")
        if self.embedding is None:
            sidecar = {
                f"{min(relabel[i], relabel[j])}-{max(relabel[i], relabel[j])}": l
                for (i, j), l in sorted(self.edge_lengths.items())
            }
            with open(str(path) + ".lengths.json", "w") as fh:
                json.dump(sidecar, fh, indent=1)
                fh.write("\n")

    @classmethod
    def read_off(cls, path) -> "DiscreteSurface":
        with open(path) as fh:
            tokens = [t for line in fh
                      if (s := line.split("#")[0].strip())
                      for t in s.split()]
        if tokens[0] != "OFF":
            raise InvalidSurfaceError("not an OFF file")
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4
        coords = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            cnt = int(tokens[pos])
            if cnt != 3:
                raise InvalidSurfaceError("only triangle OFF files are supported")
            faces.append(tuple(int(t) for t in tokens[pos + 1:pos + 4]))
            pos += 4
        import os

        sidecar = str(path) + ".lengths.json"
        if os.path.exists(sidecar):
            with open(sidecar) as fh:
                raw = json.load(fh)
            lengths = {}
            for key, l in raw.items():
                i, j = (int(x) for x in key.split("-"))
                lengths[edge_key(i, j)] = float(l)
            return cls(faces, lengths)
        lengths = {}
        for f in faces:
            for i, j in face_edges(f):
                lengths[(i, j)] = float(np.linalg.norm(coords[i] - coords[j]))
        emb = {i: coords[i] for i in range(nv)}
        return cls(faces, lengths, embedding=emb)


# ---------------------------------------------------------------------------
# builders


def _icosahedron() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    return verts / np.linalg.norm(verts, axis=1)[:, None], faces


def build_round_sphere(subdivisions: int) -> DiscreteSurface:
    """Icosahedral triangulation of the unit sphere.

    Edge lengths are the chord lengths of the vertices projected onto the
    unit sphere, so the metric is determined by the embedding.
    """
    if subdivisions < 0:
        raise SizeGuardError("subdivisions must be nonnegative")
    if subdivisions > 8:
        raise SizeGuardError("subdivisions > 8 exceeds the size guard")
    verts, faces = _icosahedron()
    verts = [v for v in verts]
    for _ in range(subdivisions):
        midpoint: dict[EdgeKey, int] = {}

        def mid(i: int, j: int) -> int:
            e = edge_key(i, j)
            if e not in midpoint:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                midpoint[e] = len(verts) - 1
            return midpoint[e]

        new_faces = []
        for i, j, k in faces:
            a, b, c = mid(i, j), mid(j, k), mid(k, i)
            new_faces += [(i, a, c), (a, j, b), (c, b, k), (a, b, c)]
        faces = new_faces
    lengths = {}
    for f in faces:
        for i, j in face_edges(f):
            lengths[(i, j)] = float(np.linalg.norm(verts[i] - verts[j]))
    emb = {i: verts[i] for i in range(len(verts))}
    return DiscreteSurface(faces, lengths, embedding=emb)


def build_flat_torus(n: int, m: int) -> DiscreteSurface:
    """n-by-m periodic grid on the unit square, each cell split into two
    triangles; the flat metric makes every vertex star flat."""
    if n < 3 or m < 3:
        raise InvalidSurfaceError("flat torus needs n, m >= 3")
    dx, dy = 1.0 / n, 1.0 / m
    diag = math.hypot(dx, dy)

    def vid(i: int, j: int) -> int:
        return (i % n) * m + (j % m)

    faces = []
    lengths: dict[EdgeKey, float] = {}
    for i in range(n):
        for j in range(m):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            faces += [(v00, v10, v11), (v00, v11, v01)]
            lengths[edge_key(v00, v10)] = dx
            lengths[edge_key(v00, v01)] = dy
            lengths[edge_key(v00, v11)] = diag
    return DiscreteSurface(faces, lengths, marked_vertex=0)


def flatten_star(surface: DiscreteSurface, center: int,
                 radius: float | None = None) -> DiscreteSurface:
    """Reshape the star of ``center`` into a flat regular polygon fan.

    Spokes get length ``radius`` and ring edges the matching regular-polygon
    side, so the incident angles at ``center`` sum to exactly 2*pi.
    """
    vf = surface.vertex_faces()
    ring_pairs = []
    spokes = set()
    for t in vf[center]:
        f = surface.faces[t]
        p = f.index(center)
        a, b = f[(p + 1) % 3], f[(p + 2) % 3]
        ring_pairs.append(edge_key(a, b))
        spokes.update((edge_key(center, a), edge_key(center, b)))
    q = len(ring_pairs)
    if q < 3:
        raise InvalidSurfaceError(f"vertex {center} has valence {q} < 3")
    if radius is None:
        radius = sum(surface.edge_lengths[e] for e in spokes) / len(spokes)
    side = 2.0 * radius * math.sin(math.pi / q)
    lengths = dict(surface.edge_lengths)
    for e in spokes:
        lengths[e] = radius
    for e in ring_pairs:
        lengths[e] = side
    return DiscreteSurface(
        surface.faces, lengths, embedding=surface.embedding,
        marked_vertex=surface.marked_vertex, face_groups=surface.face_groups,
    )


def submesh(surface: DiscreteSurface, face_indices: Iterable[int]) -> DiscreteSurface:
    """The subsurface spanned by the given faces (metric restricted)."""
    faces = [surface.faces[i] for i in sorted(set(face_indices))]
    emb = None
    if surface.embedding is not None:
        keep = {v for f in faces for v in f}
        emb = {v: surface.embedding[v] for v in keep if v in surface.embedding}
    return DiscreteSurface(faces, surface.edge_lengths, embedding=emb)


def remove_disc(surface: DiscreteSurface, center: int,
                radius: float) -> DiscreteSurface:
    """Remove all faces strictly inside the geodesic ball around ``center``.

    The removed region must be an embedded disc away from any existing
    boundary; the result gains exactly one boundary loop.
    """
    if center not in surface.vertex_index:
        raise DiscRemovalError(f"vertex {center} not in surface")
    if radius <= 0:
        raise DiscRemovalError("radius must be positive")
    dist = surface.geodesic_distances([center])
    inside = {v for v in surface.vertices if dist[surface.vertex_index[v]] < radius}
    on_boundary = {v for loop in surface.boundary_loops for v in loop}
    if inside & on_boundary:
        raise DiscRemovalError("geodesic ball touches the existing boundary")
    removed = [i for i, f in enumerate(surface.faces) if set(f) <= inside]
    if not removed:
        raise DiscRemovalError("no face lies inside the ball; radius too small")
    if len(removed) == len(surface.faces):
        raise DiscRemovalError("ball swallows the whole surface")
    try:
        piece = submesh(surface, removed)
    except InvalidSurfaceError as exc:
        raise DiscRemovalError(f"removed region is not a disc: {exc}") from exc
    if piece.euler_characteristic != 1 or len(piece.boundary_loops) != 1:
        raise DiscRemovalError(
            "removed region is not an embedded disc; radius too large"
        )
    kept = [f for i, f in enumerate(surface.faces) if i not in set(removed)]
    try:
        result = DiscreteSurface(kept, surface.edge_lengths, embedding=surface.embedding)
    except InvalidSurfaceError as exc:
        raise DiscRemovalError(f"remainder is not a valid surface: {exc}") from exc
    if result.genus != surface.genus:
        raise DiscRemovalError("disc removal changed the genus; radius too large")
    if len(result.boundary_loops) != len(surface.boundary_loops) + 1:
        raise DiscRemovalError("disc removal did not create exactly one boundary loop")
    return result


def remove_vertex_star(surface: DiscreteSurface, center: int) -> DiscreteSurface:
    """Remove the open star of a vertex (a combinatorial disc)."""
    spoke = max(
        surface.edge_lengths[edge_key(center, u)]
        for u in surface.vertices
        if edge_key(center, u) in surface.edge_lengths
    )
    return remove_disc(surface, center, spoke * (1.0 + 1e-9))


def _flat_interior_vertices(surface: DiscreteSurface, tol: float = 1e-9) -> list[int]:
    defects = surface.angle_defects()
    vf = surface.vertex_faces()
    return [v for v, d in defects.items() if abs(d) <= tol and len(vf[v]) == 6]


def build_genus_g(g: int, resolution: int = 12) -> DiscreteSurface:
    """Closed orientable genus-g surface with an intrinsic metric.

    Genus 1 is the flat torus; higher genus is an iterated connected sum of
    flat tori joined along small regular hexagonal rings.  The marked vertex
    has a flat star and stays clear of the connect-sum scars.
    """
    if g < 1:
        raise InvalidSurfaceError("genus must be >= 1")
    if g == 1:
        return build_flat_torus(resolution, resolution)
    if resolution < 8:
        raise SizeGuardError("resolution >= 8 required for a connected sum")
    n = resolution
    ring_radius = 1.0 / (2.0 * n)

    def one_holed_torus() -> DiscreteSurface:
        t = build_flat_torus(n, n)
        t = flatten_star(t, 0, radius=ring_radius)
        return remove_vertex_star(t, 0)

    def far_flat_vertex(surf: DiscreteSurface, scars: set[int]) -> int:
        candidates = _flat_interior_vertices(surf)
        candidates = [v for v in candidates if v not in scars]
        if not candidates:
            raise SizeGuardError("resolution too small to place the next handle")
        d = surf.geodesic_distances(sorted(scars))
        return max(candidates, key=lambda v: (d[surf.vertex_index[v]], -v))

    surf = one_holed_torus()
    scars: set[int] = set(surf.boundary_loops[0])
    for step in range(1, g):
        if step > 1:
            v = far_flat_vertex(surf, scars)
            surf = flatten_star(surf, v, radius=ring_radius)
            surf = remove_vertex_star(surf, v)
            scars |= set(surf.boundary_loops[0])
        spec = GluedFamilySpec(
            sphere_part=surf, handle_part=one_holed_torus(), epsilon=2.0
        )
        surf = glue_family(spec)
    marked = far_flat_vertex(surf, scars)
    return DiscreteSurface(surf.faces, surf.edge_lengths, marked_vertex=marked)


# ---------------------------------------------------------------------------
# gluing


@dataclass
class GluedFamilySpec:
    """Inputs for gluing a collapsing part onto a fixed part.

    ``sphere_part`` keeps its metric unchanged; ``handle_part`` edge lengths
    are multiplied by ``epsilon / 2`` before the boundary rings are joined.
    ``flat_center`` optionally records the disc center on the sphere side.
    """

    sphere_part: DiscreteSurface
    handle_part: DiscreteSurface
    epsilon: float
    flat_center: int | None = None

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise GluingError("epsilon must be positive")
        if len(self.sphere_part.boundary_loops) != 1:
            raise GluingError("sphere part must have exactly one boundary loop")
        if len(self.handle_part.boundary_loops) != 1:
            raise GluingError("handle part must have exactly one boundary loop")
        if len(self.sphere_part.boundary_loops[0]) != len(self.handle_part.boundary_loops[0]):
            raise GluingError("boundary vertex counts differ")


def _loop_lengths(surface: DiscreteSurface, loop: Sequence[int]) -> list[float]:
    n = len(loop)
    return [surface.edge_lengths[edge_key(loop[i], loop[(i + 1) % n])] for i in range(n)]


def _is_regular(lengths: Sequence[float]) -> bool:
    mx, mn = max(lengths), min(lengths)
    return (mx - mn) <= RING_MATCH_RTOL * mx


def glue_family(spec: GluedFamilySpec) -> DiscreteSurface:
    """Join the two parts along their boundary rings.

    The handle metric is scaled by ``epsilon/2``.  If the scaled handle ring
    matches the sphere ring edge-for-edge (any rotation), the rings are
    identified directly.  Otherwise both rings must be regular polygons and
    a flat annulus (a planar polygonal frustum) is inserted between them;
    the sphere metric is never altered.
    """
    spec.validate()
    sphere, handle = spec.sphere_part, spec.handle_part
    scale = spec.epsilon / 2.0
    s_loop = sphere.boundary_loops[0]
    h_loop = handle.boundary_loops[0]
    n = len(s_loop)
    s_len = _loop_lengths(sphere, s_loop)
    h_len = [l * scale for l in _loop_lengths(handle, h_loop)]

    offset_base = max(sphere.vertices) + 1
    new_id = {}
    next_id = offset_base
    for v in handle.vertices:
        new_id[v] = next_id
        next_id += 1

    lengths: dict[EdgeKey, float] = dict(sphere.edge_lengths)
    h_boundary = set(h_loop)

    def handle_faces_with(mapping: Mapping[int, int]) -> list[tuple[int, int, int]]:
        return [tuple(mapping[v] for v in f) for f in handle.faces]

    # direct identification: handle ring edge i must land on a sphere ring
    # edge of equal length, with the loop orientation reversed
    direct_offset = None
    tol = RING_MATCH_RTOL * max(max(s_len), max(h_len))
    for o in range(n):
        if all(abs(h_len[i] - s_len[(o - i - 1) % n]) <= tol for i in range(n)):
            direct_offset = o
            break

    faces: list[tuple[int, int, int]] = list(sphere.faces)
    groups: dict[str, list[int]] = {"sphere_part": list(range(len(faces)))}

    if direct_offset is not None:
        mapping = dict(new_id)
        for i, v in enumerate(h_loop):
            mapping[v] = s_loop[(direct_offset - i) % n]
        for f in handle.faces:
            for e in face_edges(f):
                ke = edge_key(mapping[e[0]], mapping[e[1]])
                if e[0] in h_boundary and e[1] in h_boundary and ke in lengths:
                    continue  # shared ring edge keeps the sphere length
                lengths[ke] = handle.edge_lengths[e] * scale
        start = len(faces)
        faces += handle_faces_with(mapping)
        groups["handle_part"] = list(range(start, len(faces)))
    else:
        if not (_is_regular(s_len) and _is_regular(h_len)):
            raise GluingError(
                "ring lengths do not match and rings are not regular polygons"
            )
        side_out = sum(s_len) / n
        side_in = sum(h_len) / n
        if side_in >= side_out:
            raise GluingError(
                "scaled handle ring is not smaller than the sphere ring; "
                "cannot build a collapsing neck"
            )
        r_out = side_out / (2.0 * math.sin(math.pi / n))
        r_in = side_in / (2.0 * math.sin(math.pi / n))
        theta = [2.0 * math.pi * i / n for i in range(n)]
        outer_pts = [np.array((r_out * math.cos(t), r_out * math.sin(t))) for t in theta]
        inner_pts = [np.array((r_in * math.cos(t), r_in * math.sin(t))) for t in theta]
        # inner ring vertices are the handle boundary vertices; align handle
        # loop reversed against the annulus inner loop
        inner_ids = [new_id[h_loop[(-i) % n]] for i in range(n)]
        start = len(faces)
        for i in range(n):
            o0, o1 = s_loop[i], s_loop[(i + 1) % n]
            i0, i1 = inner_ids[i], inner_ids[(i + 1) % n]
            # boundary loops run opposite to face orientation, so the annulus
            # traverses the outer ring forwards and the inner ring backwards
            faces += [(o0, o1, i1), (o0, i1, i0)]
            p_o0 = outer_pts[i]
            p_i0, p_i1 = inner_pts[i], inner_pts[(i + 1) % n]
            lengths[edge_key(o0, i0)] = float(np.linalg.norm(p_o0 - p_i0))
            lengths[edge_key(o0, i1)] = float(np.linalg.norm(p_o0 - p_i1))
            lengths[edge_key(i0, i1)] = float(np.linalg.norm(p_i0 - p_i1))
        groups["neck"] = list(range(start, len(faces)))
        for f in handle.faces:
            for e in face_edges(f):
                ke = edge_key(new_id[e[0]], new_id[e[1]])
                if e[0] in h_boundary and e[1] in h_boundary and ke in lengths:
                    continue  # inner ring edge set from the annulus layout
                lengths[ke] = handle.edge_lengths[e] * scale
        start = len(faces)
        faces += handle_faces_with(new_id)
        groups["handle_part"] = list(range(start, len(faces)))

    try:
        glued = DiscreteSurface(faces, lengths, face_groups=groups)
    except InvalidSurfaceError as exc:
        raise GluingError(f"glued complex invalid: {exc}") from exc
    if glued.boundary_loops:
        raise GluingError("glued surface is not closed")
    return glued


# ---------------------------------------------------------------------------
# perturbation


def perturb_metric(
    surface: DiscreteSurface,
    amplitude: float,
    seed: int,
    support: Iterable[int] | None = None,
) -> DiscreteSurface:
    """Multiply supported edge lengths by (1 + delta), |delta| <= amplitude.

    Only edges all of whose incident faces lie in ``support`` are perturbed,
    so the complement of the support (e.g. the fixed sphere part of a glued
    surface) is untouched.  Deterministic for a fixed seed.
    """
    if not 0 < amplitude < 0.1:
        raise PerturbationError("relative amplitude must be in (0, 0.1)")
    if support is None:
        supported_faces = set(range(len(surface.faces)))
    else:
        supported_faces = set(int(i) for i in support)
    ef = surface.edge_faces()
    target = [
        e for e in sorted(surface.edge_lengths)
        if ef[e] and all(t in supported_faces for t in ef[e])
    ]
    if not target:
        return surface
    rng = np.random.default_rng(seed)
    deltas = rng.uniform(-amplitude, amplitude, size=len(target))
    lengths = dict(surface.edge_lengths)
    for e, d in zip(target, deltas):
        lengths[e] = lengths[e] * (1.0 + float(d))
    try:
        return DiscreteSurface(
            surface.faces, lengths, embedding=surface.embedding,
            marked_vertex=surface.marked_vertex, face_groups=surface.face_groups,
        )
    except InvalidSurfaceError as exc:
        raise PerturbationError(
            f"perturbation broke the triangle inequality: {exc}"
        ) from exc
