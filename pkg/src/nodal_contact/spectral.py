"""Cotangent Laplace-Beltrami assembly and low-eigenpair solves.

Sign convention: the operator is the positive one (stiffness S is PSD), so
the eigenproblem reads ``S f = lambda B f`` with lambda >= 0.  The contact
module uses the positive square root of lambda as its curl eigenvalue.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.io import mmwrite

from .errors import InvalidSurfaceError, SizeGuardError, SolverError
from .surface import DiscreteSurface, edge_key, triangle_area

DENSE_GUARD = 2000
SIMPLICITY_THRESHOLD = 1e-8


@dataclass
class OperatorPair:
    """Sparse stiffness/mass discretization of the Laplacian on a surface."""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    surface_ref: str
    consistent_mass: sp.csr_matrix | None = None

    @property
    def n(self) -> int:
        return self.stiffness.shape[0]

    @property
    def lumped_areas(self) -> np.ndarray:
        return np.asarray(self.mass.diagonal())


@dataclass
class EigenPair:
    index: int
    eigenvalue: float
    eigenfunction: np.ndarray
    residual: float


def cotangent_weights(surface: DiscreteSurface) -> dict[tuple[int, int], float]:
    """Per-edge cotangent weight (cot a + cot b)/2 from edge lengths alone."""
    el = surface.edge_lengths
    weights: dict[tuple[int, int], float] = {e: 0.0 for e in surface.edge_lengths}
    for t, (i, j, k) in enumerate(surface.faces):
        a = el[edge_key(j, k)]
        b = el[edge_key(k, i)]
        c = el[edge_key(i, j)]
        area = triangle_area(a, b, c)
        if area <= 0.0 or not np.isfinite(area):
            raise InvalidSurfaceError(f"face {t} {(i, j, k)} is numerically degenerate")
        # cot of the angle at the corner opposite each edge
        weights[edge_key(j, k)] += (b * b + c * c - a * a) / (8.0 * area)
        weights[edge_key(k, i)] += (a * a + c * c - b * b) / (8.0 * area)
        weights[edge_key(i, j)] += (a * a + b * b - c * c) / (8.0 * area)
    for e, w in weights.items():
        if not np.isfinite(w):
            raise InvalidSurfaceError(f"cotangent overflow on edge {e}")
    return weights


def assemble(surface: DiscreteSurface, lumped: bool = True) -> OperatorPair:
    """Cotangent stiffness and barycentric lumped mass.

    Natural (free) boundary conditions: no rows are constrained.  The
    consistent Galerkin mass is assembled alongside for residual checks.
    """
    n = surface.n_vertices
    idx = surface.vertex_index
    weights = cotangent_weights(surface)
    rows, cols, vals = [], [], []
    for (i, j), w in weights.items():
        a, b = idx[i], idx[j]
        rows += [a, b, a, b]
        cols += [b, a, a, b]
        vals += [-w, -w, w, w]
    S = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    areas = surface.face_areas
    lump = np.zeros(n)
    mr, mc, mv = [], [], []
    for t, f in enumerate(surface.faces):
        third = areas[t] / 3.0
        ia, ib, ic = (idx[v] for v in f)
        for v in (ia, ib, ic):
            lump[v] += third
        for p in (ia, ib, ic):
            mr.append(p)
            mc.append(p)
            mv.append(areas[t] / 6.0)
        for p, q in ((ia, ib), (ib, ic), (ic, ia)):
            mr += [p, q]
            mc += [q, p]
            mv += [areas[t] / 12.0, areas[t] / 12.0]
    Mc = sp.coo_matrix((mv, (mr, mc)), shape=(n, n)).tocsr()
    B = sp.diags(lump).tocsr() if lumped else Mc
    return OperatorPair(stiffness=S, mass=B, surface_ref=surface.ref,
                        consistent_mass=Mc)


def _finalize(ops: OperatorPair, values: np.ndarray,
              vectors: np.ndarray) -> list[EigenPair]:
    """Sort, B-normalize, fix signs and attach residuals."""
    order = np.argsort(values)
    values = values[order]
    vectors = vectors[:, order]
    S, B = ops.stiffness, ops.mass
    area = float(ops.lumped_areas.sum())
    pairs = []
    for k in range(len(values)):
        f = vectors[:, k]
        nrm = float(np.sqrt(f @ (B @ f)))
        f = f / nrm
        s = float(ops.lumped_areas @ f)
        if abs(s) >= 1e-12 * np.sqrt(area):
            if s < 0:
                f = -f
        else:
            nz = np.flatnonzero(np.abs(f) > 1e-12 * np.abs(f).max())
            if nz.size and f[nz[0]] < 0:
                f = -f
        bf = B @ f
        res = float(np.linalg.norm(S @ f - values[k] * bf) / np.linalg.norm(bf))
        pairs.append(EigenPair(index=k, eigenvalue=float(values[k]),
                               eigenfunction=f, residual=res))
    return pairs


def solve_lowest(ops: OperatorPair, k: int, tol: float = 1e-10,
                 seed: int = 0) -> list[EigenPair]:
    """The k+1 lowest eigenpairs of S f = lambda B f via shift-invert ARPACK.

    Deterministic up to sign for a fixed seed; each returned residual is
    checked against ``tol``.
    """
    n = ops.n
    if not (0 <= k < n - 1):
        raise SolverError(f"need 0 <= k < {n - 1}, got {k}")
    if not (1e-12 <= tol <= 1e-4):
        raise SolverError("tol must lie in [1e-12, 1e-4]")
    area = float(ops.lumped_areas.sum())
    sigma = -0.1 / area
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    try:
        values, vectors = spla.eigsh(
            ops.stiffness, k=k + 1, M=ops.mass, sigma=sigma, which="LM",
            v0=v0, maxiter=10_000, tol=0.0,
        )
    except (spla.ArpackNoConvergence, RuntimeError) as exc:
        raise SolverError(f"eigensolver failed: {exc}") from exc
    pairs = _finalize(ops, values, vectors)
    worst = max(p.residual for p in pairs)
    lam_scale = max(abs(pairs[-1].eigenvalue), 1.0 / area)
    if worst > max(tol * lam_scale, tol):
        raise SolverError(f"residual {worst:.3e} exceeds tolerance {tol:.1e}")
    return pairs


def dense_oracle(ops: OperatorPair, k: int) -> list[EigenPair]:
    """Full dense generalized eigensolve; the brute-force cross-check."""
    n = ops.n
    if n > DENSE_GUARD:
        raise SizeGuardError(f"dense oracle limited to {DENSE_GUARD} vertices, got {n}")
    if not (0 <= k < n):
        raise SolverError(f"need 0 <= k < {n}, got {k}")
    S = ops.stiffness.toarray()
    B = ops.mass.toarray()
    values, vectors = scipy.linalg.eigh(S, B, subset_by_index=[0, k])
    return _finalize(ops, values, vectors)


@dataclass
class GapReport:
    min_relative_gap: float
    simple: bool
    threshold: float = SIMPLICITY_THRESHOLD
    gaps: list[float] = field(default_factory=list)


def spectral_gap_report(pairs: list[EigenPair],
                        threshold: float = SIMPLICITY_THRESHOLD) -> GapReport:
    """Relative gaps between consecutive eigenvalues above lambda_0."""
    if len(pairs) < 2:
        raise SolverError("need at least two eigenpairs for a gap report")
    lams = [p.eigenvalue for p in pairs]
    gaps = []
    for i in range(1, len(lams) - 1):
        denom = max(abs(lams[i + 1]), abs(lams[i]), 1e-300)
        gaps.append((lams[i + 1] - lams[i]) / denom)
    if not gaps:
        # only lambda_0 and lambda_1: nothing to collide
        return GapReport(min_relative_gap=float("inf"), simple=True,
                         threshold=threshold, gaps=[])
    mg = min(gaps)
    return GapReport(min_relative_gap=float(mg), simple=bool(mg > threshold),
                     threshold=threshold, gaps=[float(g) for g in gaps])


# ---------------------------------------------------------------------------
# export


def export_matrix_market(ops: OperatorPair, stiffness_path, mass_path) -> None:
    mmwrite(str(stiffness_path), ops.stiffness.tocoo())
    mmwrite(str(mass_path), ops.mass.tocoo())


def eigenpairs_to_json(pairs: list[EigenPair]) -> list[dict]:
    return [
        {
            "index": p.index,
            "eigenvalue": p.eigenvalue,
            "residual": p.residual,
            "values": [float(x) for x in p.eigenfunction],
        }
        for p in pairs
    ]


def save_eigenpairs(pairs: list[EigenPair], path) -> None:
    with open(path, "w") as fh:
        json.dump(eigenpairs_to_json(pairs), fh)
        fh.write("\n")


def load_eigenpairs(path) -> list[EigenPair]:
    with open(path) as fh:
        raw = json.load(fh)
    return [
        EigenPair(index=d["index"], eigenvalue=d["eigenvalue"],
                  eigenfunction=np.array(d["values"]), residual=d["residual"])
        for d in raw
    ]
