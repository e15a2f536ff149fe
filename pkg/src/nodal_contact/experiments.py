"""Counterexample pipeline: a collapsing handle glued to a sphere.

A generic perturbed round sphere with a flat patch around a marked vertex
is the reference surface.  Removing the patch and gluing in a genus-g
handle whose metric is scaled by epsilon yields a family whose low
eigenvalues converge to the sphere's as epsilon -> 0, while the first
nodal line stays a single contractible circle inside the sphere part.
For genus >= 1 that dividing set makes the induced contact structure
overtwisted, even though the eigenfunction data is as nondegenerate as
it gets.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contact import TightnessVerdict, Verdict, classify_tightness
from .errors import NodalContactError, SolverError
from .nodal import NodalSet, analyze, nodal_svg
from .spectral import EigenPair, assemble, solve_lowest, spectral_gap_report
from .surface import (
    DiscreteSurface,
    GluedFamilySpec,
    build_flat_torus,
    build_genus_g,
    build_round_sphere,
    flatten_star,
    glue_family,
    perturb_metric,
    remove_vertex_star,
)

DEFAULT_SCHEDULE = [2.0 ** -i for i in range(9)]  # 1.0 down to 2^-8
MAX_REFERENCE_ATTEMPTS = 10
MAX_PERTURBATION_ATTEMPTS = 5


@dataclass
class SweepConfig:
    """Parameters of one glued-family sweep."""

    genus: int = 1
    epsilon_schedule: list[float] = field(
        default_factory=lambda: list(DEFAULT_SCHEDULE))
    epsilon0: float | None = None  # containment radius; defaults to max(schedule)
    sphere_subdivisions: int = 3
    handle_resolution: int = 12
    flat_radius: float = 0.15
    perturbation_amplitude: float = 0.02
    k_eigs: int = 5
    seed: int = 7

    def __post_init__(self):
        self.epsilon_schedule = [float(e) for e in self.epsilon_schedule]
        if not self.epsilon_schedule:
            raise NodalContactError("epsilon schedule is empty")
        if any(e <= 0 for e in self.epsilon_schedule):
            raise NodalContactError("epsilon schedule entries must be positive")
        if any(b >= a for a, b in zip(self.epsilon_schedule,
                                      self.epsilon_schedule[1:])):
            raise NodalContactError("epsilon schedule must be strictly decreasing")
        if self.epsilon0 is None:
            self.epsilon0 = max(self.epsilon_schedule)
        if self.epsilon0 < max(self.epsilon_schedule):
            raise NodalContactError("epsilon0 must be >= max(schedule)")
        if self.genus < 1:
            raise NodalContactError("genus must be >= 1")
        if self.k_eigs < 2:
            raise NodalContactError("k_eigs must be >= 2")

    def to_json(self) -> dict:
        return {
            "genus": self.genus,
            "epsilon_schedule": self.epsilon_schedule,
            "epsilon0": self.epsilon0,
            "sphere_subdivisions": self.sphere_subdivisions,
            "handle_resolution": self.handle_resolution,
            "flat_radius": self.flat_radius,
            "perturbation_amplitude": self.perturbation_amplitude,
            "k_eigs": self.k_eigs,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SweepConfig":
        if not isinstance(data, dict):
            raise NodalContactError("sweep config must be a JSON object")
        known = {
            "genus", "epsilon_schedule", "epsilon0", "sphere_subdivisions",
            "handle_resolution", "flat_radius", "perturbation_amplitude",
            "k_eigs", "seed",
        }
        unknown = set(data) - known
        if unknown:
            raise NodalContactError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class ReferenceResult:
    """The reference sphere M1 with its eigen-data and nodal margin."""

    surface: DiscreteSurface          # closed, flat star at marked_vertex
    eigenpairs: list[EigenPair]
    margin: float                     # geodesic distance nodal line <-> marked vertex
    nodal_domains: int
    seed_used: int


@dataclass
class EpsilonRecord:
    epsilon: float
    eigenvalues: list[float]
    component_count: int
    contractible: list[bool]
    contained: bool
    sign_change_on_sphere: bool
    verdict: str
    near_singular: bool
    sphere_part_drift: float
    failed: bool = False
    failure_reason: str = ""
    nodal: NodalSet | None = None
    surface: DiscreteSurface | None = None


@dataclass
class SweepReport:
    config: SweepConfig
    reference_eigenvalues: list[float]
    reference_margin: float
    per_epsilon: list[EpsilonRecord]
    final_verdict: bool

    @property
    def convergence_table(self) -> list[list[float]]:
        """|lambda_k(M_eps) - lambda_k(M1)| per schedule entry."""
        out = []
        for rec in self.per_epsilon:
            if rec.failed:
                out.append([float("nan")] * len(self.reference_eigenvalues))
            else:
                out.append([abs(l - r) for l, r in
                            zip(rec.eigenvalues, self.reference_eigenvalues)])
        return out

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "reference_eigenvalues": self.reference_eigenvalues,
            "reference_margin": self.reference_margin,
            "per_epsilon": [
                {
                    "epsilon": r.epsilon,
                    "eigenvalues": r.eigenvalues,
                    "component_count": r.component_count,
                    "contractible": r.contractible,
                    "contained": r.contained,
                    "sign_change_on_sphere": r.sign_change_on_sphere,
                    "verdict": r.verdict,
                    "near_singular": r.near_singular,
                    "sphere_part_drift": r.sphere_part_drift,
                    "failed": r.failed,
                    "failure_reason": r.failure_reason,
                }
                for r in self.per_epsilon
            ],
            "convergence_table": self.convergence_table,
            "final_verdict": self.final_verdict,
        }


def _marked_candidates(surface: DiscreteSurface) -> list[int]:
    vf = surface.vertex_faces()
    return [v for v in surface.vertices if len(vf[v]) == 6]


def _nodal_margin(surface: DiscreteSurface, nodal: NodalSet, center: int) -> float:
    """Geodesic distance from center to the nearest nodal crossing,
    measured to the crossed edges' endpoints (edge lengths are small)."""
    dist = surface.geodesic_distances([center])
    idx = surface.vertex_index
    best = float("inf")
    for comp in nodal.components:
        for (i, j), _t in comp:
            best = min(best, dist[idx[i]], dist[idx[j]])
    return float(best)


def run_reference(config: SweepConfig) -> ReferenceResult:
    """Perturbed sphere with a flat star around a well-placed marked vertex.

    Retries the perturbation seed until the tracked spectrum is simple and
    the first nodal line keeps a geodesic margin > epsilon0 from the marked
    vertex; the marked vertex is chosen where |f_1| is largest among flat
    candidates, which maximizes that margin.
    """
    last_problem = "no attempt made"
    for attempt in range(MAX_REFERENCE_ATTEMPTS):
        seed = config.seed + attempt
        base = perturb_metric(build_round_sphere(config.sphere_subdivisions),
                              amplitude=config.perturbation_amplitude, seed=seed)
        pairs = solve_lowest(assemble(base), config.k_eigs - 1, seed=seed)
        f1 = pairs[1].eigenfunction
        idx = base.vertex_index
        x0 = max(_marked_candidates(base), key=lambda v: (abs(f1[idx[v]]), -v))
        ref = flatten_star(base, x0, radius=config.flat_radius)
        ref = DiscreteSurface(ref.faces, ref.edge_lengths,
                              embedding=ref.embedding, marked_vertex=x0)
        pairs = solve_lowest(assemble(ref), config.k_eigs - 1, seed=seed)
        gaps = spectral_gap_report(pairs)
        if not gaps.simple:
            last_problem = f"spectrum not simple (seed {seed})"
            continue
        nodal, report = analyze(ref, pairs[1].eigenfunction)
        if report.near_singular:
            last_problem = f"near-singular nodal set (seed {seed})"
            continue
        if report.domain_count != 2 or report.component_count != 1:
            last_problem = f"unexpected nodal structure (seed {seed})"
            continue
        margin = _nodal_margin(ref, nodal, x0)
        if margin <= config.epsilon0:
            last_problem = f"nodal margin {margin:.3f} <= epsilon0 (seed {seed})"
            continue
        return ReferenceResult(surface=ref, eigenpairs=pairs, margin=margin,
                               nodal_domains=report.domain_count, seed_used=seed)
    raise SolverError(
        f"no admissible reference sphere in {MAX_REFERENCE_ATTEMPTS} attempts: "
        + last_problem
    )


def _build_handle(config: SweepConfig) -> DiscreteSurface:
    """One-holed genus-g piece with a regular hexagonal boundary ring."""
    n = config.handle_resolution
    ring_radius = 1.0 / (2.0 * n)
    if config.genus == 1:
        piece = build_flat_torus(n, n)
        center = 0
    else:
        piece = build_genus_g(config.genus, resolution=n)
        center = piece.marked_vertex
    piece = flatten_star(piece, center, radius=ring_radius)
    return remove_vertex_star(piece, center)


def _containment_region(reference: ReferenceResult, glued: DiscreteSurface,
                        epsilon0: float) -> list[int]:
    """Glued faces lying in the sphere part at geodesic distance >= epsilon0
    from the marked vertex, measured on the reference sphere (same labels)."""
    ref = reference.surface
    x0 = ref.marked_vertex
    dist = ref.geodesic_distances([x0])
    idx = ref.vertex_index
    region = []
    for t in glued.face_groups["sphere_part"]:
        face = glued.faces[t]
        if all(dist[idx[v]] >= epsilon0 for v in face):
            region.append(t)
    return region


def _sphere_part_drift(reference: ReferenceResult, glued: DiscreteSurface,
                       f_eps: np.ndarray) -> float:
    """max |f_1^eps - f_1| over shared sphere-part vertices, sign-aligned
    and sup-normalized; a qualitative stability diagnostic only."""
    ref = reference.surface
    x0 = ref.marked_vertex
    f_ref = reference.eigenpairs[1].eigenfunction
    shared = [v for v in ref.vertices if v != x0]
    ri = ref.vertex_index
    gi = glued.vertex_index
    a = np.array([f_ref[ri[v]] for v in shared])
    b = np.array([f_eps[gi[v]] for v in shared])
    a = a / np.abs(a).max()
    b = b / np.abs(b).max()
    if float(a @ b) < 0:
        b = -b
    return float(np.abs(a - b).max())


def run_epsilon_sweep(config: SweepConfig,
                      reference: ReferenceResult | None = None) -> SweepReport:
    """Glue, perturb the handle, solve and classify for every epsilon."""
    if reference is None:
        reference = run_reference(config)
    ref = reference.surface
    x0 = ref.marked_vertex
    sphere_part = remove_vertex_star(ref, x0)
    handle = _build_handle(config)
    records: list[EpsilonRecord] = []
    for i, eps in enumerate(config.epsilon_schedule):
        try:
            records.append(_run_one_epsilon(config, reference, sphere_part,
                                            handle, i, eps))
        except NodalContactError as exc:
            records.append(EpsilonRecord(
                epsilon=eps, eigenvalues=[], component_count=0,
                contractible=[], contained=False, sign_change_on_sphere=False,
                verdict=Verdict.INDETERMINATE.value, near_singular=False,
                sphere_part_drift=float("nan"), failed=True,
                failure_reason=str(exc),
            ))
    last = records[-1]
    final = (not last.failed
             and last.component_count == 1
             and all(last.contractible)
             and last.contained
             and last.verdict == Verdict.OVERTWISTED.value)
    return SweepReport(
        config=config,
        reference_eigenvalues=[p.eigenvalue for p in reference.eigenpairs],
        reference_margin=reference.margin,
        per_epsilon=records,
        final_verdict=final,
    )


def _run_one_epsilon(config: SweepConfig, reference: ReferenceResult,
                     sphere_part: DiscreteSurface, handle: DiscreteSurface,
                     index: int, eps: float) -> EpsilonRecord:
    glued = glue_family(GluedFamilySpec(
        sphere_part=sphere_part, handle_part=handle, epsilon=eps,
        flat_center=reference.surface.marked_vertex,
    ))
    support = glued.face_groups["handle_part"]
    pairs = None
    surf = glued
    for attempt in range(MAX_PERTURBATION_ATTEMPTS):
        seed = config.seed + 1000 * (index + 1) + attempt
        surf = perturb_metric(glued, amplitude=config.perturbation_amplitude,
                              seed=seed, support=support)
        cand = solve_lowest(assemble(surf), config.k_eigs - 1, seed=config.seed)
        if spectral_gap_report(cand).simple:
            pairs = cand
            break
    if pairs is None:
        raise SolverError(
            f"spectrum not simple after {MAX_PERTURBATION_ATTEMPTS} "
            f"perturbation attempts at epsilon {eps}"
        )
    region = _containment_region(reference, surf, config.epsilon0)
    nodal, report = analyze(surf, pairs[1].eigenfunction, region=region)
    verdict = classify_tightness(surf, report)
    sphere_vertices = sorted(
        {v for t in surf.face_groups["sphere_part"] for v in surf.faces[t]})
    gi = surf.vertex_index
    vals = np.array([pairs[1].eigenfunction[gi[v]] for v in sphere_vertices])
    return EpsilonRecord(
        epsilon=eps,
        eigenvalues=[p.eigenvalue for p in pairs],
        component_count=report.component_count,
        contractible=list(report.contractible_flags),
        contained=bool(report.containment_flags
                       and all(report.containment_flags)),
        sign_change_on_sphere=bool(vals.min() < 0.0 < vals.max()),
        verdict=verdict.verdict.value,
        near_singular=report.near_singular,
        sphere_part_drift=_sphere_part_drift(reference, surf,
                                             pairs[1].eigenfunction),
        nodal=nodal,
        surface=surf,
    )


# ---------------------------------------------------------------------------
# report emission


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def emit_report(report: SweepReport, out_dir) -> list[str]:
    """Write report.csv, report.json, summary.txt (and SVGs when the glued
    surfaces carry embeddings).  Byte-deterministic for identical reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "k", "lambda", "abs_err", "components",
                     "contractible", "contained", "verdict"])
    table = report.convergence_table
    for rec, errs in zip(report.per_epsilon, table):
        n_k = len(report.reference_eigenvalues)
        for k in range(n_k):
            lam = rec.eigenvalues[k] if not rec.failed else float("nan")
            writer.writerow([
                _fmt(rec.epsilon), k, _fmt(lam), _fmt(errs[k]),
                rec.component_count,
                int(bool(rec.contractible) and all(rec.contractible)),
                int(rec.contained), rec.verdict,
            ])
    (out / "report.csv").write_text(buf.getvalue())
    written.append("report.csv")

    with open(out / "report.json", "w") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append("report.json")

    for i, rec in enumerate(report.per_epsilon):
        if rec.failed or rec.surface is None or rec.surface.embedding is None:
            continue
        emb_ok = all(v in rec.surface.embedding
                     for e, _ in (c for comp in rec.nodal.components
                                  for c in comp)
                     for v in e)
        if not emb_ok:
            continue
        name = f"nodal_eps_{i}.svg"
        (out / name).write_text(nodal_svg(rec.surface, rec.nodal))
        written.append(name)

    lines = [
        "epsilon sweep summary",
        "=====================",
        f"genus: {report.config.genus}",
        f"schedule: {', '.join(_fmt(e) for e in report.config.epsilon_schedule)}",
        f"reference lambda_k: "
        f"{', '.join(_fmt(v) for v in report.reference_eigenvalues)}",
        f"reference nodal margin: {_fmt(report.reference_margin)} "
        f"(epsilon0 = {_fmt(report.config.epsilon0)})",
        "",
    ]
    for rec, errs in zip(report.per_epsilon, table):
        if rec.failed:
            lines.append(f"eps={_fmt(rec.epsilon)}  FAILED: {rec.failure_reason}")
            continue
        lines.append(
            f"eps={_fmt(rec.epsilon)}  lambda_1={_fmt(rec.eigenvalues[1])}  "
            f"|err_1|={_fmt(errs[1])}  components={rec.component_count}  "
            f"contractible={'yes' if all(rec.contractible) else 'no'}  "
            f"contained={'yes' if rec.contained else 'no'}  "
            f"verdict={rec.verdict}"
        )
    lines.append("")
    lines.append(f"Overtwisted: {'YES' if report.final_verdict else 'NO'}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    written.append("summary.txt")
    return written
