"""Command-line interface.

Exit codes: 0 success, 2 usage or input error, 3 solver failure,
4 contact-condition failure, 5 sweep verdict false.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .contact import (
    classify_tightness,
    induce_contact_form,
    save_form,
    verify_contact_condition,
    verify_curl_eigenform,
)
from .errors import (
    ContactConditionError,
    NodalContactError,
    SolverError,
)
from .experiments import (
    SweepConfig,
    _build_handle,
    run_epsilon_sweep,
    run_reference,
    emit_report,
)
from .nodal import analyze, nodal_svg, save_nodal
from .spectral import (
    assemble,
    dense_oracle,
    load_eigenpairs,
    save_eigenpairs,
    solve_lowest,
)
from .surface import (
    DiscreteSurface,
    GluedFamilySpec,
    build_flat_torus,
    build_genus_g,
    build_round_sphere,
    glue_family,
    remove_vertex_star,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_CONTACT = 4
EXIT_VERDICT = 5

ORACLE_AGREEMENT_TOL = 1e-8


def _load_surface(path: str) -> DiscreteSurface:
    p = Path(path)
    if not p.exists():
        raise NodalContactError(f"surface file not found: {path}")
    if p.suffix == ".off":
        return DiscreteSurface.read_off(p)
    return DiscreteSurface.load_json(p)


def cmd_mesh(args: argparse.Namespace) -> int:
    if args.generator == "sphere":
        surface = build_round_sphere(args.subdiv)
    elif args.generator == "torus":
        surface = build_flat_torus(args.n, args.m)
    elif args.generator == "genus":
        surface = build_genus_g(args.genus, resolution=args.resolution)
    else:  # glued
        config = SweepConfig(genus=args.genus, seed=args.seed)
        reference = run_reference(config)
        sphere_part = remove_vertex_star(reference.surface,
                                         reference.surface.marked_vertex)
        surface = glue_family(GluedFamilySpec(
            sphere_part=sphere_part, handle_part=_build_handle(config),
            epsilon=args.epsilon,
            flat_center=reference.surface.marked_vertex,
        ))
    surface.save_json(args.out)
    if args.off:
        surface.write_off(args.off)
    v = surface.n_vertices
    e = len(surface.edge_lengths)
    f = len(surface.faces)
    print(f"V={v} E={e} F={f} chi={v - e + f} genus={surface.genus} "
          f"boundary_loops={len(surface.boundary_loops)}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eig(args: argparse.Namespace) -> int:
    surface = _load_surface(args.surface)
    ops = assemble(surface)
    pairs = solve_lowest(ops, args.k, tol=args.tol, seed=args.seed)
    print("k  eigenvalue          residual")
    for p in pairs:
        print(f"{p.index}  {p.eigenvalue:.12e}  {p.residual:.3e}")
    if args.oracle:
        reference = dense_oracle(ops, args.k)
        worst = max(abs(a.eigenvalue - b.eigenvalue)
                    / max(abs(b.eigenvalue), 1.0)
                    for a, b in zip(pairs, reference))
        ok = worst <= ORACLE_AGREEMENT_TOL
        print(f"oracle agreement: {'PASS' if ok else 'FAIL'} "
              f"(max relative deviation {worst:.3e})")
        if not ok:
            return EXIT_SOLVER
    if args.out:
        save_eigenpairs(pairs, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _resolve_region(surface: DiscreteSurface, name: str) -> list[int]:
    if not surface.face_groups or name not in surface.face_groups:
        available = sorted(surface.face_groups) if surface.face_groups else []
        raise NodalContactError(
            f"face group {name!r} not present (available: {available})")
    return list(surface.face_groups[name])


def cmd_nodal(args: argparse.Namespace) -> int:
    surface = _load_surface(args.surface)
    pairs = load_eigenpairs(args.eigenpairs)
    if not (0 <= args.index < len(pairs)):
        raise NodalContactError(f"eigenpair index {args.index} out of range")
    pair = pairs[args.index]
    if len(pair.eigenfunction) != surface.n_vertices:
        raise NodalContactError("eigenpair does not match the surface")
    region = _resolve_region(surface, args.region) if args.region else None
    nodal, report = analyze(surface, pair.eigenfunction, region=region)
    print(f"components: {report.component_count}, domains: {report.domain_count}")
    contractible = [i for i, c in enumerate(report.contractible_flags) if c]
    print("contractible: "
          + (", ".join(map(str, contractible)) if contractible else "none"))
    courant_ok = report.domain_count <= args.index + 1
    print(f"courant bound (<= {args.index + 1}): "
          f"{'PASS' if courant_ok else 'FAIL'}")
    if report.near_singular:
        print("warning: near-singular vertices present")
    if report.containment_flags is not None:
        print("contained: "
              + ", ".join(str(bool(c)) for c in report.containment_flags))
    if args.out:
        save_nodal(nodal, args.out)
        print(f"wrote {args.out}")
    if args.svg:
        Path(args.svg).write_text(nodal_svg(surface, nodal))
        print(f"wrote {args.svg}")
    return EXIT_OK


def cmd_contact(args: argparse.Namespace) -> int:
    surface = _load_surface(args.surface)
    pairs = load_eigenpairs(args.eigenpairs)
    if not (0 <= args.index < len(pairs)):
        raise NodalContactError(f"eigenpair index {args.index} out of range")
    pair = pairs[args.index]
    if pair.eigenvalue <= 0:
        raise NodalContactError(
            "contact form needs a positive eigenvalue; pick index >= 1")
    form = induce_contact_form(surface, pair)
    condition = verify_contact_condition(form, surface)
    residuals = verify_curl_eigenform(form, surface)
    print(f"min q: {condition.min_q:.6e} at vertex {condition.argmin_vertex} "
          f"(threshold {condition.threshold:.3e})")
    print(f"r1: {residuals.r1:.3e}  r2: {residuals.r2:.3e}")
    if not condition.positive:
        print("contact condition FAILED: alpha ^ dalpha vanishes "
              f"near vertex {condition.argmin_vertex}")
        return EXIT_CONTACT
    _, report = analyze(surface, pair.eigenfunction)
    verdict = classify_tightness(surface, report)
    print(f"verdict: {verdict.verdict.value} ({verdict.reason})")
    if args.out:
        save_form(form, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise NodalContactError(f"cannot read config: {exc}") from exc
    else:
        raw = {}
    if args.genus is not None:
        raw["genus"] = args.genus
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.k is not None:
        raw["k_eigs"] = args.k
    config = SweepConfig.from_json(raw)
    report = run_epsilon_sweep(config)
    files = emit_report(report, args.out)
    print(f"wrote {', '.join(files)} to {args.out}")
    print(f"Overtwisted: {'YES' if report.final_verdict else 'NO'}")
    return EXIT_OK if report.final_verdict else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodal-contact",
        description="Laplace eigenfunctions, nodal sets and induced contact "
                    "structures on intrinsic triangle meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mesh = sub.add_parser("mesh", help="generate a surface descriptor")
    mesh_sub = mesh.add_subparsers(dest="generator", required=True)
    m_sphere = mesh_sub.add_parser("sphere")
    m_sphere.add_argument("--subdiv", type=int, default=3)
    m_torus = mesh_sub.add_parser("torus")
    m_torus.add_argument("--n", type=int, default=16)
    m_torus.add_argument("--m", type=int, default=16)
    m_genus = mesh_sub.add_parser("genus")
    m_genus.add_argument("--genus", type=int, default=2)
    m_genus.add_argument("--resolution", type=int, default=12)
    m_glued = mesh_sub.add_parser("glued")
    m_glued.add_argument("--genus", type=int, default=1)
    m_glued.add_argument("--epsilon", type=float, default=0.25)
    m_glued.add_argument("--seed", type=int, default=7)
    for m in (m_sphere, m_torus, m_genus, m_glued):
        m.add_argument("--out", required=True)
        m.add_argument("--off", default=None,
                       help="also write an OFF file (embedded surfaces only)")

    eig = sub.add_parser("eig", help="solve for the lowest eigenpairs")
    eig.add_argument("surface")
    eig.add_argument("--k", type=int, default=4)
    eig.add_argument("--tol", type=float, default=1e-10)
    eig.add_argument("--seed", type=int, default=0)
    eig.add_argument("--out", default=None)
    eig.add_argument("--oracle", action="store_true",
                     help="cross-check against a dense solve (small meshes)")

    nodal = sub.add_parser("nodal", help="analyze a nodal set")
    nodal.add_argument("surface")
    nodal.add_argument("eigenpairs")
    nodal.add_argument("--index", type=int, default=1)
    nodal.add_argument("--region", default=None,
                       help="face-group name for containment checks")
    nodal.add_argument("--out", default=None)
    nodal.add_argument("--svg", default=None)

    contact = sub.add_parser("contact", help="induce and verify a contact form")
    contact.add_argument("surface")
    contact.add_argument("eigenpairs")
    contact.add_argument("--index", type=int, default=1)
    contact.add_argument("--out", default=None)

    sweep = sub.add_parser("sweep", help="run the collapsing-handle sweep")
    sweep.add_argument("--config", default=None)
    sweep.add_argument("--genus", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--k", type=int, default=None)
    sweep.add_argument("--out", default="sweep_out")

    return parser


_COMMANDS = {
    "mesh": cmd_mesh,
    "eig": cmd_eig,
    "nodal": cmd_nodal,
    "contact": cmd_contact,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("NODAL_CONTACT_THREADS")
    limits = None
    if threads:
        try:
            from threadpoolctl import threadpool_limits
            limits = threadpool_limits(limits=int(threads))
        except (ImportError, ValueError):
            pass
    try:
        return _COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ContactConditionError as exc:
        print(f"contact-condition error: {exc}", file=sys.stderr)
        return EXIT_CONTACT
    except NodalContactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if limits is not None:
            limits.unregister()


if __name__ == "__main__":
    sys.exit(main())
