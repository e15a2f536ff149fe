"""Laplace-Beltrami eigenfunctions, nodal sets and induced contact forms
on intrinsic triangle meshes."""

from .contact import (
    InducedContactForm,
    TightnessVerdict,
    Verdict,
    classify_tightness,
    induce_contact_form,
    verify_contact_condition,
    verify_curl_eigenform,
)
from .experiments import (
    SweepConfig,
    SweepReport,
    emit_report,
    run_epsilon_sweep,
    run_reference,
)
from .nodal import (
    NodalReport,
    NodalSet,
    analyze,
    check_containment,
    count_nodal_domains,
    extract_nodal_set,
    is_contractible,
)
from .spectral import (
    EigenPair,
    OperatorPair,
    assemble,
    dense_oracle,
    solve_lowest,
    spectral_gap_report,
)
from .surface import (
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

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
