"""Contact form induced by a Laplace eigenfunction on a thickened surface.

The form alpha = f dt + beta never needs a 3-d mesh: in the product metric
all of its data is the eigenfunction f, the surface 1-form beta and the
constant curl eigenvalue lambda with lambda^2 the Laplace eigenvalue.
beta is obtained by rotating df with the diagonal (cotangent-weight)
Hodge star, so the first-order relation between df and beta holds by
construction; the second-order relation is a genuine residual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ContactConditionError, NodalContactError
from .nodal import NodalReport
from .spectral import EigenPair, OperatorPair, assemble, cotangent_weights
from .surface import DiscreteSurface, EdgeKey, edge_key

CONTACT_THRESHOLD_REL = 1e-8


@dataclass
class InducedContactForm:
    """(f, beta, lambda) data of alpha = f dt + beta on surface x (-1, 1).

    ``beta`` maps each sorted edge key to the value on the edge oriented
    from the smaller to the larger vertex id; the opposite orientation
    negates the value.
    """

    f: np.ndarray
    beta: dict[EdgeKey, float]
    lambda_contact: float
    surface_ref: str

    def beta_oriented(self, i: int, j: int) -> float:
        v = self.beta[edge_key(i, j)]
        return v if i < j else -v


class Verdict(str, Enum):
    TIGHT = "Tight"
    OVERTWISTED = "Overtwisted"
    INDETERMINATE = "Indeterminate"


@dataclass
class TightnessVerdict:
    verdict: Verdict
    reason: str
    component_count: int
    contractible_flags: list[bool]
    genus: int
    near_singular: bool


def induce_contact_form(surface: DiscreteSurface, pair: EigenPair) -> InducedContactForm:
    """Rotate df into beta = (w_e / lambda) df and take lambda = sqrt(eig)."""
    if pair.eigenvalue <= 0:
        raise NodalContactError(
            "contact form needs a positive eigenvalue (lambda_0 excluded)"
        )
    if len(pair.eigenfunction) != surface.n_vertices:
        raise NodalContactError("eigenpair does not match the surface")
    lam = math.sqrt(pair.eigenvalue)
    idx = surface.vertex_index
    f = np.asarray(pair.eigenfunction, dtype=float)
    weights = cotangent_weights(surface)
    beta = {
        e: weights[e] * (f[idx[e[1]]] - f[idx[e[0]]]) / lam
        for e in sorted(surface.edge_lengths)
    }
    return InducedContactForm(f=f, beta=beta, lambda_contact=lam,
                              surface_ref=surface.ref)


@dataclass
class ContactConditionReport:
    min_q: float
    max_q: float
    argmin_vertex: int
    positive: bool
    threshold: float


def verify_contact_condition(form: InducedContactForm,
                             surface: DiscreteSurface) -> ContactConditionReport:
    """Pointwise q = f^2 + |df|^2 / lambda^2; alpha vanishes iff q does.

    |df|^2 is the mass-lumped Dirichlet energy density, so q = 0 at a vertex
    exactly when both f and the local gradient energy vanish (a singular
    point of the nodal set).
    """
    if form.surface_ref != surface.ref:
        raise NodalContactError("form does not belong to this surface")
    idx = surface.vertex_index
    f = form.f
    lam = form.lambda_contact
    weights = cotangent_weights(surface)
    energy = np.zeros(surface.n_vertices)
    for (i, j), w in weights.items():
        d = f[idx[j]] - f[idx[i]]
        contrib = w * d * d  # edge share of the Dirichlet energy integral
        energy[idx[i]] += 0.5 * contrib
        energy[idx[j]] += 0.5 * contrib
    ops = assemble(surface)
    density = energy / ops.lumped_areas
    q = f * f + density / (lam * lam)
    amin = int(np.argmin(q))
    threshold = CONTACT_THRESHOLD_REL * float(q.max())
    return ContactConditionReport(
        min_q=float(q[amin]),
        max_q=float(q.max()),
        argmin_vertex=surface.vertices[amin],
        positive=bool(q[amin] > threshold),
        threshold=threshold,
    )


@dataclass
class CurlResiduals:
    r1: float
    r2: float


def verify_curl_eigenform(form: InducedContactForm, surface: DiscreteSurface,
                          ops: OperatorPair | None = None) -> CurlResiduals:
    """First-order residuals of the curl eigenform identities.

    r1 checks beta against the rotated df it was built from (zero up to
    round-off).  r2 evaluates the circulation of beta over dual cells,
    converts the resulting dual 2-form to a function through the consistent
    Galerkin mass, and compares with lambda * f; the lumped/consistent
    mismatch is the Hodge-star commutation error and shrinks under
    refinement.
    """
    if form.surface_ref != surface.ref:
        raise NodalContactError("form does not belong to this surface")
    if ops is None:
        ops = assemble(surface)
    idx = surface.vertex_index
    f = form.f
    lam = form.lambda_contact
    weights = cotangent_weights(surface)
    target = np.array([
        weights[e] * (f[idx[e[1]]] - f[idx[e[0]]]) for e in sorted(surface.edge_lengths)
    ])
    beta_vec = np.array([form.beta[e] for e in sorted(surface.edge_lengths)])
    denom = float(np.linalg.norm(target))
    r1 = float(np.linalg.norm(lam * beta_vec - target)) / denom if denom > 0 else 0.0

    # dual-cell circulation of beta is the weighted graph Laplacian of f
    circulation = (ops.stiffness @ f) / lam
    Mc = ops.consistent_mass
    if Mc is None:
        raise NodalContactError("operator pair lacks a consistent mass matrix")
    star_d_beta = spla.spsolve(Mc.tocsc(), circulation)
    err = star_d_beta - lam * f
    num = float(np.sqrt(err @ (ops.mass @ err)))
    den = float(np.sqrt(f @ (ops.mass @ f)))
    return CurlResiduals(r1=r1, r2=num / den)


def classify_tightness(surface: DiscreteSurface,
                       report: NodalReport) -> TightnessVerdict:
    """Giroux's criterion applied to the dividing set read off the report."""
    if report.component_count < 1:
        raise ContactConditionError(
            "empty nodal set: not a convex-surface dividing configuration"
        )
    genus = surface.genus
    if report.near_singular:
        verdict = Verdict.INDETERMINATE
        reason = "nodal extraction flagged near-singular vertices"
    elif genus == 0:
        if report.component_count == 1:
            verdict = Verdict.TIGHT
            reason = "sphere with a single dividing circle"
        else:
            verdict = Verdict.OVERTWISTED
            reason = f"sphere with {report.component_count} dividing circles"
    else:
        if any(report.contractible_flags):
            verdict = Verdict.OVERTWISTED
            reason = "a dividing component bounds a disc"
        else:
            verdict = Verdict.TIGHT
            reason = "no dividing component is contractible"
    return TightnessVerdict(
        verdict=verdict,
        reason=reason,
        component_count=report.component_count,
        contractible_flags=list(report.contractible_flags),
        genus=genus,
        near_singular=report.near_singular,
    )


# ---------------------------------------------------------------------------
# export


def form_to_json(form: InducedContactForm) -> dict:
    return {
        "lambda": form.lambda_contact,
        "f": [float(x) for x in form.f],
        "beta": {f"{i}->{j}": float(v) for (i, j), v in sorted(form.beta.items())},
    }


def save_form(form: InducedContactForm, path) -> None:
    with open(path, "w") as fh:
        json.dump(form_to_json(form), fh)
        fh.write("\n")
