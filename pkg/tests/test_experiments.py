"""Sweep configuration, reference construction and report emission."""

from __future__ import annotations

import json

import pytest

from nodal_contact.errors import NodalContactError
from nodal_contact.experiments import (
    SweepConfig,
    emit_report,
    run_epsilon_sweep,
    run_reference,
)


@pytest.fixture(scope="module")
def short_config():
    return SweepConfig(genus=1, epsilon_schedule=[1.0, 0.25, 0.0625],
                       k_eigs=3, seed=7)


@pytest.fixture(scope="module")
def short_sweep(short_config):
    return run_epsilon_sweep(short_config)


# ---------------------------------------------------------------------------
# config


def test_config_defaults():
    cfg = SweepConfig()
    assert cfg.genus == 1
    assert cfg.epsilon_schedule[0] == 1.0
    assert cfg.epsilon_schedule[-1] == pytest.approx(2.0 ** -8)
    assert len(cfg.epsilon_schedule) == 9
    assert cfg.epsilon0 == 1.0
    assert cfg.k_eigs == 5


def test_config_validation():
    with pytest.raises(NodalContactError):
        SweepConfig(epsilon_schedule=[])
    with pytest.raises(NodalContactError):
        SweepConfig(epsilon_schedule=[0.5, 1.0])  # increasing
    with pytest.raises(NodalContactError):
        SweepConfig(epsilon_schedule=[1.0, -0.5])
    with pytest.raises(NodalContactError):
        SweepConfig(genus=0)
    with pytest.raises(NodalContactError):
        SweepConfig(epsilon0=0.5)  # below max(schedule)
    with pytest.raises(NodalContactError):
        SweepConfig(k_eigs=1)


def test_config_json_round_trip():
    cfg = SweepConfig(genus=2, epsilon_schedule=[0.5, 0.125], seed=3)
    back = SweepConfig.from_json(cfg.to_json())
    assert back == cfg


def test_config_rejects_unknown_fields():
    with pytest.raises(NodalContactError):
        SweepConfig.from_json({"genus": 1, "bogus": 2})
    with pytest.raises(NodalContactError):
        SweepConfig.from_json([1, 2])


# ---------------------------------------------------------------------------
# reference


def test_reference_properties(short_config):
    ref = run_reference(short_config)
    lam = [p.eigenvalue for p in ref.eigenpairs]
    assert abs(lam[0]) < 1e-8
    assert lam[1] == pytest.approx(2.0, rel=0.1)
    assert ref.margin > short_config.epsilon0
    assert ref.nodal_domains == 2
    assert ref.surface.marked_vertex is not None
    assert abs(ref.surface.angle_defects()[ref.surface.marked_vertex]) < 1e-12


# ---------------------------------------------------------------------------
# sweep


def test_sweep_structure(short_config, short_sweep):
    rep = short_sweep
    assert len(rep.per_epsilon) == len(short_config.epsilon_schedule)
    assert len(rep.reference_eigenvalues) == short_config.k_eigs
    assert rep.final_verdict
    for rec in rep.per_epsilon:
        assert not rec.failed
        assert len(rec.eigenvalues) == short_config.k_eigs
        assert rec.sign_change_on_sphere


def test_sweep_containment_transition(short_sweep):
    """Once containment holds it keeps holding at smaller epsilon."""
    contained = [rec.contained for rec in short_sweep.per_epsilon]
    first = contained.index(True)
    assert all(contained[first:])


def test_sweep_error_shrinks(short_sweep):
    table = short_sweep.convergence_table
    assert table[-1][1] < table[0][1]


def test_sweep_deterministic(short_config, short_sweep):
    again = run_epsilon_sweep(short_config)
    assert again.to_json() == short_sweep.to_json()


# ---------------------------------------------------------------------------
# emission


def test_emit_report_files(tmp_path, short_config, short_sweep):
    files = emit_report(short_sweep, tmp_path / "out")
    assert "report.csv" in files
    assert "report.json" in files
    assert "summary.txt" in files
    csv_lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
    expected = len(short_config.epsilon_schedule) * short_config.k_eigs
    assert len(csv_lines) == expected + 1
    assert csv_lines[0] == ("epsilon,k,lambda,abs_err,components,"
                            "contractible,contained,verdict")
    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert "Overtwisted: YES" in summary


def test_emit_report_byte_deterministic(tmp_path, short_sweep):
    emit_report(short_sweep, tmp_path / "a")
    emit_report(short_sweep, tmp_path / "b")
    for name in ("report.csv", "report.json", "summary.txt"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes())


def test_report_json_is_valid(tmp_path, short_sweep):
    emit_report(short_sweep, tmp_path / "o")
    with open(tmp_path / "o" / "report.json") as fh:
        data = json.load(fh)
    assert data["final_verdict"] is True
    assert len(data["per_epsilon"]) == len(short_sweep.per_epsilon)
    assert data["per_epsilon"][-1]["verdict"] == "Overtwisted"
