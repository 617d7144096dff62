import json

import pytest

from helidiff.classify import SampleSpec, classify
from helidiff.errors import ContractViolation
from helidiff.geometry import VolumeWeight
from helidiff.operators import catalog_operator, symplectic_operator

SPEC = SampleSpec(n_samples=128, seed=3)

PAPER_LABELS = {
    "uniform_z": "poisson",
    "grad_casimir": "poisson",
    "lambda_grad_casimir": "poisson",
    "euler_rigid_body": "poisson",
    "beltrami": "strong_beltrami",
    "spiral": "strong_beltrami",
    "antisym": "general_antisymmetric",
    "unit_norm": "general_antisymmetric",
    "landau_lifshitz": "general_antisymmetric",
}


@pytest.mark.parametrize("name,expected", sorted(PAPER_LABELS.items()))
def test_catalog_labels(name, expected):
    report = classify(catalog_operator(name), sample_spec=SPEC)
    assert report.label == expected


def test_symplectic_label():
    for m in (1, 2):
        report = classify(symplectic_operator(m), sample_spec=SPEC)
        assert report.label == "symplectic"


def test_label_invariants_hold_on_reports():
    for name in PAPER_LABELS:
        r = classify(catalog_operator(name), sample_spec=SPEC)
        if r.label == "poisson":
            assert r.stats["jacobi_residual"]["max_abs"] <= r.tolerance
        if r.label in ("beltrami", "strong_beltrami"):
            assert r.stats["charge"]["max_abs"] <= r.tolerance
        if r.label == "strong_beltrami":
            assert r.stats["b_norm"]["max_abs"] <= r.tolerance


def test_beltrami_report_details():
    r = classify(catalog_operator("beltrami"), sample_spec=SPEC)
    assert r.label == "strong_beltrami"
    assert abs(r.stats["jacobi_residual"]["max_abs"] - 2.0) < 1e-9
    assert abs(r.stats["h"]["mean_abs"] - 2.0) < 1e-9


def test_poisson_wins_over_measure_preserving():
    # curl-free Poisson operators also pass the measure-preserving test;
    # the more specific end of the chain is reported
    r = classify(catalog_operator("grad_casimir"), sample_spec=SPEC)
    assert r.stats["cocurrent_residual"]["max_abs"] <= r.tolerance
    assert r.label == "poisson"


def test_lambda_operator_with_inverse_lambda_measure_still_poisson():
    op = catalog_operator("lambda_grad_casimir")
    g = VolumeWeight(g=lambda p: 1.0 / op.lam(p), name="1/lambda")
    r = classify(op, g=g, sample_spec=SPEC)
    assert r.label == "poisson"
    assert r.stats["cocurrent_residual"]["max_abs"] <= r.tolerance


def test_report_serialization_schema():
    r = classify(catalog_operator("antisym"), sample_spec=SPEC)
    d = json.loads(r.to_json())
    assert set(d) == {"operator", "g", "label", "tolerance", "n_samples", "stats"}
    assert d["operator"] == "antisym"
    assert d["g"] == "unity"
    assert set(d["stats"]) == {"h", "b_norm", "charge", "jacobi_residual",
                               "cocurrent_residual"}
    assert set(d["stats"]["h"]) == {"max_abs", "mean_abs", "rms"}


def test_minimum_sample_count_enforced():
    with pytest.raises(ContractViolation):
        classify(catalog_operator("beltrami"),
                 sample_spec=SampleSpec(n_samples=10))


def test_fd_only_operator_uses_relaxed_tolerance():
    op = catalog_operator("beltrami")
    op.jac = None
    r = classify(op, sample_spec=SampleSpec(n_samples=128, seed=9))
    assert r.tolerance == 1e-3
    assert r.label == "strong_beltrami"


def test_landau_lifshitz_sampled_away_from_origin():
    op = catalog_operator("landau_lifshitz")
    r = classify(op, sample_spec=SampleSpec(n_samples=128, seed=5))
    assert r.n_samples == 128
    assert r.label == "general_antisymmetric"
