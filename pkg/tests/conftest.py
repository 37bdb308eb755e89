from __future__ import annotations

import json

import pytest

from riskstruct import Catalog, construct_rs, load_catalog, quotient
from riskstruct.catalogs import catalog_path
from riskstruct.serialize import catalog_from_dict


@pytest.fixture(scope="session")
def r2_catalog() -> Catalog:
    return load_catalog(str(catalog_path("tunnel-exit-r2")))


@pytest.fixture(scope="session")
def r3_catalog() -> Catalog:
    return load_catalog(str(catalog_path("tunnel-exit-r3")))


@pytest.fixture(scope="session")
def r2_model(r2_catalog):
    model, log = construct_rs(r2_catalog)
    return model


@pytest.fixture(scope="session")
def r3_model(r3_catalog):
    model, log = construct_rs(r3_catalog)
    return model


@pytest.fixture(scope="session")
def r2_reduced(r2_model):
    return quotient(r2_model, "m")


@pytest.fixture(scope="session")
def r2_variant_catalog() -> Catalog:
    """The bundled catalog with its optional (disabled) rules switched on."""
    data = json.loads(catalog_path("tunnel-exit-r2").read_text())
    for section in ("endangerments", "mishaps", "mitigations"):
        for rule in data[section]:
            rule["enabled"] = True
    return catalog_from_dict(data)


@pytest.fixture(scope="session")
def r2_variant_model(r2_variant_catalog):
    model, _ = construct_rs(r2_variant_catalog)
    return model


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {name}: {outcome}", flush=True)
