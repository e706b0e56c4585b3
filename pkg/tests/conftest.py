from __future__ import annotations

import pytest

from labgate.tasks import bundled_suite_path, load_suite


@pytest.fixture(scope="session")
def suite():
    return load_suite(bundled_suite_path())


@pytest.fixture(scope="session")
def registry(suite):
    return suite.registry


@pytest.fixture(scope="session")
def registry_text():
    return (bundled_suite_path() / "registry.json").read_text()
