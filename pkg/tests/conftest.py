from __future__ import annotations

import pytest

from symsq.qexp import delta_eigenform, reference_newform

# large enough for the AFE at Y in [1/4, 4], the moment sums and the Voronoi duals used here
FORM_PRECISION = 60_000


@pytest.fixture(scope="session")
def delta():
    return delta_eigenform(FORM_PRECISION)


@pytest.fixture(scope="session")
def g5():
    return reference_newform(FORM_PRECISION)


@pytest.fixture(scope="session")
def delta_small():
    return delta_eigenform(4000)


@pytest.fixture(scope="session")
def g5_small():
    return reference_newform(4000)
