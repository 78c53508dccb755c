import numpy as np
import pytest

from povm_optics.simulator import CountTable

# Published 10 s counts: 1-fold (mu+, mu-, nu+, nu-), then scaled 2-fold
# (mu+nu+, mu+nu-, mu-nu+, mu-nu-).
PUBLISHED = {
    "AB": ((14718, 10474, 13156, 12587), (34, 69, 38, 40)),
    "BC": ((10660, 14781, 11902, 12103), (95, 47, 85, 63)),
    "CA": ((12883, 10586, 13764, 10940), (128, 39, 18, 24)),
}


def published_table(name: str) -> CountTable:
    mu, nu = name[0], name[1]
    one, two = PUBLISHED[name]
    outcomes = (f"{mu}+", f"{mu}-", f"{nu}+", f"{nu}-")
    pairs = [(f"{mu}+", f"{nu}+"), (f"{mu}+", f"{nu}-"), (f"{mu}-", f"{nu}+"), (f"{mu}-", f"{nu}-")]
    return CountTable(name, outcomes, dict(zip(outcomes, one)), dict(zip(pairs, two)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def published_tables():
    return [published_table(n) for n in ("AB", "BC", "CA")]
