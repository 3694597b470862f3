import pytest

from flashtrack.codebook import generate_initial_codebook, generate_robust_codebook


@pytest.fixture(scope="session")
def robust_books():
    """Robust (book, lut) pairs for the small n used across tests."""
    return {n: generate_robust_codebook(n) for n in range(4, 13)}


@pytest.fixture(scope="session")
def initial_books():
    return {n: generate_initial_codebook(n) for n in range(2, 13)}
