from pathlib import Path

import pytest

from rhobound import load

CORPUS = Path(__file__).resolve().parents[1] / "src" / "rhobound" / "corpus"


def corpus_files():
    return sorted(CORPUS.glob("*.koat"))


@pytest.fixture(scope="session")
def facsum():
    return load(CORPUS / "facsum.koat")


@pytest.fixture(scope="session")
def facsum_result(facsum):
    from rhobound.analysis import analyze

    return analyze(facsum)
