import os
from pathlib import Path

import pytest

from ctxlm import Vocabulary

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("CTXLM"):
            monkeypatch.delenv(key)


@pytest.fixture(scope="session")
def loopdemo_root():
    return FIXTURES / "loopdemo"


@pytest.fixture(scope="session")
def bundles20_path():
    return FIXTURES / "bundles20.jsonl"


@pytest.fixture
def toy_vocab():
    return Vocabulary.from_texts(["abcde(). \n#"])
