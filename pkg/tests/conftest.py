from pathlib import Path

import pytest

import crossctx as cc

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def tagdemo_root():
    return FIXTURES / "tagdemo"


@pytest.fixture(scope="session")
def pkgdemo_root():
    return FIXTURES / "pkgdemo"


@pytest.fixture(scope="session")
def minimal_root():
    return FIXTURES / "minimal"


@pytest.fixture(scope="session")
def tagdemo_graph(tagdemo_root):
    return cc.build_graph(tagdemo_root)


@pytest.fixture(scope="session")
def pkgdemo_graph(pkgdemo_root):
    return cc.build_graph(pkgdemo_root)


@pytest.fixture(scope="session")
def minimal_graph(minimal_root):
    return cc.build_graph(minimal_root)
