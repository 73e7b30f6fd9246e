import pytest

from eistwist.group import cusp_set
from eistwist.newform import NewformData, PsiCache


@pytest.fixture(scope="session")
def nf37():
    return NewformData.canonical(2000)


@pytest.fixture(scope="session")
def psi37(nf37):
    return PsiCache(nf37)


@pytest.fixture(scope="session")
def nf1():
    return NewformData.zero(1)


@pytest.fixture(scope="session")
def inf37():
    return cusp_set(37)[0]


@pytest.fixture(scope="session")
def inf1():
    return cusp_set(1)[0]
