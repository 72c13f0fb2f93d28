import numpy as np
import pytest

from boxquery.synthetic import toy_collaboration_graph


@pytest.fixture(scope="session")
def kg_t():
    """Seven-entity collaboration graph used across the suite.

    Edges: works_on(Alice,T1), works_on(Bob,T1), works_on(Bob,T2),
    related(T1,P1), related(T1,P2), related(T2,P3).
    """
    return toy_collaboration_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def ids(kg, *labels):
    """Entity ids for a list of labels, convenience for assertions."""
    return [kg.entity_id(x) for x in labels]
