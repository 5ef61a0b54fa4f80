import numpy as np
import pytest

from woodelf.formula_core import Cube, WeightedFormula
from woodelf.oracle import CharacteristicFunction
from woodelf.tree_model import Tree, TreeEnsemble, inner, leaf


@pytest.fixture
def golden_formula():
    """3(~x0) + 5(x0 & ~x2) + 2(x1 & x2 & ~x0); known values in the tests."""
    return WeightedFormula.wdnf([
        Cube((), (0,), 3.0),
        Cube((0,), (2,), 5.0),
        Cube((1, 2), (0,), 2.0),
    ], num_vars=3)


@pytest.fixture
def equivalent_formula():
    """A different cube list computing exactly the same function as
    golden_formula on every assignment."""
    return WeightedFormula.wdnf([
        Cube((0,), (), 5.0),
        Cube((2,), (), -5.0),
        Cube((), (0, 2), 3.0),
        Cube((2,), (0,), 10.0),
        Cube((2,), (0, 1), -2.0),
    ], num_vars=3)


GOLDEN_SHAPLEY = np.array([-7.0 / 6.0, 1.0 / 3.0, -13.0 / 6.0])
GOLDEN_BANZHAF = np.array([-1.0, 0.5, -2.0])


@pytest.fixture
def two_split_tree():
    """Feature 0 ("age") at the root, feature 1 ("sugar") on the left path.

    Node 3 is the age-and-sugar leaf with weight 4; rows (30, 20) and (70, 5)
    give the worked consumer/baseline patterns 2 and 1 there.
    """
    nodes = (
        inner(0, 50.0, 1, 2, cover=100.0),
        inner(1, 10.0, 3, 4, cover=50.0),
        leaf(0.0, cover=50.0),
        leaf(4.0, cover=25.0),
        leaf(1.0, cover=25.0),
    )
    return Tree(nodes, 0)


@pytest.fixture
def two_split_ensemble(two_split_tree):
    return TreeEnsemble((two_split_tree,), 2, ("age", "sugar"))


@pytest.fixture
def consumer_row():
    return np.array([30.0, 20.0])


@pytest.fixture
def baseline_row():
    return np.array([70.0, 5.0])


@pytest.fixture
def three_leaf_tree():
    """Root splits f0 < 4; its left child splits f1 < 3 into leaves 1 and 2;
    the right child is a leaf with weight 3."""
    nodes = (
        inner(0, 4.0, 1, 2, cover=10.0),
        inner(1, 3.0, 3, 4, cover=6.0),
        leaf(3.0, cover=4.0),
        leaf(1.0, cover=3.0),
        leaf(2.0, cover=3.0),
    )
    return Tree(nodes, 0)


@pytest.fixture
def three_leaf_ensemble(three_leaf_tree):
    return TreeEnsemble((three_leaf_tree,), 2, ("f0", "f1"))


def cf_from_table(table: np.ndarray, num_players: int) -> CharacteristicFunction:
    """A characteristic function backed directly by a payoff table."""
    table = np.asarray(table, dtype=np.float64)

    def evaluator(subset):
        mask = 0
        for i in subset:
            mask |= 1 << i
        return float(table[mask])

    return CharacteristicFunction(evaluator, num_players)
