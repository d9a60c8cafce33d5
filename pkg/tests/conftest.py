import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from equilab.model import Agent, BlockBid, HourlyCurveBid, Market

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def four_agent_market() -> Market:
    """Single hour, two all-or-nothing agents around two divisible ones.

    The relaxed optimum is 7 at price 3; the exact optimum is 6; there is no
    equilibrium because the seller block demands {-2, 0} at price 3.
    """
    return Market(1, (
        Agent("a1", (BlockBid("b1", 12.0, (3.0,)),)),
        Agent("a2", (HourlyCurveBid("c2", 0, ((2.0, 1.0),)),)),
        Agent("a3", (HourlyCurveBid("c3", 0, ((1.0, -2.0),)),)),
        Agent("a4", (BlockBid("b4", -6.0, (-2.0,)),)),
    ), label="four-agent")


@pytest.fixture
def fixture_dir() -> pathlib.Path:
    return FIXTURES
