import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ionroute.arch import (TimingModel, all_pairs_shuttle_cost,
                           build_position_graph, preset)


@pytest.fixture
def unit_timing():
    return TimingModel(split=1.0, merge=1.0, move=1.0, inner_swap=1.0,
                       gate_1q=1.0, gate_2q=1.0)


@pytest.fixture
def mini(unit_timing):
    """MINI device (2 traps of 2) with unit edge weights."""
    spec = preset("MINI", 2)
    g = build_position_graph(spec)
    dist = all_pairs_shuttle_cost(g, unit_timing)
    return spec, g, dist
