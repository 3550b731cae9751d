from __future__ import annotations

import pytest

from meshhub.clock import ManualClock


@pytest.fixture
def clock():
    return ManualClock()
