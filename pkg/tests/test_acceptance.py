"""End-to-end acceptance run at desk scale.

Each criterion prints one ``[PASS]``/``[FAIL]`` line (collected into a
summary section at the end of the pytest run).  The shared flow runs
are cached, so the whole module costs roughly one minute.
"""

import pytest

from conftest import ACCEPTANCE_LINES
from gmcf.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    fn = CRITERIA[number]
    res = fn(seed=0) if number == 1 else fn()
    print(res.line())
    ACCEPTANCE_LINES.append(res.line())
    assert res.passed, res.line()
