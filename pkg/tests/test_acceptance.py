"""Acceptance gate: every exit criterion at its stated tolerance.

The criteria live in ``gradflowlab.acceptance`` so that the command-line
``self-test`` verb runs exactly the same checks; here each one becomes a
test case and prints its pass/fail line.
"""

import pytest

from gradflowlab import acceptance as acc

_shared = {}


def _shared_runs():
    if "runs" not in _shared:
        _shared["runs"] = acc._canonical_zoo_runs()
        _shared["jko"] = acc._jko_small_runs()
    return _shared["runs"], _shared["jko"]


@pytest.mark.parametrize("criterion", acc.CRITERIA,
                         ids=[fn.__name__ for fn in acc.CRITERIA])
def test_criterion(criterion):
    if criterion in (acc.criterion_5_edb, acc.criterion_12_slope_and_modulus):
        runs, jko = _shared_runs()
        result = criterion(runs=runs, jko=jko)
    else:
        result = criterion()
    print(result.line())
    assert result.passed, result.line()
