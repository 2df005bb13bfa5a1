"""Acceptance criteria at their stated tolerances, one PASS/FAIL line each.

Runs the packaged acceptance preset (about 20 minutes on one core). The
assertions pin the documented outcome rather than demand a pass: criteria 4,
8 and 9 fail at the stated tolerances for reasons recorded in the decision
ledger, and a change in any outcome should be noticed.

Run as a script (``python tests/test_acceptance.py``) to print the lines only.
"""

import json
import sys

import pytest

from coulomb_lab.harness.acceptance import CRITERIA, RUNNERS
from coulomb_lab.harness.report import preset_path

EXPECTED_FAIL = {
    4: {"convert_ratio_min_theta5"},
    8: {"mean_max_minus_rider_center"},
    9: {"gas_rho1_flatness"},
}

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def _preset():
    with open(preset_path("acceptance.json")) as fh:
        return json.load(fh)["criteria"]


def line(r):
    failed = [c["name"] for c in r["checks"] if not c["passed"]]
    tail = f" (failed: {', '.join(failed)})" if failed else ""
    return f"criterion {r['id']} {'PASS' if r['passed'] else 'FAIL'} [{r['runtime']:.1f}s] {CRITERIA[r['id']][0]}{tail}"


@pytest.fixture(scope="module")
def results():
    return {}


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, results, capsys):
    r = RUNNERS[k](_preset().get(str(k), {}))
    results[k] = r
    with capsys.disabled():
        print("\n" + line(r))
    failed = {c["name"] for c in r["checks"] if not c["passed"]}
    if k in EXPECTED_FAIL:
        assert not r["passed"]
        assert failed == EXPECTED_FAIL[k], failed
    else:
        assert r["passed"], failed


if __name__ == "__main__":
    cfg = _preset()
    ids = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    for k in ids:
        print(line(RUNNERS[k](cfg.get(str(k), {}))), flush=True)
