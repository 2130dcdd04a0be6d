"""Runs every acceptance criterion at its stated tolerance.

Each test prints one ``criterion N ... PASS/FAIL`` line; ``pytest -s`` or the
captured-output section of the report shows them. ``ellnewton verify`` runs
the same checks from the command line.
"""

import pytest

from ellnewton import acceptance as acc


@pytest.fixture(scope="module")
def ctx():
    # shared so the rendered figure rasters are computed once
    return acc.make_context(acc.DEFAULT_SEED)


@pytest.mark.parametrize("cid", [c[0] for c in acc.CRITERIA],
                         ids=[f"criterion_{c[0]:02d}_{c[1].replace(' ', '_')}" for c in acc.CRITERIA])
def test_criterion(ctx, cid, capsys):
    r = acc.run_check(cid, ctx)
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()
