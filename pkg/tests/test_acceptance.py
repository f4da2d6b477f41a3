"""Acceptance gate: every criterion runs at full scale with its stated
tolerances and runtime cap; one pass/fail line is printed per criterion."""

import pytest

from buffcs import acceptance


@pytest.mark.parametrize("name,check", acceptance.CHECKS, ids=[name for name, _ in acceptance.CHECKS])
def test_acceptance_criterion(name, check):
    passed, detail = check(False)
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"
