"""Shared fixtures and parsing shortcuts."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from jetpoisson.algebra import JetSpace
from jetpoisson.operators import LocalOperator, WNLOperator
from jetpoisson.parsing import parse_expression, parse_operator_expression

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large,
                           HealthCheck.large_base_example])
settings.load_profile("default")

# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])


def expr(text: str, sp: JetSpace):
    return parse_expression(text, sp)


def scalar(text: str, sp: JetSpace, V: str | None = None) -> WNLOperator:
    tail = None if V is None else expr(V, sp)
    return WNLOperator.scalar(parse_operator_expression(text, sp), tail)


def matrix(rows, sp: JetSpace) -> LocalOperator:
    return LocalOperator(sp, [[parse_operator_expression(t, sp) for t in r] for r in rows])


@pytest.fixture
def sp1():
    return JetSpace(1, 2)


@pytest.fixture
def sp2():
    return JetSpace(2, 2)
