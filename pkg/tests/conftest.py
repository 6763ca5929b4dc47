from __future__ import annotations

import json

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from phoenixr.jsonschemas import all_schemas, load


@pytest.fixture(scope="session")
def validate():
    """validate(name, path_or_obj) checks a CLI output against its schema."""
    registry = Registry().with_resources(
        (sid, Resource.from_contents(s)) for sid, s in all_schemas().items())

    def check(name, target):
        obj = target if isinstance(target, (dict, list)) else json.loads(open(target).read())
        Draft202012Validator(load(name), registry=registry).validate(obj)
        return obj

    return check


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, name, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
