"""Shared fixtures: one validated default spec, a few small meshes."""

import numpy as np
import pytest

from bsac import FieldPair, build_disk, build_interval, make_spec


@pytest.fixture(scope="session")
def dw_spec():
    # double-well bulk and surface, identity coupling
    return make_spec()


@pytest.fixture(scope="session")
def disk_small():
    return build_disk(1.0, 8, 16)


@pytest.fixture(scope="session")
def disk_mid():
    return build_disk(1.0, 16, 32)


@pytest.fixture(scope="session")
def interval_small():
    return build_interval(1.0, 16)


def random_pair(mesh, rng, mean=0.0, amplitude=1.0):
    return FieldPair(mean + amplitude * rng.standard_normal(mesh.n_bulk),
                     mean + amplitude * rng.standard_normal(mesh.n_surface))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # acceptance tests register one-line verdicts; surface them even when
    # stdout capture is on
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "VERDICTS", []) if mod is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
