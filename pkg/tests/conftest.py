"""Shared fixtures. Meshes are expensive to generate, so they are cached per session."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vemlab.meshgen import gen_glued, gen_hexagon, gen_square, gen_voronoi

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SEED = 0


@lru_cache(maxsize=None)
def square(n: int):
    return gen_square(n)


@lru_cache(maxsize=None)
def hexagon(nx: int, ny: int):
    return gen_hexagon(nx, ny)


@lru_cache(maxsize=None)
def voronoi(n: int, seed: int = SEED, lloyd_iters: int = 0):
    return gen_voronoi(n, seed, lloyd_iters)


@lru_cache(maxsize=None)
def glued(left: int = 53, right: int = 58):
    return gen_glued(left, right)


def unit_square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0):
    t = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


@pytest.fixture(scope="session")
def mesh_cache():
    return {"square": square, "hexagon": hexagon, "voronoi": voronoi, "glued": glued}


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion; printed at the end of the run."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}; {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
