"""Manufactured solutions for -div(K grad u) = f with K = 1."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .vem.basis import exponents

Scalar = Callable[[np.ndarray, np.ndarray], np.ndarray]
Vector = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ExactSolution:
    name: str
    u: Scalar
    grad: Vector
    f: Scalar  # -Laplacian of u


def _ref_u(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (
        x**3 - x * y**2 + x**2 * y + x**2 - x * y - x + y - 1.0
        + np.sin(5 * x) * np.sin(7 * y)
        + np.log(1.0 + x**2 + y**4)
    )


def _ref_grad(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = 1.0 + x**2 + y**4
    ux = 3 * x**2 - y**2 + 2 * x * y + 2 * x - y - 1.0 + 5 * np.cos(5 * x) * np.sin(7 * y) + 2 * x / d
    uy = -2 * x * y + x**2 - x + 1.0 + 7 * np.sin(5 * x) * np.cos(7 * y) + 4 * y**3 / d
    return ux, uy


def _ref_f(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = 1.0 + x**2 + y**4
    log_part = (2.0 - 2 * x**2 + 2 * y**4 + 12 * y**2 + 12 * x**2 * y**2 - 4 * y**6) / d**2
    lap = 4 * x + 2 * y + 2.0 - 74.0 * np.sin(5 * x) * np.sin(7 * y) + log_part
    return -lap


REFERENCE = ExactSolution("paper6", _ref_u, _ref_grad, _ref_f)


def polynomial_solution(degree: int) -> ExactSolution:
    """A dense polynomial of total degree `degree` (every monomial present)."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    exps = exponents(degree)
    coef = np.array([1.0 / (1 + a + 2 * b) * (-1) ** (a + b) for a, b in exps])

    def u(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return sum(c * x**a * y**b for c, (a, b) in zip(coef, exps)) + 0.0 * x

    def grad(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = 0.0 * x
        gy = 0.0 * x
        for c, (a, b) in zip(coef, exps):
            if a:
                gx = gx + c * a * x ** (a - 1) * y**b
            if b:
                gy = gy + c * b * x**a * y ** (b - 1)
        return gx, gy

    def f(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lap = 0.0 * x
        for c, (a, b) in zip(coef, exps):
            if a >= 2:
                lap = lap + c * a * (a - 1) * x ** (a - 2) * y**b
            if b >= 2:
                lap = lap + c * b * (b - 1) * x**a * y ** (b - 2)
        return -lap

    return ExactSolution(f"poly:{degree}", u, grad, f)


def get_solution(name: str) -> ExactSolution:
    """Look up 'paper6' or 'poly:d'."""
    if name == "paper6":
        return REFERENCE
    if name.startswith("poly:"):
        try:
            d = int(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad polynomial degree in {name!r}") from None
        return polynomial_solution(d)
    raise ValueError(f"unknown exact solution {name!r}; use 'paper6' or 'poly:<degree>'")
