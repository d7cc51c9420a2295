"""Radial profiles on ``[0, R]`` and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline


@dataclass
class RadialProfile:
    """A function of radius sampled on an ordered grid starting at 0.

    ``func``, when present, evaluates the profile exactly at any radius;
    otherwise evaluation falls back to a cubic spline through the samples.
    ``dfunc`` plays the same role for the radial derivative.
    """

    radius_max: float
    nodes: np.ndarray
    values: np.ndarray
    boundary_derivative: float
    derivative: np.ndarray | None = None
    func: Callable | None = field(default=None, repr=False)
    dfunc: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.nodes[0] != 0.0 or not np.isclose(self.nodes[-1], self.radius_max, rtol=1e-14, atol=0):
            raise ValueError("profile grid must run from 0 to radius_max")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("profile nodes must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile values must be finite")

    def __call__(self, r):
        if self.func is not None:
            return self.func(r)
        return CubicSpline(self.nodes, self.values)(r)

    def slope(self, r):
        """Radial derivative at ``r``."""
        if self.dfunc is not None:
            return self.dfunc(r)
        if self.derivative is not None:
            return CubicSpline(self.nodes, self.derivative)(r)
        return CubicSpline(self.nodes, self.values)(r, 1)

    @classmethod
    def from_function(cls, func: Callable, radius: float, n_nodes: int = 1024,
                      dfunc: Callable | None = None) -> "RadialProfile":
        nodes = np.linspace(0.0, radius, n_nodes)
        nodes[-1] = radius
        deriv = None if dfunc is None else np.asarray(dfunc(nodes), dtype=float)
        bd = float(deriv[-1]) if deriv is not None else float("nan")
        return cls(radius, nodes, np.asarray(func(nodes), dtype=float), bd, deriv, func, dfunc)

    def scaled(self, factor: float) -> "RadialProfile":
        """Multiply the profile by a constant."""
        func = None if self.func is None else (lambda r, f=self.func: factor * f(r))
        dfunc = None if self.dfunc is None else (lambda r, f=self.dfunc: factor * f(r))
        deriv = None if self.derivative is None else factor * self.derivative
        return RadialProfile(self.radius_max, self.nodes, factor * self.values,
                             factor * self.boundary_derivative, deriv, func, dfunc)


def fmt(x: float) -> str:
    """Decimal form with 17 significant digits, which round-trips a double."""
    return f"{float(x):.17g}"


def write_columns(path, columns: Mapping[str, Sequence[float]]) -> None:
    names = list(columns)
    length = len(columns[names[0]])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(length):
            writer.writerow([fmt(columns[k][i]) if not isinstance(columns[k][i], str) else columns[k][i]
                             for k in names])


def read_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return {name: np.array([float(row[i]) for row in rows]) for i, name in enumerate(header)}
