"""Probability densities on grids, entropy functionals and test functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sphere import SphereGrid

FAMILIES = ("uniform", "zonal-exp", "half-cap", "tilt", "mixture")


def _north(dim: int) -> np.ndarray:
    e = np.zeros(dim)
    e[-1] = 1.0
    return e


@dataclass(frozen=True, eq=False)
class TestFunction:
    """``g(x) = P(x . axis)`` for a polynomial ``P`` (coefficients low to high).

    Coordinate functions, linear forms ``a . x`` and zonal polynomials of
    degree <= 3 are all of this shape. The tangential gradient at ``x`` is
    ``P'(s) (axis - s x)`` with ``s = x . axis``.
    """

    __test__ = False  # not a pytest class

    coeffs: tuple
    axis: np.ndarray
    tag: str = "zonal-poly"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=float))
        if len(self.coeffs) > 4:
            raise ValueError("zonal polynomials are limited to degree 3")

    @classmethod
    def coordinate(cls, k: int, dim: int) -> TestFunction:
        e = np.zeros(dim)
        e[k] = 1.0
        return cls((0.0, 1.0), e, f"x{k + 1}")

    @classmethod
    def linear(cls, a) -> TestFunction:
        return cls((0.0, 1.0), np.asarray(a, dtype=float), "linear")

    @classmethod
    def zonal(cls, coeffs, pole) -> TestFunction:
        pole = np.asarray(pole, dtype=float)
        return cls(tuple(coeffs), pole / np.linalg.norm(pole), "zonal-poly")

    @classmethod
    def zero(cls, dim: int) -> TestFunction:
        return cls((0.0,), _north(dim), "zero")

    @property
    def polynomial(self) -> np.polynomial.Polynomial:
        return np.polynomial.Polynomial(self.coeffs)

    def _s(self, X):
        return np.asarray(X, dtype=float) @ self.axis

    def __call__(self, X):
        return self.polynomial(self._s(X))

    def gradient(self, X):
        X = np.asarray(X, dtype=float)
        s = self._s(X)
        dp = self.polynomial.deriv()(s)
        return dp[..., None] * (self.axis - s[..., None] * X)

    def grad_sq(self, X):
        s = self._s(X)
        dp = self.polynomial.deriv()(s)
        return dp**2 * np.maximum(self.axis @ self.axis - s**2, 0.0)

    def shifted(self, c: float) -> TestFunction:
        coeffs = list(self.coeffs)
        coeffs[0] += c
        return TestFunction(tuple(coeffs), self.axis, self.tag)

    def recentered(self, grid: SphereGrid) -> TestFunction:
        """Subtract the grid mean so that ``sum w_i g(p_i) = 0``."""
        return self.shifted(-float(grid.weights @ self(grid.points)))

    def describe(self) -> str:
        axis = ",".join(f"{v:g}" for v in self.axis)
        coeffs = ",".join(f"{v:g}" for v in self.coeffs)
        return f"{self.tag}[{coeffs}|{axis}]"


@dataclass(frozen=True, eq=False)
class DiscreteDensity:
    """Density values against the grid measure; ``sum values * weights == 1``."""

    values: np.ndarray
    grid: SphereGrid
    family: str
    params: dict = field(default_factory=dict)

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.grid.weights

    def describe(self) -> str:
        if not self.params:
            return self.family
        return self.family + "(" + ",".join(f"{k}={_fmt(v)}" for k, v in self.params.items()) + ")"


def _fmt(v):
    if isinstance(v, (float, int, np.floating)):
        return f"{v:g}"
    if isinstance(v, np.ndarray):
        return "[" + ",".join(f"{x:g}" for x in v) + "]"
    if isinstance(v, TestFunction):
        return v.describe()
    return str(v)


def normalize(values, weights) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    total = float(values @ weights)
    if not total > 0:
        raise ValueError("density has zero total mass")
    return values / total


def make_density(family: str, grid: SphereGrid, **params) -> DiscreteDensity:
    """Evaluate a density family on ``grid`` and renormalize against its weights.

    Families and parameters:

    - ``uniform``
    - ``zonal-exp``: ``kappa >= 0``, ``pole`` (default north); ``exp(kappa x . pole)``
    - ``half-cap``: ``pole``; twice the indicator of ``{x . pole > 0}``
    - ``tilt``: ``eps``, ``g`` (a :class:`TestFunction`); ``1 + eps g``
    - ``mixture``: ``components`` (densities on ``grid``), ``mix`` (convex weights)
    """
    X = grid.points
    dim = grid.n + 1
    if family == "uniform":
        values = np.ones(grid.size)
    elif family == "zonal-exp":
        kappa = float(params.get("kappa", 1.0))
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        pole = np.asarray(params.get("pole", _north(dim)), dtype=float)
        s = X @ pole
        values = np.exp(kappa * (s - s.max()))
        params = {"kappa": kappa, **({"pole": pole} if "pole" in params else {})}
    elif family == "half-cap":
        pole = np.asarray(params.get("pole", _north(dim)), dtype=float)
        values = 2.0 * (X @ pole > 0.0)
    elif family == "tilt":
        eps = float(params["eps"])
        g = params["g"]
        values = 1.0 + eps * g(X)
        if np.any(values <= 0.0):
            raise ValueError("tilted density is not positive; reduce eps")
    elif family == "mixture":
        comps = params["components"]
        mix = np.asarray(params.get("mix", np.full(len(comps), 1.0 / len(comps))), dtype=float)
        if np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be a probability vector")
        values = sum(m * c.values for m, c in zip(mix, comps))
        params = {"of": "+".join(c.describe() for c in comps), "mix": mix}
    else:
        raise ValueError(f"unknown density family {family!r}")
    values = normalize(values, grid.weights)
    return DiscreteDensity(values, grid, family, dict(params))


def dim_entropy(f: DiscreteDensity, n: int) -> float:
    """``H_n(f) = n - n sum w_i f_i^{1 - 1/n}``, with ``0^{1-1/n} = 0``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(n - n * (f.grid.weights @ np.power(f.values, 1.0 - 1.0 / n)))


def kl_entropy(f: DiscreteDensity) -> float:
    """``sum w_i f_i log f_i`` with ``0 log 0 = 0``."""
    v = f.values
    pos = v > 0
    return float(f.grid.weights[pos] @ (v[pos] * np.log(v[pos])))


def variance_and_dirichlet(g: TestFunction, grid: SphereGrid) -> tuple[float, float]:
    """Grid variance of ``g`` and grid mean of ``|grad g|^2``."""
    w = grid.weights
    vals = g(grid.points)
    mean = w @ vals
    return float(w @ (vals - mean) ** 2), float(w @ g.grad_sq(grid.points))


def export_density(f: DiscreteDensity, path) -> None:
    params = ";".join(f"{k}={_fmt(v)}" for k, v in f.params.items())
    lines = [f"# density family={f.family} params={params} grid={f.grid.digest()}"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(f.values)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_density_values(path) -> np.ndarray:
    rows = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln and ln[0] != "#"]
    vals = np.empty(len(rows))
    for ln in rows:
        i, v = ln.split(",")
        vals[int(i)] = float(v)
    return vals
