"""One-dimensional transport oracle for zonal densities on S^n.

A zonal density depends only on the polar angle ``theta`` to a pole. Under
the uniform measure ``theta`` has law ``sin^{n-1}(theta) / Z_n`` on [0, pi],
``Z_n = int_0^pi sin^{n-1}``. Moving every point along its meridian by the
monotone rearrangement ``T = F_target^{-1} o F_base`` of the angle laws is a
feasible coupling whose cost ``int c(|T(theta) - theta|) dF_base`` bounds the
optimal cost from above. It is the optimum when monotone coupling is optimal
for ``c_n`` (true for convex costs); reports treat it as an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import sin_power_integral

ORACLE_CAVEAT = "upper bound; exact if the monotone coupling is optimal (convex cost)"


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AngleProfile:
    """A zonal density sampled on polar-angle nodes.

    ``theta`` is a uniform grid of ``K`` nodes on [0, pi] with each density
    breakpoint inserted twice, so ``f`` can carry both one-sided limits there.
    ``base_cdf`` is exact; ``target_cdf`` integrates ``f`` against it by the
    trapezoid rule and ``f`` is rescaled so that it ends at one.
    """

    n: int
    K: int
    theta: np.ndarray
    f: np.ndarray
    base_cdf: np.ndarray
    target_cdf: np.ndarray
    family: str = "custom"

    @property
    def Z(self) -> float:
        return sin_power_integral(self.n - 1, math.pi)


def _nodes(K: int, breakpoints) -> tuple[np.ndarray, np.ndarray]:
    theta = np.linspace(0.0, math.pi, K)
    side = np.zeros(K)
    for bp in sorted(breakpoints):
        if not 0.0 < bp < math.pi:
            raise ProfileError("breakpoints must lie in (0, pi)")
        theta_keep = theta[theta != bp]
        side_keep = side[theta != bp]
        k = np.searchsorted(theta_keep, bp)
        theta = np.concatenate([theta_keep[:k], [bp, bp], theta_keep[k:]])
        side = np.concatenate([side_keep[:k], [-1.0, 1.0], side_keep[k:]])
    return theta, side


def trapezoid_increments(values: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    return 0.5 * (values[1:] + values[:-1]) * np.diff(cdf)


def make_profile(n: int, density, K: int = 100_000, breakpoints=(), family="custom") -> AngleProfile:
    """Build a profile from ``density(theta, side)``.

    ``side`` is -1 / +1 at the left / right copy of a breakpoint and 0
    elsewhere; smooth densities may ignore it.
    """
    if K < 2:
        raise ProfileError("need at least two nodes")
    theta, side = _nodes(K, breakpoints)
    f = np.asarray(density(theta, side), dtype=float)
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ProfileError("density must be finite and nonnegative")
    base = sin_power_integral(n - 1, theta) / sin_power_integral(n - 1, math.pi)
    base[-1] = 1.0
    inc = trapezoid_increments(f, base)
    total = inc.sum()
    f = f / total
    target = np.concatenate([[0.0], np.cumsum(inc / total)])
    target[-1] = 1.0
    return AngleProfile(n, K, theta, f, base, target, family)


def zonal_profile(family: str, n: int, K: int = 100_000, **params) -> AngleProfile:
    """Profiles matching :func:`measures.make_density` families about the pole."""
    if family == "uniform":
        return make_profile(n, lambda t, s: np.ones_like(t), K, family=family)
    if family == "zonal-exp":
        kappa = float(params.get("kappa", 1.0))
        return make_profile(n, lambda t, s: np.exp(kappa * (np.cos(t) - 1.0)), K,
                            family=f"zonal-exp(kappa={kappa:g})")
    if family == "half-cap":
        def cap(t, s):
            inside = (t < math.pi / 2) | ((t == math.pi / 2) & (s < 0))
            return np.where(inside, 2.0, 0.0)
        return make_profile(n, cap, K, breakpoints=(math.pi / 2,), family=family)
    raise ProfileError(f"no zonal profile for family {family!r}")


def _check_cdf(cdf):
    if np.any(np.diff(cdf) < 0) or abs(cdf[0]) > 1e-8 or abs(cdf[-1] - 1.0) > 1e-8:
        raise ProfileError("CDF is not monotone from 0 to 1")


def inverse_cdf(theta: np.ndarray, cdf: np.ndarray, u) -> np.ndarray:
    """Generalized inverse by linear interpolation; flat stretches map to their left end."""
    u = np.asarray(u, dtype=float)
    k = np.searchsorted(cdf, u, side="left")
    k = np.clip(k, 1, len(cdf) - 1)
    lo, hi = cdf[k - 1], cdf[k]
    width = hi - lo
    frac = np.where(width > 0, (u - lo) / np.where(width > 0, width, 1.0), 0.0)
    out = theta[k - 1] + np.clip(frac, 0.0, 1.0) * (theta[k] - theta[k - 1])
    return np.where(u <= cdf[0], theta[0], out)


def monotone_map(profile: AngleProfile) -> np.ndarray:
    """``T(theta_k) = F_target^{-1}(F_base(theta_k))`` at every node."""
    _check_cdf(profile.base_cdf)
    _check_cdf(profile.target_cdf)
    return inverse_cdf(profile.theta, profile.target_cdf, profile.base_cdf)


def angle_quadrature(profile: AngleProfile, integrand) -> float:
    """Trapezoid integral of ``integrand`` (values at the nodes) against the base angle law."""
    values = np.broadcast_to(np.asarray(integrand, dtype=float), profile.theta.shape)
    return float(trapezoid_increments(values, profile.base_cdf).sum())


def monotone_map_cost(profile: AngleProfile, cost) -> float:
    """Cost of the meridian-wise monotone coupling; an upper bound of the optimal cost."""
    if getattr(cost, "n", profile.n) != profile.n:
        raise ProfileError("cost dimension does not match profile")
    disp = np.abs(monotone_map(profile) - profile.theta)
    if np.any(disp >= math.pi):
        raise ProfileError("displacement reaches pi: cost blows up")
    return angle_quadrature(profile, cost(disp))


def profile_dim_entropy(profile: AngleProfile, n: int) -> float:
    return n - n * angle_quadrature(profile, profile.f ** (1.0 - 1.0 / n))


def profile_kl_entropy(profile: AngleProfile) -> float:
    f = profile.f
    flogf = np.where(f > 0, f * np.log(np.where(f > 0, f, 1.0)), 0.0)
    return angle_quadrature(profile, flogf)
