"""Spherically symmetric densities and Poisson point clouds.

Three radial families are supported:

* ``HEAVY``  f(x) = C / (1 + |x|^alpha), alpha > d
* ``LIGHT``  f(x) = C exp(-|x|^tau / tau), tau > 0
* ``PSI``    f(x) = C exp(-psi(|x|)) for a user supplied monotone potential

For the two parametric families the radial law reduces to a classical one,
which gives exact CDFs and quantiles:

* heavy: W = 1 / (1 + R^alpha) ~ Beta(1 - d/alpha, d/alpha)
* light: G = R^tau / tau ~ Gamma(d/tau, 1)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import ParameterError


class Family(str, enum.Enum):
    HEAVY = "heavy_polynomial"
    LIGHT = "light_von_mises"
    PSI = "pluggable_psi"


def sphere_surface_area(d: int) -> float:
    """Surface area s_{d-1} of the unit sphere in R^d (s_0 = 2, two points)."""
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Mix a master seed with replication indices into a 64-bit seed.

    The mixing function is numpy's ``SeedSequence([master_seed, *indices])``
    hashed down to two 32-bit words, so any (master, index) pair gives the same
    stream regardless of the order in which replications are executed.
    """
    words = np.random.SeedSequence([int(master_seed), *map(int, indices)]).generate_state(2, np.uint32)
    return int(words[0]) << 32 | int(words[1])


def normalizing_constant(family: Family | str, d: int, alpha: float | None = None,
                         tau: float | None = None, psi: Callable[[float], float] | None = None) -> float:
    """Return C such that the density integrates to one over R^d."""
    family = Family(family)
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    s = sphere_surface_area(d)
    if family is Family.HEAVY:
        if alpha is None or not alpha > d:
            raise ParameterError(f"heavy polynomial tail needs alpha > d (alpha={alpha}, d={d}); "
                                 "the radial integral diverges otherwise")
        # int_0^inf r^{d-1} / (1 + r^alpha) dr = (pi / alpha) / sin(pi d / alpha)
        return alpha * math.sin(math.pi * d / alpha) / (math.pi * s)
    if family is Family.LIGHT:
        if tau is None or not tau > 0:
            raise ParameterError(f"von Mises exponent tau must be > 0, got {tau}")
        # int_0^inf r^{d-1} exp(-r^tau / tau) dr = tau^{d/tau - 1} Gamma(d / tau)
        log_mass = (d / tau - 1) * math.log(tau) + math.lgamma(d / tau)
        return math.exp(-log_mass) / s
    if psi is None:
        raise ParameterError("pluggable density needs psi")
    try:
        mass, _ = integrate.quad(lambda r: r ** (d - 1) * math.exp(-psi(r)), 0, np.inf,
                                 epsabs=0.0, epsrel=1e-12, limit=400)
    except OverflowError:
        raise ParameterError("exp(-psi) is not integrable") from None
    if not (mass > 0 and math.isfinite(mass)):
        raise ParameterError("exp(-psi) is not integrable")
    return 1.0 / (s * mass)


@dataclass(frozen=True, eq=False)
class RadialDensity:
    """Immutable spherically symmetric density on R^d.

    Use the constructors :func:`heavy_polynomial`, :func:`light_von_mises`
    and :func:`pluggable_psi` rather than instantiating directly.
    """

    family: Family
    dim: int
    alpha: float | None = None
    tau: float | None = None
    psi: Callable[[float], float] | None = None
    psi_prime: Callable[[float], float] | None = None
    psi_inverse: Callable[[float], float] | None = None
    psi_index: float | None = None
    scale_C: float = field(default=float("nan"))

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.family is Family.PSI:
            if self.psi is None or self.psi_prime is None or self.psi_inverse is None:
                raise ParameterError("pluggable density needs psi, psi_prime and psi_inverse")
            if self.psi_index is not None and not self.psi_index > 1:
                raise ParameterError(f"psi must be regularly varying with index > 1, got {self.psi_index}")
        C = normalizing_constant(self.family, self.dim, self.alpha, self.tau, self.psi)
        object.__setattr__(self, "scale_C", C)

    def describe(self) -> dict:
        out = {"family": self.family.value, "dim": self.dim, "scale_C": self.scale_C}
        if self.family is Family.HEAVY:
            out["alpha"] = self.alpha
        elif self.family is Family.LIGHT:
            out["tau"] = self.tau
        return out

    # potential and its derivatives -------------------------------------------------

    def potential(self, r):
        """-log(f / C) as a function of the radius."""
        r = np.asarray(r, dtype=float)
        if self.family is Family.HEAVY:
            return np.logaddexp(0.0, self.alpha * np.log(r))
        if self.family is Family.LIGHT:
            return r ** self.tau / self.tau
        return np.vectorize(self.psi, otypes=[float])(r)

    def potential_prime(self, r):
        r = np.asarray(r, dtype=float)
        if self.family is Family.HEAVY:
            return self.alpha * r ** (self.alpha - 1) / (1 + r ** self.alpha)
        if self.family is Family.LIGHT:
            return r ** (self.tau - 1)
        return np.vectorize(self.psi_prime, otypes=[float])(r)

    def potential_inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.family is Family.LIGHT:
            return (self.tau * y) ** (1 / self.tau)
        if self.family is Family.PSI:
            return np.vectorize(self.psi_inverse, otypes=[float])(y)
        # 1 + r^alpha = e^y
        return np.expm1(y) ** (1 / self.alpha)

    # density ----------------------------------------------------------------------

    def log_pdf_radial(self, r):
        return math.log(self.scale_C) - self.potential(r)

    def pdf_radial(self, r):
        """Density value f(r e_1) at radius r."""
        return np.exp(self.log_pdf_radial(r))

    def pdf(self, x):
        """Density at points x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        return self.pdf_radial(np.linalg.norm(x, axis=-1))

    # radial law -------------------------------------------------------------------

    def radial_cdf(self, r):
        """P(|X| <= r)."""
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        d = self.dim
        if self.family is Family.HEAVY:
            a = self.alpha
            with np.errstate(over="ignore"):
                ra = r ** a
            w = np.where(np.isinf(ra), 1.0, ra / (1.0 + np.where(np.isinf(ra), 0.0, ra)))
            return special.betainc(d / a, 1 - d / a, w)
        if self.family is Family.LIGHT:
            return special.gammainc(d / self.tau, r ** self.tau / self.tau)
        return 1.0 - self.radial_sf(r)

    def radial_sf(self, r):
        """P(|X| > r), accurate far into the tail."""
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        d = self.dim
        if self.family is Family.HEAVY:
            a = self.alpha
            return special.betainc(1 - d / a, d / a, 1.0 / (1.0 + r ** a))
        if self.family is Family.LIGHT:
            return special.gammaincc(d / self.tau, r ** self.tau / self.tau)
        return np.vectorize(self._psi_sf, otypes=[float])(r)

    def _psi_sf(self, r: float) -> float:
        d, C = self.dim, self.scale_C
        s = sphere_surface_area(d)
        tail, _ = integrate.quad(lambda t: t ** (d - 1) * math.exp(-self.psi(t)), r, np.inf,
                                 epsabs=0.0, epsrel=1e-12, limit=400)
        return min(1.0, s * C * tail)

    def radius_from_sf(self, v):
        """Radius r with P(|X| > r) = v, for v in (0, 1]."""
        v = np.asarray(v, dtype=float)
        d = self.dim
        if self.family is Family.HEAVY:
            a = self.alpha
            w = special.betaincinv(1 - d / a, d / a, v)
            with np.errstate(divide="ignore"):
                return ((1.0 - w) / w) ** (1.0 / a)
        if self.family is Family.LIGHT:
            g = special.gammainccinv(d / self.tau, v)
            return (self.tau * g) ** (1.0 / self.tau)
        return self._psi_table(v)

    @cached_property
    def _psi_grid(self):
        # survival tabulated on a grid out to where it drops below 1e-300
        r_hi = 1.0
        while self.radial_sf(r_hi) > 1e-300 and r_hi < 1e8:
            r_hi *= 2.0
        grid = np.linspace(0.0, r_hi, 4097)
        d, s, C = self.dim, sphere_surface_area(self.dim), self.scale_C
        pieces = [integrate.quad(lambda t: t ** (d - 1) * math.exp(-self.psi(t)), lo, hi,
                                 epsabs=0.0, epsrel=1e-12)[0] for lo, hi in zip(grid[:-1], grid[1:])]
        tail = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) * s * C
        tail[0] = 1.0
        return grid, np.log(np.maximum(tail, 1e-320))

    def _psi_table(self, v):
        grid, log_sf = self._psi_grid
        # log_sf is decreasing; interpolate radius as a function of log survival
        r = np.interp(-np.log(v), -log_sf, grid)
        # Newton refinement on log survival: d/dr log sf = -pdf_r / sf
        d, s = self.dim, sphere_surface_area(self.dim)
        for _ in range(3):
            sf = self.radial_sf(r)
            dens = s * r ** (d - 1) * self.pdf_radial(r)
            ok = (sf > 0) & (dens > 0)
            step = np.where(ok, (np.log(np.where(ok, sf, 1)) - np.log(v)) * np.where(ok, sf, 0)
                            / np.where(ok, dens, 1), 0.0)
            r = np.maximum(r + step, 0.0)
        return r


def heavy_polynomial(alpha: float, dim: int) -> RadialDensity:
    return RadialDensity(Family.HEAVY, dim, alpha=float(alpha))


def light_von_mises(tau: float, dim: int) -> RadialDensity:
    return RadialDensity(Family.LIGHT, dim, tau=float(tau))


def pluggable_psi(psi, psi_prime, psi_inverse, dim: int, psi_index: float | None = None) -> RadialDensity:
    """Density C exp(-psi(|x|)); psi, its derivative and inverse are user supplied."""
    return RadialDensity(Family.PSI, dim, psi=psi, psi_prime=psi_prime,
                         psi_inverse=psi_inverse, psi_index=psi_index)


def radial_quantile(density: RadialDensity, u):
    """Radius r with P(|X| <= r) = u, for u in [0, 1)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr >= 0)) or np.any(u_arr >= 1):
        raise ParameterError("quantile level must lie in [0, 1)")
    r = density.radius_from_sf(1.0 - u_arr)
    r = np.where(u_arr == 0, 0.0, r)
    return float(r) if np.ndim(u) == 0 else r


@dataclass(frozen=True, eq=False)
class PointCloud:
    """A realisation of the Poisson process with intensity n f."""

    points: np.ndarray
    intensity_n: float
    density: RadialDensity
    seed: int | None

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)


def sample_directions(rng: np.random.Generator, size: int, d: int) -> np.ndarray:
    """Uniform points on S^{d-1}; for d = 1 a fair sign."""
    if d == 1:
        return (2.0 * rng.integers(0, 2, size=size) - 1.0)[:, None]
    z = rng.standard_normal((size, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_radii(rng: np.random.Generator, size: int, density: RadialDensity) -> np.ndarray:
    if density.family is Family.LIGHT:
        g = rng.standard_gamma(density.dim / density.tau, size)
        return (density.tau * g) ** (1.0 / density.tau)
    # 1 - U lies in (0, 1]; inverting the survival keeps full precision in the far tail
    return density.radius_from_sf(1.0 - rng.random(size))


def sample_cloud(n: float, density: RadialDensity, seed: int | None) -> PointCloud:
    """Poisson process with intensity n f: N ~ Poisson(n), then N i.i.d. points."""
    if not n >= 0:
        raise ParameterError(f"expected count must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(n))
    radii = sample_radii(rng, count, density)
    points = radii[:, None] * sample_directions(rng, count, density.dim)
    return PointCloud(points, float(n), density, seed)


def sample_iid(size: int, density: RadialDensity, rng: np.random.Generator) -> np.ndarray:
    """`size` i.i.d. draws from the density as an array of shape (size, d)."""
    return sample_radii(rng, size, density)[:, None] * sample_directions(rng, size, density.dim)


def union_of_balls_probability(centers: Sequence, r: float, density: RadialDensity,
                               mc_samples: int, seed: int | None) -> tuple[float, float]:
    """f-mass of the union of closed balls B(c_i, r), by Monte Carlo.

    Samples uniformly in the bounding box of the union and averages
    f(z) 1(z in union) times the box volume. Returns (estimate, stderr).
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        raise ParameterError("need at least one center")
    if mc_samples <= 0:
        raise ParameterError("mc_samples must be positive")
    if not r > 0:
        raise ParameterError(f"radius must be positive, got {r}")
    lo = centers.min(axis=0) - r
    hi = centers.max(axis=0) + r
    volume = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    total = np.empty(mc_samples)
    chunk = 1 << 16
    for start in range(0, mc_samples, chunk):
        m = min(chunk, mc_samples - start)
        z = lo + (hi - lo) * rng.random((m, centers.shape[1]))
        d2 = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        inside = (d2 <= r * r).any(axis=1)
        total[start:start + m] = np.where(inside, density.pdf(z), 0.0)
    est = volume * total.mean()
    se = volume * total.std(ddof=1) / math.sqrt(mc_samples) if mc_samples > 1 else float("inf")
    return float(est), float(se)
