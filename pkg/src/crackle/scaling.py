"""Radii R_{k,n} beyond which isolated k-tuples are O(1) in number, plus related scales.

Heavy tail:  n^k r^{d(k-1)} R^d f(R)^k = 1,          c = R,    shift 0
Light tail:  n^k r^{d(k-1)} a(R) R^{d-1} f(R)^k = 1, c = a(R), shift R

with a = 1/psi'. Both equations are solved exactly at finite n on the branch
where the left side decreases in R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Family, RadialDensity
from .errors import ParameterError, SolverError

_REL_TOL = 1e-12
_RESIDUAL_TOL = 1e-9


# ------------------------------------------------------------------ r_n rules


@dataclass(frozen=True)
class RnRule:
    """Connectivity radius r_n as a function of n.

    kind is ``constant`` (r_n = scale), ``power`` (r_n = scale * n^s) or
    ``log_power`` (r_n = scale * (log n)^p).
    """

    kind: str = "constant"
    exponent: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power", "log_power"):
            raise ParameterError(f"unknown r_n rule {self.kind!r}")
        if not self.scale > 0:
            raise ParameterError(f"r_n scale must be positive, got {self.scale}")

    def __call__(self, n: float) -> float:
        if self.kind == "constant":
            return float(self.scale)
        if self.kind == "power":
            return float(self.scale * n ** self.exponent)
        return float(self.scale * math.log(n) ** self.exponent)

    def describe(self) -> str:
        if self.kind == "constant":
            return f"{self.scale:g}"
        var = "n" if self.kind == "power" else "log n"
        return f"{self.scale:g}*({var})^{self.exponent:g}"


def check_power_band(s: float, k: int, d: int) -> None:
    """For r_n = n^s the heavy-tail equation has a growing solution only for -k/(d(k-1)) < s <= 0."""
    if k < 2:
        if s > 0:
            raise ParameterError(f"r_n exponent s={s} must be <= 0")
        return
    lower = -k / (d * (k - 1))
    if not (lower < s <= 0):
        raise ParameterError(f"r_n = n^s needs {lower:.6g} < s <= 0 (k={k}, d={d}); got s={s}: "
                             "outside this band the scaling equation has no admissible solution")


# ------------------------------------------------------------------ solutions


@dataclass(frozen=True)
class Regime:
    """Limit regime of the light-tail counts.

    kind is ``nontrivial`` (c finite or infinite), ``vanishing``,
    ``unclassified`` or ``not_applicable`` (heavy tail).
    """

    kind: str
    c: float | None = None
    probe: tuple = field(default=(), compare=False)

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.c is not None:
            out["c"] = self.c
        return out


@dataclass(frozen=True)
class ScalingSolution:
    R_kn: float
    c_kn: float
    d_kn: float
    regime: Regime
    residual: float = 0.0


def _bisect_log(fun, lo: float, hi: float) -> float:
    """Root of a decreasing function on [lo, hi] by bisection in log R."""
    a, b = math.log(lo), math.log(hi)
    fa, fb = fun(lo), fun(hi)
    if not (fa >= 0 >= fb):
        raise SolverError("root is not bracketed")
    while b - a > _REL_TOL * 0.5:
        m = 0.5 * (a + b)
        fm = fun(math.exp(m))
        if fm == 0:
            return math.exp(m)
        if fm > 0:
            a = m
        else:
            b = m
    return math.exp(0.5 * (a + b))


def _solve_decreasing(log_lhs, mode: float) -> float:
    """Root of log_lhs on (mode, inf) where log_lhs decreases; bracket by doubling."""
    if not log_lhs(mode) > 0:
        raise SolverError("scaling equation has no root: the left side never reaches 1 "
                          "(n^k r_n^{d(k-1)} too small)")
    hi = max(2.0 * mode, 1.0)
    for _ in range(2000):
        if log_lhs(hi) < 0:
            break
        hi *= 2.0
    else:
        raise SolverError("failed to bracket the scaling root")
    return _bisect_log(log_lhs, mode, hi)


def _heavy_log_lhs(n, k, d, density, r_n, C):
    a, logC = density.alpha, math.log(C)
    base = k * math.log(n) + d * (k - 1) * math.log(r_n) + k * logC

    def fun(R):
        return base + d * math.log(R) - k * np.logaddexp(0.0, a * math.log(R))
    return fun


def heavy_closed_form(n: float, k: int, d: int, density: RadialDensity, r_n: float,
                      scale_C: float | None = None) -> float:
    """Asymptotic solution with f(R) ~ C R^{-alpha}: R = (C^k n^k r_n^{d(k-1)})^{1/(alpha k - d)}.

    For r_n = n^s this is C^{1/(alpha - d/k)} n^{(1 + s d (1 - 1/k)) / (alpha - d/k)}.
    """
    a = density.alpha
    C = density.scale_C if scale_C is None else scale_C
    log_R = (k * math.log(C) + k * math.log(n) + d * (k - 1) * math.log(r_n)) / (a * k - d)
    return math.exp(log_R)


def solve_R_heavy(n: float, k: int, d: int, density: RadialDensity, r_n: float,
                  scale_C: float | None = None) -> ScalingSolution:
    """Exact root of n^k r_n^{d(k-1)} R^d (C / (1 + R^alpha))^k = 1 on its decreasing branch.

    ``scale_C`` replaces the density's normalising constant in the equation,
    which is useful for comparing against unnormalised profiles.
    """
    if density.family is not Family.HEAVY:
        raise ParameterError("solve_R_heavy needs a heavy polynomial density")
    if d != density.dim:
        raise ParameterError(f"dimension mismatch: d={d}, density has dim {density.dim}")
    if not (n > 0 and r_n > 0 and k >= 1):
        raise ParameterError("need n > 0, r_n > 0 and k >= 1")
    a = density.alpha
    if not a * k > d:
        raise ParameterError(f"need alpha k > d, got alpha={a}, k={k}, d={d}")
    C = density.scale_C if scale_C is None else scale_C
    if not C > 0:
        raise ParameterError(f"scale constant must be positive, got {C}")
    fun = _heavy_log_lhs(n, k, d, density, r_n, C)
    # the left side peaks where R^alpha = d / (alpha k - d)
    mode = (d / (a * k - d)) ** (1.0 / a)
    R = _solve_decreasing(fun, mode)
    residual = abs(math.expm1(fun(R)))
    if residual > _RESIDUAL_TOL:
        raise SolverError(f"heavy-tail root residual {residual:.3g} exceeds {_RESIDUAL_TOL}")
    return ScalingSolution(R, R, 0.0, Regime("not_applicable"), residual)


def a_of(z, density: RadialDensity):
    """Auxiliary function a(z) = 1 / psi'(z); z^{1 - tau} for the von Mises family."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(~(z_arr > 0)):
        raise ParameterError("a(z) needs z > 0")
    if density.family is Family.LIGHT:
        out = z_arr ** (1.0 - density.tau)
    else:
        der = np.asarray(density.potential_prime(z_arr), dtype=float)
        if np.any(~(der > 0)):
            raise ParameterError("psi'(z) must be positive for a(z) = 1/psi'(z)")
        out = 1.0 / der
    return float(out) if np.ndim(z) == 0 else out


def _light_log_lhs(n, k, d, density, r_n, C):
    base = k * math.log(n) + d * (k - 1) * math.log(r_n) + k * math.log(C)

    def fun(R):
        return base + math.log(a_of(R, density)) + (d - 1) * math.log(R) - k * float(density.potential(R))
    return fun


def light_closed_form(n: float, k: int, d: int, density: RadialDensity, r_n: float = 1.0,
                      scale_C: float | None = None) -> float:
    """(tau log n + (d - tau)/k log(tau log n) + tau log C + tau d (k-1)/k log r_n)^{1/tau}."""
    tau = density.tau
    C = density.scale_C if scale_C is None else scale_C
    inner = (tau * math.log(n) + (d - tau) / k * math.log(tau * math.log(n))
             + tau * math.log(C) + tau * d * (k - 1) / k * math.log(r_n))
    if not inner > 0:
        raise ParameterError("closed form is undefined for this n (non-positive base)")
    return inner ** (1.0 / tau)


def solve_R_light(n: float, k: int, d: int, density: RadialDensity, r_n: float,
                  scale_C: float | None = None) -> ScalingSolution:
    """Exact root of n^k r_n^{d(k-1)} a(R) R^{d-1} f(R)^k = 1 on its decreasing branch."""
    if density.family is Family.HEAVY:
        raise ParameterError("solve_R_light needs a light-tailed density")
    if d != density.dim:
        raise ParameterError(f"dimension mismatch: d={d}, density has dim {density.dim}")
    if not (n > 0 and r_n > 0 and k >= 1):
        raise ParameterError("need n > 0, r_n > 0 and k >= 1")
    C = density.scale_C if scale_C is None else scale_C
    if not C > 0:
        raise ParameterError(f"scale constant must be positive, got {C}")
    fun = _light_log_lhs(n, k, d, density, r_n, C)
    if density.family is Family.LIGHT:
        tau = density.tau
        # derivative of the log left side vanishes where R^tau = (d - tau)/k
        mode = ((d - tau) / k) ** (1.0 / tau) if d > tau else 1e-300
        mode = max(mode, 1e-300)
    else:
        grid = np.geomspace(1e-6, 1e6, 1201)
        vals = [fun(x) for x in grid]
        mode = float(grid[int(np.argmax(vals))])
    if mode < 1e-12:
        # left side decreases from +inf; any small positive point brackets from below
        mode = 1e-12
        while not fun(mode) > 0 and mode > 1e-300:
            mode *= 1e-6
    R = _solve_decreasing(fun, mode)
    residual = abs(math.expm1(fun(R)))
    if residual > _RESIDUAL_TOL:
        raise SolverError(f"light-tail root residual {residual:.3g} exceeds {_RESIDUAL_TOL}")
    return ScalingSolution(R, a_of(R, density), R, Regime("unclassified"), residual)


def solve_R(n: float, k: int, density: RadialDensity, r_n: float,
            scale_C: float | None = None) -> ScalingSolution:
    """Dispatch to the heavy or light solver for this density."""
    if density.family is Family.HEAVY:
        return solve_R_heavy(n, k, density.dim, density, r_n, scale_C)
    return solve_R_light(n, k, density.dim, density, r_n, scale_C)


# ------------------------------------------------------------------ regimes


def classify_regime(density: RadialDensity, rule: RnRule, k: int,
                    n_probe=(1e3, 1e4, 1e5, 1e6, 1e7)) -> Regime:
    """Limit of a(R_{k,n}) / r_n, decided analytically for the von Mises family.

    R_{k,n} grows like (tau log n)^{1/tau}, so a(R_{k,n}) ~ (tau log n)^{(1-tau)/tau};
    comparing with the decay of r_n gives the regime. The ratio along ``n_probe``
    is returned as a consistency record. Pluggable potentials are reported as
    unclassified with the probe values.
    """
    if density.family is Family.HEAVY:
        raise ParameterError("regimes are defined for light-tailed densities only")
    d = density.dim
    probe = []
    for n in n_probe:
        sol = solve_R_light(n, k, d, density, rule(n))
        probe.append((float(n), sol.c_kn / rule(n)))
    probe = tuple(probe)
    if density.family is not Family.LIGHT:
        return Regime("unclassified", None, probe)
    tau = density.tau
    if rule.kind == "power" and rule.exponent < 0:
        return Regime("nontrivial", math.inf, probe)
    if rule.kind == "power" and rule.exponent > 0:
        return Regime("vanishing", 0.0, probe)
    p = rule.exponent if rule.kind == "log_power" else 0.0
    log_exponent = (1.0 - tau) / tau - p
    if abs(log_exponent) < 1e-12:
        return Regime("nontrivial", tau ** ((1.0 - tau) / tau) / rule.scale, probe)
    if log_exponent > 0:
        return Regime("nontrivial", math.inf, probe)
    return Regime("vanishing", 0.0, probe)


# ------------------------------------------------------------------ normalisation


def orthant_direction(x) -> np.ndarray:
    """S(x) = (|x_1|, ..., |x_d|) / |x|."""
    x = np.asarray(x, dtype=float)
    return np.abs(x) / np.linalg.norm(x, axis=-1, keepdims=True)


def normalize_point(x, solution: ScalingSolution) -> np.ndarray:
    """(x - d_kn S(x)) / c_kn."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if solution.d_kn == 0:
        return x / solution.c_kn
    if not np.linalg.norm(x) > 0:
        raise ParameterError("cannot normalise the origin when the shift is nonzero")
    return (x - solution.d_kn * orthant_direction(x)) / solution.c_kn


# ------------------------------------------------------------------ contractibility


@dataclass(frozen=True)
class ContractibilityRadii:
    R0: float
    R1: float
    A_n: float
    B_n: float
    stronger_condition: float


def check_delta_g(d: int, C: float, delta: float, g: float) -> None:
    if not (0 < g < 1):
        raise ParameterError(f"g must lie in (0, 1), got {g}")
    if not d - math.exp(delta) * g ** d * C < 0:
        raise ParameterError(f"need d - e^delta g^d C < 0; got {d - math.exp(delta) * g ** d * C:.4g} "
                             f"(d={d}, C={C:.4g}, delta={delta}, g={g})")


def _contract_terms(n: float, density: RadialDensity, r_n: float, delta: float):
    d = density.dim
    log_n = math.log(n)
    if not log_n > 1:
        return None
    z = float(density.potential_inverse(log_n))
    inner = z / r_n
    if not inner > 1:
        return None
    A = log_n + d * math.log(r_n) - math.log(math.log(inner)) - delta
    B = log_n + (d - 1) * math.log(z) + math.log(a_of(z, density)) + math.log(log_n)
    if not (A > 0 and B > 0):
        return None
    return A, B, z


def stronger_condition(n: float, density: RadialDensity, r_n: float) -> float:
    """a(psi^{-1}(log n)) log log n / r_n, which should tend to zero."""
    z = float(density.potential_inverse(math.log(n)))
    return a_of(z, density) * math.log(math.log(n)) / r_n


def contractibility_radii(n: float, density: RadialDensity, r_n: float, delta: float, g: float,
                          rule=None) -> ContractibilityRadii:
    """Inner radius R0 (ball covered by r_n-balls) and outer radius R1 (no points beyond).

    R0 = psi^{-1}(A_n), A_n = log n + d log r_n - log log(psi^{-1}(log n) / r_n) - delta
    R1 = psi^{-1}(B_n), B_n = log n + (d-1) log psi^{-1}(log n) + log a(psi^{-1}(log n)) + log log n

    ``rule`` (a callable n -> r_n) is only used to report the smallest admissible n
    when A_n or B_n is not defined.
    """
    if density.family is Family.HEAVY:
        raise ParameterError("contractibility radii need a light-tailed density")
    if density.family is Family.PSI and density.psi_index is not None and not density.psi_index > 1:
        raise ParameterError("psi must be regularly varying with index > 1")
    if density.family is Family.LIGHT and not density.tau > 1:
        raise ParameterError("psi(z) = z^tau / tau must have tau > 1")
    check_delta_g(density.dim, density.scale_C, delta, g)
    terms = _contract_terms(n, density, r_n, delta)
    if terms is None:
        hint = ""
        if rule is not None:
            n_min = minimal_admissible_n(density, rule, delta)
            hint = f"; smallest admissible n is about {n_min:.4g}"
        raise ParameterError(f"A_n or B_n is not defined at n={n:g}{hint}")
    A, B, _ = terms
    R0 = float(density.potential_inverse(A))
    R1 = float(density.potential_inverse(B))
    return ContractibilityRadii(R0, R1, A, B, stronger_condition(n, density, r_n))


def minimal_admissible_n(density: RadialDensity, rule, delta: float) -> float:
    """Smallest n on a fine log grid beyond which A_n and B_n are defined."""
    last_bad = None
    grid = np.exp(np.linspace(math.log(3.0), math.log(1e300), 6000))
    ok = [_contract_terms(n, density, rule(n), delta) is not None for n in grid]
    for i, good in enumerate(ok):
        if not good:
            last_bad = i
    if last_bad is None:
        return float(grid[0])
    if last_bad == len(grid) - 1:
        return math.inf
    return float(grid[last_bad + 1])
