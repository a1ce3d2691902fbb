"""Limiting objects: intensity measures, Poisson means, extremal fidis, stable series.

Notation: H = int h(0, y) dy over (R^d)^{k-1}, s = s_{d-1}, beta = alpha k - d.

Extremal fidis count tuples by their time stamp i_k / |P_n|, the largest of k
uniform order positions, whose law on [0, 1] has CDF t^k and total mass 1.
The default normalisation therefore uses a single 1/k! in the Fréchet and
Gumbel exponents; ``squared_factorial=True`` reproduces the variant with
(k!)^2 in the denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import sample_directions, sphere_surface_area
from .errors import ParameterError
from .topology import ConstraintH, evaluate_h_batch, proximity_bound

_CHUNK = 1 << 14


# ------------------------------------------------------------------ integrals of h


def _box_samples(rng, m, k, d, half_width):
    y = rng.uniform(-half_width, half_width, size=(m, k - 1, d))
    configs = np.concatenate([np.zeros((m, 1, d)), y], axis=1)
    return y, configs


def integrate_h(constraint: ConstraintH, k: int, d: int, mc_samples: int, seed,
                box_scale: float = 1.0) -> tuple[float, float]:
    """Monte Carlo estimate of int h(0, y) dy with its standard error.

    h vanishes once any |y_i| exceeds the proximity bound M, so uniform
    proposals on [-M, M]^{d(k-1)} (optionally enlarged by ``box_scale``) suffice.
    """
    if k != constraint.tuple_size:
        raise ParameterError(f"k={k} does not match the constraint tuple size {constraint.tuple_size}")
    if k == 1:
        return 1.0, 0.0
    if mc_samples <= 0:
        raise ParameterError("mc_samples must be positive")
    if box_scale < 1:
        raise ParameterError("the proposal box must contain [-M, M]^{d(k-1)}")
    half = proximity_bound(constraint) * box_scale
    volume = (2.0 * half) ** (d * (k - 1))
    rng = np.random.default_rng(seed)
    hits = 0
    cache: dict = {}
    for start in range(0, mc_samples, _CHUNK):
        m = min(_CHUNK, mc_samples - start)
        _, configs = _box_samples(rng, m, k, d, half)
        hits += int(evaluate_h_batch(constraint, configs, 1.0, cache).sum())
    p = hits / mc_samples
    se = volume * math.sqrt(p * (1 - p) / (mc_samples - 1)) if mc_samples > 1 else math.inf
    return volume * p, se


# ------------------------------------------------------------------ heavy tail


@dataclass(frozen=True)
class IntensityParams:
    k: int
    d: int
    h_integral: float
    h_stderr: float = 0.0
    alpha: float | None = None
    c: float | None = None


def _check_beta(k, d, alpha):
    beta = alpha * k - d
    if not beta > 0:
        raise ParameterError(f"need alpha k > d, got alpha={alpha}, k={k}, d={d}")
    return beta


def nu_heavy_tail_mass(k: int, d: int, alpha: float, h_integral: float, eta: float) -> float:
    """nu_k{all |x_i| >= eta} = s H eta^{-(alpha k - d)} / ((alpha k - d) k!)."""
    beta = _check_beta(k, d, alpha)
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    return sphere_surface_area(d) * h_integral * eta ** (-beta) / (beta * math.factorial(k))


def _intersect_boxes(rect, d):
    rect = np.asarray(rect, dtype=float)
    if rect.ndim == 2:
        rect = rect[None]
    if rect.shape[1:] != (2, d):
        raise ParameterError(f"each box must have shape (2, {d}) holding lower and upper corners")
    lo = rect[:, 0, :].max(axis=0)
    hi = rect[:, 1, :].min(axis=0)
    return lo, hi


def nu_heavy_rectangle(rect, k: int, d: int, alpha: float, constraint: ConstraintH | None = None,
                       mc_samples: int = 100_000, seed=None, h_integral=None,
                       min_norm: float = 0.0) -> tuple[float, float]:
    """Monte Carlo estimate of nu_k on a product of boxes (a_i, b_i], i = 0..k-1.

    The limit measure lives on the diagonal, so the x-integral runs over the
    intersection of the k boxes (further restricted to |x| >= min_norm):
    (1/k!) H int_box |x|^{-alpha k} dx. The x-integral is sampled in polar
    coordinates with radial density proportional to rho^{d-1-alpha k} on
    [rho_min, inf), rho_min being the distance from the origin to the region.
    ``h_integral`` may be given as (value, stderr); otherwise it is estimated.
    """
    beta = _check_beta(k, d, alpha)
    lo, hi = _intersect_boxes(rect, d)
    if np.any(lo >= hi):
        return 0.0, 0.0
    nearest = np.clip(0.0, lo, hi)
    rho_min = max(float(np.linalg.norm(nearest)), float(min_norm))
    if not rho_min > 0:
        raise ParameterError("region touches the origin, where the intensity is not finite")
    if h_integral is None:
        if constraint is None:
            raise ParameterError("need either a constraint or h_integral")
        h_integral = integrate_h(constraint, k, d, max(mc_samples // 4, 1000), None if seed is None else [seed, 1])
    H, H_se = h_integral if isinstance(h_integral, tuple) else (float(h_integral), 0.0)
    rng = np.random.default_rng(seed)
    total = sphere_surface_area(d) * rho_min ** (-beta) / beta
    hits = 0
    for start in range(0, mc_samples, _CHUNK):
        m = min(_CHUNK, mc_samples - start)
        # Pareto(beta) radius above rho_min
        rho = rho_min * (1.0 - rng.random(m)) ** (-1.0 / beta)
        x = rho[:, None] * sample_directions(rng, m, d)
        inside = np.all((x > lo) & (x <= hi), axis=1) & (rho >= min_norm)
        hits += int(inside.sum())
    p = hits / mc_samples
    X = total * p
    X_se = total * math.sqrt(p * (1 - p) / max(mc_samples - 1, 1))
    kf = math.factorial(k)
    est = H * X / kf
    se = math.sqrt((H * X_se) ** 2 + (X * H_se) ** 2) / kf
    return est, se


def scale_rect(rect, s: float) -> np.ndarray:
    return np.asarray(rect, dtype=float) * s


# ------------------------------------------------------------------ light tail


def _light_weights(constraint, k, d, c, rng, m, half):
    y, configs = _box_samples(rng, m, k, d, half)
    h = evaluate_h_batch(constraint, configs, 1.0).astype(float)
    theta = sample_directions(rng, m, d)
    if math.isinf(c):
        proj = np.zeros((m, k - 1))
    else:
        proj = np.einsum("mkd,md->mk", y, theta) / c
    return h, proj


def poisson_mean_light(k: int, d: int, c: float, constraint: ConstraintH, mc_samples: int,
                       seed) -> tuple[float, float]:
    """Limiting mean number of isolated k-tuples with all norms >= R_{k,n}.

    Evaluates (1/k!) int_y int_{S^{d-1}} int_{rho >= rho_0} exp(-k rho - sum <theta, y_i>/c) h(0, y)
    with rho_0 = max(0, max_i -<theta, y_i>/c), i.e. every point beyond the
    sphere of radius R. The rho integral is done in closed form,
    exp(-k rho_0)/k, and (y, theta) are sampled uniformly on
    [-M, M]^{d(k-1)} x S^{d-1}. For d = 1 the sphere is {-1, +1} with counting
    measure. c = inf gives s H / (k k!).
    """
    if k != constraint.tuple_size:
        raise ParameterError(f"k={k} does not match the constraint tuple size {constraint.tuple_size}")
    if not c > 0:
        raise ParameterError(f"c must lie in (0, inf], got {c}")
    if mc_samples <= 0:
        raise ParameterError("mc_samples must be positive")
    kf = math.factorial(k)
    s = sphere_surface_area(d)
    if k == 1:
        return s / kf, 0.0
    half = proximity_bound(constraint)
    volume = (2.0 * half) ** (d * (k - 1))
    rng = np.random.default_rng(seed)
    vals = np.empty(mc_samples)
    for start in range(0, mc_samples, _CHUNK):
        m = min(_CHUNK, mc_samples - start)
        h, proj = _light_weights(constraint, k, d, c, rng, m, half)
        rho0 = np.maximum(0.0, (-proj).max(axis=1))
        vals[start:start + m] = h * np.exp(-proj.sum(axis=1) - k * rho0) / k
    scale = volume * s / kf
    se = scale * vals.std(ddof=1) / math.sqrt(mc_samples) if mc_samples > 1 else math.inf
    return float(scale * vals.mean()), float(se)


def gumbel_prefactor(k: int, d: int, c: float, constraint: ConstraintH, mc_samples: int,
                     seed) -> tuple[float, float]:
    """I = int_y int_{S^{d-1}} exp(-sum <theta, y_i>/c) h(0, y) dtheta dy (s H when c = inf)."""
    if k != constraint.tuple_size:
        raise ParameterError(f"k={k} does not match the constraint tuple size {constraint.tuple_size}")
    if not c > 0:
        raise ParameterError(f"c must lie in (0, inf], got {c}")
    s = sphere_surface_area(d)
    if k == 1:
        return s, 0.0
    half = proximity_bound(constraint)
    volume = (2.0 * half) ** (d * (k - 1))
    rng = np.random.default_rng(seed)
    vals = np.empty(mc_samples)
    for start in range(0, mc_samples, _CHUNK):
        m = min(_CHUNK, mc_samples - start)
        h, proj = _light_weights(constraint, k, d, c, rng, m, half)
        vals[start:start + m] = h * np.exp(-proj.sum(axis=1))
    scale = volume * s
    return float(scale * vals.mean()), float(scale * vals.std(ddof=1) / math.sqrt(mc_samples))


# ------------------------------------------------------------------ extremal fidis


def _check_fidi_args(times, thresholds):
    t = np.asarray(times, dtype=float).reshape(-1)
    eta = np.asarray(thresholds, dtype=float).reshape(-1)
    if len(t) != len(eta) or len(t) == 0:
        raise ParameterError("times and thresholds must be non-empty and of equal length")
    if t[0] < 0 or t[-1] > 1 or np.any(np.diff(t) <= 0):
        raise ParameterError("times must satisfy 0 <= t_1 < ... < t_K <= 1")
    return t, eta


def _time_blocks(t, eta, k):
    prev = np.concatenate([[0.0], t[:-1]])
    increments = t ** k - prev ** k
    # min over j >= i of eta_j
    suffix_min = np.minimum.accumulate(eta[::-1])[::-1]
    return increments, suffix_min


def frechet_fidi(times, thresholds, k: int, d: int, alpha: float, h_integral: float,
                 squared_factorial: bool = False) -> float:
    """P(running max of |j_l| over s_l <= t_i is <= eta_i for all i).

    exp{-Lambda sum_i (t_i^k - t_{i-1}^k) (min_{j >= i} eta_j)^{-(alpha k - d)}},
    Lambda = s H / (k! (alpha k - d)), or with (k!)^2 when ``squared_factorial``.
    """
    beta = _check_beta(k, d, alpha)
    t, eta = _check_fidi_args(times, thresholds)
    if np.any(eta < 0):
        raise ParameterError("Fréchet thresholds must be >= 0")
    kf = math.factorial(k)
    lam = sphere_surface_area(d) * h_integral / (kf * beta)
    if squared_factorial:
        lam /= kf
    increments, m = _time_blocks(t, eta, k)
    with np.errstate(divide="ignore"):
        tail = np.where(m > 0, m ** (-beta), np.inf)
    expo = np.where(increments > 0, increments * tail, 0.0).sum()
    return float(math.exp(-lam * expo)) if math.isfinite(expo) else 0.0


def frechet_lambda(k: int, d: int, alpha: float, h_integral: float, squared_factorial: bool = False) -> float:
    beta = _check_beta(k, d, alpha)
    kf = math.factorial(k)
    lam = sphere_surface_area(d) * h_integral / (kf * beta)
    return lam / kf if squared_factorial else lam


def gumbel_fidi(times, thresholds, k: int, d: int, c: float, prefactor: float,
                squared_factorial: bool = False) -> float:
    """Gumbel analogue: exp{-(I / (k k!)) sum_i (t_i^k - t_{i-1}^k) exp(-k min_{j >= i} eta_j)}.

    ``prefactor`` is I from :func:`gumbel_prefactor` at the same c;
    ``squared_factorial`` uses (k!)^2 k in the denominator instead.
    """
    if not c > 0:
        raise ParameterError(f"c must lie in (0, inf], got {c}")
    t, eta = _check_fidi_args(times, thresholds)
    kf = math.factorial(k)
    lam = prefactor / (k * kf)
    if squared_factorial:
        lam /= kf
    increments, m = _time_blocks(t, eta, k)
    expo = float((increments * np.exp(-k * m)).sum())
    return float(math.exp(-lam * expo))


# ------------------------------------------------------------------ stable series


@dataclass(frozen=True)
class StableSeriesSpec:
    """Series C_alpha sum_j r_j Gamma_j^{-1/(2 alpha - 1)} for a symmetric (2 alpha - 1)-stable law."""

    alpha: float
    n_terms: int = 100_000
    C_alpha: float = float("nan")

    def __post_init__(self):
        if not 1 < self.alpha < 1.5:
            raise ParameterError(f"stable sums need 1 < alpha < 1.5, got {self.alpha}")
        if self.n_terms < 1:
            raise ParameterError("n_terms must be positive")

    @property
    def index(self) -> float:
        return 2 * self.alpha - 1

    @classmethod
    def from_h_integral(cls, alpha: float, h_integral: float, n_terms: int = 100_000) -> "StableSeriesSpec":
        """C_alpha = (H / (2 alpha - 1))^{1/(2 alpha - 1)}."""
        beta = 2 * alpha - 1
        return cls(alpha, n_terms, (h_integral / beta) ** (1 / beta))

    def tail_variance_bound(self) -> float:
        """C_alpha^2 sum_{j > N} j^{-2/beta}, bounded by the integral from N."""
        p = 2.0 / self.index
        return self.C_alpha ** 2 * self.n_terms ** (1 - p) / (p - 1)


def stable_series_terms(spec: StableSeriesSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Signs r_j and arrival times Gamma_j for one truncated series."""
    gammas = np.cumsum(rng.standard_exponential(spec.n_terms))
    signs = 2.0 * rng.integers(0, 2, size=spec.n_terms) - 1.0
    return signs, gammas


def stable_series_from_terms(spec: StableSeriesSpec, signs, gammas) -> float:
    return float(spec.C_alpha * np.sum(signs * gammas ** (-1.0 / spec.index)))


def stable_series_sample(spec: StableSeriesSpec, seed) -> float:
    if not math.isfinite(spec.C_alpha):
        raise ParameterError("C_alpha is not set; use StableSeriesSpec.from_h_integral")
    rng = np.random.default_rng(seed)
    return stable_series_from_terms(spec, *stable_series_terms(spec, rng))


def stable_series_samples(spec: StableSeriesSpec, size: int, seed) -> np.ndarray:
    """``size`` independent draws, each from its own child seed."""
    children = np.random.SeedSequence(seed).spawn(size)
    return np.array([stable_series_sample(spec, child) for child in children])


def hill_estimator(samples, k_top: int) -> float:
    """Hill estimate of the tail index of |samples| from the k_top largest values."""
    x = np.sort(np.abs(np.asarray(samples, dtype=float)))[::-1]
    if not 1 <= k_top < len(x):
        raise ParameterError("k_top must lie in [1, len(samples))")
    top = x[:k_top + 1]
    gamma = np.mean(np.log(top[:k_top])) - math.log(top[k_top])
    return 1.0 / gamma
