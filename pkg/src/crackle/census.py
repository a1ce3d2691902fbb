"""Observable statistics on sampled clouds and replicated campaigns.

The central count is the number of isolated k-tuples far from the origin: the
connected components of G(P_n, r_n) with exactly k points, all of norm >= R,
whose configuration satisfies h. Being a whole component is exactly the
isolation condition, so no k-subset enumeration is needed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .config import ExperimentConfig
from .distributions import Family, PointCloud, RadialDensity, derive_seed, sample_cloud, sample_directions
from .errors import CrackleError, ParameterError, UnsupportedConfiguration
from .geometry import build_geometric_graph, cech_complex, component_labels, components_of_size
from .limits import integrate_h, nu_heavy_tail_mass, poisson_mean_light
from .scaling import ScalingSolution, classify_regime, solve_R
from .topology import ConstraintH, ConstraintKind, betti_numbers, connected, evaluate_h_batch, proximity_bound


def _points_and_norms(cloud):
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts, np.linalg.norm(pts, axis=1)


def _h_mask(constraint: ConstraintH | None, pts: np.ndarray, comps: np.ndarray, r: float) -> np.ndarray:
    """h on each component (rows of ``comps``); components are connected already."""
    if len(comps) == 0:
        return np.zeros(0, dtype=bool)
    if constraint is None or constraint.kind is ConstraintKind.CONNECTED:
        return np.ones(len(comps), dtype=bool)
    if constraint.tuple_size != comps.shape[1]:
        raise ParameterError("constraint tuple size does not match the component size")
    return evaluate_h_batch(constraint, pts[comps], r).astype(bool)


# ------------------------------------------------------------------ crackle counts


def crackle_components(cloud, k: int, constraint: ConstraintH | None, r_n: float, R: float) -> np.ndarray:
    """Index array (m, k) of the isolated k-components counted by :func:`count_crackle_tuples`.

    A component whose points all have norm >= R only has neighbours of norm
    >= R - r_n, so components are computed on that sub-cloud alone.
    """
    if not R > 0:
        raise ParameterError(f"R must be positive, got {R}")
    pts, norms = _points_and_norms(cloud)
    keep = np.nonzero(norms >= R - r_n)[0]
    if len(keep) < k:
        return np.zeros((0, k), dtype=np.int64)
    labels = component_labels(pts[keep], r_n)
    comps = components_of_size(labels, k)
    if not comps:
        return np.zeros((0, k), dtype=np.int64)
    comps = keep[np.array(comps)]
    far = np.all(norms[comps] >= R, axis=1)
    comps = comps[far]
    return comps[_h_mask(constraint, pts, comps, r_n)]


def count_crackle_tuples(cloud, k: int, constraint: ConstraintH | None, r_n: float, R: float) -> int:
    """Number of isolated k-components with every point at norm >= R and h = 1."""
    return int(len(crackle_components(cloud, k, constraint, r_n, R)))


def _connected_subsets(adj: list[set[int]], size: int) -> int:
    """Count vertex subsets of the given size inducing a connected subgraph (ESU enumeration)."""
    count = 0

    def extend(sub: list[int], ext: set[int], v: int):
        nonlocal count
        if len(sub) == size:
            count += 1
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            closed = set(sub)
            for u in sub:
                closed |= adj[u]
            new = {u for u in adj[w] if u > v and u not in closed}
            extend(sub + [w], ext | new, v)

    for v in range(len(adj)):
        extend([v], {u for u in adj[v] if u > v}, v)
    return count


def count_connected_tuples(cloud, k_plus_1: int, r_n: float, R: float) -> int:
    """Number of (k+1)-subsets of points with norm >= R whose Čech complex at r_n is connected."""
    if k_plus_1 < 1:
        raise ParameterError("subset size must be >= 1")
    pts, norms = _points_and_norms(cloud)
    outside = pts[norms >= R]
    if len(outside) < k_plus_1:
        return 0
    labels = component_labels(outside, r_n)
    total = 0
    sizes = np.bincount(labels)
    for lab in np.nonzero(sizes >= k_plus_1)[0]:
        members = np.nonzero(labels == lab)[0]
        graph = build_geometric_graph(outside[members], r_n)
        total += _connected_subsets(graph.adjacency(), k_plus_1)
    return total


def betti_outside_ball(cloud, r_n: float, R: float, betti_index: int) -> int:
    """beta_p of the Čech complex on the points of norm > R, summed over components."""
    if betti_index < 0:
        raise ParameterError("betti_index must be >= 0")
    pts, norms = _points_and_norms(cloud)
    outside = pts[norms > R]
    if len(outside) == 0:
        return 0
    labels = component_labels(outside, r_n)
    if betti_index == 0:
        return int(labels.max()) + 1
    total = 0
    sizes = np.bincount(labels)
    # a p-cycle needs at least p + 2 vertices
    for lab in np.nonzero(sizes >= betti_index + 2)[0]:
        sub = outside[labels == lab]
        cx = cech_complex(sub, r_n, betti_index + 1)
        total += betti_numbers(cx, betti_index)[betti_index]
    return int(total)


# ------------------------------------------------------------------ annuli


@dataclass(frozen=True)
class AnnuliTable:
    """Counts of isolated m-components by annulus; rows ordered from the outside in."""

    radii: tuple[float, ...]
    sizes: tuple[int, ...]
    counts: np.ndarray  # (len(radii), len(sizes))

    def row_labels(self) -> list[str]:
        out = [f"[{self.radii[0]:.6g}, inf)"]
        out += [f"[{lo:.6g}, {hi:.6g})" for hi, lo in zip(self.radii[:-1], self.radii[1:])]
        return out


def annuli_census(cloud, r_n: float, radii, constraints) -> AnnuliTable:
    """Table of isolated m-components matching Γ_m, by annulus.

    Rows are [R_2, inf), [R_3, R_2), ..., [R_K, R_{K-1}); a component is placed
    in the annulus containing its point nearest the origin, so the rows
    partition all isolated components beyond R_K.
    """
    radii = tuple(float(x) for x in radii)
    if len(radii) == 0 or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be strictly decreasing")
    if len(constraints) == 0:
        raise ParameterError("need at least one constraint")
    pts, norms = _points_and_norms(cloud)
    sizes = tuple(c.tuple_size for c in constraints)
    counts = np.zeros((len(radii), len(constraints)), dtype=np.int64)
    inner = radii[-1]
    keep = np.nonzero(norms >= inner - r_n)[0]
    if len(keep) == 0:
        return AnnuliTable(radii, sizes, counts)
    labels = component_labels(pts[keep], r_n)
    # edges of the row intervals, increasing: R_K < ... < R_2 < inf
    edges = np.array(radii[::-1] + (np.inf,))
    for col, constraint in enumerate(constraints):
        comps = components_of_size(labels, constraint.tuple_size)
        if not comps:
            continue
        comps = keep[np.array(comps)]
        inner_norm = norms[comps].min(axis=1)
        comps, inner_norm = comps[inner_norm >= inner], inner_norm[inner_norm >= inner]
        ok = _h_mask(constraint, pts, comps, r_n)
        pos = np.searchsorted(edges, inner_norm[ok], side="right") - 1
        row = len(radii) - 1 - pos
        np.add.at(counts[:, col], row, 1)
    return AnnuliTable(radii, sizes, counts)


# ------------------------------------------------------------------ maxima and sums


@dataclass(frozen=True)
class MaximaPath:
    t_grid: np.ndarray
    values: np.ndarray  # -inf where no tuple qualifies yet

    @property
    def endpoint(self) -> float:
        return float(self.values[-1])


def maxima_path(cloud, k: int, constraint: ConstraintH | None, r_n: float,
                scaling: ScalingSolution, t_grid) -> MaximaPath:
    """Running maximum of (|X_{i_1}| - d_kn)/c_kn over isolated k-components with h = 1.

    A component enters at time (largest index + 1)/|P_n| and contributes the
    norm of its smallest-index point; indices follow the cloud order.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) < 0) or (len(t) and (t[0] < 0 or t[-1] > 1)):
        raise ParameterError("t_grid must be sorted within [0, 1]")
    pts, norms = _points_and_norms(cloud)
    out = np.full(len(t), -np.inf)
    if len(pts) < k:
        return MaximaPath(t, out)
    comps = components_of_size(component_labels(pts, r_n), k)
    if not comps:
        return MaximaPath(t, out)
    comps = np.sort(np.array(comps), axis=1)
    comps = comps[_h_mask(constraint, pts, comps, r_n)]
    if len(comps) == 0:
        return MaximaPath(t, out)
    value = (norms[comps[:, 0]] - scaling.d_kn) / scaling.c_kn
    entry = comps[:, -1] + 1
    order = np.argsort(entry, kind="stable")
    entry, running = entry[order], np.maximum.accumulate(value[order])
    limit = np.floor(len(pts) * t).astype(np.int64)
    pos = np.searchsorted(entry, limit, side="right") - 1
    out = np.where(pos >= 0, running[np.maximum(pos, 0)], -np.inf)
    return MaximaPath(t, out)


def partial_sum_statistic(cloud, r_n: float, R_2n: float, constraint: ConstraintH | None) -> float:
    """R^{-1} * sum of X_{i_1} over isolated pairs with h = 1, X_{i_1} the smaller-index point (d = 1)."""
    pts, _ = _points_and_norms(cloud)
    if pts.shape[1] != 1:
        raise UnsupportedConfiguration("partial sums are defined for d = 1 only")
    if constraint is not None and constraint.tuple_size != 2:
        raise UnsupportedConfiguration("partial sums are defined for k = 2 only")
    if len(pts) < 2:
        return 0.0
    comps = components_of_size(component_labels(pts, r_n), 2)
    if not comps:
        return 0.0
    comps = np.sort(np.array(comps), axis=1)
    comps = comps[_h_mask(constraint, pts, comps, r_n)]
    # correctly rounded summation keeps the reflection symmetry exact
    return math.fsum(pts[comps[:, 0], 0].tolist()) / R_2n


# ------------------------------------------------------------------ contractibility


def contractibility_event(cloud, R0: float, R1: float, r_n: float) -> tuple[bool, bool]:
    """(B(0, R0) covered by r_n-balls around points inside it, no point beyond R1); d = 1."""
    pts, norms = _points_and_norms(cloud)
    if pts.shape[1] != 1:
        raise UnsupportedConfiguration("the exact coverage check is implemented for d = 1")
    empty = bool(np.all(norms <= R1))
    x = np.sort(pts[norms <= R0, 0])
    if len(x) == 0:
        return False, empty
    covered = bool(x[0] - r_n <= -R0 and x[-1] + r_n >= R0 and np.all(np.diff(x) <= 2 * r_n))
    return covered, empty


# ------------------------------------------------------------------ goodness of fit


@dataclass(frozen=True)
class PoissonFit:
    lam: float
    chi2: float
    dof: int
    p_value: float
    tv_distance: float
    bins: tuple = ()

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "chi2": self.chi2, "dof": self.dof,
                "p_value": self.p_value, "tv_distance": self.tv_distance,
                "bins": [list(b) for b in self.bins]}


def poisson_tv(counts, lam: float) -> float:
    counts = np.asarray(counts, dtype=np.int64)
    top = int(counts.max()) if len(counts) else 0
    emp = np.bincount(counts, minlength=top + 1) / max(len(counts), 1)
    pmf = stats.poisson.pmf(np.arange(top + 1), lam) if lam > 0 else np.eye(1, top + 1)[0]
    tail = stats.poisson.sf(top, lam) if lam > 0 else 0.0
    return float(0.5 * (np.abs(emp - pmf).sum() + tail))


def poisson_gof(counts, lam: float, fitted: bool = False) -> PoissonFit:
    """Chi-square test of counts against Poisson(lam) on pooled bins plus TV distance.

    Bins are consecutive values merged until each expected count is >= 5, the
    last bin being open-ended. ``fitted`` removes one extra degree of freedom
    when lam was estimated from the same counts.
    """
    counts = np.asarray(counts)
    if counts.size == 0:
        raise ParameterError("need at least one count")
    if np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise ParameterError("counts must be non-negative integers")
    if not lam >= 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    counts = counts.astype(np.int64)
    m = len(counts)
    if lam == 0:
        tv = float(np.mean(counts != 0))
        return PoissonFit(0.0, 0.0 if tv == 0 else math.inf, 0, 1.0 if tv == 0 else 0.0, tv)
    top = int(max(counts.max(), stats.poisson.ppf(1 - 1e-12, lam)))
    pmf = stats.poisson.pmf(np.arange(top + 1), lam)
    bins, lo, acc = [], 0, 0.0
    for v in range(top + 1):
        acc += pmf[v] * m
        if acc >= 5:
            bins.append((lo, v))
            lo, acc = v + 1, 0.0
    if not bins:
        bins = [(0, top)]
    elif lo <= top:
        bins[-1] = (bins[-1][0], top)
    bins[-1] = (bins[-1][0], math.inf)
    observed, expected = [], []
    for a, b in bins:
        hi = counts.max() if math.isinf(b) else b
        observed.append(int(np.sum((counts >= a) & (counts <= hi))))
        p = stats.poisson.sf(a - 1, lam) if math.isinf(b) else stats.poisson.cdf(b, lam) - stats.poisson.cdf(a - 1, lam)
        expected.append(p * m)
    observed, expected = np.array(observed, float), np.array(expected, float)
    dof = len(bins) - 1 - (1 if fitted else 0)
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    p_value = float(stats.chi2.sf(chi2, dof)) if dof > 0 else 1.0
    return PoissonFit(float(lam), chi2, dof, p_value, poisson_tv(counts, lam),
                      tuple((a, b if math.isfinite(b) else None) for a, b in bins))


# ------------------------------------------------------------------ campaigns


def theoretical_lambda(config: ExperimentConfig) -> tuple[float | None, float, dict]:
    """Limiting mean of the crackle count for this configuration, with stderr and notes."""
    density, k, d = config.density(), config.k, config.dim
    constraint = config.constraint()
    seed = derive_seed(config.seed, 10**6)
    H, H_se = integrate_h(constraint, k, d, config.mc_samples, seed)
    notes = {"h_integral": H, "h_integral_stderr": H_se}
    if density.family is Family.HEAVY:
        lam = nu_heavy_tail_mass(k, d, density.alpha, H, 1.0)
        return lam, lam * H_se / H if H > 0 else 0.0, notes
    regime = classify_regime(density, config.rn(), k)
    notes["regime"] = regime.describe()
    if regime.kind == "vanishing":
        return 0.0, 0.0, notes
    if regime.kind != "nontrivial":
        return None, math.nan, notes
    lam, se = poisson_mean_light(k, d, regime.c, constraint, config.mc_samples, derive_seed(config.seed, 10**6 + 1))
    return lam, se, notes


@dataclass
class CensusReport:
    config: dict
    rows: list[dict]  # one per (n, replication)
    summaries: list[dict]  # one per n
    runtime_seconds: float = field(default=0.0, compare=False)

    def counts(self, n: float | None = None) -> np.ndarray:
        return np.array([r["count"] for r in self.rows if n is None or r["n"] == n], dtype=np.int64)

    def to_json(self) -> str:
        payload = {"tool_version": __version__, "config": self.config, "summaries": self.summaries}
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replication", "n", "k", "count", "R_kn", "seed"])
        for r in self.rows:
            writer.writerow([r["replication"], repr(r["n"]), r["k"], r["count"], repr(r["R_kn"]), r["seed"]])
        return buf.getvalue()


def _one_replication(args):
    config, grid_index, rep = args
    n = config.n_grid[grid_index]
    density = config.density()
    r_n = config.rn()(n)
    seed = derive_seed(config.seed, grid_index, rep)
    try:
        sol = solve_R(n, config.k, density, r_n)
        cloud = sample_cloud(n, density, seed)
        count = count_crackle_tuples(cloud, config.k, config.constraint(), r_n, sol.R_kn)
    except CrackleError as exc:
        raise type(exc)(f"replication {rep} at n={n:g}: {exc}") from exc
    return {"replication": rep, "n": n, "k": config.k, "count": count, "R_kn": sol.R_kn, "seed": seed}


def run_replications(config: ExperimentConfig, workers: int = 1) -> CensusReport:
    """Run every (n, replication) task and summarise the counts per n.

    Each task owns a seed derived from (master seed, grid index, replication),
    so results do not depend on the number of workers or execution order.
    """
    start = time.perf_counter()
    tasks = [(config, g, rep) for g in range(len(config.n_grid)) for rep in range(config.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_replication, tasks, chunksize=8))
    else:
        rows = [_one_replication(t) for t in tasks]
    lam, lam_se, notes = theoretical_lambda(config)
    summaries = []
    for n in config.n_grid:
        counts = np.array([r["count"] for r in rows if r["n"] == n], dtype=np.int64)
        mean = float(counts.mean())
        var = float(counts.var(ddof=1)) if len(counts) > 1 else 0.0
        entry = {
            "n": n,
            "r_n": config.rn()(n),
            "R_kn": rows[[r["n"] for r in rows].index(n)]["R_kn"],
            "replications": int(len(counts)),
            "mean": mean,
            "variance": var,
            "stderr": math.sqrt(var / len(counts)) if len(counts) > 1 else math.nan,
            "lambda": lam,
            "lambda_stderr": lam_se,
            "fit_to_empirical_mean": poisson_gof(counts, mean, fitted=True).as_dict(),
        }
        if lam is not None:
            entry["fit_to_lambda"] = poisson_gof(counts, lam).as_dict()
        entry.update(notes)
        summaries.append(entry)
    return CensusReport(config.as_dict(), rows, summaries, time.perf_counter() - start)


# ------------------------------------------------------------------ Palm cross-check


@dataclass(frozen=True)
class PalmConfig:
    density: RadialDensity
    n: float
    k: int
    constraint: ConstraintH
    r_n: float
    R: float
    direct_replications: int = 20_000
    palm_samples: int = 200_000
    seed: int = 0


@dataclass(frozen=True)
class PalmResult:
    direct: float
    direct_stderr: float
    palm: float
    palm_stderr: float

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.direct_stderr, self.palm_stderr)

    def agree(self, z: float = 3.0) -> bool:
        return abs(self.direct - self.palm) <= z * self.combined_stderr


def _palm_isolated(tuples: np.ndarray, density: RadialDensity, n: float, r: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Sample P'_n near each tuple and report whether no point falls within r of it.

    P'_n restricted to the bounding box B of the r-neighbourhood is drawn by
    thinning a homogeneous process of rate n max_B f, which is exact.
    """
    m, _, d = tuples.shape
    out = np.ones(m, dtype=bool)
    lo = tuples.min(axis=1) - r
    hi = tuples.max(axis=1) + r
    nearest = np.clip(0.0, lo, hi)
    fmax = density.pdf(nearest)
    vol = np.prod(hi - lo, axis=1)
    counts = rng.poisson(n * fmax * vol)
    for i in np.nonzero(counts)[0]:
        z = lo[i] + (hi[i] - lo[i]) * rng.random((counts[i], d))
        z = z[rng.random(counts[i]) * fmax[i] <= density.pdf(z)]
        if len(z):
            d2 = ((z[:, None, :] - tuples[i][None, :, :]) ** 2).sum(-1)
            out[i] = not np.any(d2 <= r * r)
    return out


def palm_crosscheck(config: PalmConfig) -> PalmResult:
    """Two estimates of E sum_i u_n(X_i, P_n) for u = isolated, h = 1, all norms >= R.

    direct: average of :func:`count_crackle_tuples` over independent clouds.
    palm:   (n^k / k!) E u_n(X, X ∪ P'_n) with X i.i.d. from f. The first point
            is drawn from f conditioned on |x| >= R (weight P(|X| >= R)); the
            others as X_1 + r U_j, U_j uniform on [-M, M]^d (weight f(X_j)(2 M r)^d),
            which covers every configuration with h = 1.
    """
    cfg = config
    if cfg.n > 1000:
        raise ParameterError("the Palm cross-check is meant for n <= 1000")
    density, k, r = cfg.density, cfg.k, cfg.r_n
    d = density.dim
    # direct side
    direct = np.empty(cfg.direct_replications)
    for rep in range(cfg.direct_replications):
        cloud = sample_cloud(cfg.n, density, derive_seed(cfg.seed, 0, rep))
        direct[rep] = count_crackle_tuples(cloud, k, cfg.constraint, r, cfg.R)
    # Palm side
    rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    q = float(density.radial_sf(cfg.R))
    M = proximity_bound(cfg.constraint)
    weights = np.zeros(cfg.palm_samples)
    chunk = 4096
    for start in range(0, cfg.palm_samples, chunk):
        m = min(chunk, cfg.palm_samples - start)
        v = q * (1.0 - rng.random(m))
        first = density.radius_from_sf(v)[:, None] * sample_directions(rng, m, d)
        offsets = r * rng.uniform(-M, M, size=(m, k - 1, d))
        tuples = np.concatenate([first[:, None, :], first[:, None, :] + offsets], axis=1)
        w = np.full(m, q)
        if k > 1:
            w *= np.prod(density.pdf(tuples[:, 1:, :]) * (2 * M * r) ** d, axis=1)
        norms = np.linalg.norm(tuples, axis=2)
        ok = np.all(norms >= cfg.R, axis=1)
        conf = tuples - tuples[:, :1, :]
        ok &= evaluate_h_batch(connected(k), conf, r).astype(bool)
        if cfg.constraint.kind is not ConstraintKind.CONNECTED:
            ok &= evaluate_h_batch(cfg.constraint, conf, r).astype(bool)
        idx = np.nonzero(ok)[0]
        if len(idx):
            iso = _palm_isolated(tuples[idx], density, cfg.n, r, rng)
            weights[start + idx[iso]] = w[idx[iso]]
    pref = cfg.n ** k / math.factorial(k)
    palm = pref * weights.mean()
    palm_se = pref * weights.std(ddof=1) / math.sqrt(cfg.palm_samples)
    return PalmResult(float(direct.mean()), float(direct.std(ddof=1) / math.sqrt(len(direct))),
                      float(palm), float(palm_se))
