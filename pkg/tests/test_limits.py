import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from crackle.errors import ParameterError
from crackle.limits import (StableSeriesSpec, frechet_fidi, frechet_lambda, gumbel_fidi, gumbel_prefactor,
                            hill_estimator, integrate_h, nu_heavy_rectangle, nu_heavy_tail_mass,
                            poisson_mean_light, scale_rect, sphere_surface_area, stable_series_samples)
from crackle.topology import betti_cycle, connected, gamma_iso, path_graph


def _within(a, b, se, z=3.0):
    return abs(a - b) <= z * se


def test_integrate_h_pair_d1_is_exact():
    est, se = integrate_h(connected(2), 2, 1, 10_000, 0)
    assert est == 2.0 and se == 0.0


def test_integrate_h_pair_d2_is_disk_area():
    est, se = integrate_h(connected(2), 2, 2, 200_000, 1)
    assert _within(est, math.pi, se)


def test_integrate_h_betti_pair_matches_connected():
    a, sa = integrate_h(connected(2), 2, 2, 100_000, 2)
    b, sb = integrate_h(betti_cycle(2), 2, 2, 100_000, 3)
    assert _within(a, b, math.hypot(sa, sb))


def test_integrate_h_triple_against_grid():
    # grid count of {(y1, y2): sorted gaps of {0, y1, y2} are <= 1}, cell size 1/1000
    g = (np.arange(4000) + 0.5) / 1000 - 2.0
    y1, y2 = np.meshgrid(g, g, indexing="ij")
    s = np.sort(np.stack([np.zeros_like(y1), y1, y2]), axis=0)
    ok = (np.diff(s, axis=0) <= 1).all(axis=0)
    oracle = ok.sum() * 1e-6
    est, se = integrate_h(connected(3), 3, 1, 200_000, 4)
    assert abs(est - oracle) <= 3 * se + 0.01
    # a path on three points: either the triangle is missing an edge, or it is the full triangle
    p, sp = integrate_h(gamma_iso(path_graph(3)), 3, 1, 200_000, 5)
    assert p < est


def test_integrate_h_box_invariance():
    a, sa = integrate_h(connected(3), 3, 2, 100_000, 6)
    b, sb = integrate_h(connected(3), 3, 2, 100_000, 7, box_scale=1.5)
    assert _within(a, b, math.hypot(sa, sb))


def test_integrate_h_errors():
    with pytest.raises(ParameterError):
        integrate_h(connected(2), 3, 1, 100, 0)
    with pytest.raises(ParameterError):
        integrate_h(connected(2), 2, 1, 100, 0, box_scale=0.5)


def test_heavy_tail_mass_examples():
    assert nu_heavy_tail_mass(2, 1, 2.0, 2.0, 1.0) == pytest.approx(2 / 3)
    assert nu_heavy_tail_mass(2, 1, 2.0, 2.0, 2.0) == pytest.approx(1 / 12)
    assert nu_heavy_tail_mass(2, 1, 2.0, 0.0, 1.0) == 0.0
    with pytest.raises(ParameterError):
        nu_heavy_tail_mass(1, 2, 2.0, 1.0, 1.0)


def test_rectangle_reproduces_tail_mass():
    big = np.array([[-1e9], [1e9]])
    est, se = nu_heavy_rectangle(big, 2, 1, 2.0, h_integral=2.0, mc_samples=100_000, seed=0, min_norm=1.0)
    assert _within(est, 2 / 3, se) or est == pytest.approx(2 / 3, rel=1e-12)
    big2 = np.array([[-1e9, -1e9], [1e9, 1e9]])
    H = (math.pi, 0.0)
    est, se = nu_heavy_rectangle(big2, 2, 2, 3.0, h_integral=H, mc_samples=200_000, seed=1, min_norm=2.0)
    assert _within(est, nu_heavy_tail_mass(2, 2, 3.0, math.pi, 2.0), se)


@pytest.mark.parametrize("s", [2.0, 4.0])
@pytest.mark.parametrize("rect", [np.array([[[1.0, 0.5], [3.0, 2.0]], [[0.5, 0.2], [2.5, 2.5]]]),
                                  np.array([[-3.0, 1.0], [-0.5, 4.0]])])
def test_rectangle_homogeneity(rect, s):
    k, d, alpha = 2, 2, 2.0
    a, sa = nu_heavy_rectangle(rect, k, d, alpha, h_integral=math.pi, mc_samples=200_000, seed=10)
    b, sb = nu_heavy_rectangle(scale_rect(rect, s), k, d, alpha, h_integral=math.pi, mc_samples=200_000, seed=11)
    ratio = b / a
    ratio_se = ratio * math.hypot(sa / a, sb / b)
    assert _within(ratio, s ** -(alpha * k - d), ratio_se)


def test_rectangle_edge_cases():
    empty = np.array([[1.0, 1.0], [1.0, 2.0]])
    assert nu_heavy_rectangle(empty, 2, 2, 2.0, h_integral=1.0) == (0.0, 0.0)
    disjoint = np.array([[[1.0], [2.0]], [[3.0], [4.0]]])
    assert nu_heavy_rectangle(disjoint, 2, 1, 2.0, h_integral=1.0) == (0.0, 0.0)
    with pytest.raises(ParameterError):
        nu_heavy_rectangle(np.array([[-1.0], [1.0]]), 2, 1, 2.0, h_integral=1.0)


def _light_pair_oracle(c):
    """(1/2) sum_{theta = +-1} int_{-1}^{1} int_{rho_0}^inf exp(-2 rho - theta y / c) d rho dy."""
    total = 0.0
    for theta in (-1.0, 1.0):
        f = lambda y: math.exp(-theta * y / c - 2 * max(0.0, -theta * y / c)) / 2
        total += integrate.quad(f, -1, 1, points=[0.0], epsabs=1e-13)[0]
    return total / 2


def test_light_mean_pair_d1():
    assert _light_pair_oracle(1.0) == pytest.approx(1 - math.exp(-1), rel=1e-10)
    est, se = poisson_mean_light(2, 1, 1.0, connected(2), 400_000, 0)
    assert _within(est, 1 - math.exp(-1), se, z=4)


def test_light_mean_infinite_c():
    est, se = poisson_mean_light(2, 1, math.inf, connected(2), 10_000, 1)
    assert est == pytest.approx(sphere_surface_area(1) * 2.0 / (2 * 2)) and se == 0.0
    est2, se2 = poisson_mean_light(2, 2, math.inf, connected(2), 200_000, 2)
    assert _within(est2, 2 * math.pi * math.pi / 4, se2)


@pytest.mark.parametrize("c", [1e2, 1e3])
def test_light_mean_large_c_approaches_infinite_form(c):
    est, se = poisson_mean_light(2, 1, c, connected(2), 100_000, 3)
    assert abs(est - 1.0) <= 0.05 + 3 * se


def test_light_mean_zero_indicator():
    # in one dimension a Čech complex has no 1-cycles
    est, se = poisson_mean_light(3, 1, 1.0, betti_cycle(3), 50_000, 4)
    assert est == 0.0 and se == 0.0


def test_gumbel_prefactor_infinite_c():
    est, _ = gumbel_prefactor(2, 1, math.inf, connected(2), 10_000, 0)
    assert est == pytest.approx(2 * 2.0)


def test_frechet_single_time():
    k, d, alpha, H = 2, 1, 2.0, 2.0
    lam_sq = sphere_surface_area(d) * H / (math.factorial(k) ** 2 * (alpha * k - d))
    for eta in (0.5, 1.0, 3.0):
        assert frechet_fidi([1.0], [eta], k, d, alpha, H, squared_factorial=True) == \
            pytest.approx(math.exp(-lam_sq * eta ** -3))
        assert frechet_fidi([1.0], [eta], k, d, alpha, H) == pytest.approx(math.exp(-(2 / 3) * eta ** -3))
    assert frechet_lambda(k, d, alpha, H) == pytest.approx(2 / 3)
    assert frechet_fidi([1.0], [1e9], k, d, alpha, H) == pytest.approx(1.0)
    assert frechet_fidi([1.0], [0.0], k, d, alpha, H) == 0.0


def test_fidi_errors():
    with pytest.raises(ParameterError):
        frechet_fidi([0.5, 0.2], [1.0, 1.0], 2, 1, 2.0, 2.0)
    with pytest.raises(ParameterError):
        gumbel_fidi([0.5, 0.5], [1.0, 1.0], 2, 1, 1.0, 1.0)


def test_gumbel_single_time():
    I = 3.0
    for eta in (-1.0, 0.0, 2.0):
        assert gumbel_fidi([1.0], [eta], 2, 1, 1.0, I) == pytest.approx(math.exp(-(I / 4) * math.exp(-2 * eta)))
    assert gumbel_fidi([1.0], [50.0], 2, 1, 1.0, I) == pytest.approx(1.0)


times_st = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=4, unique=True).map(sorted)


@given(times_st, st.data())
def test_fidi_monotone_and_bounded(times, data):
    eta = data.draw(st.lists(st.floats(0.05, 10.0), min_size=len(times), max_size=len(times)))
    i = data.draw(st.integers(0, len(times) - 1))
    bump = data.draw(st.floats(0.0, 5.0))
    for f in (lambda e: frechet_fidi(times, e, 2, 1, 2.0, 2.0),
              lambda e: gumbel_fidi(times, e, 2, 1, 1.0, 3.0)):
        p = f(eta)
        assert 0.0 <= p <= 1.0
        raised = list(eta)
        raised[i] += bump
        assert f(raised) >= p - 1e-15


@given(st.floats(0.05, 0.95), st.floats(0.1, 5.0))
def test_fidi_factorises_over_time_blocks(t1, eta):
    k, beta, lam = 2, 3.0, 2 / 3
    joint = frechet_fidi([t1, 1.0], [eta, eta], k, 1, 2.0, 2.0)
    first = frechet_fidi([t1], [eta], k, 1, 2.0, 2.0)
    second = math.exp(-lam * (1 - t1 ** k) * eta ** -beta)
    assert joint == pytest.approx(first * second, rel=1e-12)


def test_stable_spec_domain_and_constants():
    for a in (1.0, 1.5, 2.0):
        with pytest.raises(ParameterError):
            StableSeriesSpec(a)
    spec = StableSeriesSpec.from_h_integral(1.3, 2.0)
    assert spec.C_alpha == pytest.approx((2.0 / 1.6) ** (1 / 1.6))
    # direct partial sum of j^{-2/beta} beyond N, against the integral bound
    j = np.arange(spec.n_terms + 1, 50 * spec.n_terms, dtype=float)
    assert spec.C_alpha ** 2 * np.sum(j ** (-2 / spec.index)) <= spec.tail_variance_bound()


def test_stable_series_matches_levy_stable_law():
    spec = StableSeriesSpec(1.3, 20_000, 1.0)
    x = stable_series_samples(spec, 300, 1)
    b = spec.index
    # LePage: sum r_j Gamma_j^{-1/b} is symmetric b-stable with scale^b = Gamma(2-b) cos(pi b/2) / (1-b)
    scale = (math.gamma(2 - b) * math.cos(math.pi * b / 2) / (1 - b)) ** (1 / b)
    assert stats.kstest(x, stats.levy_stable(b, 0.0, scale=scale).cdf).pvalue > 1e-3


def test_hill_estimator_on_pareto():
    x = stats.pareto(1.6).rvs(size=20_000, random_state=0)
    assert hill_estimator(x, 1000) == pytest.approx(1.6, rel=0.1)
    with pytest.raises(ParameterError):
        hill_estimator(x, 0)
