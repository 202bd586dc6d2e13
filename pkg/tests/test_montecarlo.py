import math

import numpy as np
import pytest
from scipy import stats

from gykit.bounds import BoundsConfig, sandwich_gamma_pm
from gykit.group import GPoint
from gykit.montecarlo import (McConfig, compare_density, constant_model, density_at,
                              density_estimate, density_estimate_1d, feynman_kac_price,
                              l0_model, operator_model, silverman_bandwidth, simulate_paths,
                              simulate_yor)


def within_3se(samples, expected):
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - expected) <= 3 * se


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(0, 10, 1.0)
    with pytest.raises(ValueError):
        McConfig(10, 10, 0.0)
    with pytest.raises(ValueError):
        McConfig(10, 10, 1.0, scheme="rk4")
    with pytest.raises(ValueError):
        McConfig(10, 10, 1.0, block_size=7)


def test_deterministic_ode():
    r = simulate_paths(constant_model(0.0, 0.0), 1.5, 0.25, McConfig(100, 50, 2.0))
    assert np.all(r.x == 1.5)
    np.testing.assert_allclose(r.y, 0.25 + 1.5 * 2.0, rtol=1e-14)


@pytest.mark.slow
def test_l0_moments():
    T = 1.0
    r = simulate_paths(l0_model(), 1.0, 0.5, McConfig(1_000_000, 100, T, seed=1))
    assert within_3se(r.x, math.exp(T))
    # the trapezoid bias of Y at 100 steps is ~1e-5, far below the standard error
    assert within_3se(r.y - 0.5, math.exp(T) - 1.0)


@pytest.mark.slow
def test_yor_functional_mean():
    t = 1.0
    w, a = simulate_yor(t, McConfig(1_000_000, 400, t, seed=2))
    assert within_3se(a, (math.exp(2 * t) - 1) / 2)
    assert within_3se(w, 0.0)


def test_support_of_samples():
    r = simulate_paths(l0_model(), 0.7, -1.0, McConfig(20_000, 50, 1.0, seed=3))
    assert np.all(r.x > 0) and np.all(r.y > -1.0)


def test_thread_count_does_not_change_results():
    cfg = McConfig(40_000, 20, 1.0, seed=9, block_size=4096)
    a = simulate_paths(l0_model(), 1.0, 0.0, cfg, threads=1)
    b = simulate_paths(l0_model(), 1.0, 0.0, cfg, threads=8)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    m = operator_model(lambda x, y, t: 1 + 0.25 * np.sin(y))
    cfg = McConfig(20_000, 20, 1.0, seed=9, scheme="euler", block_size=4096)
    a = simulate_paths(m, 1.0, 0.0, cfg, threads=1)
    b = simulate_paths(m, 1.0, 0.0, cfg, threads=4)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_keep_paths():
    r = simulate_paths(l0_model(), 1.0, 0.0, McConfig(100, 10, 1.0), keep_paths=True)
    assert r.paths_x.shape == (100, 11)
    np.testing.assert_array_equal(r.paths_x[:, -1], r.x)
    assert np.all(np.diff(r.paths_y, axis=1) > 0)


def test_euler_matches_exact():
    n = 200_000
    ex = simulate_paths(l0_model(), 1.0, 0.0, McConfig(n, 512, 1.0, seed=4))
    eu = simulate_paths(l0_model(), 1.0, 0.0, McConfig(n, 512, 1.0, seed=5, scheme="euler"))
    mi = simulate_paths(l0_model(), 1.0, 0.0, McConfig(n, 512, 1.0, seed=6, scheme="milstein"))
    for a, b in ((ex.x, eu.x), (ex.y, eu.y), (ex.x, mi.x), (ex.y, mi.y)):
        se = math.hypot(a.std() / math.sqrt(n), b.std() / math.sqrt(n))
        assert abs(a.mean() - b.mean()) <= 3 * se


def test_negative_euler_steps_are_resimulated():
    r = simulate_paths(constant_model(0.0, 1.0), 1.0, 0.0, McConfig(20_000, 4, 1.0, seed=1, scheme="euler"))
    assert r.resimulated > 0
    assert np.all(r.x > 0)


def test_unrecoverable_paths_raise():
    with pytest.raises(ArithmeticError):
        simulate_paths(constant_model(0.0, 6.0), 1.0, 0.0, McConfig(1000, 1, 1.0, scheme="euler"))


def test_sigma_min_guard():
    bad = operator_model(lambda x, y, t: np.zeros_like(x))
    with pytest.raises(ValueError):
        simulate_paths(bad, 1.0, 0.0, McConfig(100, 5, 1.0, scheme="euler"))


def test_exact_scheme_needs_constant_model():
    m = operator_model(lambda x, y, t: 1 + 0 * x)
    with pytest.raises(ValueError):
        simulate_paths(m, 1.0, 0.0, McConfig(100, 5, 1.0))


# --- densities ---------------------------------------------------------------


def test_degenerate_samples_rejected():
    with pytest.raises(ValueError):
        density_estimate(np.ones(20_000), np.arange(20_000.0), [0.0], [0.0])
    with pytest.raises(ValueError):
        density_estimate(np.arange(100.0), np.arange(100.0), [0.0], [0.0])
    with pytest.raises(ValueError):
        density_estimate_1d(np.ones(20_000), [1.0])


def test_silverman_shapes(rng):
    s = rng.normal(size=(2, 5000))
    assert isinstance(silverman_bandwidth(s[0]), float)
    assert silverman_bandwidth(s).shape == (2,)


@pytest.mark.slow
def test_lognormal_marginal():
    # transformation KDE: estimate log X, map back with the Jacobian 1/x
    r = simulate_paths(l0_model(), 1.0, 0.0, McConfig(1_000_000, 20, 1.0, seed=7))
    g = np.linspace(0.02, 6, 400)
    f = stats.lognorm(s=math.sqrt(2)).pdf(g)
    est = density_estimate_1d(np.log(r.x), np.log(g)) / g
    assert np.abs(est - f).max() <= 0.03 * f.max()


def test_density_integrates_below_one(rng):
    xs, ys = rng.normal(size=50_000), rng.normal(size=50_000)
    gx = np.linspace(-2, 2, 41)
    s = density_estimate(xs, ys, gx, gx)
    mass = s.values.sum() * 0.1 * 0.1
    assert 0.8 < mass <= 1.0


def test_density_converges(rng):
    f0 = 1 / (2 * math.pi)
    errs = []
    for n in (10_000, 40_000, 160_000):
        e = [abs(density_at(rng.normal(size=n), rng.normal(size=n), [0.0], [0.0])[0] - f0)
             for _ in range(20)]
        errs.append(np.sqrt(np.mean(np.square(e))))
    assert errs[2] < errs[1] < errs[0]


def test_compare_against_itself(rng):
    s = density_estimate(rng.normal(size=20_000), rng.normal(size=20_000),
                         np.linspace(-2, 2, 9), np.linspace(-2, 2, 9))
    c = compare_density(s, s.values)
    assert c.n_scored > 0 and c.median == 0.0 and c.max == 0.0
    with pytest.raises(ValueError):
        compare_density(s, np.ones((3, 3)))


@pytest.mark.slow
def test_l0_surface_matches_gamma0():
    from gykit.kernels import gamma0_array
    r = simulate_paths(l0_model(), 1.0, 0.0, McConfig(1_000_000, 200, 1.0, seed=3))
    gx, gy = np.linspace(0.05, 5, 40), np.linspace(0.02, 5, 40)
    s = density_estimate(r.x, r.y, gx, gy)
    # the forward density from (1, 0) over time 1 is Gamma0((1, 0, 1); (xi, eta, 0))
    c = compare_density(s, lambda X, Y: gamma0_array(1.0, 0.0, 1.0, X, Y, 0.0)[0])
    assert c.n_scored >= 20
    assert c.median <= 0.10


@pytest.mark.slow
def test_variable_coefficient_surface_is_sandwiched():
    m = operator_model(lambda x, y, t: 1 + 0.25 * np.sin(y), a_x=lambda x, y, t: np.zeros_like(x))
    r = simulate_paths(m, 1.0, 0.0, McConfig(1_000_000, 200, 1.0, seed=5, scheme="euler"))
    gx, gy = np.linspace(0.2, 4, 30), np.linspace(0.05, 5, 30)
    s = density_estimate(r.x, r.y, gx, gy)
    cfg = BoundsConfig(eps=0.05, mu_minus=0.75, mu_plus=1.25)
    z = GPoint(1.0, 0.0, 1.0)
    rows = []
    for i, x in enumerate(gx):
        for j, y in enumerate(gy):
            f = s.values[i, j]
            if f < 0.1 * s.values.max() or s.rel_uncertainty[i, j] >= 0.2:
                continue
            try:
                lo, hi = sandwich_gamma_pm(cfg, z, GPoint(x, y, 0.0))
            except ValueError:
                continue
            rows.append((i + j, f / lo if lo > 0 else math.inf, f / hi))
    rows = np.array(rows)
    assert len(rows) >= 40
    # fit k+- on a checkerboard half, check the other half with factor-2 slack
    fit, check = rows[rows[:, 0] % 2 == 0], rows[rows[:, 0] % 2 == 1]
    k_minus, k_plus = fit[:, 1].min(), fit[:, 2].max()
    assert np.all(check[:, 1] >= k_minus / 2)
    assert np.all(check[:, 2] <= k_plus * 2)


# --- Feynman-Kac -------------------------------------------------------------------


def test_constant_payoff():
    p, se = feynman_kac_price(lambda s, a: np.ones_like(s), l0_model(), 0.05,
                              McConfig(1000, 10, 2.0), 1.0)
    assert p == pytest.approx(math.exp(-0.1), rel=1e-15) and se == 0.0


def test_non_finite_payoff_rejected():
    with pytest.raises(ValueError):
        feynman_kac_price(lambda s, a: np.full_like(s, np.inf), l0_model(), 0.0, McConfig(100, 5, 1.0), 1.0)


def test_zero_strike_call():
    r, T, S0 = 0.05, 2.0, 1.0
    cfg = McConfig(200_000, 100, T, seed=11)
    p, se = feynman_kac_price(lambda s, y: np.maximum(y / T, 0.0), constant_model(0.0, 0.8),
                              r, cfg, S0)
    exact = math.exp(-r * T) * S0 / T * (math.exp(r * T) - 1) / r
    # trapezoid bias in the average is O(dt^2), negligible against the SE
    assert abs(p - exact) <= 3 * se


def test_put_call_parity():
    r, T, K, S0 = 0.03, 1.0, 1.1, 1.0
    cfg = McConfig(200_000, 100, T, seed=12)
    m = constant_model(0.0, 0.5)
    call = feynman_kac_price(lambda s, y: np.maximum(y / T - K, 0.0), m, r, cfg, S0)
    put = feynman_kac_price(lambda s, y: np.maximum(K - y / T, 0.0), m, r, cfg, S0)
    fwd = feynman_kac_price(lambda s, y: y / T - K, m, r, cfg, S0)
    # same paths: the residual is exactly the forward leg; compare with the analytic mean
    assert call[0] - put[0] == pytest.approx(fwd[0], abs=1e-12)
    exact = math.exp(-r * T) * (S0 * (math.exp(r * T) - 1) / (r * T) - K)
    assert abs(call[0] - put[0] - exact) <= 3 * fwd[1]


def test_antithetic_reduces_error():
    r, T = 0.05, 1.0
    m = constant_model(0.0, 0.4)
    pay = lambda s, y: np.maximum(y / T - 1.0, 0.0)
    _, se_plain = feynman_kac_price(pay, m, r, McConfig(100_000, 50, T, seed=1), 1.0)
    _, se_anti = feynman_kac_price(pay, m, r, McConfig(100_000, 50, T, seed=1, antithetic=True), 1.0)
    assert se_anti < se_plain
