import json
import math
import warnings

import numpy as np
import pytest

from gykit.montecarlo import McConfig, constant_model, feynman_kac_price
from gykit.pricing import (BENCHMARKS, K0_CASE, AsianOption, Market, PricingConfig, dump_spec,
                           from_L0, geometric_closed_form, k0_analytic, load_spec, payoff, price,
                           price_arithmetic_quadrature, price_geometric_quadrature,
                           price_monte_carlo, reduce_to_L0)

FAST = PricingConfig(mc_paths=100_000, mc_steps=100, seed=3)


def within(a, b, ea, eb, k=3.0):
    return abs(a - b) <= k * math.hypot(ea, eb)


def test_validation():
    with pytest.raises(ValueError):
        AsianOption("fixed_strike", "call", "harmonic", 1.0, 1.0)
    with pytest.raises(ValueError):
        AsianOption("fixed_strike", "call", "arithmetic", -1.0, 1.0)
    with pytest.raises(ValueError):
        AsianOption("fixed_strike", "call", "arithmetic", 1.0, 0.0)
    with pytest.raises(ValueError):
        Market(S0=0.0, A0=0.0, r=0.0, sigma=0.2)
    with pytest.raises(ValueError):
        Market(S0=1.0, A0=0.0, r=0.0, sigma=0.0)


def test_payoff_examples():
    call0 = AsianOption("fixed_strike", "call", "arithmetic", 0.0, 1.0)
    assert payoff(call0, 1.3, 0.7) == 0.7
    assert payoff(AsianOption("floating_strike", "call", "arithmetic", 0.0, 1.0), 2.0, 2.0) == 0.0
    assert payoff(AsianOption("fixed_strike", "put", "arithmetic", 5.0, 1.0), 1.0, 3.0) == 2.0
    assert payoff(AsianOption("floating_strike", "put", "arithmetic", 0.0, 1.0), 1.0, 3.0) == 2.0
    np.testing.assert_array_equal(payoff(call0, np.ones(3), np.array([0.0, 1.0, 2.0])), [0.0, 1.0, 2.0])


def test_reduction_round_trip(rng):
    for _ in range(100):
        m = Market(S0=1.0, A0=0.0, r=float(rng.uniform(-0.05, 0.2)), sigma=float(rng.uniform(0.1, 2)))
        T = float(rng.uniform(0.5, 5))
        S, y, t = float(rng.uniform(0.1, 10)), float(rng.uniform(0, 10)), float(rng.uniform(0, T))
        back = from_L0(reduce_to_L0(S, y, t, m, T), m, T)
        assert back == pytest.approx((S, y, t), rel=1e-12, abs=1e-12)


def test_reduction_special_cases():
    m = Market(S0=1.0, A0=0.0, r=0.125, sigma=0.5)  # r = sigma^2 / 2
    p = reduce_to_L0(3.0, 1.0, 0.4, m, 2.0)
    assert p.m == 0.0 and p.weight == 1.0
    assert reduce_to_L0(3.0, 1.0, 2.0, m, 2.0).t == 0.0


def test_spec_round_trip(tmp_path):
    o, m = BENCHMARKS["otm_put"]
    doc = dump_spec(o, m)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    assert load_spec(path) == (o, m)
    assert load_spec(doc) == (o, m)
    with pytest.raises(ValueError):
        load_spec({"option": {}})


def test_k0_benchmark():
    o, m = K0_CASE
    q = price(o, m)
    exact = k0_analytic(m, o.maturity)
    assert q.method == "quadrature_gamma0"
    assert abs(q.price - exact) <= q.est_error
    mc = price(o, m, FAST, method="monte_carlo")
    assert within(mc.price, exact, mc.est_error, 0.0)


def test_deep_itm_put():
    o = AsianOption("fixed_strike", "put", "arithmetic", 50.0, 2.0)
    m = K0_CASE[1]
    q = price(o, m)
    # the put is never out of the money in practice: e^{-rT} (K - E[A])
    asym = math.exp(-m.r * o.maturity) * o.strike - k0_analytic(m, o.maturity)
    assert abs(q.price - asym) <= q.est_error + 1e-9 * asym


def test_strike_monotonicity():
    m = Market(S0=1.0, A0=0.0, r=0.05, sigma=1.0)
    ks = [0.5, 0.8, 1.0, 1.2, 1.6]
    calls = [price(AsianOption("fixed_strike", "call", "arithmetic", k, 1.5), m).price for k in ks]
    puts = [price(AsianOption("fixed_strike", "put", "arithmetic", k, 1.5), m).price for k in ks]
    assert all(b <= a for a, b in zip(calls, calls[1:]))
    assert all(b >= a for a, b in zip(puts, puts[1:]))
    assert min(calls + puts) >= 0.0


def test_arithmetic_parity():
    m = Market(S0=1.0, A0=0.0, r=0.05, sigma=1.0)
    c = price(AsianOption("fixed_strike", "call", "arithmetic", 1.0, 1.5), m)
    p = price(AsianOption("fixed_strike", "put", "arithmetic", 1.0, 1.5), m)
    fwd = k0_analytic(m, 1.5) - math.exp(-m.r * 1.5)
    assert abs(c.price - p.price - fwd) <= c.est_error + p.est_error


def test_discount_scaling():
    # S is linear in S0, so the K=0 price and a scaled strike scale with S0
    o, m = BENCHMARKS["atm_call"]
    base = price(o, m).price
    scaled = price(AsianOption(o.style, o.right, o.average, 2 * o.strike, o.maturity),
                   Market(2 * m.S0, 0.0, m.r, m.sigma)).price
    assert scaled == pytest.approx(2 * base, rel=1e-6)


def test_seasoned_option():
    # half the window observed at average 1: the remaining half is a fresh K=0 call
    o = AsianOption("fixed_strike", "call", "arithmetic", 0.0, 4.0)
    m = Market(S0=1.0, A0=1.0, r=0.05, sigma=1.0, elapsed=2.0)
    q = price(o, m)
    tau = 2.0
    exact = math.exp(-m.r * tau) * (2.0 + k0_analytic(Market(1.0, 0.0, 0.05, 1.0), tau) * tau * math.exp(m.r * tau)) / 4.0
    assert abs(q.price - exact) <= q.est_error + 1e-9


def test_short_maturity_falls_back_to_mc():
    o = AsianOption("fixed_strike", "call", "arithmetic", 100.0, 1.0)
    m = Market(S0=100.0, A0=0.0, r=0.05, sigma=0.4)
    with pytest.warns(RuntimeWarning):
        q = price_arithmetic_quadrature(o, m, FAST)
    assert q.method == "monte_carlo_fallback" and "unstable_small_t" in q.flags
    cfg = McConfig(100_000, 100, 1.0, seed=99)
    p, se = feynman_kac_price(lambda s, y: np.maximum(y - 100.0, 0.0), constant_model(0.0, 0.4),
                              0.05, cfg, 100.0)
    assert within(q.price, p, q.est_error, se)


def test_geometric_closed_form():
    m = Market(S0=1.0, A0=0.0, r=0.05, sigma=0.3)
    for style, right, k in (("fixed_strike", "call", 1.0), ("fixed_strike", "put", 1.05),
                            ("floating_strike", "call", 0.0), ("floating_strike", "put", 0.0)):
        o = AsianOption(style, right, "geometric", k, 1.0)
        q = price_geometric_quadrature(o, m)
        assert q.method == "quadrature_kolmogorov"
        assert q.price == pytest.approx(geometric_closed_form(o, m), rel=1e-4)


def test_geometric_unit_payoff_via_zero_strike():
    # K = 0 call pays G; the closed form is its discounted forward
    m = Market(S0=1.0, A0=0.0, r=0.05, sigma=0.3)
    o = AsianOption("fixed_strike", "call", "geometric", 0.0, 1.0)
    assert price(o, m).price == pytest.approx(geometric_closed_form(o, m), rel=1e-10)


def test_geometric_matches_mc():
    m = Market(S0=1.0, A0=0.0, r=0.05, sigma=0.3)
    o = AsianOption("fixed_strike", "call", "geometric", 1.0, 1.0)
    q = price(o, m)
    mc = price(o, m, FAST, method="monte_carlo")
    assert within(q.price, mc.price, q.est_error, mc.est_error)


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(BENCHMARKS))
def test_benchmark_set(name):
    o, m = BENCHMARKS[name]
    q = price(o, m)
    mc = price_monte_carlo(o, m, PricingConfig(seed=1))
    assert q.method == "quadrature_gamma0"
    assert within(q.price, mc.price, q.est_error, mc.est_error)


def test_report_json():
    o, m = BENCHMARKS["floating_call"]
    d = price(o, m).to_dict()
    assert set(d) >= {"price", "est_error", "method", "flags"}
    json.dumps(d)


def test_unknown_method():
    with pytest.raises(ValueError):
        price(*K0_CASE, method="pde")
