import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from supercrit.radialgrid import (
    RadialProfile,
    apply_radial_operator,
    build_grid,
    cumulative_integrals,
    default_grid,
    fd_weights,
    interval_integrals,
    value_at_s,
)


def test_default_grid_span():
    g = default_grid()
    assert g.count == 4801
    assert g.r_nodes[0] == pytest.approx(6.144212353e-6, rel=1e-9)
    assert g.r_nodes[-1] == pytest.approx(162754.791419, rel=1e-9)


def test_small_grid_spacing():
    g = build_grid(-1, 1, 64)
    assert len(g.nodes) == 64
    assert g.h == pytest.approx(2 / 63, abs=1e-15)
    assert np.allclose(np.diff(g.nodes), 2 / 63, rtol=1e-12, atol=0)
    assert np.array_equal(g.r_nodes, np.exp(g.nodes))


@pytest.mark.parametrize("args", [(0, 0, 100), (1, -1, 100), (-1, 1, 63), (-1, math.inf, 100)])
def test_grid_rejects(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_refined_keeps_nodes():
    g = build_grid(-2, 2, 101)
    f = g.refined(4)
    assert f.count == 401
    assert np.allclose(f.nodes[::4], g.nodes, atol=1e-14)


def test_profile_rejects_nan():
    g = build_grid(-1, 1, 64)
    bad = np.ones(64)
    bad[3] = np.nan
    with pytest.raises(ValueError, match="NaN"):
        RadialProfile(g, bad, np.zeros(64))
    with pytest.raises(ValueError):
        RadialProfile(g, np.ones(10), np.zeros(10))


def test_csv_round_trip():
    g = build_grid(-3, 3, 101)
    prof = RadialProfile.from_function(g, lambda r: np.exp(-r * r), lambda r: -2 * r * np.exp(-r * r))
    text = prof.to_csv()
    assert text.splitlines()[0] == "s,r,value,derivative"
    back = RadialProfile.from_csv(text)
    assert back.grid == g
    assert np.array_equal(back.values, prof.values)
    assert np.array_equal(back.derivative, prof.derivative)


def test_profile_interpolation_and_extension():
    g = build_grid(-4, 4, 801)
    prof = RadialProfile.from_function(g, lambda r: 1 / (1 + r * r), lambda r: -2 * r / (1 + r * r) ** 2, tail_exponent=-2.0)
    r = np.array([0.3, 1.7, 20.0])
    assert np.allclose(prof(r), 1 / (1 + r * r), rtol=1e-9)
    # beyond the grid the r^-2 tail takes over
    far = math.exp(6.0)
    assert prof(far) == pytest.approx(prof.values[-1] * math.exp(-2 * 2.0), rel=1e-12)


def test_fd_weights_classic():
    assert np.allclose(fd_weights([-2, -1, 0, 1, 2], 1), [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
    assert np.allclose(fd_weights([-2, -1, 0, 1, 2], 2), [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])


def test_cumulative_power_law():
    # int r^-2 r^5 dr = r^4/4; the head extension supplies r0^4/4
    g = build_grid(-4, 4, 1601)
    r = g.r_nodes
    ci = cumulative_integrals(g, r**-2.0, 5)
    assert ci.head_ok
    within = ci.from_left - ci.head_extension
    assert np.allclose(within[1:], (r[1:] ** 4 - r[0] ** 4) / 4, rtol=1e-8, atol=0)
    assert np.allclose(ci.from_left, r**4 / 4, rtol=1e-8)


def test_cumulative_zero():
    g = build_grid(-4, 4, 201)
    ci = cumulative_integrals(g, np.zeros(g.count), 3)
    assert not ci.from_left.any() and not ci.from_right.any()


def test_cumulative_log_divergence_flagged():
    g = build_grid(-4, 4, 201)
    ci = cumulative_integrals(g, g.r_nodes**-6.0, 5)
    assert not ci.head_ok


def test_left_plus_right_is_total():
    g = default_grid()
    r = g.r_nodes
    ci = cumulative_integrals(g, np.exp(-r) * r, 5)
    assert np.allclose(ci.from_left + ci.from_right, ci.total, rtol=1e-10, atol=0)
    assert ci.total == pytest.approx(math.factorial(6), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_interval_rule_exact_on_cubics(c):
    h = 0.1
    s = np.arange(12) * h
    F = c[0] + c[1] * s + c[2] * s**2 + c[3] * s**3
    prim = lambda x: c[0] * x + c[1] * x**2 / 2 + c[2] * x**3 / 3 + c[3] * x**4 / 4
    exact = prim(s[1:]) - prim(s[:-1])
    assert np.allclose(interval_integrals(h, F), exact, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2.9, 2.9))
def test_value_at_s_cubic_exact(x):
    g = build_grid(-3, 3, 64)
    vals = g.nodes**3 - 2 * g.nodes
    assert value_at_s(g, vals, x) == pytest.approx(x**3 - 2 * x, abs=1e-10)


def _gauss_residual(e, wprof, g, k):
    r = g.r_nodes
    phi = RadialProfile.from_function(g, lambda r: np.exp(-r * r))
    lap = (4 * r * r - 2 * e.n) * np.exp(-r * r) - (k * (e.n - 2 + k)) / r**2 * np.exp(-r * r)
    exact = lap + e.p * wprof.values ** (e.p - 1) * np.exp(-r * r)
    out = apply_radial_operator(g, e, k, phi, wprof).values
    mask = (r > 0.2) & (r < 5)
    return np.max(np.abs(out - exact)[mask])


def test_operator_fourth_order(e63):
    # the potential enters only as a multiplier, so w = 1 is enough here
    errs = []
    for count in (201, 401, 801):
        g = build_grid(-4, 4, count)
        wprof = RadialProfile.from_function(g, lambda r: np.ones_like(r), lambda r: np.zeros_like(r))
        errs.append(_gauss_residual(e63, wprof, g, 0))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) > 3.7


def test_operator_on_ground_state(e63, gs63):
    # Delta w + p w^(p-1) w = (p - 1) w^p
    g = gs63.grid
    out = apply_radial_operator(g, e63, 0, gs63.profile, gs63.profile).values
    expected = (e63.p - 1) * gs63.w**e63.p
    weight = g.r_nodes ** (2 + e63.m)
    assert np.max(weight * np.abs(out - expected)) < 1e-6
