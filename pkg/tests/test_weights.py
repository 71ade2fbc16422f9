"""Characteristics, BMO/BLO, the d_* metric, and weight constructors.

Frozen reference numbers were computed with the brute-force oracle in
oracle.py (explicit interval enumeration and slice means).
"""

import math

import numpy as np
import pytest

from muckmetric import (
    Interval,
    ParameterError,
    RangeError,
    Weight,
    a1_characteristic,
    ainfty_characteristic,
    ap_characteristic,
    blo_constant,
    bmo_norm,
    d_star,
    dual_weight,
    exp_weight,
    gj_lambda_star,
    grid_function,
    holder_interpolant,
    lemma_gap_check,
    load_weight,
    log_power_profile,
    make_grid,
    make_weight,
    normalize_mean_ratio,
    normalize_weight,
    power_weight,
    random_weight,
    save_weight,
    unit_weight,
)
from muckmetric.weights import a1_on, ainfty_on, ap_on, blo_on, oscillation_on

import oracle

RAMP = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
SPIKE = [4.0, 4.0, 4.0, 1.0, 9.0, 4.0, 4.0, 4.0]


def test_ramp_characteristics_frozen():
    w = make_weight(make_grid(3), RAMP)
    assert ap_characteristic(w, 1.5).value == pytest.approx(
        1.9662876365159057, rel=1e-12)
    assert ap_characteristic(w, 2.0).value == pytest.approx(
        1.5287946428571426, rel=1e-12)
    assert ap_characteristic(w, 3.0).value == pytest.approx(
        1.3436338848673699, rel=1e-12)
    assert ainfty_characteristic(w).value == pytest.approx(
        1.1954253146861435, rel=1e-12)
    assert a1_characteristic(w).value == pytest.approx(4.5, rel=1e-12)
    assert bmo_norm(w.log()).value == pytest.approx(
        0.54624165482535347, rel=1e-12)
    assert blo_constant(w.log()).value == pytest.approx(
        1.3255753628431561, rel=1e-12)


def test_spike_characteristics_frozen_both_families():
    # the (1, 9) jump straddles an odd cell boundary, so the shifted family
    # sees strictly more oscillation than the dyadic one
    w = make_weight(make_grid(3), SPIKE)
    assert ap_characteristic(w, 2.0).value == pytest.approx(1.5625, rel=1e-12)
    assert ap_characteristic(w, 2.0, shifted=True).value == pytest.approx(
        2.7777777777777777, rel=1e-12)
    assert ainfty_characteristic(w).value == pytest.approx(1.25, rel=1e-12)
    assert ainfty_characteristic(w, shifted=True).value == pytest.approx(
        1.6666666666666665, rel=1e-12)
    assert a1_characteristic(w).value == pytest.approx(4.25, rel=1e-12)
    assert a1_characteristic(w, shifted=True).value == pytest.approx(
        5.0, rel=1e-12)
    assert bmo_norm(w.log()).value == pytest.approx(
        math.log(2.0), rel=1e-12)
    assert bmo_norm(w.log(), shifted=True).value == pytest.approx(
        math.log(3.0), rel=1e-12)


def test_a1_witness_is_deepest_attaining_interval():
    w = make_weight(make_grid(3), SPIKE)
    rep = a1_characteristic(w, shifted=True)
    assert rep.witness == Interval(level=2, index=1, shifted=True)
    rep_d = a1_characteristic(make_weight(make_grid(3), RAMP))
    assert rep_d.witness == Interval(level=0, index=0)


def test_characteristics_match_oracle_on_random_weights():
    rng = np.random.default_rng(1105)
    for levels in (2, 4):
        g = make_grid(levels)
        for trial in range(6):
            vals = np.exp(rng.uniform(-1.5, 1.5, g.cells))
            w = make_weight(g, vals)
            shifted = bool(trial % 2)
            assert ap_characteristic(w, 2.5, shifted=shifted).value == \
                pytest.approx(oracle.ap_char(vals, 2.5, levels, shifted),
                              rel=1e-11)
            assert ainfty_characteristic(w, shifted=shifted).value == \
                pytest.approx(oracle.ainfty_char(vals, levels, shifted),
                              rel=1e-11)
            a1_val, _ = oracle.a1_char(vals, levels, shifted)
            assert a1_characteristic(w, shifted=shifted).value == \
                pytest.approx(a1_val, rel=1e-11)
            logs = np.log(vals)
            f = grid_function(g, logs)
            assert bmo_norm(f, shifted=shifted).value == pytest.approx(
                oracle.bmo(logs, levels, shifted), rel=1e-11, abs=1e-14)
            assert blo_constant(f, shifted=shifted).value == pytest.approx(
                oracle.blo(logs, levels, shifted), rel=1e-11, abs=1e-14)


def test_witness_reevaluation_recovers_value():
    rng = np.random.default_rng(7)
    g = make_grid(5)
    for trial in range(8):
        w = random_weight(g, 900 + trial)
        shifted = bool(trial % 2)
        rep = ap_characteristic(w, 2.0, shifted=shifted)
        assert ap_on(w, rep.witness, 2.0) == pytest.approx(rep.value, rel=1e-12)
        rep = ainfty_characteristic(w, shifted=shifted)
        assert ainfty_on(w, rep.witness) == pytest.approx(rep.value, rel=1e-12)
        rep = a1_characteristic(w, shifted=shifted)
        assert a1_on(w, rep.witness) == pytest.approx(rep.value, rel=1e-12)
        f = w.log()
        rep = bmo_norm(f, shifted=shifted)
        assert oscillation_on(f, rep.witness) == pytest.approx(
            rep.value, rel=1e-12, abs=1e-15)
        rep = blo_constant(f, shifted=shifted)
        assert blo_on(f, rep.witness) == pytest.approx(
            rep.value, rel=1e-12, abs=1e-15)
    del rng


def test_two_valued_closed_forms():
    g = make_grid(3)
    w = make_weight(g, [2.0] * 4 + [1.0] * 4)
    assert ap_characteristic(w, 2.0).value == pytest.approx(1.125, rel=1e-14)
    assert ainfty_characteristic(w).value == pytest.approx(
        1.5 / math.sqrt(2.0), rel=1e-14)
    assert a1_characteristic(w).value == pytest.approx(1.5, rel=1e-14)
    assert bmo_norm(w.log()).value == pytest.approx(
        math.log(2.0) / 2.0, rel=1e-14)


def test_constant_weight_everything_trivial():
    g = make_grid(6)
    w = unit_weight(g)
    assert ap_characteristic(w, 2.0).value == 1.0
    assert a1_characteristic(w).value == 1.0
    assert ainfty_characteristic(w).value == 1.0
    assert bmo_norm(w.log()).value == 0.0
    assert blo_constant(w.log()).value == 0.0


def test_weight_validation():
    g = make_grid(2)
    with pytest.raises(ParameterError):
        make_weight(g, [1.0, -1.0, 1.0, 1.0])
    with pytest.raises(ParameterError):
        make_weight(g, [1.0, 0.0, 1.0, 1.0])
    with pytest.raises(ParameterError):
        make_weight(g, [1.0, np.inf, 1.0, 1.0])
    with pytest.raises(ParameterError):
        Weight(g, [2.0, 2.0, 2.0, 2.0], normalized=True)  # geo-mean is 2


def test_normalize_weight():
    g = make_grid(3)
    w = make_weight(g, RAMP)
    n = normalize_weight(w)
    assert n.normalized
    assert np.mean(np.log(n.values)) == pytest.approx(0.0, abs=1e-14)
    assert normalize_weight(n) is n


def test_characteristics_scale_invariant():
    g = make_grid(4)
    for trial in range(5):
        w = random_weight(g, 50 + trial)
        scaled = make_weight(g, 37.5 * w.values)
        for kind, fn in (
            ("ap", lambda u: ap_characteristic(u, 3.0).value),
            ("a1", lambda u: a1_characteristic(u).value),
            ("ainf", lambda u: ainfty_characteristic(u).value),
        ):
            assert fn(scaled) == pytest.approx(fn(w), rel=1e-12), kind


def test_characteristic_lower_bounds():
    # every characteristic is >= 1, with equality only for constants
    g = make_grid(5)
    for trial in range(6):
        w = random_weight(g, 1200 + trial)
        assert ap_characteristic(w, 2.0).value > 1.0
        assert a1_characteristic(w).value > 1.0
        assert ainfty_characteristic(w).value > 1.0


def test_ap_monotone_in_family():
    # adding the shifted intervals can only increase a sup
    g = make_grid(5)
    for trial in range(5):
        w = random_weight(g, 77 + trial)
        for p in (1.5, 2.0, 4.0):
            assert ap_characteristic(w, p, shifted=True).value >= \
                ap_characteristic(w, p).value - 1e-15


def test_d_star_metric_axioms():
    g = make_grid(4)
    ws = [random_weight(g, 300 + i) for i in range(4)]
    for u in ws:
        assert d_star(u, u) == 0.0
    for u in ws:
        for v in ws:
            assert d_star(u, v) == pytest.approx(d_star(v, u), rel=1e-13)
    for u in ws:
        for v in ws:
            for x in ws:
                assert d_star(u, v) <= d_star(u, x) + d_star(x, v) + 1e-12


def test_d_star_scale_invariant_and_frozen():
    g = make_grid(3)
    u = make_weight(g, RAMP)
    v = make_weight(g, [2.0] * 4 + [1.0] * 4)
    assert d_star(u, v) == pytest.approx(0.87763549553614251, rel=1e-12)
    scaled = make_weight(g, 5.0 * u.values)
    assert d_star(scaled, v) == pytest.approx(d_star(u, v), rel=1e-12)


def test_power_weight_cell_means():
    g = make_grid(4)
    for alpha in (-0.5, 0.25, 1.0, 2.0):
        w = power_weight(alpha, g)
        assert w.normalized
        # compare unnormalized shape against the exact antiderivative
        edges = np.arange(g.cells + 1) / g.cells
        exact = np.diff(edges ** (alpha + 1.0) / (alpha + 1.0)) * g.cells
        ratio = w.values / exact
        assert np.ptp(ratio) / ratio.mean() < 1e-13


def test_power_weight_rejects_nonintegrable():
    with pytest.raises(ParameterError):
        power_weight(-1.0, make_grid(3))
    with pytest.raises(ParameterError):
        power_weight(-1.5, make_grid(3))


def test_log_power_profile_matches_power_weights():
    # exp(r * profile) and exp(s * profile) are exactly |r - s| apart in d_*
    g = make_grid(6)
    psi = log_power_profile(g)
    assert psi.values[0] == pytest.approx(math.log(1.0 / g.cells) - 1.0,
                                          rel=1e-13)
    unit = bmo_norm(psi).value
    w1 = exp_weight(psi, -0.3)
    w2 = exp_weight(psi, -0.7)
    assert d_star(w1, w2) == pytest.approx(0.4 * unit, rel=1e-12)


def test_exp_weight_guard():
    g = make_grid(2)
    f = grid_function(g, [400.0, -400.0, 0.0, 0.0])
    with pytest.raises(RangeError):
        exp_weight(f, 2.0)
    w = exp_weight(f, 1.0)  # |f| <= 700 is fine
    assert w.normalized


def test_holder_interpolant_endpoints():
    g = make_grid(3)
    u = normalize_weight(make_weight(g, RAMP))
    v = normalize_weight(make_weight(g, SPIKE))
    assert np.allclose(holder_interpolant(u, v, 1.0).values, u.values,
                       rtol=1e-14)
    assert np.allclose(holder_interpolant(u, v, 0.0).values, v.values,
                       rtol=1e-14)
    mid = holder_interpolant(u, v, 0.5)
    assert np.allclose(np.log(mid.values),
                       0.5 * np.log(u.values) + 0.5 * np.log(v.values),
                       atol=1e-13)
    with pytest.raises(RangeError):
        holder_interpolant(u, v, 1.5)


def test_dual_weight_involution():
    g = make_grid(4)
    for p in (1.5, 2.0, 3.0):
        w = random_weight(g, 421)
        q = p / (p - 1.0)
        back = dual_weight(dual_weight(w, p), q)
        assert np.allclose(back.values, normalize_weight(w).values, rtol=1e-12)


def test_normalize_mean_ratio_and_lemma_gap_frozen():
    g = make_grid(3)
    w = make_weight(g, [2.0] * 4 + [1.0] * 4)
    one = unit_weight(g)
    root = Interval(0, 0)
    scaled = normalize_mean_ratio(w, one, root)
    assert np.mean(scaled.values / one.values) == pytest.approx(1.0, abs=1e-14)
    lhs, rhs = lemma_gap_check(scaled, one, root)
    # scaled w is (4/3, 2/3): by hand lhs = 17/8 - sqrt(3)/2 - sqrt(3/2)
    assert lhs == pytest.approx(
        17.0 / 8.0 - math.sqrt(3.0) / 2.0 - math.sqrt(1.5), rel=1e-12)
    assert rhs == pytest.approx(0.125, rel=1e-12)
    assert lhs <= rhs


def test_lemma_gap_requires_unit_mean_ratio():
    g = make_grid(3)
    w = normalize_weight(make_weight(g, [2.0] * 4 + [1.0] * 4))
    with pytest.raises(ParameterError):
        lemma_gap_check(w, unit_weight(g), Interval(0, 0))


def test_lemma_gap_inequality_random():
    g = make_grid(5)
    for trial in range(10):
        w = random_weight(g, 6000 + trial)
        w0 = random_weight(g, 6100 + trial)
        iv = Interval(2, trial % 4, shifted=bool(trial % 2))
        scaled = normalize_mean_ratio(w, w0, iv)
        lhs, rhs = lemma_gap_check(scaled, w0, iv)
        assert lhs <= rhs + 1e-12
        assert lhs >= -1e-12


def test_gj_lambda_star_two_valued():
    # [e^(lam*f)]_{A2} = cosh(lam)^2 for f = +-1, so the cap 2 binds at
    # arccosh(sqrt(2))
    g = make_grid(3)
    f = grid_function(g, [1.0] * 4 + [-1.0] * 4)
    lam = gj_lambda_star(f, 2.0)
    assert lam == pytest.approx(math.acosh(math.sqrt(2.0)), abs=2e-6)
    # doubling the function halves the critical exponent
    f2 = grid_function(g, [2.0] * 4 + [-2.0] * 4)
    assert gj_lambda_star(f2, 2.0) == pytest.approx(lam / 2.0, abs=2e-6)


def test_gj_lambda_star_unbounded_for_constant():
    g = make_grid(3)
    f = grid_function(g, np.full(8, 0.25))
    assert gj_lambda_star(f, 2.0) == math.inf


def test_gj_lambda_star_monotone_in_cap():
    g = make_grid(4)
    f = grid_function(g, np.log(random_weight(g, 33).values))
    assert gj_lambda_star(f, 4.0) > gj_lambda_star(f, 1.5)
    with pytest.raises(ParameterError):
        gj_lambda_star(f, 1.0)


def test_save_load_roundtrip(tmp_path):
    g = make_grid(4)
    w = random_weight(g, 2024)
    path = tmp_path / "w.muckweight"
    save_weight(w, path)
    text = path.read_text()
    assert text.startswith("muckweight v1 levels=4 normalized=1\n")
    assert "\r" not in text
    back = load_weight(path)
    assert back.grid == g
    assert back.normalized
    assert np.array_equal(back.values, w.values)  # %.17g is lossless
    save_weight(back, tmp_path / "w2.muckweight")
    assert (tmp_path / "w2.muckweight").read_bytes() == path.read_bytes()


def test_load_weight_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.muckweight"
    bad.write_text("not a weight\n1\n2\n")
    with pytest.raises(ParameterError):
        load_weight(bad)
    short = tmp_path / "short.muckweight"
    short.write_text("muckweight v1 levels=2 normalized=0\n1.0\n2.0\n")
    with pytest.raises(ParameterError):
        load_weight(short)  # 4 cells expected


def test_random_weight_reproducible_and_smoothed():
    g = make_grid(5)
    w1 = random_weight(g, 11)
    w2 = random_weight(g, 11)
    assert np.array_equal(w1.values, w2.values)
    assert not np.array_equal(w1.values, random_weight(g, 12).values)
    # one averaging pass makes sibling cells equal
    assert np.allclose(w1.values[0::2], w1.values[1::2], rtol=1e-12)
    assert w1.normalized
