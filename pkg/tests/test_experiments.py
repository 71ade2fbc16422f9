"""Weight families, sweeps, searches, and the parallel map helper."""

import os

import numpy as np
import pytest

from muckmetric import (
    ConfigError,
    ContinuityResult,
    ContinuityRow,
    FitError,
    MartingaleTransform,
    ParameterError,
    SearchError,
    WeightFamily,
    alternating_signs,
    ap_characteristic,
    a1_characteristic,
    ainfty_characteristic,
    bmo_norm,
    continuity_sweep,
    convexity_check,
    d_star,
    duality_check,
    exp_bmo_direction,
    haar_direction,
    identity_signs,
    log_distance_profile,
    make_grid,
    make_weight,
    noncompleteness_demo,
    normalize_weight,
    parallel_map,
    power_circle_family,
    random_cells_family,
    rate_fit,
    scale_to_characteristic,
    sharpness_search,
    theorem2_sweep,
    unit_weight,
    worker_count,
)


def _with_threads(value):
    """Context-manager-free env juggling: returns the old value."""
    old = os.environ.get("MUCK_THREADS")
    if value is None:
        os.environ.pop("MUCK_THREADS", None)
    else:
        os.environ["MUCK_THREADS"] = value
    return old


def _restore_threads(old):
    if old is None:
        os.environ.pop("MUCK_THREADS", None)
    else:
        os.environ["MUCK_THREADS"] = old


def test_worker_count_env_override():
    old = _with_threads("3")
    try:
        assert worker_count(100) == 3
    finally:
        _restore_threads(old)
    old = _with_threads("1")
    try:
        assert worker_count(100) == 1
    finally:
        _restore_threads(old)


def test_worker_count_rejects_garbage():
    for bad in ("0", "-2", "many"):
        old = _with_threads(bad)
        try:
            with pytest.raises(ConfigError):
                worker_count(10)
        finally:
            _restore_threads(old)


def test_parallel_map_preserves_order():
    old = _with_threads("4")
    try:
        out = parallel_map(lambda i: i * i, range(50))
    finally:
        _restore_threads(old)
    assert out == [i * i for i in range(50)]
    old = _with_threads("1")
    try:
        assert parallel_map(lambda i: -i, range(5)) == [0, -1, -2, -3, -4]
    finally:
        _restore_threads(old)


def test_family_member_hits_exact_distance():
    g = make_grid(6)
    base = unit_weight(g)
    fam = exp_bmo_direction(base, haar_direction(g, "quarter"))
    for s in (0.01, 0.3, 1.7):
        member = fam.member(0, s)
        assert d_star(member, base) == pytest.approx(s, rel=1e-12)
    assert d_star(fam.member(0, 0.0), base) == 0.0


def test_haar_directions_are_unit_bmo():
    g = make_grid(4)
    for kind in ("half", "half-neg", "quarter"):
        f = haar_direction(g, kind)
        assert bmo_norm(f).value == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(haar_direction(g, "half-neg").values,
                       -haar_direction(g, "half").values)
    with pytest.raises(ParameterError):
        haar_direction(g, "sawtooth")
    with pytest.raises(ParameterError):
        haar_direction(make_grid(1), "quarter")  # needs two levels


def test_exp_bmo_direction_rejects_constant():
    g = make_grid(3)
    from muckmetric import grid_function
    with pytest.raises(ParameterError):
        exp_bmo_direction(unit_weight(g), grid_function(g, np.ones(8)))


def test_log_distance_profile_symmetric():
    g = make_grid(5)
    prof = log_distance_profile(g).values
    assert np.allclose(prof, prof[::-1], atol=1e-13)
    assert prof[0] == pytest.approx(np.log(1.0 / g.cells) - 1.0, rel=1e-12)
    # increases toward the middle on the left half
    assert np.all(np.diff(prof[: g.cells // 2]) > 0)


def test_power_circle_family_marks_both_signs():
    g = make_grid(5)
    fam = power_circle_family(g)
    names = [name for name, _ in fam.directions]
    assert names == ["power+", "power-"]
    up = fam.member(0, 0.4)
    down = fam.member(1, 0.4)
    assert np.allclose(up.values * down.values, 1.0, rtol=1e-12)
    assert d_star(up, unit_weight(g)) == pytest.approx(0.4, rel=1e-12)


def test_random_cells_family_deterministic():
    g = make_grid(5)
    fam1 = random_cells_family(unit_weight(g), 9, count=3)
    fam2 = random_cells_family(unit_weight(g), 9, count=3)
    for (n1, d1), (n2, d2) in zip(fam1.directions, fam2.directions):
        assert n1 == n2
        assert np.array_equal(d1.values, d2.values)
    assert len(fam1.directions) == 3


def test_scale_to_characteristic_hits_band():
    g = make_grid(6)
    fam = random_cells_family(unit_weight(g), 13, count=2)

    def char_of(w):
        return ainfty_characteristic(w).value

    for target in (0.01, 0.1, 0.4):
        scale, achieved = scale_to_characteristic(fam, 0, char_of, target)
        member = fam.member(0, scale)
        assert char_of(member) == pytest.approx(achieved, rel=1e-12)
        assert abs((achieved - 1.0) - target) <= 0.01 * target


def test_scale_to_characteristic_rejects_oversized_base():
    g = make_grid(4)
    base = normalize_weight(make_weight(g, [4.0] * 8 + [1.0] * 8))

    def char_of(w):
        return ap_characteristic(w, 2.0).value

    fam = random_cells_family(base, 5, count=1)
    with pytest.raises(SearchError):
        scale_to_characteristic(fam, 0, char_of, 0.01)


def test_continuity_sweep_identity_operator_all_zero_gaps():
    g = make_grid(5)
    op = MartingaleTransform(g, identity_signs(5))
    base = unit_weight(g)
    fam = exp_bmo_direction(base, haar_direction(g, "quarter"))
    res = continuity_sweep(op, base, fam, (0.05, 0.1, 0.2), 2.0)
    for row in res.rows:
        assert row.gap == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(FitError):
        rate_fit(res)


def test_continuity_sweep_delta_zero_row():
    g = make_grid(4)
    op = MartingaleTransform(g, alternating_signs(4))
    base = unit_weight(g)
    fam = exp_bmo_direction(base, haar_direction(g, "quarter"))
    res = continuity_sweep(op, base, fam, (0.0,), 2.0)
    assert len(res.rows) == 1
    assert res.rows[0].gap == 0.0
    assert res.rows[0].d_star_actual == 0.0


def test_continuity_sweep_validation():
    g = make_grid(4)
    op = MartingaleTransform(g, alternating_signs(4))
    base = unit_weight(g)
    fam = exp_bmo_direction(base, haar_direction(g, "quarter"))
    with pytest.raises(ParameterError):
        continuity_sweep(op, base, fam, (0.2, 0.1), 2.0)  # not increasing
    with pytest.raises(ParameterError):
        continuity_sweep(op, base, fam, (-0.1, 0.2), 2.0)
    other = normalize_weight(make_weight(g, np.arange(1.0, 17.0)))
    with pytest.raises(ParameterError):
        continuity_sweep(op, other, fam, (0.1,), 2.0)  # base mismatch


def test_continuity_sweep_gap_rows():
    g = make_grid(6)
    op = MartingaleTransform(g, alternating_signs(6))
    base = unit_weight(g)
    fam = exp_bmo_direction(base, haar_direction(g, "quarter"))
    deltas = (0.01, 0.02, 0.04, 0.08)
    res = continuity_sweep(op, base, fam, deltas, 2.0)
    assert res.base_norm == pytest.approx(1.0, abs=1e-9)
    gaps = [r.gap for r in res.rows]
    assert all(g2 > g1 for g1, g2 in zip(gaps, gaps[1:]))  # monotone in delta
    for row in res.rows:
        assert row.d_star_actual == pytest.approx(row.delta_target, rel=1e-10)
        assert not row.flagged
    fit = rate_fit(res)
    assert 0.9 <= fit.slope <= 1.3
    assert fit.r_squared > 0.98


def test_rate_fit_synthetic_linear():
    rows = tuple(
        ContinuityRow(d, d, 1.0, 1.0 + 3.0 * d, 3.0 * d, False)
        for d in (0.001, 0.01, 0.1, 0.5)
    )
    fit = rate_fit(ContinuityResult(rows, "synthetic", 2.0, 1.0))
    assert fit.slope == pytest.approx(1.0, abs=1e-9)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_rate_fit_synthetic_sqrt():
    rows = tuple(
        ContinuityRow(d, d, 1.0, 1.0 + 2.0 * d ** 0.5, 2.0 * d ** 0.5, False)
        for d in (0.001, 0.004, 0.016, 0.064, 0.256)
    )
    fit = rate_fit(ContinuityResult(rows, "synthetic", 2.0, 1.0))
    assert fit.slope == pytest.approx(0.5, abs=1e-9)


def test_rate_fit_needs_four_rows():
    rows = tuple(
        ContinuityRow(d, d, 1.0, 1.0 + d, d, False) for d in (0.1, 0.2, 0.3)
    )
    with pytest.raises(FitError):
        rate_fit(ContinuityResult(rows, "synthetic", 2.0, 1.0))


def test_theorem2_sweep_bound_holds():
    g = make_grid(7)
    gen = random_cells_family(unit_weight(g), 77, count=4)
    deltas = (0.001, 0.01, 0.05, 0.1, 0.3)
    res = theorem2_sweep(deltas, gen)
    assert res.violations == 0
    assert len(res.rows) == len(deltas)
    for row, d in zip(res.rows, deltas):
        assert row.delta == d
        assert not row.flagged
        # achieved excess within 1 percent of the target
        assert abs(row.ainfty_minus_1 - d) <= 0.011 * d
        assert row.ratio_to_32sqrt <= 1.0
    assert res.max_ratio == pytest.approx(
        max(r.ratio_to_32sqrt for r in res.rows))


def test_theorem2_sweep_rejects_bad_deltas():
    g = make_grid(4)
    gen = random_cells_family(unit_weight(g), 3, count=1)
    with pytest.raises(ParameterError):
        theorem2_sweep((0.0, 0.5), gen)
    with pytest.raises(ParameterError):
        theorem2_sweep((0.5, 1.0), gen)


def test_sharpness_search_budget_one_returns_base():
    g = make_grid(5)
    op = MartingaleTransform(g, alternating_signs(5))
    fam = power_circle_family(g)
    res = sharpness_search(op, 0.1, fam, budget=1)
    assert res.best_weight_id == "base"
    assert res.gap == 0.0
    assert res.d_star == 0.0


def test_sharpness_search_infeasible_base():
    g = make_grid(4)
    base = normalize_weight(make_weight(g, [3.0] * 8 + [1.0] * 8))
    fam = WeightFamily("custom", base,
                       power_circle_family(g).directions)
    op = MartingaleTransform(g, alternating_signs(4))
    with pytest.raises(SearchError):
        sharpness_search(op, 0.05, fam, budget=8)  # [base]_{A2} = 4/3 > 1.05


def test_sharpness_search_finds_positive_gap():
    g = make_grid(6)
    op = MartingaleTransform(g, alternating_signs(6))
    fam = power_circle_family(g)
    res = sharpness_search(op, 0.1, fam, budget=8)
    assert res.gap > 0.0
    assert res.char <= 1.1          # hard feasibility constraint
    assert res.char - 1.0 >= 0.097  # and close to the boundary
    assert res.best_weight_id in ("power+", "power-")


def test_noncompleteness_demo_proportional():
    g = make_grid(8)
    res = noncompleteness_demo((-0.5, -0.75, -0.875), g)
    assert res.max_proportionality_error <= 1e-12
    a1s = [r.a1_char for r in res.rows]
    assert a1s == sorted(a1s)
    assert np.isnan(res.rows[-1].d_star_to_next)
    assert res.rows[0].d_star_to_next == pytest.approx(
        0.25 * res.profile_bmo, rel=1e-12)
    assert res.a1_ratio == pytest.approx(a1s[-1] / a1s[0], rel=1e-14)


def test_noncompleteness_demo_validation():
    g = make_grid(4)
    with pytest.raises(ParameterError):
        noncompleteness_demo((-0.5, -0.99), g)  # below -1 + 2^-4 margin
    with pytest.raises(ParameterError):
        noncompleteness_demo((-0.5, -0.25), g)  # increasing
    with pytest.raises(ParameterError):
        noncompleteness_demo((0.5,), g)
    res = noncompleteness_demo((-0.5, -0.5), g)  # equal exponents allowed
    assert res.rows[0].d_star_to_next == 0.0


def test_convexity_check_endpoints_and_random():
    g = make_grid(5)
    u = normalize_weight(make_weight(g, np.arange(1.0, 33.0)))
    v = unit_weight(g)
    lhs, rhs, ok = convexity_check(u, v, 0.0, 2.0)
    assert ok and lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)
    lhs, rhs, ok = convexity_check(u, u, 0.37, 2.0)
    assert ok and lhs == pytest.approx(rhs, rel=1e-12)
    from muckmetric import RangeError, random_weight
    with pytest.raises(RangeError):
        convexity_check(u, v, -0.1, 2.0)
    rng = np.random.default_rng(15)
    for trial in range(30):
        a = random_weight(g, 4000 + trial)
        b = random_weight(g, 4100 + trial)
        t = float(rng.uniform(0, 1))
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        lhs, rhs, ok = convexity_check(a, b, t, p)
        assert ok, (trial, lhs, rhs)


def test_convexity_check_p_one_uses_a1():
    g = make_grid(4)
    u = normalize_weight(make_weight(g, np.arange(1.0, 17.0)))
    lhs, rhs, ok = convexity_check(u, u, 1.0, 1.0)
    assert lhs == pytest.approx(a1_characteristic(u).value, rel=1e-12)
    assert ok


def test_duality_check_identity():
    g = make_grid(5)
    from muckmetric import random_weight
    w1 = unit_weight(g)
    lhs, rhs, ok = duality_check(w1, 3.0)
    assert (lhs, rhs, ok) == (1.0, 1.0, True)
    for trial in range(30):
        w = random_weight(g, 8800 + trial)
        p = (1.5, 2.0, 3.0, 4.0)[trial % 4]
        lhs, rhs, ok = duality_check(w, p)
        assert ok, (trial, lhs, rhs)
    with pytest.raises(ParameterError):
        duality_check(w1, 1.0)
