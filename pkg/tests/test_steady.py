import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bistable_robin._numerics import ConvergenceError
from bistable_robin.reaction import compute_landmarks, make_cubic_reaction
from bistable_robin.steady import (CONSTANT, NONSM, _grid, construct_non_monotone, constant_profile,
                                   find_steady_states, profile_residual, reconstruct_profile,
                                   solve_boundary_values)
from bistable_robin.timemap import (SD, SI, BoundaryEnv, invert_F, nonmonotone_threshold_Mstar,
                                    potential_G, time_map)

from conftest import by_label, census

CUBIC = make_cubic_reaction(0.2)


def _match(profiles, oracle_rows, tol=1e-7):
    """Pair every profile with the oracle solution having the same end values."""
    left = list(oracle_rows)
    for pr in profiles:
        hit = [r for r in left if abs(r["a"] - pr.p_at_minus_L) < tol and abs(r["b"] - pr.p_at_L) < tol]
        assert len(hit) == 1, f"{pr.label}: no oracle solution with ends " \
                              f"({pr.p_at_minus_L}, {pr.p_at_L})"
        left.remove(hit[0])
    return left


def test_grid_validation():
    with pytest.raises(ValueError):
        _grid(1.0, 100)
    x = _grid(2.0, 5)
    assert x.tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]


def test_branch_counts_case1(wolb):
    env = BoundaryEnv(0.5, 0.05, 0.1)
    assert solve_boundary_values(wolb, env, SD) == []
    assert len(solve_boundary_values(wolb, env, SI)) == 1
    assert len(solve_boundary_values(wolb, env.with_L(8.96), SD)) == 2


def test_census_small_domain():
    _, env, profs = census(0.1, 0.05, 0.5)
    assert [p.label for p in profs] == ["SI1"]


def test_census_large_domain():
    _, _, profs = census(0.1, 0.05, 8.96)
    kinds = [p.kind for p in profs]
    assert kinds.count(SD) == 2 and kinds.count(SI) == 1 and kinds.count(NONSM) >= 1


@pytest.mark.parametrize("key", ["0.1,0.05,0.5", "0.1,0.05,8.96", "0.8,0.05,2", "0.8,0.05,12",
                                 "0.8,0.5,12"])
def test_census_against_shooting(oracles, key):
    rows = oracles["census"][key]
    pext, D, L = map(float, key.split(","))
    model, env, profs = census(pext, D, L)
    rest = _match(profs, rows)
    # shooting also sees orbits with a lone interior maximum, an opt-in family
    assert all(r["extrema"] == 1 and abs(r["a"] - r["b"]) > 1e-6 for r in rest)
    if rest:
        assert _match(find_steady_states(model, env, single_extremum=True), rows) == []


def test_sm_profiles_are_mirror_symmetric():
    for key in [(0.1, 0.05, 8.96), (0.8, 0.05, 12)]:
        _, _, profs = census(*key)
        for p in profs:
            if p.kind in (SD, SI):
                assert np.array_equal(p.p, p.p[::-1])


def test_sd_centre_value(wolb):
    model, env, profs = census(0.1, 0.05, 8.96)
    for p in profs:
        if p.kind == SD:
            top = invert_F(wolb, "upper", potential_G(wolb, env, p.p_at_L))
            assert p.p_at_0 == pytest.approx(top, abs=1e-9)
            assert p.p_at_0 >= p.p_at_L


@pytest.mark.parametrize("key", [(0.1, 0.05, 0.5), (0.1, 0.05, 8.96), (0.8, 0.05, 12)])
def test_residuals(key):
    model, env, profs = census(*key)
    for p in profs:
        r = profile_residual(model, env, p)
        assert r.interior_norm < 1e-5, p.label
        assert max(r.bc_left, r.bc_right) < 1e-6, p.label
        assert r.energy_drift < 1e-8, p.label
        assert np.all((0 <= p.p) & (p.p <= 1))


def test_constant_solution(wolb):
    env = BoundaryEnv(3.0, 0.05, wolb.theta)
    profs = find_steady_states(wolb, env, nonmonotone=False)
    const = [p for p in profs if p.kind == CONSTANT]
    assert len(const) == 1
    r = profile_residual(wolb, env, const[0])
    assert r.interior_norm < 1e-15 and max(r.bc_left, r.bc_right) < 1e-13
    assert wolb.theta in solve_boundary_values(wolb, env, SD)


def test_perturbation_detected():
    model, env, profs = census(0.1, 0.05, 0.5)
    p = profs[0]
    q = p.p.copy()
    q[500] += 1e-2
    bad = type(p)(p.kind, p.x, q, p.dp, p.energy)
    h = p.x[1] - p.x[0]
    assert profile_residual(model, env, bad).interior_norm > 1e-2 / h**2


def test_reconstruct_rejects_non_root(wolb):
    with pytest.raises(ValueError):
        reconstruct_profile(wolb, BoundaryEnv(0.5, 0.05, 0.1), SI, 0.05)


def test_nonsm_below_threshold(wolb):
    env = BoundaryEnv(1, 0.05, 0.1)
    M = nonmonotone_threshold_Mstar(wolb, env).value
    assert construct_non_monotone(wolb, env.with_L(0.99 * M)) == []
    assert len(construct_non_monotone(wolb, env.with_L(1.01 * M))) >= 1
    assert construct_non_monotone(wolb, env.with_L(5.0)) == []


def test_t3_profile_structure(wolb):
    _, _, profs = census(0.1, 0.05, 8.96)
    t3 = [p for p in profs if p.kind == NONSM]
    assert {p.label for p in t3} == {"T3(inc,dec)", "T3(inc,dec)'"}
    for p in t3:
        # turning values from the energy level
        pmin = invert_F(wolb, "lower", p.energy)
        pmax = invert_F(wolb, "upper", p.energy)
        assert pmin < wolb.theta < pmax
        assert float(wolb.F(pmin)) == pytest.approx(float(wolb.F(pmax)), abs=1e-8)
        assert p.p.min() == pytest.approx(pmin, abs=1e-4)
        assert p.p.max() == pytest.approx(pmax, abs=1e-4)
        assert p.p_at_minus_L >= 0.1 >= p.p_at_L or p.p_at_minus_L <= 0.1 <= p.p_at_L
    a, b = t3
    assert np.allclose(a.p, b.p[::-1])


def test_labels_order():
    _, _, profs = census(0.8, 0.05, 12)
    lab = by_label(profs)
    assert lab["SI1"].p_at_0 < lab["SI2"].p_at_0
    _, _, profs = census(0.1, 0.05, 8.96)
    lab = by_label(profs)
    assert lab["SD1"].p_at_0 > lab["SD2"].p_at_0


@settings(max_examples=10)
@given(st.floats(0.05, 0.95), st.floats(0.02, 1.0), st.floats(0.2, 6.0))
def test_cubic_profiles_verified(pext, D, L):
    env = BoundaryEnv(L, D, pext)
    for p in find_steady_states(CUBIC, env, n_grid=4001, nonmonotone=False):
        r = profile_residual(CUBIC, env, p)
        assert r.interior_norm < 1e-5
        assert max(r.bc_left, r.bc_right) < 1e-6
        assert r.energy_drift < 1e-8
        branch = p.kind
        if branch in (SD, SI):
            assert abs(time_map(CUBIC, env, branch, p.p_at_L) - L) < 1e-8


@settings(max_examples=8)
@given(st.floats(0.1, 25.0))
def test_uniqueness_outside_alpha_band(wolb, L):
    lm = compute_landmarks(wolb)
    lo = BoundaryEnv(L, 0.05, 0.9 * lm.alpha1)
    assert len(solve_boundary_values(wolb, lo, SI, n_scan=4096)) == 1
    hi = BoundaryEnv(L, 0.05, min(0.99, 1.05 * lm.alpha2))
    assert len(solve_boundary_values(wolb, hi, SD, n_scan=4096)) == 1


def test_unresolvable_length_is_reported(wolb):
    with pytest.raises(ConvergenceError):
        solve_boundary_values(wolb, BoundaryEnv(60.0, 0.05, 0.8), SD)


def test_existence_always():
    # one SM solution exists for any parameters; L stays below the
    # resolvable limit (about 17 here, see the ConvergenceError test)
    for pext in (0.05, 0.3, 0.7):
        for L in (0.1, 2.0, 12.0):
            profs = find_steady_states(CUBIC, BoundaryEnv(L, 0.1, pext), nonmonotone=False)
            assert any(p.kind in (SD, SI) for p in profs)
