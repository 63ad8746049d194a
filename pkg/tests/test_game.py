import math

import numpy as np
import pytest

from uflkit import charfn, game
from uflkit.game import (CROSSOVER_GAMMA, GameGrid, ReferenceStrategy,
                         StrategyA, best_response, build_matrices, check_beta,
                         evaluate_strategy, frontier, halfspace_value,
                         hardness_curve, payoff, strategy_coordinates,
                         witness_profile)
from uflkit.linprog import LpProblem, solve_lp
from oracles import best_theta_value, golden_section_min


@pytest.fixture(scope="module")
def small_grid():
    return GameGrid.uniform(60, 60, 61)


@pytest.fixture(scope="module")
def small_matrices(small_grid):
    return build_matrices(small_grid)


@pytest.fixture(scope="module")
def small_frontier(small_grid, small_matrices):
    return frontier(small_grid, matrices=small_matrices)


def minmax_oracle(scalarized):
    """Independent direct formulation: min t s.t. mix @ S <= t per column,
    sum(mix) = 1, mix >= 0, t free."""
    n_rows, n_cols = scalarized.shape
    c = np.concatenate([np.zeros(n_rows), [1.0]])
    a = np.zeros((n_cols + 1, n_rows + 1))
    a[:n_cols, :n_rows] = scalarized.T
    a[:n_cols, n_rows] = -1.0
    a[n_cols, :n_rows] = 1.0
    relations = ("<=",) * n_cols + ("=",)
    b = np.concatenate([np.zeros(n_cols), [1.0]])
    lb = np.concatenate([np.zeros(n_rows), [-math.inf]])
    ub = np.full(n_rows + 1, math.inf)
    sol = solve_lp(LpProblem("min", c, a, relations, b, lb=lb, ub=ub))
    assert sol.status == "optimal"
    return sol.objective


# --- grids -----------------------------------------------------------------


def test_uniform_grid_shape():
    grid = GameGrid.uniform(5, 8, 3, gamma_max=2.5)
    assert grid.gamma_grid[0] == 1.0 and grid.gamma_grid[-1] == 2.5
    assert grid.p_grid[0] == 0.0 and grid.p_grid[-1] < 1.0
    assert np.allclose(np.diff(grid.p_grid), 1.0 / 8.0)
    assert grid.phi_grid[0] == 0.0 and grid.phi_grid[-1] == 1.0


def test_grid_validation():
    with pytest.raises(ValueError):
        GameGrid(gamma_grid=np.array([]), p_grid=np.array([0.0]),
                 phi_grid=np.array([0.0, 1.0]), include_jms=False)
    with pytest.raises(ValueError):
        GameGrid(gamma_grid=np.array([0.5]), p_grid=np.array([0.0]),
                 phi_grid=np.array([0.5]))
    with pytest.raises(ValueError):
        GameGrid.uniform(1, 4, 4)


# --- payoffs ---------------------------------------------------------------


def test_payoff_baseline_row_constant():
    for gamma, q in ((1.0, 0.0), (2.5, 0.7)):
        vec = payoff(1, gamma, q)
        assert (vec.c_f, vec.c_c) == (1.11, 1.78)


def test_payoff_scaled_rows():
    vec = payoff(0, 1.5, 0.0)
    assert vec.c_f == 1.5
    assert vec.c_c == pytest.approx(1.0 + 2.0 * math.exp(-1.5), abs=1e-12)
    vec = payoff(0, 2.0, 0.9)
    expect = (math.exp(-1.8) - math.exp(-2.0)) / 0.1 + 2.0 * math.exp(-2.0)
    assert vec.c_c == pytest.approx(expect, abs=1e-12)


def test_payoff_validation():
    with pytest.raises(ValueError):
        payoff(2, 1.5, 0.0)
    with pytest.raises(ValueError):
        payoff(0, 0.9, 0.0)
    with pytest.raises(ValueError):
        payoff(0, 1.5, 1.0)


def test_matrices_match_payoff(small_grid, small_matrices):
    m_f, m_c = small_matrices.m_f, small_matrices.m_c
    assert np.all(m_f[0] == 1.11)
    assert np.all(m_c[0] == 1.78)
    # facility rows are column-constant
    assert np.all(m_f[1:] == small_grid.gamma_grid[:, None])
    rng = np.random.default_rng(6)
    for _ in range(10):
        r = int(rng.integers(1, m_f.shape[0]))
        col = int(rng.integers(0, m_f.shape[1]))
        vec = payoff(0, float(small_grid.gamma_grid[r - 1]),
                     float(small_grid.p_grid[col]))
        assert m_c[r, col] == vec.c_c


# --- halfspace values ------------------------------------------------------


def test_halfspace_phi_one_picks_cheapest_row(small_matrices):
    res = halfspace_value(1.0, small_matrices)
    assert res.value == pytest.approx(1.0, abs=1e-6)


def test_halfspace_phi_zero_capped_by_baseline(small_matrices):
    res = halfspace_value(0.0, small_matrices)
    assert res.value <= 1.78 + 1e-9


def test_halfspace_matches_direct_formulation(small_matrices):
    for phi in (0.0, 0.3, 0.45, 0.7, 1.0):
        res = halfspace_value(phi, small_matrices)
        scalarized = phi * small_matrices.m_f + (1 - phi) * small_matrices.m_c
        assert res.value == pytest.approx(minmax_oracle(scalarized), abs=1e-6)


def test_halfspace_mixes_certify_value(small_matrices):
    res = halfspace_value(0.4, small_matrices)
    scalarized = 0.4 * small_matrices.m_f + 0.6 * small_matrices.m_c
    # adversary mix guarantees the value against every designer row
    assert (scalarized @ res.b_mix).min() >= res.value - 1e-6
    # designer mix concedes at most the value against every threshold
    weights = [res.a_mix.theta] + [w for _, w in res.a_mix.atoms]
    rows = [0] + [1 + int(np.searchsorted(small_matrices.grid.gamma_grid, g))
                  for g, _ in res.a_mix.atoms]
    mix_vec = np.zeros(scalarized.shape[0])
    for r, w in zip(rows, weights):
        mix_vec[r] += w
    assert (mix_vec @ scalarized).max() <= res.value + 1e-6


def test_jms_only_game_linear():
    grid = GameGrid(gamma_grid=np.array([]), p_grid=np.arange(8) / 8.0,
                    phi_grid=np.linspace(0, 1, 9), include_jms=True)
    mats = build_matrices(grid)
    for phi in grid.phi_grid:
        res = halfspace_value(float(phi), mats)
        assert res.value == pytest.approx(1.11 * phi + 1.78 * (1 - phi),
                                          abs=1e-9)
        assert res.a_mix.theta == pytest.approx(1.0, abs=1e-9)


def test_single_gamma_row_frontier():
    g0 = CROSSOVER_GAMMA
    grid = GameGrid(gamma_grid=np.array([g0]), p_grid=np.arange(100) / 100.0,
                    phi_grid=np.linspace(0, 1, 21), include_jms=False)
    fr = frontier(grid)
    alphas = [charfn.unit_connection_bound(g0, charfn.threshold(float(q)))
              for q in grid.p_grid]
    assert fr.beta_star == pytest.approx(max(g0, max(alphas)), abs=1e-6)
    # the adversary's best threshold against this row is the lowest one
    assert int(np.argmax(alphas)) == 0


# --- frontier --------------------------------------------------------------


def test_frontier_beta_and_curve(small_frontier):
    fr = small_frontier
    assert fr.beta_star == pytest.approx(fr.values.max(), abs=0.0)
    assert fr.phi_star == fr.phi_grid[int(np.argmax(fr.values))]
    assert 1.45 <= fr.beta_star <= 1.52
    assert fr.values[0] <= 1.78 + 1e-9
    assert fr.values[-1] == pytest.approx(1.0, abs=1e-6)


def test_frontier_job_count_invariance(small_grid, small_matrices,
                                       small_frontier):
    par = frontier(small_grid, jobs=2, matrices=small_matrices)
    assert np.array_equal(par.values, small_frontier.values)
    assert par.beta_star == small_frontier.beta_star
    assert par.phi_star == small_frontier.phi_star


def test_frontier_grid_refinement():
    coarse = frontier(GameGrid.uniform(200, 200, 200), jobs=2)
    fine = frontier(GameGrid.uniform(400, 400, 400), jobs=2)
    assert abs(fine.beta_star - coarse.beta_star) <= 0.01


# --- approachability check -------------------------------------------------


def test_check_beta_large_is_approachable(small_grid, small_matrices):
    chk = check_beta(1.78, small_grid, matrices=small_matrices)
    assert chk.approachable
    assert chk.blocking_phi is None


def test_check_beta_low_is_blocked(small_grid, small_matrices, small_frontier):
    chk = check_beta(1.40, small_grid, matrices=small_matrices)
    assert not chk.approachable
    assert chk.blocking_phi is not None
    assert chk.witness_b is not None
    # the witness achieves more than beta against every designer row
    phi = chk.blocking_phi
    scalarized = phi * small_matrices.m_f + (1 - phi) * small_matrices.m_c
    assert (scalarized @ chk.witness_b).min() > 1.40 + 1e-7


def test_check_beta_consistent_with_frontier(small_grid, small_matrices,
                                             small_frontier):
    up = check_beta(small_frontier.beta_star + 0.01, small_grid,
                    matrices=small_matrices)
    assert up.approachable
    down = check_beta(small_frontier.beta_star - 0.01, small_grid,
                      matrices=small_matrices)
    assert not down.approachable


def test_check_beta_rejects_nonpositive(small_grid):
    with pytest.raises(ValueError):
        check_beta(0.0, small_grid)


# --- witness ---------------------------------------------------------------


def test_witness_profile_structure(small_frontier):
    wp = witness_profile(small_frontier)
    weights = [w for _, w in wp.terms]
    assert weights == sorted(weights, reverse=True)
    assert sum(weights) == pytest.approx(1.0, abs=1e-7)
    assert wp.mass_at_min_q > 0.4
    fn = wp.to_function()
    assert charfn.integral(fn) == pytest.approx(1.0, abs=1e-7)
    assert np.all(np.diff(fn.values) >= 0)


def test_witness_degenerate_jms_only():
    grid = GameGrid(gamma_grid=np.array([]), p_grid=np.arange(4) / 4.0,
                    phi_grid=np.linspace(0, 1, 5), include_jms=True)
    fr = frontier(grid)
    wp = witness_profile(fr)
    assert sum(w for _, w in wp.terms) == pytest.approx(1.0, abs=1e-9)


# --- best response ---------------------------------------------------------


def test_best_response_h0_fixed_point():
    grid = GameGrid.uniform(400, 4, 4)
    br = best_response(charfn.threshold(0.0), grid)

    def objective(g):
        return best_theta_value(g, 1.0 + 2.0 * math.exp(-g))

    g_star, val = golden_section_min(objective, 1.0, 3.0)
    assert g_star == pytest.approx(1.46298, abs=1e-4)
    assert br.ratio == pytest.approx(val, abs=2e-3)
    assert br.gamma == pytest.approx(g_star, abs=0.01)
    assert br.theta <= 0.02


def test_best_response_h05_example():
    grid = GameGrid.uniform(400, 4, 4)
    br = best_response(charfn.threshold(0.5), grid)
    assert br.ratio <= 1.419
    # the stated witness pair is achievable
    conn = charfn.unit_connection_bound(2.0, charfn.threshold(0.5))
    assert best_theta_value(2.0, conn) == pytest.approx(1.4183, abs=1e-3)


def test_best_response_degenerate_profile():
    br = best_response(None, GameGrid.uniform(50, 4, 4))
    assert br.gamma == 1.0
    assert br.theta == 0.0
    assert br.ratio == pytest.approx(1.0, abs=1e-12)


def test_best_response_never_beats_frontier(small_grid, small_frontier):
    worst = max(best_response(charfn.threshold(float(q)), small_grid).ratio
                for q in small_grid.p_grid)
    assert worst <= small_frontier.beta_star + 0.005


def test_best_response_at_witness_attains_frontier(small_grid, small_frontier):
    # the adversary's mixed witness defeats per-profile parameter choice:
    # responding to it cannot land below the frontier
    wf = charfn.normalize(witness_profile(small_frontier).to_function())
    br = best_response(wf, small_grid)
    assert br.ratio >= small_frontier.beta_star - 1e-6
    assert br.ratio == pytest.approx(small_frontier.beta_star, abs=0.005)


# --- strategies ------------------------------------------------------------


def test_strategy_validation():
    with pytest.raises(ValueError):
        StrategyA(theta=0.5, atoms=((1.5, 0.6),))
    with pytest.raises(ValueError):
        StrategyA(theta=-0.1, atoms=((1.5, 1.1),))
    with pytest.raises(ValueError):
        StrategyA(theta=0.0, atoms=(), segments=((2.0, 1.5, 1.0),))


def test_evaluate_pure_strategies():
    jms_only = StrategyA(theta=1.0)
    assert evaluate_strategy(jms_only, charfn.threshold(0.3)) == 1.78
    g0 = CROSSOVER_GAMMA
    pure = StrategyA(theta=0.0, atoms=((g0, 1.0),))
    val = evaluate_strategy(pure, charfn.threshold(0.0))
    assert val == pytest.approx(g0, abs=1e-9)   # facility side dominates
    cf, cc = strategy_coordinates(pure, charfn.threshold(0.0))
    assert cc == pytest.approx(1.0 + 2.0 * math.exp(-g0), abs=1e-12)
    assert cc == pytest.approx(1.3736, abs=1e-4)


def test_evaluate_is_support_function():
    ref = ReferenceStrategy()
    h = charfn.threshold(0.2)
    cf, cc = strategy_coordinates(ref, h)
    val = evaluate_strategy(ref, h)
    for phi in np.linspace(0, 1, 11):
        assert val >= phi * cf + (1 - phi) * cc - 1e-12
    assert val == max(cf, cc)


def test_reference_strategy_mass_and_value():
    ref = ReferenceStrategy()
    strat = ref.to_strategy()
    total = strat.theta + sum(w for _, w in strat.atoms) \
        + sum(w for _, _, w in strat.segments)
    assert total == pytest.approx(1.0, abs=1e-12)
    qs = np.arange(200) / 200.0
    vals = [evaluate_strategy(ref, charfn.threshold(float(q))) for q in qs]
    assert 1.485 <= max(vals) <= 1.492


def test_quadrature_refinement_stable():
    ref = ReferenceStrategy()
    h = charfn.threshold(0.45)
    a = evaluate_strategy(ref, h, quad_points=128)
    b = evaluate_strategy(ref, h, quad_points=1024)
    assert a == pytest.approx(b, abs=5e-6)


# --- hardness curve --------------------------------------------------------


def test_hardness_values():
    assert hardness_curve(1.463) == pytest.approx(1.4632, abs=1e-3)
    assert hardness_curve(CROSSOVER_GAMMA) == pytest.approx(1.3736, abs=1e-4)
    assert hardness_curve(1.0) == pytest.approx(1.0 + 2.0 / math.e, abs=1e-12)


def test_hardness_monotone_to_one():
    gs = np.linspace(1.0, 60.0, 200)
    vals = np.array([hardness_curve(g) for g in gs])
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        hardness_curve(0.5)
