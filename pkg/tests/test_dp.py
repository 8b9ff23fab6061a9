import math

import numpy as np
import pytest
from scipy.special import ndtr

from gauss_polytope import (Box, GridBudgetError, PolytopeProblem, SmoothingParams,
                            alpha_for, backward_step, build_box, build_grid,
                            error_bound, g_eval, parameters_for, quadrature_estimate,
                            solve, terminal_values)
from gauss_polytope.dp import (ValueTable, build_grids, escape_profile,
                               lattice_alignment, lattice_spacing)
from gauss_polytope.kernel import transition_row

ALPHA_20 = 0.08170779653072699


def test_terminal_far_offsets():
    g = build_grid(build_box(2, 20.0, 2), 0.2)
    assert np.all(terminal_values(g, SmoothingParams(20.0, [50.0, 50.0])).values == 1)
    assert np.all(terminal_values(g, SmoothingParams(20.0, [-50.0, 0.0])).values == 0)


def test_terminal_ramp_1d():
    g = build_grid(Box([-5.0], [5.0]), 0.01)
    s = SmoothingParams(20.0, [0.0])
    v = terminal_values(g, s).values
    reps = g.representatives[0]
    np.testing.assert_array_equal(v, g_eval(reps[:, None], s))
    assert np.all(v[reps <= -0.05] == 1) and np.all(v[reps >= 0] == 0)
    assert np.all(np.diff(v) <= 0)


def test_factor_table_blocks_match_dense():
    g = build_grid(build_box(1, 20.0, 2), 0.3)
    s = SmoothingParams(20.0, [0.2, -0.4])
    factored = terminal_values(g, s)
    dense = ValueTable(0, g, values=factored.values.copy())
    for start, shape in (((-2, 3), (5, 4)), ((0, 0), g.counts), ((8, 8), (30, 30))):
        np.testing.assert_array_equal(factored.block(start, shape),
                                      dense.block(start, shape))
    idx = (np.array([0, 3, 5]), np.array([1, 1, 4]))
    np.testing.assert_array_equal(factored.gather(idx), dense.gather(idx))


def test_backward_constant_one_without_escape():
    nxt_grid = build_grid(Box([-40.0], [40.0]), 1.0)
    src = build_grid(Box([-1.0], [1.0]), 0.5)
    nxt = ValueTable(1, nxt_grid, values=np.ones(nxt_grid.counts))
    out = backward_step(nxt, src, [1.0])
    np.testing.assert_allclose(out.values, 1.0, atol=1e-8)
    zero = ValueTable(1, nxt_grid, values=np.zeros(nxt_grid.counts))
    assert np.all(backward_step(zero, src, [1.0]).values == 0)


def test_single_step_half():
    p = PolytopeProblem([[1.0]], [0.0])
    lam, beta = 400.0, 1e-3
    r = solve(p, lam, beta)
    assert abs(r.estimate - 0.5) <= r.bound.total
    assert abs(r.estimate - 0.5) <= 1.0 / lam


def small_grids(lam, beta, m, T):
    return build_grids(lam, beta, m, T)


@pytest.mark.parametrize("m, column", [(1, [0.8]), (2, [1.0, -0.6]), (2, [0.0, 1.3]),
                                       (3, [0.5, 1.0, -0.2])])
def test_stencil_methods_match_sweep(m, column):
    lam, beta = 6.0, 0.6 if m < 3 else 0.9
    grids = small_grids(lam, beta, m, 3)
    rng = np.random.default_rng(31)
    nxt = ValueTable(3, grids[3], values=rng.random(grids[3].counts))
    for t in (2, 0):
        target = grids[t + 1] if t == 2 else grids[1]
        src = ValueTable(t + 1, target, values=rng.random(target.counts))
        ref = backward_step(src, grids[t], column, method="sweep").values
        for method in ("direct", "fft"):
            got = backward_step(src, grids[t], column, method=method).values
            np.testing.assert_allclose(got, ref, atol=1e-12, rtol=0)
    assert nxt.values.shape == grids[3].counts


def test_sweep_path_on_unaligned_grids():
    # grids with unrelated spacings take the per-state sweep
    src = build_grid(Box([-1.0], [1.0]), 0.3)
    dst = build_grid(Box([-3.0], [3.0]), 0.17)
    assert lattice_alignment(src, dst) is None
    nxt = ValueTable(1, dst, values=np.linspace(0, 1, dst.size))
    info = {}
    out = backward_step(nxt, src, [0.7], info=info)
    assert info["method"] == "sweep"
    for i, x in enumerate(src.representative_points()):
        row = transition_row(x, [0.7], dst)
        assert out.values[i] == pytest.approx(np.sum(row.probs * nxt.values[row.cells]))
    with pytest.raises(ValueError, match="lattice"):
        backward_step(nxt, src, [0.7], method="fft")


def test_grids_share_lattice():
    grids = build_grids(20.0, 1 / 400, 2, 4)
    h = lattice_spacing(20.0, 1 / 400, 2)
    assert h <= 2 * (1 / 400) / math.sqrt(2)
    for t, g in enumerate(grids):
        assert g.box.hi[0] == pytest.approx(t * math.sqrt(2 * math.log(20)))
        if t:
            assert lattice_alignment(grids[t - 1], g) is not None


def test_build_grids_budget():
    with pytest.raises(GridBudgetError):
        build_grids(20.0, 1 / 400, 2, 4, cell_budget=10**6)


def test_solve_orthant_n100(orthant):
    lam, beta = parameters_for(100)
    r = solve(orthant, lam, beta)
    assert abs(r.estimate - 0.5) <= r.bound.total
    assert 0 <= r.estimate <= 1
    assert r.grid_shapes[0] == (1, 1)
    assert r.cells_total == sum(math.prod(s) for s in r.grid_shapes)


def test_solve_whole_space():
    p = PolytopeProblem([[0.5, 1.0], [-1.0, 0.3]], [1e6, 1e6])
    r = solve(p, 10.0, 0.05)
    assert r.estimate >= 1 - r.bound.total


def test_monotone_in_offset(four_step):
    lam, beta = parameters_for(25)
    base = solve(four_step, lam, beta).estimate
    bigger = solve(PolytopeProblem(four_step.A, four_step.b + 0.1), lam, beta).estimate
    assert bigger >= base


def test_values_bounded_each_step(four_step):
    lam, beta = parameters_for(25)
    grids = build_grids(lam, beta, 2, 4)
    table = terminal_values(grids[-1], SmoothingParams(lam, four_step.b), t=4)
    for t in range(3, -1, -1):
        table = backward_step(table, grids[t], four_step.A[:, t])
        assert np.all((table.values >= 0) & (table.values <= 1))


def test_determinism(four_step):
    lam, beta = parameters_for(50)
    a = solve(four_step, lam, beta).estimate
    b = solve(four_step, lam, beta, workers=2).estimate
    c = solve(four_step, lam, beta).estimate
    assert a == c == b


def test_fft_tiling_is_transparent(four_step):
    lam, beta = parameters_for(25)
    whole = solve(four_step, lam, beta, method="fft").estimate
    tiled = solve(four_step, lam, beta, method="fft", fft_points=2**14).estimate
    assert tiled == pytest.approx(whole, abs=1e-12)


def test_agrees_with_quadrature_small_instances():
    rng = np.random.default_rng(41)
    lam, beta = parameters_for(64)
    for _ in range(4):
        m, T = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        A = rng.uniform(-2, 2, (m, T))
        A[:, -1] = np.where(np.abs(A[:, -1]) < 0.2, 0.5, A[:, -1])
        p = PolytopeProblem(A, rng.uniform(-1, 1, m))
        r = solve(p, lam, beta)
        assert abs(r.estimate - quadrature_estimate(p)) <= r.bound.total


def test_error_bound_orthant(orthant):
    eb = error_bound(orthant, 20.0, 1 / 400)
    assert eb.theta_term == pytest.approx(0.2, rel=1e-15)
    assert eb.alpha_term == pytest.approx(ALPHA_20, rel=1e-14)
    assert eb.beta_term == pytest.approx(0.4, rel=1e-15)
    assert eb.total == pytest.approx(0.6817077965307270, rel=1e-14)
    assert eb.total == eb.theta_term + eb.alpha_term + eb.beta_term


def test_error_bound_linear_in_beta(orthant):
    terms = [error_bound(orthant, 20.0, beta).beta_term for beta in (1e-2, 1e-4, 1e-8)]
    assert terms[1] == pytest.approx(terms[0] / 100) and terms[2] < 1e-5


def test_error_bound_ladder_decreasing(orthant, four_step):
    for p in (orthant, four_step):
        totals = [error_bound(p, *parameters_for(n)).total for n in (1e2, 1e3, 1e4)]
        assert totals[0] > totals[1] > totals[2]


def test_error_bound_rejects(orthant):
    with pytest.raises(ValueError, match="lambda must exceed 1"):
        error_bound(orthant, 1.0, 0.1)
    with pytest.raises(ValueError, match="beta"):
        error_bound(orthant, 2.0, 0.0)
    with pytest.raises(ValueError, match="normalize"):
        error_bound(PolytopeProblem([[1.0, 0.0]], [0.0]), 2.0, 0.1)


def test_parameters_for():
    assert parameters_for(400) == (20.0, 1 / 400)
    with pytest.raises(ValueError, match="lambda must exceed 1"):
        parameters_for(1)


def test_escape_profile_matches_rows():
    grids = build_grids(5.0, 0.5, 2, 2)
    col = np.array([0.7, -1.0])
    worst = escape_profile(grids[1], col, grids[2])
    rows = [transition_row(x, col, grids[2]).escaped_mass
            for x in grids[1].representative_points()]
    assert worst == pytest.approx(max(rows), abs=1e-12)


@pytest.mark.parametrize("lam", [5.0, 10.0])
def test_escape_below_alpha(orthant, lam):
    r = solve(orthant, lam, 0.05)
    assert r.escaped_mass_max <= alpha_for(lam, orthant.A) + 1e-10


def test_one_step_mass_matches_cdf():
    # T = 1, single row: estimate tends to Phi(b)
    p = PolytopeProblem([[1.0]], [0.7])
    r = solve(p, 1e4, 1e-5)
    assert abs(r.estimate - ndtr(0.7)) <= 2e-3


def test_fft_tiles_respect_budget_and_kernel():
    from gauss_polytope.dp import _fft_tiles
    tile = _fft_tiles((1000, 1000), (3, 3), 2**14)
    assert (tile[0] + 2) * (tile[1] + 2) <= 2**14
    # never below the kernel extent, even if the budget is missed
    assert min(_fft_tiles((1000, 1000), (50, 50), 2**10)) >= 50
