"""Linear solves behind the grid search.

The reference solver here forms the 3x3 normal equations and solves
them with Cramer's rule, hand-expanded determinants and all.  It shares
no code path with the SVD machinery under test.
"""

import numpy as np
import pytest

from dcmethod import ConfigError, ModelSpec, TimeSeries, span_stats
from dcmethod.linfit import (
    BatchSolver,
    design_solver,
    evaluate_z,
    fit_columns,
    solve_linear,
    weighted_y,
    weighting_mode,
)
from dcmethod.model import design_matrix


def det3(m):
    return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))


def cramer_normal_equations(a, b):
    """Least squares through A^T A x = A^T b, Cramer's rule, m = 3 only."""
    ata = a.T @ a
    atb = a.T @ b
    d = det3(ata)
    x = np.empty(3)
    for j in range(3):
        mj = ata.copy()
        mj[:, j] = atb
        x[j] = det3(mj) / d
    return x


def sine_series(n=40, seed=0, sigma=None):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.random(n))
    y = 0.8 * np.cos(2 * np.pi * 1.3 * t) - 0.4 * np.sin(2 * np.pi * 1.3 * t) + 1.0
    y += rng.normal(0, 0.05, n)
    s = np.full(n, sigma) if sigma else None
    return TimeSeries(t, y, s)


# ---------------------------------------------------------------------------
# weighting mode resolution
# ---------------------------------------------------------------------------

def test_weighting_auto_follows_sigma():
    assert weighting_mode(sine_series(), None) == "unweighted"
    assert weighting_mode(sine_series(sigma=0.05), None) == "chi-square"
    assert weighting_mode(sine_series(sigma=0.05), "auto") == "chi-square"


def test_weighting_explicit_override():
    assert weighting_mode(sine_series(sigma=0.05), "unweighted") == "unweighted"


def test_weighting_chi_square_needs_sigma():
    with pytest.raises(ConfigError):
        weighting_mode(sine_series(), "chi-square")


def test_weighting_unknown_mode():
    with pytest.raises(ConfigError):
        weighting_mode(sine_series(), "quadrature")


# ---------------------------------------------------------------------------
# solver against the independent oracle
# ---------------------------------------------------------------------------

def test_solution_matches_cramer_oracle():
    ts = sine_series(seed=1)
    spec = ModelSpec(1, 1, 0)  # m = 3 columns
    stats = span_stats(ts)
    a = design_matrix(ts.t, spec, np.array([1.3]), stats)
    want = cramer_normal_equations(a, ts.y)
    fit = solve_linear(ts, spec, np.array([1.3]), stats)
    assert np.allclose(fit.beta.linear, want, rtol=1e-10, atol=1e-12)


def test_weighted_solution_matches_cramer_oracle():
    ts = sine_series(seed=2, sigma=0.05)
    # non-constant errors so the weighting actually changes the answer
    ts = TimeSeries(ts.t, ts.y, np.linspace(0.02, 0.2, ts.n))
    spec = ModelSpec(1, 1, 0)
    stats = span_stats(ts)
    a = design_matrix(ts.t, spec, np.array([1.3]), stats) / ts.sigma[:, None]
    want = cramer_normal_equations(a, ts.y / ts.sigma)
    fit = solve_linear(ts, spec, np.array([1.3]), stats)
    assert np.allclose(fit.beta.linear, want, rtol=1e-10, atol=1e-12)


def test_z_matches_cramer_oracle():
    ts = sine_series(seed=3)
    spec = ModelSpec(1, 1, 0)
    stats = span_stats(ts)
    a = design_matrix(ts.t, spec, np.array([1.3]), stats)
    x = cramer_normal_equations(a, ts.y)
    r = ts.y - a @ x
    z_want = np.sqrt(r @ r / ts.n)
    fit = solve_linear(ts, spec, np.array([1.3]), stats)
    assert fit.z == pytest.approx(z_want, rel=1e-10)


def test_residuals_are_explicit_differences():
    ts = sine_series(seed=4)
    spec = ModelSpec(1, 1, 1)
    stats = span_stats(ts)
    fit = solve_linear(ts, spec, np.array([1.3]), stats)
    a = design_matrix(ts.t, spec, np.array([1.3]), stats)
    assert np.array_equal(fit.residuals, ts.y - a @ fit.beta.linear)
    assert fit.r_sum == pytest.approx(fit.residuals @ fit.residuals, rel=1e-14)


def test_unweighted_stat_is_residual_sum():
    ts = sine_series(seed=5)
    fit = solve_linear(ts, ModelSpec(1, 1, 0), np.array([1.3]))
    assert fit.chi2 is None
    assert fit.stat == fit.r_sum
    assert fit.z == pytest.approx(np.sqrt(fit.r_sum / ts.n), rel=1e-14)


def test_constant_sigma_scales_chi2():
    base = sine_series(seed=6)
    c = 0.07
    ts = TimeSeries(base.t, base.y, np.full(base.n, c))
    fu = solve_linear(base, ModelSpec(1, 1, 0), np.array([1.3]))
    fw = solve_linear(ts, ModelSpec(1, 1, 0), np.array([1.3]))
    assert fw.chi2 == pytest.approx(fu.r_sum / c**2, rel=1e-12)
    assert fw.z == pytest.approx(fu.z / c, rel=1e-12)
    assert fw.stat == fw.chi2


# ---------------------------------------------------------------------------
# batched solver
# ---------------------------------------------------------------------------

def test_batch_solver_matches_lstsq_per_row():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(5, 12, 4))
    b = rng.normal(size=12)
    solver = BatchSolver(a)
    x, resid = solver.solve(b[None, :, None])
    for i in range(5):
        want = np.linalg.lstsq(a[i], b, rcond=None)[0]
        assert np.allclose(x[i, :, 0], want, rtol=1e-12, atol=1e-12)
        assert np.allclose(resid[i, :, 0], b - a[i] @ want, atol=1e-12)


def test_batch_misfit_matches_residual_norm():
    rng = np.random.default_rng(10)
    a = rng.normal(size=(3, 9, 2))
    b = rng.normal(size=(3, 9, 4))
    solver = BatchSolver(a)
    z = solver.misfit(b, 9)
    _, resid = solver.solve(b)
    want = np.sqrt(np.einsum("bnr,bnr->br", resid, resid) / 9)
    assert np.allclose(z, want, rtol=1e-12)


def test_rank_deficient_column_flagged_and_min_norm():
    rng = np.random.default_rng(11)
    col = rng.normal(size=10)
    a = np.stack([col, col, rng.normal(size=10)], axis=1)[None, :, :]
    b = rng.normal(size=(1, 10, 1))
    solver = BatchSolver(a)
    assert solver.degenerate[0]
    x, _ = solver.solve(b)
    want = np.linalg.pinv(a[0]) @ b[0]
    assert np.allclose(x[0], want, rtol=1e-8, atol=1e-10)


def test_evaluate_z_flags_duplicate_frequencies():
    ts = sine_series(seed=12)
    spec = ModelSpec(2, 1, 0)
    stats = span_stats(ts)
    batch = np.array([[2.0, 1.0], [1.5, 1.5]])  # second tuple duplicates columns
    z, degen = evaluate_z(ts, spec, batch, stats)
    assert z.shape == (2,)
    assert not degen[0]
    assert degen[1]
    assert np.isfinite(z).all()


def test_single_tuple_goes_through_batch_path():
    # bit-identical z whether a tuple is solved alone or inside a batch
    ts = sine_series(seed=13)
    spec = ModelSpec(1, 1, 0)
    stats = span_stats(ts)
    batch = np.array([[1.1], [1.3], [2.9]])
    z_all, _ = evaluate_z(ts, spec, batch, stats)
    for i, f in enumerate(batch):
        z_one, _ = evaluate_z(ts, spec, f[None, :], stats)
        assert z_one[0] == z_all[i]
        fit = solve_linear(ts, spec, f, stats)
        assert fit.z == z_all[i]


def test_weighted_y_applies_row_scaling():
    ts = sine_series(seed=14, sigma=0.1)
    assert np.array_equal(weighted_y(ts, "chi-square"), ts.y / ts.sigma)
    assert np.array_equal(weighted_y(ts, "unweighted"), ts.y)


def test_design_solver_weighted_rows():
    ts = sine_series(seed=15, sigma=0.25)
    spec = ModelSpec(1, 1, 0)
    stats = span_stats(ts)
    solver = design_solver(ts, spec, np.array([[1.3]]), stats, "chi-square")
    b = weighted_y(ts, "chi-square")[None, :, None]
    x, _ = solver.solve(b)
    aw = design_matrix(ts.t, spec, np.array([1.3]), stats) / ts.sigma[:, None]
    want = np.linalg.lstsq(aw, ts.y / ts.sigma, rcond=None)[0]
    assert np.allclose(x[0, :, 0], want, rtol=1e-12)


def test_fit_columns_exact_polynomial():
    t = np.linspace(-1, 1, 6)
    cols = np.stack([np.ones_like(t), t, t**2], axis=1)
    y = 2.0 - 0.5 * t + 0.25 * t**2
    x, fitted, resid = fit_columns(cols, y)
    assert np.allclose(x, [2.0, -0.5, 0.25], rtol=1e-12)
    assert np.allclose(fitted, y, rtol=1e-12)
    assert np.max(np.abs(resid)) < 1e-12
