import numpy as np
import pytest

from reflectsde import (
    boundary_sigma_prime_identity,
    decompose_error,
    local_time_functional,
    make_coefficients,
    make_dyadic_partition,
    make_fine_grid,
    reference_integral,
    riemann_sum,
    sample_brownian,
    solve_reflected,
)
from conftest import SEED


def test_constant_integrand_collapses(grid_1k, bpath):
    # time averages of a constant are that constant, so the sum telescopes
    # to c * B_t for every partition
    f = np.full(grid_1k.knots.size, 2.5)
    for level in (0, 2, 5, 10):
        pi = make_dyadic_partition(level, grid_1k)
        for t in (0.5, 1.0):
            if t not in pi.knots:
                continue
            r = riemann_sum(f, pi, bpath, t)
            bt = bpath.values[grid_1k.index_of_time(t)]
            assert abs(r.value - 2.5 * bt) <= 1e-12 * (1 + abs(bt))
            assert abs(r.per_interval_terms.sum() - r.value) == 0.0


def test_brownian_integrand_limit(grid_4k):
    # averaged sums of B against dB tend to B_1^2 / 2
    for i in range(5):
        b = sample_brownian(SEED, i, grid_4k)
        target = b.values[-1] ** 2 / 2
        errs = [
            abs(riemann_sum(b.values, make_dyadic_partition(lv, grid_4k), b, 1.0).value - target)
            for lv in (2, 4, 6)
        ]
        assert errs[2] < errs[0]


def test_deterministic_integrand_matches_ito(grid_4k):
    # f_s = s: averaged sums converge to the fine-grid left-point sum, which
    # is the reference because averaged and left-point limits agree for
    # deterministic integrands
    f = grid_4k.knots
    errs = {lv: [] for lv in (2, 5, 8)}
    for i in range(20):
        b = sample_brownian(SEED, 30 + i, grid_4k)
        oracle = float((grid_4k.knots[:-1] * b.increments).sum())
        for lv in errs:
            errs[lv].append(
                abs(riemann_sum(f, make_dyadic_partition(lv, grid_4k), b, 1.0).value - oracle)
            )
    rms = {lv: float(np.sqrt(np.mean(np.square(v)))) for lv, v in errs.items()}
    assert rms[8] < rms[5] < rms[2]
    assert rms[8] < 5e-3


def test_riemann_requires_partition_knot(grid_1k, bpath):
    pi = make_dyadic_partition(2, grid_1k)
    f = np.ones(grid_1k.knots.size)
    with pytest.raises(ValueError, match="not a knot"):
        riemann_sum(f, pi, bpath, 0.3)


def test_reference_constant_sigma(grid_1k):
    c = make_coefficients("constant", 1.5)
    b = sample_brownian(SEED, 2, grid_1k)
    rp = solve_reflected(1.0, c, b)
    for t in (0.25, 1.0):
        bt = b.values[grid_1k.index_of_time(t)]
        assert abs(reference_integral(rp, c, b, t) - 1.5 * bt) <= 1e-12 * (1 + abs(bt))


def test_reference_exponential_oracle():
    # sigma(x) = x from 1: the integral equals exp(B_t) - 1 in the limit
    c = make_coefficients("linear")
    errs = []
    for k in (10, 14):
        g = make_fine_grid(2**k)
        per_path = []
        for i in range(10):
            b = sample_brownian(SEED, i, g)
            rp = solve_reflected(1.0, c, b)
            target = np.exp(b.values[-1]) - 1.0
            per_path.append(abs(reference_integral(rp, c, b, 1.0) - target) / (1 + abs(target)))
        errs.append(float(np.median(per_path)))
    assert errs[1] < errs[0]
    assert errs[1] < 0.05


def test_riemann_converges_to_reference(grid_4k, sine):
    b = sample_brownian(SEED, 3, grid_4k)
    rp = solve_reflected(0.0, sine, b)
    I1 = reference_integral(rp, sine, b, 1.0)
    f = sine.sigma(rp.state)
    errs = [
        abs(riemann_sum(f, make_dyadic_partition(lv, grid_4k), b, 1.0).value - I1)
        for lv in (2, 4, 6)
    ]
    assert errs[2] < errs[0]


def test_decomposition_identity_sine(grid_4k, sine):
    for i in range(10):
        b = sample_brownian(SEED, i, grid_4k)
        rp = solve_reflected(0.0, sine, b)
        for lv in (2, 4, 6):
            pi = make_dyadic_partition(lv, grid_4k)
            d = decompose_error(rp, sine, b, pi, 1.0)
            s_val = d.total + reference_integral(rp, sine, b, 1.0)
            assert d.identity_residual <= 1e-8 * (1 + abs(s_val))


def test_decomposition_constant_sigma_all_zero(grid_1k):
    c = make_coefficients("constant", 2.0)
    b = sample_brownian(SEED, 4, grid_1k)
    rp = solve_reflected(1.0, c, b)
    d = decompose_error(rp, c, b, make_dyadic_partition(3, grid_1k), 1.0)
    for v in (d.a1, d.a2, d.a3, d.a4, d.total):
        assert abs(v) <= 1e-12


def test_decomposition_linear_sigma_no_local_time(grid_1k, linear):
    for i in range(5):
        b = sample_brownian(SEED, i, grid_1k)
        rp = solve_reflected(1.0, linear, b)
        d = decompose_error(rp, linear, b, make_dyadic_partition(4, grid_1k), 1.0)
        assert d.a4 == 0.0


def test_decomposition_at_interior_time(grid_1k, sine):
    b = sample_brownian(SEED, 5, grid_1k)
    rp = solve_reflected(0.5, sine, b)
    pi = make_dyadic_partition(4, grid_1k)
    d = decompose_error(rp, sine, b, pi, 0.5)
    assert d.identity_residual <= 1e-9 * (1 + abs(d.total))


def test_boundary_identity_zero_cases(grid_1k, linear):
    b = sample_brownian(SEED, 6, grid_1k)
    rp = solve_reflected(1.0, linear, b)  # never pushes
    assert boundary_sigma_prime_identity(rp, linear) == (0.0, 0.0)
    c0 = make_coefficients("constant", 2.0)
    rp0 = solve_reflected(0.0, c0, b)  # pushes, but sigma' vanishes
    assert boundary_sigma_prime_identity(rp0, c0) == (0.0, 0.0)


def test_boundary_identity_exact_on_pushed_paths(grid_4k, sine):
    for i in range(5):
        b = sample_brownian(SEED, i, grid_4k)
        rp = solve_reflected(0.0, sine, b)
        lhs, rhs = boundary_sigma_prime_identity(rp, sine)
        assert rp.local_time[-1] > 0
        # pushes land exactly at 0, so the weighted sum is sigma'(0) L_1
        assert lhs == rhs


def test_local_time_functional_zero_when_not_pushed(grid_1k, linear):
    b = sample_brownian(SEED, 7, grid_1k)
    rp = solve_reflected(1.0, linear, b)
    tent = lambda x: np.clip(1 - np.abs(x - 1.5) / 0.5, 0, None)
    assert local_time_functional(rp, tent, 1.0, (1.0, 2.0)) == 0.0


def test_local_time_functional_vanishes_off_boundary(grid_4k, sine):
    # l supported away from 0 never sees the push states, which sit at 0
    tent = lambda x: np.clip(1 - np.abs(x - 1.5) / 0.5, 0, None)
    for i in range(10):
        b = sample_brownian(SEED, i, grid_4k)
        rp = solve_reflected(0.0, sine, b)
        assert local_time_functional(rp, tent, 1.0, (1.0, 2.0)) == 0.0


def test_local_time_functional_near_boundary_tent(grid_4k, sine):
    h = float(grid_4k.dt[0])
    delta = 10 * np.sqrt(h)
    tent = lambda x: np.clip(1 - np.abs(x - 2 * delta) / delta, 0, None)
    ratios = []
    for i in range(20):
        b = sample_brownian(SEED, i, grid_4k)
        rp = solve_reflected(0.0, sine, b)
        if rp.local_time[-1] > 0:
            f = local_time_functional(rp, tent, 1.0, (delta, 3 * delta))
            ratios.append(f / rp.local_time[-1])
    assert np.mean(ratios) <= 1e-2


def test_local_time_functional_requires_support(grid_1k, sine):
    b = sample_brownian(SEED, 8, grid_1k)
    rp = solve_reflected(0.0, sine, b)
    with pytest.raises(ValueError, match="support"):
        local_time_functional(rp, lambda x: x, 1.0, (0.0, 1.0))


def test_partition_refinement_median_drop():
    # fixed paths: the gap between averaged sums and the reference drops by
    # at least 4x from level 2 to level 10
    g = make_fine_grid(2**16)
    sine = make_coefficients("sin")
    lo, hi = [], []
    for i in range(100):
        b = sample_brownian(SEED, i, g)
        rp = solve_reflected(0.0, sine, b)
        f = sine.sigma(rp.state)
        I1 = reference_integral(rp, sine, b, 1.0)
        lo.append(abs(riemann_sum(f, make_dyadic_partition(2, g), b, 1.0).value - I1))
        hi.append(abs(riemann_sum(f, make_dyadic_partition(10, g), b, 1.0).value - I1))
    assert np.median(hi) * 4 <= np.median(lo)
