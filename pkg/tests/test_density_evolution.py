import math
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from unbalanced_sbm import density_evolution as de
from unbalanced_sbm.model import derive_params

P_GRID = (0.05, 0.21132, 0.25, 0.45, 0.5)


def quad_oracle(mu, p, lam):
    """Adaptive-quadrature oracle for G, independent of the Hermite rule."""
    if mu == 0:
        return 0.0
    s = math.sqrt(mu)

    def integrand(z):
        u = s * z - mu / 2
        w = math.exp(min(u, 700.0))
        return (1.0 / (p + (1 - p) * w) - 1.0) * stats.norm.pdf(z)

    # the integrand turns over near z = sqrt(mu)/2; split there
    val = 0.0
    for lo, hi in ((-np.inf, s / 2 - 3), (s / 2 - 3, s / 2 + 3), (s / 2 + 3, np.inf)):
        val += integrate.quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return lam / (1 - p) ** 2 * val


# -- G ----------------------------------------------------------------------

def test_g_at_zero():
    for p in P_GRID:
        assert de.g_map(0.0, de.limit_params(p, 1.3)) == 0.0


@pytest.mark.parametrize("p", P_GRID)
def test_g_slope_at_zero(p):
    P = de.limit_params(p, 1.7)
    assert de.g_map(1e-6, P) / 1e-6 == pytest.approx(1.7, abs=1e-4)
    assert de.g_prime(0.0, P) == 1.7


@pytest.mark.parametrize("p", (0.05, 0.25, 0.45))
@pytest.mark.parametrize("mu", (0.1, 1.0, 7.0, 30.0))
def test_g_matches_adaptive_quadrature(p, mu):
    P = de.limit_params(p, 1.0)
    assert de.g_map(mu, P) == pytest.approx(quad_oracle(mu, p, 1.0), rel=1e-9, abs=1e-12)


def test_g_matches_monte_carlo():
    P = de.limit_params(0.25, 1.0)
    val, se = de.g_map_mc(1.0, 0.25, 1.0, n_draws=10**6, seed=3)
    assert abs(de.g_map(1.0, P) - val) < 3 * se + 1e-4


def test_h_map_examples():
    assert de.h_map(0.0, 0.3) == 0.0
    for lam in (0.5, 2.0):
        P = de.limit_params(0.3, lam)
        assert lam * de.h_map(0.7, 0.3) == pytest.approx(de.g_map(0.7, P), abs=1e-12)


@pytest.mark.parametrize("p", P_GRID)
def test_g_range_bounds(p):
    lam = 1.5
    P = de.limit_params(p, lam)
    for mu in np.concatenate([np.linspace(0, 5, 26), np.geomspace(5, 400, 20)]):
        g = de.g_map(mu, P)
        assert 0.0 <= g <= lam / (p * (1 - p)) + 1e-9


@pytest.mark.parametrize("p", (0.05, 0.25, 0.5))
def test_quadrature_convergence(p):
    P = de.limit_params(p, 1.0)
    for mu in np.linspace(0, 50, 26):
        assert abs(de.g_map(mu, P, 201) - de.g_map(mu, P, 401)) <= 1e-8


def richardson_quadratic_coefficient(P, h=0.04, levels=4):
    """Limit of ``(G(mu) - lam mu) / mu^2`` as ``mu -> 0`` by a Richardson
    table over ``h, h/2, h/4, ...`` (the ratio is smooth in ``mu``)."""
    def ratio(mu):
        return (de.g_map(mu, P) - P.lam * mu) / mu ** 2

    row = [ratio(h / 2 ** k) for k in range(levels)]
    for j in range(1, levels):
        row = [(2 ** j * row[k + 1] - row[k]) / (2 ** j - 1) for k in range(len(row) - 1)]
    return row[0]


@pytest.mark.parametrize("p", P_GRID)
def test_small_mu_expansion(p):
    P = de.limit_params(p, 1.0)
    target = 0.5 * (1 - 6 * p * (1 - p))
    assert richardson_quadratic_coefficient(P) == pytest.approx(target, rel=1e-3)


# -- scalar helpers --------------------------------------------------------

def test_success_from_mu_examples():
    assert de.success_from_mu(0.0) == 0.0
    assert de.success_from_mu(1.0) == pytest.approx(2 * stats.norm.cdf(0.5) - 1, abs=1e-15)
    assert de.success_from_mu(1.0) == pytest.approx(0.3829, abs=1e-4)
    assert de.success_from_mu(1e4) == pytest.approx(1.0, abs=1e-12)


def test_mu_one():
    P = derive_params(0.3, 10, 0.4)
    assert de.mu_one(0.1, P) == pytest.approx(0.1 * 0.4 / 0.21, abs=1e-12)


def test_p_star():
    ps = de.p_star()
    assert ps == pytest.approx(0.5 - 0.5 / math.sqrt(3), abs=1e-15)
    assert 1 - 6 * ps * (1 - ps) == pytest.approx(0.0, abs=1e-12)
    assert 0.2 < ps < 0.25


# -- fixed points and iteration --------------------------------------------

def test_fixed_points_examples():
    rep = de.fixed_points(de.limit_params(0.25, 0.8))
    assert rep.zero_stable and rep.alpha is None and rep.beta is None
    rep = de.fixed_points(de.limit_params(0.25, 2.0))
    assert not rep.zero_stable and rep.beta is None and rep.alpha > 0
    rep = de.fixed_points(de.limit_params(0.05, 0.8))
    assert rep.zero_stable and 0 < rep.beta < rep.alpha
    for mu in rep.roots:
        assert abs(de.g_map(mu, de.limit_params(0.05, 0.8)) - mu) <= 1e-9


def test_alpha_cross_checked_by_monte_carlo():
    P = de.limit_params(0.25, 2.0)
    alpha = de.fixed_points(P).alpha
    val, se = de.g_map_mc(alpha, 0.25, 2.0, n_draws=10**6, seed=8)
    assert abs(val - alpha) < 5 * se


def test_iterate_examples():
    P = de.limit_params(0.25, 2.0)
    tr = de.iterate_mu(0.0, P)
    assert tr.converged_to == 0.0 and all(m == 0.0 for m in tr.mus)
    tr = de.iterate_mu(0.1, P)
    assert tr.classification == "alpha"
    assert tr.converged_to == pytest.approx(tr.fixed_points.alpha, abs=1e-8)
    tr = de.iterate_mu(1.0, de.limit_params(0.3, 0.5))
    assert tr.classification == "zero" and tr.converged_to < 1e-8


def test_trace_invariants():
    P = de.limit_params(0.1, 1.4)
    tr = de.iterate_mu(0.3, P, classify=False)
    assert tr.mus[0] == pytest.approx(0.3 * 1.4 / 0.09, abs=1e-12)
    bound = 1.4 / 0.09 + 1e-9
    assert all(m >= 0 for m in tr.mus) and all(m <= bound for m in tr.mus[1:])


def test_alpha_independent_of_q_above_threshold():
    P = de.limit_params(0.25, 1.5)
    limits = [de.iterate_mu(q, P, tol=1e-12).converged_to for q in (0.01, 0.1, 1.0)]
    assert max(limits) - min(limits) < 1e-8


def test_limit_is_a_reported_fixed_point():
    for p, lam, q in ((0.05, 0.8, 0.2), (0.05, 0.8, 0.01), (0.25, 2.0, 0.5)):
        tr = de.iterate_mu(q, de.limit_params(p, lam))
        rep = tr.fixed_points
        targets = [0.0] + list(rep.roots)
        assert min(abs(tr.converged_to - t) for t in targets) <= 100 * 1e-10


def test_non_convergence_is_reported():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tr = de.iterate_mu(0.1, de.limit_params(0.25, 2.0), max_iter=2)
    assert not tr.converged and tr.classification is None
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_iterate_rejects_bad_q():
    with pytest.raises(ValueError):
        de.iterate_mu(1.5, de.limit_params(0.25, 2.0))


# -- spinodal, q-threshold, phase diagram ----------------------------------

def test_spinodal_examples():
    assert de.spinodal(0.25) == pytest.approx(1.0, abs=1e-3)
    assert de.spinodal(de.p_star()) == pytest.approx(1.0, abs=1e-3)
    assert de.spinodal(0.05) == pytest.approx(0.58, abs=0.02)


def test_spinodal_agrees_with_fixed_point_count():
    p = 0.1
    lam_sp = de.spinodal(p)
    below = de.fixed_points(de.limit_params(p, lam_sp - 0.01))
    above = de.fixed_points(de.limit_params(p, lam_sp + 0.01))
    assert below.alpha is None
    assert above.alpha is not None and above.beta is not None


def test_phase_diagram_shape():
    grid = np.linspace(0.02, 0.5, 13)
    rows = de.phase_diagram(grid)
    lam = np.array([r["lambda_sp"] for r in rows])
    assert np.all(lam <= 1.0)
    assert all(r["lambda_ks"] == 1.0 for r in rows)
    below = grid <= de.p_star()
    assert np.all(np.diff(lam[below]) >= -1e-3)
    np.testing.assert_allclose(lam[grid >= de.p_star()], 1.0, atol=1e-3)


def test_q_threshold_examples():
    P = de.limit_params(0.05, 0.8)
    rep = de.fixed_points(P)
    assert de.q_threshold(P) == pytest.approx(rep.beta * 0.05 * 0.95 / 0.8, rel=1e-12)
    with pytest.raises(ValueError):
        de.q_threshold(de.limit_params(0.25, 0.8))


def test_q_threshold_bracketing_tight():
    P = de.limit_params(0.05, 0.8)
    rep = de.fixed_points(P)
    q_thr = de.q_threshold(P, rep)
    assert de.iterate_mu(1.01 * q_thr, P).converged_to == pytest.approx(rep.alpha, abs=1e-6)
    assert de.iterate_mu(0.99 * q_thr, P).converged_to < rep.beta
