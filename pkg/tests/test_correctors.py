import math

import numpy as np
import pytest
from scipy.integrate import quad_vec

from modscat.correctors import (
    QuadConfig,
    TailWarning,
    J_terms,
    corrector_mu2,
    corrector_nu2,
    corrector_w2,
    cubic_duhamel_integrand,
    mu2_far_integrand,
    renormalized_tail_integrand,
    truncated_limit,
)
from modscat.grid import (
    NormKind,
    SideError,
    grid_for_spread,
    norm,
    physical,
    profile_extents,
    reference_profile,
    sample_profile,
    sigma_gamma_norm,
    to_fourier,
    zeros,
)
from modscat.linops import free_propagate


def slope(ts, ys):
    return np.polyfit(np.log(ts), np.log(ys), 1)[0]


def test_quad_config_validation():
    with pytest.raises(ValueError):
        QuadConfig(near_nodes=4)
    with pytest.raises(ValueError):
        QuadConfig(tail_cut=10)
    with pytest.raises(ValueError):
        QuadConfig(node_rule="trapezoid")
    with pytest.raises(ValueError):
        QuadConfig(threads=0)


@pytest.mark.parametrize("tau", [-3.0, -0.5, 0.7, 2.5])
def test_integrand_routes_agree(v_ref, tau):
    a = cubic_duhamel_integrand(v_ref, tau, "direct")
    b = cubic_duhamel_integrand(v_ref, tau, "factorized")
    assert norm(a - b, NormKind.L2()) < 1e-12


def test_integrand_against_propagator():
    xe, ke = profile_extents(reference_profile())
    g = grid_for_spread(xe, ke, 8.0)
    v = sample_profile(reference_profile(), g)
    u = free_propagate(v, -8.0)
    oracle = free_propagate(u.with_values(np.abs(u.values) ** 2 * u.values), 8.0)
    assert norm(cubic_duhamel_integrand(v, -8.0) - oracle, NormKind.L2()) < 1e-12


def test_integrand_validation(v_small):
    with pytest.raises(ValueError):
        cubic_duhamel_integrand(v_small, 1.0, "spectral")
    with pytest.raises(ValueError):
        renormalized_tail_integrand(v_small, -0.5)
    with pytest.raises(ValueError):
        mu2_far_integrand(v_small, 0.5)
    with pytest.raises(SideError):
        corrector_w2(to_fourier(v_small), 1.0)


def test_counterterm_sign_decides_decay(v_ref):
    taus = np.array([10.0, 100.0, 1000.0])
    good = [norm(renormalized_tail_integrand(v_ref, -t), NormKind.L2()) for t in taus]
    bad = [norm(renormalized_tail_integrand(v_ref, -t, counterterm_sign=+1), NormKind.L2()) for t in taus]
    assert slope(taus, good) < -1.9
    assert -1.1 < slope(taus, bad) < -0.9


def test_far_integrand_decays(v_ref):
    taus = np.array([10.0, 100.0, 1000.0])
    assert slope(taus, [norm(mu2_far_integrand(v_ref, t), NormKind.L2()) for t in taus]) < -0.9


def test_J_terms_sum_and_decay(v_ref):
    # J1 + J2 = F M(-t) F^{-1} X - |v_hat|^2 v_hat, the Fourier side of the far integrand
    for t in (10.0, 100.0):
        J1, J2 = J_terms(v_ref, t)
        far = to_fourier(mu2_far_integrand(v_ref, t))
        assert norm(J1 + J2 - far, NormKind.L2()) < 1e-14
    ts = np.array([10.0, 100.0, 1000.0])
    for k in (0, 1):
        assert slope(ts, [sigma_gamma_norm(J_terms(v_ref, t)[k], 0.5) for t in ts]) < -0.9


def test_w2_against_scipy_quad_vec(v_small):
    near, _ = quad_vec(lambda s: cubic_duhamel_integrand(v_small, s, "direct").values, -1, 0,
                       epsrel=1e-11, epsabs=1e-13)
    tail, _ = quad_vec(lambda s: renormalized_tail_integrand(v_small, s).values, -np.inf, -1,
                       epsrel=1e-11, epsabs=1e-13)
    oracle = physical(v_small.grid, -1j * (near + tail))
    r = corrector_w2(v_small, 1.0)
    assert norm(r.field - oracle, NormKind.Sigma()) < 1e-10
    assert r.tail_estimate < 1e-6 * norm(r.field, NormKind.Sigma())
    assert r.integrand_decay_slope < -1.8


def test_mu2_against_scipy_quad_vec(v_small):
    near, _ = quad_vec(lambda s: cubic_duhamel_integrand(v_small, s, "direct").values, 0, 1,
                       epsrel=1e-11, epsabs=1e-13)
    far, _ = quad_vec(lambda s: mu2_far_integrand(v_small, s).values / s, 1, np.inf,
                      epsrel=1e-11, epsabs=1e-13)
    oracle = physical(v_small.grid, -1j * (near + far))
    assert norm(corrector_mu2(v_small, 1.0).field - oracle, NormKind.L2()) < 1e-10


def test_nu2_is_sum(v_small):
    q = QuadConfig()
    s = corrector_w2(v_small, 1.0, q).field + corrector_mu2(v_small, 1.0, q).field
    assert norm(corrector_nu2(v_small, 1.0, q).field - s, NormKind.L2()) < 1e-15


def test_homogeneity(v_small):
    # cubic in v, linear in lam
    a = corrector_w2(v_small, 1.0).field
    b = corrector_w2(v_small * 0.5, 2.0).field
    assert norm(b - a * 0.25, NormKind.Sigma()) < 1e-12


def test_simpson_and_threads_agree(v_small):
    a = corrector_w2(v_small, 1.0, QuadConfig())
    b = corrector_w2(v_small, 1.0, QuadConfig(node_rule="simpson", near_nodes=128, tail_nodes=128,
                                              max_doublings=8))
    c = corrector_w2(v_small, 1.0, QuadConfig(threads=3))
    assert norm(a.field - b.field, NormKind.Sigma()) < 1e-7
    assert np.array_equal(a.field.values, c.field.values)


def test_truncated_tail_estimate_is_honest(v_small):
    full = corrector_w2(v_small, 1.0)
    with pytest.warns(TailWarning):
        cut = corrector_w2(v_small, 1.0, QuadConfig(tail_subst=False, tail_cut=1e3))
    gap = norm(full.field - cut.field, NormKind.Sigma())
    assert 0.5 < gap / cut.tail_estimate < 2.0


def test_linear_and_zero_limits(v_small, small_grid):
    for fn in (corrector_w2, corrector_mu2, corrector_nu2):
        assert norm(fn(v_small, 0.0).field, NormKind.L2()) == 0.0
        assert norm(fn(zeros(small_grid), 1.0).field, NormKind.L2()) == 0.0


def test_truncated_limit_gap_rate(v_ref):
    w2 = corrector_w2(v_ref, 1.0).field
    eps = np.array([1e-2, 1e-3, 1e-4])
    for gamma in (0.5, 1.0):
        gaps = [norm(truncated_limit(v_ref, 1.0, e, gamma) - w2, NormKind.Sigma()) for e in eps]
        assert 0.8 * gamma <= slope(eps, gaps) <= 1.2 * gamma
