"""Randomized structural properties of the operators."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from modscat.correctors import cubic_duhamel_integrand
from modscat.evolve import EvolveConfig, evolve_physical
from modscat.grid import GridSpec, NormKind, ProfileSpec, norm, sample_profile, to_fourier, to_physical
from modscat.linops import check_mdf_identity, dilate, free_propagate, multiply_chirp

G = GridSpec(1024, 40.0)

profiles = st.builds(
    ProfileSpec.gaussian,
    amplitude=st.floats(0.2, 2.0),
    width=st.floats(0.6, 1.5),
    center=st.floats(-3.0, 3.0),
    momentum=st.floats(-2.0, 2.0),
)
times = st.floats(0.2, 4.0).flatmap(lambda t: st.sampled_from([t, -t]))


@settings(max_examples=25, deadline=None)
@given(profiles, times)
def test_free_flow_is_unitary_and_invertible(spec, t):
    v = sample_profile(spec, G)
    u = free_propagate(v, t)
    assert abs(norm(u, NormKind.L2()) - norm(v, NormKind.L2())) < 1e-12
    assert norm(free_propagate(u, -t) - v, NormKind.L2()) < 1e-12


@settings(max_examples=25, deadline=None)
@given(profiles, st.floats(1.0, 3.0).flatmap(lambda t: st.sampled_from([t, -t])))
def test_mdf_factorization_random(spec, t):
    v = sample_profile(spec, G)
    assert check_mdf_identity(v, t) < 1e-8 * max(1.0, norm(v, NormKind.L2()))


@settings(max_examples=25, deadline=None)
@given(profiles, times)
def test_chirp_and_dilation_isometries(spec, t):
    v = sample_profile(spec, G)
    assert abs(norm(multiply_chirp(v, t), NormKind.L2()) - norm(v, NormKind.L2())) < 1e-12
    f = to_fourier(sample_profile(ProfileSpec.gaussian(spec.amplitude, 1.0), G))
    assert abs(norm(dilate(f, 1.0 + abs(t)), NormKind.L2()) - norm(f, NormKind.L2())) < 1e-9


@settings(max_examples=10, deadline=None)
@given(profiles, st.floats(-2.0, 2.0), st.floats(0.0, 2.0 * np.pi))
def test_solver_gauge_covariance(spec, lam, theta):
    v = sample_profile(spec, G) * 0.3
    cfg = EvolveConfig(dt_base=1e-2)
    a, _ = evolve_physical(v * np.exp(1j * theta), 0.0, 0.5, lam, cfg)
    b, _ = evolve_physical(v, 0.0, 0.5, lam, cfg)
    assert norm(a - b * np.exp(1j * theta), NormKind.L2()) < 1e-12


@settings(max_examples=25, deadline=None)
@given(profiles, times)
def test_cubic_integrand_is_homogeneous(spec, tau):
    v = sample_profile(spec, G)
    a = cubic_duhamel_integrand(v * 2.0, tau)
    b = cubic_duhamel_integrand(v, tau) * 8.0
    assert norm(a - b, NormKind.L2()) < 1e-11 * max(1.0, norm(b, NormKind.L2()))


@settings(max_examples=25, deadline=None)
@given(profiles)
def test_fourier_roundtrip(spec):
    v = sample_profile(spec, G)
    assert norm(to_physical(to_fourier(v)) - v, NormKind.L2()) < 1e-13
