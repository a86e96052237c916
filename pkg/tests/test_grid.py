import json
import warnings

import numpy as np
import pytest

from modscat.grid import (
    FOURIER,
    PHYSICAL,
    BoundaryDecayWarning,
    GridSpec,
    NormKind,
    ProfileSpec,
    SideError,
    derivative,
    fourier,
    grid_for_spread,
    load_wavefunction,
    norm,
    physical,
    profile_extents,
    reference_profile,
    sample_profile,
    save_wavefunction,
    sigma_gamma_norm,
    to_fourier,
    to_physical,
    zeros,
)


def test_gridspec_validation():
    for n in (8, 100, 0):
        with pytest.raises(ValueError):
            GridSpec(n, 10.0)
    with pytest.raises(ValueError):
        GridSpec(64, 0.0)


def test_grid_axes(small_grid):
    g = small_grid
    assert g.x[0] == -g.half_width
    assert np.allclose(np.diff(g.x), g.dx)
    assert np.isclose(g.xi[1] - g.xi[0], np.pi / g.half_width)
    assert g.xi[g.n // 2] == 0.0
    assert g.x.flags.writeable is False


def test_fourier_of_gaussian_matches_closed_form(ref_grid):
    # F[exp(-x^2/2)](xi) = exp(-xi^2/2) for the unitary convention
    g = ref_grid
    w = physical(g, np.exp(-0.5 * g.x**2))
    f = to_fourier(w)
    assert np.max(np.abs(f.values - np.exp(-0.5 * g.xi**2))) < 1e-13


def test_shifted_gaussian_phase(ref_grid):
    # F[f(x - c)] = exp(-i c xi) F[f]
    g = ref_grid
    c = 1.5
    f = to_fourier(physical(g, np.exp(-0.5 * (g.x - c) ** 2)))
    assert np.max(np.abs(f.values - np.exp(-1j * c * g.xi - 0.5 * g.xi**2))) < 1e-12


def test_roundtrip_and_plancherel(small_grid, rng):
    g = small_grid
    vals = np.exp(-g.x**2 / 4) * (1 + 0.3 * rng.standard_normal(g.n))
    w = physical(g, vals)
    f = to_fourier(w)
    assert np.allclose(to_physical(f).values, vals, atol=1e-14)
    assert np.isclose(norm(w, NormKind.L2()), norm(f, NormKind.L2()), rtol=1e-13)


def test_side_rules(small_grid):
    w = zeros(small_grid)
    f = zeros(small_grid, FOURIER)
    with pytest.raises(SideError):
        w + f
    with pytest.raises(ValueError):
        physical(small_grid, np.zeros(3))
    assert (w * 2.0).side == PHYSICAL
    with pytest.raises(ValueError):
        w.values[0] = 1.0


def test_profiles_parse_and_norms():
    assert ProfileSpec.parse("reference") == reference_profile()
    assert ProfileSpec.parse("gaussian:2,0.5,1,3") == ProfileSpec.gaussian(2, 0.5, 1, 3)
    assert ProfileSpec.parse("hermite:2,1.5") == ProfileSpec.hermite(2, 1.5)
    with pytest.raises(ValueError):
        ProfileSpec.parse("box:1")
    g = GridSpec(4096, 60.0)
    for spec in (reference_profile(), ProfileSpec.sech(1.0, 2.0), ProfileSpec.hermite(3, 1.2)):
        assert np.isclose(norm(sample_profile(spec, g), NormKind.L2()), spec.l2_norm(), rtol=1e-12)


def test_reference_profile_is_exp_minus_x2(small_grid):
    v = sample_profile(reference_profile(), small_grid)
    assert np.allclose(v.values, np.exp(-small_grid.x**2), atol=1e-15)


def test_boundary_warning():
    with pytest.warns(BoundaryDecayWarning):
        sample_profile(ProfileSpec.sech(1.0, 1.0), GridSpec(256, 10.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sample_profile(reference_profile(), GridSpec(256, 10.0))


def test_norms_of_gaussian(ref_grid):
    # v = exp(-x^2): ||v||^2 = sqrt(pi/2), ||v'||^2 = sqrt(pi/2), ||x v||^2 = sqrt(pi/2)/4
    v = sample_profile(reference_profile(), ref_grid)
    a = (np.pi / 2) ** 0.25
    assert np.isclose(norm(v, NormKind.L2()), a, rtol=1e-13)
    assert np.isclose(norm(v, NormKind.Linf()), 1.0)
    assert np.isclose(norm(derivative(v), NormKind.L2()), a, rtol=1e-12)
    assert np.isclose(norm(v, NormKind.Sigma()), a + a + a / 2, rtol=1e-12)
    # H^1 norm squared = int (1 + xi^2) |v_hat|^2
    assert np.isclose(norm(v, NormKind.Hs(1)) ** 2, 2 * a * a, rtol=1e-12)
    assert np.isclose(norm(v, NormKind.FHs(0)), a, rtol=1e-13)
    assert sigma_gamma_norm(v, 1.0) > norm(v, NormKind.L2())
    assert norm(v, NormKind.Hcal()) > 0


def test_normkind_parse():
    assert NormKind.parse("Hs(1.5)") == NormKind.Hs(1.5)
    assert NormKind.parse("Sigma") == NormKind.Sigma()
    assert NormKind.Hs(2).label() == "Hs(2)"
    with pytest.raises(ValueError):
        NormKind.parse("L3")


def test_save_load_roundtrip(tmp_path, small_grid):
    v = sample_profile(ProfileSpec.gaussian(1, 1, 0, 2), small_grid)
    csv_path, json_path = save_wavefunction(v, tmp_path / "v", {"note": "x"})
    back = load_wavefunction(tmp_path / "v")
    assert back.grid == v.grid and back.side == v.side
    assert np.array_equal(back.values, v.values)
    meta = json.loads(json_path.read_text())
    assert meta["note"] == "x"
    f = to_fourier(v)
    save_wavefunction(f, tmp_path / "f")
    assert np.array_equal(load_wavefunction(tmp_path / "f").values, f.values)


def test_grid_for_spread_holds_the_spread():
    g = grid_for_spread(6.0, 12.0, 100.0)
    assert g.half_width >= 6.0 + 12.0 * 100.0
    assert g.xi_max >= 12.0
    xe, ke = profile_extents(reference_profile())
    assert 5 < xe < 7 and 10 < ke < 13


def test_fourier_constructor(small_grid):
    f = fourier(small_grid, np.exp(-small_grid.xi**2 / 2))
    assert np.allclose(to_physical(f).values, np.exp(-small_grid.x**2 / 2), atol=1e-13)
