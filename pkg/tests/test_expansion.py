import math

import numpy as np
import pytest

from modscat.correctors import CorrectorResult
from modscat.expansion import (
    CORRECTED_BAND,
    LEADING_BAND,
    FloorLimitedWarning,
    SweepConfig,
    fit_loglog,
    primary_norm,
    report_read,
    report_write,
    sweep,
)
from modscat.grid import GridSpec, NormKind, zeros

EPS = (0.2, 0.14, 0.1, 0.07, 0.05)


def test_fit_recovers_power_law():
    eps = np.array(EPS)
    s, c, r2 = fit_loglog(zip(eps, 3.7 * eps**3.0))
    assert s == pytest.approx(3.0, abs=1e-12)
    assert math.exp(c) == pytest.approx(3.7, rel=1e-12)
    assert r2 == pytest.approx(1.0)


def test_fit_validation():
    with pytest.raises(ValueError):
        fit_loglog([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        fit_loglog([(0.1, 1.0), (0.2, 0.0), (0.3, 1.0), (0.4, 1.0)])


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(operator="forward")
    with pytest.raises(ValueError):
        SweepConfig(epsilons=(0.2, 0.1, 0.05))
    with pytest.raises(ValueError):
        SweepConfig(epsilons=(0.3, 0.2, 0.1, 0.05))
    with pytest.raises(ValueError):
        SweepConfig(epsilons=(0.2, 0.18, 0.16, 0.14))
    cfg = SweepConfig(operator="scattering", epsilons=(0.05, 0.2, 0.1, 0.07),
                      norm_kinds=(NormKind.Hs(1),))
    assert cfg.epsilons == (0.2, 0.1, 0.07, 0.05)
    assert cfg.norm_kinds[0] == primary_norm("scattering") == NormKind.L2()


def test_bands_reject_wrong_orders():
    assert not LEADING_BAND[0] <= 4.0 <= LEADING_BAND[1]
    assert not CORRECTED_BAND[0] <= 4.0 <= CORRECTED_BAND[1]
    assert not CORRECTED_BAND[0] <= 3.0 <= CORRECTED_BAND[1]


def test_linear_sweep_is_floor_limited():
    cfg = SweepConfig(lam=0.0, grid=GridSpec(512, 30.0))
    with pytest.warns(FloorLimitedWarning):
        rep = sweep(cfg)
    assert rep.floor_limited()
    assert rep.bands() == {"leading": False, "corrected": False}


def test_missing_corrector_is_detected():
    # without the eps^3 correction the "corrected" residual still scales like eps^3
    g = GridSpec(1024, 40.0)
    cfg = SweepConfig(grid=g, measure_floor=False)
    rep = sweep(cfg, corrector=CorrectorResult(zeros(g), 0.0, float("nan")))
    assert LEADING_BAND[0] <= rep.slope_leading <= LEADING_BAND[1]
    assert not rep.bands()["corrected"]


def test_inverse_sweep_with_extra_norm(tmp_path):
    cfg = SweepConfig(operator="inverse_wave_op", grid=GridSpec(1024, 40.0),
                      norm_kinds=(NormKind.Hs(1),))
    rep = sweep(cfg)
    assert rep.primary_norm == "L2"
    assert rep.bands() == {"leading": True, "corrected": True}
    assert set(rep.fits) == {"L2", "Hs(1)"}
    assert rep.ratios()["eps"] == 0.05
    report_write(rep, tmp_path / "rep")
    back = report_read(tmp_path / "rep.csv")
    assert back.rows == rep.rows
    assert back.slope_corrected == rep.slope_corrected
    assert back.operator == rep.operator
