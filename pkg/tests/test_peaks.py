import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macropeaks.covariance import EquationSpec, Heat, heat_covariance, variance
from macropeaks.errors import DomainError, InvalidVariance, PreconditionFail
from macropeaks.fieldgen import CholeskySampler, FieldSample
from macropeaks.peaks import (
    ExpStretch,
    GaugeParams,
    PowerLaw,
    TabulatedStretch,
    extract_spacetime_peaks,
    extract_spatial_peaks,
    gauge_threshold,
    stretch_from_config,
    validate_stretch,
)
from macropeaks.spectral import Riesz


def field(points, values):
    pts = np.asarray(points, dtype=float)
    return FieldSample(pts, np.asarray(values, dtype=float), "cholesky", 0, "test")


def test_zero_field_has_no_peaks():
    fld = field(np.arange(3.0, 50.0), np.zeros(47))
    assert len(extract_spatial_peaks(fld, GaugeParams(0.5))) == 0


def test_threshold_is_inclusive():
    x = 10.0
    thr = float(gauge_threshold(x, 0.5, 2.0))
    assert thr == math.sqrt(2 * 0.5 * 2.0 * math.log(x))
    res = extract_spatial_peaks(field([x, 11.0], [thr, 0.0]), GaugeParams(0.5, 2.0))
    assert res.points[:, 0].tolist() == [x]
    assert res.thresholds.tolist() == [thr]


def test_radius_e_is_excluded():
    res = extract_spatial_peaks(field([math.e, -math.e, 3.0], [100.0, 100.0, 100.0]), GaugeParams(0.1))
    assert res.points[:, 0].tolist() == [3.0]
    res2 = extract_spatial_peaks(field([[math.e, 0.0], [2.0, 2.0]], [9.0, 9.0]), GaugeParams(0.1))
    assert res2.points.tolist() == [[2.0, 2.0]]


def test_gauge_params_domain():
    with pytest.raises(DomainError):
        GaugeParams(0.0)
    with pytest.raises(InvalidVariance):
        GaugeParams(0.5, variance=0.0)


values_strategy = st.lists(st.floats(-5, 5, allow_nan=False), min_size=20, max_size=20)


@given(values_strategy, st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_monotone_in_gamma(vals, g1, g2):
    lo, hi = sorted((g1, g2))
    fld = field(np.arange(3.0, 23.0), vals)
    small = {tuple(p) for p in extract_spatial_peaks(fld, GaugeParams(lo)).points}
    large = {tuple(p) for p in extract_spatial_peaks(fld, GaugeParams(hi)).points}
    assert large <= small


@given(values_strategy, st.floats(0.05, 1.5), st.integers(-6, 6))
def test_scale_equivariance(vals, gamma, power):
    # powers of two keep the scaling exact in floating point
    s = 2.0**power
    pts = np.arange(3.0, 23.0)
    base = extract_spatial_peaks(field(pts, vals), GaugeParams(gamma, 1.0))
    scaled = extract_spatial_peaks(field(pts, np.asarray(vals) * s), GaugeParams(gamma, s * s))
    assert np.array_equal(base.points, scaled.points)


def test_small_gamma_keeps_half():
    pts = np.arange(3.0, 43.0)
    sampler = CholeskySampler(lambda r: np.exp(-np.asarray(r)), pts)
    gauge = GaugeParams(1e-10)
    frac = [len(extract_spatial_peaks(sampler.draw(7, r), gauge)) / pts.size for r in range(10_000)]
    assert np.mean(frac) == pytest.approx(0.5, abs=0.02)


def test_spacetime_zero_field():
    pts = np.column_stack([np.linspace(2, 10, 9), np.zeros(9)])
    res = extract_spacetime_peaks(field(pts, np.zeros(9)), 0.5, 1.0, PowerLaw(1.0))
    assert len(res) == 0


def test_spacetime_identity_stretch():
    t = np.array([2.0, 3.0, 5.0])
    pts = np.column_stack([t, [1.0, -2.0, 0.5]])
    res = extract_spacetime_peaks(field(pts, [50.0] * 3), 0.5, 1.0, PowerLaw(1.0))
    assert res.points[:, 0] == pytest.approx(np.exp(t), rel=1e-15)
    assert res.points[:, 1].tolist() == [1.0, -2.0, 0.5]


def test_spacetime_threshold_inclusive_and_variance():
    g = PowerLaw(0.5)
    t = np.array([4.0, 9.0])
    var = lambda s: 0.5 * s
    thr = np.sqrt(2 * 0.8 * var(t) * g.forward(t))
    pts = np.column_stack([t, [0.0, 0.0]])
    res = extract_spacetime_peaks(field(pts, [thr[0], np.nextafter(thr[1], 0)]), 0.8, var, g)
    assert res.points[:, 0].tolist() == [math.exp(2.0)]
    with pytest.raises(InvalidVariance):
        extract_spacetime_peaks(field(pts, [1.0, 1.0]), 0.8, lambda s: s - 5.0, g)


def test_spacetime_drops_times_inside_e():
    pts = np.column_stack([[0.5, 1.0, 4.0], [0.0, 0.0, 0.0]])
    res = extract_spacetime_peaks(field(pts, [99.0] * 3), 0.1, 1.0, PowerLaw(0.5))
    assert res.points[:, 0].tolist() == [math.exp(2.0)]


def test_stretch_round_trips():
    for g in (PowerLaw(0.5), ExpStretch(), TabulatedStretch((1.0, 2.0, 4.0), (0.5, 1.0, 3.0))):
        assert stretch_from_config(g.to_config()) == g
        r = np.array([1.5, 2.5, 3.5])
        assert np.allclose(g.inverse(g.forward(r)), r)


def test_exceedance_csv(tmp_path):
    res = extract_spatial_peaks(field([3.0, 4.0], [9.0, 9.0]), GaugeParams(0.5))
    path = res.to_csv(tmp_path / "peaks.csv")
    text = path.read_text()
    assert "value" in text and "threshold" in text
    assert path.with_suffix(".json").exists()


HEAT_RIESZ = EquationSpec(Heat(2.0), Riesz(d=1, beta=0.5))


def riesz_correlation(t, radius):
    return heat_covariance(HEAT_RIESZ, t, radius).value / variance(HEAT_RIESZ, t)


def test_validate_stretch_riesz_powerlaw():
    rep = validate_stretch(riesz_correlation, PowerLaw(0.5), [0.25, 0.5], np.arange(4.0, 42.0, 2.0))
    assert rep.passed, rep.failures


def test_validate_stretch_log_decay_envelope():
    # 𝓚(t, x) ≤ c e^{ct} / log‖x‖ with c = 1/2 and g = e^r; the radius arrives as nε = log‖x‖
    envelope = lambda t, log_r: min(1.0, 0.5 * math.exp(0.5 * t) / log_r)
    rep = validate_stretch(envelope, ExpStretch(), [0.5, 1.0], np.arange(10.0, 2010.0, 50.0), log_radius=True)
    assert rep.passed, rep.failures


def test_validate_stretch_bounded_g():
    capped = TabulatedStretch((1.0, 10.0, 100.0), (0.0, 5.0, 6.0))
    with pytest.raises(PreconditionFail):
        validate_stretch(riesz_correlation, capped, [0.5], np.arange(1.0, 20.0))


def test_validate_stretch_flat_g():
    flat = TabulatedStretch((1.0, 2.0, 3.0, 50.0), (1.0, 2.0, 2.0, 40.0))
    with pytest.raises(PreconditionFail):
        validate_stretch(riesz_correlation, flat, [0.5], np.arange(1.0, 10.0))


def test_validate_stretch_reports_non_vanishing():
    rep = validate_stretch(lambda t, r: 0.5, PowerLaw(0.5), [0.5], np.arange(1.0, 10.0))
    assert not rep.passed
    assert "terminal" in rep.failures[0]
