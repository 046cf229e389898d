import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from macropeaks.errors import DomainError, NoDensity, NotAFunction
from macropeaks.spectral import (
    Exponential,
    GaussianCorr,
    LogDecay,
    Riesz,
    Tabulated,
    WhiteNoise,
    check_dalang,
    check_reinforced,
    correlation_at,
    mixing_functional,
    model_from_config,
    spectral_density_at,
)

# frozen from the physical-space identity ∫ f̂/(1+ξ²) dξ = 2π ∫_0^∞ f(x) e^{-x} dx
LOGDECAY_DALANG_D1 = 5.4751236873966596


def test_riesz_correlation_value():
    assert correlation_at(Riesz(d=1, beta=0.5, c=1.0), 4.0) == pytest.approx(0.5, abs=1e-15)


def test_exponential_at_origin_is_one():
    assert correlation_at(Exponential(d=1, lam=1.0), 0.0) == 1.0


def test_white_noise_has_no_pointwise_values():
    with pytest.raises(NotAFunction):
        correlation_at(WhiteNoise(d=1), 0.1)


def test_riesz_singular_at_origin():
    with pytest.raises(DomainError):
        correlation_at(Riesz(d=1, beta=0.5), 0.0)


def test_riesz_needs_beta_below_d():
    with pytest.raises(DomainError):
        Riesz(d=1, beta=1.0)


@pytest.mark.parametrize("xi", [0.0, 0.3, 7.0])
def test_white_noise_density_is_one(xi):
    assert spectral_density_at(WhiteNoise(d=1), [xi]) == 1.0


def test_exponential_density_at_zero():
    assert spectral_density_at(Exponential(d=1), [0.0]) == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("k", [0.0, 0.5, 3.0])
def test_exponential_density_matches_numerical_transform(k):
    oracle = 2 * integrate.quad(lambda x: math.exp(-x), 0, np.inf, weight="cos", wvar=k)[0] if k else 2.0
    assert spectral_density_at(Exponential(d=1), [k]) == pytest.approx(oracle, rel=1e-9)


@pytest.mark.parametrize("d,closed", [(2, lambda k: 2 * math.pi / (1 + k * k) ** 1.5), (3, lambda k: 8 * math.pi / (1 + k * k) ** 2)])
def test_exponential_density_known_transforms(d, closed):
    for k in (0.0, 0.7, 4.0):
        assert Exponential(d=d).spectral(np.array([k]))[0] == pytest.approx(closed(k), rel=1e-12)


def test_gaussian_density_matches_numerical_transform():
    model = GaussianCorr(d=1, sigma=1.5)
    for k in (0.0, 0.4, 1.3):
        oracle = 2 * integrate.quad(lambda x: math.exp(-0.5 * (x / 1.5) ** 2) * math.cos(k * x), 0, 40)[0]
        assert model.spectral(np.array([k]))[0] == pytest.approx(oracle, rel=1e-9)


def test_riesz_density_matches_oscillatory_oracle():
    # transform of |x|^{-1/2} at ξ = 2 by an independent oscillatory quadrature
    mpmath.mp.dps = 20
    fn = lambda x: x**-0.5 * mpmath.cos(2 * x)
    oracle = 2 * (mpmath.quad(fn, [0, 1]) + mpmath.quadosc(fn, [1, mpmath.inf], omega=2))
    value = spectral_density_at(Riesz(d=1, beta=0.5), [2.0])
    assert value == pytest.approx(float(oracle), rel=1e-10)
    assert value == pytest.approx(Riesz(d=1, beta=0.5).fourier_constant * 2**-0.5, rel=1e-14)


def test_tabulated_measure_has_no_density():
    with pytest.raises(NoDensity):
        Tabulated(d=1, radii=(1.0, 2.0), values=(0.5, 0.5), measure=True).spectral(np.array([1.0]))


def test_tabulated_rejects_negative_values():
    with pytest.raises(DomainError):
        Tabulated(d=1, radii=(0.0, 1.0), values=(1.0, -1.0))


def test_config_round_trip():
    for model in (Riesz(d=2, beta=0.7, c=2.0), Exponential(d=1, lam=0.5), LogDecay(d=1, c=2.0), GaussianCorr(d=3)):
        assert model_from_config(model.to_config()) == model


def test_dalang_white_noise_is_pi():
    rep = check_dalang(WhiteNoise(d=1), 2.0)
    assert rep.satisfied
    assert rep.value == pytest.approx(math.pi, abs=1e-6)


def test_dalang_fails_for_white_noise_low_alpha():
    rep = check_dalang(WhiteNoise(d=1), 0.5)
    assert not rep.satisfied
    assert rep.witness


def test_dalang_riesz():
    assert check_dalang(Riesz(d=1, beta=0.5), 2.0).satisfied


def test_dalang_logdecay_matches_physical_space_oracle():
    model = LogDecay(d=1, c=1.0)
    oracle = 2 * math.pi * integrate.quad(lambda x: model.correlation(np.array([x]))[0] * math.exp(-x), 0, 60, limit=200)[0]
    value = check_dalang(model, 2.0).value
    assert value == pytest.approx(oracle, rel=1e-7)
    assert value == pytest.approx(LOGDECAY_DALANG_D1, rel=1e-9)


@pytest.mark.parametrize("eta,ok", [(0.9, True), (0.4, False)])
def test_reinforced_white_noise(eta, ok):
    assert check_reinforced(WhiteNoise(d=1), 2.0, eta).satisfied is ok


def test_reinforced_riesz():
    rep = check_reinforced(Riesz(d=1, beta=0.5), 2.0, 0.7)
    assert rep.satisfied and math.isfinite(rep.value) and rep.value > 0


def test_reinforced_riesz_closed_form():
    # ∫ C|ξ|^{-1/2}(1+ξ²)^{-η} dξ = C·B(1/4, η - 1/4)
    eta = 0.3
    model = Riesz(d=1, beta=0.5)
    closed = model.fourier_constant * float(mpmath.beta(0.25, eta - 0.25))
    assert check_reinforced(model, 2.0, eta).value == pytest.approx(closed, rel=1e-8)


def test_reinforced_rejects_eta_one():
    with pytest.raises(DomainError):
        check_reinforced(WhiteNoise(d=1), 2.0, 1.0)


def test_mixing_at_zero_equals_dalang():
    assert mixing_functional(WhiteNoise(d=1), 2.0, 0.0) == pytest.approx(check_dalang(WhiteNoise(d=1), 2.0).value, abs=1e-8)


def test_mixing_white_noise_closed_form():
    assert mixing_functional(WhiteNoise(d=1), 2.0, 3.0) == pytest.approx(math.pi * math.exp(-3.0), abs=1e-6)


def test_mixing_riesz_decreases_to_zero():
    vals = [mixing_functional(Riesz(d=1, beta=0.5), 2.0, z) for z in (1.0, 4.0, 16.0, 64.0, 256.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.1 * vals[0]


def test_mixing_requires_dalang():
    with pytest.raises(DomainError):
        mixing_functional(WhiteNoise(d=1), 0.5, 1.0)


MODELS = [
    WhiteNoise(d=1),
    Riesz(d=1, beta=0.5),
    Riesz(d=2, beta=1.2),
    Exponential(d=1),
    Exponential(d=3, lam=2.0),
    GaussianCorr(d=2),
    LogDecay(d=1),
    Tabulated(d=1, radii=(0.0, 1.0, 2.0), values=(1.0, 0.5, 0.1), tail_exponent=3.0),
]


@given(st.sampled_from(MODELS), st.floats(1e-6, 1e4))
def test_spectral_density_nonnegative(model, k):
    assert model.spectral(np.array([k]))[0] >= 0


def test_spectral_density_nonnegative_bulk():
    rng = np.random.default_rng(0)
    k = np.abs(rng.standard_cauchy(10_000))
    for model in MODELS:
        if isinstance(model, LogDecay):
            vals = model.spectral(k[:200])
        else:
            vals = model.spectral(k)
        assert np.all(vals >= 0)


@given(st.sampled_from(MODELS[:6]), st.sampled_from([0.25, 0.5, 0.75]), st.floats(0.01, 0.99))
def test_reinforced_monotone_in_eta(model, eta, bump):
    # a larger exponent only improves integrability
    larger = eta + bump * (1 - eta) * 0.99
    if check_reinforced(model, 2.0, eta).satisfied:
        assert check_reinforced(model, 2.0, larger).satisfied


@pytest.mark.parametrize("model", MODELS[:6])
def test_reinforced_zero_implies_dalang(model):
    if check_reinforced(model, 2.0, 0.0).satisfied:
        assert check_dalang(model, 2.0).satisfied


@pytest.mark.parametrize("model", [Exponential(d=1, lam=0.7), GaussianCorr(d=1, sigma=2.0), LogDecay(d=1)])
def test_correlation_non_increasing(model):
    r = np.linspace(0, 20, 60)
    vals = model.correlation(r)
    assert np.all(np.diff(vals) <= 1e-15)
    assert math.isfinite(vals[0])
