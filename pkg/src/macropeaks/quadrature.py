"""Radial spectral integrals.

Everything the package computes in Fourier space reduces to

    I(z) = ∫_{R^d} h(‖ξ‖) e^{iξ·z} f̂(dξ)
         = ω_d ∫_0^∞ h(k) f̂(k) k^{d-1} A_d(k‖z‖) dk

for an isotropic spectral measure f̂ and a radial multiplier h, where
ω_d is the area of the unit sphere and A_d the sphere average of the
plane wave (cos, J0, sinc for d = 1, 2, 3).

The integral is split at a small radius ``a``.  On ``[0, a]`` the model's
integrable singularity at the origin is removed analytically (algebraic
weight or logarithmic substitution).  On ``[a, ∞)`` the multiplier is given
as a sum of :class:`Term` objects, each of the form ``g(k)·trig(ω k)``;
after multiplying by the plane-wave average every piece is a Fourier
integral ``∫ G(k) cos|sin(ν k) dk``.  Pieces with ``ν·R > 50`` go to
QUADPACK's Fourier-weight rule (modified Clenshaw-Curtis on each cycle
plus epsilon extrapolation); the rest are truncated at the radius ``R``
where the power-law tail falls below tolerance, and the analytic tail
``G(R)·R/(q-1)`` is added back.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import QuadratureFailure

DEFAULT_TOL = 1e-8
OSCILLATION_SWITCH = 50.0

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Term:
    """One summand ``g(k)·trig(omega·k)`` of a radial multiplier.

    ``decay`` is the power-law decay exponent of ``g`` at infinity.
    """

    g: ArrayFn
    decay: float
    trig: Optional[str] = None
    omega: float = 0.0


def sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def plane_wave_average(d: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1:
        return np.cos(x)
    if d == 2:
        return special.j0(x)
    if d == 3:
        return np.sinc(x / np.pi)
    raise ValueError(f"radial reduction implemented for d <= 3, got d={d}")


def _quad(fn, a, b, tol, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, a, b, epsabs=tol, epsrel=1e-10, limit=kw.pop("limit", 400), **kw)[:2]
    return float(val), float(err)


def _scalar(fn: ArrayFn) -> Callable[[float], float]:
    return lambda k: float(fn(np.array([k]))[0])


def _truncation_radius(G: Callable[[float], float], q: float, start: float, tol: float, support: float, settle: bool = True):
    """Radius past which the tail of ``G ~ k^{-q}`` is known to ``tol``.

    Stops once the tail is negligible or, for power-law tails, once the
    local log-slope of ``G`` matches ``q`` closely enough that the analytic
    tail ``G(R)·R/(q-1)`` is accurate.  Returns ``(R, tail)``.
    """
    R = max(start * 2.0, 1.0)
    while R < support:
        val = G(R)
        tail = val * R / (q - 1.0) if math.isfinite(q) else val * R
        if abs(tail) < tol * 1e-2:
            break
        if settle and math.isfinite(q) and val != 0:
            nxt = G(2.0 * R)
            if nxt != 0 and val * nxt > 0:
                local = -math.log2(nxt / val)
                if abs(local - q) * abs(tail) / (q - 1.0) < tol * 1e-2:
                    break
        R *= 2.0
        if R > 1e200:
            raise QuadratureFailure(f"tail of decay exponent {q} does not settle below {tol}")
    if R >= support:
        return support, 0.0
    tail = G(R) * R / (q - 1.0) if math.isfinite(q) else 0.0
    return R, float(tail)


def _plain_piece(G, trig, nu, a, q, tol, support):
    """∫_a^R G(k) trig(nu k) dk with R from the tail rule."""
    R, tail = _truncation_radius(G, q, a, tol, support, settle=trig is None)
    if trig is None:
        fn = G
    else:
        # oscillatory tails beyond R are below tol by construction
        tail = 0.0
        w = math.cos if trig == "cos" else math.sin
        fn = lambda k: G(k) * w(nu * k)
    if R <= a:
        return 0.0, 0.0
    lo_exp = math.floor(math.log10(a)) + 1 if a > 0 else -12
    decades = [10.0**j for j in range(lo_exp, math.ceil(math.log10(R)))]
    edges = [a] + [x for x in decades if a < x < R] + [R]
    total, err = 0.0, (tol * 1e-2 if tail else 0.0)
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _quad(fn, lo, hi, tol / len(edges))
        total += v
        err += e
    return total + tail, err


def _fourier_piece(G, trig, nu, a, q, tol, support):
    """Fourier integral ∫_a^∞ G(k) trig(nu k) dk, nu > 0."""
    if math.isfinite(support):
        v, e = _quad(G, a, support, tol, weight=trig, wvar=nu, limit=2000)
        return v, e
    try:
        R, _ = _truncation_radius(G, q, a, tol, math.inf, settle=False) if q > 1 else (math.inf, 0.0)
    except QuadratureFailure:
        R = math.inf
    if nu * R <= OSCILLATION_SWITCH:
        return _plain_piece(G, trig, nu, a, q, tol, support)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(G, a, np.inf, weight=trig, wvar=nu, epsabs=tol, limlst=200, limit=400, full_output=1)
    val, err = float(out[0]), float(out[1])
    if not math.isfinite(val):
        raise QuadratureFailure(f"Fourier-weight quadrature diverged (nu={nu})")
    return val, err


def _elementary(G, trig, nu, a, q, tol, support):
    if trig is not None and nu < 0:
        nu = -nu
        if trig == "sin":
            v, e = _elementary(G, trig, nu, a, q, tol, support)
            return -v, e
    if trig == "sin" and nu == 0:
        return 0.0, 0.0
    if trig is None or nu == 0:
        if q <= 1 and not math.isfinite(support):
            raise QuadratureFailure(f"non-integrable tail (decay exponent {q:g} <= 1)")
        return _plain_piece(G, None, 0.0, a, q, tol, support)
    return _fourier_piece(G, trig, nu, a, q, tol, support)


def _bessel_piece(G, z, a, q, tol, support):
    """∫_a^∞ G(k) J0(kz) dk by summing between zeros, with averaging of partial sums."""
    fn = lambda k: G(k) * float(special.j0(k * z))
    zeros = special.jn_zeros(0, 4000) / z
    zeros = zeros[zeros > a]
    edges = np.concatenate([[a], zeros])
    if math.isfinite(support):
        edges = np.concatenate([edges[edges < support], [support]])
    partial, total, err = [], 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _quad(fn, lo, hi, tol * 1e-2)
        total += v
        err += e
        partial.append(total)
        if len(partial) > 40 and abs(v) < tol * 1e-2:
            break
    sums = np.array(partial[-12:])
    while sums.size > 1:
        sums = 0.5 * (sums[1:] + sums[:-1])
    if len(partial) >= 2:
        err += abs(partial[-1] - partial[-2]) * 1e-2
    return float(sums[0]), err


def radial_integral(model, h_small: ArrayFn, terms: list[Term], z: float = 0.0, tol: float = DEFAULT_TOL):
    """Compute ``∫ h(‖ξ‖) e^{iξ·z} f̂(dξ)`` for a radial multiplier.

    Parameters
    ----------
    model : CorrelationModel
        Supplies ``spectral(k)``, ``d``, the tail exponent and the origin
        behaviour of f̂.
    h_small : callable
        Numerically stable evaluation of the full multiplier, used near the
        origin where the term decomposition may cancel.
    terms : list of Term
        Decomposition of the same multiplier used on ``[a, ∞)``.
    z : float
        Norm of the lag vector.

    Returns
    -------
    value, error : float
    """
    d = model.d
    z = abs(float(z))
    if model.atoms is not None:
        radii, weights = model.atoms
        vals = np.asarray(h_small(radii)) * weights * plane_wave_average(d, radii * z)
        return float(math.fsum(vals)), 0.0

    omega = sphere_area(d)
    support = model.support
    a = min(1.0, support)
    if z > 0:
        a = min(a, 1.0 / z)
    for t in terms:
        if t.trig is not None and t.omega > 0:
            a = min(a, 1.0 / t.omega)

    def small(k):
        k = np.asarray(k, dtype=float)
        return h_small(k) * model.spectral(k) * k ** (d - 1) * plane_wave_average(d, k * z)

    strategy, q0 = model.small_ball
    if strategy == "alg":
        # the rule samples the endpoint; the regular factor is continuous there
        floor = a * 1e-12
        reg = lambda k: float(small(np.array([max(k, floor)]))[0]) * max(k, floor) ** (-q0)
        val0, err0 = _quad(reg, 0.0, a, tol * 0.1, weight="alg", wvar=(q0, 0.0))
    elif strategy == "log":
        # k = a e^{-s}; the model supplies f̂(k)·k^d directly to avoid overflow
        log_a = math.log(a)

        def logsub(s):
            k = np.array([a * math.exp(-s)])
            return float(h_small(k)[0] * plane_wave_average(d, k * z)[0]) * model.spectral_kd_log(log_a - s)

        val0, err0 = _quad(logsub, 0.0, np.inf, tol * 0.1)
    else:
        val0, err0 = _quad(_scalar(small), 0.0, a, tol * 0.1)

    total, err = val0, err0
    p = model.spectral_tail
    for t in terms:
        q = p + t.decay - (d - 1)
        if d == 2 and z > 0:
            if t.trig is None:
                trig_fn = lambda k: 1.0
            elif t.trig == "cos":
                trig_fn = lambda k, w=t.omega: math.cos(w * k)
            else:
                trig_fn = lambda k, w=t.omega: math.sin(w * k)
            G = lambda k, t=t, trig_fn=trig_fn: float(t.g(np.array([k]))[0] * model.spectral(np.array([k]))[0]) * k * trig_fn(k)
            v, e = _bessel_piece(G, z, a, q, tol, support)
            total += v
            err += e
            continue
        if d == 3 and z > 0:
            base = lambda k, t=t: float(t.g(np.array([k]))[0] * model.spectral(np.array([k]))[0]) * k * k / (k * z)
            q3 = q + 1.0
            if t.trig is None:
                parts = [(1.0, "sin", z)]
            elif t.trig == "cos":
                parts = [(0.5, "sin", z + t.omega), (0.5, "sin", z - t.omega)]
            else:
                parts = [(0.5, "cos", t.omega - z), (-0.5, "cos", t.omega + z)]
            for coef, trig, nu in parts:
                v, e = _elementary(base, trig, nu, a, q3, tol, support)
                total += coef * v
                err += abs(coef) * e
            continue
        base = lambda k, t=t: float(t.g(np.array([k]))[0] * model.spectral(np.array([k]))[0]) * k ** (d - 1)
        if z == 0:
            parts = [(1.0, t.trig, t.omega)]
        elif t.trig is None:
            parts = [(1.0, "cos", z)]
        elif t.trig == "cos":
            parts = [(0.5, "cos", t.omega + z), (0.5, "cos", t.omega - z)]
        else:
            parts = [(0.5, "sin", t.omega + z), (0.5, "sin", t.omega - z)]
        for coef, trig, nu in parts:
            v, e = _elementary(base, trig, nu, a, q, tol, support)
            total += coef * v
            err += abs(coef) * e
    return omega * total, omega * err
