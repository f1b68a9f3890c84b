"""Special functions used by the extension kernel.

Gamma is a Lanczos approximation; the modified Bessel function of the second
kind follows Temme's method (power series below x = 2, Steed's continued
fraction above), vectorized over the argument.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "gamma",
    "rgamma_taylor",
    "bessel_k_pair",
    "bessel_k",
    "richardson",
]

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Taylor coefficients of 1/Gamma(z) = sum_k c_k z^k, k = 1..26
_RGAMMA_COEF = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
)

_EPS = 1e-16
_MAX_ITER = 10000


def gamma(x: float) -> float:
    """Gamma function for real arguments (Lanczos, g=7, n=9).

    Uses the reflection formula below 1/2. Poles raise ``ValueError``.
    """
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise ValueError(f"gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * math.exp(-t) * acc


def rgamma_taylor(mu: float) -> tuple[float, float, float, float]:
    """Temme's auxiliary gamma quantities for |mu| <= 1/2.

    Returns ``(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))`` where
    gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and
    gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2. Both come from the Taylor
    series of 1/Gamma, so there is no cancellation as mu -> 0.
    """
    mu2 = mu * mu
    gam1 = 0.0
    gam2 = 0.0
    p = 1.0
    # c_k with k even feed gam1, k odd feed gam2 (1-based indices)
    for j in range(0, len(_RGAMMA_COEF), 2):
        gam2 += _RGAMMA_COEF[j] * p
        if j + 1 < len(_RGAMMA_COEF):
            gam1 -= _RGAMMA_COEF[j + 1] * p
        p *= mu2
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _series_small(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gam1, gam2, gampl, gammi = rgamma_taylor(mu)
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    with np.errstate(invalid="ignore", divide="ignore"):
        fact2 = np.where(np.abs(e) < 1e-12, 1.0, np.sinh(e) / np.where(e == 0, 1.0, e))
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    for i in range(1, _MAX_ITER):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total += delta
        delta1 = c * (p - i * ff)
        total1 += delta1
        if np.all(np.abs(delta) < np.abs(total) * _EPS):
            break
    else:  # pragma: no cover
        raise ArithmeticError("Bessel K series failed to converge")
    return total, total1 * (2.0 / x)


def _steed_large(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = np.full_like(x, -a1)
    s = 1.0 + q * delh
    for i in range(2, _MAX_ITER):
        a = a - 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels / s) < _EPS):
            break
    else:  # pragma: no cover
        raise ArithmeticError("Bessel K continued fraction failed to converge")
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def bessel_k_pair(mu: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(K_mu(x), K_{mu+1}(x))`` for |mu| <= 1/2 and x > 0."""
    if abs(mu) > 0.5 + 1e-15:
        raise ValueError("Temme's method needs |mu| <= 1/2")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("Bessel K needs positive arguments")
    flat = np.atleast_1d(x).ravel()
    k0 = np.empty_like(flat)
    k1 = np.empty_like(flat)
    small = flat < 2.0
    if np.any(small):
        k0[small], k1[small] = _series_small(mu, flat[small])
    if np.any(~small):
        k0[~small], k1[~small] = _steed_large(mu, flat[~small])
    return k0.reshape(x.shape), k1.reshape(x.shape)


def bessel_k(nu: float, x) -> np.ndarray:
    """Modified Bessel function of the second kind, real order ``nu``.

    Reduces to |mu| <= 1/2 and recurs upward in the order.
    """
    nu = abs(float(nu))
    n = int(math.floor(nu + 0.5))
    mu = nu - n
    x = np.asarray(x, dtype=float)
    km, km1 = bessel_k_pair(mu, x)
    for j in range(n):
        km, km1 = km1, km + 2.0 * (mu + j + 1) / x * km1
    return km


def richardson(values, exponents, ratio: float = 2.0) -> tuple[float, float]:
    """Richardson extrapolation of ``values`` taken at h, h/ratio, h/ratio^2...

    Each exponent in ``exponents`` removes one error term c*h^p. Returns the
    extrapolated limit and an error estimate (difference to the previous
    tableau level).

    Args:
        values: samples ordered from coarsest to finest.
        exponents: correction exponents, at most ``len(values) - 1``.
        ratio: step reduction factor between samples.

    Returns:
        Tuple ``(limit, error_estimate)``.
    """
    row = [float(v) for v in values]
    if len(exponents) > len(row) - 1:
        raise ValueError("not enough samples for the requested exponents")
    prev = row[-1]
    for p in exponents:
        f = ratio**p
        prev = row[-1]
        row = [(f * row[i + 1] - row[i]) / (f - 1.0) for i in range(len(row) - 1)]
    return row[-1], abs(row[-1] - prev)
