"""Special functions and Gaussian quantizer design.

Everything here is scalar-in / array-out friendly and free of state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, roots_legendre

EULER_GAMMA = 0.57721566490153286061

_EPS = 1e-16
_SERIES_LIMIT = 2.0
_MAX_ITER = 500


def _cisi_scalar(x: float) -> tuple[float, float]:
    """Return (Ci(x), Si(x)) for x > 0.

    Power series below 2, Lentz continued fraction for E1(ix) above.
    """
    if x < 1e-8:
        # next terms are below x^2 / 4 relative; also avoids 0/0 for subnormal x
        return math.log(x) + EULER_GAMMA, x
    if x < _SERIES_LIMIT:
        # Alternate the running sum between the odd (Si) and even (Ci) terms.
        sums = sumc = 0.0
        total = 0.0
        sign = 1.0
        fact = 1.0
        odd = True
        for k in range(1, _MAX_ITER):
            fact *= x / k
            term = fact / k
            total += sign * term
            err = term / abs(total)
            if odd:
                sign = -sign
                sums = total
                total = sumc
            else:
                sumc = total
                total = sums
            odd = not odd
            if err < _EPS:
                break
        return sumc + math.log(x) + EULER_GAMMA, sums

    tiny = 1e-300
    b = complex(1.0, x)
    c = 1.0 / tiny
    d = h = 1.0 / b
    for i in range(2, _MAX_ITER):
        a = -float((i - 1) ** 2)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta.real - 1.0) + abs(delta.imag) < _EPS:
            break
    h *= complex(math.cos(x), -math.sin(x))
    return -h.real, 0.5 * math.pi + h.imag


def sin_integral(x):
    """Sine integral Si(x) = int_0^x sin(t)/t dt for x >= 0.

    Accepts scalars or arrays; raises ``ValueError`` on negative input.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("sin_integral expects finite, nonnegative arguments")
    out = np.zeros_like(arr)
    flat = out.reshape(-1)
    for i, v in enumerate(arr.reshape(-1)):
        if v > 0:
            flat[i] = _cisi_scalar(float(v))[1]
    return out if out.ndim else float(out)


def cos_integral(x):
    """Cosine integral Ci(x) = gamma + log(x) + int_0^x (cos t - 1)/t dt, x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("cos_integral expects finite, positive arguments")
    out = np.empty_like(arr)
    flat = out.reshape(-1)
    for i, v in enumerate(arr.reshape(-1)):
        flat[i] = _cisi_scalar(float(v))[0]
    return out if out.ndim else float(out)


def std_normal_cdf(x):
    """Standard normal cdf."""
    return ndtr(x)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuantizerLevels:
    """Minimum-distortion levels for a unit-variance real Gaussian input.

    ``edges`` has ``2**bits + 1`` entries, the first and last being -inf/+inf,
    so bin ``i`` is ``(edges[i], edges[i + 1]]`` and maps to ``levels[i]``.
    """

    bits: int
    levels: np.ndarray
    edges: np.ndarray

    @property
    def thresholds(self) -> np.ndarray:
        """Finite bin edges."""
        return self.edges[1:-1]

    @property
    def steps(self) -> np.ndarray:
        """Jump sizes nu_i - nu_{i-1} at each finite edge."""
        return np.diff(self.levels)

    def bin_probabilities(self) -> np.ndarray:
        return np.diff(std_normal_cdf(self.edges))

    def output_power(self) -> float:
        """E[Q(u)^2] for u ~ N(0, 1)."""
        return float(np.sum(self.levels**2 * self.bin_probabilities()))

    def input_correlation(self) -> float:
        """E[u Q(u)] for u ~ N(0, 1)."""
        return float(np.sum(self.steps * std_normal_pdf(self.thresholds)))

    def distortion(self) -> float:
        """Mean-squared error E[(u - Q(u))^2] for u ~ N(0, 1)."""
        return 1.0 - 2.0 * self.input_correlation() + self.output_power()

    def apply(self, u):
        """Quantize standardized samples; ties go to the lower bin."""
        idx = np.searchsorted(self.thresholds, u, side="left")
        return self.levels[idx]


def _centroids(edges: np.ndarray) -> np.ndarray:
    pdf = std_normal_pdf(edges)
    mass = np.diff(std_normal_cdf(edges))
    return (pdf[:-1] - pdf[1:]) / mass


def lloyd_max(bits: int, tol: float = 1e-10, max_iter: int = 100_000) -> QuantizerLevels:
    """Lloyd-Max quantizer for a unit Gaussian, ``bits`` in {1, 2}.

    Starts from equal-probability bins and alternates the centroid and
    midpoint conditions until no level moves by more than ``tol``.
    """
    if bits not in (1, 2):
        raise ValueError(f"unsupported bit width {bits!r}; expected 1 or 2")
    n = 2**bits
    probs = np.arange(1, n) / n
    inner = np.array([_inverse_cdf(p) for p in probs])
    edges = np.concatenate(([-np.inf], inner, [np.inf]))
    levels = _centroids(edges)
    for _ in range(max_iter):
        edges = np.concatenate(([-np.inf], 0.5 * (levels[:-1] + levels[1:]), [np.inf]))
        new = _centroids(edges)
        # enforce exact antisymmetry; the Gaussian is symmetric
        new = 0.5 * (new - new[::-1])
        moved = np.max(np.abs(new - levels))
        levels = new
        if moved < tol:
            break
    else:  # pragma: no cover
        raise RuntimeError("Lloyd-Max iteration did not converge")
    edges = np.concatenate(([-np.inf], 0.5 * (levels[:-1] + levels[1:]), [np.inf]))
    edges[n // 2] = 0.0
    return QuantizerLevels(bits=bits, levels=levels, edges=edges)


def _inverse_cdf(p: float) -> float:
    from scipy.special import ndtri

    return float(ndtri(p))


_GL_NODES, _GL_WEIGHTS = roots_legendre(96)


def quantizer_correlation(c, q: QuantizerLevels):
    """E[Q(u) Q(v)] for standard bivariate normal (u, v) with correlation ``c``.

    Uses Price's theorem written in the angle variable c = sin(theta), which
    turns the integrand into a smooth function on [0, arcsin c]. For the
    one-bit quantizer this reduces to the arcsine law (2/pi) arcsin(c) scaled
    by the level magnitude squared.
    """
    c = np.clip(np.asarray(c, dtype=float), -1.0, 1.0)
    top = np.arcsin(c)
    half = 0.5 * top[..., None]
    theta = half * (_GL_NODES + 1.0)
    w = half * _GL_WEIGHTS
    s = np.sin(theta)
    c2 = np.cos(theta) ** 2
    # the integrand is finite at theta = pi/2 but 0/0 numerically
    c2 = np.maximum(c2, 1e-300)
    t = q.thresholds
    dv = q.steps
    total = np.zeros(c.shape)
    for a, da in zip(t, dv):
        for b, db in zip(t, dv):
            expo = -(a * a - 2.0 * a * b * s + b * b) / (2.0 * c2)
            total = total + da * db / (2.0 * math.pi) * np.sum(w * np.exp(expo), axis=-1)
    return total
