"""Samplers and special functions shared by every stage of the pipeline.

All truncated draws use the inverse-CDF transform of a supplied uniform, so
that two calls with the same uniform and ordered means give ordered draws.
This is what makes common-random-numbers comparisons across prior settings
exact rather than distributional.

Functions accept scalars or arrays and broadcast like numpy ufuncs.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

__all__ = [
    'TruncationUnderflowError',
    'RngStream',
    'TruncInterval',
    'gaussian_cdf',
    'gaussian_quantile',
    'trunc_normal_draw',
    'trunc_beta_draw',
    'binormal_cdf',
]

_TWO53 = float(2**53)


class TruncationUnderflowError(ArithmeticError):
    """The probability mass of a truncation region is not representable.

    ``index`` holds the flat positions of the offending elements when the
    draw was vectorized, so callers can report which design point failed.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a counter-based random stream.

    The pair ``(seed, stream_id)`` is the 128-bit Philox key; the counter
    starts at zero every time :meth:`generator` is called, so a stream
    replays identically wherever it is materialized.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ('seed', 'stream_id'):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ValueError(f'{name} must be a 64-bit unsigned integer, got {v}')

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *indices) -> RngStream:
        """Derive an independent stream labelled by ``indices`` (ints or str)."""
        h = hashlib.blake2b(digest_size=8, person=b'rngstream')
        h.update(struct.pack('<Q', self.stream_id))
        for idx in indices:
            if isinstance(idx, str):
                h.update(b's' + idx.encode())
            else:
                h.update(b'i' + struct.pack('<q', int(idx)))
        return RngStream(self.seed, int.from_bytes(h.digest(), 'little'))

    def uniform(self, size=None) -> np.ndarray:
        return open_uniform(self.generator(), size)


def open_uniform(gen: np.random.Generator, size=None):
    """Uniforms on the open interval (0, 1) with 53 random bits."""
    k = gen.integers(0, 2**53, size=size, dtype=np.int64)
    return (k + 0.5) / _TWO53


@dataclass(frozen=True)
class TruncInterval:
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f'empty truncation interval ({self.lower}, {self.upper})')


def gaussian_cdf(z):
    return special.ndtr(z)


def gaussian_quantile(p):
    return special.ndtri(p)


def _inward(x, lower, upper):
    # rounding can land on an endpoint; move one ulp inside
    x = np.where(x <= lower, np.nextafter(lower, np.inf), x)
    x = np.where(x >= upper, np.nextafter(upper, -np.inf), x)
    return x


def _log_tail_draw(a, b, u):
    # standardized draw on (a, b) with a > 0, working with log upper-tail masses
    lqa = special.log_ndtr(-a)
    lqb = special.log_ndtr(-b)
    ratio = np.exp(lqb - lqa)
    return -special.ndtri_exp(lqa + np.log1p(-u * (1.0 - ratio)))


def trunc_normal_draw(mean, sd, lower=-np.inf, upper=np.inf, u=0.5, tail='raise'):
    """Inverse-CDF draw from Normal(mean, sd^2) restricted to (lower, upper).

    Parameters
    ----------
    mean, sd : array_like
        Location and scale, ``sd > 0``.
    lower, upper : array_like or TruncInterval
        Truncation bounds; either may be infinite. A :class:`TruncInterval`
        may be passed as ``lower``.
    u : array_like
        Uniform(0, 1) variates, one per draw.
    tail : {'raise', 'log'}
        What to do when the mass underflows in double precision. ``'log'``
        redoes those elements with log-scale tail masses, which stays exact
        for regions arbitrarily far in a tail.

    Returns
    -------
    ndarray or float
        ``mean + sd * Phi^-1(Phi(a) + u (Phi(b) - Phi(a)))`` with ``a, b`` the
        standardized bounds. When the region sits in the upper tail the
        equivalent survival-function form is used to keep precision.

    Raises
    ------
    TruncationUnderflowError
        If ``Phi(b) - Phi(a)`` is not representable.
    """
    if isinstance(lower, TruncInterval):
        lower, upper = lower.lower, lower.upper
    mean, sd, lower, upper, u = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mean, sd, lower, upper, u)))
    if np.any(sd <= 0):
        raise ValueError('sd must be positive')
    if np.any(lower >= upper):
        raise ValueError('truncation interval must satisfy lower < upper')
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError('u must lie strictly inside (0, 1)')

    a = (lower - mean) / sd
    b = (upper - mean) / sd
    upper_tail = a > 0
    with np.errstate(invalid='ignore'):
        # lower-tail form: P(X < x) measured from a
        pa = special.ndtr(a)
        pb = special.ndtr(b)
        # upper-tail form: P(X > x) measured from b
        qa = special.ndtr(-a)
        qb = special.ndtr(-b)
        mass = np.where(upper_tail, qa - qb, pb - pa)
    bad = ~(mass > 1e-300)
    if np.any(bad) and tail != 'log':
        raise TruncationUnderflowError(
            'truncation mass underflow', index=np.flatnonzero(bad))
    with np.errstate(invalid='ignore', divide='ignore'):
        # invert from whichever side of the median the target lies on; both
        # sums add positive terms, so neither cancels
        p = pa + u * mass
        q = qb + (1.0 - u) * mass
        z = np.where(upper_tail | (p > 0.5), -special.ndtri(q), special.ndtri(p))
        if np.any(bad):
            # mirror lower-tail regions so the tail always sits above zero
            flip = ~upper_tail[bad]
            a_, b_, u_ = a[bad], b[bad], u[bad]
            lo = np.where(flip, -b_, a_)
            hi = np.where(flip, -a_, b_)
            zt = _log_tail_draw(lo, hi, np.where(flip, 1.0 - u_, u_))
            z[bad] = np.where(flip, -zt, zt)
    x = mean + sd * z
    x = _inward(x, lower, upper)
    if np.any((x <= lower) | (x >= upper)):
        raise TruncationUnderflowError(
            'truncation interval has no representable interior',
            index=np.flatnonzero((x <= lower) | (x >= upper)))
    return x[()] if x.ndim == 0 else x


def trunc_beta_draw(a, b, lower, u):
    """Inverse-CDF draw from Beta(a, b) restricted to (lower, 1).

    The upper-tail mass ``1 - I_lower(a, b) = I_{1-lower}(b, a)`` is computed
    directly, so a lower bound deep in the right tail keeps full precision.
    """
    a, b, lower, u = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (a, b, lower, u)))
    if np.any((a <= 0) | (b <= 0)):
        raise ValueError('Beta shape parameters must be positive')
    if np.any(lower >= 1):
        raise ValueError('lower truncation point must be < 1')
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError('u must lie strictly inside (0, 1)')
    lo = np.maximum(lower, 0.0)
    tail = special.betainc(b, a, 1.0 - lo)
    bad = ~(tail > 0)
    if np.any(bad):
        raise TruncationUnderflowError(
            'truncation mass underflow', index=np.flatnonzero(bad))
    # the draw leaves (1-u) of the truncated mass above it
    x = 1.0 - special.betaincinv(b, a, (1.0 - u) * tail)
    x = _inward(x, lower, 1.0)
    if np.any((x <= lower) | (x >= 1.0)):
        raise TruncationUnderflowError(
            'truncation interval has no representable interior',
            index=np.flatnonzero((x <= lower) | (x >= 1.0)))
    return x[()] if x.ndim == 0 else x


_GL_X, _GL_W = leggauss(20)


def binormal_cdf(h, k, rho):
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation rho.

    Drezner-Wesolowsky reduction as refined by Genz (2004), evaluated with a
    fixed 20-point Gauss-Legendre rule for every correlation. Accuracy is
    close to double precision.
    """
    h, k, rho = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (h, k, rho)))
    if np.any(np.abs(rho) >= 1):
        raise ValueError('|rho| must be < 1')
    out = np.empty(h.shape)
    flat_h, flat_k, flat_r, flat_out = h.ravel(), k.ravel(), rho.ravel(), out.reshape(-1)

    ninf = (flat_h == -np.inf) | (flat_k == -np.inf)
    hinf = (flat_h == np.inf) & ~ninf
    kinf = (flat_k == np.inf) & ~ninf & ~hinf
    fin = ~(ninf | hinf | kinf)
    flat_out[ninf] = 0.0
    flat_out[hinf] = special.ndtr(flat_k[hinf])
    flat_out[kinf] = special.ndtr(flat_h[kinf])
    if np.any(fin):
        flat_out[fin] = _bvn_finite(flat_h[fin], flat_k[fin], flat_r[fin])
    return out[()] if out.ndim == 0 else out


def _bvn_finite(sh, sk, r):
    # upper orthant probability P(X > h, Y > k) with h = -sh, k = -sk
    h = -sh
    k = -sk
    out = np.empty_like(h)
    low = np.abs(r) < 0.925

    if np.any(low):
        hl, kl, rl = h[low], k[low], r[low]
        hk = hl * kl
        hs = (hl * hl + kl * kl) / 2
        asr = np.arcsin(rl)
        sn = np.sin(asr[:, None] * (_GL_X[None, :] + 1) / 2)
        terms = np.exp((sn * hk[:, None] - hs[:, None]) / (1 - sn * sn))
        bvn = (terms @ _GL_W) * asr / (4 * np.pi)
        out[low] = bvn + special.ndtr(-hl) * special.ndtr(-kl)

    high = ~low
    if np.any(high):
        hh, kh, rh = h[high], k[high], r[high]
        kh = np.where(rh < 0, -kh, kh)
        hk = hh * kh
        a_s = (1 - rh) * (1 + rh)
        a = np.sqrt(a_s)
        bs = (hh - kh) ** 2
        c = (4 - hk) / 8
        d = (12 - hk) / 16
        bvn = a * np.exp(-(bs / a_s + hk) / 2) * (
            1 - c * (bs - a_s) * (1 - d * bs / 5) / 3 + c * d * a_s * a_s / 5)
        b = np.sqrt(bs)
        with np.errstate(over='ignore', invalid='ignore'):
            tail = (np.exp(-hk / 2) * np.sqrt(2 * np.pi) * special.ndtr(-b / a)
                    * b * (1 - c * bs * (1 - d * bs / 5) / 3))
        bvn = bvn - np.where(hk > -160, tail, 0.0)

        half = a / 2
        xs = (half[:, None] * (_GL_X[None, :] + 1)) ** 2
        rs = np.sqrt(1 - xs)
        with np.errstate(over='ignore', under='ignore', invalid='ignore', divide='ignore'):
            e1 = np.exp(-(bs[:, None] / xs + hk[:, None]) / 2)
            e2 = np.exp(-hk[:, None] * (1 - rs) / (2 * (1 + rs))) / rs
            poly = 1 + c[:, None] * xs * (1 + d[:, None] * xs)
            f = np.where(e1 > 0, e1 * (e2 - poly), 0.0)
        bvn = bvn + half * (f @ _GL_W)
        bvn = -bvn / (2 * np.pi)
        pos = rh > 0
        bvn = np.where(pos, bvn + special.ndtr(-np.maximum(hh, kh)),
                       -bvn + np.maximum(0.0, special.ndtr(-hh) - special.ndtr(-kh)))
        out[high] = bvn
    return np.clip(out, 0.0, 1.0)
