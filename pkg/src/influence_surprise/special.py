"""Log-gamma, digamma and log-Beta for positive real arguments.

Both functions shift the argument upward with the gamma recurrence until the
Stirling / de Moivre asymptotic series converges to double precision, then
undo the shift. They accept scalars or numpy arrays.
"""

from __future__ import annotations

import numpy as np

_HALF_LOG_2PI = 0.91893853320467274178

# Bernoulli-number coefficients B_2k / (2k (2k - 1)) for the log-gamma series.
_LGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)

# B_2k / (2k) for the digamma series.
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

_LGAMMA_SHIFT = 15.0
_DIGAMMA_SHIFT = 12.0


def _as_positive_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"argument must be finite and positive, got {x!r}")
    return arr


def _unwrap(arr: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def lgamma(x):
    """Natural log of the gamma function for x > 0."""
    z = _as_positive_array(x).copy()
    shift_prod = np.ones_like(z)
    # x(x+1)...(x+k-1) stays below ~1e13 for every shifted argument.
    small = z < _LGAMMA_SHIFT
    while np.any(small):
        shift_prod[small] *= z[small]
        z[small] += 1.0
        small = z < _LGAMMA_SHIFT
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    for c in reversed(_LGAMMA_COEFFS):
        series = series * inv2 + c
    out = (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series * inv
    out -= np.log(shift_prod)
    return _unwrap(out, x)


def digamma(x):
    """Logarithmic derivative of the gamma function for x > 0."""
    z = _as_positive_array(x).copy()
    acc = np.zeros_like(z)
    small = z < _DIGAMMA_SHIFT
    while np.any(small):
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
        small = z < _DIGAMMA_SHIFT
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_DIGAMMA_COEFFS):
        series = series * inv2 + c
    out = acc + np.log(z) - 0.5 / z - series * inv2
    return _unwrap(out, x)


def log_beta(a, b):
    """ln B(a, b) = lgamma(a) + lgamma(b) - lgamma(a + b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = lgamma(a) + lgamma(b) - lgamma(a + b)
    return out
