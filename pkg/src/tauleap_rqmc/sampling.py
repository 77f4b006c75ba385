"""Inverse-CDF generation of Poisson and normal variates.

Inversion keeps the map from uniforms to counts monotone, which is what
makes (Array-)RQMC effective here. Poisson inversion is exact: the result is
the smallest ``x`` with ``F_lambda(x) >= u``.
"""

from __future__ import annotations

import ctypes
import math

import numba
import numpy as np
from numba.extending import get_cython_function_address
from scipy.special import ndtri

# Small means are inverted by bottom-up CDF accumulation; larger ones start
# from a Cornish-Fisher guess near the quantile and walk to the exact answer.
BOTTOM_UP_MAX = 50.0

_pdtr = ctypes.CFUNCTYPE(ctypes.c_double, ctypes.c_double, ctypes.c_double)(
    get_cython_function_address("scipy.special.cython_special", "pdtr")
)
_ndtri = ctypes.CFUNCTYPE(ctypes.c_double, ctypes.c_double)(
    get_cython_function_address("scipy.special.cython_special", "ndtri")
)


@numba.njit(cache=False)
def _poisson_inv(lam, u):
    if not lam > 0.0:
        return 0
    if lam <= BOTTOM_UP_MAX:
        x = 0
        p = math.exp(-lam)
        F = p
        while F < u:
            x += 1
            p *= lam / x
            Fn = F + p
            if Fn == F and x > lam:
                # u within rounding of 1: the remaining tail cannot move F.
                break
            F = Fn
        return x
    z = _ndtri(u)
    xf = math.floor(lam + math.sqrt(lam) * z + (z * z - 1.0) / 6.0)
    if xf < 0.0:
        xf = 0.0
    F = _pdtr(xf, lam)
    p = math.exp(xf * math.log(lam) - lam - math.lgamma(xf + 1.0))
    if F >= u:
        # walk down while F(x-1) still covers u
        while xf > 0.0 and F - p >= u:
            F -= p
            p *= xf / lam
            xf -= 1.0
    else:
        while F < u:
            xf += 1.0
            p *= lam / xf
            Fn = F + p
            if Fn == F and xf > lam:
                break
            F = Fn
    return np.int64(xf)


@numba.njit(cache=False)
def _poisson_ppf_kernel(lam, u, out):
    for i in range(lam.size):
        out[i] = _poisson_inv(lam[i], u[i])


@numba.njit(cache=False)
def _normal_count_kernel(lam, u, out):
    for i in range(lam.size):
        if lam[i] > 0.0:
            out[i] = lam[i] + math.sqrt(lam[i]) * _ndtri(u[i])
        else:
            out[i] = 0.0


def _check_u(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(~(u > 0.0)) or np.any(~(u < 1.0)):
        raise ValueError("uniforms must lie strictly inside (0, 1)")
    return u


def poisson_inverse(lam: float, u: float) -> int:
    """Smallest ``x`` with ``P(Pois(lam) <= x) >= u``.

    Raises
    ------
    ValueError
        If ``lam`` is negative or not finite, or ``u`` is outside (0, 1).
    """
    lam = float(lam)
    u = float(u)
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise ValueError(f"Poisson mean must be finite and >= 0, got {lam}")
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    return int(_poisson_inv(lam, u))


def poisson_ppf(lam, u, check: bool = True) -> np.ndarray:
    """Vectorized exact Poisson inversion; ``lam`` and ``u`` broadcast together.

    Negative means are treated as zero (a clamped propensity).
    """
    lam, u = np.broadcast_arrays(np.asarray(lam, np.float64), np.asarray(u, np.float64))
    if check:
        _check_u(u)
        if not np.all(np.isfinite(lam)):
            raise ValueError("Poisson means must be finite")
    lam_c = np.ascontiguousarray(lam).reshape(-1)
    u_c = np.ascontiguousarray(u).reshape(-1)
    out = np.empty(lam_c.size, dtype=np.int64)
    _poisson_ppf_kernel(lam_c, u_c, out)
    return out.reshape(lam.shape)


def normal_inverse(u):
    """Standard normal quantile, accurate to double precision.

    Uses ``scipy.special.ndtri``; accepts scalars or arrays.
    """
    arr = _check_u(u)
    z = ndtri(arr)
    return float(z) if np.ndim(z) == 0 else z


def count_variate(lam, u, mode: str = "integer"):
    """Reaction count for mean ``lam`` driven by uniform ``u``.

    ``mode="integer"`` gives an exact Poisson inverse, ``mode="real"`` gives a
    normal with mean and variance ``lam`` (possibly negative).
    """
    if mode == "integer":
        if np.ndim(lam) == 0 and np.ndim(u) == 0:
            return poisson_inverse(lam, u)
        return poisson_ppf(lam, u)
    if mode == "real":
        lam_a = np.asarray(lam, np.float64)
        if np.any(lam_a < 0) or not np.all(np.isfinite(lam_a)):
            raise ValueError("normal count mean must be finite and >= 0")
        lam_b, u_b = np.broadcast_arrays(lam_a, _check_u(u))
        out = np.empty(lam_b.size)
        _normal_count_kernel(
            np.ascontiguousarray(lam_b).reshape(-1), np.ascontiguousarray(u_b).reshape(-1), out
        )
        out = out.reshape(lam_b.shape)
        return float(out) if out.ndim == 0 else out
    raise ValueError(f"unknown mode {mode!r}")


def counts(lam: np.ndarray, u: np.ndarray, mode: str) -> np.ndarray:
    """Unchecked fast path used by the simulators (negative means clamp to 0)."""
    lam_c = np.ascontiguousarray(lam, dtype=np.float64).reshape(-1)
    u_c = np.ascontiguousarray(u, dtype=np.float64).reshape(-1)
    if mode == "integer":
        out = np.empty(lam_c.size, dtype=np.int64)
        _poisson_ppf_kernel(lam_c, u_c, out)
    else:
        out = np.empty(lam_c.size)
        _normal_count_kernel(lam_c, u_c, out)
    return out.reshape(np.shape(lam))
