"""Hot per-step update kernels: numba-compiled with a pure-numpy twin.

Backend selection: numba is used when importable unless the environment
variable VFP_PURE_NUMPY is set to a truthy value.  VFP_THREADS caps the numba
thread pool.  Both backends implement the same elementwise operation order,
and per-particle writes are independent, so results do not depend on thread
count; the two backends agree to floating round-off (numpy's SIMD log differs
from libm by an ulp on rare arguments, so cross-backend equality is not
bitwise).

Drift polynomials are evaluated by Horner from the highest coefficient; noise
is the counter-based stream of vfp.rng.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import rng
from .rng import GOLDEN, MIX_A, MIX_B, TWO_NEG53, TWO_PI, U64

_flag = os.environ.get("VFP_PURE_NUMPY", "").strip().lower()
FORCE_NUMPY = _flag not in ("", "0", "false", "no")

try:
    if FORCE_NUMPY:
        raise ImportError("pure-numpy backend requested")
    import numba
    from numba import njit, prange
    numba.config.THREADING_LAYER = "workqueue"  # portable, fork-safe
    _threads = os.environ.get("VFP_THREADS", "").strip()
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads),
                                         numba.config.NUMBA_NUM_THREADS)))
    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations

def _horner_np(coeffs, x):
    acc = np.full_like(x, coeffs[-1])
    for k in range(coeffs.size - 2, -1, -1):
        acc = acc * x + coeffs[k]
    return acc


def _kinetic_1d_np(q, p, drift_coeffs, lam, dt, key, counter0):
    n = q.size
    sig = math.sqrt(2.0 * lam * dt)
    drift = _horner_np(drift_coeffs, q)
    z = rng.normals(key, counter0 + np.arange(n, dtype=U64))
    p_new = p - (drift + p) * dt + sig * z
    q += p * dt
    p[:] = p_new


def _overdamped_1d_np(q, drift_coeffs, lam, dt, key, counter0):
    n = q.size
    sig = math.sqrt(2.0 * lam * dt)
    drift = _horner_np(drift_coeffs, q)
    z = rng.normals(key, counter0 + np.arange(n, dtype=U64))
    q -= drift * dt
    q += sig * z


def _kinetic_nd_np(q, p, vprime_coeffs, alpha, mean, lam, dt, key, counter0):
    n, d = q.shape
    sig = math.sqrt(2.0 * lam * dt)
    r = np.sqrt(np.sum(q * q, axis=1))
    vp = _horner_np(vprime_coeffs, r)
    coef = np.divide(vp, r, out=np.zeros_like(r), where=r > 0.0)
    drift = coef[:, None] * q + alpha * (q - mean[None, :])
    z = rng.normals(key, counter0 + np.arange(n * d, dtype=U64)).reshape(n, d)
    p_new = p - (drift + p) * dt + sig * z
    q += p * dt
    p[:] = p_new


def _overdamped_nd_np(q, vprime_coeffs, alpha, mean, lam, dt, key, counter0):
    n, d = q.shape
    sig = math.sqrt(2.0 * lam * dt)
    r = np.sqrt(np.sum(q * q, axis=1))
    vp = _horner_np(vprime_coeffs, r)
    coef = np.divide(vp, r, out=np.zeros_like(r), where=r > 0.0)
    drift = coef[:, None] * q + alpha * (q - mean[None, :])
    z = rng.normals(key, counter0 + np.arange(n * d, dtype=U64)).reshape(n, d)
    q -= drift * dt
    q += sig * z


def _pairwise_drift_np(q, gprime_coeffs):
    diff = q[:, None] - q[None, :]
    return np.mean(_horner_np(gprime_coeffs, diff), axis=1)


# ---------------------------------------------------------------------------
# numba implementations (inline noise, prange over particles)

if USING_NUMBA:

    @njit(inline="always", cache=True)
    def _value(key, counter):
        z = key + counter * GOLDEN
        z = (z ^ (z >> U64(30))) * MIX_A
        z = (z ^ (z >> U64(27))) * MIX_B
        return z ^ (z >> U64(31))

    @njit(inline="always", cache=True)
    def _normal(key, base):
        a = _value(key, base * U64(2))
        b = _value(key, base * U64(2) + U64(1))
        u1 = ((a >> U64(11)) + U64(1)) * TWO_NEG53
        u2 = (b >> U64(11)) * TWO_NEG53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)

    @njit(inline="always", cache=True)
    def _horner(coeffs, x):
        acc = coeffs[coeffs.size - 1]
        for k in range(coeffs.size - 2, -1, -1):
            acc = acc * x + coeffs[k]
        return acc

    @njit(parallel=True, cache=True)
    def _kinetic_1d_nb(q, p, drift_coeffs, lam, dt, key, counter0):
        n = q.size
        sig = math.sqrt(2.0 * lam * dt)
        for i in prange(n):
            drift = _horner(drift_coeffs, q[i])
            z = _normal(key, counter0 + U64(i))
            p_new = p[i] - (drift + p[i]) * dt + sig * z
            q[i] = q[i] + p[i] * dt
            p[i] = p_new

    @njit(parallel=True, cache=True)
    def _overdamped_1d_nb(q, drift_coeffs, lam, dt, key, counter0):
        n = q.size
        sig = math.sqrt(2.0 * lam * dt)
        for i in prange(n):
            drift = _horner(drift_coeffs, q[i])
            z = _normal(key, counter0 + U64(i))
            q[i] = (q[i] - drift * dt) + sig * z

    @njit(parallel=True, cache=True)
    def _kinetic_nd_nb(q, p, vprime_coeffs, alpha, mean, lam, dt, key, counter0):
        n, d = q.shape
        sig = math.sqrt(2.0 * lam * dt)
        for i in prange(n):
            r = 0.0
            for c in range(d):
                r += q[i, c] * q[i, c]
            r = math.sqrt(r)
            coef = _horner(vprime_coeffs, r) / r if r > 0.0 else 0.0
            for c in range(d):
                drift = coef * q[i, c] + alpha * (q[i, c] - mean[c])
                z = _normal(key, counter0 + U64(i * d + c))
                p_new = p[i, c] - (drift + p[i, c]) * dt + sig * z
                q[i, c] = q[i, c] + p[i, c] * dt
                p[i, c] = p_new

    @njit(parallel=True, cache=True)
    def _overdamped_nd_nb(q, vprime_coeffs, alpha, mean, lam, dt, key, counter0):
        n, d = q.shape
        sig = math.sqrt(2.0 * lam * dt)
        for i in prange(n):
            r = 0.0
            for c in range(d):
                r += q[i, c] * q[i, c]
            r = math.sqrt(r)
            coef = _horner(vprime_coeffs, r) / r if r > 0.0 else 0.0
            for c in range(d):
                drift = coef * q[i, c] + alpha * (q[i, c] - mean[c])
                z = _normal(key, counter0 + U64(i * d + c))
                q[i, c] = (q[i, c] - drift * dt) + sig * z

    @njit(cache=True)
    def _pairwise_drift_nb(q, gprime_coeffs):
        n = q.size
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += _horner(gprime_coeffs, q[i] - q[j])
            out[i] = acc / n
        return out

    kinetic_1d = _kinetic_1d_nb
    overdamped_1d = _overdamped_1d_nb
    kinetic_nd = _kinetic_nd_nb
    overdamped_nd = _overdamped_nd_nb
    pairwise_drift = _pairwise_drift_nb
else:
    kinetic_1d = _kinetic_1d_np
    overdamped_1d = _overdamped_1d_np
    kinetic_nd = _kinetic_nd_np
    overdamped_nd = _overdamped_nd_np
    pairwise_drift = _pairwise_drift_np

# the numpy twins stay importable under either backend (benchmarks, tests)
numpy_kernels = {
    "kinetic_1d": _kinetic_1d_np,
    "overdamped_1d": _overdamped_1d_np,
    "kinetic_nd": _kinetic_nd_np,
    "overdamped_nd": _overdamped_nd_np,
    "pairwise_drift": _pairwise_drift_np,
}
