"""Counter-based random streams for reproducible parallel simulation.

Every noise draw is a pure function of (seed, counter), where the counter
encodes (step, particle, component).  There is no sequential state, so the
same configuration produces the same numbers regardless of execution order or
thread count.  The generator is the splitmix64 finalizer applied to an
affinely strided counter; normals come from a Box-Muller pair.

The numba kernels inline exactly this arithmetic (same constants, same
operation order); this module is the vectorized reference used by the
pure-numpy backend and by tests.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64
GOLDEN = U64(0x9E3779B97F4A7C15)
MIX_A = U64(0xBF58476D1CE4E5B9)
MIX_B = U64(0x94D049BB133111EB)
_SHIFT_30 = U64(30)
_SHIFT_27 = U64(27)
_SHIFT_31 = U64(31)
_SHIFT_11 = U64(11)
_ONE = U64(1)
_TWO = U64(2)
TWO_NEG53 = 0.5 ** 53
TWO_PI = 2.0 * np.pi


def derive_key(seed: int) -> np.uint64:
    """Spread a user seed over the full 64-bit key space."""
    z = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=U64)
    z = z + GOLDEN
    z = (z ^ (z >> _SHIFT_30)) * MIX_A
    z = (z ^ (z >> _SHIFT_27)) * MIX_B
    z = z ^ (z >> _SHIFT_31)
    return U64(z[0])


def counter_values(key: np.uint64, counters: np.ndarray) -> np.ndarray:
    """64-bit outputs for an array of counters."""
    z = key + counters.astype(U64) * GOLDEN
    z = (z ^ (z >> _SHIFT_30)) * MIX_A
    z = (z ^ (z >> _SHIFT_27)) * MIX_B
    return z ^ (z >> _SHIFT_31)


def normals(key: np.uint64, base_counters: np.ndarray) -> np.ndarray:
    """One standard normal per base counter (counters 2c and 2c+1 are used).

    u1 lives in (0, 1] so the logarithm is always finite.
    """
    base = base_counters.astype(U64)
    a = counter_values(key, base * _TWO)
    b = counter_values(key, base * _TWO + _ONE)
    u1 = ((a >> _SHIFT_11) + _ONE) * TWO_NEG53
    u2 = (b >> _SHIFT_11) * TWO_NEG53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


def step_counters(step: int, n_particles: int, dimension: int) -> np.ndarray:
    """Base counters of every (particle, component) draw of one step."""
    start = U64(step) * U64(n_particles) * U64(dimension)
    idx = np.arange(n_particles * dimension, dtype=U64)
    return start + idx
