"""Counter-based random streams for reproducible stochastic dynamics.

Every stochastic event in a run draws from a splitmix64 stream keyed by
(seed, ion index, step index, channel).  Results therefore do not depend on
evaluation order or thread count, and a run can be resumed mid-stream by
restarting at the saved step index.
"""

import math

import numpy as np
from numba import njit

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True)
def stream_key(seed, a, b, c):
    """Derive an independent stream state from a seed and three indices."""
    h = _mix(U64(seed) + _GOLDEN)
    h = _mix(h ^ (U64(a) * U64(0xD1B54A32D192ED03) + _GOLDEN))
    h = _mix(h ^ (U64(b) * U64(0x8CB92BA72F3D8DD7) + _GOLDEN))
    h = _mix(h ^ (U64(c) * U64(0xA24BAED4963EE407) + _GOLDEN))
    return h


@njit(cache=True)
def next_uniform(state):
    """Advance the stream; return (state, u) with u uniform in [0, 1)."""
    state = state + _GOLDEN
    return state, (_mix(state) >> U64(11)) * _INV53


@njit(cache=True)
def next_gaussian_pair(state):
    """Advance the stream; return (state, g1, g2), independent standard normals."""
    state, u1 = next_uniform(state)
    state, u2 = next_uniform(state)
    r = math.sqrt(-2.0 * math.log(1.0 - u1))  # 1-u1 in (0,1], log finite
    phi = 2.0 * math.pi * u2
    return state, r * math.cos(phi), r * math.sin(phi)


@njit(cache=True)
def next_unit_vector(state):
    """Advance the stream; return (state, x, y, z) uniform on the unit sphere."""
    state, u1 = next_uniform(state)
    state, u2 = next_uniform(state)
    z = 2.0 * u1 - 1.0
    rho = math.sqrt(max(0.0, 1.0 - z * z))
    phi = 2.0 * math.pi * u2
    return state, rho * math.cos(phi), rho * math.sin(phi), z


@njit(cache=True)
def next_poisson(state, mean):
    """Advance the stream; return (state, k) with k ~ Poisson(mean).

    Knuth's product-of-uniforms method for small means, Hormann's PTRS
    transformed rejection for large means.
    """
    if mean <= 0.0:
        return state, 0
    if mean < 30.0:
        limit = math.exp(-mean)
        k = 0
        p = 1.0
        while True:
            state, u = next_uniform(state)
            p *= u
            if p <= limit:
                return state, k
            k += 1
    # PTRS (W. Hormann, 1993)
    b = 0.931 + 2.53 * math.sqrt(mean)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mean = math.log(mean)
    while True:
        state, u = next_uniform(state)
        u -= 0.5
        state, v = next_uniform(state)
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + mean + 0.43))
        if us >= 0.07 and v <= v_r:
            return state, k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v * inv_alpha / (a / (us * us) + b))
                <= k * log_mean - mean - math.lgamma(k + 1.0)):
            return state, k


def spawn_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit stream seed from a numpy Generator."""
    return int(rng.integers(0, 2**63 - 1))
