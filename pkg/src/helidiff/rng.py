"""Counter-based random streams for particle ensembles.

Every random number is a pure function of (seed, particle, step, slot), so
trajectories are reproducible regardless of how particles are distributed
over threads, and the extension of an n-dimensional run to n+1 dimensions
leaves the draws of the shared slots untouched.

The generator is the splitmix64 output function applied to a keyed counter.
Two 64-bit words feed a Box-Muller transform for normal variates.  The same
bit-level construction is implemented twice: vectorised over numpy arrays
here, and as scalar @njit helpers in :mod:`helidiff.kernels`.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# counter layout: per (particle, step) there are up to 8 addressable slots,
# each consuming two 64-bit words (Box-Muller needs a pair).
SLOTS_PER_STEP = 16
# reserved step index for initial-condition draws, far above any real step
INIT_STEP = 1 << 48
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53

_U64 = np.uint64


def mix64(z):
    """splitmix64 finalizer; z is uint64 scalar or array."""
    z = _U64(z) if np.isscalar(z) else z.astype(np.uint64, copy=True)
    z ^= z >> _U64(30)
    z *= _MIX1
    z ^= z >> _U64(27)
    z *= _MIX2
    z ^= z >> _U64(31)
    return z


def _words(seed, pid, counter):
    """One mixed 64-bit word per (seed, particle, counter)."""
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        h = mix64(_U64(seed) + GOLDEN * (np.asarray(pid, dtype=np.uint64) + _U64(1)))
        return mix64(h + GOLDEN * (np.asarray(counter, dtype=np.uint64) + _U64(1)))


def uniforms(seed, pid, step, slot):
    """U[0,1) draws addressed by (seed, particle, step, slot).

    `pid` may be an array; `step` and `slot` broadcast against it.
    """
    counter = (np.asarray(step, dtype=np.uint64) * _U64(SLOTS_PER_STEP)
               + np.asarray(slot, dtype=np.uint64))
    return (_words(seed, pid, counter) >> _U64(11)).astype(np.float64) * _INV_2_53


def normals(seed, pid, step, slot):
    """Standard-normal draws addressed by (seed, particle, step, slot).

    Box-Muller over two counter words; slot indices 0..7 are independent.
    """
    counter = (np.asarray(step, dtype=np.uint64) * _U64(SLOTS_PER_STEP)
               + _U64(2) * np.asarray(slot, dtype=np.uint64))
    a = _words(seed, pid, counter)
    b = _words(seed, pid, counter + _U64(1))
    # u1 in (0,1] so the log is finite
    u1 = ((a >> _U64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (b >> _U64(11)).astype(np.float64) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def normal_matrix(seed, pids, step, nslots):
    """(len(pids), nslots) matrix of normals for one time step."""
    pids = np.asarray(pids, dtype=np.uint64)
    out = np.empty((pids.size, nslots))
    for r in range(nslots):
        out[:, r] = normals(seed, pids, step, r)
    return out
