"""Numba kernels for the 3D particle lane and histogram deposits.

The Heun chunk advances every particle independently over a block of steps,
so results are bitwise identical for any thread count.  The random stream
is the same keyed-counter construction as :mod:`helidiff.rng`; both
implementations produce the same 64-bit words.

Operators and Hamiltonians are dispatched on small integer codes so the
whole run stays inside compiled code.  Codes must match OP_CODES/HAM_CODES
below.
"""

import math

import numpy as np
from numba import njit, prange

OP_CODES = {"uniform_z": 0, "grad_casimir": 1, "lambda_grad_casimir": 2,
            "beltrami": 3, "spiral": 4, "antisym": 5, "unit_norm": 6,
            "landau_lifshitz": 7, "euler_rigid_body": 8}
HAM_CODES = {"none": 0, "quadratic": 1, "rigid_body": 1, "cosine": 2}

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0
SLOTS_PER_STEP = np.uint64(16)


@njit(cache=True, inline="always")
def _mix64(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _MIX1
    z = z ^ (z >> np.uint64(27))
    z = z * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _word(seed, pid, counter):
    h = _mix64(seed + GOLDEN * (pid + np.uint64(1)))
    return _mix64(h + GOLDEN * (counter + np.uint64(1)))


@njit(cache=True, inline="always")
def normal_draw(seed, pid, step, slot):
    counter = step * SLOTS_PER_STEP + np.uint64(2) * slot
    a = _word(seed, pid, counter)
    b = _word(seed, pid, counter + np.uint64(1))
    u1 = (float(a >> np.uint64(11)) + 1.0) * _INV_2_53
    u2 = float(b >> np.uint64(11)) * _INV_2_53
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True, inline="always")
def op_eval(code, par, x, y, z):
    if code == 0:      # uniform_z
        return 0.0, 0.0, 1.0
    elif code == 1:    # grad_casimir
        return math.sin(x), math.sin(y), 1.0
    elif code == 2:    # lambda_grad_casimir
        lm = math.sqrt(1.0 + math.cos(x) ** 2)
        return lm * math.sin(x), lm * math.sin(y), lm
    elif code == 3:    # beltrami
        cz, sz = math.cos(z), math.sin(z)
        return cz + sz, cz - sz, 0.0
    elif code == 4:    # spiral
        return math.cos(z) - math.sin(y), -math.sin(z), math.cos(y)
    elif code == 5:    # antisym
        return 1.0, math.sin(x) + math.cos(y), math.cos(x)
    elif code == 6:    # unit_norm
        mu = 1.0 / math.sqrt(1.0 + math.cos(x) ** 2)
        return mu * math.cos(y), mu * math.cos(x), mu * math.sin(y)
    elif code == 7:    # landau_lifshitz: par = (gamma, sigma, c)
        u = 1.0 / (x * x + y * y + z * z)
        return (par[0] * par[2] + par[1] * z * y * u,
                par[1] * z * (par[2] - x) * u,
                par[0] * z - par[1] * par[2] * y * u)
    else:              # euler_rigid_body
        return x, y, z


@njit(cache=True, inline="always")
def ham_grad(code, par, x, y, z):
    if code == 0:
        return 0.0, 0.0, 0.0
    elif code == 1:    # quadratic: par = (a1,a2,a3,c1,c2,c3)
        return (par[0] * (x - par[3]), par[1] * (y - par[4]),
                par[2] * (z - par[5]))
    else:              # cosine: par = (a1,a2,a3)
        return -par[0] * math.sin(x), -par[1] * math.sin(y), -par[2] * math.sin(z)


@njit(cache=True, inline="always")
def _coeff(op, op_par, ham, ham_par, beta, d2_0, d2_1, d2_2, dt,
           x, y, z, nwx, nwy, nwz):
    """One evaluation of drift*dt + noise increment at (x, y, z).

    (nwx, nwy, nwz) is the coordinate-mapped Wiener increment; friction is
    -0.5*beta*(J R)(J R)^T gradH with diagonal R (squares d2_*)."""
    wx, wy, wz = op_eval(op, op_par, x, y, z)
    gx, gy, gz = ham_grad(ham, ham_par, x, y, z)
    # k = (w x g) dt + 0.5*beta*dt * w x (d2 o (w x g)) + w x nw
    cx = wy * gz - wz * gy
    cy = wz * gx - wx * gz
    cz = wx * gy - wy * gx
    fx = d2_0 * cx
    fy = d2_1 * cy
    fz = d2_2 * cz
    hb = 0.5 * beta * dt
    kx = cx * dt + hb * (wy * fz - wz * fy) + (wy * nwz - wz * nwy)
    ky = cy * dt + hb * (wz * fx - wx * fz) + (wz * nwx - wx * nwz)
    kz = cz * dt + hb * (wx * fy - wy * fx) + (wx * nwy - wy * nwx)
    return kx, ky, kz


@njit(cache=True, parallel=True)
def heun_chunk(pos, frozen, seed, step0, nsteps, op, op_par, ham, ham_par,
               beta, noise_scale, d2, dt, periodic, lo0, lo1, lo2, side,
               freeze_r2):
    """Advance every particle by nsteps stochastic Heun steps in place.

    noise_scale[r] = amplitude_r * d_r * sqrt(dt) folds the per-axis noise
    intensity and the diagonal coordinate map into the raw normal draws.
    The same increment drives predictor and corrector, which realizes the
    Stratonovich (alpha = 1/2) integral.
    """
    N = pos.shape[0]
    useed = np.uint64(seed)
    for p in prange(N):
        if frozen[p]:
            continue
        upid = np.uint64(p)
        x, y, z = pos[p, 0], pos[p, 1], pos[p, 2]
        ok = True
        for s in range(nsteps):
            ustep = np.uint64(step0 + s)
            nwx = noise_scale[0] * normal_draw(useed, upid, ustep, np.uint64(0))
            nwy = noise_scale[1] * normal_draw(useed, upid, ustep, np.uint64(1))
            nwz = noise_scale[2] * normal_draw(useed, upid, ustep, np.uint64(2))
            k1x, k1y, k1z = _coeff(op, op_par, ham, ham_par, beta,
                                   d2[0], d2[1], d2[2], dt, x, y, z,
                                   nwx, nwy, nwz)
            px, py, pz = x + k1x, y + k1y, z + k1z
            k2x, k2y, k2z = _coeff(op, op_par, ham, ham_par, beta,
                                   d2[0], d2[1], d2[2], dt, px, py, pz,
                                   nwx, nwy, nwz)
            nx = x + 0.5 * (k1x + k2x)
            ny = y + 0.5 * (k1y + k2y)
            nz = z + 0.5 * (k1z + k2z)
            if not (math.isfinite(nx) and math.isfinite(ny) and math.isfinite(nz)):
                ok = False
                break
            if freeze_r2 > 0.0 and nx * nx + ny * ny + nz * nz < freeze_r2:
                ok = False
                break
            x, y, z = nx, ny, nz
            if periodic:
                x = lo0 + (x - lo0) % side
                y = lo1 + (y - lo1) % side
                z = lo2 + (z - lo2) % side
        pos[p, 0], pos[p, 1], pos[p, 2] = x, y, z
        if not ok:
            frozen[p] = True


@njit(cache=True)
def deposit_cic(pos, lo, widths, shape0, shape1, shape2):
    """Cloud-in-cell deposit onto a periodic cell-centered grid.

    Serial on purpose: the accumulation order is then fixed, making the
    histogram independent of the thread count.  Returns raw weights.
    """
    grid = np.zeros((shape0, shape1, shape2))
    shapes = (shape0, shape1, shape2)
    for p in range(pos.shape[0]):
        idx0 = np.empty(3, dtype=np.int64)
        idx1 = np.empty(3, dtype=np.int64)
        w0 = np.empty(3)
        for a in range(3):
            s = (pos[p, a] - lo[a]) / widths[a] - 0.5
            base = math.floor(s)
            frac = s - base
            i0 = int(base) % shapes[a]
            if i0 < 0:
                i0 += shapes[a]
            idx0[a] = i0
            idx1[a] = (i0 + 1) % shapes[a]
            w0[a] = 1.0 - frac
        for a in range(2):
            ia = idx0[0] if a == 0 else idx1[0]
            wa = w0[0] if a == 0 else 1.0 - w0[0]
            for b in range(2):
                ib = idx0[1] if b == 0 else idx1[1]
                wb = w0[1] if b == 0 else 1.0 - w0[1]
                for c in range(2):
                    ic = idx0[2] if c == 0 else idx1[2]
                    wc = w0[2] if c == 0 else 1.0 - w0[2]
                    grid[ia, ib, ic] += wa * wb * wc
    return grid
