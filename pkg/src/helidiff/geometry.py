"""Geometric diagnostics of antisymmetric operators.

3D quantities (helicity, field force, field charge, curl decomposition) act
on the vector representation w; n-dimensional quantities (Jacobi residual,
cocurrent, field charge, closure test, measure-preserving extension) act on
the tensor representation.  All derivatives come from the operator's
analytic data when present and from central differences otherwise; second
derivatives always nest a central difference of step `NESTED_FD_STEP` on
top of whatever produces the first derivative.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation, NotApplicableError
from .operators import (NESTED_FD_STEP, OperatorField, VectorField3,
                        pair_index)


@dataclass
class VolumeWeight:
    """Density g of the volume form vol^n = g dx^1 ^ ... ^ dx^n."""

    g: Optional[Callable[[np.ndarray], float]] = None
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = 1e-4
    name: str = "unity"

    @property
    def is_unity(self):
        return self.g is None

    def __call__(self, x):
        if self.g is None:
            return 1.0
        v = float(self.g(np.asarray(x, dtype=float)))
        if abs(v) < 1e-12:
            raise ContractViolation("volume weight vanishes at sample point")
        return v

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.g is None:
            return np.zeros(x.size)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        h = self.fd_step
        out = np.empty(x.size)
        for j in range(x.size):
            xp = x.copy(); xp[j] += h
            xm = x.copy(); xm[j] -= h
            out[j] = (self.g(xp) - self.g(xm)) / (2.0 * h)
        return out


UNITY = VolumeWeight()


# ---------------------------------------------------------------------------
# 3D diagnostics
# ---------------------------------------------------------------------------

def curl(w: VectorField3, x):
    J = w.jacobian(x)
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def helicity_density(w: VectorField3, x):
    """h = w . (curl w); zero exactly when the Jacobi identity holds."""
    return float(np.dot(w(x), curl(w, x)))


def _unit_field(w: VectorField3):
    """Normalized field w/|w| with Jacobian by the quotient rule."""

    def ev(p):
        v = w(p)
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        return v / n

    def jac(x):
        v = w(x)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise ContractViolation("normalized field force needs |w| >= 1e-12")
        J = w.jacobian(x)
        return J / n - np.outer(v, v @ J) / n ** 3

    return VectorField3(ev, jac, fd_step=w.fd_step, name=w.name + "_hat")


def field_force(w: VectorField3, x, normalized=False):
    """b = w x (curl w); with normalized=True, b-hat of the unit field."""
    f = _unit_field(w) if normalized else w
    if normalized and np.linalg.norm(w(x)) < 1e-12:
        raise ContractViolation("normalized field force needs |w| >= 1e-12")
    return np.cross(f(x), curl(f, x))


def field_charge_3d(w: VectorField3, x, normalized=False, fd_step=NESTED_FD_STEP):
    """Field charge  B = 4 div[w x (curl w)]  by nested differentiation."""
    x = np.asarray(x, dtype=float)
    div = 0.0
    for j in range(3):
        xp = x.copy(); xp[j] += fd_step
        xm = x.copy(); xm[j] -= fd_step
        div += (field_force(w, xp, normalized)[j]
                - field_force(w, xm, normalized)[j]) / (2.0 * fd_step)
    return 4.0 * div


def curl_decomposition_residual(w: VectorField3, x):
    """| curl w - (b x w + h w)/w^2 |; a vector identity, ~0 for smooth w."""
    v = w(x)
    w2 = float(np.dot(v, v))
    if w2 < 1e-24:
        raise ContractViolation("curl decomposition needs |w| >= 1e-12")
    c = curl(w, x)
    b = np.cross(v, c)
    h = float(np.dot(v, c))
    return float(np.linalg.norm(c - (np.cross(b, v) + h * v) / w2))


# ---------------------------------------------------------------------------
# nD diagnostics
# ---------------------------------------------------------------------------

def _deriv_stack(J: OperatorField, x):
    """D[m, i, j] = dJ^{ij}/dx^m."""
    n = J.dim
    D = np.empty((n, n, n))
    for m in range(n):
        D[m] = J.deriv_matrix(x, m)
    return D


def jacobi_residual(J: OperatorField, x):
    """Max over i<j<k of |J^{im} d_m J^{jk} + J^{jm} d_m J^{ki} + J^{km} d_m J^{ij}|.

    In 3D the single independent component equals -h.
    """
    n = J.dim
    M = J.matrix(x)
    D = _deriv_stack(J, x)
    T = np.einsum("im,mjk->ijk", M, D)
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                worst = max(worst, abs(T[i, j, k] + T[j, k, i] + T[k, i, j]))
    return worst


def divergence_vector(J: OperatorField, x):
    """V_j = sum_i dJ^{ij}/dx^i (the g=1 cocurrent components)."""
    n = J.dim
    V = np.zeros(n)
    for i in range(n):
        V += J.deriv_matrix(x, i)[i, :]
    return V


def cocurrent_residual(J: OperatorField, g: VolumeWeight, x):
    """Components c_j = sum_i d(g J^{ij})/dx^i of the cocurrent n-1 form.

    All components vanish iff vol^n = g dx^1^...^dx^n is an invariant
    measure for every Hamiltonian.
    """
    x = np.asarray(x, dtype=float)
    if g.is_unity:
        return divergence_vector(J, x)
    if J.has_analytic_deriv or g.grad is not None:
        # product rule on g * J
        gx = g(x)
        dg = g.gradient(x)
        M = J.matrix(x)
        V = np.zeros(J.dim)
        for i in range(J.dim):
            V += dg[i] * M[i, :] + gx * J.deriv_matrix(x, i)[i, :]
        return V
    h = max(J.fd_step, g.fd_step)
    n = J.dim
    V = np.zeros(n)
    for i in range(n):
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        V += (g(xp) * J.matrix(xp)[i, :] - g(xm) * J.matrix(xm)[i, :]) / (2.0 * h)
    return V


def field_force_vector_nd(J: OperatorField, g: VolumeWeight, x):
    """b^i = g J^{ik} d_l(g J^{lk}), the Hodge dual of the field force form."""
    gx = g(x) if not g.is_unity else 1.0
    return gx * (J.matrix(x) @ cocurrent_residual(J, g, x))


def field_charge_nd(J: OperatorField, g: VolumeWeight, x, fd_step=NESTED_FD_STEP):
    """B = 4 d_i ( g J^{ij} d_l(g J^{lj}) );  reduces to field_charge_3d
    for n = 3 and g = 1."""
    x = np.asarray(x, dtype=float)
    div = 0.0
    for i in range(J.dim):
        xp = x.copy(); xp[i] += fd_step
        xm = x.copy(); xm[i] -= fd_step
        div += (field_force_vector_nd(J, g, xp)[i]
                - field_force_vector_nd(J, g, xm)[i]) / (2.0 * fd_step)
    return 4.0 * div


def closure_test(J: OperatorField, x, fd_step=NESTED_FD_STEP):
    """Exactness residual of the 1-form A_k = omega^{km} d_l J^{lm}.

    Returns max_{k<n} |d_n A_k - d_k A_n|.  Zero on a star-shaped domain
    iff some metric g (with A = d log g) makes the invertible operator J
    measure preserving.
    """
    n = J.dim
    if n % 2 != 0:
        raise NotApplicableError("closure test requires even dimension")

    def aform(y):
        M = J.matrix(y)
        det = np.linalg.det(M)
        if abs(det) < 1e-10:
            raise NotApplicableError("closure test requires invertible J")
        return np.linalg.inv(M) @ divergence_vector(J, y)

    x = np.asarray(x, dtype=float)
    dA = np.empty((n, n))
    for m in range(n):
        xp = x.copy(); xp[m] += fd_step
        xm = x.copy(); xm[m] -= fd_step
        dA[m] = (aform(xp) - aform(xm)) / (2.0 * fd_step)
    worst = 0.0
    for k in range(n):
        for m in range(k + 1, n):
            worst = max(worst, abs(dA[m, k] - dA[k, m]))
    return worst


def extend_to_measure_preserving(J: OperatorField, fd_step=NESTED_FD_STEP):
    """Extension  Jext = J + x^{n+1} (d_i J^{ij}) d_j ^ d_{n+1}.

    The returned (n+1)-dimensional operator has vanishing cocurrent on
    g = 1, and its first n rows reproduce J's dynamics exactly for any
    Hamiltonian independent of the new coordinate.
    """
    n = J.dim
    old_pos = {pair: k for k, pair in enumerate(pair_index(n))}
    new_pairs = pair_index(n + 1)

    def scatter(old_vals, new_col):
        """Order values by the canonical pair index of dimension n+1."""
        e = np.empty(len(new_pairs))
        for k, (i, j) in enumerate(new_pairs):
            e[k] = new_col[i] if j == n else old_vals[old_pos[(i, j)]]
        return e

    def entries(x):
        base = x[:n]
        return scatter(J.entries(base), x[n] * divergence_vector(J, base))

    def deriv_entries(x, m):
        base = x[:n]
        if m < n:
            bp = base.copy(); bp[m] += fd_step
            bm = base.copy(); bm[m] -= fd_step
            dV = (divergence_vector(J, bp) - divergence_vector(J, bm)) / (2.0 * fd_step)
            return scatter(J.entry_derivs(base, m), x[n] * dV)
        return scatter(np.zeros(len(old_pos)), divergence_vector(J, base))

    return OperatorField(n + 1, entries, deriv_entries, fd_step=J.fd_step,
                         name=J.name + "_extended")
