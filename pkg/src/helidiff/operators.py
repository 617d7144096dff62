"""Antisymmetric operator fields, Hamiltonians and the scenario catalog.

An antisymmetric operator maps an energy gradient to a velocity,
``v^i = J^{ij} dH_j``.  In three dimensions the operator is equivalently a
vector field w with ``v = w x grad(H)``; the component assignment between
the two representations is

    J^{zy} = w_x,   J^{xz} = w_y,   J^{yx} = w_z,

i.e. J is the usual cross-product matrix of w.  Antisymmetry is enforced
structurally: only the strict upper triangle is ever stored or produced,
and full matrices are assembled as U - U^T.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, ContractViolation

DEFAULT_FD_STEP = 1e-4
# second derivatives (field charge, extension columns) use a coarser step
NESTED_FD_STEP = 1e-3


def pair_index(n):
    """Ordered strict upper-triangle pairs (i, j), i < j, for dimension n."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def assemble_antisymmetric(n, entries):
    """Full antisymmetric matrix from strict upper-triangle entries."""
    m = np.zeros((n, n))
    for (i, j), v in zip(pair_index(n), entries):
        m[i, j] = v
        m[j, i] = -v
    return m


@dataclass
class OperatorField:
    """Antisymmetric tensor field J^{ij}(x) of dimension n.

    entries(x) returns the strict upper-triangle components in pair order;
    deriv_entries(x, m), when given, returns d(entries)/dx^m.  Missing
    derivatives fall back to central differences of `entries` with step
    `fd_step`, which keeps antisymmetry of the derivative exact as well.
    """

    dim: int
    entries: Callable[[np.ndarray], np.ndarray]
    deriv_entries: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    fd_step: float = DEFAULT_FD_STEP
    name: str = ""

    def matrix(self, x):
        return assemble_antisymmetric(self.dim, self.entries(np.asarray(x, dtype=float)))

    def entry_derivs(self, x, m):
        x = np.asarray(x, dtype=float)
        if self.deriv_entries is not None:
            return np.asarray(self.deriv_entries(x, m), dtype=float)
        h = self.fd_step
        xp = x.copy(); xp[m] += h
        xm = x.copy(); xm[m] -= h
        return (np.asarray(self.entries(xp)) - np.asarray(self.entries(xm))) / (2.0 * h)

    def deriv_matrix(self, x, m):
        """dJ/dx^m as a full antisymmetric matrix."""
        return assemble_antisymmetric(self.dim, self.entry_derivs(x, m))

    @property
    def has_analytic_deriv(self):
        return self.deriv_entries is not None


def operator_apply(J: OperatorField, x, theta):
    """v^i = J^{ij}(x) theta_j; in 3D this equals w x theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (J.dim,):
        raise ContractViolation(
            f"covector has dimension {theta.shape}, operator has dim {J.dim}")
    return J.matrix(x) @ theta


@dataclass
class VectorField3:
    """3D vector-field representation w(x) of an antisymmetric operator.

    jac(x), when given, is the 3x3 Jacobian with jac[i, j] = dw_i/dx_j.
    Evaluation broadcasts: points of shape (..., 3) give w of shape (..., 3).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = DEFAULT_FD_STEP
    name: str = ""
    params: dict = field(default_factory=dict)
    # registered integrability witnesses, when the operator has them
    casimir: Optional[Callable] = None
    casimir_grad: Optional[Callable] = None
    lam: Optional[Callable] = None
    # domain restriction: points with |x| < exclude_radius are outside
    exclude_radius: float = 0.0

    def __call__(self, points):
        return np.asarray(self.eval(np.asarray(points, dtype=float)), dtype=float)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        h = self.fd_step
        out = np.empty((3, 3))
        for j in range(3):
            xp = x.copy(); xp[j] += h
            xm = x.copy(); xm[j] -= h
            out[:, j] = (self(xp) - self(xm)) / (2.0 * h)
        return out

    @property
    def has_analytic_deriv(self):
        return self.jac is not None

    def to_operator(self):
        """OperatorField with J^{zy}=w_x, J^{xz}=w_y, J^{yx}=w_z."""
        fd = self.fd_step

        def entries(x):
            w = self(x)
            # pair order (0,1), (0,2), (1,2)
            return np.array([-w[2], w[1], -w[0]])

        deriv_entries = None
        if self.jac is not None:
            def deriv_entries(x, m):
                dw = self.jacobian(x)[:, m]
                return np.array([-dw[2], dw[1], -dw[0]])

        return OperatorField(3, entries, deriv_entries, fd_step=fd, name=self.name)


def vector_field_from_operator(J: OperatorField):
    """Inverse of VectorField3.to_operator; exact (bitwise) round trip."""
    if J.dim != 3:
        raise ContractViolation("vector representation requires dim 3")

    def ev(points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            e = J.entries(pts)
            return np.array([-e[2], e[1], -e[0]])
        flat = pts.reshape(-1, 3)
        out = np.empty_like(flat)
        for k, p in enumerate(flat):
            e = J.entries(p)
            out[k] = (-e[2], e[1], -e[0])
        return out.reshape(pts.shape)

    jac = None
    if J.deriv_entries is not None:
        def jac(x):
            out = np.empty((3, 3))
            for m in range(3):
                de = J.entry_derivs(x, m)
                out[:, m] = (-de[2], de[1], -de[0])
            return out

    return VectorField3(ev, jac, fd_step=J.fd_step, name=J.name)


@dataclass
class Hamiltonian:
    """Energy function H0(x) with optional analytic gradient."""

    eval: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = DEFAULT_FD_STEP
    name: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, points):
        return np.asarray(self.eval(np.asarray(points, dtype=float)), dtype=float)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        h = self.fd_step
        n = x.size
        out = np.empty(n)
        for j in range(n):
            xp = x.copy(); xp[j] += h
            xm = x.copy(); xm[j] -= h
            out[j] = (self.eval(xp) - self.eval(xm)) / (2.0 * h)
        return out


@dataclass
class CoordinateMap:
    """Diffeomorphism x -> y entering the noise term through R^k_r = dy^k/dx^r.

    jacobian(x) returns R with R[k, r] = dy^k/dx^r.  The identity flag short
    circuits to R = I exactly.
    """

    dim: int
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    identity: bool = True
    diagonal: Optional[np.ndarray] = None

    @classmethod
    def identity_map(cls, dim):
        return cls(dim=dim, identity=True)

    @classmethod
    def diagonal_map(cls, scale):
        scale = np.asarray(scale, dtype=float)
        if np.any(np.abs(scale) < 1e-12):
            raise ConfigurationError("coordinate map must be invertible")
        return cls(dim=scale.size, identity=False, diagonal=scale)

    def jacobian(self, x):
        if self.identity:
            return np.eye(self.dim)
        if self.diagonal is not None:
            return np.diag(self.diagonal)
        R = np.asarray(self.jacobian_fn(np.asarray(x, dtype=float)), dtype=float)
        if abs(np.linalg.det(R)) <= 1e-12:
            raise ContractViolation("coordinate map jacobian is singular")
        return R


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _uniform_z():
    def ev(p):
        p = np.asarray(p, dtype=float)
        w = np.zeros_like(p)
        w[..., 2] = 1.0
        return w

    def jac(x):
        return np.zeros((3, 3))

    return VectorField3(
        ev, jac, name="uniform_z",
        casimir=lambda p: np.asarray(p)[..., 2],
        casimir_grad=lambda x: np.array([0.0, 0.0, 1.0]),
        lam=lambda p: np.ones(np.shape(np.asarray(p)[..., 0])),
    )


def _casimir_zcc(p):
    # C = z - cos x - cos y, shared by the two Poisson catalog operators
    p = np.asarray(p, dtype=float)
    return p[..., 2] - np.cos(p[..., 0]) - np.cos(p[..., 1])


def _casimir_zcc_grad(x):
    return np.array([np.sin(x[0]), np.sin(x[1]), 1.0])


def _grad_casimir():
    def ev(p):
        p = np.asarray(p, dtype=float)
        return np.stack([np.sin(p[..., 0]), np.sin(p[..., 1]),
                         np.ones_like(p[..., 0])], axis=-1)

    def jac(x):
        return np.array([[np.cos(x[0]), 0.0, 0.0],
                         [0.0, np.cos(x[1]), 0.0],
                         [0.0, 0.0, 0.0]])

    return VectorField3(
        ev, jac, name="grad_casimir",
        casimir=_casimir_zcc, casimir_grad=_casimir_zcc_grad,
        lam=lambda p: np.ones(np.shape(np.asarray(p)[..., 0])),
    )


def _lambda_grad_casimir():
    def lam(p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(1.0 + np.cos(p[..., 0]) ** 2)

    def ev(p):
        p = np.asarray(p, dtype=float)
        lm = lam(p)
        return np.stack([lm * np.sin(p[..., 0]), lm * np.sin(p[..., 1]), lm],
                        axis=-1)

    def jac(x):
        lm = np.sqrt(1.0 + np.cos(x[0]) ** 2)
        dlm = -np.sin(x[0]) * np.cos(x[0]) / lm
        return np.array([
            [dlm * np.sin(x[0]) + lm * np.cos(x[0]), 0.0, 0.0],
            [dlm * np.sin(x[1]), lm * np.cos(x[1]), 0.0],
            [dlm, 0.0, 0.0],
        ])

    return VectorField3(ev, jac, name="lambda_grad_casimir",
                        casimir=_casimir_zcc, casimir_grad=_casimir_zcc_grad,
                        lam=lam)


def _beltrami():
    def ev(p):
        p = np.asarray(p, dtype=float)
        z = p[..., 2]
        return np.stack([np.cos(z) + np.sin(z), np.cos(z) - np.sin(z),
                         np.zeros_like(z)], axis=-1)

    def jac(x):
        z = x[2]
        return np.array([[0.0, 0.0, -np.sin(z) + np.cos(z)],
                         [0.0, 0.0, -np.sin(z) - np.cos(z)],
                         [0.0, 0.0, 0.0]])

    return VectorField3(ev, jac, name="beltrami")


def _spiral():
    def ev(p):
        p = np.asarray(p, dtype=float)
        y, z = p[..., 1], p[..., 2]
        return np.stack([np.cos(z) - np.sin(y), -np.sin(z), np.cos(y)], axis=-1)

    def jac(x):
        y, z = x[1], x[2]
        return np.array([[0.0, -np.cos(y), -np.sin(z)],
                         [0.0, 0.0, -np.cos(z)],
                         [0.0, -np.sin(y), 0.0]])

    return VectorField3(ev, jac, name="spiral")


def _antisym():
    def ev(p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.stack([np.ones_like(x), np.sin(x) + np.cos(y), np.cos(x)],
                        axis=-1)

    def jac(x):
        return np.array([[0.0, 0.0, 0.0],
                         [np.cos(x[0]), -np.sin(x[1]), 0.0],
                         [-np.sin(x[0]), 0.0, 0.0]])

    return VectorField3(ev, jac, name="antisym")


def _unit_norm():
    def ev(p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        mu = 1.0 / np.sqrt(1.0 + np.cos(x) ** 2)
        return np.stack([mu * np.cos(y), mu * np.cos(x), mu * np.sin(y)],
                        axis=-1)

    def jac(x):
        cx, sx = np.cos(x[0]), np.sin(x[0])
        cy, sy = np.cos(x[1]), np.sin(x[1])
        mu = 1.0 / np.sqrt(1.0 + cx * cx)
        dmu = sx * cx * mu ** 3
        return np.array([[dmu * cy, -mu * sy, 0.0],
                         [dmu * cx - mu * sx, 0.0, 0.0],
                         [dmu * sy, mu * cy, 0.0]])

    return VectorField3(ev, jac, name="unit_norm")


def _euler_rigid_body():
    def ev(p):
        return np.asarray(p, dtype=float).copy()

    def jac(x):
        return np.eye(3)

    return VectorField3(
        ev, jac, name="euler_rigid_body",
        casimir=lambda p: 0.5 * np.sum(np.asarray(p, dtype=float) ** 2, axis=-1),
        casimir_grad=lambda x: np.asarray(x, dtype=float).copy(),
        lam=lambda p: np.ones(np.shape(np.asarray(p)[..., 0])),
    )


def _landau_lifshitz(gamma=1.0, sigma=0.5, c=0.5, exclude_radius=1e-3):
    # w = gamma*Hf - (sigma/|x|^2) Hf x X with effective field Hf = (c, 0, z);
    # the division by |x|^2 excludes a ball around the origin from the domain.
    def ev(p):
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        u = 1.0 / (x * x + y * y + z * z)
        return np.stack([gamma * c + sigma * z * y * u,
                         sigma * z * (c - x) * u,
                         gamma * z - sigma * c * y * u], axis=-1)

    def jac(p):
        x, y, z = p
        u = 1.0 / (x * x + y * y + z * z)
        u2 = u * u
        return np.array([
            [-2.0 * sigma * z * y * x * u2,
             sigma * z * (u - 2.0 * y * y * u2),
             sigma * y * (u - 2.0 * z * z * u2)],
            [-sigma * z * (u + 2.0 * x * (c - x) * u2),
             -2.0 * sigma * y * z * (c - x) * u2,
             sigma * (c - x) * (u - 2.0 * z * z * u2)],
            [2.0 * sigma * c * x * y * u2,
             -sigma * c * (u - 2.0 * y * y * u2),
             gamma + 2.0 * sigma * c * y * z * u2],
        ])

    return VectorField3(ev, jac, name="landau_lifshitz",
                        params={"gamma": gamma, "sigma": sigma, "c": c},
                        exclude_radius=exclude_radius)


def symplectic_operator(m):
    """Canonical constant operator on 2m dimensions: J_c = sum_i d_{m+i} ^ d_i."""
    n = 2 * m
    pairs = pair_index(n)
    vals = np.zeros(len(pairs))
    for k, (i, j) in enumerate(pairs):
        # component (m+i, i) = +1, hence upper-triangle (i, m+i) = -1
        if j == i + m:
            vals[k] = -1.0

    def entries(x):
        return vals.copy()

    def deriv_entries(x, mm):
        return np.zeros(len(pairs))

    return OperatorField(n, entries, deriv_entries, name=f"symplectic({m})")


_CATALOG = {
    "uniform_z": _uniform_z,
    "grad_casimir": _grad_casimir,
    "lambda_grad_casimir": _lambda_grad_casimir,
    "beltrami": _beltrami,
    "spiral": _spiral,
    "antisym": _antisym,
    "unit_norm": _unit_norm,
    "landau_lifshitz": _landau_lifshitz,
    "euler_rigid_body": _euler_rigid_body,
    "symplectic": symplectic_operator,
}

CATALOG_3D = ("uniform_z", "grad_casimir", "lambda_grad_casimir", "beltrami",
              "spiral", "antisym", "unit_norm", "landau_lifshitz",
              "euler_rigid_body")


def catalog_operator(name, **params):
    """Look up a catalog operator by scenario identifier.

    3D operators are returned as VectorField3 with analytic Jacobians;
    `symplectic` requires the block count m and returns an OperatorField.
    """
    if name not in _CATALOG:
        raise ConfigurationError(
            f"unknown operator {name!r}; valid names: {', '.join(sorted(_CATALOG))}")
    if name == "symplectic":
        if "m" not in params:
            raise ConfigurationError("symplectic operator requires parameter m")
        return symplectic_operator(int(params["m"]))
    return _CATALOG[name](**params)


# ---------------------------------------------------------------------------
# Hamiltonian catalog
# ---------------------------------------------------------------------------

def quadratic_hamiltonian(weights, center=None, dim=3):
    """H = 1/2 sum_i a_i (x_i - c_i)^2.  Covers the rigid-body energy
    (a = 1/I) and the magnetization energy |x|^2/2."""
    a = np.asarray(weights, dtype=float)
    c = np.zeros(a.size) if center is None else np.asarray(center, dtype=float)

    def ev(p):
        p = np.asarray(p, dtype=float)
        return 0.5 * np.sum(a * (p - c) ** 2, axis=-1)

    def grad(x):
        return a * (np.asarray(x, dtype=float) - c)

    return Hamiltonian(ev, grad, name="quadratic",
                       params={"weights": list(a), "center": list(c)})


def rigid_body_hamiltonian(inertia=(1.0, 2.0, 3.0)):
    inv = [1.0 / i for i in inertia]
    h = quadratic_hamiltonian(inv)
    h.name = "rigid_body"
    h.params = {"inertia": list(inertia)}
    return h


def cosine_hamiltonian(amps=(1.0, 1.0, 1.0)):
    """H = sum_i a_i cos(x_i); periodic, for closed-box Fokker-Planck runs."""
    a = np.asarray(amps, dtype=float)

    def ev(p):
        p = np.asarray(p, dtype=float)
        return np.sum(a * np.cos(p), axis=-1)

    def grad(x):
        return -a * np.sin(np.asarray(x, dtype=float))

    return Hamiltonian(ev, grad, name="cosine", params={"amps": list(a)})


def catalog_hamiltonian(kind, **params):
    if kind in (None, "none"):
        return None
    if kind == "quadratic":
        return quadratic_hamiltonian(params.get("weights", (1.0, 1.0, 1.0)),
                                     params.get("center"))
    if kind == "rigid_body":
        return rigid_body_hamiltonian(tuple(params.get("inertia", (1.0, 2.0, 3.0))))
    if kind == "cosine":
        return cosine_hamiltonian(tuple(params.get("amps", (1.0, 1.0, 1.0))))
    raise ConfigurationError(f"unknown hamiltonian kind {kind!r}")
