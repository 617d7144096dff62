"""Periodic cell-centered density grids.

A DensityGrid holds a probability density f on a periodic cube; cells are
centered, so cell i along an axis of width h sits at lo + (i + 1/2) h.
Quadrature is the midpoint rule, consistent with the solver's centered
differences.  Binary artifacts are row-major little-endian float64 with a
JSON sidecar carrying shape, box and time.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation


@dataclass
class DensityGrid:
    shape: tuple
    center: tuple = (0.0, 0.0, 0.0)
    side: float = 2.0 * np.pi
    values: np.ndarray = None
    time: float = 0.0

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        if len(self.shape) != 3:
            raise ContractViolation("DensityGrid is three-dimensional")
        if self.values is None:
            self.values = np.zeros(self.shape)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.shape:
            raise ContractViolation("values do not match grid shape")

    # -- geometry -----------------------------------------------------------

    @property
    def widths(self):
        return np.array([self.side / s for s in self.shape])

    @property
    def cell_volume(self):
        return float(np.prod(self.widths))

    @property
    def lo(self):
        return np.asarray(self.center, dtype=float) - 0.5 * self.side

    def axes(self):
        """Cell-center coordinates along each axis."""
        lo = self.lo
        return [lo[a] + (np.arange(self.shape[a]) + 0.5) * self.widths[a]
                for a in range(3)]

    def meshgrid(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def sample_field(self, field3):
        """Evaluate a VectorField3 at all cell centers: three (Nx,Ny,Nz) arrays."""
        X, Y, Z = self.meshgrid()
        pts = np.stack([X, Y, Z], axis=-1)
        W = field3(pts)
        return W[..., 0], W[..., 1], W[..., 2]

    def sample_scalar(self, fn):
        X, Y, Z = self.meshgrid()
        pts = np.stack([X, Y, Z], axis=-1)
        return np.asarray(fn(pts), dtype=float)

    # -- mass and calculus ---------------------------------------------------

    def mass(self):
        return float(self.values.sum() * self.cell_volume)

    def normalize(self):
        m = self.mass()
        if m <= 0:
            raise ContractViolation("cannot normalize a grid with no mass")
        self.values /= m
        return self

    def gradient(self):
        """Periodic central-difference gradient, one array per axis."""
        f = self.values
        return [(np.roll(f, -1, axis=a) - np.roll(f, 1, axis=a)) / (2.0 * self.widths[a])
                for a in range(3)]

    def copy(self, values=None, time=None):
        new_values = self.values.copy() if values is None \
            else np.array(values, dtype=float)
        return DensityGrid(self.shape, self.center, self.side, new_values,
                           self.time if time is None else time)

    def coarsen(self, target_shape):
        """Block-average down to target_shape (must divide evenly).

        Averaging densities preserves total mass exactly.
        """
        t = tuple(int(s) for s in target_shape)
        for a in range(3):
            if self.shape[a] % t[a] != 0:
                raise ContractViolation(
                    f"coarsening {self.shape} -> {t} is not block-aligned")
        fx, fy, fz = (self.shape[a] // t[a] for a in range(3))
        v = self.values.reshape(t[0], fx, t[1], fy, t[2], fz).mean(axis=(1, 3, 5))
        return DensityGrid(t, self.center, self.side, v, self.time)

    # -- IO -------------------------------------------------------------------

    def save(self, path):
        """Flat little-endian float64 binary plus a JSON sidecar."""
        path = Path(path)
        self.values.astype("<f8").tofile(path)
        sidecar = {"shape": list(self.shape), "box": {"center": list(self.center),
                   "side": self.side}, "time": self.time}
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=2))
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        shape = tuple(meta["shape"])
        values = np.fromfile(path, dtype="<f8").reshape(shape)
        return cls(shape, tuple(meta["box"]["center"]), meta["box"]["side"],
                   values, meta.get("time", 0.0))

    def save_slice_csv(self, path, z=0.0):
        """CSV of the plane nearest to z = const: columns x, y, f."""
        zi = int(np.argmin(np.abs(self.axes()[2] - z)))
        xs, ys = self.axes()[0], self.axes()[1]
        with open(path, "w") as fh:
            fh.write("x,y,f\n")
            for i, xv in enumerate(xs):
                for j, yv in enumerate(ys):
                    fh.write(f"{float(xv)!r},{float(yv)!r},"
                             f"{float(self.values[i, j, zi])!r}\n")
        return Path(path)


def flat_grid(shape, center=(0.0, 0.0, 0.0), side=2.0 * np.pi):
    g = DensityGrid(shape, center, side)
    g.values[:] = 1.0
    return g.normalize()


def random_positive_grid(shape, seed, amplitude=0.2, kmax=4,
                         center=(0.0, 0.0, 0.0), side=2.0 * np.pi):
    """Flat density with a seeded smooth random perturbation.

    The perturbation is synthesized from Fourier modes with |k_a| <= kmax.
    Band-limiting matters: the wide centered-difference stencil leaves
    grid-Nyquist components undamped, so a per-cell white init would never
    relax to the flat H-theorem equilibrium.
    """
    r = np.random.default_rng(seed)
    g = DensityGrid(shape, center, side)
    X, Y, Z = g.meshgrid()
    base = 2.0 * np.pi / side
    pert = np.zeros(g.shape)
    for _ in range(12):
        k = r.integers(-kmax, kmax + 1, size=3)
        if not np.any(k):
            continue
        phase = r.uniform(0.0, 2.0 * np.pi)
        pert += r.normal() * np.cos(base * (k[0] * X + k[1] * Y + k[2] * Z) + phase)
    pert *= amplitude / max(np.max(np.abs(pert)), 1e-12)
    g.values = 1.0 + pert
    return g.normalize()
