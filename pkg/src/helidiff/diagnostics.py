"""Density estimation, entropy functionals and density comparisons.

The entropy family mirrors the H-theorems: S for measure-preserving
coordinates, Sigma_lambda for Poisson operators on the invariant measure
lambda^{-1} dV, Sigma_zeta for the scalar-potential field-force case, and
the frame-change pair S_c, Sigma = S_c + <log g>.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ContractViolation
from .fokker_planck import field_force_grid
from .grid import DensityGrid
from .operators import VectorField3
from .sde import Ensemble

LOG_FLOOR = 1e-30  # cells below this density contribute zero entropy


def deposit_histogram(ens, grid_spec, center=(0.0, 0.0, 0.0),
                      side=2.0 * np.pi) -> DensityGrid:
    """Cloud-in-cell deposit of an ensemble, normalized to unit mass.

    grid_spec is a DensityGrid to match or a shape tuple.  Positions are
    wrapped into the box; the deposit is serial and thread-count free.
    """
    positions = ens.positions if isinstance(ens, Ensemble) else np.asarray(ens, dtype=float)
    if positions.size == 0:
        raise ContractViolation("cannot deposit an empty ensemble")
    if isinstance(grid_spec, DensityGrid):
        out = grid_spec.copy(values=np.zeros(grid_spec.shape))
    else:
        out = DensityGrid(tuple(grid_spec), center, side)
    lo = out.lo
    wrapped = lo + np.mod(positions - lo, out.side)
    weights = kernels.deposit_cic(wrapped, lo, out.widths,
                                  out.shape[0], out.shape[1], out.shape[2])
    out.values = weights / (positions.shape[0] * out.cell_volume)
    out.normalize()
    return out


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def _masked_xlogy(f, arg):
    """f * log(arg) with the low-density floor; returns (array, floored count)."""
    mask = f > LOG_FLOOR
    out = np.zeros_like(f)
    out[mask] = f[mask] * np.log(arg[mask] if isinstance(arg, np.ndarray) else arg)
    return out, int(f.size - mask.sum())


def entropy(f: DensityGrid, kind="S", lam=None, w=None, zeta=None, g=None,
            with_floored=False):
    """Entropy functionals by midpoint quadrature.

    kind:
      S            -int f log f dV
      sigma_lambda -int f log(f lambda) dV        (lam: array or callable)
      sigma_zeta   -int f [log(f |w|) + zeta] dV  (w: VectorField3)
      S_c          -int u log u vol_c with u = f g (g: array or callable)
      Sigma        S_c + <log g>  (equals S identically; consistency check)

    Cells below the 1e-30 density floor contribute zero; with_floored=True
    returns (value, floored_cell_count) instead of the bare value.
    """
    v = f.values
    dv = f.cell_volume
    floored = int(np.sum(v <= LOG_FLOOR))

    def result(x):
        return (x, floored) if with_floored else x

    def on_grid(a):
        if a is None:
            return None
        if callable(a):
            return f.sample_scalar(a)
        return np.asarray(a, dtype=float)

    if kind == "S":
        term, _ = _masked_xlogy(v, v)
        return result(float(-np.sum(term) * dv))
    if kind == "sigma_lambda":
        lam_g = on_grid(lam)
        if lam_g is None:
            raise ContractViolation("sigma_lambda needs lambda")
        term, _ = _masked_xlogy(v, v * lam_g)
        return result(float(-np.sum(term) * dv))
    if kind == "sigma_zeta":
        if w is None:
            raise ContractViolation("sigma_zeta needs the operator w")
        Wx, Wy, Wz = f.sample_field(w)
        wmag = np.sqrt(Wx ** 2 + Wy ** 2 + Wz ** 2)
        zeta_g = on_grid(zeta)
        term, _ = _masked_xlogy(v, v * wmag)
        total = -np.sum(term)
        if zeta_g is not None:
            total -= np.sum(v * zeta_g)
        return result(float(total * dv))
    if kind in ("S_c", "Sigma"):
        g_arr = on_grid(g)
        if g_arr is None:
            raise ContractViolation("frame entropies need the Jacobian g")
        term, _ = _masked_xlogy(v, v * g_arr)
        s_c = float(-np.sum(term) * dv)
        if kind == "S_c":
            return result(s_c)
        mean_log_g = float(np.sum(v * np.log(g_arr)) * dv)
        return result(s_c + mean_log_g)
    raise ContractViolation(f"unknown entropy kind {kind!r}")


def entropy_production_rate(f: DensityGrid, w: VectorField3):
    """Terms of dS/dt = (1/2) int f [ -B/4 + |w x grad log f|^2 ] dV.

    Returns (total, charge_term, quadratic_term) with grid-difference b and
    charge, consistent with the solver's discretization.
    """
    v = f.values
    dv = f.cell_volume
    _, charge = field_force_grid(f, w)
    charge_term = float(-0.125 * np.sum(v * charge) * dv)
    gx, gy, gz = f.gradient()
    mask = v > LOG_FLOOR
    Wx, Wy, Wz = f.sample_field(w)
    # f |w x grad log f|^2 = |w x grad f|^2 / f
    cx = Wy * gz - Wz * gy
    cy = Wz * gx - Wx * gz
    cz = Wx * gy - Wy * gx
    quad = np.zeros_like(v)
    quad[mask] = (cx[mask] ** 2 + cy[mask] ** 2 + cz[mask] ** 2) / v[mask]
    quadratic_term = float(0.5 * np.sum(quad) * dv)
    return charge_term + quadratic_term, charge_term, quadratic_term


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    l1_distance: float
    l2_distance: float
    max_rel_deviation: float
    pearson_correlation: float
    shape: tuple
    note: str = "both inputs renormalized to unit mass"

    def to_dict(self):
        pear = self.pearson_correlation
        return {"l1_distance": self.l1_distance,
                "l2_distance": self.l2_distance,
                "max_rel_deviation": self.max_rel_deviation,
                "pearson_correlation": None if np.isnan(pear) else pear,
                "shape": list(self.shape), "note": self.note}


def compare(f1: DensityGrid, f2: DensityGrid) -> ComparisonReport:
    """Distances between two densities on a common grid.

    Inputs are renormalized first.  Pearson correlation is NaN when either
    field is spatially constant (no variance to correlate).
    """
    if f1.shape != f2.shape:
        raise ContractViolation(
            f"grids differ in shape: {f1.shape} vs {f2.shape}; coarsen first")
    a = f1.values / f1.mass()
    b = f2.values / f2.mass()
    dv = f1.cell_volume
    diff = a - b
    l1 = float(np.sum(np.abs(diff)) * dv)
    l2 = float(np.sqrt(np.sum(diff ** 2) * dv))
    scale = max(float(np.mean(a)), float(np.mean(b)))
    max_rel = float(np.max(np.abs(diff)) / scale)
    sa, sb = float(np.std(a)), float(np.std(b))
    if sa < 1e-15 * max(1.0, abs(float(np.mean(a)))) or \
       sb < 1e-15 * max(1.0, abs(float(np.mean(b)))):
        pear = float("nan")
    else:
        pear = float(np.corrcoef(a.ravel(), b.ravel())[0, 1])
    return ComparisonReport(l1, l2, max_rel, pear, f1.shape)


def compare_on(f1: DensityGrid, f2: DensityGrid, shape) -> ComparisonReport:
    """Compare after block-averaging both inputs to a common coarse shape."""
    return compare(f1.coarsen(shape), f2.coarsen(shape))


# ---------------------------------------------------------------------------
# trace output
# ---------------------------------------------------------------------------

@dataclass
class EntropyTrace:
    times: list
    values: list
    kind: str = "S"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size and np.any(np.diff(t) <= 0):
            raise ContractViolation("entropy trace times must increase")
        if not np.all(np.isfinite(np.asarray(self.values, dtype=float))):
            raise ContractViolation("entropy trace values must be finite")

    def min_step_change(self):
        v = np.asarray(self.values, dtype=float)
        return float(np.min(np.diff(v))) if v.size > 1 else 0.0

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", self.kind])
            for t, v in zip(self.times, self.values):
                wr.writerow([repr(float(t)), repr(float(v))])
        return Path(path)
