"""Sampled classification of antisymmetric operators.

Labels are assigned from statistics over a seeded low-discrepancy sample,
not from proofs, so the sample size and tolerance are part of the report.
The label is the most specific class whose test passes, walking the
hierarchy

    symplectic < poisson < measure_preserving < strong_beltrami
               < beltrami < general_antisymmetric

(a constant-rank Poisson operator is measure preserving, and a measure
preserving operator is a strong Beltrami operator on its invariant
measure, so the classes form a single chain).
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .errors import ContractViolation
from .geometry import (UNITY, VolumeWeight, cocurrent_residual,
                       field_charge_3d, field_charge_nd, field_force,
                       field_force_vector_nd, helicity_density,
                       jacobi_residual)
from .operators import OperatorField, VectorField3, symplectic_operator

LABELS = ("symplectic", "poisson", "measure_preserving", "strong_beltrami",
          "beltrami", "general_antisymmetric")


def _resize_bound(b, dim):
    arr = np.atleast_1d(np.asarray(b, dtype=float))
    if arr.size == 1:
        return np.full(dim, arr[0])
    if arr.size >= dim:
        return arr[:dim]
    # pad with the last value, e.g. 3D bounds reused for an extended 4D op
    return np.concatenate([arr, np.full(dim - arr.size, arr[-1])])


@dataclass
class SampleSpec:
    """Quasi-random evaluation points: a Sobol sequence in a box."""

    n_samples: int = 256
    lo: tuple = (-np.pi, -np.pi, -np.pi)
    hi: tuple = (np.pi, np.pi, np.pi)
    seed: int = 2024

    def points(self, dim, exclude_radius=0.0):
        if self.n_samples < 100:
            raise ContractViolation("classification needs >= 100 sample points")
        lo = _resize_bound(self.lo, dim)
        hi = _resize_bound(self.hi, dim)
        eng = qmc.Sobol(d=dim, scramble=True, seed=self.seed)
        pts = lo + (hi - lo) * eng.random(self.n_samples)
        if exclude_radius > 0.0:
            keep = np.linalg.norm(pts, axis=1) > exclude_radius
            pts = pts[keep]
            while pts.shape[0] < self.n_samples:
                extra = lo + (hi - lo) * eng.random(self.n_samples)
                extra = extra[np.linalg.norm(extra, axis=1) > exclude_radius]
                pts = np.vstack([pts, extra])[: self.n_samples]
        return pts


def _stats(values):
    a = np.abs(np.asarray(values, dtype=float))
    return {"max_abs": float(a.max()), "mean_abs": float(a.mean()),
            "rms": float(np.sqrt(np.mean(a * a)))}


@dataclass
class ClassificationReport:
    operator: str
    g: str
    label: str
    tolerance: float
    n_samples: int
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {"operator": self.operator, "g": self.g, "label": self.label,
                "tolerance": self.tolerance, "n_samples": self.n_samples,
                "stats": self.stats}

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


def _is_canonical_symplectic(J: OperatorField, pts, tol):
    if J.dim % 2 != 0:
        return False
    ref = symplectic_operator(J.dim // 2).matrix(pts[0])
    return all(np.max(np.abs(J.matrix(p) - ref)) <= tol for p in pts)


def classify(op, g: Optional[VolumeWeight] = None,
             sample_spec: Optional[SampleSpec] = None,
             tolerance: Optional[float] = None) -> ClassificationReport:
    """Evaluate all diagnostics of `op` on a sample and assign a label.

    `op` is a VectorField3 or an OperatorField.  The default tolerance is
    1e-6 when analytic derivatives are available and 1e-3 for FD-only
    operators (second derivatives limit the FD accuracy).
    """
    g = g if g is not None else UNITY
    spec = sample_spec if sample_spec is not None else SampleSpec()

    w3 = op if isinstance(op, VectorField3) else None
    J = op.to_operator() if w3 is not None else op
    if tolerance is None:
        tolerance = 1e-6 if op.has_analytic_deriv else 1e-3

    pts = spec.points(J.dim, getattr(op, "exclude_radius", 0.0))

    stats = {}
    jac = [jacobi_residual(J, p) for p in pts]
    coc = [np.max(np.abs(cocurrent_residual(J, g, p))) for p in pts]
    if w3 is not None:
        h = [helicity_density(w3, p) for p in pts]
        bnorm = [np.linalg.norm(field_force(w3, p)) for p in pts]
        charge = [field_charge_3d(w3, p) for p in pts]
        stats["h"] = _stats(h)
    else:
        bnorm = [np.linalg.norm(field_force_vector_nd(J, g, p)) for p in pts]
        charge = [field_charge_nd(J, g, p) for p in pts]
        stats["h"] = None
    stats["b_norm"] = _stats(bnorm)
    stats["charge"] = _stats(charge)
    stats["jacobi_residual"] = _stats(jac)
    stats["cocurrent_residual"] = _stats(coc)

    if _is_canonical_symplectic(J, pts, tolerance):
        label = "symplectic"
    elif stats["jacobi_residual"]["max_abs"] <= tolerance:
        label = "poisson"
    elif stats["cocurrent_residual"]["max_abs"] <= tolerance:
        label = "measure_preserving"
    elif (stats["b_norm"]["max_abs"] <= tolerance
          and stats["charge"]["max_abs"] <= tolerance):
        label = "strong_beltrami"
    elif stats["charge"]["max_abs"] <= tolerance:
        label = "beltrami"
    else:
        label = "general_antisymmetric"

    return ClassificationReport(
        operator=getattr(op, "name", "") or "custom",
        g=g.name, label=label, tolerance=float(tolerance),
        n_samples=len(pts), stats=stats)
