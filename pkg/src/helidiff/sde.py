"""Stochastic integration of conservative dynamics under white noise.

The equation of motion is

    dx^i = [(J^{ij} - (beta/2) J^{ir}R_r^k J^{js}R_s^k) H0_j] dt
           + J^{ij} R_j^r o dW_r,

integrated in the Stratonovich sense by the stochastic Heun scheme:
predictor and corrector share the same Wiener increment, and the corrector
averages the coefficients at the initial and predicted points.

Two lanes produce trajectories: a compiled 3D lane for catalog operators
(:mod:`helidiff.kernels`) and a generic numpy lane for arbitrary
OperatorFields of any dimension.  Both draw noise from the same
counter-based streams, so a run extended to n+1 dimensions sees identical
increments on the shared axes.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import kernels, rng
from .errors import ConfigurationError, ContractViolation
from .operators import (CoordinateMap, Hamiltonian, VectorField3,
                        catalog_hamiltonian, catalog_operator)


@dataclass
class NoiseSpec:
    """White-noise forcing: dH_I/dy^r = Gamma_r in map coordinates y.

    amplitude scales every Wiener increment; active_axes restricts which
    noise slots are drawn at all (inactive slots contribute exactly zero,
    which keeps shared-axis draws bitwise stable across dimensions).  The
    stochastic convention is fixed to Stratonovich (alpha = 1/2).
    """

    amplitude: float = 1.0
    map: Optional[CoordinateMap] = None
    active_axes: Optional[tuple] = None

    convention = "stratonovich"  # class attribute: not configurable

    def scales(self, dim, dt):
        s = np.full(dim, self.amplitude * math.sqrt(dt))
        if self.active_axes is not None:
            mask = np.zeros(dim)
            for a in self.active_axes:
                mask[a] = 1.0
            s *= mask
        return s

    def map_for(self, dim):
        return self.map if self.map is not None else CoordinateMap.identity_map(dim)


@dataclass
class FrictionSpec:
    """Friction -gamma^{ij} H0_j with gamma = (beta/2)(JR)(JR)^T."""

    enabled: bool = False
    beta: float = 0.0
    adaptive: bool = False  # grid solver recomputes beta from the density

    def effective_beta(self):
        return self.beta if self.enabled else 0.0


@dataclass
class DomainSpec:
    kind: str = "periodic_box"      # or "unbounded"
    center: tuple = (0.0, 0.0, 0.0)
    side: float = 2.0 * np.pi

    def __post_init__(self):
        if self.kind not in ("periodic_box", "unbounded"):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        if self.kind == "periodic_box" and self.side <= 0:
            raise ConfigurationError("periodic box needs side > 0")

    @property
    def periodic(self):
        return self.kind == "periodic_box"

    def lo(self, dim):
        c = np.asarray(self.center, dtype=float)
        if c.size < dim:
            c = np.concatenate([c, np.zeros(dim - c.size)])
        return c[:dim] - 0.5 * self.side

    def wrap(self, positions):
        if not self.periodic:
            return positions
        lo = self.lo(positions.shape[1])
        return lo + np.mod(positions - lo, self.side)


@dataclass
class Ensemble:
    """N particle positions with per-particle counter-based noise streams."""

    positions: np.ndarray
    seed: int
    step: int = 0
    frozen: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[0] < 1:
            raise ContractViolation("ensemble needs an (N, n) position array, N >= 1")
        if not np.all(np.isfinite(self.positions)):
            raise ContractViolation("ensemble positions must be finite")
        if self.frozen is None:
            self.frozen = np.zeros(self.positions.shape[0], dtype=bool)

    @property
    def n_particles(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]

    @property
    def n_frozen(self):
        return int(self.frozen.sum())


def initial_ensemble(n_particles, seed, domain: DomainSpec, kind="flat",
                     center=(0.0, 0.0, 0.0), sigma=0.5, dim=3):
    """Draw the initial condition from the reserved init stream."""
    pids = np.arange(n_particles, dtype=np.uint64)
    pos = np.empty((n_particles, dim))
    if kind == "flat":
        if not domain.periodic:
            raise ConfigurationError("flat initial condition needs a periodic box")
        lo = domain.lo(dim)
        for a in range(dim):
            pos[:, a] = lo[a] + domain.side * rng.uniforms(seed, pids, rng.INIT_STEP, a)
    elif kind == "gaussian":
        c = np.asarray(center, dtype=float)[:dim]
        for a in range(dim):
            pos[:, a] = c[a] + sigma * rng.normals(seed, pids, rng.INIT_STEP, a)
        pos = domain.wrap(pos)
    elif kind == "point":
        pos[:] = np.asarray(center, dtype=float)[:dim]
    else:
        raise ConfigurationError(f"unknown init kind {kind!r}")
    return Ensemble(pos, seed=seed)


# ---------------------------------------------------------------------------
# generic lane
# ---------------------------------------------------------------------------

def _column_apply(M, theta):
    """v_i = sum_j M[i,j] theta_j accumulated in fixed j order.

    Sequential accumulation keeps the extension property exact: appending a
    dimension whose theta component is 0.0 leaves the first components
    bitwise unchanged.
    """
    v = M[:, 0] * theta[0]
    for j in range(1, theta.size):
        v = v + M[:, j] * theta[j]
    return v


def step_stratonovich(ens: Ensemble, J, H0: Optional[Hamiltonian],
                      noise: NoiseSpec, fric: FrictionSpec, dt: float,
                      domain: Optional[DomainSpec] = None) -> Ensemble:
    """One stochastic Heun step of the full equation of motion.

    Accepts any OperatorField (VectorField3 is converted); this is the
    generic lane used for non-catalog operators and dimensions != 3.
    Returns a new Ensemble; non-finite updates freeze the particle at its
    pre-step position.
    """
    if dt <= 0:
        raise ContractViolation("dt must be positive")
    Jop = J.to_operator() if isinstance(J, VectorField3) else J
    n = ens.dim
    if Jop.dim != n:
        raise ContractViolation("operator dimension does not match ensemble")
    exclude_r2 = getattr(J, "exclude_radius", 0.0) ** 2
    dom = domain if domain is not None else DomainSpec(kind="unbounded")
    cmap = noise.map_for(n)
    beta = fric.effective_beta()

    pids = np.arange(ens.n_particles, dtype=np.uint64)
    dW = rng.normal_matrix(ens.seed, pids, ens.step, n) * noise.scales(n, dt)

    def incr(x, dw):
        M = Jop.matrix(x)
        R = cmap.jacobian(x)
        u = dw if cmap.identity else R.T @ dw
        theta = u.copy()
        if H0 is not None:
            g = H0.gradient(x)
            theta = g * dt + u
        k = _column_apply(M, theta)
        if beta != 0.0 and H0 is not None:
            P = M if cmap.identity else M @ R.T
            k = k - 0.5 * beta * dt * (P @ (P.T @ g))
        return k

    new_pos = ens.positions.copy()
    frozen = ens.frozen.copy()
    for p in range(ens.n_particles):
        if frozen[p]:
            continue
        x = ens.positions[p]
        k1 = incr(x, dW[p])
        k2 = incr(x + k1, dW[p])
        xn = x + 0.5 * (k1 + k2)
        if not np.all(np.isfinite(xn)) or \
                (exclude_r2 > 0.0 and float(xn @ xn) < exclude_r2):
            frozen[p] = True
            continue
        new_pos[p] = xn
    if dom.periodic:
        new_pos[~frozen] = dom.wrap(new_pos[~frozen])
    return Ensemble(new_pos, seed=ens.seed, step=ens.step + 1, frozen=frozen)


# ---------------------------------------------------------------------------
# fast lane
# ---------------------------------------------------------------------------

def _fast_lane_setup(op, H0, noise: NoiseSpec, fric: FrictionSpec, dt):
    if not isinstance(op, VectorField3) or op.name not in kernels.OP_CODES:
        return None
    cmap = noise.map_for(3)
    if not (cmap.identity or cmap.diagonal is not None):
        return None
    hname = "none" if H0 is None else H0.name
    if hname not in kernels.HAM_CODES:
        return None

    op_par = np.zeros(3)
    if op.name == "landau_lifshitz":
        op_par = np.array([op.params["gamma"], op.params["sigma"], op.params["c"]])
    ham_par = np.zeros(6)
    if H0 is not None and H0.name in ("quadratic", "rigid_body"):
        w = H0.params.get("weights")
        if w is None:
            w = [1.0 / i for i in H0.params["inertia"]]
        ham_par[:3] = w
        ham_par[3:] = H0.params.get("center", (0.0, 0.0, 0.0))
    elif H0 is not None and H0.name == "cosine":
        ham_par[:3] = H0.params["amps"]

    d = np.ones(3) if cmap.identity else np.asarray(cmap.diagonal, dtype=float)
    noise_scale = noise.scales(3, dt) * d
    return {
        "op": kernels.OP_CODES[op.name], "op_par": op_par,
        "ham": kernels.HAM_CODES[hname], "ham_par": ham_par,
        "beta": fric.effective_beta(), "noise_scale": noise_scale,
        "d2": d * d, "freeze_r2": op.exclude_radius ** 2,
    }


def advance(ens: Ensemble, op, H0, noise, fric, dt, nsteps,
            domain: DomainSpec) -> Ensemble:
    """Advance nsteps Heun steps, through the compiled lane when possible."""
    setup = _fast_lane_setup(op, H0, noise, fric, dt)
    if setup is None:
        for _ in range(nsteps):
            ens = step_stratonovich(ens, op, H0, noise, fric, dt, domain)
        return ens
    pos = ens.positions.copy()
    frozen = ens.frozen.copy()
    lo = domain.lo(3) if domain.periodic else np.zeros(3)
    kernels.heun_chunk(pos, frozen, ens.seed, ens.step, nsteps,
                       setup["op"], setup["op_par"], setup["ham"],
                       setup["ham_par"], setup["beta"], setup["noise_scale"],
                       setup["d2"], dt, domain.periodic,
                       lo[0], lo[1], lo[2], domain.side, setup["freeze_r2"])
    return Ensemble(pos, seed=ens.seed, step=ens.step + nsteps, frozen=frozen)


# ---------------------------------------------------------------------------
# scenario orchestration
# ---------------------------------------------------------------------------

@dataclass
class EnsembleHistory:
    """Snapshots and tracked scalars of one particle run."""

    times: list = dc_field(default_factory=list)
    snapshots: list = dc_field(default_factory=list)
    tracker_times: list = dc_field(default_factory=list)
    trackers: dict = dc_field(default_factory=dict)
    initial_positions: Optional[np.ndarray] = None
    final: Optional[Ensemble] = None
    frozen_count: int = 0

    def tracker_series(self, name):
        """(T, 5) array of (t, mean, var, min, max) rows."""
        rows = self.trackers[name]
        t = np.asarray(self.tracker_times)
        return np.column_stack([t, np.asarray(rows)])


def _tracked_quantities(op, H0):
    out = {}
    if H0 is not None:
        out["H0"] = lambda pos: H0(pos)
    if getattr(op, "casimir", None) is not None:
        out["C"] = lambda pos: op.casimir(pos)
    return out


def run_scenario(cfg) -> EnsembleHistory:
    """Run the particle solver of a validated ScenarioConfig.

    Deterministic for a fixed seed: trajectories depend only on
    (seed, scenario parameters, step count), never on thread count.
    """
    cfg.validate()
    op = catalog_operator(cfg.operator.name, **cfg.operator.params)
    H0 = catalog_hamiltonian(cfg.hamiltonian.kind, **cfg.hamiltonian.params)
    noise = cfg.noise_spec()
    fric = cfg.friction_spec()
    domain = cfg.domain_spec()

    ens = initial_ensemble(cfg.solver.particles, cfg.seed, domain,
                           kind=cfg.init.kind, center=cfg.init.center,
                           sigma=cfg.init.sigma)
    dt = cfg.integrator.dt
    steps = cfg.integrator.steps
    snap_every = cfg.integrator.snapshot_every
    track_every = cfg.integrator.tracker_every

    tracked = _tracked_quantities(op, H0)
    hist = EnsembleHistory(initial_positions=ens.positions.copy())
    hist.trackers = {name: [] for name in tracked}
    for name in tracked:
        hist.trackers[name + "_drift"] = []
    initial_values = {name: fn(ens.positions) for name, fn in tracked.items()}

    def record_trackers(t, ens):
        hist.tracker_times.append(t)
        for name, fn in tracked.items():
            alive = ~ens.frozen
            v = fn(ens.positions[alive])
            hist.trackers[name].append(
                [float(v.mean()), float(v.var()), float(v.min()), float(v.max())])
            v0 = initial_values[name][alive]
            denom = np.maximum(np.abs(v0), 1e-30)
            drift = float(np.max(np.abs(v - v0) / denom))
            hist.trackers[name + "_drift"].append([drift, 0.0, drift, drift])

    def record_snapshot(t, ens):
        hist.times.append(t)
        hist.snapshots.append(ens.positions.copy())

    record_trackers(0.0, ens)
    record_snapshot(0.0, ens)
    done = 0
    while done < steps:
        chunk = min(track_every, steps - done,
                    snap_every - done % snap_every)  # stop at snapshot steps
        ens = advance(ens, op, H0, noise, fric, dt, chunk, domain)
        done += chunk
        t = done * dt
        record_trackers(t, ens)
        if done % snap_every == 0 or done == steps:
            record_snapshot(t, ens)

    hist.final = ens
    hist.frozen_count = ens.n_frozen
    return hist


def axis_second_moments(positions):
    """Per-axis <x_a^2>; the anisotropy diagnostic for unbounded runs."""
    return np.mean(np.asarray(positions) ** 2, axis=0)
