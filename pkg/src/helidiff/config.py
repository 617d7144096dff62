"""Declarative scenario configuration.

Configurations live in TOML; every field except `name` and `operator` has a
default, and parsing materializes all defaults so that parse -> serialize ->
parse is the identity.  Built-in scenarios fig2a..fig10 reproduce one reference
figure each at desk scale; --paper-scale swaps in the full-scale
ensemble (8e6 particles, side-6 box).
"""

import math
import sys
from dataclasses import asdict, dataclass, field, fields as dc_fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .errors import ConfigurationError
from .operators import CoordinateMap
from .sde import DomainSpec, FrictionSpec, NoiseSpec

TWO_PI = 2.0 * math.pi


@dataclass
class OperatorCfg:
    name: str = ""
    params: dict = field(default_factory=dict)


@dataclass
class HamiltonianCfg:
    kind: str = "none"
    params: dict = field(default_factory=dict)


@dataclass
class NoiseMapCfg:
    kind: str = "identity"          # identity | diagonal
    scale: list = field(default_factory=lambda: [1.0, 1.0, 1.0])


@dataclass
class NoiseCfg:
    amplitude: float = 1.0
    active_axes: list = None        # None -> all axes
    map: NoiseMapCfg = field(default_factory=NoiseMapCfg)


@dataclass
class FrictionCfg:
    enabled: bool = False
    beta: float = 0.0
    adaptive: bool = False


@dataclass
class DomainCfg:
    kind: str = "periodic_box"      # periodic_box | unbounded
    center: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    side: float = TWO_PI


@dataclass
class InitCfg:
    kind: str = "flat"              # flat | gaussian | point
    center: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    sigma: float = 0.5


@dataclass
class GridInitCfg:
    kind: str = "same"              # same | flat | random_positive
    amplitude: float = 0.2


@dataclass
class IntegratorCfg:
    dt: float = 1e-3
    steps: int = 200_000
    snapshot_every: int = 10_000
    tracker_every: int = 100


@dataclass
class SolverCfg:
    kind: str = "particles"         # particles | grid | both
    particles: int = 200_000
    grid_shape: list = field(default_factory=lambda: [64, 64, 64])
    grid_t_final: float = 0.0       # 0 -> dt * steps
    grid_trace_every: int = 1
    grid_stop_when_flat: float = 0.0  # 0 -> disabled


@dataclass
class ComparisonCfg:
    target: str = "none"            # none | flat | inv_lambda
    # must block-divide solver.grid_shape; coarse enough that desk-scale
    # sampling noise stays well under the acceptance L1 thresholds
    shape: list = field(default_factory=lambda: [16, 16, 4])


@dataclass
class OutputsCfg:
    kinds: list = field(default_factory=lambda: ["histogram", "trackers"])


@dataclass
class ScenarioConfig:
    name: str
    operator: OperatorCfg
    figure: str = ""
    seed: int = 20240617
    hamiltonian: HamiltonianCfg = field(default_factory=HamiltonianCfg)
    noise: NoiseCfg = field(default_factory=NoiseCfg)
    friction: FrictionCfg = field(default_factory=FrictionCfg)
    domain: DomainCfg = field(default_factory=DomainCfg)
    init: InitCfg = field(default_factory=InitCfg)
    grid_init: GridInitCfg = field(default_factory=GridInitCfg)
    integrator: IntegratorCfg = field(default_factory=IntegratorCfg)
    solver: SolverCfg = field(default_factory=SolverCfg)
    comparison: ComparisonCfg = field(default_factory=ComparisonCfg)
    outputs: OutputsCfg = field(default_factory=OutputsCfg)

    # -- validation ----------------------------------------------------------

    def validate(self):
        if not self.name:
            raise ConfigurationError("scenario needs a name")
        if not self.operator.name:
            raise ConfigurationError("scenario needs an operator")
        from .operators import _CATALOG  # late import to avoid cycles
        if self.operator.name not in _CATALOG:
            raise ConfigurationError(
                f"unknown operator {self.operator.name!r}; valid: "
                f"{', '.join(sorted(_CATALOG))}")
        if self.hamiltonian.kind not in ("none", "quadratic", "rigid_body", "cosine"):
            raise ConfigurationError(
                f"unknown hamiltonian kind {self.hamiltonian.kind!r}")
        if self.noise.amplitude < 0:
            raise ConfigurationError("noise amplitude must be >= 0")
        if self.noise.map.kind not in ("identity", "diagonal"):
            raise ConfigurationError(f"unknown noise map {self.noise.map.kind!r}")
        if self.domain.kind not in ("periodic_box", "unbounded"):
            raise ConfigurationError(f"unknown domain kind {self.domain.kind!r}")
        if self.domain.kind == "periodic_box" and self.domain.side <= 0:
            raise ConfigurationError("periodic box needs side > 0")
        if self.init.kind not in ("flat", "gaussian", "point"):
            raise ConfigurationError(f"unknown init kind {self.init.kind!r}")
        if self.init.kind == "flat" and self.domain.kind != "periodic_box":
            raise ConfigurationError("flat init requires a periodic box")
        if self.grid_init.kind not in ("same", "flat", "random_positive"):
            raise ConfigurationError(f"unknown grid init {self.grid_init.kind!r}")
        if self.integrator.dt <= 0 or self.integrator.steps < 1:
            raise ConfigurationError("integrator needs dt > 0 and steps >= 1")
        if self.integrator.dt * self.integrator.steps <= 0:
            raise ConfigurationError("dt * steps must be positive")
        if self.solver.kind not in ("particles", "grid", "both"):
            raise ConfigurationError(f"unknown solver kind {self.solver.kind!r}")
        if self.solver.particles < 1:
            raise ConfigurationError("need at least one particle")
        if self.solver.kind in ("grid", "both"):
            if self.domain.kind != "periodic_box":
                raise ConfigurationError("the grid solver needs a periodic box")
            if len(self.solver.grid_shape) != 3 or min(self.solver.grid_shape) < 8:
                raise ConfigurationError("grid_shape must be three axes of >= 8 cells")
        if self.comparison.target not in ("none", "flat", "inv_lambda"):
            raise ConfigurationError(
                f"unknown comparison target {self.comparison.target!r}")
        if self.comparison.target != "none" or \
                "cross_compare" in self.outputs.kinds:
            for a in range(3):
                if self.solver.grid_shape[a] % self.comparison.shape[a] != 0:
                    raise ConfigurationError(
                        f"comparison shape {self.comparison.shape} must "
                        f"block-divide grid shape {self.solver.grid_shape}")
        return self

    # -- adapters to solver objects -------------------------------------------

    def noise_spec(self):
        cmap = None
        if self.noise.map.kind == "diagonal":
            cmap = CoordinateMap.diagonal_map(self.noise.map.scale)
        axes = None if self.noise.active_axes is None else tuple(self.noise.active_axes)
        return NoiseSpec(amplitude=self.noise.amplitude, map=cmap, active_axes=axes)

    def friction_spec(self):
        return FrictionSpec(enabled=self.friction.enabled, beta=self.friction.beta,
                            adaptive=self.friction.adaptive)

    def domain_spec(self):
        return DomainSpec(kind=self.domain.kind, center=tuple(self.domain.center),
                          side=self.domain.side)

    def grid_t_final(self):
        t = self.solver.grid_t_final
        return t if t > 0 else self.integrator.dt * self.integrator.steps

    # -- dict / TOML round trip ------------------------------------------------

    def to_dict(self):
        d = asdict(self)
        if d["noise"]["active_axes"] is None:
            del d["noise"]["active_axes"]
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        nested = {"operator": OperatorCfg, "hamiltonian": HamiltonianCfg,
                  "friction": FrictionCfg, "domain": DomainCfg, "init": InitCfg,
                  "grid_init": GridInitCfg, "integrator": IntegratorCfg,
                  "solver": SolverCfg, "comparison": ComparisonCfg,
                  "outputs": OutputsCfg}
        kwargs = {}
        known = {f.name for f in dc_fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigurationError(f"unknown configuration key {key!r}")
        for key, sub in nested.items():
            if key in data:
                payload = dict(data[key])
                subknown = {f.name for f in dc_fields(sub)}
                for k in payload:
                    if k not in subknown:
                        raise ConfigurationError(
                            f"unknown key {key}.{k!r} in configuration")
                kwargs[key] = sub(**payload)
        if "noise" in data:
            payload = dict(data["noise"])
            map_payload = payload.pop("map", {})
            subknown = {f.name for f in dc_fields(NoiseCfg)}
            for k in payload:
                if k not in subknown:
                    raise ConfigurationError(f"unknown key noise.{k!r}")
            kwargs["noise"] = NoiseCfg(map=NoiseMapCfg(**map_payload), **payload)
        for key in ("name", "figure", "seed"):
            if key in data:
                kwargs[key] = data[key]
        if "operator" not in kwargs:
            raise ConfigurationError("configuration needs an [operator] table")
        if "name" not in kwargs:
            raise ConfigurationError("configuration needs a name")
        return cls(**kwargs).validate()

    def to_toml(self):
        return dumps_toml(self.to_dict())

    @classmethod
    def from_toml(cls, text):
        return cls.from_dict(tomllib.loads(text))

    @classmethod
    def from_path(cls, path):
        return cls.from_toml(Path(path).read_text())


# ---------------------------------------------------------------------------
# minimal TOML emitter (round-trips the restricted schema above)
# ---------------------------------------------------------------------------

def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        r = repr(float(v))
        return r if any(c in r for c in ".einf") else r + ".0"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    raise ConfigurationError(f"cannot serialize {type(v).__name__} to TOML")


def dumps_toml(data, prefix=""):
    lines = []
    tables = []
    for key, v in data.items():
        if isinstance(v, dict):
            tables.append((key, v))
        else:
            lines.append(f"{key} = {_fmt_value(v)}")
    for key, v in tables:
        full = f"{prefix}.{key}" if prefix else key
        body = dumps_toml(v, full)
        lines.append(f"\n[{full}]")
        if body:
            lines.append(body)
    return "\n".join(lines).strip() + ("\n" if not prefix else "")


# ---------------------------------------------------------------------------
# built-in scenario catalog (one per reference figure)
# ---------------------------------------------------------------------------

def _desk_diffusion(name, figure, operator, comparison="none", solver="particles",
                    grid_init=None, solver_extra=None, outputs=None,
                    comparison_shape=None):
    d = {
        "name": name, "figure": figure, "operator": {"name": operator},
        "noise": {"amplitude": 1.0},
        "domain": {"kind": "periodic_box", "side": TWO_PI},
        "init": {"kind": "flat"},
        "integrator": {"dt": 2e-3, "steps": 10_000, "snapshot_every": 2_500,
                       "tracker_every": 200},
        "solver": {"kind": solver, "particles": 200_000},
        "comparison": {"target": comparison},
        "outputs": outputs or {"kinds": ["histogram", "comparison", "slice_z0"]},
    }
    if comparison_shape:
        d["comparison"]["shape"] = comparison_shape
    if grid_init:
        d["grid_init"] = grid_init
    if solver_extra:
        d["solver"].update(solver_extra)
    return d


def _orbit_scenario(name, figure, operator, amplitude, particles, steps):
    return {
        "name": name, "figure": figure, "operator": {"name": operator},
        "hamiltonian": {"kind": "rigid_body", "params": {"inertia": [1.0, 2.0, 3.0]}},
        "noise": {"amplitude": amplitude},
        "domain": {"kind": "unbounded"},
        "init": {"kind": "point", "center": [1.0, 0.6, 0.2]},
        "integrator": {"dt": 1e-3, "steps": steps, "snapshot_every": steps // 4,
                       "tracker_every": 200},
        "solver": {"kind": "particles", "particles": particles},
        "outputs": {"kinds": ["trackers", "final_positions", "snapshots"]},
    }


BUILTIN_SCENARIOS = {
    # deterministic and noisy rigid-body rotation: orbits on (and then over)
    # the Casimir sphere C = |x|^2/2
    "fig2a": _orbit_scenario("fig2a", "fig2a", "euler_rigid_body", 0.0, 16, 100_000),
    "fig2b": _orbit_scenario("fig2b", "fig2b", "euler_rigid_body", 0.3, 256, 200_000),
    # spiraling non-Poisson orbits of the strong-Beltrami spiral operator
    "fig3a": _orbit_scenario("fig3a", "fig3a", "spiral", 0.0, 16, 100_000),
    "fig3b": _orbit_scenario("fig3b", "fig3b", "spiral", 0.3, 64, 100_000),
    # pure-diffusion equilibria on the periodic box
    "fig4": _desk_diffusion("fig4", "fig4", "uniform_z", comparison="flat"),
    "fig5": _desk_diffusion("fig5", "fig5", "grad_casimir", comparison="flat"),
    "fig6": _desk_diffusion("fig6", "fig6", "lambda_grad_casimir",
                            comparison="inv_lambda", solver="both",
                            solver_extra={"grid_t_final": 1.5},
                            comparison_shape=[8, 8, 4],
                            outputs={"kinds": ["histogram", "comparison",
                                               "slice_z0", "entropy_trace",
                                               "grid_final"]}),
    "fig7": _desk_diffusion("fig7", "fig7", "beltrami", comparison="flat",
                            solver="both",
                            grid_init={"kind": "random_positive", "amplitude": 0.2},
                            solver_extra={"grid_t_final": 50.0,
                                          "grid_stop_when_flat": 5e-4},
                            outputs={"kinds": ["histogram", "comparison",
                                               "entropy_trace", "grid_final"]}),
    "fig8": _desk_diffusion("fig8", "fig8", "antisym", solver="both",
                            solver_extra={"grid_t_final": 3.0},
                            outputs={"kinds": ["histogram", "slice_z0",
                                               "entropy_trace", "grid_final",
                                               "cross_compare",
                                               "profile_correlation"]}),
    "fig9": _desk_diffusion("fig9", "fig9", "unit_norm",
                            outputs={"kinds": ["histogram", "slice_z0",
                                               "profile_correlation"]}),
    # Landau-Lifshitz magnetization: free-space run, Gaussian start at
    # (0,0,z0); the damping term aligns the ensemble with the z axis
    "fig10": {
        "name": "fig10", "figure": "fig10",
        "operator": {"name": "landau_lifshitz",
                     "params": {"gamma": 1.0, "sigma": 0.5, "c": 0.5}},
        "hamiltonian": {"kind": "quadratic",
                        "params": {"weights": [1.0, 1.0, 1.0]}},
        "noise": {"amplitude": 0.5},
        "domain": {"kind": "unbounded"},
        "init": {"kind": "gaussian", "center": [0.0, 0.0, 2.0], "sigma": 0.5},
        "integrator": {"dt": 1e-3, "steps": 5_000, "snapshot_every": 1_000,
                       "tracker_every": 100},
        "solver": {"kind": "particles", "particles": 50_000},
        "outputs": {"kinds": ["final_positions", "moments", "trackers"]},
    },
}


def builtin_scenario(name) -> ScenarioConfig:
    if name not in BUILTIN_SCENARIOS:
        raise ConfigurationError(
            f"unknown built-in scenario {name!r}; available: "
            f"{', '.join(sorted(BUILTIN_SCENARIOS))}")
    return ScenarioConfig.from_dict(BUILTIN_SCENARIOS[name])


def apply_paper_scale(cfg: ScenarioConfig) -> ScenarioConfig:
    """Full-scale run: 8e6 particles on the side-6 cube."""
    cfg.solver.particles = 8_000_000
    cfg.integrator.dt = 1e-3
    cfg.integrator.steps = 200_000
    cfg.integrator.snapshot_every = 50_000
    if cfg.domain.kind == "periodic_box":
        cfg.domain.side = 6.0
    return cfg.validate()


def apply_overrides(cfg: ScenarioConfig, overrides):
    """Apply key=value CLI overrides with dotted paths (integrator.steps=500)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        path, raw = item.split("=", 1)
        parts = path.strip().split(".")
        obj = cfg
        for part in parts[:-1]:
            if not hasattr(obj, part):
                raise ConfigurationError(f"unknown override path {path!r}")
            obj = getattr(obj, part)
        leaf = parts[-1]
        if not hasattr(obj, leaf):
            raise ConfigurationError(f"unknown override path {path!r}")
        current = getattr(obj, leaf)
        try:
            if isinstance(current, bool):
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            elif isinstance(current, list):
                value = [type(current[0])(x) if current else float(x)
                         for x in raw.strip("[] ").split(",")]
            else:
                value = raw
        except ValueError as err:
            raise ConfigurationError(f"bad override value {item!r}: {err}")
        setattr(obj, leaf, value)
    return cfg.validate()
