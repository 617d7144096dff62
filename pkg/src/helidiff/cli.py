"""Command-line entry point.

    helidiff classify <config.toml | operator-name> [--out FILE]
    helidiff run <config.toml | builtin-name> [--paper-scale] [--out DIR]
                 [--set key=value ...]
    helidiff compare <density-a> <density-b> [--out FILE]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Artifacts are data only (binary densities with JSON sidecars, CSV traces,
JSON reports); a manifest lists every output with its SHA-256, so identical
configurations are byte-verifiable across runs and thread counts.
The HELIDIFF_THREADS environment variable controls the compute thread count
and nothing else.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .classify import SampleSpec, classify
from .config import (ScenarioConfig, apply_overrides, apply_paper_scale,
                     builtin_scenario, BUILTIN_SCENARIOS)
from .diagnostics import (EntropyTrace, compare, deposit_histogram, entropy)
from .errors import ConfigurationError, HelidiffError, NumericalFailureError
from .fokker_planck import (DiffusionRHS, EquilibriumSpec, FullRHS, evolve,
                            make_equilibrium, stable_dt)
from .geometry import VolumeWeight, field_charge_3d
from .grid import DensityGrid, flat_grid, random_positive_grid
from .operators import CoordinateMap, catalog_hamiltonian, catalog_operator
from .sde import axis_second_moments, run_scenario

SCHEMA_VERSION = 1


def _set_threads():
    n = os.environ.get("HELIDIFF_THREADS")
    if n:
        import numba
        numba.set_num_threads(int(n))


def _sha256(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return Path(path)


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def _classify_from_config(data):
    op_table = data.get("operator")
    if not op_table or "name" not in op_table:
        raise ConfigurationError("classify config needs [operator] with a name")
    op = catalog_operator(op_table["name"], **op_table.get("params", {}))
    g = VolumeWeight()
    g_kind = data.get("g", "unity")
    if g_kind == "inverse_lambda":
        if getattr(op, "lam", None) is None:
            raise ConfigurationError(
                f"operator {op.name!r} has no registered lambda for g=1/lambda")
        g = VolumeWeight(g=lambda p: 1.0 / op.lam(p), name="1/lambda")
    elif g_kind != "unity":
        raise ConfigurationError(f"unknown volume weight {g_kind!r}")
    spec = SampleSpec(n_samples=int(data.get("n_samples", 256)),
                      seed=int(data.get("seed", 2024)),
                      lo=tuple(data.get("lo", (-np.pi,) * 3)),
                      hi=tuple(data.get("hi", (np.pi,) * 3)))
    tol = data.get("tolerance")
    return classify(op, g=g, sample_spec=spec, tolerance=tol)


def run_classify(target, out=None):
    path = Path(target)
    if path.exists():
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        data = tomllib.loads(path.read_text())
    else:
        data = {"operator": {"name": target}}
    report = _classify_from_config(data)
    text = report.to_json()
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _resolve_config(target):
    path = Path(target)
    if path.exists():
        return ScenarioConfig.from_path(path)
    if target in BUILTIN_SCENARIOS:
        return builtin_scenario(target)
    raise ConfigurationError(
        f"{target!r} is neither a config file nor a built-in scenario "
        f"({', '.join(sorted(BUILTIN_SCENARIOS))})")


def _save_positions(positions, path, time):
    np.asarray(positions, dtype="<f8").tofile(path)
    meta = {"n_particles": int(positions.shape[0]),
            "dim": int(positions.shape[1]), "time": time}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return Path(path)


def _save_tracker_csv(history, name, path):
    series = history.tracker_series(name)
    with open(path, "w") as fh:
        fh.write("t,mean,var,min,max\n")
        for row in series:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return Path(path)


def _grid_initial(cfg, op):
    shape = tuple(cfg.solver.grid_shape)
    center = tuple(cfg.domain.center)
    side = cfg.domain.side
    kind = cfg.grid_init.kind
    if kind == "same":
        kind = {"flat": "flat", "gaussian": "gaussian"}.get(cfg.init.kind)
        if kind is None:
            raise ConfigurationError(
                "grid solver cannot start from a point ensemble; set grid_init")
    if kind == "flat":
        return flat_grid(shape, center, side)
    if kind == "random_positive":
        return random_positive_grid(shape, cfg.seed,
                                    amplitude=cfg.grid_init.amplitude,
                                    center=center, side=side)
    if kind == "gaussian":
        g = DensityGrid(shape, center, side)
        X, Y, Z = g.meshgrid()
        c = cfg.init.center
        s2 = 2.0 * cfg.init.sigma ** 2
        g.values = np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2) / s2)
        return g.normalize()
    raise ConfigurationError(f"unknown grid init {kind!r}")


def _scaled_operator(op, amp):
    from .operators import VectorField3
    return VectorField3(lambda p: amp * op(p), name=f"{op.name}_x{amp}")


def _pearson(a, b):
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    if a.std() < 1e-15 or b.std() < 1e-15:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def _comparison_target(cfg, op, shape):
    grid = flat_grid(shape, tuple(cfg.domain.center), cfg.domain.side)
    if cfg.comparison.target == "flat":
        return grid
    if cfg.comparison.target == "inv_lambda":
        if getattr(op, "lam", None) is None:
            raise ConfigurationError(
                f"operator {op.name!r} has no registered lambda profile")
        return make_equilibrium(EquilibriumSpec("casimir_foliation",
                                                {"lam": op.lam}), grid)
    raise ConfigurationError(f"no analytic target {cfg.comparison.target!r}")


def run_run(target, out=None, paper_scale=False, overrides=()):
    cfg = _resolve_config(target)
    if paper_scale:
        cfg = apply_paper_scale(cfg)
    if overrides:
        cfg = apply_overrides(cfg, list(overrides))
    cfg.validate()

    outdir = Path(out or f"helidiff_{cfg.name}")
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts = []  # (path, kind)

    def add(path, kind):
        artifacts.append((Path(path), kind))

    op = catalog_operator(cfg.operator.name, **cfg.operator.params)
    kinds = set(cfg.outputs.kinds)
    particle_hist = None
    history = None

    if cfg.solver.kind in ("particles", "both"):
        history = run_scenario(cfg)
        final_time = cfg.integrator.dt * cfg.integrator.steps
        if "final_positions" in kinds:
            add(_save_positions(history.final.positions,
                                outdir / "positions_final.bin", final_time),
                "final_positions")
            add(outdir / "positions_final.bin.json", "sidecar")
        if "snapshots" in kinds:
            for idx, (t, snap) in enumerate(zip(history.times, history.snapshots)):
                p = outdir / f"positions_{idx:04d}.bin"
                add(_save_positions(snap, p, t), "snapshot")
                add(outdir / f"positions_{idx:04d}.bin.json", "sidecar")
        if "trackers" in kinds:
            for name in history.trackers:
                p = outdir / f"tracker_{name}.csv"
                add(_save_tracker_csv(history, name, p), "tracker")
        if "moments" in kinds:
            alive = ~history.final.frozen
            m = axis_second_moments(history.final.positions[alive])
            add(_dump_json({"axis_second_moments": [float(x) for x in m],
                            "frozen": history.frozen_count,
                            "time": final_time}, outdir / "moments.json"),
                "moments")
        if cfg.domain.kind == "periodic_box" and \
                kinds & {"histogram", "slice_z0"}:
            particle_hist = deposit_histogram(
                history.final, tuple(cfg.solver.grid_shape),
                center=tuple(cfg.domain.center), side=cfg.domain.side)
            particle_hist.time = final_time
            if "histogram" in kinds:
                add(particle_hist.save(outdir / "histogram_final.bin"), "histogram")
                add(outdir / "histogram_final.bin.json", "sidecar")
            if "slice_z0" in kinds:
                add(particle_hist.save_slice_csv(outdir / "histogram_slice_z0.csv"),
                    "slice")
        if "profile_correlation" in kinds and cfg.domain.kind == "periodic_box":
            # no-threshold similarity diagnostics: density vs the field
            # strength 1/|w| and vs the (normalized-operator) field charge
            shape = tuple(cfg.comparison.shape)
            coarse = deposit_histogram(history.final, shape,
                                       center=tuple(cfg.domain.center),
                                       side=cfg.domain.side)
            report = {}
            ref = DensityGrid(shape, tuple(cfg.domain.center), cfg.domain.side)
            W = ref.sample_field(op)
            strength = 1.0 / np.sqrt(W[0] ** 2 + W[1] ** 2 + W[2] ** 2)
            report["field_strength"] = _pearson(coarse.values, strength)
            X, Y, Z = ref.meshgrid()
            charge = np.empty(shape)
            for idx in np.ndindex(shape):
                charge[idx] = field_charge_3d(
                    op, np.array([X[idx], Y[idx], Z[idx]]), normalized=True)
            report["field_charge"] = _pearson(coarse.values, charge)
            add(_dump_json(report, outdir / "profile_correlation.json"),
                "profile_correlation")
        if "comparison" in kinds and cfg.comparison.target != "none":
            # deposit directly at the comparison resolution: the CIC
            # variance reduction applies at the scale that is compared
            coarse = deposit_histogram(history.final,
                                       tuple(cfg.comparison.shape),
                                       center=tuple(cfg.domain.center),
                                       side=cfg.domain.side)
            target_grid = _comparison_target(
                cfg, op, tuple(cfg.solver.grid_shape)).coarsen(
                    tuple(cfg.comparison.shape))
            rep = compare(coarse, target_grid)
            add(_dump_json({"against": cfg.comparison.target, **rep.to_dict()},
                           outdir / "comparison.json"), "comparison")

    grid_result = None
    if cfg.solver.kind in ("grid", "both"):
        H0 = catalog_hamiltonian(cfg.hamiltonian.kind, **cfg.hamiltonian.params)
        f0 = _grid_initial(cfg, op)
        amp = cfg.noise.amplitude
        if H0 is None:
            # pure diffusion scales as amplitude^2 through the operator
            grid_op = op if amp == 1.0 else _scaled_operator(op, amp)
            rhs = DiffusionRHS(f0, grid_op)
        else:
            # amplitude folds into the noise coordinate map R -> amp * R
            d = np.asarray(cfg.noise.map.scale, dtype=float) \
                if cfg.noise.map.kind == "diagonal" else np.ones(3)
            R = None if amp == 1.0 and cfg.noise.map.kind == "identity" \
                else CoordinateMap.diagonal_map(amp * d)
            grid_op = op
            rhs = FullRHS(f0, op, H0, R=R,
                          beta=cfg.friction.beta if cfg.friction.enabled else 0.0,
                          adaptive=cfg.friction.adaptive)
        Wx, Wy, Wz = f0.sample_field(grid_op)
        wmax2 = float(np.max(Wx ** 2 + Wy ** 2 + Wz ** 2))
        if H0 is not None and amp != 1.0:
            wmax2 *= amp * amp
        traces = {"S": lambda d: entropy(d, "S")}
        if getattr(op, "lam", None) is not None:
            lam_vals = f0.sample_scalar(op.lam)
            traces["sigma_lambda"] = lambda d: entropy(d, "sigma_lambda", lam=lam_vals)
        dt = stable_dt(f0, rhs, wmax2)
        stop = cfg.solver.grid_stop_when_flat or None
        grid_result = evolve(f0, rhs, cfg.grid_t_final(), dt=dt,
                             trace_every=cfg.solver.grid_trace_every,
                             trace_fns=traces, stop_when_flat=stop)
        if "grid_final" in kinds:
            add(grid_result.final.save(outdir / "grid_final.bin"), "grid_final")
            add(outdir / "grid_final.bin.json", "sidecar")
        if "slice_z0" in kinds:
            add(grid_result.final.save_slice_csv(outdir / "grid_slice_z0.csv"),
                "slice")
        if "entropy_trace" in kinds:
            for name, vals in grid_result.traces.items():
                tr = EntropyTrace(grid_result.times, vals, kind=name)
                add(tr.save_csv(outdir / f"entropy_{name}.csv"), "entropy_trace")
        if "cross_compare" in kinds and history is not None:
            t_p = cfg.integrator.dt * cfg.integrator.steps
            t_g = grid_result.final.time
            if abs(t_p - t_g) <= 2.0 * dt:
                coarse = deposit_histogram(history.final,
                                           tuple(cfg.comparison.shape),
                                           center=tuple(cfg.domain.center),
                                           side=cfg.domain.side)
                rep = compare(coarse,
                              grid_result.final.coarsen(tuple(cfg.comparison.shape)))
                add(_dump_json({"particle_time": t_p, "grid_time": t_g,
                                **rep.to_dict()},
                               outdir / "cross_compare.json"), "cross_compare")

    add(_dump_json(cfg.to_dict(), outdir / "config_echo.json"), "config")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.name,
        "figure": cfg.figure,
        "outputs": [{"path": p.name, "kind": kind, "sha256": _sha256(p),
                     "bytes": p.stat().st_size}
                    for p, kind in sorted(artifacts, key=lambda a: a[0].name)],
    }
    _dump_json(manifest, outdir / "manifest.json")
    print(f"wrote {len(artifacts) + 1} artifacts to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _load_density(path):
    path = Path(path)
    if path.suffix != ".csv":
        return DensityGrid.load(path)
    # z = const CSV slice: x, y, f rows on a regular grid
    rows = path.read_text().strip().splitlines()[1:]
    data = np.array([[float(v) for v in r.split(",")] for r in rows])
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    if xs.size * ys.size != data.shape[0]:
        raise ConfigurationError(f"{path} is not a regular x,y grid slice")
    values = data[:, 2].reshape(xs.size, ys.size, 1)
    side = float(xs.size * (xs[1] - xs[0])) if xs.size > 1 else 1.0
    center = (float(xs.mean()), float(ys.mean()), 0.0)
    return DensityGrid((xs.size, ys.size, 1), center, side, values)


def run_compare(path_a, path_b, out=None):
    a = _load_density(path_a)
    b = _load_density(path_b)
    if a.shape != b.shape:
        # coarsen the finer grid when block-aligned
        if all(sa % sb == 0 for sa, sb in zip(a.shape, b.shape)):
            a = a.coarsen(b.shape)
        elif all(sb % sa == 0 for sa, sb in zip(a.shape, b.shape)):
            b = b.coarsen(a.shape)
    rep = compare(a, b)
    text = json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="helidiff", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="classify an operator, write a JSON report")
    c.add_argument("config", help="TOML config path or catalog operator name")
    c.add_argument("--out", help="report path (default: stdout)")

    r = sub.add_parser("run", help="run a scenario, write an artifact directory")
    r.add_argument("config", help="TOML config path or built-in scenario name")
    r.add_argument("--out", help="artifact directory (default: helidiff_<name>)")
    r.add_argument("--paper-scale", action="store_true",
                   help="full-scale ensemble (8e6 particles, side-6 box)")
    r.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config key (dotted path)")

    k = sub.add_parser("compare", help="compare two stored densities")
    k.add_argument("a")
    k.add_argument("b")
    k.add_argument("--out", help="report path (default: stdout)")
    return p


def main(argv=None):
    _set_threads()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "classify":
            return run_classify(args.config, args.out)
        if args.command == "run":
            return run_run(args.config, args.out, args.paper_scale, args.overrides)
        if args.command == "compare":
            return run_compare(args.a, args.b, args.out)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except NumericalFailureError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except HelidiffError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
