"""Command-line front end: config ingestion, orchestration, artifact emission.

Configs are JSON documents validated against a strict schema (unknown fields
rejected).  Every run writes a manifest recording the config hash, seed,
package version and artifact checksums; reruns with the same config and seed
reproduce all artifacts bit-identically regardless of thread count.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from . import limit, metrics, model as mdl, particle, pathint, pde, presets

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STRICT = 3
EXIT_MISSING = 4
EXIT_DOWNSTREAM = 5

_NUMERICS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "N": {"type": "integer", "minimum": 1},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "save_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "n_particles": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "a_max": {"type": "number", "exclusiveMinimum": 0},
        "n_a": {"type": "integer", "minimum": 1},
        "m_lo": {"type": "array", "items": {"type": "number"}},
        "m_hi": {"type": "array", "items": {"type": "number"}},
        "n_m": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "K_max": {"type": "integer", "minimum": 0},
        "tail_epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "t_eval": {"type": "number", "minimum": 0},
        "eval_points": {"type": "array",
                        "items": {"type": "array", "items": {"type": "number"}}},
        "N_ladder": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "n_replicas": {"type": "integer", "minimum": 1},
        "n_directions": {"type": "integer", "minimum": 1},
        "n_samples": {"type": "integer", "minimum": 1},
        "threads": {"type": "integer", "minimum": 1},
        "stride_a": {"type": "integer", "minimum": 1},
        "stride_m": {"type": "integer", "minimum": 1},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "command", "model"],
    "properties": {
        "schema_version": {"const": 1},
        "command": {"enum": ["simulate", "limit", "pde", "pathint",
                             "converge", "couple", "validate"]},
        "model": {
            "oneOf": [
                {"type": "object", "additionalProperties": False,
                 "required": ["preset"],
                 "properties": {"preset": {"enum": list(presets.PRESET_NAMES)}}},
                {"type": "object",
                 "not": {"required": ["preset"]}},
            ]
        },
        "numerics": _NUMERICS_SCHEMA,
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    },
}


class _StrictWarning(RuntimeError):
    pass


def _load_model(cfg):
    m = cfg["model"]
    if set(m.keys()) == {"preset"}:
        try:
            return presets.preset(m["preset"])
        except KeyError as exc:
            raise mdl.ConfigurationError(str(exc))
    return mdl.ModelSpec.from_dict(m)


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir, cfg_text, spec, seed, artifacts, wall):
    manifest = {
        "schema_version": 1,
        "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
        "spec_hash": spec.spec_hash(),
        "seed": seed,
        "package_version": __version__,
        "artifacts": {name: _sha256_file(outdir / name) for name in artifacts},
        "wall_time_s": wall,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _grid_from_numerics(num, spec):
    return pde.Grid(
        a_max=num.get("a_max", 15.0),
        n_a=num.get("n_a", int(round(num.get("a_max", 15.0) / num.get("dt", 0.01)))),
        m_lo=tuple(num.get("m_lo", [-3.0] * spec.d)),
        m_hi=tuple(num.get("m_hi", [1.0] * spec.d)),
        n_m=tuple(num.get("n_m", [200] * spec.d)),
        T=num.get("T", 5.0),
        dt=num.get("dt", 0.01),
    )


def _cmd_validate(spec, num, seed, outdir):
    report = mdl.validate_assumptions(spec, n_samples=num.get("n_samples", 10_000),
                                      seed=seed)
    with open(outdir / "validation.json", "w") as fh:
        fh.write(report.to_json(indent=2, sort_keys=True))
    if not report.all_pass:
        raise _ValidationFailure("assumption validation failed")
    return ["validation.json"]


class _ValidationFailure(RuntimeError):
    pass


def _cmd_simulate(spec, num, seed, outdir):
    rec = particle.simulate_network(spec, num["N"], num["T"], seed,
                                    save_times=num.get("save_times", [num["T"]]))
    particle.events_to_csv(rec, outdir / "events.csv")
    particle.snapshots_to_csv(rec, outdir / "snapshots.csv")
    with open(outdir / "run.json", "w") as fh:
        json.dump({"N": rec.N, "T": rec.T, "seed": rec.seed,
                   "n_events": len(rec.events),
                   "x_emp": [float(v) for v in rec.x_path_emp]},
                  fh, indent=2, sort_keys=True)
    return ["events.csv", "snapshots.csv", "run.json"]


def _cmd_limit(spec, num, seed, outdir):
    x, report = limit.solve_x_picard(
        spec, num["T"], dt=num.get("dt"),
        n_particles=num.get("n_particles", 20_000), seed=seed,
        tol=num.get("tol", 1e-4), max_iter=num.get("max_iter", 25))
    x.to_csv(outdir / "xpath.csv")
    with open(outdir / "picard.json", "w") as fh:
        fh.write(report.to_json(indent=2))
    if not report.converged:
        raise _StrictWarning("fixed-point iteration did not reach tolerance")
    return ["xpath.csv", "picard.json"]


def _cmd_pde(spec, num, seed, outdir):
    grid = _grid_from_numerics(num, spec)
    save = num.get("save_times", [grid.T])
    sol = pde.solve_alm_pde(spec, grid, save_times=save)
    pde.density_to_csv(sol, outdir / "density.csv",
                       stride_a=num.get("stride_a", 10),
                       stride_m=num.get("stride_m", 4))
    sol.x.to_csv(outdir / "xpath.csv")
    with open(outdir / "diagnostics.json", "w") as fh:
        json.dump({
            "mass_trace": [float(v) for v in sol.mass_trace],
            "flux_rel": [None if np.isnan(v) else float(v) for v in sol.flux_rel],
            "scale_trace": [float(v) for v in sol.scale_trace],
            "clip_mass": float(sol.clip_mass),
        }, fh, indent=2, sort_keys=True)
    worst = float(np.max(np.abs(sol.mass_trace - 1.0)))
    if worst > 1e-3:
        raise _StrictWarning(f"mass drift {worst:.2e} exceeds 1e-3")
    return ["density.csv", "xpath.csv", "diagnostics.json"]


def _cmd_pathint(spec, num, seed, outdir):
    T = num.get("T", 1.0)
    eps = num.get("tail_epsilon", 1e-4)
    kmax = num.get("K_max", pathint.jump_count_tail(T, spec.f_max, eps))
    cfg = pathint.PathIntegralConfig(K_max=kmax, tail_epsilon=eps, seed=seed)
    x = limit.XPath(np.array([0.0, T]), np.zeros(2))
    rows = []
    for pt in num.get("eval_points", [[T, T / 2.0, 0.0]]):
        t, a = pt[0], pt[1]
        m = np.asarray(pt[2:], dtype=float)
        val, bound = pathint.density_at(t, a, m, spec.init_law, x, cfg, spec)
        rows.append((t, a, list(m), val, bound))
    with open(outdir / "pathint.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "a"] + [f"m{k+1}" for k in range(spec.d)]
                   + ["rho", "truncation_bound"])
        for t, a, m, val, bound in rows:
            w.writerow([repr(float(t)), repr(float(a))]
                       + [repr(float(v)) for v in m]
                       + [repr(float(val)), repr(float(bound))])
    return ["pathint.csv"]


def _cmd_converge(spec, num, seed, outdir, threads):
    grid = _grid_from_numerics(num, spec)
    t_eval = num.get("t_eval", grid.T)
    sol = pde.solve_alm_pde(spec, grid, save_times=[t_eval])
    cloud = metrics.grid_to_cloud(grid.a_nodes,
                                  [grid.m_nodes(k) for k in range(grid.d)],
                                  sol.rho_at(t_eval))
    table = metrics.convergence_study(
        spec, num.get("N_ladder", [100, 400]), t_eval,
        num.get("n_replicas", 4), seed, cloud,
        n_directions=num.get("n_directions", 64), threads=threads)
    table.to_csv(outdir / "convergence.csv")
    with open(outdir / "convergence.json", "w") as fh:
        fh.write(table.summary_json(indent=2, sort_keys=True))
    return ["convergence.csv", "convergence.json"]


def _cmd_couple(spec, num, seed, outdir, threads):
    T = num.get("T", 5.0)
    x, report = limit.solve_x_picard(
        spec, T, dt=num.get("dt"), n_particles=num.get("n_particles", 20_000),
        seed=seed, tol=num.get("tol", 1e-4), max_iter=num.get("max_iter", 25))
    table = metrics.coupling_decay_study(
        spec, num.get("N_ladder", [100, 400]), T, x,
        num.get("n_replicas", 4), seed, threads=threads)
    table.to_csv(outdir / "coupling.csv")
    with open(outdir / "coupling.json", "w") as fh:
        fh.write(table.summary_json(indent=2, sort_keys=True))
    return ["coupling.csv", "coupling.json"]


def run(config_path, seed_override=None, out_override=None, strict=False,
        threads_override=None):
    """Executes one configured pipeline; returns a process exit code."""
    path = Path(config_path)
    if not path.exists():
        print(f"error: config file {path} not found", file=sys.stderr)
        return EXIT_MISSING
    cfg_text = path.read_text()
    try:
        cfg = json.loads(cfg_text)
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        spec = _load_model(cfg)
    except (json.JSONDecodeError, jsonschema.ValidationError,
            mdl.ConfigurationError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    seed = seed_override if seed_override is not None else cfg.get("seed", 0)
    outdir = Path(out_override or cfg.get("out", "out"))
    outdir.mkdir(parents=True, exist_ok=True)
    num = cfg.get("numerics", {})
    threads = threads_override or num.get("threads", 1)
    command = cfg["command"]
    start = time.monotonic()
    strict_msg = None
    try:
        if command == "validate":
            artifacts = _cmd_validate(spec, num, seed, outdir)
        elif command == "simulate":
            artifacts = _cmd_simulate(spec, num, seed, outdir)
        elif command == "limit":
            artifacts = _cmd_limit(spec, num, seed, outdir)
        elif command == "pde":
            artifacts = _cmd_pde(spec, num, seed, outdir)
        elif command == "pathint":
            artifacts = _cmd_pathint(spec, num, seed, outdir)
        elif command == "converge":
            artifacts = _cmd_converge(spec, num, seed, outdir, threads)
        else:
            artifacts = _cmd_couple(spec, num, seed, outdir, threads)
    except _ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _StrictWarning as exc:
        # partial artifacts may exist; a strict run treats the warning as fatal
        strict_msg = str(exc)
        artifacts = [p.name for p in sorted(outdir.iterdir())
                     if p.name != "manifest.json"]
    except (mdl.ConfigurationError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # downstream numerical failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOWNSTREAM
    wall = time.monotonic() - start
    _write_manifest(outdir, cfg_text, spec, seed, artifacts, wall)
    if strict_msg is not None:
        print(f"warning: {strict_msg}", file=sys.stderr)
        if strict:
            return EXIT_STRICT
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="almsim",
        description="Simulation and density-equation toolkit for interacting "
                    "point-process networks with age and leaky memory.")
    parser.add_argument("config", help="path to a JSON run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--strict", action="store_true",
                        help="treat numerical warnings as errors")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for replica-parallel commands")
    args = parser.parse_args(argv)
    return run(args.config, seed_override=args.seed, out_override=args.out,
               strict=args.strict, threads_override=args.threads)


if __name__ == "__main__":
    sys.exit(main())
