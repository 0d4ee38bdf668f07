"""Batch front end: scenario configs in, JSON reports and CSV dumps out.

One process per run, subcommands {approx, bump, dgz, bench}. Configs
are JSON with four blocks (manifold, function, tolerance, run) plus a
subcommand block where needed; unknown keys are rejected so typos fail
loudly. All randomness hangs off the single seed, and report.json is
bit-identical across repeated runs of the same config and seed (wall
times go to separate artifacts, never into report.json).

Exit status: 0 all pass flags true, 1 pipeline/verification failure,
2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import DEFAULTS
from .envelope import bench_envelope
from .errors import ConfigError, SmoothLipError
from .field import FunctionOracle, GridField, TangentGrid, write_field_csv
from .glue import ApproxRequest, dgz_perturb, smooth_lipschitz_approx
from .manifold import Euclidean, FlatTorus, ManifoldModel, PoincareDisk, Sphere
from .unity import uniform_bump

SCHEMA_VERSION = 1


def _require_keys(block: dict, allowed: set, required: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(block)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def build_model(block: dict) -> ManifoldModel:
    _require_keys(block, {"kind", "dim", "box", "radius", "periods", "scale",
                          "region_radius"}, {"kind"}, "manifold")
    kind = block["kind"]
    if kind == "euclidean":
        return Euclidean(dim=int(block.get("dim", 1)), box=block.get("box"))
    if kind == "sphere":
        return Sphere(radius=float(block.get("radius", 1.0)))
    if kind == "flat_torus":
        return FlatTorus(periods=block.get("periods", [2 * np.pi]))
    if kind == "poincare_disk":
        return PoincareDisk(scale=float(block.get("scale", 1.0)),
                            region_radius=float(block.get("region_radius", 2.0)))
    raise ConfigError(f"manifold: unknown kind {kind!r}")


def build_oracle(block: dict, model: ManifoldModel) -> FunctionOracle:
    _require_keys(block, {"kind", "point", "points", "values", "slope",
                          "offset", "clamp", "value", "lipschitz"},
                  {"kind"}, "function")
    kind = block["kind"]
    if kind == "constant":
        return FunctionOracle.constant(float(block.get("value", 0.0)))
    if kind == "distance_to_point":
        return FunctionOracle.distance_to_point(model, block["point"])
    if kind == "distance_to_set":
        return FunctionOracle.distance_to_set(model, block["points"])
    if kind == "ramp":
        lo, hi = block.get("clamp", [-np.inf, np.inf])
        return FunctionOracle.ramp(model, block["point"],
                                   slope=float(block.get("slope", 1.0)),
                                   offset=float(block.get("offset", 0.0)),
                                   lo=float(lo), hi=float(hi))
    if kind == "piecewise_linear":
        return FunctionOracle.piecewise_linear(
            model, block["points"], block["values"],
            lipschitz=float(block["lipschitz"]))
    raise ConfigError(f"function: unknown kind {kind!r}")


def build_tolerance(block: dict, model: ManifoldModel):
    _require_keys(block, {"kind", "value", "base", "slope", "point", "clamp"},
                  {"kind"}, "tolerance")
    kind = block["kind"]
    if kind == "constant":
        value = float(block["value"])
        if value <= 0:
            raise ConfigError("tolerance: constant value must be positive")
        return value
    if kind == "radial":
        base = float(block["base"])
        slope = float(block.get("slope", 0.0))
        anchor = np.asarray(block["point"], dtype=float)
        lo, hi = block.get("clamp", [base / 10.0, np.inf])
        lo, hi = float(lo), float(hi)
        if lo <= 0:
            raise ConfigError("tolerance: radial clamp floor must be positive")

        def eps(pts):
            return np.clip(base + slope * model.distance(anchor[None, :], pts), lo, hi)

        return eps
    raise ConfigError(f"tolerance: unknown kind {kind!r}")


_RUN_KEYS = {"r", "resolution", "seed", "cover_points", "verify_points",
             "local_pairs", "global_pairs", "out", "plateau_scale",
             "enforce_f_oscillation", "pair_floor_scale"}


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    return cfg


def _dump_report(payload: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"schema": SCHEMA_VERSION, **payload}
    with open(out_dir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dump_sample_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def run_approx(cfg: dict, out_dir: Path, seed_override: int | None) -> int:
    _require_keys(cfg, {"manifold", "function", "tolerance", "run"},
                  {"manifold", "function", "tolerance", "run"}, "config")
    run = dict(cfg["run"])
    _require_keys(run, _RUN_KEYS, {"r"}, "run")
    model = build_model(cfg["manifold"])
    oracle = build_oracle(cfg["function"], model)
    eps = build_tolerance(cfg["tolerance"], model)
    r = float(run["r"])
    if r <= 0:
        raise ConfigError("run: r must be positive")
    seed = int(seed_override if seed_override is not None else run.get("seed", 0))

    region = model.sample_region(int(run.get("cover_points", 20000)), quasi=True)
    if cfg["function"].get("kind") == "distance_to_point":
        # Seed the greedy cover at the function's anchor so its cone tip
        # sits on the first chart's plateau.
        anchor = np.asarray(cfg["function"]["point"], dtype=float)
        region = np.vstack([anchor[None, :], region])

    req = ApproxRequest(
        model=model, oracle=oracle, eps_fn=eps, r=r, region=region,
        resolution=int(run.get("resolution", 129)),
        plateau_scale=float(run.get("plateau_scale", DEFAULTS.plateau_scale)),
        enforce_f_oscillation=bool(run.get("enforce_f_oscillation", False)),
        verify_points=int(run.get("verify_points", 10000)),
        local_pairs=int(run.get("local_pairs", 1000)),
        global_pairs=int(run.get("global_pairs", 100)),
        pair_floor_scale=float(run.get("pair_floor_scale",
                                       DEFAULTS.pair_floor_scale)),
        seed=seed,
    )
    glued, report = smooth_lipschitz_approx(req)

    for row in report.charts:
        print(f"chart {row.index:4d}: delta={row.delta:.5f} "
              f"tol={row.tolerance:.3e} node_err={row.node_error:.3e} "
              f"lip={row.lip_measured:.5f}/{row.lip_bound:.5f} "
              f"{'ok' if row.error_ok and row.lip_ok else 'FAIL'}")

    fields_dir = out_dir / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed + 1)
    viz = model.sample_region(int(run.get("verify_points", 10000)) // 2,
                              rng, quasi=True)
    f_viz = oracle(viz)
    g_viz = glued.evaluate(viz, allow_uncovered=True)
    coords = [viz[:, k] for k in range(viz.shape[1])]
    _dump_sample_csv(fields_dir / "glued.csv",
                     [f"coord{k}" for k in range(viz.shape[1])] + ["f", "g"],
                     coords + [f_viz, g_viz])
    write_field_csv(glued.fields[0], fields_dir / "chart0.csv")

    payload = {
        "scenario": cfg,
        "seed": seed,
        "n_charts": len(glued.atlas.charts),
        "report": report.to_dict(),
    }
    _dump_report(payload, out_dir)
    print(f"sup_error={report.sup_error:.6g} "
          f"lipschitz={report.lipschitz_estimate:.6g}/{report.lipschitz_bound:.6g} "
          f"pass={report.overall_pass}")
    return 0 if report.overall_pass else 1


def run_bump(cfg: dict, out_dir: Path, seed_override: int | None) -> int:
    _require_keys(cfg, {"manifold", "bump", "run"}, {"manifold", "bump"}, "config")
    bump_cfg = dict(cfg["bump"])
    _require_keys(bump_cfg, {"center", "delta", "R", "eps", "resolution",
                             "pairs"}, {"center", "delta", "R"}, "bump")
    run = dict(cfg.get("run", {}))
    _require_keys(run, _RUN_KEYS, set(), "run")
    model = build_model(cfg["manifold"])
    seed = int(seed_override if seed_override is not None else run.get("seed", 0))
    center = np.asarray(bump_cfg["center"], dtype=float)
    delta = float(bump_cfg["delta"])
    R = float(bump_cfg["R"])

    bump = uniform_bump(model, center, delta, R,
                        eps=bump_cfg.get("eps"),
                        resolution=int(bump_cfg.get("resolution", 65)),
                        seed=seed)
    rng = np.random.default_rng(seed)
    grad_est = bump.sample_lipschitz(n_pairs=int(bump_cfg.get("pairs", 2000)),
                                     rng=rng)
    center_val = float(bump(center))
    ring = model.ball_sample(center, min(2 * delta,
                                         0.9 * model.injectivity_radius()),
                             2000, rng)
    far = ring[model.distance(center[None, :], ring) >= delta]
    outside_max = float(np.max(np.abs(bump(far)))) if len(far) else 0.0

    ok = (center_val >= 1.0 - 1e-9 and outside_max == 0.0
          and grad_est <= R / delta)
    payload = {
        "scenario": cfg,
        "seed": seed,
        "bump": {
            "eps": bump.eps,
            "center_value": center_val,
            "max_outside_delta_ball": outside_max,
            "gradient_estimate": grad_est,
            "gradient_bound": R / delta,
            "pass": bool(ok),
        },
        "approx_report": bump.report.to_dict(),
    }
    _dump_report(payload, out_dir)
    print(f"b(p)={center_val:.9f} outside_max={outside_max} "
          f"grad={grad_est:.4f}<={R / delta:.4f} pass={ok}")
    return 0 if ok else 1


def run_dgz(cfg: dict, out_dir: Path, seed_override: int | None) -> int:
    _require_keys(cfg, {"manifold", "function", "dgz", "run"},
                  {"manifold", "function", "dgz"}, "config")
    dgz_cfg = dict(cfg["dgz"])
    _require_keys(dgz_cfg, {"delta", "R", "sample_points", "iter_cap",
                            "bump_resolution"}, {"delta"}, "dgz")
    run = dict(cfg.get("run", {}))
    _require_keys(run, _RUN_KEYS, set(), "run")
    model = build_model(cfg["manifold"])
    oracle = build_oracle(cfg["function"], model)
    seed = int(seed_override if seed_override is not None else run.get("seed", 0))
    delta = float(dgz_cfg["delta"])

    region = model.sample_region(int(dgz_cfg.get("sample_points", 257)), quasi=True)
    result = dgz_perturb(model, oracle, region, delta,
                         R=float(dgz_cfg.get("R", 1.2)),
                         iter_cap=int(dgz_cfg.get("iter_cap", 50)),
                         bump_resolution=int(dgz_cfg.get("bump_resolution", 65)),
                         seed=seed)
    ok = (result.converged and result.margin > 0.0
          and result.sup_norm < delta and result.lipschitz_estimate < delta)
    payload = {
        "scenario": cfg,
        "seed": seed,
        "dgz": {
            "minimizer": list(result.minimizer.coords),
            "margin": result.margin,
            "iterations": result.iterations,
            "sup_norm": result.sup_norm,
            "lipschitz_estimate": result.lipschitz_estimate,
            "delta": delta,
            "pass": bool(ok),
        },
    }
    _dump_report(payload, out_dir)
    print(f"minimizer={result.minimizer.coords} margin={result.margin:.6g} "
          f"|phi|={result.sup_norm:.6g} lip={result.lipschitz_estimate:.6g} pass={ok}")
    return 0 if ok else 1


def run_bench(cfg: dict, out_dir: Path, seed_override: int | None) -> int:
    _require_keys(cfg, {"bench", "run"}, {"bench"}, "config")
    bench_cfg = dict(cfg["bench"])
    _require_keys(bench_cfg, {"sizes", "bruteforce_max", "repeats"},
                  {"sizes"}, "bench")
    run = dict(cfg.get("run", {}))
    _require_keys(run, _RUN_KEYS, set(), "run")
    seed = int(seed_override if seed_override is not None else run.get("seed", 0))
    brute_max = int(bench_cfg.get("bruteforce_max", 1 << 14))
    rows = []
    for n in bench_cfg["sizes"]:
        row = bench_envelope(int(n), repeats=int(bench_cfg.get("repeats", 3)),
                             seed=seed, include_bruteforce=int(n) <= brute_max)
        rows.append(row)
        print(json.dumps(row))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "bench.json", "w") as fh:
        json.dump({"schema": SCHEMA_VERSION, "runs": rows}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smoothlip",
        description="Smooth Lipschitz approximation scenarios on model manifolds")
    parser.add_argument("command", choices=["approx", "bump", "dgz", "bench"])
    parser.add_argument("--config", required=True, help="scenario JSON path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="numba thread count")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        if args.threads is not None:
            import numba
            numba.set_num_threads(max(1, args.threads))
        out_dir = Path(args.out if args.out is not None
                       else cfg.get("run", {}).get("out", "out"))
        handler = {"approx": run_approx, "bump": run_bump,
                   "dgz": run_dgz, "bench": run_bench}[args.command]
        return handler(cfg, out_dir, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SmoothLipError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
