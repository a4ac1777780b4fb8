"""Command-line front end: solve grids, trace paths, run benchmark tables.

Verbs
-----
``quasipot solve``  compute a quasi-potential grid and write it out
``quasipot map``    trace a minimum action path on a solved grid
``quasipot bench``  run (method, N, K) sweeps and report errors/timings

Runs are configured by a flat ``key = value`` file (``--config``) plus
command-line overrides; every key has a default except the problem
definition and the mesh size.  Grid artifacts come in two formats:

* ``csv``: one file ``<prefix>_grid.csv`` with header
  ``i,j,x1,x2,U,state,update_length``, 17-significant-digit floats, rows
  in row-major order (the x1 index is the slow axis).
* ``raw``: ``<prefix>_U.raw`` (little-endian float64 in linearization
  order), ``<prefix>_state.raw`` (uint8), optional
  ``<prefix>_lengths.raw``, and a JSON sidecar ``<prefix>_meta.json``
  with the mesh geometry and the run configuration.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure
(unstable equilibrium, initial curve missing the mesh, start point outside
the computed region).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass

import numpy as np

from .field import (EXACT_SOLUTIONS, FieldEvalError, FieldParseError,
                    VectorField, builtin_field, parse_field)
from .mesh import Mesh
from .postprocess import (error_metrics, fit_power_law,
                          geometric_action, trace_map)
from .solver import (CurveInit, InitializationError, PointInit, SolutionGrid,
                     SolverConfig, rule_of_thumb_K, solve,
                     unit_circle_polyline, METHODS)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_DOMAIN_DEFAULTS = {"linear": "-1,1,-1,1", "limit_cycle": "-2,2,-2,2"}


class ConfigError(ValueError):
    """Bad configuration or usage; maps to exit code 2."""


@dataclass
class RunConfig:
    """Flat run configuration; round-trips losslessly through text files.

    ``problem`` selects a built-in field, optionally with parameters
    ("linear", "linear:a=4"); leave it empty and give ``b1``/``b2``
    expressions for a custom field.  "auto" values are resolved from the
    problem at run time.
    """

    problem: str = ""
    b1: str = ""
    b2: str = ""
    domain: str = "auto"
    n: int = 0
    method: str = "olim-mid"
    K: str = "auto"
    init_point: str = "auto"
    init_curve: str = "auto"
    stop: str = "boundary"
    exact: str = "auto"
    out_prefix: str = "run"
    format: str = "csv"
    record_lengths: bool = False

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {ln}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {ln}: unknown key {key!r}")
            f = known[key]
            if f.type in ("int", int):
                kwargs[key] = int(val)
            elif f.type in ("bool", bool):
                kwargs[key] = val.lower() in ("true", "1", "yes")
            else:
                kwargs[key] = val
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _parse_builtin(problem: str) -> VectorField:
    name, _, params = problem.partition(":")
    kwargs = {}
    for item in filter(None, params.split(",")):
        if "=" not in item:
            raise ConfigError(f"malformed problem parameter {item!r}")
        k, v = item.split("=", 1)
        kwargs[k.strip()] = float(v)
    try:
        return builtin_field(name.strip(), **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _parse_floats(text: str, count: int, what: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != count:
        raise ConfigError(f"{what} needs {count} comma-separated values, "
                          f"got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{what}: could not parse {text!r}") from None


@dataclass
class ResolvedRun:
    mesh: Mesh
    field: VectorField
    config: SolverConfig
    exact: object  # callable or None
    K: int


def resolve(cfg: RunConfig) -> ResolvedRun:
    """Turn a RunConfig into concrete solver inputs."""
    if cfg.problem:
        field = _parse_builtin(cfg.problem)
        base = cfg.problem.partition(":")[0].strip()
    elif cfg.b1 or cfg.b2:
        if not (cfg.b1 and cfg.b2):
            raise ConfigError("custom fields need both b1 and b2")
        field = parse_field(cfg.b1, cfg.b2)
        base = ""
    else:
        raise ConfigError("no problem given: set problem or b1/b2")

    if cfg.n < 2:
        raise ConfigError("mesh size n must be at least 2")
    domain = cfg.domain
    if domain == "auto":
        domain = _DOMAIN_DEFAULTS.get(base, "-1,1,-1,1")
    x1min, x1max, x2min, x2max = _parse_floats(domain, 4, "domain")
    try:
        mesh = Mesh(x1min, x1max, x2min, x2max, cfg.n, cfg.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}")
    if cfg.K == "auto":
        k = rule_of_thumb_K(cfg.method, cfg.n)
    else:
        try:
            k = int(cfg.K)
        except ValueError:
            raise ConfigError(f"K must be an integer or 'auto', "
                              f"got {cfg.K!r}") from None
        if k < 1:
            raise ConfigError("K must be positive")

    # initialization: explicit flags win; otherwise problem-appropriate
    if cfg.init_curve not in ("", "auto"):
        poly = np.loadtxt(cfg.init_curve, delimiter=",", ndmin=2)
        init = CurveInit(poly)
    elif cfg.init_point not in ("", "auto"):
        init = PointInit(_parse_floats(cfg.init_point, 2, "init_point"))
    elif base == "limit_cycle":
        init = CurveInit(unit_circle_polyline(720))
    else:
        init = PointInit((0.0, 0.0))

    exact_name = cfg.exact
    if exact_name == "auto":
        exact_name = base if base in EXACT_SOLUTIONS else "none"
    if exact_name not in ("none", *EXACT_SOLUTIONS):
        raise ConfigError(f"unknown exact solution {cfg.exact!r}")
    exact = EXACT_SOLUTIONS.get(exact_name)

    if cfg.stop not in ("boundary", "exhaust"):
        raise ConfigError("stop must be 'boundary' or 'exhaust'")
    if cfg.format not in ("csv", "raw"):
        raise ConfigError("format must be 'csv' or 'raw'")
    sc = SolverConfig(method=cfg.method, K=k, init=init, stop=cfg.stop,
                      record_update_lengths=cfg.record_lengths)
    return ResolvedRun(mesh, field, sc, exact, k)


# ---------------------------------------------------------------------------
# artifact writers


def _write_grid_csv(path: str, sol: SolutionGrid) -> None:
    msh = sol.mesh
    with open(path, "w") as fh:
        fh.write("i,j,x1,x2,U,state,update_length\n")
        for idx in range(msh.n_points):
            i, j = divmod(idx, msh.n2)
            x1 = msh.x1_min + i * msh.h1
            x2 = msh.x2_min + j * msh.h2
            fh.write(f"{i},{j},{x1:.17g},{x2:.17g},{sol.u[idx]:.17g},"
                     f"{int(sol.state[idx])},{sol.update_length[idx]:.17g}\n")


def _meta_dict(sol: SolutionGrid, cfg: RunConfig) -> dict:
    msh = sol.mesh
    init = sol.config.init
    if isinstance(init, PointInit):
        init_meta = {"type": "point", "x0": list(init.x0)}
    else:
        init_meta = {"type": "curve", "polyline": init.polyline.tolist()}
    return {
        "format": "quasipot-raw-1",
        "order": "row-major, index = i*n2 + j (x1 index is the slow axis)",
        "dtype": "<f8",
        "n1": msh.n1, "n2": msh.n2,
        "x1_min": msh.x1_min, "x1_max": msh.x1_max,
        "x2_min": msh.x2_min, "x2_max": msh.x2_max,
        "method": sol.config.method, "K": sol.config.K,
        "stop": sol.config.stop,
        "problem": cfg.problem, "b1": cfg.b1, "b2": cfg.b2,
        "init": init_meta,
    }


def _write_raw(prefix: str, sol: SolutionGrid, cfg: RunConfig) -> None:
    sol.u.astype("<f8").tofile(f"{prefix}_U.raw")
    sol.state.astype(np.uint8).tofile(f"{prefix}_state.raw")
    if cfg.record_lengths:
        sol.update_length.astype("<f8").tofile(f"{prefix}_lengths.raw")
    with open(f"{prefix}_meta.json", "w") as fh:
        json.dump(_meta_dict(sol, cfg), fh, indent=1)


def _summary(sol: SolutionGrid, cfg: RunConfig, exact) -> dict:
    out = {
        "config": dataclasses.asdict(cfg),
        "method": sol.config.method,
        "K": sol.config.K,
        "n1": sol.mesh.n1, "n2": sol.mesh.n2, "h": sol.mesh.h,
        "n_accepted": sol.n_accepted,
        "n_init": sol.init_count,
        "boundary_index": sol.boundary_index,
        "solve_seconds": sol.solve_seconds,
        "max_update_length": sol.max_update_length(),
        "update_length_bound": sol.update_length_bound(),
        "max_accept_decrease": sol.max_accept_decrease,
        "audit": {
            "state_violations": sol.state_violations,
            "front_violations": sol.front_violations,
            "heap_violations": sol.heap_violations,
            "lower_bound_violations": sol.lower_bound_violations,
            "root_warnings": sol.root_warnings,
        },
    }
    if exact is not None:
        out["errors"] = error_metrics(sol, exact)
    return out


def _load_raw(prefix: str):
    """Rebuild (SolutionGrid, VectorField) from raw artifacts."""
    with open(f"{prefix}_meta.json") as fh:
        meta = json.load(fh)
    mesh = Mesh(meta["x1_min"], meta["x1_max"], meta["x2_min"],
                meta["x2_max"], meta["n1"], meta["n2"])
    u = np.fromfile(f"{prefix}_U.raw", dtype="<f8")
    state = np.fromfile(f"{prefix}_state.raw", dtype=np.uint8)
    if u.size != mesh.n_points or state.size != mesh.n_points:
        raise ConfigError(f"grid files under {prefix!r} do not match the "
                          f"mesh in the sidecar")
    if meta["problem"]:
        field = _parse_builtin(meta["problem"])
    else:
        field = parse_field(meta["b1"], meta["b2"])
    if meta["init"]["type"] == "point":
        init = PointInit(tuple(meta["init"]["x0"]))
    else:
        init = CurveInit(np.asarray(meta["init"]["polyline"]))
    config = SolverConfig(method=meta["method"], K=meta["K"], init=init,
                          stop=meta["stop"])
    n = mesh.n_points
    sol = SolutionGrid(
        mesh=mesh, config=config, field_name=field.name, u=u, state=state,
        accept_order=np.full(n, -1, dtype=np.int64),
        update_length=np.zeros(n), update_kind=np.zeros(n, dtype=np.uint8),
        update_src0=np.full(n, -1, dtype=np.int64),
        update_src1=np.full(n, -1, dtype=np.int64),
        n_accepted=0, boundary_index=None, max_accept_decrease=0.0,
        state_violations=0, front_violations=0, heap_violations=0,
        root_warnings=0, lower_bound_violations=0, solve_seconds=0.0)
    return sol, field


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig) -> int:
    run = resolve(cfg)
    sol = solve(run.mesh, run.field, run.config)
    if cfg.format == "csv":
        _write_grid_csv(f"{cfg.out_prefix}_grid.csv", sol)
    else:
        _write_raw(cfg.out_prefix, sol, cfg)
    summary = _summary(sol, cfg, run.exact)
    with open(f"{cfg.out_prefix}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    err = summary.get("errors")
    msg = (f"  max_err={err['max_abs']:.4e} rms={err['rms']:.4e}"
           if err else "")
    print(f"solved {run.mesh.n1}x{run.mesh.n2} {cfg.method} K={run.K} "
          f"in {sol.solve_seconds:.2f}s{msg}")
    return EXIT_OK


def cmd_map(cfg: RunConfig, start, grid_prefix: str | None) -> int:
    if grid_prefix:
        sol, field = _load_raw(grid_prefix)
    else:
        run = resolve(cfg)
        sol = solve(run.mesh, run.field, run.config)
        field = run.field
    try:
        path = trace_map(sol, field, start)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    action = geometric_action(path, field)
    with open(f"{cfg.out_prefix}_path.csv", "w") as fh:
        fh.write("x1,x2\n")
        for p in path.points:
            fh.write(f"{p[0]:.17g},{p[1]:.17g}\n")
    summary = {
        "start": list(start),
        "n_points": len(path),
        "status": path.status.value,
        "geometric_action": action,
        "rk4_step": path.step,
    }
    with open(f"{cfg.out_prefix}_map_summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    print(f"path: {len(path)} points, {path.status.value}, "
          f"action={action:.6g}")
    return EXIT_OK


_SUITES = {
    "linear": [("linear", "linear")],
    "limit_cycle": [("limit_cycle", "limit_cycle")],
    "both": [("linear", "linear"), ("limit_cycle", "limit_cycle")],
}


def cmd_bench(suite: str, ns: list[int], k_policy: str, methods: list[str],
              out_prefix: str) -> int:
    if suite not in _SUITES:
        raise ConfigError(f"unknown suite {suite!r}")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    rows = []
    warmed = set()
    for problem, exact_name in _SUITES[suite]:
        for method in methods:
            for n in ns:
                if k_policy == "auto":
                    k = rule_of_thumb_K(method, n)
                else:
                    k = int(k_policy)
                cfg = RunConfig(problem=problem, n=n, method=method,
                                K=str(k), exact=exact_name)
                try:
                    run = resolve(cfg)
                    if method not in warmed:
                        # compile outside the timed call
                        tiny = RunConfig(problem=problem, n=17,
                                         method=method, K="2")
                        tr = resolve(tiny)
                        solve(tr.mesh, tr.field, tr.config)
                        warmed.add(method)
                    sol = solve(run.mesh, run.field, run.config)
                    err = error_metrics(sol, run.exact)
                    rows.append({
                        "problem": problem, "method": method, "n": n, "K": k,
                        "max_abs": err["max_abs"], "rms": err["rms"],
                        "seconds": sol.solve_seconds, "error": "",
                    })
                except (ConfigError, InitializationError) as exc:
                    rows.append({"problem": problem, "method": method,
                                 "n": n, "K": k, "max_abs": float("nan"),
                                 "rms": float("nan"),
                                 "seconds": float("nan"),
                                 "error": str(exc)})

    with open(f"{out_prefix}_bench.csv", "w") as fh:
        fh.write("problem,method,n,K,max_abs,rms,seconds,error\n")
        for r in rows:
            fh.write(f"{r['problem']},{r['method']},{r['n']},{r['K']},"
                     f"{r['max_abs']:.17g},{r['rms']:.17g},"
                     f"{r['seconds']:.4f},{r['error']}\n")

    fits = {}
    for problem, _ in _SUITES[suite]:
        for method in methods:
            ok = [r for r in rows
                  if r["problem"] == problem and r["method"] == method
                  and not r["error"] and np.isfinite(r["max_abs"])]
            if len(ok) >= 3:
                c, q = fit_power_law([r["n"] for r in ok],
                                     [r["max_abs"] for r in ok])
                fits[f"{problem}/{method}"] = {"C": c, "q": q}
    with open(f"{out_prefix}_bench.json", "w") as fh:
        json.dump({"rows": rows, "fits": fits}, fh, indent=1)

    lines = [f"{'problem':<12} {'method':<9} {'n':>5} {'K':>3} "
             f"{'max error':>12} {'rms error':>12} {'seconds':>8}"]
    for r in rows:
        lines.append(f"{r['problem']:<12} {r['method']:<9} {r['n']:>5} "
                     f"{r['K']:>3} {r['max_abs']:>12.4e} {r['rms']:>12.4e} "
                     f"{r['seconds']:>8.2f}" + (f"  {r['error']}"
                                                if r["error"] else ""))
    for key, fit in fits.items():
        lines.append(f"fit {key}: E = {fit['C']:.3g} * N^(-{fit['q']:.3f})")
    table = "\n".join(lines)
    with open(f"{out_prefix}_bench.txt", "w") as fh:
        fh.write(table + "\n")
    print(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--problem", help="built-in problem, e.g. linear or "
                                     "linear:a=4")
    p.add_argument("--b1", help="expression for the first drift component")
    p.add_argument("--b2", help="expression for the second drift component")
    p.add_argument("--domain", help="x1min,x1max,x2min,x2max")
    p.add_argument("--n", type=int, help="mesh points per axis")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--K", help="update factor (integer or 'auto')")
    p.add_argument("--init-point", dest="init_point", help="x,y")
    p.add_argument("--init-curve", dest="init_curve",
                   help="CSV of closed polyline vertices")
    p.add_argument("--stop", choices=("boundary", "exhaust"))
    p.add_argument("--exact", choices=("linear", "limit_cycle", "none",
                                       "auto"))
    p.add_argument("--out-prefix", dest="out_prefix")
    p.add_argument("--format", choices=("csv", "raw"))
    p.add_argument("--record-lengths", dest="record_lengths",
                   action="store_true", default=None)


def _config_from_args(args) -> RunConfig:
    cfg = (RunConfig.from_file(args.config) if args.config else RunConfig())
    for name in ("problem", "b1", "b2", "domain", "n", "method", "K",
                 "init_point", "init_curve", "stop", "exact", "out_prefix",
                 "format", "record_lengths"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quasipot",
        description="Quasi-potential solver for 2D nongradient SDEs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="compute a quasi-potential grid")
    _add_common(p_solve)

    p_map = sub.add_parser("map", help="trace a minimum action path")
    _add_common(p_map)
    p_map.add_argument("--start", required=True, help="x,y target point")
    p_map.add_argument("--grid", help="prefix of a previous raw-format run")

    p_bench = sub.add_parser("bench", help="benchmark table over methods/N")
    p_bench.add_argument("--suite", default="both",
                         choices=("linear", "limit_cycle", "both"))
    p_bench.add_argument("--n-list", dest="n_list", default="",
                         help="comma-separated mesh sizes (may be empty)")
    p_bench.add_argument("--K", default="auto",
                         help="'auto' (rule of thumb) or a fixed integer")
    p_bench.add_argument("--methods", default="olim-r,olim-mid,oum",
                         help="comma-separated method list")
    p_bench.add_argument("--out-prefix", dest="out_prefix", default="run")

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(_config_from_args(args))
        if args.command == "map":
            cfg = _config_from_args(args)
            start = _parse_floats(args.start, 2, "start")
            return cmd_map(cfg, start, args.grid)
        ns = [int(s) for s in args.n_list.split(",") if s.strip()]
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        return cmd_bench(args.suite, ns, args.K, methods, args.out_prefix)
    except (ConfigError, FieldParseError, FieldEvalError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InitializationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
