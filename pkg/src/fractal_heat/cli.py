"""Command-line front end: ``fractal-heat <subcommand> [flags]``.

Exit codes: 0 success, 2 usage/validation, 3 numerical failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys


from . import experiments, export, laplacian, spectral, stepper, topology
from .errors import CFLViolation, DivergenceError, SolverError
from .topology import SimplexSpec

log = logging.getLogger("fractal_heat")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# Reference run per family: (m, T, N).
REFERENCE_RUNS = {3: (6, 1.0, 200_000), 4: (5, 1.0, 100_000)}


class UsageError(Exception):
    pass


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _int_list(v):
    return [int(x) for x in str(v).split(",") if x.strip()]


def _float_list(v):
    return [float(x) for x in str(v).split(",") if x.strip()]


def _pair(conv):
    def parse(v):
        parts = str(v).split(":")
        if len(parts) != 2:
            raise ValueError(f"expected 'a:b', got {v!r}")
        return conv(parts[0]), conv(parts[1])
    return parse


CONVERTERS = {
    "d": _int, "m": _int, "scheme": str, "T": _float, "steps": _int,
    "init_vertex": _int, "probe": _int_list, "sample_every": _int,
    "cfl_policy": str, "mode": str, "factors": _float_list,
    "m_range": _pair(_int), "window": _pair(_float), "out": str,
}


def _add_common(p, *keys):
    p.add_argument("--d", type=str, help="family: 3 gasket, 4 tetrahedron (default 3)")
    p.add_argument("--out", type=str, help="output directory (default ./out)")
    p.add_argument("--config", type=str, help="key = value file; flags override it")
    flags = {
        "m": ("--m", "level"),
        "scheme": ("--scheme", "explicit or implicit"),
        "T": ("--T", "time horizon"),
        "steps": ("--steps", "number of time steps N"),
        "init_vertex": ("--init-vertex", "0-based interior vertex carrying the spike"),
        "probe": ("--probe", "comma-separated vertex ids to record every step"),
        "sample_every": ("--sample-every", "full snapshot every k steps"),
        "cfl_policy": ("--cfl-policy", "enforce, warn or ignore"),
        "mode": ("--mode", "direct, decimation or both"),
        "factors": ("--factors", "comma-separated h / h_max ratios"),
        "m_range": ("--m-range", "coarse levels a:b, each compared with m+1"),
        "window": ("--window", "fit window t_min:t_max"),
    }
    for key in keys:
        flag, text = flags[key]
        p.add_argument(flag, dest=key, type=str, help=text)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fractal-heat",
        description="Heat equation on Sierpinski simplices by finite differences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("laplacian", help="assemble and export the Laplacian"), "m")
    _add_common(sub.add_parser("spectrum", help="Dirichlet spectrum and decimation check"), "m", "mode")
    sim_keys = ("m", "scheme", "T", "steps", "init_vertex", "probe", "sample_every", "cfl_policy")
    _add_common(sub.add_parser("simulate", help="run the explicit or implicit scheme"), *sim_keys)
    _add_common(sub.add_parser("fit", help="log-log temperature fit at a probe"), *sim_keys, "window")
    _add_common(sub.add_parser("converge", help="refinement study across levels"),
                "m_range", "T", "scheme", "init_vertex")
    _add_common(sub.add_parser("cfl", help="explicit stability around the CFL bound"),
                "m", "factors", "steps", "init_vertex")
    return parser


def resolve(args):
    """Merge config file and flags (flags win) and convert every value."""
    raw = {}
    if args.config:
        try:
            raw.update(export.read_config(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        raw[key] = value
    cfg = {}
    for key, value in raw.items():
        if key not in CONVERTERS:
            raise UsageError(f"unknown setting {key!r}")
        try:
            cfg[key] = CONVERTERS[key](value)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {exc}") from exc
    cfg.setdefault("d", 3)
    cfg.setdefault("out", "out")
    topology.require_supported(cfg["d"])
    return cfg


def _save_config(out, cfg):
    # lists and pairs go back out in the same syntax the flags accept
    flat = {}
    for key, value in cfg.items():
        if isinstance(value, list):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, tuple):
            value = ":".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        flat[key] = value
    export.write_config(os.path.join(out, "config.txt"), flat)


def _sim_defaults(cfg):
    d = cfg["d"]
    m0, t0, n0 = REFERENCE_RUNS[d]
    cfg.setdefault("m", m0)
    cfg.setdefault("scheme", "explicit")
    cfg.setdefault("T", t0)
    cfg.setdefault("steps", n0)
    spec = SimplexSpec(d, cfg["m"])
    if spec.n_interior == 0:
        raise UsageError("level 0 has no interior vertices to simulate")
    cfg.setdefault("init_vertex", experiments.default_vertex(d, cfg["m"]))
    cfg.setdefault("probe", [cfg["init_vertex"]])
    cfg.setdefault("sample_every", max(1, cfg["steps"] // 10))
    scheme = stepper.SchemeConfig(cfg["scheme"], cfg["T"], cfg["steps"],
                                  cfl_policy=cfg.get("cfl_policy"))
    cfg["cfl_policy"] = scheme.cfl_policy
    if scheme.kind == "explicit" and scheme.cfl_policy == "enforce":
        check = stepper.check_cfl(scheme.h, d, cfg["m"])
        if not check.satisfied:
            raise CFLViolation(scheme.h, check.h_max)
    u0 = stepper.spike_initial(spec, cfg["init_vertex"])
    stepper.interior_slots(spec, cfg["probe"])
    if cfg["sample_every"] < 1:
        raise UsageError("sample_every must be >= 1")
    return spec, scheme, u0


def _write_trajectory(out, spec, traj):
    export.write_probes_csv(os.path.join(out, "probes.csv"), traj)
    snap_dir = export.ensure_dir(os.path.join(out, "snapshots"))
    for k in sorted(traj.snapshots):
        export.write_snapshot_csv(
            os.path.join(snap_dir, f"step_{k}.csv"), k, traj.times[k],
            spec.n_vertices, traj.vertex_ids, traj.snapshots[k],
        )


def _run_summary(spec, scheme, traj):
    check = stepper.check_cfl(scheme.h, spec.d, spec.m)
    rows = [
        ("steps", traj.steps), ("h", scheme.h), ("h_max", check.h_max),
        ("cfl_satisfied", int(check.satisfied)), ("norm_2_inf", traj.norm_2_inf),
        ("final_norm_2", float(traj.norm2[-1])), ("final_sup", float(traj.sup[-1])),
    ]
    if traj.cg_iterations:
        rows.append(("max_cg_iterations", max(traj.cg_iterations)))
    return rows


def cmd_laplacian(cfg):
    cfg.setdefault("m", 1)
    spec = SimplexSpec(cfg["d"], cfg["m"])
    out = export.ensure_dir(cfg["out"])
    full = laplacian.assemble(spec.d, spec.m)
    restricted = laplacian.dirichlet_restrict(full)
    if restricted.n == 0:
        log.warning("level 0 has no interior vertices: the restricted matrix is empty (0x0)")
    _save_config(out, cfg)
    export.write_mtx(os.path.join(out, "matrix_full.mtx"), full.matrix)
    export.write_mtx(os.path.join(out, "matrix_restricted.mtx"), restricted.matrix)
    export.write_vertices_csv(os.path.join(out, "vertices.csv"), topology.vertex_coordinates(spec))
    print(f"level {spec.m}: full {full.n}x{full.n}, restricted {restricted.n}x{restricted.n} -> {out}")


def cmd_spectrum(cfg):
    cfg.setdefault("m", 1)
    cfg.setdefault("mode", "both")
    spec = SimplexSpec(cfg["d"], cfg["m"])
    if cfg["mode"] not in ("direct", "decimation", "both"):
        raise UsageError("mode must be direct, decimation or both")
    direct = generated = None
    if cfg["mode"] in ("direct", "both"):
        n = spec.n_interior
        if n > spectral.DIRECT_DIMENSION_CAP:
            raise UsageError(
                f"direct mode needs a dense {n}x{n} eigensolve, above the cap of "
                f"{spectral.DIRECT_DIMENSION_CAP}; use --mode decimation"
            )
    if cfg["mode"] in ("decimation", "both") and spec.m < 1:
        raise UsageError("decimation mode needs m >= 1")

    if cfg["mode"] in ("direct", "both"):
        direct = spectral.direct_spectrum(laplacian.restricted_laplacian(spec.d, spec.m))
    if cfg["mode"] in ("decimation", "both"):
        generated = spectral.decimation_spectrum(spec.d, spec.m)
    out = export.ensure_dir(cfg["out"])
    _save_config(out, cfg)
    export.write_spectrum_csv(os.path.join(out, "spectrum.csv"),
                              [s for s in (direct, generated) if s is not None])
    rows = [("level", spec.m), ("mode", cfg["mode"]), ("bound_2d", spectral.spectral_bound(spec.d))]
    if direct is not None:
        rows += [("direct_count", len(direct)),
                 ("direct_min", float(direct.values[0]) if len(direct) else None),
                 ("direct_max", float(direct.values[-1]) if len(direct) else None)]
    if generated is not None:
        rows.append(("generated_count", len(generated)))
    if direct is not None and generated is not None:
        outliers = spectral.containment_outliers(direct, generated)
        rows += [("outliers", len(outliers)), ("containment", "pass" if not outliers else "fail")]
    export.write_table_csv(os.path.join(out, "report.csv"), ["quantity", "value"], rows)
    for key, value in rows:
        print(f"{key}: {value}")


def cmd_simulate(cfg):
    spec, scheme, u0 = _sim_defaults(cfg)
    out = export.ensure_dir(cfg["out"])
    _save_config(out, cfg)
    traj = stepper.simulate(spec, scheme, u0, probes=cfg["probe"], sample_every=cfg["sample_every"])
    _write_trajectory(out, spec, traj)
    export.write_vertices_csv(os.path.join(out, "vertices.csv"), topology.vertex_coordinates(spec))
    rows = _run_summary(spec, scheme, traj)
    export.write_table_csv(os.path.join(out, "report.csv"), ["quantity", "value"], rows)
    for key, value in rows:
        print(f"{key}: {value}")


def cmd_fit(cfg):
    spec, scheme, u0 = _sim_defaults(cfg)
    if len(cfg["probe"]) != 1:
        raise UsageError("fit expects exactly one probe vertex")
    window = cfg.get("window") or experiments.default_fit_window(spec.d, spec.m, scheme.h, scheme.T)
    if not 0 < window[0] < window[1]:
        raise UsageError(f"fit window must satisfy 0 < t_min < t_max, got {window[0]}:{window[1]}")
    cfg["window"] = tuple(float(w) for w in window)
    out = export.ensure_dir(cfg["out"])
    _save_config(out, cfg)
    traj = stepper.simulate(spec, scheme, u0, probes=cfg["probe"], sample_every=cfg["sample_every"])
    fit = experiments.power_law_fit(traj.times, traj.probe_values[:, 0], window)
    export.write_probes_csv(os.path.join(out, "probes.csv"), traj)
    rows = [
        ("slope", fit.slope), ("intercept", fit.intercept), ("r_squared", fit.r_squared),
        ("t_min", fit.window[0]), ("t_max", fit.window[1]), ("sample_count", fit.sample_count),
        ("reference_slope", experiments.REFERENCE_SLOPE),
        ("reference_intercept", experiments.REFERENCE_INTERCEPT),
        ("spectral_dimension_ref", experiments.SPECTRAL_DIMENSION_REF),
    ]
    export.write_table_csv(os.path.join(out, "report.csv"), ["quantity", "value"], rows)
    for key, value in rows:
        print(f"{key}: {value}")


def cmd_converge(cfg):
    cfg.setdefault("m_range", (2, 4))
    cfg.setdefault("T", 0.05)
    cfg.setdefault("scheme", "explicit")
    lo, hi = cfg["m_range"]
    if lo < 1 or hi < lo:
        raise UsageError("m_range must satisfy 1 <= a <= b")
    if SimplexSpec(cfg["d"], hi + 1).n_interior > 50_000:
        raise UsageError("m_range upper level is too deep for a desk-scale study")
    stepper.SchemeConfig(cfg["scheme"], cfg["T"], 1)
    cfg.setdefault("init_vertex", experiments.default_vertex(cfg["d"], lo))
    stepper.spike_initial(SimplexSpec(cfg["d"], lo), cfg["init_vertex"])
    out = export.ensure_dir(cfg["out"])
    _save_config(out, cfg)
    reports = experiments.refinement_study(cfg["d"], lo, hi, cfg["T"], vertex=cfg["init_vertex"],
                                           scheme=cfg["scheme"])
    header = ["m_coarse", "m_fine", "h_coarse", "h_fine", "steps_coarse", "steps_fine", "error"]
    rows = [(r.levels[0], r.levels[1], r.h_coarse, r.h_fine, r.steps_coarse, r.steps_fine, r.error)
            for r in reports]
    export.write_table_csv(os.path.join(out, "report.csv"), header, rows)
    for r in rows:
        print(f"m={r[0]}->{r[1]}  error={r[-1]:.6e}")


def cmd_cfl(cfg):
    cfg.setdefault("m", 3)
    cfg.setdefault("factors", [0.5, 1.0, 4.0])
    cfg.setdefault("steps", 10_000)
    spec = SimplexSpec(cfg["d"], cfg["m"])
    if spec.n_interior == 0:
        raise UsageError("level 0 has no interior vertices")
    if any(not f > 0 for f in cfg["factors"]) or cfg["steps"] < 1:
        raise UsageError("factors must be positive and steps >= 1")
    cfg.setdefault("init_vertex", experiments.default_vertex(spec.d, spec.m))
    stepper.spike_initial(spec, cfg["init_vertex"])
    out = export.ensure_dir(cfg["out"])
    _save_config(out, cfg)
    table = experiments.cfl_demo(spec.d, spec.m, cfg["factors"], cfg["steps"],
                                 vertex=cfg["init_vertex"])
    header = ["factor", "h", "h_max", "classification", "divergence_step", "max_norm_ratio"]
    rows = [(r.factor, r.h, r.h_max, r.classification, r.divergence_step, r.max_norm_ratio)
            for r in table]
    export.write_table_csv(os.path.join(out, "report.csv"), header, rows)
    for r in table:
        step = "" if r.divergence_step is None else f" at step {r.divergence_step}"
        print(f"factor {r.factor:g}: {r.classification}{step}")


COMMANDS = {
    "laplacian": cmd_laplacian, "spectrum": cmd_spectrum, "simulate": cmd_simulate,
    "fit": cmd_fit, "converge": cmd_converge, "cfl": cmd_cfl,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        experiments.max_workers()
        cfg = resolve(args)
        COMMANDS[args.command](cfg)
    except (CFLViolation, SolverError, DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
