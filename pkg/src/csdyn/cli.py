"""Configuration-driven front end.

`csdyn --config run.cfg [--seed N --out DIR --no-timestamp --jobs N]`
executes one operation described by a flat key-value config file and writes
CSV/JSON outputs atomically.  Exit codes: 0 on success/PASS, 2 when a
diagnostic check FAILs, 1 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import certificates
from .config import load_config
from .diagnostics import (
    CheckResult,
    attractor_estimate,
    classify_ensemble,
    conformal_transport_check,
    escape_statistics,
    find_periodic_orbit,
    loop_cohomology_check,
    trapping_level,
)
from .errors import ConfigError, CsdynError
from .flows import (
    IntegratorConfig,
    SectionSpec,
    flow_ensemble,
    integrate_flow,
    integrate_variational,
)
from .geometry import conformality_ratio_estimate, torus_distance
from .models import instantiate_model, registered_models, sample_states
from .output import (
    write_cloud_csv,
    write_grid_csv,
    write_report_json,
    write_trajectory_csv,
    write_trajectory_json,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


def _integrator_config(options):
    kwargs = {}
    for key, attr in (
        ("integrator.method", "method"),
        ("integrator.rel_tol", "rel_tol"),
        ("integrator.abs_tol", "abs_tol"),
        ("integrator.h", "h"),
        ("integrator.blowup_threshold", "blowup_threshold"),
        ("integrator.max_steps", "max_steps"),
    ):
        if key in options:
            kwargs[attr] = options[key]
    return IntegratorConfig(**kwargs)


def _model(cfg):
    if cfg.model_name is None:
        raise ConfigError("this operation needs model.name", key="model.name")
    return instantiate_model(cfg.model_name, cfg.model_params)


def _out_path(cfg, name):
    return os.path.join(cfg.out_dir, name)


def _op_simulate(cfg):
    m = _model(cfg)
    icfg = _integrator_config(cfg.options)
    t = float(cfg.options.get("simulate.t", 5.0))
    x0 = np.array(cfg.options.get("simulate.x0", (0.0,) * m.dim), dtype=float)
    samples = int(cfg.options.get("simulate.samples", 201))
    variational = bool(cfg.options.get("simulate.variational", False))
    if variational:
        traj = integrate_variational(m, x0, (0.0, t), icfg, samples=samples)
        write_trajectory_json(
            _out_path(cfg, f"simulate_{m.name}.json"), traj, timestamp=cfg.timestamp
        )
    else:
        traj = integrate_flow(m, x0, (0.0, t), icfg, samples=samples)
    write_trajectory_csv(
        _out_path(cfg, f"simulate_{m.name}.csv"), traj, timestamp=cfg.timestamp
    )
    print(f"simulate {m.name}: status={traj.status} samples={len(traj.times)}")
    return EXIT_OK


def _op_diagnose(cfg):
    m = _model(cfg)
    icfg = _integrator_config(cfg.options)
    check = cfg.options.get("diagnose.check", "conformality")
    rng = np.random.default_rng(cfg.seed)
    if check == "conformality":
        if m.kind != "map":
            raise ConfigError("conformality check expects a map model")
        worst_res, ratios = 0.0, []
        for x in sample_states(m, 100, rng):
            ratio, res = conformality_ratio_estimate(
                np.asarray(m.Df(x), dtype=float),
                np.asarray(m.Omega(x), dtype=float),
                np.asarray(m.Omega(m.f(x)), dtype=float),
            )
            ratios.append(ratio)
            worst_res = max(worst_res, res)
        spread = float(np.max(ratios) - np.min(ratios))
        residual = max(worst_res, spread)
        result = CheckResult(
            check="conformality",
            model=m.name,
            params=dict(m.params),
            residual=residual,
            tolerance=1e-12,
            verdict="PASS" if residual <= 1e-12 else "FAIL",
            provenance_tag="conformality/map-ratio",
            details={"ratio": float(np.mean(ratios)), "spread": spread},
        )
    elif check == "transport":
        t = float(cfg.options.get("diagnose.t", 1.0))
        x0 = np.array(cfg.options.get("diagnose.x0", (0.1,) * m.dim), dtype=float)
        traj = integrate_variational(m, x0, (0.0, t), icfg, samples=21)
        result = conformal_transport_check(m, traj)
    elif check == "loop":
        th = np.linspace(0.0, 1.0, 2049)
        loop = np.stack([np.mod(th, 1.0), np.ones_like(th)], axis=1)
        t = float(cfg.options.get("diagnose.t", 1.0))
        result = loop_cohomology_check(m, loop, t, icfg)
    else:
        raise ConfigError(f"unknown diagnose.check {check!r}", key="diagnose.check")
    write_report_json(
        _out_path(cfg, f"diagnose_{m.name}_{check}.json"), [result],
        seed=cfg.seed, timestamp=cfg.timestamp,
    )
    print(f"{result.check} {result.model}: residual={result.residual:.3e} "
          f"tolerance={result.tolerance:.3e} {result.verdict}")
    return EXIT_OK if result.passed else EXIT_FAIL


def _op_attractor(cfg):
    m = _model(cfg)
    icfg = _integrator_config(cfg.options)
    t_relax = float(cfg.options.get("attractor.t_relax", 60.0))
    grid = int(cfg.options.get("attractor.grid", 33))
    eps = float(cfg.options.get("attractor.eps", 1e-3))
    flat_box = cfg.options.get("attractor.box")
    if flat_box is not None:
        box = tuple((flat_box[i], flat_box[i + 1]) for i in range(0, len(flat_box), 2))
        R = None
        est = attractor_estimate(
            m, box=box, t_relax=t_relax, grid=grid, cfg=icfg, eps=eps
        )
    else:
        R = trapping_level(m)
        est = attractor_estimate(m, R=R, t_relax=t_relax, grid=grid, cfg=icfg, eps=eps)
    write_cloud_csv(
        _out_path(cfg, f"attractor_{m.name}.csv"), est.cloud, timestamp=cfg.timestamp
    )
    result = CheckResult(
        check="attractor-estimate",
        model=m.name,
        params=dict(m.params),
        residual=est.invariance_residual,
        tolerance=float(cfg.options.get("attractor.eps", 1e-3)) * 10,
        verdict="PASS" if est.status == "trapped" else "FAIL",
        provenance_tag="attractor/relaxation",
        details={
            "trap_level": est.trap_level,
            "cloud_size": len(est.cloud),
            "status": est.status,
            "escaped": est.escaped,
        },
    )
    write_report_json(
        _out_path(cfg, f"attractor_{m.name}.json"), [result],
        seed=cfg.seed, timestamp=cfg.timestamp,
    )
    print(f"attractor {m.name}: {est.status} cloud={len(est.cloud)} "
          f"invariance={est.invariance_residual:.3e}")
    return EXIT_OK if result.passed else EXIT_FAIL


def _op_periodic(cfg):
    m = _model(cfg)
    icfg = _integrator_config(cfg.options)
    axis = int(cfg.options.get("periodic.section_axis", 0))
    offset = float(cfg.options.get("periodic.section_offset", 0.0))
    direction = int(cfg.options.get("periodic.direction", 0))
    guess = np.array(cfg.options.get("periodic.guess", (0.0,) * m.dim), dtype=float)
    backward = bool(cfg.options.get("periodic.backward", False))
    sec = SectionSpec(axis=axis, offset=offset, direction=direction)
    po = find_periodic_orbit(m, sec, guess, icfg, backward=backward)
    payload = {
        "anchor": po.anchor.tolist(),
        "period": po.period,
        "multipliers": [[z.real, z.imag] for z in po.multipliers],
        "mean_rotation": po.mean_rotation,
        "closure_error": po.closure_error,
        "pairing_defect_modulus": po.pairing_defect_modulus,
        "pairing_defect_argument": po.pairing_defect_argument,
        "h_anchor": po.h_anchor,
    }
    result = CheckResult(
        check="periodic-orbit",
        model=m.name,
        params=dict(m.params),
        residual=po.closure_error,
        tolerance=1e-9,
        verdict="PASS" if po.closure_error <= 1e-9 else "FAIL",
        provenance_tag="spectra/multiplier-pairing",
        details=payload,
    )
    write_report_json(
        _out_path(cfg, f"periodic_{m.name}.json"), [result],
        seed=cfg.seed, timestamp=cfg.timestamp,
    )
    print(f"periodic {m.name}: T={po.period:.12g} closure={po.closure_error:.3e}")
    return EXIT_OK if result.passed else EXIT_FAIL


def _classify_chunk(payload):
    name, params, chunk, horizon = payload
    m = instantiate_model(name, params)
    return classify_ensemble(m, np.asarray(chunk), T=horizon)


def _op_classify(cfg):
    from .ensemble import WORK_UNIT, deterministic_map

    m = _model(cfg)
    n = int(cfg.options.get("classify.n", 100))
    horizon = float(cfg.options.get("classify.T", 10.0))
    rng = np.random.default_rng(cfg.seed)
    starts = sample_states(m, n, rng, 1.0)
    # fixed-size work units: identical array shapes (hence identical ufunc
    # code paths) for every worker count, so outputs are bit-identical
    payloads = [
        (cfg.model_name, cfg.model_params, starts[i : i + WORK_UNIT].tolist(), horizon)
        for i in range(0, len(starts), WORK_UNIT)
    ]
    outs = deterministic_map(_classify_chunk, payloads, jobs=cfg.jobs)
    results = [r for chunk in outs for r in chunk]
    counts = {"dissipative": 0, "conservative": 0, "undetermined": 0}
    for r in results:
        counts[r.verdict] += 1
    payload = {
        "counts": counts,
        "orbits": [
            {
                "x0": starts[i].tolist(),
                "verdict": r.verdict,
                "r_slope": r.r_slope,
                "omega_H_max": r.omega_H_max,
            }
            for i, r in enumerate(results)
        ],
    }
    result = CheckResult(
        check="classification",
        model=m.name,
        params=dict(m.params),
        residual=float(counts["undetermined"]) / max(n, 1),
        tolerance=1.0,
        verdict="PASS",
        provenance_tag="classification/finite-time-dichotomy",
        details=payload,
    )
    write_report_json(
        _out_path(cfg, f"classify_{m.name}.json"), [result],
        seed=cfg.seed, timestamp=cfg.timestamp,
    )
    print(f"classify {m.name}: {counts}")
    return EXIT_OK


def _op_escape(cfg):
    m = _model(cfg)
    flat = cfg.options.get("escape.box")
    if flat is None:
        raise ConfigError("escape needs escape.box", key="escape.box")
    box = tuple((flat[i], flat[i + 1]) for i in range(0, len(flat), 2))
    n_steps = int(cfg.options.get("escape.n_steps", 100))
    samples = int(cfg.options.get("escape.samples", 1000))
    stats = escape_statistics(m, box, n_steps, samples, seed=cfg.seed)
    result = CheckResult(
        check="escape-statistics",
        model=m.name,
        params=dict(m.params),
        residual=1.0 - stats.escaped_fraction,
        tolerance=1.0,
        verdict="PASS",
        provenance_tag="escape/null-basin",
        details={"escaped": stats.escaped, "total": stats.total},
    )
    write_report_json(
        _out_path(cfg, f"escape_{m.name}.json"), [result],
        seed=cfg.seed, timestamp=cfg.timestamp,
    )
    print(f"escape {m.name}: {stats.escaped}/{stats.total} within {n_steps} steps")
    return EXIT_OK


def emit_basin_grid(m, grid, p_range, targets, t_max=60.0, capture=1e-2, h=0.02,
                    blowup_threshold=1e8):
    """Label a (q, p) grid by the nearest target of the relaxed state.

    Returns (labels, q_axis, p_axis): label k >= 1 means targets[k-1],
    0 undetermined, -1 escaped.  Only d = 1 cotangent models are gridded.
    """
    if not targets:
        raise CsdynError("basin grid needs a non-empty target list")
    if grid < 1:
        raise CsdynError("basin grid needs at least one cell per axis")
    if m.d != 1:
        raise CsdynError("basin grids are drawn for d = 1 models")
    q_axis = np.linspace(0.0, 1.0, grid, endpoint=False)
    p_axis = np.linspace(-p_range, p_range, grid)
    mesh = np.stack(np.meshgrid(q_axis, p_axis, indexing="ij"), axis=-1).reshape(-1, 2)
    final, alive = flow_ensemble(m, mesh, t_max, h=h, blowup_threshold=blowup_threshold)
    targets = np.asarray(targets, dtype=float)
    labels = np.zeros(len(mesh), dtype=np.int64)
    dists = np.stack(
        [torus_distance(m.spec, final, tgt) for tgt in targets], axis=1
    )
    nearest = np.argmin(dists, axis=1)
    captured = dists[np.arange(len(mesh)), nearest] <= capture
    labels[captured] = nearest[captured] + 1
    labels[~alive] = -1
    return labels.reshape(grid, grid), q_axis, p_axis


def _op_basin(cfg):
    m = _model(cfg)
    grid = int(cfg.options.get("basin.grid", 100))
    p_range = float(cfg.options.get("basin.p_range", 3.0))
    t_max = float(cfg.options.get("basin.t_max", 60.0))
    targets = [np.asarray(e) for e in m.equilibria]
    labels, q_axis, p_axis = emit_basin_grid(m, grid, p_range, targets, t_max=t_max)
    write_grid_csv(
        _out_path(cfg, f"basin_{m.name}.csv"), labels, ("q", "p"),
        (q_axis, p_axis), timestamp=cfg.timestamp,
    )
    unique, counts = np.unique(labels, return_counts=True)
    print(f"basin {m.name}: " + ", ".join(
        f"label {int(u)}: {int(c)}" for u, c in zip(unique, counts)))
    return EXIT_OK


def _op_verify(cfg):
    scope = cfg.options.get("verify.scope", "all")
    try:
        results, ok = certificates.verify_suite(scope=scope, seed=cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc), key="verify.scope")
    print(certificates.format_report(results))
    write_report_json(
        _out_path(cfg, f"verify_{scope}.json"), results,
        seed=cfg.seed, timestamp=cfg.timestamp,
        extra={"scope": scope},
    )
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


def _op_list_models(cfg):
    for name in registered_models():
        print(name)
    return EXIT_OK


_OPERATIONS = {
    "simulate": _op_simulate,
    "diagnose": _op_diagnose,
    "attractor": _op_attractor,
    "periodic": _op_periodic,
    "classify": _op_classify,
    "escape": _op_escape,
    "basin": _op_basin,
    "verify": _op_verify,
    "list-models": _op_list_models,
}


def run_config(path, seed=None, out=None, timestamp=None, jobs=None):
    """Execute the operation described by the config file; returns exit code."""
    try:
        cfg = load_config(path)
        if seed is not None:
            cfg.seed = int(seed)
        if out is not None:
            cfg.out_dir = out
        if timestamp is not None:
            cfg.timestamp = timestamp
        if jobs is not None:
            cfg.jobs = int(jobs)
        os.makedirs(cfg.out_dir, exist_ok=True)
        return _OPERATIONS[cfg.operation](cfg)
    except ConfigError as exc:
        loc = f" (line {exc.line})" if exc.line else ""
        print(f"config error{loc}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except CsdynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="csdyn",
        description="simulate and certify conformally symplectic dynamics",
    )
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument(
        "--no-timestamp", action="store_true",
        help="suppress timestamp headers for byte-identical reruns",
    )
    parser.add_argument("--jobs", type=int, default=None, help="ensemble workers")
    args = parser.parse_args(argv)
    return run_config(
        args.config,
        seed=args.seed,
        out=args.out,
        timestamp=False if args.no_timestamp else None,
        jobs=args.jobs,
    )


if __name__ == "__main__":
    sys.exit(main())
