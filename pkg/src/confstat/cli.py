"""Command-line front end: ``confstat <command> [options]``.

Every run is described by one JSON configuration document; command-line
flags override its keys.  Exit codes: 0 done (whatever the verdict),
2 configuration error, 3 domain or geometry error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import conformal, kinematics, models, transport
from .causality import causality_scan
from .errors import ConfigError, GeometryError, SolverError
from .parallel import default_workers
from .report import AnalysisReport, load_schema, points_columns, table
from .tolerances import DEFAULT, Tolerances

COMMANDS = ("analyze", "trace", "parallax", "causality", "potential")
EXIT_OK, EXIT_CONFIG, EXIT_GEOMETRY, EXIT_SOLVER = 0, 2, 3, 4


# -- argument parsing ----------------------------------------------------------------


def _event(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse event {text!r}; expected four comma-separated numbers") from None
    if len(vals) != 4:
        raise ConfigError(f"event {text!r} needs four coordinates")
    return vals


def _pair(text: str, what: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"{what} must look like key=value, got {text!r}")
    return key.strip(), value.strip()


def _number(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{what}: {text!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--model", help="model family")
    common.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="model parameter")
    common.add_argument("--region", action="append", default=[], metavar="AXIS=LO:HI", help="scan box override")
    common.add_argument("--grid", type=int, help="grid points per axis")
    common.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE", help="tolerance override")
    common.add_argument("--out", help="JSON report path; CSV tables are written next to it")
    common.add_argument("--workers", type=int, help="worker threads (default from CONFSTAT_WORKERS)")

    parser = argparse.ArgumentParser(prog="confstat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="kinematics scan and stationarity verdict")
    p = sub.add_parser("trace", parents=[common], help="light signal, redshift, conformal frequency")
    p.add_argument("--x0", help="ray start event t,x,y,z")
    p.add_argument("--K0", help="initial tangent (time component is recomputed)")
    p.add_argument("--span", type=float, help="affine span of the ray")
    p.add_argument("--event", help="emission (forward) or reception (backward) event")
    p.add_argument("--observer", help="event on the other observer's worldline")
    p.add_argument("--direction", choices=["forward", "backward"])
    p.add_argument("--window", help="proper-time window lo:hi of the observer")
    p.add_argument("--no-message", action="store_true", help="skip the infinitesimal message")
    p = sub.add_parser("parallax", parents=[common], help="celestial-angle drift of an observer triple")
    p.add_argument("--receiver", help="event on the receiving worldline")
    p.add_argument("--source", action="append", default=[], help="event on a source worldline (twice)")
    p.add_argument("--taus", help="comma-separated reception proper times")
    p.add_argument("--window", help="proper-time window lo:hi of the worldlines")
    sub.add_parser("causality", parents=[common], help="stable-causality sufficient conditions")
    p = sub.add_parser("potential", parents=[common], help="redshift potential ln f between two events")
    p.add_argument("--anchor", help="gauge event with ln f = 0")
    p.add_argument("--target", help="evaluation event")
    p.add_argument("--via", help="corner of the two-leg comparison path")
    return parser


def _window(text):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ConfigError(f"window must look like lo:hi, got {text!r}")
    return [_number(lo, "window"), _number(hi, "window")]


def config_from_args(args) -> dict:
    """Merge ``--config`` with flag overrides; region overrides stay symbolic."""
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    cfg["command"] = args.command
    model = dict(cfg.get("model", {}))
    if args.model:
        if args.model != model.get("family"):
            model["params"] = {}
        model["family"] = args.model
    params = dict(model.get("params", {}))
    for item in args.param:
        k, v = _pair(item, "--param")
        params[k] = _number(v, f"parameter {k}")
    if params or "params" in model:
        model["params"] = params
    if model:
        cfg["model"] = model
    if args.grid is not None:
        cfg["grid"] = args.grid
    tols = dict(cfg.get("tolerances", {}))
    for item in args.tol:
        k, v = _pair(item, "--tol")
        tols[k] = _number(v, f"tolerance {k}")
    if tols:
        cfg["tolerances"] = tols
    if args.out:
        cfg.setdefault("output", {})["json"] = args.out
    if args.workers is not None:
        cfg["workers"] = args.workers
    overrides = []
    for item in args.region:
        k, v = _pair(item, "--region")
        overrides.append((k, _window(v)))

    cmd = args.command
    if cmd == "trace":
        if args.x0 or args.K0:
            if not (args.x0 and args.K0):
                raise ConfigError("--x0 and --K0 go together")
            ray = {"x0": _event(args.x0), "K0": _event(args.K0)}
            if args.span is not None:
                ray["affine_span"] = args.span
            cfg["ray"] = ray
            cfg.pop("pair", None)
        if args.event or args.observer or args.direction or args.window:
            pair = dict(cfg.get("pair", {}))
            if args.event:
                pair["event"] = _event(args.event)
            if args.observer:
                pair["observer"] = _event(args.observer)
            if args.direction:
                pair["direction"] = args.direction
            if args.window:
                pair["window"] = _window(args.window)
            cfg["pair"] = pair
        if args.no_message:
            cfg["message"] = False
    elif cmd == "parallax":
        if args.receiver or args.source or args.taus or args.window:
            triple = dict(cfg.get("triple", {}))
            if args.receiver:
                triple["receiver"] = _event(args.receiver)
            if args.source:
                triple["sources"] = [_event(s) for s in args.source]
            if args.taus:
                triple["taus"] = [_number(t, "--taus") for t in args.taus.split(",")]
            if args.window:
                triple["window"] = _window(args.window)
            cfg["triple"] = triple
    elif cmd == "potential":
        for key in ("anchor", "target", "via"):
            if getattr(args, key):
                cfg[key] = _event(getattr(args, key))
    return cfg, overrides


# -- configuration ---------------------------------------------------------------------


def _tolerances(overrides: dict) -> Tolerances:
    fields = {f.name: f for f in dataclasses.fields(Tolerances)}
    conv = {}
    for k, v in overrides.items():
        if k not in fields:
            raise ConfigError(f"unknown tolerance {k!r}; known: {sorted(fields)}")
        conv[k] = int(v) if isinstance(fields[k].default, int) else float(v)
    return DEFAULT.replace(**conv)


def resolve(cfg: dict, region_overrides=()):
    """Validate ``cfg`` and build ``(cfg, model, tolerances, workers)``.

    Missing keys are filled with model defaults so the echoed configuration
    fully determines the run.
    """
    cfg = json.loads(json.dumps(cfg))
    if "model" not in cfg:
        raise ConfigError("no model given (use --model or the config key 'model')")
    try:
        jsonschema.validate(cfg, load_schema("config"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    model = models.instantiate(cfg["model"]["family"], cfg["model"].get("params", {}))
    cfg["model"]["params"] = dict(model.params)
    if "region" in cfg:
        lo, hi = np.asarray(cfg["region"]["lo"], float), np.asarray(cfg["region"]["hi"], float)
    else:
        lo, hi = (np.array(a, dtype=float) for a in model.reference_region)
    for name, (a, b) in region_overrides:
        i = model.axis(name)
        lo[i], hi[i] = a, b
    if np.any(hi < lo):
        raise ConfigError("region needs lo <= hi on every axis")
    cfg["region"] = {"lo": lo.tolist(), "hi": hi.tolist()}
    cfg.setdefault("grid", 5)
    tol = _tolerances(cfg.get("tolerances", {}))
    workers = int(cfg.get("workers", default_workers()))
    cfg["workers"] = workers
    return cfg, model, tol, workers


def _centre(cfg):
    lo, hi = np.asarray(cfg["region"]["lo"]), np.asarray(cfg["region"]["hi"])
    return lo, hi, 0.5 * (lo + hi), hi - lo


# -- commands -----------------------------------------------------------------------------


def cmd_analyze(cfg, model, tol, workers) -> AnalysisReport:
    lo, hi, _, _ = _centre(cfg)
    grid = cfg["grid"]
    verdict = conformal.stationarity_scan(model, (lo, hi), grid, tol, workers=workers)
    pts = conformal.grid_points(lo, hi, grid)
    certified = verdict.verdict == "conformally_stationary"
    cand = conformal.ConformalCandidate(model, anchor=verdict.anchor, tol=tol) if certified else None

    def per_event(p):
        s = kinematics.kinematics_at(model, p, tol=tol)
        ri, rii = kinematics.integrability_check(model, p, tol=tol)
        cols = dict(
            theta=s.theta,
            shear_norm=s.shear_norm,
            rotation_norm=s.rotation_norm,
            accel_norm=s.accel_norm,
            d_rho_norm=s.d_rho_norm,
            decomposition_residual=s.residuals["decomposition"],
            lie_metric_residual=kinematics.lie_V_metric_residual(model, p, tol=tol),
            integrability_i=ri,
            integrability_ii=rii,
        )
        if cand is not None:
            cols["ln_f"] = cand.ln_f(p)
            cols["conformal_residual"] = conformal.conformal_residual(cand, p, tol)
            cols["phi_consistency"] = conformal.phi_consistency(cand, p)
        return cols

    from .parallel import map_chunks

    cols = map_chunks(per_event, pts, workers)
    exc = kinematics.expansion_rotation_exclusion(model, pts, tol=tol)
    statuses, counts = np.unique(exc.status, return_counts=True)
    evidence = dict(
        n_events=len(pts),
        decomposition_residual_max=float(np.max(cols["decomposition_residual"])),
        lie_metric_residual_max=float(np.max(cols["lie_metric_residual"])),
        integrability_i_max=float(np.max(cols["integrability_i"])),
        integrability_ii_max=float(np.max(cols["integrability_ii"])),
        theta_min=float(np.min(cols["theta"])),
        theta_max=float(np.max(cols["theta"])),
        rotation_norm_max=float(np.max(cols["rotation_norm"])),
        accel_norm_max=float(np.max(cols["accel_norm"])),
    )
    exclusion = dict(
        verdict="evaluated" if np.all(exc.evaluated) else "preconditions_not_met",
        status_counts={str(k): int(v) for k, v in zip(statuses, counts)},
    )
    if np.any(exc.evaluated):
        exclusion["value_max"] = float(np.nanmax(exc.value))
    if cand is not None:
        evidence["phi_consistency_max"] = float(np.max(cols["phi_consistency"]))
        f = np.exp(cols["ln_f"])
        evidence["f_min"], evidence["f_max"] = float(np.min(f)), float(np.max(f))
    verdicts = {"stationarity": verdict.as_dict(), "expansion_rotation": exclusion}
    return AnalysisReport(
        "analyze",
        cfg,
        tol.as_dict(),
        verdicts,
        evidence,
        {"events": table({**points_columns(pts), **cols})},
    )


def _default_pair(cfg, model):
    lo, hi, c, w = _centre(cfg)
    event = np.array([lo[0], *c[1:]])
    observer = event.copy()
    observer[1] += 0.5 * w[1]
    return dict(event=event.tolist(), observer=observer.tolist(), direction="forward", window=[-3.0, 3.0])


def cmd_trace(cfg, model, tol, workers) -> AnalysisReport:
    evidence = {}
    if "ray" in cfg:
        ray = cfg["ray"]
        ray.setdefault("affine_span", 1.0)
        sig = transport.integrate_null_geodesic(model, ray["x0"], ray["K0"], ray["affine_span"], tol)
    else:
        pair = {**_default_pair(cfg, model), **cfg.get("pair", {})}
        cfg["pair"] = pair
        wl = transport.Worldline(model, pair["observer"], tuple(pair["window"]), tol)
        sig = transport.connect_observers(model, pair["event"], wl, pair["direction"], tol=tol)
        evidence.update(tau_observer=sig.meta["tau"], shooting_miss=sig.meta["miss"], shooting_iterations=sig.meta["iterations"])
    cand = conformal.ConformalCandidate(model, anchor=sig.emission, tol=tol)
    drift = transport.conformal_frequency_drift(sig, cand)
    rec = transport.redshift(sig, cand, tol)
    lo, hi, _, _ = _centre(cfg)
    local = conformal.stationarity_scan(model, (lo, hi), 3, tol, workers=workers)
    evidence.update(
        null_drift=sig.null_drift,
        hamiltonian_max=transport.hamiltonian_check(sig),
        conformal_frequency_drift=drift,
        nu_emission=float(sig.nu[0]),
        nu_reception=float(sig.nu[-1]),
        n_steps=sig.n_steps,
        emission=sig.emission.tolist(),
        reception=sig.reception.tolist(),
    )
    verdicts = {
        "conformal_frequency": dict(
            verdict="conserved" if drift < tol.residual else "not_conserved",
            drift=drift,
            threshold=tol.residual,
            candidate_certified=local.verdict == "conformally_stationary",
        ),
        "redshift": dict(
            verdict="consistent" if rec.consistency < tol.redshift else "inconsistent",
            threshold=tol.redshift,
            **rec.as_dict(),
        ),
    }
    if cfg.get("message", True):
        msg = transport.solve_infinitesimal_message(model, sig, tol)
        evidence["message"] = msg.summary()
        evidence["message_c_minus_exp_r"] = msg.c - float(np.exp(rec.r_integral))
    traj = dict(
        s=sig.s,
        **{f"x{i}": sig.x[:, i] for i in range(4)},
        **{f"K{i}": sig.K[:, i] for i in range(4)},
        g_KK=sig.g_KK,
        hamiltonian=sig.hamiltonian,
        nu=sig.nu,
        g_xi_K=sig.conformal_frequency,
    )
    return AnalysisReport("trace", cfg, tol.as_dict(), verdicts, evidence, {"trajectory": table(traj)})


def _default_triple(cfg):
    lo, hi, c, w = _centre(cfg)
    rx = np.array([lo[0], *c[1:]])
    s1 = rx + [0.0, 0.25 * w[1], 0.25 * w[2], 0.0]
    s2 = rx + [0.0, 0.0, 0.35 * w[2], 0.1 * w[3]]
    return dict(receiver=rx.tolist(), sources=[s1.tolist(), s2.tolist()], taus=np.linspace(0, 1, 5).tolist())


def cmd_parallax(cfg, model, tol, workers) -> AnalysisReport:
    triple = {**_default_triple(cfg), **cfg.get("triple", {})}
    triple.setdefault("window", [-3.0, max(triple["taus"]) + 0.5])
    cfg["triple"] = triple
    win = tuple(triple["window"])
    rx = transport.Worldline(model, triple["receiver"], win, tol)
    srcs = [transport.Worldline(model, s, win, tol) for s in triple["sources"]]
    rep = transport.parallax_verdict(model, rx, srcs, triple["taus"], tol)
    d = rep.as_dict()
    verdict = dict(
        verdict=d["verdict"],
        angle_drift=d["angle_drift"],
        max_parallax_residual=d["max_parallax_residual"],
        threshold=d["threshold"],
    )
    msgs = rep.messages
    evidence = dict(
        g_KP_drift_max=max(m.g_KP_drift for m in msgs),
        v_min=min(float(np.min(m.v)) for m in msgs),
        messages=d["messages"],
        signals=d["signals"],
    )
    tab = dict(tau=rep.taus, angle=rep.angles)
    return AnalysisReport("parallax", cfg, tol.as_dict(), {"parallax": verdict}, evidence, {"angles": table(tab)})


def cmd_causality(cfg, model, tol, workers) -> AnalysisReport:
    lo, hi, c, _ = _centre(cfg)
    cand = conformal.ConformalCandidate(model, anchor=c, tol=tol)
    stat = conformal.stationarity_scan(model, (lo, hi), cfg["grid"], tol, workers=workers)
    scan = causality_scan(model, cand, (lo, hi), cfg["grid"], tol, workers=workers)
    verdict = scan.as_dict()
    verdict["candidate_certified"] = stat.verdict == "conformally_stationary"
    return AnalysisReport(
        "causality",
        cfg,
        tol.as_dict(),
        {"causality": verdict, "stationarity": stat.as_dict()},
        {"anchor": c.tolist()},
        {"events": table({**points_columns(scan.points), **scan.table()})},
    )


def cmd_potential(cfg, model, tol, workers) -> AnalysisReport:
    lo, hi, c, w = _centre(cfg)
    cfg.setdefault("anchor", [lo[0], *c[1:]])
    cfg.setdefault("target", [hi[0], *c[1:]])
    anchor, target = np.asarray(cfg["anchor"]), np.asarray(cfg["target"])
    ln_f = float(conformal.reconstruct_ln_f(model, anchor, target, tol))
    evidence = dict(ln_f=ln_f, f_ratio=float(np.exp(ln_f)), anchor=anchor.tolist(), target=target.tolist())
    via = cfg.get("via")
    if via is None:
        via = [anchor[0], *target[1:]]
        if np.allclose(via, anchor) or np.allclose(via, target):
            # endpoints differ only in time: bend the path out along x
            via = 0.5 * (anchor + target)
            via[1] += 0.25 * w[1]
            if not model.contains(via):
                via[1] -= 0.5 * w[1]
            via = via.tolist()
    verdict = dict(verdict="single_path")
    if not (np.allclose(via, anchor) or np.allclose(via, target)):
        dog = float(conformal.reconstruct_ln_f(model, anchor, target, tol, via=via))
        diff = abs(dog - ln_f)
        evidence.update(via=list(map(float, via)), ln_f_two_leg=dog)
        verdict = dict(
            verdict="path_independent" if diff < tol.path else "path_dependent",
            path_difference=diff,
            threshold=tol.path,
        )
    return AnalysisReport("potential", cfg, tol.as_dict(), {"potential": verdict}, evidence)


HANDLERS = dict(
    analyze=cmd_analyze,
    trace=cmd_trace,
    parallax=cmd_parallax,
    causality=cmd_causality,
    potential=cmd_potential,
)


def run(cfg: dict, region_overrides=()) -> AnalysisReport:
    """Execute a configuration and return the validated report."""
    if cfg.get("command") not in HANDLERS:
        raise ConfigError(f"unknown command {cfg.get('command')!r}; use one of {COMMANDS}")
    cfg, model, tol, workers = resolve(cfg, region_overrides)
    report = HANDLERS[cfg["command"]](cfg, model, tol, workers)
    report.config = json.loads(json.dumps(report.config))
    report.validate()
    return report


def write_outputs(report: AnalysisReport, cfg: dict) -> None:
    out = cfg.get("output", {})
    path = out.get("json")
    if path:
        path = Path(path)
        for name in report.tables:
            csv_path = out.get("csv") if len(report.tables) == 1 and out.get("csv") else None
            csv_path = Path(csv_path) if csv_path else path.with_name(f"{path.stem}_{name}.csv")
            report.write_csv(name, csv_path)
            report.files[name] = str(csv_path)
        report.files["report"] = str(path)
        report.save(path)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, overrides = config_from_args(args)
        report = run(cfg, overrides)
        write_outputs(report, report.config)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(report.summary())
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
