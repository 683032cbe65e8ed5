"""Command-line entry point.

Every command writes into ``--out``: a ``config.json`` snapshot plus its
own results. Exit status is 0 on success, 1 on a runtime failure and 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ..identify.aging import fit_aging
from ..identify.sso import build_sso_schedule, sso_identify
from ..identify.static import (StaticIdentified, derive_macro, identify_quasi_static, solve_stoich_limits)
from ..model.balance import find_stoich_for_ocv
from ..model.params import TRANSPORT_NAMES
from ..profiles import CurrentProfile, PulseSet, gen_quasi_static, pulse_profile
from ..sensitivity import SensitivityMatrix, assign
from .config import RunConfig
from .io import load_trace, save_trace, write_json
from .metrics import evaluate_metrics
from .pipeline import SensitivityRun, param_space, predicted_traces, run_sensitivity, run_twin
from .plots import ocv_svg, voltage_fit_svg
from .stages import STAGE_CYCLES, aging_history, get_stage
from .twin import generate_twin


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.raw["harness"]["seed"] = args.seed
    if getattr(args, "noise", None) is not None:
        cfg.raw["harness"]["noise"] = args.noise
    return cfg


def _out(args, cfg) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.snapshot(), out / "config.json")
    return out


def _profile_of(trace, label: str = "") -> CurrentProfile:
    dt = np.diff(np.concatenate([[0.0], trace.time]))
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise ValueError("trace must be uniformly sampled from t = dt")
    return CurrentProfile(float(dt[0]), trace.current, label)


def cmd_gen_static(args) -> None:
    cfg = _config(args)
    out = _out(args, cfg)
    stage = get_stage(args.stage)
    profile, _ = gen_quasi_static(stage.params(cfg.cell()), cfg.quasi_static(),
                                  (stage.stoich_neg_t0, stage.stoich_pos_t0))
    twin = generate_twin(stage, profile, cfg.noise, cfg.seed, model="static", params=cfg.cell())
    profile.to_csv(out / "profile.csv")
    save_trace(twin.traces[0], out / "quasi_static.csv")
    write_json(twin.truth_record(), out / "truth.json")


def cmd_gen_dynamic(args) -> None:
    cfg = _config(args)
    out = _out(args, cfg)
    stage = get_stage(args.stage)
    pc = cfg.pulse()
    profiles = [pulse_profile(d, pc) for d in pc.durations]
    twin = generate_twin(stage, profiles, cfg.noise, cfg.seed, params=cfg.cell(), start_ocv=pc.start_ocv)
    for p, tr in zip(profiles, twin.traces):
        p.to_csv(out / f"{p.label}_profile.csv")
        save_trace(tr, out / f"{p.label}.csv")
    write_json(twin.truth_record(), out / "truth.json")


def cmd_identify_static(args) -> None:
    cfg = _config(args)
    out = _out(args, cfg)
    trace = load_trace(args.trace)
    known = cfg.cell()
    qs = cfg.quasi_static()
    sid = identify_quasi_static(trace, _profile_of(trace), known, cfg.static_solver(),
                                nominal_capacity_mah=qs.capacity_mah)
    write_json({"identified": sid.as_dict(), "residual": sid.residual, "poor_fit": sid.poor_fit,
                "solver": sid.outcome.to_dict() if sid.outcome else None}, out / "results.json")
    if sid.outcome is not None:
        sid.outcome.history_csv(out / "convergence.csv")


def cmd_derive_macro(args) -> None:
    cfg = _config(args)
    out = _out(args, cfg)
    sid = StaticIdentified(**json.loads(Path(args.static_result).read_text())["identified"])
    h = cfg.raw["harness"]
    known = cfg.cell()
    limits = solve_stoich_limits(sid, known, h["v_min"], h["v_max"])
    macro = derive_macro(limits, known, h["v_min"], h["v_max"])
    write_json(macro.to_dict(), out / "macro.json")
    ocv_svg(macro, out / "ocv.svg")


def cmd_sensitivity(args) -> None:
    cfg = _config(args)
    if args.M is not None:
        cfg.raw["sensitivity"]["M"] = args.M
    out = _out(args, cfg)
    run = run_sensitivity(cfg, out)
    write_json({"wall_time": run.wall_time}, out / "timing.json")


def _load_sensitivity(path) -> tuple:
    sens = SensitivityMatrix.from_csv(path)
    return sens, assign(sens)


def cmd_identify_dynamic(args) -> None:
    cfg = _config(args)
    out = _out(args, cfg)
    traces = [load_trace(p) for p in args.traces]
    if args.sensitivity:
        sens, a = _load_sensitivity(args.sensitivity)
        schedule = build_sso_schedule(sens, a, cfg.sso().prelim_solver.kind, cfg.sso().joint_solver.kind)
    else:
        schedule = run_sensitivity(cfg, out / "sensitivity").schedule
    truth = None
    if args.stage is not None:
        stage = get_stage(args.stage)
        params = stage.params(cfg.cell())
        truth = dict(zip(TRANSPORT_NAMES, map(float, params.transport.as_vector())))
    else:
        params = cfg.cell()
    # the pulses start at rest, so the first sample is the open-circuit voltage
    start = find_stoich_for_ocv(params, float(traces[0].voltage[0]))
    profiles = [_profile_of(t, Path(p).stem) for t, p in zip(traces, args.traces)]
    ps = PulseSet.from_profiles(profiles, start, cfg.pulse().inst_window)
    result = sso_identify(ps, traces, schedule, param_space(cfg), params, cfg.sso(), truth=truth)
    metrics = evaluate_metrics(result, truth, traces, ps, params)
    write_json({"sso": result.to_dict(), "metrics": metrics.to_dict()}, out / "results.json")
    write_json(metrics.runtimes, out / "timing.json")
    voltage_fit_svg(traces, predicted_traces(ps, params, result), [p.label for p in profiles],
                    out / "voltage_fit.svg")


def cmd_fit_aging(args) -> None:
    cfg = _config(args)
    out = _out(args, cfg)
    if args.history:
        with open(args.history, newline="") as fh:
            rows = list(csv.reader(fh))
        hist = np.array([[float(v) for v in r] for r in rows[1:] if r])
    else:
        hist = aging_history()
    coeffs = fit_aging(hist)
    write_json({**coeffs.to_dict(), "residuals": [list(r) for r in coeffs.residuals]}, out / "aging.json")


def cmd_twin(args) -> None:
    cfg = _config(args)
    if args.M is not None:
        cfg.raw["sensitivity"]["M"] = args.M
    if args.baseline:
        cfg.raw["harness"]["baseline"] = True
    stages = [int(s) for s in args.stages.split(",")] if args.stages else cfg.raw["harness"]["stages"]
    for s in stages:
        get_stage(s)
    cfg.raw["harness"]["stages"] = stages
    out = Path(args.out)
    sens = None
    if args.sensitivity:
        m, a = _load_sensitivity(args.sensitivity)
        sched = build_sso_schedule(m, a)
        sens = SensitivityRun(m, a, sched, None, 0.0)
    summary = run_twin(cfg, stages, out, sens)
    print(_report_lines(summary))


def _report_lines(summary: dict) -> str:
    lines = [f"seed {summary['seed']}  noise {summary['noise_V']:g} V"]
    for c, rec in summary["stages"].items():
        st, dy = rec["static"], rec["dynamic"]
        worst_static = max(st["relative_errors"].values())
        errs = dy["metrics"].get("relative_errors", {})
        rm = dy["metrics"]["rmse_V"]
        lines.append(f"stage {c}: capacity {st['macro']['capacity_mAh']:.1f} mAh, "
                     f"static worst error {100 * worst_static:.3f}%, "
                     f"transport errors " + ", ".join(f"{k} {100 * v:.2f}%" for k, v in errs.items())
                     + f", max RMSE {1e3 * max(rm.values()):.3f} mV")
    return "\n".join(lines)


def cmd_report(args) -> None:
    run = Path(args.run)
    summary = json.loads((run / "results.json").read_text())
    text = _report_lines(summary)
    (run / "report.txt").write_text(text + "\n")
    print(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellident", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, out=True, noise=False):
        p = sub.add_parser(name)
        p.set_defaults(func=fn)
        p.add_argument("--config", default=None, help="run configuration JSON")
        p.add_argument("--seed", type=int, default=None)
        if out:
            p.add_argument("--out", required=True, help="output directory")
        if noise:
            p.add_argument("--noise", type=float, default=None, help="voltage noise std (V)")
        return p

    for name, fn in (("gen-static", cmd_gen_static), ("gen-dynamic", cmd_gen_dynamic)):
        p = add(name, fn, noise=True)
        p.add_argument("--stage", type=int, default=0, choices=STAGE_CYCLES)
    add("identify-static", cmd_identify_static).add_argument("--trace", required=True)
    add("derive-macro", cmd_derive_macro).add_argument("--static-result", required=True)
    add("sensitivity", cmd_sensitivity).add_argument("--M", type=int, default=None)
    p = add("identify-dynamic", cmd_identify_dynamic)
    p.add_argument("--traces", nargs="+", required=True, help="one trace CSV per pulse, shortest first")
    p.add_argument("--sensitivity", default=None, help="sensitivity CSV from the sensitivity command")
    p.add_argument("--stage", type=int, default=None, choices=STAGE_CYCLES,
                   help="twin stage whose truths are known (enables error reporting)")
    add("fit-aging", cmd_fit_aging).add_argument("--history", default=None)
    p = add("twin", cmd_twin, noise=True)
    p.add_argument("--stages", default=None, help="comma-separated cycle counts, e.g. 0,2000")
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--sensitivity", default=None, help="reuse a sensitivity CSV")
    p.add_argument("--baseline", action="store_true", help="also run the joint PSO baseline")
    p = add("report", cmd_report, out=False)
    p.add_argument("--run", required=True, help="output directory of a twin run")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"cellident {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run_cli(argv) -> int:
    """Like :func:`main` but returns 2 on usage errors instead of exiting."""
    try:
        return main(argv)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
