"""End-to-end runs: quasi-static fit, sensitivity, stepwise identification.

Results files hold no wall-clock data; timings go to ``timing.json`` so
that ``results.json`` is byte-identical across reruns with the same config.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..identify.aging import fit_aging
from ..identify.sso import (IdentificationResult, baseline_joint_pso, build_sso_schedule,
                            pulse_rmse, sso_identify)
from ..identify.static import derive_macro, identify_quasi_static, solve_stoich_limits
from ..model.params import TRANSPORT_NAMES, CellParameters
from ..model.spme import init_state, simulate
from ..profiles import PulseSet, gen_pulse_set, gen_quasi_static, pulse_profile
from ..sensitivity import ParamSpace, assign, build_sensitivity_matrix, heatmap_svg
from .config import RunConfig
from .io import save_trace, write_json
from .metrics import evaluate_metrics, relative_errors
from .plots import capacity_svg, convergence_svg, ocv_svg, voltage_fit_svg
from .stages import aging_history, get_stage
from .twin import generate_twin


def param_space(cfg: RunConfig) -> ParamSpace:
    s = cfg.raw["sensitivity"]
    base = ParamSpace()
    return ParamSpace(TRANSPORT_NAMES, tuple(s["lower"] or base.lower), tuple(s["upper"] or base.upper))


@dataclass
class SensitivityRun:
    matrix: object
    assignment: object
    schedule: object
    pulse_set: PulseSet
    wall_time: float

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.to_dict(), "assignment": self.assignment.to_dict(),
                "schedule": self.schedule.to_list()}


def run_sensitivity(cfg: RunConfig, out: Path | None = None, m: int | None = None) -> SensitivityRun:
    """Sensitivity matrix, parameter assignment and schedule on the configured cell."""
    params = cfg.cell()
    t0 = time.perf_counter()
    profiles, start = gen_pulse_set(params, cfg.pulse())
    ps = PulseSet.from_profiles(profiles, start, cfg.pulse().inst_window)
    m = m or int(cfg.raw["sensitivity"]["M"])
    sens = build_sensitivity_matrix(ps, param_space(cfg), params, m=m)
    a = assign(sens, float(cfg.raw["sensitivity"]["threshold"]))
    sched = build_sso_schedule(sens, a)
    run = SensitivityRun(sens, a, sched, ps, time.perf_counter() - t0)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        sens.to_csv(out / "sensitivity.csv")
        heatmap_svg(sens, out / "heatmap.svg")
        write_json(run.to_dict(), out / "assignment.json")
    return run


def _pulse_set_at(cfg: RunConfig, start) -> PulseSet:
    pc = cfg.pulse()
    return PulseSet.from_profiles([pulse_profile(d, pc) for d in pc.durations], start, pc.inst_window)


def run_static_stage(stage, cfg: RunConfig, out: Path | None = None) -> dict:
    """Quasi-static twin fit and the capacity/OCV derived from it."""
    params = stage.params(cfg.cell())
    qs = cfg.quasi_static()
    profile, _ = gen_quasi_static(params, qs, (stage.stoich_neg_t0, stage.stoich_pos_t0))
    twin = generate_twin(stage, profile, cfg.noise, cfg.seed, model="static", params=cfg.cell())
    t0 = time.perf_counter()
    known = cfg.cell()
    sid = identify_quasi_static(twin.traces[0], profile, known, cfg.static_solver(),
                                nominal_capacity_mah=qs.capacity_mah)
    h = cfg.raw["harness"]
    limits = solve_stoich_limits(sid, known, h["v_min"], h["v_max"])
    macro = derive_macro(limits, known, h["v_min"], h["v_max"])
    wall = time.perf_counter() - t0
    res = {
        "identified": sid.as_dict(),
        "residual": sid.residual,
        "poor_fit": sid.poor_fit,
        "evaluations": sid.outcome.evaluations if sid.outcome else 0,
        "truth": stage.static_truth,
        "relative_errors": relative_errors(sid.as_dict(), stage.static_truth),
        "macro": macro.to_dict(),
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_trace(twin.traces[0], out / "quasi_static.csv")
        ocv_svg(macro, out / "ocv.svg")
    return {"result": res, "wall_time": wall, "macro": macro, "static": sid}


def run_dynamic_stage(stage, cfg: RunConfig, sens: SensitivityRun, out: Path | None = None,
                      baseline: bool = False) -> dict:
    """Pulse twin and stepwise identification of the transport parameters.

    The stage's composition truths are the known parameters, so the
    reported errors isolate the transport identification.
    """
    params = stage.params(cfg.cell())
    pc = cfg.pulse()
    profiles = [pulse_profile(d, pc) for d in pc.durations]
    twin = generate_twin(stage, profiles, cfg.noise, cfg.seed, model="spme", params=cfg.cell(),
                         start_ocv=pc.start_ocv)
    ps = _pulse_set_at(cfg, twin.start)
    truth = {n: twin.truth[n] for n in TRANSPORT_NAMES}
    result = sso_identify(ps, twin.traces, sens.schedule, param_space(cfg), params, cfg.sso(), truth=truth)
    metrics = evaluate_metrics(result, truth, twin.traces, ps, params)
    rec = {"sso": result.to_dict(), "metrics": metrics.to_dict(), "start": list(twin.start)}
    timing = {"sso_wall_time": result.wall_time, "steps": metrics.runtimes}
    curves = {r.step.describe(): (r.eval_history, r.history) for r in result.steps}
    if baseline:
        t0 = time.perf_counter()
        b = baseline_joint_pso(ps, twin.traces, result.identified, param_space(cfg), params,
                               cfg.baseline_solver(), fixed=result.fixed)
        timing["baseline_wall_time"] = time.perf_counter() - t0
        rec["baseline"] = baseline_summary(b, result, ps, twin.traces, params)
        curves["joint PSO baseline"] = (b.outcome.eval_history, b.outcome.history)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for tr, p in zip(twin.traces, profiles):
            save_trace(tr, out / f"{p.label}.csv")
        pred = predicted_traces(ps, params, result)
        voltage_fit_svg(twin.traces, pred, [p.label for p in profiles], out / "voltage_fit.svg")
        convergence_svg(curves, out / "convergence.svg")
    return {"result": rec, "timing": timing, "sso": result}


def predicted_traces(ps: PulseSet, params: CellParameters, result: IdentificationResult) -> list:
    p = params.with_transport(**result.values)
    init = init_state(p, *ps.start)
    return [simulate(prof, p, init) for prof in ps.profiles]


def overall_rmse(ps: PulseSet, traces, params, values) -> float:
    r = np.asarray(pulse_rmse(ps, traces, params, values))
    n = np.array([len(p) for p in ps.profiles])
    return float(np.sqrt((r ** 2 * n).sum() / n.sum()))


def baseline_summary(b, result: IdentificationResult, ps, traces, params) -> dict:
    """Compare the stepwise run with a single joint swarm at matched fit quality.

    The swarm's evaluations are counted up to the point where its RMSE over
    all pulses first falls within 10% of the stepwise result's.
    """
    target = overall_rmse(ps, traces, params, result.values)
    reach = b.evaluations_to_reach(1.1 * target)
    ref = reach if reach is not None else b.outcome.evaluations
    return {
        "sso_rmse_V": target,
        "baseline_final_rmse_V": float(b.rmse_history[-1]),
        "baseline_evaluations": b.outcome.evaluations,
        "baseline_simulations": b.simulations,
        "baseline_evaluations_to_match": reach,
        "sso_evaluations": result.evaluations,
        "sso_simulations": result.simulations,
        "evaluation_ratio": result.evaluations / ref,
        "simulation_ratio": result.simulations / (ref * len(ps.profiles)),
        "baseline_x": dict(zip(b.names, map(float, b.outcome.x))),
    }


def run_twin(cfg: RunConfig, stages, out: Path, sens: SensitivityRun | None = None) -> dict:
    """Full twin pipeline over ``stages`` (cycle counts); writes ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.snapshot(), out / "config.json")
    if sens is None:
        sens = run_sensitivity(cfg, out / "sensitivity")
    summary = {"seed": cfg.seed, "noise_V": cfg.noise, "assignment": sens.assignment.to_dict(),
               "schedule": sens.schedule.to_list(), "stages": {}}
    timing = {"sensitivity": sens.wall_time, "stages": {}}
    caps = []
    for c in stages:
        stage = get_stage(c)
        d = out / stage.label
        st = run_static_stage(stage, cfg, d)
        dyn = run_dynamic_stage(stage, cfg, sens, d, baseline=bool(cfg.raw["harness"]["baseline"]))
        rec = {"static": st["result"], "dynamic": dyn["result"]}
        write_json(rec, d / "results.json")
        write_json({"static": st["wall_time"], **dyn["timing"]}, d / "timing.json")
        summary["stages"][str(c)] = rec
        timing["stages"][str(c)] = {"static": st["wall_time"], **dyn["timing"]}
        caps.append((c, st["macro"].capacity, st["static"]))
    summary["capacity_mAh"] = {str(c): cap for c, cap, _ in caps}
    if len(caps) >= 4:
        summary["aging_fit"] = _aging_from_identified(caps)
    if len(caps) >= 2:
        capacity_svg([c for c, _, _ in caps], [cap for _, cap, _ in caps], out / "capacity.svg")
    write_json(summary, out / "results.json")
    write_json(timing, out / "timing.json")
    return summary


def _aging_from_identified(caps) -> dict:
    """Aging fit using identified solid fractions and tabulated film/electrolyte truths."""
    fresh = caps[0][2]
    hist = aging_history([get_stage(c) for c, _, _ in caps])
    for row, (_, _, sid) in zip(hist, caps[1:]):
        row[0] = sid.eps_s_pos - fresh.eps_s_pos
        row[1] = sid.eps_s_neg - fresh.eps_s_neg
    try:
        return fit_aging(hist).to_dict()
    except ValueError as exc:
        return {"error": str(exc)}
