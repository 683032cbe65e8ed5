import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellident.identify.sso import (
    JOINT, PRELIMINARY, EmptyScheduleError, SsoConfig, SsoSchedule, SsoStep, SsoStepError,
    baseline_joint_pso, build_sso_schedule, pulse_rmse, segment_mode, sso_identify,
)
from cellident.model.params import TRANSPORT_NAMES
from cellident.optimize import SolverConfig
from cellident.sensitivity import Assignment, ParamSpace, SensitivityMatrix, assign

SYMBOLS = ("R_c", "sigma_s-", "sigma_s+", "D_s-", "D_s+", "D_e", "kappa", "t+")


def _sens(s):
    return SensitivityMatrix(np.asarray(s, dtype=float), SYMBOLS, tuple(f"z{i}" for i in range(1, 13)))


def test_hand_built_schedule():
    s = np.zeros((8, 12))
    s[0, :4] = [0.9, 0.6, 0.5, 0.5]  # R_c peaks on segment 1
    s[6, :4] = [0.3, 0.55, 0.2, 0.1]  # kappa peaks on segment 2; spread smallest there
    sched = build_sso_schedule(_sens(s), Assignment(["R_c", "kappa"], [], []))
    got = [(st_.kind, st_.params, st_.segment) for st_ in sched.steps]
    assert got == [
        (PRELIMINARY, ("contact_resistance",), 1),
        (PRELIMINARY, ("kappa_factor",), 2),
        (JOINT, ("contact_resistance", "kappa_factor"), 2),
    ]
    assert [st_.solver for st_ in sched.steps] == ["local", "local", "pso"]
    assert sched.steps[-1].describe() == "joint[R_c,kappa]@zeta2-I"


def test_transient_regime_searches_both_pools():
    s = np.zeros((8, 12))
    s[4, 4:] = [0.1, 0.1, 0.1, 0.1, 0.6, 0.2, 0.2, 0.2]
    s[7, 4:] = [0.4, 0.1, 0.1, 0.1, 0.2, 0.2, 0.1, 0.1]
    sched = build_sso_schedule(_sens(s), Assignment([], ["D_s+", "t+"], []))
    assert [x.segment for x in sched.steps] == [9, 5, 10]
    assert [x.mode for x in sched.steps] == ["R", "E", "R"]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.floats(-0.05, 1.1), min_size=12, max_size=12), min_size=8, max_size=8))
def test_schedule_invariants(rows):
    sens = _sens(rows)
    a = assign(sens)
    kept = a.set_instant + a.set_transient
    if not kept:
        with pytest.raises(EmptyScheduleError):
            build_sso_schedule(sens, a)
        return
    sched = build_sso_schedule(sens, a)
    prelim = [p for x in sched.steps if x.kind == PRELIMINARY for p in x.params]
    assert sorted(prelim) == sorted(dict(zip(SYMBOLS, TRANSPORT_NAMES))[k] for k in kept)
    regimes = [x.regime for x in sched.steps]
    assert regimes == sorted(regimes)  # "I" < "T"
    for x in sched.steps:
        assert x.mode == segment_mode(x.segment)
        assert (x.segment <= 4) == (x.regime == "I")
    assert sum(x.kind == JOINT for x in sched.steps) == (len(a.set_instant) > 0) + (len(a.set_transient) > 0)


def test_schedule_validation():
    pre = SsoStep(PRELIMINARY, ("kappa_factor",), 2, "I", "local", "I")
    joint = SsoStep(JOINT, ("kappa_factor",), 2, "I", "pso", "I")
    with pytest.raises(EmptyScheduleError):
        SsoSchedule(())
    with pytest.raises(ValueError):
        SsoSchedule((joint, pre))
    with pytest.raises(ValueError):
        SsoSchedule((pre,))
    t_pre = SsoStep(PRELIMINARY, ("transference",), 8, "E", "local", "T")
    t_joint = SsoStep(JOINT, ("transference",), 8, "E", "pso", "T")
    with pytest.raises(ValueError):
        SsoSchedule((t_pre, t_joint, pre, joint))
    assert len(SsoSchedule((pre, joint, t_pre, t_joint))) == 4


def test_segment_mode():
    assert [segment_mode(n) for n in (1, 4, 5, 8, 9, 12)] == list("IIEERR")
    with pytest.raises(ValueError):
        segment_mode(13)


def _truth_empirical(cell, skip):
    return {n: float(v) for n, v in zip(TRANSPORT_NAMES, cell.transport.as_vector()) if n not in skip}


SMALL = SsoConfig(seed=0, prelim_solver=SolverConfig(kind="local", max_iter=60, xatol=1e-6, initial_step=0.25),
                  joint_solver=SolverConfig(kind="pso", population=10, max_iter=8, patience=4))


def test_single_parameter_run(cell, pulse_set, pulse_traces):
    sched = SsoSchedule((
        SsoStep(PRELIMINARY, ("transference",), 8, "E", "local", "T"),
        SsoStep(JOINT, ("transference",), 8, "E", "pso", "T"),
    ))
    cfg = SsoConfig(**{**SMALL.__dict__, "empirical": _truth_empirical(cell, {"transference"})})
    res = sso_identify(pulse_set, pulse_traces, sched, ParamSpace(), cell, cfg, truth=_truth_empirical(cell, ()))
    pre, joint = res.steps
    est = pre.x["transference"]
    assert est == pytest.approx(0.38, rel=0.01)
    lo, hi = joint.lower["transference"], joint.upper["transference"]
    assert lo == pytest.approx(0.95 * est) and hi == pytest.approx(1.05 * est)
    assert lo <= joint.x["transference"] <= hi
    assert res.relative_errors["transference"] < 0.01
    assert res.evaluations == pre.evaluations + joint.evaluations
    assert max(pulse_rmse(pulse_set, pulse_traces, cell, res.values)) < 1e-4
    d = res.to_dict()
    assert d["mae_paper"] == d["relative_errors"]
    assert "wall_time" not in d and "wall_time" in res.to_dict(timings=True)


def test_joint_box_stays_in_range(cell, pulse_set, pulse_traces):
    sched = SsoSchedule((
        SsoStep(PRELIMINARY, ("transference",), 8, "E", "local", "T"),
        SsoStep(JOINT, ("transference",), 8, "E", "pso", "T"),
    ))
    base = ParamSpace()
    upper = list(base.upper)
    upper[TRANSPORT_NAMES.index("transference")] = 0.385
    space = ParamSpace(base.names, base.lower, tuple(upper))
    cfg = SsoConfig(**{**SMALL.__dict__, "empirical": _truth_empirical(cell, {"transference"})})
    joint = sso_identify(pulse_set, pulse_traces, sched, space, cell, cfg).steps[1]
    assert joint.upper["transference"] == 0.385
    assert joint.x["transference"] <= 0.385


def test_joint_box_for_zero_estimate(cell, pulse_set, pulse_traces):
    sched = SsoSchedule((
        SsoStep(PRELIMINARY, ("contact_resistance",), 1, "I", "local", "I"),
        SsoStep(JOINT, ("contact_resistance",), 1, "I", "pso", "I"),
    ))
    shifted = [t.with_voltage(t.voltage + 0.05 * (t.current != 0)) for t in pulse_traces]
    cfg = SsoConfig(**{**SMALL.__dict__, "empirical": _truth_empirical(cell, {"contact_resistance"})})
    res = sso_identify(pulse_set, shifted, sched, ParamSpace(), cell, cfg)
    joint = res.steps[1]
    assert joint.upper["contact_resistance"] > joint.lower["contact_resistance"]


def test_step_error_carries_partial(cell, pulse_set, pulse_traces):
    sched = SsoSchedule((
        SsoStep(PRELIMINARY, ("transference",), 5, "E", "local", "T"),
        SsoStep(PRELIMINARY, ("de_factor",), 8, "E", "local", "T"),
        SsoStep(JOINT, ("transference", "de_factor"), 5, "E", "pso", "T"),
    ))
    bad = [t.voltage for t in pulse_traces]
    bad[3] = bad[3].copy()
    bad[3][pulse_set.cuts[3].n2 - 5] = np.nan
    with pytest.raises(SsoStepError) as exc:
        sso_identify(pulse_set, bad, sched, ParamSpace(), cell, SMALL)
    assert set(exc.value.partial) == {"transference"}
    assert exc.value.step.params == ("de_factor",)


def test_run_is_seed_deterministic(cell, pulse_set, pulse_traces):
    sched = SsoSchedule((
        SsoStep(PRELIMINARY, ("de_factor",), 6, "E", "local", "T"),
        SsoStep(JOINT, ("de_factor",), 6, "E", "pso", "T"),
    ))
    a = sso_identify(pulse_set, pulse_traces, sched, ParamSpace(), cell, SMALL)
    b = sso_identify(pulse_set, pulse_traces, sched, ParamSpace(), cell, SMALL)
    assert a.to_json() == b.to_json()


def test_config_validation():
    with pytest.raises(ValueError):
        SsoConfig(passes=0)
    with pytest.raises(ValueError):
        SsoConfig(joint_bound=1.5)


def test_baseline_counts_evaluations(cell, pulse_set, pulse_traces):
    names = ("kappa_factor", "transference")
    b = baseline_joint_pso(pulse_set, pulse_traces, names, ParamSpace(), cell,
                           SolverConfig(population=8, max_iter=3, seed=0),
                           fixed=_truth_empirical(cell, names))
    assert b.simulations == 4 * b.outcome.evaluations
    assert np.all(np.diff(b.rmse_history) <= 0)
    assert b.evaluations_to_reach(np.inf) == 8
    assert b.evaluations_to_reach(-1.0) is None
