import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import PchipInterpolator

from cellident.model.balance import ConservationLine, OcvRangeError, find_stoich_for_ocv
from cellident.model.ocp import OcpCurve, OcpDomainError, graphite_ocp, nmc811_ocp, ocp_eval
from cellident.model.params import (
    FARADAY, CellParameters, TransportParams, contact_resistance_from_area_specific,
    contact_resistance_to_area_specific, default_cell, params_from_json, params_to_json,
)
from cellident.model.spme import (
    CellState, SaturationError, dynamic_step, electrolyte_inventory, init_state, simulate,
    simulate_states, solid_inventory, state_ocv,
)
from cellident.model.static import DepletionError, ocv, static_step, static_voltage
from cellident.model.trace import VoltageTrace
from cellident.profiles import CurrentProfile, pulse_profile


def _toy_curve():
    x = np.linspace(0.0, 1.0, 21)
    return OcpCurve(x, 4.2 - x + 0.05 * np.sin(6 * x))


# ---- parameters ------------------------------------------------------------

def test_transport_defaults_and_validation():
    t = TransportParams()
    assert t.ds_factor_neg == t.ds_factor_pos == t.de_factor == t.kappa_factor == 1.0
    with pytest.raises(ValueError):
        TransportParams(contact_resistance=-1.0)
    with pytest.raises(ValueError):
        TransportParams(transference=1.0)


def test_composition_rejects_overfull_region(cell):
    with pytest.raises(ValueError):
        cell.with_composition(eps_s_neg=0.8, eps_e_neg=0.3)


def test_contact_resistance_unit_round_trip():
    r = contact_resistance_from_area_specific(1.4e-3, 0.1)
    assert r == pytest.approx(1.4e-2)
    assert contact_resistance_to_area_specific(r, 0.1) == pytest.approx(1.4e-3)


def test_params_json_round_trip(tmp_path, cell):
    path = tmp_path / "cell.json"
    params_to_json(cell, path)
    back = params_from_json(path)
    assert back.composition == cell.composition
    assert back.transport == cell.transport
    assert back.geometry == cell.geometry
    assert back.materials.cs_max_neg == pytest.approx(cell.materials.cs_max_neg, rel=1e-12)
    x = np.linspace(0.01, 0.99, 17)
    np.testing.assert_allclose(back.materials.ocp_pos(x), cell.materials.ocp_pos(x), rtol=0, atol=1e-12)
    assert set(json.loads(path.read_text())) == {"geometry", "materials", "composition", "transport"}


# ---- OCP interpolation ------------------------------------------------------

def test_ocp_exact_at_node():
    x = np.linspace(0.0, 1.0, 21)
    u = 4.4 - x
    u[10] = 3.90
    curve = OcpCurve(x, u)
    assert ocp_eval(curve, 0.5) == pytest.approx(3.90, abs=1e-15)


def test_ocp_between_nodes_stays_in_bracket():
    x = np.linspace(0.0, 1.0, 21)
    u = np.where(x < 0.45, 4.00, 3.80)
    curve = OcpCurve(x, u)
    for s in np.linspace(0.4, 0.6, 41):
        assert 3.80 - 1e-12 <= ocp_eval(curve, s) <= 4.00 + 1e-12


def test_ocp_matches_reference_pchip():
    curve = _toy_curve()
    ref = PchipInterpolator(curve.stoich, curve.potential)
    mids = 0.5 * (curve.stoich[1:] + curve.stoich[:-1])
    np.testing.assert_allclose(ocp_eval(curve, mids), ref(mids), rtol=0, atol=1e-9)


@pytest.mark.parametrize("s", [-0.01, 1.01, np.nan])
def test_ocp_domain_error(s):
    with pytest.raises(OcpDomainError):
        ocp_eval(_toy_curve(), s)


def test_ocp_validation():
    with pytest.raises(ValueError):
        OcpCurve(np.linspace(0, 1, 10), np.ones(10))
    x = np.linspace(0, 1, 21)
    with pytest.raises(ValueError):
        OcpCurve(x[::-1], np.ones(21))


def test_builtin_curves_are_dense_and_monotone():
    for curve in (graphite_ocp(), nmc811_ocp()):
        assert curve.stoich.size >= 50
        s = np.linspace(0.02, 0.98, 500)
        assert np.all(np.diff(curve(s)) <= 1e-12)


def test_ocp_csv_round_trip(tmp_path):
    curve = _toy_curve()
    curve.to_csv(tmp_path / "c.csv")
    back = OcpCurve.from_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.stoich, curve.stoich)
    np.testing.assert_array_equal(back.potential, curve.potential)


# ---- quasi-static model -----------------------------------------------------

def test_static_step_zero_current(cell):
    v, xn, xp = static_step(0.486, 0.536, 0.0, 200.0, cell)
    assert (xn, xp) == (0.486, 0.536)
    assert v == pytest.approx(float(ocv(cell, 0.486, 0.536)), abs=1e-15)


def test_static_step_antisymmetry(cell):
    _, xn, xp = static_step(0.486, 0.536, 2.2, 200.0, cell)
    _, xn2, xp2 = static_step(xn, xp, -2.2, 200.0, cell)
    assert xn2 == pytest.approx(0.486, abs=1e-15)
    assert xp2 == pytest.approx(0.536, abs=1e-15)


def test_static_step_hand_arithmetic(cell):
    g, m, c = cell.geometry, cell.materials, cell.composition
    cs_max_neg = m.density_neg / m.molar_mass_neg
    expected = 2.2 * 200.0 / (FARADAY * cs_max_neg * c.eps_s_neg * g.area_neg * g.thick_neg)
    _, xn, _ = static_step(0.486, 0.536, 2.2, 200.0, cell)
    assert (0.486 - xn) == pytest.approx(expected, rel=1e-12)


def test_static_depletion_names_electrode(cell):
    with pytest.raises(DepletionError) as exc:
        static_step(0.01, 0.5, 50.0, 3600.0, cell)
    assert exc.value.electrode == "negative"
    with pytest.raises(ValueError):
        static_step(0.5, 0.5, 1.0, 0.0, cell)


def test_static_voltage_matches_stepping(cell):
    currents = np.full(20, 0.022)
    v = static_voltage(currents, 200.0, cell, 0.486, 0.536)
    xn, xp, ref = 0.486, 0.536, []
    for i in currents:
        u, xn, xp = static_step(xn, xp, i, 200.0, cell)
        ref.append(u)
    np.testing.assert_allclose(v, ref, rtol=0, atol=1e-12)


# ---- dynamic model ----------------------------------------------------------

def test_init_state_examples(cell):
    s = init_state(cell, 0.486, 0.536)
    m = cell.materials
    np.testing.assert_array_equal(s.solid_conc_neg, np.full(s.solid_conc_neg.size, 0.486 * m.cs_max_neg))
    s.check(cell)
    assert state_ocv(cell, s) == float(m.ocp_pos(0.536) - m.ocp_neg(0.486))
    with pytest.raises(ValueError):
        init_state(cell, 1.0, 0.5)


def test_cell_state_rejects_negative_concentration():
    with pytest.raises(ValueError):
        CellState(np.array([-1.0, 1.0]), np.ones(2), np.ones(25))


def test_equilibrium_is_fixed_point(cell):
    s = init_state(cell, 0.486, 0.536)
    v, s2 = dynamic_step(s, 0.0, 1.0, cell)
    assert v == pytest.approx(state_ocv(cell, s), abs=1e-12)
    for a, b in ((s.solid_conc_neg, s2.solid_conc_neg), (s.solid_conc_pos, s2.solid_conc_pos),
                 (s.elyte_conc, s2.elyte_conc)):
        np.testing.assert_allclose(b, a, rtol=1e-12)
    with pytest.raises(ValueError):
        dynamic_step(s, 1.0, 2.0, cell)


def test_zero_profile_gives_constant_ocv(cell):
    s = init_state(cell, 0.486, 0.536)
    tr = simulate(CurrentProfile(0.5, np.zeros(50)), cell, s)
    np.testing.assert_allclose(tr.voltage, state_ocv(cell, s), rtol=0, atol=1e-12)


def test_lithium_and_electrolyte_conservation(cell):
    s0 = init_state(cell, 0.486, 0.536)
    prof = pulse_profile(120.0)
    _, s1 = simulate_states(prof.samples, prof.dt, cell, s0)
    moles = prof.charge() / FARADAY
    n0, p0 = solid_inventory(cell, s0)
    n1, p1 = solid_inventory(cell, s1)
    assert (n0 - n1) == pytest.approx(moles, rel=1e-6)
    assert (p1 - p0) == pytest.approx(moles, rel=1e-6)
    assert electrolyte_inventory(cell, s1) == pytest.approx(electrolyte_inventory(cell, s0), rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=5, max_size=40))
def test_conservation_property(currents):
    cell = default_cell()
    s0 = init_state(cell, 0.486, 0.536)
    _, s1 = simulate_states(np.array(currents), 1.0, cell, s0)
    moles = sum(currents) / FARADAY
    n0, p0 = solid_inventory(cell, s0)
    n1, p1 = solid_inventory(cell, s1)
    scale = max(abs(moles), 1e-9)
    assert abs((n0 - n1) - moles) <= 1e-6 * scale + 1e-12 * n0
    assert abs((p1 - p0) - moles) <= 1e-6 * scale + 1e-12 * p0
    assert electrolyte_inventory(cell, s1) == pytest.approx(electrolyte_inventory(cell, s0), rel=1e-6)


def test_vanishing_current_matches_static(cell):
    prof = CurrentProfile(200.0, np.full(10, 0.022))
    tr = simulate(prof, cell, init_state(cell, 0.486, 0.536))
    ref = static_voltage(prof.samples, prof.dt, cell, 0.486, 0.536)
    assert np.max(np.abs(tr.voltage - ref)) < 1e-3


def test_excitation_tends_to_straight_line(cell, pulse_set, pulse_traces):
    v = pulse_traces[3].voltage
    cuts = pulse_set.cuts[3]
    d2 = np.abs(np.diff(v[cuts.onset + 1:cuts.n2 + 1], 2))
    n = int(round(20.0 / pulse_set.profiles[3].dt))
    assert d2[-n:].max() < 0.1 * d2[:n].max()


def test_instant_drop_monotone_in_contact_resistance(cell):
    prof = pulse_profile(15.0)
    init = init_state(cell, 0.486, 0.536)
    onset = int(np.flatnonzero(prof.samples)[0])
    drops = []
    for rc in np.linspace(0.0, 0.04, 5):
        tr = simulate(prof, cell.with_transport(contact_resistance=rc), init)
        drops.append(tr.voltage[onset - 1] - tr.voltage[onset])
    assert np.all(np.diff(drops) > 0)


def test_simulation_is_deterministic(cell):
    prof = pulse_profile(30.0)
    init = init_state(cell, 0.486, 0.536)
    a, b = simulate(prof, cell, init), simulate(prof, cell, init)
    assert a == b
    assert a.voltage.tobytes() == b.voltage.tobytes()


def test_double_resolution_changes_voltage_little(cell):
    prof = pulse_profile(120.0)
    coarse = simulate(prof, cell, init_state(cell, 0.486, 0.536))
    fine = simulate(prof, cell, init_state(cell, 0.486, 0.536, n_r=20, n_x=(20, 10, 20)), max_dt=0.05)
    assert np.max(np.abs(fine.voltage - coarse.voltage)) < 2e-4


def test_saturation_raises(cell):
    with pytest.raises(SaturationError):
        simulate(CurrentProfile(1.0, np.full(600, 20.0)), cell, init_state(cell, 0.05, 0.9))


def test_trace_validation():
    with pytest.raises(ValueError):
        VoltageTrace([1.0, 1.0], [0, 0], [3.0, 3.0])
    with pytest.raises(ValueError):
        VoltageTrace([1.0, 2.0], [0, 0], [3.0, np.inf])


# ---- electrode balancing ----------------------------------------------------

def test_find_stoich_endpoint(cell):
    line = ConservationLine.through(cell, 0.486, 0.536)
    lo, hi = line.span
    xn, xp = find_stoich_for_ocv(cell, line.window[1])
    assert (xn, xp) == pytest.approx(line.point(lo), abs=1e-12)


def test_find_stoich_matches_grid_scan(cell):
    line = ConservationLine.through(cell, 0.486, 0.536)
    lo, hi = line.span
    s = np.linspace(lo, hi, 10_001)
    v = line.ocv(s)
    xn, xp = find_stoich_for_ocv(cell, 3.8)
    k = int(np.argmin(np.abs(v - 3.8)))
    gn, gp = line.point(s[k])
    step = (hi - lo) / 10_000
    assert abs(xn - gn) <= step / line.sites_neg
    assert abs(xp - gp) <= step / line.sites_pos
    m = cell.materials
    assert float(m.ocp_pos(xp) - m.ocp_neg(xn)) == pytest.approx(3.8, abs=1e-6)


def test_find_stoich_out_of_window(cell):
    with pytest.raises(OcvRangeError):
        find_stoich_for_ocv(cell, 5.0)
