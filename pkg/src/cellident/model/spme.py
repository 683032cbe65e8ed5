"""Single-particle model with electrolyte dynamics (SPMe).

One representative spherical particle per electrode (finite volume, implicit
Fickian diffusion) plus 1-D electrolyte transport across neg|sep|pos with
Bruggeman-corrected properties. Reaction source terms are explicit,
diffusion implicit; the electrolyte diffusivity is lagged by one step.

The time loop runs in a numba kernel over a batch of transport-parameter
vectors, so populations (Sobol rows, PSO swarms) share one call. Rows that
fail are flagged and produce NaN voltages instead of raising;
:func:`simulate_states` turns a failed single run into an exception.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .params import FARADAY, GAS_CONSTANT, TRANSPORT_NAMES, CellParameters
from .static import ocv
from .trace import VoltageTrace

N_R = 10
N_X = (10, 5, 10)
SHELL_STRETCH = 2.5
MAX_DT = 1.0
BRUGGEMAN = 1.5

OK, SATURATED, DEPLETED = 0, 1, 2


class SimulationError(RuntimeError):
    """Base class for forward-model failures."""


class SaturationError(SimulationError):
    pass


class InstabilityError(SimulationError):
    pass


@dataclass(frozen=True, eq=False)
class CellState:
    """Internal concentrations (mol/m^3).

    ``solid_conc_*`` are radial shell averages ordered centre to surface; the
    electrolyte profile runs from the negative to the positive collector.
    """

    solid_conc_neg: np.ndarray
    solid_conc_pos: np.ndarray
    elyte_conc: np.ndarray

    def __post_init__(self):
        for name in ("solid_conc_neg", "solid_conc_pos", "elyte_conc"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1 or not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ValueError(f"CellState.{name} must be a finite non-negative 1-D profile")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def check(self, params: CellParameters) -> None:
        m = params.materials
        if self.solid_conc_neg.max() > m.cs_max_neg or self.solid_conc_pos.max() > m.cs_max_pos:
            raise ValueError("solid concentration exceeds cs_max")
        _split_nx(self.elyte_conc.size)

    def mean_stoich(self, params: CellParameters):
        """Volume-averaged particle stoichiometries ``(neg, pos)``."""
        m = params.materials
        out = []
        for conc, radius, cmax in ((self.solid_conc_neg, m.particle_radius_neg, m.cs_max_neg),
                                   (self.solid_conc_pos, m.particle_radius_pos, m.cs_max_pos)):
            _, vol = _shell_geometry(radius, conc.size)
            out.append(float(conc @ vol / vol.sum()) / cmax)
        return tuple(out)


def init_state(params: CellParameters, stoich_neg: float, stoich_pos: float,
               n_r: int = N_R, n_x=N_X) -> CellState:
    """Uniform equilibrium state at the given stoichiometries."""
    if not (0 < stoich_neg < 1 and 0 < stoich_pos < 1):
        raise ValueError(f"stoichiometries must lie in (0, 1), got ({stoich_neg}, {stoich_pos})")
    m = params.materials
    return CellState(
        solid_conc_neg=np.full(n_r, stoich_neg * m.cs_max_neg),
        solid_conc_pos=np.full(n_r, stoich_pos * m.cs_max_pos),
        elyte_conc=np.full(sum(n_x), m.electrolyte_conc_nominal),
    )


def state_ocv(params: CellParameters, state: CellState) -> float:
    """Equilibrium voltage of a uniform state (uses the surface shells)."""
    m = params.materials
    return float(ocv(params, state.solid_conc_neg[-1] / m.cs_max_neg,
                     state.solid_conc_pos[-1] / m.cs_max_pos))


# ------------------------------------------------------------ discretisation

def _shell_geometry(radius, n):
    """Shell faces and volumes; shells thin quadratically toward the surface.

    The surface response to a current step is confined to a thin layer at
    first, so resolution is spent there rather than at the centre.
    """
    xi = np.linspace(0.0, 1.0, n + 1)
    r = radius * (1.0 - (1.0 - xi) ** SHELL_STRETCH)
    vol = (r[1:] ** 3 - r[:-1] ** 3) / 3.0  # 4*pi dropped throughout
    return r, vol


def _shell_centroids(r):
    # radius at which a linear profile attains its shell average
    return 0.75 * (r[1:] ** 4 - r[:-1] ** 4) / (r[1:] ** 3 - r[:-1] ** 3)


def _surface_weights(radius, n):
    """Weights ``(w_last, w_prev, w_flux)`` of the surface-concentration estimate.

    A quadratic through the two outermost shell values with the prescribed
    surface gradient ``-flux / D`` gives
    ``c_surf = w_last * c[-1] + w_prev * c[-2] + w_flux * flux / D``.
    """
    r, _ = _shell_geometry(radius, n)
    centre = _shell_centroids(r)
    d1 = centre[-1] - radius
    d2 = centre[-2] - radius
    den = d2 * d2 - d1 * d1
    return d2 * d2 / den, -d1 * d1 / den, d1 * d2 / (d1 + d2)


def _particle_operator(radius, n, diffusivity, dt):
    """Implicit-Euler propagator for spherical diffusion, batched over D.

    Returns ``(P, q)`` such that one step is ``c' = P @ c - dt * R^2 * flux * q``
    with ``flux`` the outward molar flux density at the surface.
    """
    r, vol = _shell_geometry(radius, n)
    centre = _shell_centroids(r)
    D = np.asarray(diffusivity, dtype=float)
    g = (r[1:-1] ** 2 / np.diff(centre))[None, :] * D[:, None]
    A = np.zeros((D.shape[0], n, n))
    i = np.arange(n)
    A[:, i, i] = vol
    A[:, i[:-1], i[:-1]] += dt * g
    A[:, i[1:], i[1:]] += dt * g
    A[:, i[:-1], i[1:]] -= dt * g
    A[:, i[1:], i[:-1]] -= dt * g
    inv = np.linalg.inv(A)
    return np.ascontiguousarray(inv * vol[None, None, :]), np.ascontiguousarray(inv[:, :, -1])


def _split_nx(total: int):
    if total == sum(N_X):
        return N_X
    if total % 5 == 0:
        k = total // 5
        return (2 * k, k, 2 * k)
    raise ValueError(f"cannot infer neg|sep|pos split for {total} electrolyte cells")


@dataclass
class _Grid:
    dx: np.ndarray
    area: np.ndarray
    eps: np.ndarray
    pore_vol: np.ndarray
    ohm_w: np.ndarray  # electrolyte current share * dx / (A eps^b), per cell
    half_res: np.ndarray  # dx / (2 eps^b): half-cell diffusion resistance before /D
    face_area: np.ndarray
    src: np.ndarray  # +share in neg, -share in pos
    n_neg: int
    n_pos: int


def _electrolyte_grid(params: CellParameters, n_x) -> _Grid:
    g, c = params.geometry, params.composition
    nn, ns, npos = n_x
    dx = np.concatenate([np.full(nn, g.thick_neg / nn), np.full(ns, g.thick_sep / ns),
                         np.full(npos, g.thick_pos / npos)])
    area = np.concatenate([np.full(nn, g.area_neg), np.full(ns, g.area_sep), np.full(npos, g.area_pos)])
    eps = np.concatenate([np.full(nn, c.eps_e_neg), np.full(ns, c.eps_e_sep), np.full(npos, c.eps_e_pos)])
    if np.any(eps <= 0):
        raise ValueError("electrolyte volume fractions must be positive")
    # cell-averaged share of the cell current carried by the electrolyte
    share = np.concatenate([(np.arange(nn) + 0.5) / nn, np.ones(ns), 1.0 - (np.arange(npos) + 0.5) / npos])
    eps_b = eps ** BRUGGEMAN
    src = np.concatenate([np.full(nn, 1.0 / nn), np.zeros(ns), np.full(npos, -1.0 / npos)])
    return _Grid(
        dx=dx, area=area, eps=eps, pore_vol=eps * dx * area,
        ohm_w=share * dx / (area * eps_b), half_res=dx / (2.0 * eps_b),
        face_area=np.minimum(area[:-1], area[1:]), src=src, n_neg=nn, n_pos=npos,
    )


# ------------------------------------------------------------------ kernel

@numba.njit(cache=True, inline="always")
def _series(x, coefs, powers):
    out = 0.0
    for t in range(coefs.size):
        p = powers[t]
        if p == 0.0:
            v = 1.0
        elif p == 1.0:
            v = x
        elif p == 2.0:
            v = x * x
        elif p == 3.0:
            v = x * x * x
        elif p == 1.5:
            v = x * np.sqrt(x)
        elif p == 0.5:
            v = np.sqrt(x)
        else:
            v = x ** p
        out += coefs[t] * v
    return out


@numba.njit(cache=True, inline="always")
def _pchip(s, bp, c):
    n = bp.size
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bp[mid] <= s:
            lo = mid
        else:
            hi = mid
    d = s - bp[lo]
    return ((c[0, lo] * d + c[1, lo]) * d + c[2, lo]) * d + c[3, lo]


@numba.njit(cache=True)
def _kernel(currents, n_sub, h, theta, r_series, cs_n0, cs_p0, ce0, Pn, qn, Pp, qp,
            Rn, Rp, wsn, wsp, cmax_n, cmax_p, jn_amp, jp_amp, k_n, k_p, two_rt_f,
            base_dn, base_dp, pore_vol, half_res, face_area, ohm_w, src, n_neg, n_pos,
            de_c, de_p, ka_c, ka_p, c_ref, bp_n, cf_n, bp_p, cf_p,
            V, status, fail_index, fin_n, fin_p, fin_e):
    B = theta.shape[0]
    n_r = cs_n0.size
    nx = ce0.size
    n = currents.size
    cs_n = np.empty(n_r)
    cs_p = np.empty(n_r)
    tmp = np.empty(n_r)
    ce = np.empty(nx)
    G = np.empty(nx - 1)
    cp_ = np.empty(nx)
    dp_ = np.empty(nx)
    rhs = np.empty(nx)
    vol_n = 0.0
    for i in range(n_neg):
        vol_n += pore_vol[i]
    vol_p = 0.0
    for i in range(nx - n_pos, nx):
        vol_p += pore_vol[i]

    for b in range(B):
        fde = theta[b, 5]
        fk = theta[b, 6]
        tplus = theta[b, 7]
        Dn = theta[b, 3] * base_dn
        Dp = theta[b, 4] * base_dp
        for i in range(n_r):
            cs_n[i] = cs_n0[i]
            cs_p[i] = cs_p0[i]
        for i in range(nx):
            ce[i] = ce0[i]
        failed = False
        for k in range(n):
            I = currents[k]
            jn = I * jn_amp
            jp = I * jp_amp
            fn = jn / 96485.33212
            fp = jp / 96485.33212
            s_amp = I * (1.0 - tplus) / 96485.33212
            for _ in range(n_sub):
                # solid diffusion
                for i in range(n_r):
                    acc = 0.0
                    for j in range(n_r):
                        acc += Pn[b, i, j] * cs_n[j]
                    tmp[i] = acc - h * Rn * Rn * fn * qn[b, i]
                for i in range(n_r):
                    cs_n[i] = tmp[i]
                for i in range(n_r):
                    acc = 0.0
                    for j in range(n_r):
                        acc += Pp[b, i, j] * cs_p[j]
                    tmp[i] = acc - h * Rp * Rp * fp * qp[b, i]
                for i in range(n_r):
                    cs_p[i] = tmp[i]
                # electrolyte: implicit diffusion with lagged diffusivity
                for i in range(nx - 1):
                    ra = half_res[i] / (fde * _series(ce[i] / c_ref, de_c, de_p))
                    rb = half_res[i + 1] / (fde * _series(ce[i + 1] / c_ref, de_c, de_p))
                    G[i] = face_area[i] / (ra + rb)
                for i in range(nx):
                    rhs[i] = pore_vol[i] / h * ce[i] + s_amp * src[i]
                # Thomas
                diag = pore_vol[0] / h + G[0]
                cp_[0] = -G[0] / diag
                dp_[0] = rhs[0] / diag
                for i in range(1, nx):
                    diag = pore_vol[i] / h + G[i - 1]
                    up = 0.0
                    if i < nx - 1:
                        diag += G[i]
                        up = -G[i]
                    m = 1.0 / (diag + G[i - 1] * cp_[i - 1])
                    cp_[i] = up * m
                    dp_[i] = (rhs[i] + G[i - 1] * dp_[i - 1]) * m
                ce[nx - 1] = dp_[nx - 1]
                for i in range(nx - 2, -1, -1):
                    ce[i] = dp_[i] - cp_[i] * ce[i + 1]

            css_n = wsn[0] * cs_n[n_r - 1] + wsn[1] * cs_n[n_r - 2] + wsn[2] * fn / Dn
            css_p = wsp[0] * cs_p[n_r - 1] + wsp[1] * cs_p[n_r - 2] + wsp[2] * fp / Dp
            bad_e = False
            for i in range(nx):
                if not (ce[i] > 0.0):
                    bad_e = True
            if bad_e:
                status[b] = 2
                fail_index[b] = k
                failed = True
                break
            if not (css_n > 0.0 and css_n < cmax_n and css_p > 0.0 and css_p < cmax_p):
                status[b] = 1
                fail_index[b] = k
                failed = True
                break
            ce_n = 0.0
            for i in range(n_neg):
                ce_n += ce[i] * pore_vol[i]
            ce_n /= vol_n
            ce_p = 0.0
            for i in range(nx - n_pos, nx):
                ce_p += ce[i] * pore_vol[i]
            ce_p /= vol_p
            u = _pchip(css_p / cmax_p, bp_p, cf_p) - _pchip(css_n / cmax_n, bp_n, cf_n)
            j0n = k_n * np.sqrt(ce_n * css_n * (cmax_n - css_n))
            j0p = k_p * np.sqrt(ce_p * css_p * (cmax_p - css_p))
            eta_n = two_rt_f * np.arcsinh(jn / (2.0 * j0n))
            eta_p = two_rt_f * np.arcsinh(jp / (2.0 * j0p))
            conc = two_rt_f * (1.0 - tplus) * np.log(ce[nx - 1] / ce[0])
            ohm = 0.0
            if I != 0.0:
                for i in range(nx):
                    ohm += ohm_w[i] / _series(ce[i] / c_ref, ka_c, ka_p)
                ohm *= I / fk
            V[b, k] = u + eta_p - eta_n + conc - ohm - I * r_series[b]
        if failed:
            for k2 in range(fail_index[b], n):
                V[b, k2] = np.nan
        for i in range(n_r):
            fin_n[b, i] = cs_n[i]
            fin_p[b, i] = cs_p[i]
        for i in range(nx):
            fin_e[b, i] = ce[i]


@dataclass
class BatchResult:
    """Outcome of :func:`simulate_batch`.

    ``voltage`` is (B, n) with NaN from the failing sample on; ``status``
    holds ``OK``/``SATURATED``/``DEPLETED`` per row and ``fail_index`` the
    first failing sample (-1 if none). ``final_*`` are the end states.
    """

    voltage: np.ndarray
    status: np.ndarray
    fail_index: np.ndarray
    final_neg: np.ndarray
    final_pos: np.ndarray
    final_elyte: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == OK


def transport_matrix(params: CellParameters, overrides=None, batch: int | None = None) -> np.ndarray:
    """(B, 8) transport matrix from ``params`` with optional column overrides.

    ``overrides`` maps transport field names to scalars or (B,) arrays.
    """
    overrides = overrides or {}
    sizes = [np.size(v) for v in overrides.values() if np.ndim(v) > 0]
    B = batch or (max(sizes) if sizes else 1)
    theta = np.tile(params.transport.as_vector(), (B, 1))
    for name, val in overrides.items():
        theta[:, TRANSPORT_NAMES.index(name)] = val
    return theta


def simulate_batch(currents, dt: float, params: CellParameters, theta, init: CellState,
                   max_dt: float = MAX_DT) -> BatchResult:
    """Run the SPMe for every row of ``theta`` (B x 8 transport vectors).

    ``currents[k]`` (A, positive = discharge) is applied over
    ``(k*dt, (k+1)*dt]`` and the voltage is sampled at the end of each
    interval. Intervals longer than ``max_dt`` are sub-stepped.
    """
    currents = np.ascontiguousarray(currents, dtype=float)
    theta = np.ascontiguousarray(np.atleast_2d(theta), dtype=float)
    if theta.shape[1] != len(TRANSPORT_NAMES):
        raise ValueError("theta must have 8 columns")
    if dt <= 0:
        raise ValueError("dt must be positive")
    B = theta.shape[0]
    n_sub = max(1, int(np.ceil(dt / max_dt - 1e-12)))
    h = dt / n_sub

    g, m, comp = params.geometry, params.materials, params.composition
    n_r = init.solid_conc_neg.size
    grid = _electrolyte_grid(params, _split_nx(init.elyte_conc.size))
    Rn, Rp = m.particle_radius_neg, m.particle_radius_pos
    a_n = 3.0 * comp.eps_s_neg / Rn
    a_p = 3.0 * comp.eps_s_pos / Rp
    Pn, qn = _particle_operator(Rn, n_r, theta[:, 3] * m.base_solid_diffusivity_neg, h)
    Pp, qp = _particle_operator(Rp, n_r, theta[:, 4] * m.base_solid_diffusivity_pos, h)
    r_series = (
        theta[:, 0]
        + (comp.film_resistance_neg / (a_n * g.thick_neg)
           + g.thick_neg / (2.0 * theta[:, 1] * comp.eps_s_neg ** BRUGGEMAN)) / g.area_neg
        + (comp.film_resistance_pos / (a_p * g.thick_pos)
           + g.thick_pos / (2.0 * theta[:, 2] * comp.eps_s_pos ** BRUGGEMAN)) / g.area_pos
    )
    de, ka = m.base_electrolyte_diffusivity, m.base_ionic_conductivity
    if de.c_ref != ka.c_ref:
        raise ValueError("electrolyte property fits must share c_ref")
    de_c, de_p = (np.array(v, dtype=float) for v in zip(*de.terms))
    ka_c, ka_p = (np.array(v, dtype=float) for v in zip(*ka.terms))
    on, op = m.ocp_neg._interp, m.ocp_pos._interp

    n = currents.size
    V = np.full((B, n), np.nan)
    status = np.zeros(B, dtype=np.int64)
    fail_index = np.full(B, -1, dtype=np.int64)
    fin_n = np.empty((B, n_r))
    fin_p = np.empty((B, n_r))
    fin_e = np.empty((B, grid.dx.size))
    if B == 0:
        return BatchResult(V, status, fail_index, fin_n, fin_p, fin_e)
    _kernel(
        currents, n_sub, h, theta, r_series,
        np.ascontiguousarray(init.solid_conc_neg), np.ascontiguousarray(init.solid_conc_pos),
        np.ascontiguousarray(init.elyte_conc), Pn, qn, Pp, qp,
        Rn, Rp, np.array(_surface_weights(Rn, n_r)), np.array(_surface_weights(Rp, n_r)), m.cs_max_neg, m.cs_max_pos,
        1.0 / (g.area_neg * a_n * g.thick_neg), -1.0 / (g.area_pos * a_p * g.thick_pos),
        m.reaction_rate_neg, m.reaction_rate_pos,
        2.0 * GAS_CONSTANT * m.temperature / FARADAY,
        m.base_solid_diffusivity_neg, m.base_solid_diffusivity_pos,
        grid.pore_vol, grid.half_res, grid.face_area, grid.ohm_w, grid.src, grid.n_neg, grid.n_pos,
        de_c, de_p, ka_c, ka_p, float(de.c_ref),
        np.ascontiguousarray(on.x), np.ascontiguousarray(on.c),
        np.ascontiguousarray(op.x), np.ascontiguousarray(op.c),
        V, status, fail_index, fin_n, fin_p, fin_e,
    )
    return BatchResult(V, status, fail_index, fin_n, fin_p, fin_e)


def raise_for_status(res: BatchResult, row: int, dt: float, t0: float = 0.0) -> None:
    """Raise the matching :class:`SimulationError` if ``row`` failed."""
    s = int(res.status[row])
    if s == OK:
        return
    t = t0 + (int(res.fail_index[row]) + 1) * dt
    if s == SATURATED:
        raise SaturationError(f"solid surface concentration reached 0 or cs_max at t={t:g} s")
    raise InstabilityError(
        f"electrolyte concentration became non-positive at t={t:g} s (dt={dt:g} s)"
    )


def simulate_states(currents, dt: float, params: CellParameters, init: CellState,
                    max_dt: float = MAX_DT):
    """Single run with ``params.transport``; returns ``(voltage, final_state)``."""
    res = simulate_batch(currents, dt, params, params.transport.as_vector()[None, :], init, max_dt)
    raise_for_status(res, 0, dt)
    return res.voltage[0], CellState(res.final_neg[0], res.final_pos[0], res.final_elyte[0])


def simulate(profile, params: CellParameters, init: CellState, max_dt: float = MAX_DT) -> VoltageTrace:
    """Voltage response to a :class:`~cellident.profiles.CurrentProfile`.

    Sample ``k`` is stamped ``(k + 1) * dt``: the voltage at the end of the
    interval over which ``samples[k]`` was applied.
    """
    currents = np.asarray(profile.samples, dtype=float)
    if currents.size == 0:
        raise ValueError("profile is empty")
    init.check(params)
    v, _ = simulate_states(currents, profile.dt, params, init, max_dt)
    return VoltageTrace(profile.dt * np.arange(1, currents.size + 1), currents, v)


def dynamic_step(state: CellState, current: float, dt: float, params: CellParameters):
    """Advance one interval of at most 1 s; returns ``(voltage, state')``."""
    if dt <= 0 or dt > MAX_DT:
        raise ValueError(f"dynamic_step requires 0 < dt <= {MAX_DT} s, got {dt}")
    v, s = simulate_states([current], dt, params, state)
    return float(v[0]), s


def solid_inventory(params: CellParameters, state: CellState):
    """Moles of lithium held in the solid phase of each electrode ``(neg, pos)``."""
    g, m, c = params.geometry, params.materials, params.composition
    xn, xp = state.mean_stoich(params)
    return (xn * m.cs_max_neg * c.eps_s_neg * g.area_neg * g.thick_neg,
            xp * m.cs_max_pos * c.eps_s_pos * g.area_pos * g.thick_pos)


def electrolyte_inventory(params: CellParameters, state: CellState) -> float:
    grid = _electrolyte_grid(params, _split_nx(state.elyte_conc.size))
    return float(state.elyte_conc @ grid.pore_vol)
