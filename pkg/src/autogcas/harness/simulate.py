"""Closed-loop run: pilot -> GCAS -> AoA/nz filter -> bank filter -> NDI -> INCA -> actuators -> plant."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional

import numpy as np

from ..airframe import DivergenceError, KinematicSingularityError, aero_with_partials, integrate_step
from ..config import SimConfig
from ..fep import alpha_limit, aoa_filter, bank_filter
from ..flight_control import (
    RateCommand,
    inca_allocate,
    ndi_required_moments,
    ndi_virtual_input,
)
from ..gcas import GainSchedule, altitude_decomp, eta_b, gcas_qp, lookup_gains
from ..terrain import sample_height, scan_max
from .log import COLUMNS, CsvSink, SimLog
from .scenario import Scenario


# sink rate (m/s) below which the flight path counts as recovered
RECOVERY_SINK_RATE = 0.5


class SetupError(ValueError):
    pass


class AbortedRunError(RuntimeError):
    """The plant diverged; ``log`` holds every step recorded before the failure."""

    def __init__(self, message: str, log: SimLog):
        super().__init__(message)
        self.log = log


def _clamp(x: float, lim) -> float:
    return min(max(x, lim[0]), lim[1])


def run_scenario(sc: Scenario, cfg: SimConfig, schedule: Optional[GainSchedule] = None,
                 csv_path=None) -> SimLog:
    """Simulate one scenario and return its log.

    The run stops early on ground contact (altitude at or below the terrain
    under the aircraft) and, if ``sc.stop_after_recovery`` is set, once the
    sink rate has stayed below ``RECOVERY_SINK_RATE`` for that many seconds
    after a GCAS activation.
    """
    if sc.gcas and schedule is None:
        raise SetupError("GCAS enabled but no gain schedule given")
    ac = cfg.aircraft if sc.thrust is None else replace(cfg.aircraft, thrust=sc.thrust)
    fep = cfg.fep
    bounds = cfg.bounds
    thr = cfg.activation_threshold
    pmin, pmax = ac.actuator_bank().pos_min, ac.actuator_bank().pos_max

    n_steps = int(round(sc.duration / sc.dt))
    rows = np.empty((n_steps + 1, len(COLUMNS)))
    state = sc.initial
    bank = ac.actuator_bank(sc.surfaces)
    sink = CsvSink(csv_path) if csv_path is not None else None
    terminated = None
    climb_since = None
    activated = False
    n = 0
    nan = math.nan
    try:
        for k in range(n_steps + 1):
            t = k * sc.dt
            surfaces = bank.surfaces
            ad, coeffs, phi_mat = aero_with_partials(state, surfaces, ac)
            h = ad.h
            hdot = -(-state.u * math.sin(state.theta)
                     + state.v * math.sin(state.phi) * math.cos(state.theta)
                     + state.w * math.cos(state.phi) * math.cos(state.theta))
            p_pil, q_pil, r_pil = sc.script.at(t)

            if sc.terrain is None:
                h_dted = h_ter = 0.0
            else:
                h_ter = sample_height(sc.terrain, state.xE, state.yE)
                h_dted = scan_max(sc.terrain, (state.xE, state.yE), state.psi, cfg.scan)

            # pitch channel: GCAS then angle-of-attack / load-factor protection
            d_h = altitude_decomp(state, ad, coeffs, ac)
            eta = eta_b(h, hdot, sc.h_buff, h_dted)
            if sc.gcas:
                kappa = lookup_gains(schedule, state.phi, state.theta, ad.vt)
                g_res = gcas_qp(q_pil, d_h, eta, kappa, bounds.q, thr)
                q_gcas, g_act, g_feas, g_marg = g_res.command, g_res.active, g_res.feasible, g_res.margin
                k1, k2 = kappa.k1, kappa.k2
            else:
                q_gcas, g_act, g_feas, g_marg = _clamp(q_pil, bounds.q), False, True, nan
                k1 = k2 = nan
            a_lim = alpha_limit(ad, coeffs, ac, fep)
            if sc.fep:
                a_res = aoa_filter(q_gcas, state, ad, coeffs, ac, fep, bounds.q)
                q_cmd, a_act, a_feas, a_marg = a_res.command, a_res.active, a_res.feasible, a_res.margin
                b_res = bank_filter(p_pil, state, fep, g_act, bounds.p)
                p_cmd, b_act, b_feas, b_marg = b_res.command, b_res.active, b_res.feasible, b_res.margin
            else:
                q_cmd, a_act, a_feas, a_marg = q_gcas, False, True, nan
                p_cmd, b_act, b_feas, b_marg = _clamp(p_pil, bounds.p), False, True, nan
            r_cmd = _clamp(r_pil, bounds.r)

            # rate CAS and incremental allocation
            rates = (state.p, state.q, state.r)
            wdot_c = ndi_virtual_input(RateCommand(p_cmd, q_cmd, r_cmd), rates, cfg.cas)
            tau_c = ndi_required_moments(wdot_c, rates, ad.qbar, ac).as_array()
            dtau = tau_c - np.array([coeffs.Cl, coeffs.Cm, coeffs.Cn])
            alloc = inca_allocate(dtau, phi_mat, surfaces, pmin, pmax)
            cmd = alloc.surfaces.as_array()

            row = rows[n]
            row[0] = t
            row[1:13] = state.as_array()
            row[13:44] = (ad.alpha, ad.beta, ad.vt, ad.qbar, h, hdot, coeffs.nz,
                          p_pil, q_pil, r_pil, q_gcas, q_cmd, p_cmd, r_cmd,
                          g_act, g_feas, g_marg, a_act, a_feas, a_marg, a_lim,
                          b_act, b_feas, b_marg, k1, k2, h_dted, h_ter, eta.b, d_h.f, d_h.g)
            row[44:49] = cmd
            row[49:54] = bank.deflection
            row[54] = alloc.residual
            row[55] = alloc.clamped
            n += 1
            if sink is not None:
                sink.write(row)

            if h <= h_ter:
                terminated = "ground contact"
                break
            activated = activated or g_act
            if sc.stop_after_recovery is not None and activated:
                if hdot < -RECOVERY_SINK_RATE:
                    climb_since = None
                elif climb_since is None:
                    climb_since = t
                if climb_since is not None and t - climb_since >= sc.stop_after_recovery:
                    break
            if k == n_steps:
                break
            state, bank = integrate_step(state, bank, alloc.surfaces, ac, sc.dt, k)
    except (DivergenceError, KinematicSingularityError) as exc:
        log = SimLog(rows[:n].copy(), sc.dt, sc.h_buff, _meta(sc, cfg), terminated=f"aborted: {exc}")
        raise AbortedRunError(str(exc), log) from exc
    finally:
        if sink is not None:
            sink.close()
    return SimLog(rows[:n].copy(), sc.dt, sc.h_buff, _meta(sc, cfg), terminated)


def _meta(sc: Scenario, cfg: SimConfig) -> dict:
    meta = {"scenario": sc.name, "gcas": sc.gcas, "fep": sc.fep, "seed": sc.seed, "dt": sc.dt,
            "h_buff": sc.h_buff, "q_bounds": list(cfg.bounds.q)}
    meta.update(cfg.describe())
    if sc.thrust is not None:
        meta["thrust"] = sc.thrust
    return meta
