"""Flight envelope protection: CBF filters on angle of attack / load factor and bank angle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from .airframe import AeroQuantities, AeroResult, AircraftConfig, RigidBodyState
from .flight_control import DegenerateDynamicPressureError
from .gcas import ACTIVATION_THRESHOLD, SafetyFilterResult, alpha_decomp, solve_halfline_qp


@dataclass(frozen=True)
class FepConfig:
    alpha_stall: float = math.radians(25.0)
    nz_limit: float = 9.0
    gamma_alpha: float = 5.0
    gamma_phi: float = 3.0
    epsilon: float = 0.01
    phi_limit: float = 0.0
    activation_threshold: float = ACTIVATION_THRESHOLD

    def __post_init__(self):
        if not (self.gamma_alpha > 0 and self.gamma_phi > 0):
            raise ValueError("gamma_alpha and gamma_phi must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.nz_limit > 0:
            raise ValueError("nz_limit must be positive")

    @classmethod
    def from_mapping(cls, data: dict) -> "FepConfig":
        kw = {}
        for key in ("nz_limit", "gamma_alpha", "gamma_phi", "epsilon", "activation_threshold"):
            if key in data:
                kw[key] = float(data[key])
        if "alpha_stall_deg" in data:
            kw["alpha_stall"] = math.radians(float(data["alpha_stall_deg"]))
        if "phi_limit_deg" in data:
            kw["phi_limit"] = math.radians(float(data["phi_limit_deg"]))
        return cls(**kw)


def load_factor_alpha(nz_limit: float, weight: float, qbar_s_czalpha: float, alpha_zero: float = 0.0) -> float:
    """Angle of attack at which the normal force reaches ``nz_limit`` g.

    ``qbar_s_czalpha`` is the normal-force slope in N/rad (sign ignored).
    ``alpha_zero`` is the zero-normal-force angle of the local linearisation;
    with a normal-force curve through the origin it is zero.
    """
    return alpha_zero + nz_limit * weight / abs(qbar_s_czalpha)


def alpha_limit(aero: AeroQuantities, coeffs: AeroResult, cfg: AircraftConfig, fep: FepConfig) -> float:
    """min(alpha_stall, load-factor alpha) at the current flight condition."""
    if not aero.qbar > 0:
        raise DegenerateDynamicPressureError(f"dynamic pressure must be positive, got {aero.qbar}")
    if coeffs.Czalpha == 0:
        return fep.alpha_stall
    # zero-normal-force angle of the tangent line through the current (alpha, Cz)
    alpha_zero = aero.alpha - coeffs.Cz / coeffs.Czalpha
    a_nz = load_factor_alpha(fep.nz_limit, cfg.mass * cfg.gravity,
                             aero.qbar * cfg.wing_area * coeffs.Czalpha, alpha_zero)
    return min(fep.alpha_stall, a_nz)


def aoa_filter(q_gcas: float, state: RigidBodyState, aero: AeroQuantities, coeffs: AeroResult,
               cfg: AircraftConfig, fep: FepConfig, bounds: Tuple[float, float]) -> SafetyFilterResult:
    """Keep ``-f(alpha) - g(alpha) q + gamma_alpha (alpha_limit - alpha) >= 0``."""
    d = alpha_decomp(state, aero, coeffs, cfg)
    a_lim = alpha_limit(aero, coeffs, cfg, fep)
    c = -d.f + fep.gamma_alpha * (a_lim - aero.alpha)
    return solve_halfline_qp(q_gcas, -d.g, c, bounds[0], bounds[1], fep.activation_threshold)


def bank_decomp(state: RigidBodyState) -> Tuple[float, float]:
    return math.tan(state.theta) * (state.q * math.sin(state.phi) + state.r * math.cos(state.phi)), 1.0


def bank_filter(p_pilot: float, state: RigidBodyState, fep: FepConfig, recovery_active: bool,
                bounds: Tuple[float, float]) -> SafetyFilterResult:
    """Bank-to-level roll-rate filter, engaged only while a recovery is active."""
    if abs(state.theta) >= math.pi / 2:
        raise ValueError("pitch attitude at the Euler singularity")
    if not recovery_active:
        lo, hi = bounds
        return SafetyFilterResult(min(max(p_pilot, lo), hi), False, True, float("nan"))
    f, g = bank_decomp(state)
    s = math.tanh(state.phi / fep.epsilon)
    c = -s * f + fep.gamma_phi * (fep.phi_limit - abs(state.phi))
    return solve_halfline_qp(p_pilot, -s * g, c, bounds[0], bounds[1], fep.activation_threshold)
