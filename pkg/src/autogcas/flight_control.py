"""Angular-rate CAS (nonlinear dynamic inversion) and incremental control allocation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .airframe import (
    AeroQuantities,
    AircraftConfig,
    RigidBodyState,
    SurfaceSet,
    _aero,
    _coefficients,
    air_data,
)

PINV_RCOND = 1e-8
FD_STEP = 1e-4


class DegenerateDynamicPressureError(ValueError):
    pass


@dataclass(frozen=True)
class RateCommand:
    p_cmd: float
    q_cmd: float
    r_cmd: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_cmd, self.q_cmd, self.r_cmd])


@dataclass(frozen=True)
class RateBounds:
    p: Tuple[float, float] = (-2.0, 2.0)
    q: Tuple[float, float] = (-0.1, 0.22)
    r: Tuple[float, float] = (-0.5, 0.5)

    def __post_init__(self):
        for name in ("p", "q", "r"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"rate bound {name}: min must be below max")

    def clamp(self, cmd: RateCommand) -> RateCommand:
        return RateCommand(
            min(max(cmd.p_cmd, self.p[0]), self.p[1]),
            min(max(cmd.q_cmd, self.q[0]), self.q[1]),
            min(max(cmd.r_cmd, self.r[0]), self.r[1]),
        )

    def contains(self, cmd: RateCommand) -> bool:
        return (self.p[0] <= cmd.p_cmd <= self.p[1] and self.q[0] <= cmd.q_cmd <= self.q[1]
                and self.r[0] <= cmd.r_cmd <= self.r[1])


@dataclass(frozen=True)
class MomentCoeffs:
    Cl: float
    Cm: float
    Cn: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.Cl, self.Cm, self.Cn])):
            raise ValueError("moment coefficients must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.Cl, self.Cm, self.Cn])

    @classmethod
    def from_array(cls, a) -> "MomentCoeffs":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class CasGains:
    Kp: float = 4.0
    Kq: float = 4.0
    Kr: float = 4.0

    def __post_init__(self):
        if min(self.Kp, self.Kq, self.Kr) <= 0:
            raise ValueError("CAS gains must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.Kp, self.Kq, self.Kr])


@dataclass(frozen=True)
class Effectivity:
    matrix: np.ndarray
    rank: int

    @property
    def full_rank(self) -> bool:
        return self.rank == 3


@dataclass(frozen=True)
class Allocation:
    surfaces: SurfaceSet
    residual: float  # inf-norm of Phi (delta_c - delta_0) - delta_tau
    clamped: bool
    rank_deficient: bool


def ndi_virtual_input(cmd: RateCommand, rates: Sequence[float], gains: CasGains) -> np.ndarray:
    return gains.as_array() * (cmd.as_array() - np.asarray(rates, dtype=float))


def _cross(a, b) -> np.ndarray:
    # np.cross carries noticeable overhead for 3-vectors in the per-step loop
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _control_scale(qbar: float, cfg: AircraftConfig) -> np.ndarray:
    return qbar * cfg.wing_area * np.array([cfg.span, cfg.chord, cfg.span])


def ndi_required_moments(omega_dot_c, rates, qbar: float, cfg: AircraftConfig) -> MomentCoeffs:
    """Moment coefficients that make the rigid body realise ``omega_dot_c``."""
    if not qbar > 0:
        raise DegenerateDynamicPressureError(f"dynamic pressure must be positive, got {qbar}")
    J = cfg.inertia
    w = np.asarray(rates, dtype=float)
    drift = _cross(w, J @ w)
    # g(x) = J^-1 qbar S diag(b, c, b); its inverse applied to (wdot_c + J^-1 (w x Jw))
    tau = (J @ np.asarray(omega_dot_c, dtype=float) + drift) / _control_scale(qbar, cfg)
    return MomentCoeffs.from_array(tau)


def rotational_affine(rates, qbar: float, cfg: AircraftConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(f, g) with wdot = f + g tau for the rotational dynamics."""
    J = cfg.inertia
    Jinv = np.linalg.inv(J)
    w = np.asarray(rates, dtype=float)
    f = -Jinv @ _cross(w, J @ w)
    g = Jinv @ np.diag(_control_scale(qbar, cfg))
    return f, g


def control_effectivity(state: RigidBodyState, surfaces: SurfaceSet, cfg: AircraftConfig,
                        method: str = "analytic") -> Effectivity:
    """Jacobian of (Cl, Cm, Cn) with respect to the five surface deflections."""
    ad = air_data(state)
    d = surfaces.as_array()
    if method == "analytic":
        c = _coefficients(cfg, ad.alpha, ad.beta, ad.vt, state.p, state.q, state.r, d, with_partials=True)
        mat = c["phi"]
    elif method == "fd":
        mat = np.empty((3, 5))
        for j in range(5):
            dp, dm = d.copy(), d.copy()
            dp[j] += FD_STEP
            dm[j] -= FD_STEP
            mp = _aero(cfg, ad.alpha, ad.beta, ad.vt, ad.qbar, state.p, state.q, state.r, dp).moments
            mm = _aero(cfg, ad.alpha, ad.beta, ad.vt, ad.qbar, state.p, state.q, state.r, dm).moments
            mat[:, j] = (mp - mm) / (2 * FD_STEP)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Effectivity(mat, _rank(mat))


def _rank(mat: np.ndarray) -> int:
    return _rank_from_singular(np.linalg.svd(mat, compute_uv=False))


def _rank_from_singular(s: np.ndarray) -> int:
    if s[0] == 0:
        return 0
    return int(np.sum(s > PINV_RCOND * s[0]))


def _pinv_and_rank(mat: np.ndarray) -> Tuple[np.ndarray, int]:
    """Moore-Penrose inverse with the same cutoff as ``np.linalg.pinv(mat, rcond=PINV_RCOND)``."""
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    rank = _rank_from_singular(s)
    inv_s = np.zeros_like(s)
    inv_s[:rank] = 1.0 / s[:rank]
    return (vt.T * inv_s) @ u.T, rank


def inca_allocate(delta_tau: MomentCoeffs | Sequence[float], phi_mat: Effectivity | np.ndarray,
                  current: SurfaceSet, pos_min=None, pos_max=None) -> Allocation:
    """Minimum-norm surface increment through the pseudo-inverse, then position clamp."""
    mat = phi_mat.matrix if isinstance(phi_mat, Effectivity) else np.asarray(phi_mat, dtype=float)
    dtau = delta_tau.as_array() if isinstance(delta_tau, MomentCoeffs) else np.asarray(delta_tau, dtype=float)
    d0 = current.as_array()
    pinv, rank = _pinv_and_rank(mat)
    dc = d0 + pinv @ dtau
    clamped = False
    if pos_min is not None or pos_max is not None:
        lo = -np.inf if pos_min is None else pos_min
        hi = np.inf if pos_max is None else pos_max
        dcc = np.clip(dc, lo, hi)
        clamped = bool(np.any(dcc != dc))
        dc = dcc
    residual = float(np.max(np.abs(mat @ (dc - d0) - dtau)))
    return Allocation(SurfaceSet.from_array(dc), residual, clamped, rank < 3)


def moment_coefficients(state: RigidBodyState, aero: AeroQuantities, surfaces: SurfaceSet,
                        cfg: AircraftConfig) -> MomentCoeffs:
    res = _aero(cfg, aero.alpha, aero.beta, aero.vt, aero.qbar, state.p, state.q, state.r, surfaces.as_array())
    return MomentCoeffs(res.Cl, res.Cm, res.Cn)
