"""Ground-collision exponential CBF and its one-dimensional pitch-rate QP.

The altitude barrier ``b = h - (h_buff + h_dted)`` has relative degree two in
pitch rate.  ``altitude_decomp`` writes ``hddot = f(h) + g(h) q`` by chaining
the airspeed, pitch-attitude and angle-of-attack channels, each of which is
affine in ``q``.  The filter keeps ``f + g q + k1 b + k2 bdot >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .airframe import AeroQuantities, AeroResult, AircraftConfig, RigidBodyState

# |g| below this makes a constraint input-independent for the step
G_EPS = 1e-6
ACTIVATION_THRESHOLD = 1e-6
# Lower end of the k1 search; see EcbfGains.
K1_MIN = 0.01
DAMPING_TOL = 1e-9


class ScheduleFormatError(ValueError):
    pass


class DegenerateSideslipError(ValueError):
    pass


@dataclass(frozen=True)
class BarrierDecomp:
    """Affine split ``xdot = f + g * u`` of one scalar channel."""

    f: float
    g: float

    def __post_init__(self):
        if not (math.isfinite(self.f) and math.isfinite(self.g)):
            raise ValueError(f"non-finite decomposition f={self.f}, g={self.g}")

    def rate(self, u: float) -> float:
        return self.f + self.g * u


@dataclass(frozen=True)
class EcbfGains:
    """Critically damped ECBF gains, ``k1 = k2**2 / 4``.

    ``k1`` is bounded below by ``K1_MIN`` rather than 4: with the pitch-rate
    box of this airframe a double pole faster than 2 rad/s activates the
    recovery too late for steep dives.
    """

    k1: float
    k2: float

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError(f"ECBF gains must be positive, got k1={self.k1}, k2={self.k2}")
        if abs(self.k1 - self.k2 * self.k2 / 4.0) > DAMPING_TOL * self.k1:
            raise ValueError(f"gains k1={self.k1}, k2={self.k2} are not critically damped")
        if self.k1 < K1_MIN * (1 - 1e-12):
            raise ValueError(f"k1={self.k1} below minimum {K1_MIN}")

    @classmethod
    def from_k1(cls, k1: float) -> "EcbfGains":
        return cls(k1, 2.0 * math.sqrt(k1))

    @classmethod
    def from_k2(cls, k2: float) -> "EcbfGains":
        return cls(k2 * k2 / 4.0, k2)

    @property
    def mu(self) -> float:
        return self.k1 / self.k2


@dataclass(frozen=True)
class BarrierState:
    b: float
    bdot: float


@dataclass(frozen=True)
class SafetyFilterResult:
    command: float
    active: bool
    feasible: bool
    margin: float


# --------------------------------------------------------------------------
# channel decompositions
# --------------------------------------------------------------------------


def vt_decomp(state: RigidBodyState, aero: AeroQuantities, coeffs: AeroResult, cfg: AircraftConfig) -> BarrierDecomp:
    """Airspeed channel; the side-force term ``C sin(beta)`` is neglected."""
    if not aero.vt > 0:
        raise ValueError("airspeed must be positive")
    m, g = cfg.mass, cfg.gravity
    a, b = aero.alpha, aero.beta
    ca, sa, cb, sb = math.cos(a), math.sin(a), math.cos(b), math.sin(b)
    st, ct = math.sin(state.theta), math.cos(state.theta)
    sp, cp = math.sin(state.phi), math.cos(state.phi)
    qs = aero.qbar * cfg.wing_area
    f = (cfg.thrust * ca * cb - m * g * (st * ca * cb - ct * sp * sb - ct * cp * sa * cb)) / m \
        - qs * coeffs.CD_aux * cb / m
    gg = -qs * coeffs.CDq * (cfg.chord / (2.0 * aero.vt)) * cb / m
    return BarrierDecomp(f, gg)


def theta_decomp(state: RigidBodyState) -> BarrierDecomp:
    return BarrierDecomp(-state.r * math.sin(state.phi), math.cos(state.phi))


def alpha_decomp(state: RigidBodyState, aero: AeroQuantities, coeffs: AeroResult, cfg: AircraftConfig) -> BarrierDecomp:
    """Angle-of-attack channel with the lift split into pitch-rate and remaining parts.

    Thrust enters through its component normal to the flight path, ``T sin(alpha)``.
    """
    if not aero.vt > 0:
        raise ValueError("airspeed must be positive")
    if abs(aero.beta) >= math.pi / 2 - 1e-9:
        raise DegenerateSideslipError(f"sideslip {aero.beta} rad is degenerate")
    m, g = cfg.mass, cfg.gravity
    a, b = aero.alpha, aero.beta
    ca, sa, cb = math.cos(a), math.sin(a), math.cos(b)
    st, ct = math.sin(state.theta), math.cos(state.theta)
    cp = math.cos(state.phi)
    mvc = m * aero.vt * cb
    qs = aero.qbar * cfg.wing_area
    f = (m * g * (ct * cp * ca + st * sa) - cfg.thrust * sa) / mvc \
        - math.tan(b) * (state.p * ca + state.r * sa) - qs * coeffs.CL_aux / mvc
    gg = 1.0 - qs * coeffs.CLq * (cfg.chord / (2.0 * aero.vt)) / mvc
    return BarrierDecomp(f, gg)


def altitude_decomp(state: RigidBodyState, aero: AeroQuantities, coeffs: AeroResult, cfg: AircraftConfig) -> BarrierDecomp:
    """``hddot = f(h) + g(h) q`` from the chain rule on ``hdot = V sin(theta - alpha)``."""
    dv = vt_decomp(state, aero, coeffs, cfg)
    dth = theta_decomp(state)
    dal = alpha_decomp(state, aero, coeffs, cfg)
    gamma = state.theta - aero.alpha
    sg, cg = math.sin(gamma), math.cos(gamma)
    f = dv.f * sg + aero.vt * cg * (dth.f - dal.f)
    gg = dv.g * sg + aero.vt * cg * (dth.g - dal.g)
    return BarrierDecomp(f, gg)


def eta_b(h: float, hdot: float, h_buff: float, h_dted: float) -> BarrierState:
    if h_buff < 0:
        raise ValueError("buffer height must be non-negative")
    return BarrierState(h - (h_buff + h_dted), hdot)


# --------------------------------------------------------------------------
# 1-D QP
# --------------------------------------------------------------------------


def solve_halfline_qp(u_ref: float, a: float, c: float, lo: float, hi: float,
                      threshold: float = ACTIVATION_THRESHOLD) -> SafetyFilterResult:
    """argmin 0.5 (u - u_ref)^2  s.t.  a u + c >= 0,  lo <= u <= hi.

    Closed form: project ``u_ref`` on the intersection of the half-line and the
    box.  An empty intersection returns the box end that minimises the
    violation and flags ``feasible=False``.
    """
    if not lo < hi:
        raise ValueError("bounds must satisfy lo < hi")
    clamped = min(max(u_ref, lo), hi)
    if abs(a) < G_EPS:
        u, feasible = clamped, c >= 0.0
    elif a > 0:
        u_star = -c / a
        if u_star > hi:
            u, feasible = hi, False
        else:
            u, feasible = min(max(u_ref, max(lo, u_star)), hi), True
    else:
        u_star = -c / a
        if u_star < lo:
            u, feasible = lo, False
        else:
            u, feasible = min(max(u_ref, lo), min(hi, u_star)), True
    return SafetyFilterResult(u, abs(u - clamped) > threshold, feasible, a * u + c)


def gcas_qp(q_pilot: float, d: BarrierDecomp, eta: BarrierState, kappa: EcbfGains,
            bounds: Tuple[float, float], threshold: float = ACTIVATION_THRESHOLD) -> SafetyFilterResult:
    c = d.f + kappa.k1 * eta.b + kappa.k2 * eta.bdot
    return solve_halfline_qp(q_pilot, d.g, c, bounds[0], bounds[1], threshold)


# --------------------------------------------------------------------------
# gain schedule
# --------------------------------------------------------------------------


@dataclass
class GainSchedule:
    """k2 over a (phi, theta, vt) grid; k1 is always k2**2 / 4."""

    phi: np.ndarray
    theta: np.ndarray
    vt: np.ndarray
    k2: np.ndarray
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.vt = np.asarray(self.vt, dtype=float)
        self.k2 = np.asarray(self.k2, dtype=float)
        axes = (self.phi, self.theta, self.vt)
        for name, ax in zip(("phi", "theta", "vt"), axes):
            if ax.ndim != 1 or ax.size == 0:
                raise ScheduleFormatError(f"axis {name} must be a non-empty vector")
            if np.any(np.diff(ax) <= 0):
                raise ScheduleFormatError(f"axis {name} must be strictly increasing")
        shape = tuple(ax.size for ax in axes)
        if self.k2.shape != shape:
            raise ScheduleFormatError(f"k2 table shape {self.k2.shape} does not match axes {shape}")
        if not np.all(np.isfinite(self.k2)) or np.any(self.k2 <= 0):
            raise ScheduleFormatError("k2 table must be finite and positive")
        if np.any(self.k2 ** 2 / 4.0 < K1_MIN * (1 - 1e-12)):
            raise ScheduleFormatError(f"k2 table implies k1 below {K1_MIN}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.k2.shape

    def gains(self) -> List[EcbfGains]:
        return [EcbfGains.from_k2(float(k)) for k in self.k2.ravel()]

    @classmethod
    def constant(cls, kappa: EcbfGains) -> "GainSchedule":
        return cls([0.0], [0.0], [0.0], np.full((1, 1, 1), kappa.k2))

    # plain-text file: header lines, three axis lines, then the k2 rows
    def dumps(self) -> str:
        lines = ["# autogcas ECBF gain schedule",
                 "# k1 is implied by critical damping: k1 = k2^2 / 4",
                 "# k2 rows: one line per (phi, theta) pair, phi slowest; values run along vt"]
        for k in sorted(self.metadata):
            lines.append(f"meta {k} {self.metadata[k]}")
        lines.append("phi_deg " + " ".join(f"{v:.10g}" for v in np.degrees(self.phi)))
        lines.append("theta_deg " + " ".join(f"{v:.10g}" for v in np.degrees(self.theta)))
        lines.append("vt_mps " + " ".join(f"{v:.10g}" for v in self.vt))
        lines.append("k2")
        for i in range(self.phi.size):
            for j in range(self.theta.size):
                lines.append(" ".join(repr(float(v)) for v in self.k2[i, j, :]))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "GainSchedule":
        meta: Dict[str, str] = {}
        axes: Dict[str, np.ndarray] = {}
        rows: List[List[float]] = []
        in_table = False
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                if in_table:
                    rows.append([float(v) for v in line.split()])
                    continue
                key, _, rest = line.partition(" ")
                if key == "meta":
                    mk, _, mv = rest.strip().partition(" ")
                    meta[mk] = mv.strip()
                elif key in ("phi_deg", "theta_deg"):
                    axes[key[:-4]] = np.radians([float(v) for v in rest.split()])
                elif key == "vt_mps":
                    axes["vt"] = np.array([float(v) for v in rest.split()])
                elif key == "k2":
                    in_table = True
                else:
                    raise ScheduleFormatError(f"line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                if isinstance(exc, ScheduleFormatError):
                    raise
                raise ScheduleFormatError(f"line {lineno}: {exc}") from exc
        missing = [a for a in ("phi", "theta", "vt") if a not in axes]
        if missing:
            raise ScheduleFormatError(f"missing axes: {', '.join(missing)}")
        n_phi, n_th, n_vt = (axes[a].size for a in ("phi", "theta", "vt"))
        if len(rows) != n_phi * n_th or any(len(r) != n_vt for r in rows):
            raise ScheduleFormatError(
                f"k2 table must have {n_phi * n_th} rows of {n_vt} values")
        k2 = np.array(rows, dtype=float).reshape(n_phi, n_th, n_vt)
        return cls(axes["phi"], axes["theta"], axes["vt"], k2, meta)

    @classmethod
    def load(cls, path) -> "GainSchedule":
        return cls.loads(Path(path).read_text())


def _bracket(axis: np.ndarray, x: float) -> Tuple[int, float]:
    """Lower index and fraction for linear interpolation, with clamping."""
    n = axis.size
    if n == 1 or x <= axis[0]:
        return 0, 0.0
    if x >= axis[-1]:
        return n - 2, 1.0
    i = int(np.searchsorted(axis, x, side="right")) - 1
    return i, (x - axis[i]) / (axis[i + 1] - axis[i])


def lookup_gains(schedule: GainSchedule, phi: float, theta: float, vt: float) -> EcbfGains:
    """Trilinear interpolation of k2 with boundary clamping; k1 recomputed."""
    idx = []
    for axis, x in ((schedule.phi, phi), (schedule.theta, theta), (schedule.vt, vt)):
        i, t = _bracket(axis, x)
        if axis.size == 1:
            idx.append(((0, 1.0),))
        else:
            idx.append(((i, 1.0 - t), (i + 1, t)))
    k2 = 0.0
    table = schedule.k2
    for i, wi in idx[0]:
        for j, wj in idx[1]:
            for k, wk in idx[2]:
                w = wi * wj * wk
                if w:
                    k2 += w * table[i, j, k]
    return EcbfGains.from_k2(k2)
