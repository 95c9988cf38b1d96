"""Six degree-of-freedom rigid-body model of an over-actuated F-16 class airframe.

The aircraft has five independent surfaces (right/left horizontal tail,
right/left aileron, rudder) driven by first-order rate- and position-limited
actuators.  Aerodynamic coefficients are polynomial tables loaded from a YAML
file (see ``data/f16_aero.yaml`` for the term ordering).

State layout used by the array helpers::

    0  u    1  v    2  w       body velocity (m/s)
    3  p    4  q    5  r       body rates (rad/s)
    6  xE   7  yE   8  zE      navigation position (m, zE positive down)
    9  phi  10 theta 11 psi    Euler angles (rad)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import yaml

DATA_DIR = Path(__file__).parent / "data"

STATE_FIELDS = ("u", "v", "w", "p", "q", "r", "xE", "yE", "zE", "phi", "theta", "psi")
SURFACE_NAMES = ("rht", "lht", "ra", "la", "rud")

# |theta| closer than this to pi/2 is treated as the Euler singularity
SINGULARITY_MARGIN = 1e-6
VT_FLOOR = 1e-3


class AirframeError(Exception):
    """Base class for airframe errors."""


class AeroModelError(AirframeError):
    """A polynomial table evaluated to a non-finite value."""

    def __init__(self, table: str, value: float):
        super().__init__(f"aero table {table!r} evaluated to non-finite value {value}")
        self.table = table


class KinematicSingularityError(AirframeError):
    pass


class DivergenceError(AirframeError):
    def __init__(self, step: int, message: str = ""):
        super().__init__(f"non-finite state after integration step {step}{': ' + message if message else ''}")
        self.step = step


# --------------------------------------------------------------------------
# state containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RigidBodyState:
    u: float
    v: float
    w: float
    p: float
    q: float
    r: float
    xE: float
    yE: float
    zE: float
    phi: float
    theta: float
    psi: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in STATE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "RigidBodyState":
        return cls(*(float(v) for v in x))

    @classmethod
    def from_flight(
        cls,
        vt: float,
        alpha: float = 0.0,
        beta: float = 0.0,
        phi: float = 0.0,
        theta: float = 0.0,
        psi: float = 0.0,
        p: float = 0.0,
        q: float = 0.0,
        r: float = 0.0,
        h: float = 1000.0,
        x: float = 0.0,
        y: float = 0.0,
    ) -> "RigidBodyState":
        """Build a state from airspeed, aerodynamic angles and altitude."""
        u = vt * math.cos(alpha) * math.cos(beta)
        v = vt * math.sin(beta)
        w = vt * math.sin(alpha) * math.cos(beta)
        return cls(u, v, w, p, q, r, x, y, -h, phi, theta, psi)

    @property
    def h(self) -> float:
        return -self.zE

    @property
    def vt(self) -> float:
        return math.sqrt(self.u * self.u + self.v * self.v + self.w * self.w)


@dataclass(frozen=True)
class AeroQuantities:
    alpha: float
    beta: float
    vt: float
    qbar: float
    h: float
    nz: float = float("nan")


@dataclass(frozen=True)
class SurfaceSet:
    rht: float = 0.0
    lht: float = 0.0
    ra: float = 0.0
    la: float = 0.0
    rud: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.rht, self.lht, self.ra, self.la, self.rud], dtype=float)

    @classmethod
    def from_array(cls, d: Sequence[float]) -> "SurfaceSet":
        return cls(*(float(v) for v in d))

    def mirrored(self) -> "SurfaceSet":
        """Left/right swap with the rudder reversed."""
        return SurfaceSet(self.lht, self.rht, self.la, self.ra, -self.rud)


@dataclass(frozen=True)
class ActuatorBank:
    deflection: np.ndarray
    tau: np.ndarray
    rate_limit: np.ndarray
    pos_min: np.ndarray
    pos_max: np.ndarray

    def __post_init__(self):
        for name in ("deflection", "tau", "rate_limit", "pos_min", "pos_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (5,):
                raise ValueError(f"{name} must have 5 entries, got shape {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.tau <= 0):
            raise ValueError("actuator time constants must be positive")
        if np.any(self.rate_limit <= 0):
            raise ValueError("actuator rate limits must be positive")
        if np.any(self.pos_min >= self.pos_max):
            raise ValueError("actuator position limits must satisfy min < max")

    @property
    def surfaces(self) -> SurfaceSet:
        return SurfaceSet.from_array(self.deflection)

    def with_deflection(self, deflection: Sequence[float]) -> "ActuatorBank":
        return replace(self, deflection=np.clip(np.asarray(deflection, dtype=float), self.pos_min, self.pos_max))


# --------------------------------------------------------------------------
# aerodynamic tables and configuration
# --------------------------------------------------------------------------


class Polynomial:
    """Sum of monomials c * alpha**i * beta**j * de**k."""

    __slots__ = ("name", "terms", "max_power")

    def __init__(self, name: str, terms: Sequence[Sequence[float]]):
        self.name = name
        self.terms: List[Tuple[float, int, int, int]] = []
        for row in terms:
            if len(row) != 4:
                raise ValueError(f"table {name}: each term needs [coef, i, j, k], got {row}")
            c, i, j, k = row
            if min(i, j, k) < 0 or int(i) != i or int(j) != j or int(k) != k:
                raise ValueError(f"table {name}: exponents must be non-negative integers")
            self.terms.append((float(c), int(i), int(j), int(k)))
        self.max_power = max((max(t[1:]) for t in self.terms), default=0)

    def __call__(self, ap, bp, dp) -> float:
        # ap/bp/dp are precomputed power lists of alpha, beta, de
        return sum(c * ap[i] * bp[j] * dp[k] for c, i, j, k in self.terms)

    def d_alpha(self, ap, bp, dp) -> float:
        return sum(c * i * ap[i - 1] * bp[j] * dp[k] for c, i, j, k in self.terms if i > 0)

    def d_de(self, ap, bp, dp) -> float:
        return sum(c * k * ap[i] * bp[j] * dp[k - 1] for c, i, j, k in self.terms if k > 0)

    def evaluate(self, alpha: float, beta: float, de: float) -> float:
        """Direct evaluation, mainly for checks."""
        return sum(c * alpha**i * beta**j * de**k for c, i, j, k in self.terms)


TABLE_NAMES = (
    "Cx0", "Cxq", "Cy0", "Cyda", "Cydr", "Cyp", "Cyr", "Cz0", "Czq",
    "Cl0", "Clp", "Clr", "Clda", "Cldr", "Cldt",
    "Cm0", "Cmq", "Cn0", "Cnp", "Cnr", "Cnda", "Cndr", "Cndt",
)
_IDX = {name: i for i, name in enumerate(TABLE_NAMES)}


@dataclass(frozen=True)
class AeroTables:
    """Named polynomial tables, also compiled to coefficient matrices over a shared monomial basis."""

    tables: Dict[str, Polynomial]
    xcg_ref: float = 0.35

    def __post_init__(self):
        shape = tuple(1 + max(max((t[n] for t in p.terms), default=0) for p in self.tables.values())
                      for n in (1, 2, 3))
        n_mono = shape[0] * shape[1] * shape[2]
        mats = [np.zeros((len(TABLE_NAMES), n_mono)) for _ in range(3)]
        for row, name in enumerate(TABLE_NAMES):
            for c, i, j, k in self.tables[name].terms:
                mats[0][row, np.ravel_multi_index((i, j, k), shape)] += c
                if i > 0:
                    mats[1][row, np.ravel_multi_index((i - 1, j, k), shape)] += c * i
                if k > 0:
                    mats[2][row, np.ravel_multi_index((i, j, k - 1), shape)] += c * k
        object.__setattr__(self, "powers", shape)
        object.__setattr__(self, "_value_mat", mats[0])
        object.__setattr__(self, "_alpha_mat", mats[1])
        object.__setattr__(self, "_de_mat", mats[2])

    def __getitem__(self, name: str) -> Polynomial:
        return self.tables[name]

    def monomials(self, alpha: float, beta: float, de: float) -> np.ndarray:
        na, nb, nd = self.powers
        return np.multiply.outer(np.multiply.outer(_powers(alpha, na - 1), _powers(beta, nb - 1)),
                                 _powers(de, nd - 1)).ravel()

    def values(self, mono: np.ndarray) -> np.ndarray:
        """All tables, in TABLE_NAMES order."""
        return self._value_mat @ mono

    def d_alpha(self, mono: np.ndarray) -> np.ndarray:
        return self._alpha_mat @ mono

    def d_de(self, mono: np.ndarray) -> np.ndarray:
        return self._de_mat @ mono

    @classmethod
    def from_mapping(cls, data: dict) -> "AeroTables":
        raw = data.get("tables", {})
        missing = [n for n in TABLE_NAMES if n not in raw]
        if missing:
            raise ValueError(f"aero tables missing: {', '.join(missing)}")
        tables = {n: Polynomial(n, raw[n]) for n in TABLE_NAMES}
        return cls(tables=tables, xcg_ref=float(data.get("xcg_ref", 0.35)))

    @classmethod
    def load(cls, path) -> "AeroTables":
        with open(path) as fh:
            return cls.from_mapping(yaml.safe_load(fh))


def _deg_array(values, n_expected=5) -> np.ndarray:
    arr = np.radians(np.asarray(values, dtype=float))
    if arr.shape != (n_expected,):
        raise ValueError(f"expected {n_expected} values, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class AircraftConfig:
    mass: float = 9295.44
    gravity: float = 9.80665
    wing_area: float = 27.87
    span: float = 9.144
    chord: float = 3.45
    Ixx: float = 12874.8
    Iyy: float = 75673.6
    Izz: float = 85552.1
    Ixz: float = 1331.4
    xcg: float = 0.35
    thrust: float = 30000.0
    aero: AeroTables = field(default=None, repr=False)
    act_tau: np.ndarray = field(default_factory=lambda: np.full(5, 0.0495))
    act_rate: np.ndarray = field(default_factory=lambda: np.radians([60.0, 60.0, 80.0, 80.0, 120.0]))
    act_min: np.ndarray = field(default_factory=lambda: np.radians([-25.0, -25.0, -21.5, -21.5, -30.0]))
    act_max: np.ndarray = field(default_factory=lambda: np.radians([25.0, 25.0, 21.5, 21.5, 30.0]))

    def __post_init__(self):
        if self.aero is None:
            object.__setattr__(self, "aero", AeroTables.load(DATA_DIR / "f16_aero.yaml"))
        for name in ("mass", "wing_area", "span", "chord", "gravity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if min(self.Ixx, self.Iyy, self.Izz) <= 0 or self.Ixx * self.Izz - self.Ixz**2 <= 0:
            raise ValueError("inertia tensor is not positive definite")

    @property
    def inertia(self) -> np.ndarray:
        return np.array([[self.Ixx, 0.0, -self.Ixz], [0.0, self.Iyy, 0.0], [-self.Ixz, 0.0, self.Izz]])

    def actuator_bank(self, deflection=None) -> ActuatorBank:
        d = np.zeros(5) if deflection is None else np.asarray(deflection, dtype=float)
        return ActuatorBank(np.clip(d, self.act_min, self.act_max), self.act_tau, self.act_rate, self.act_min, self.act_max)

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path = DATA_DIR) -> "AircraftConfig":
        """Build from the ``aircraft`` + ``actuators`` sections of a config file.

        Angles in the actuator block are in degrees.
        """
        ac = dict(data.get("aircraft", {}))
        act = data.get("actuators", {})
        aero_file = ac.pop("aero_file", None)
        kwargs = {k: float(v) for k, v in ac.items()}
        if aero_file is not None:
            path = Path(aero_file)
            if not path.is_absolute():
                path = base_dir / path
            kwargs["aero"] = AeroTables.load(path)
        if "time_constant" in act:
            tau = act["time_constant"]
            kwargs["act_tau"] = np.full(5, float(tau)) if np.isscalar(tau) else np.asarray(tau, dtype=float)
        if "rate_limits_deg" in act:
            kwargs["act_rate"] = _deg_array(act["rate_limits_deg"])
        if "position_min_deg" in act:
            kwargs["act_min"] = _deg_array(act["position_min_deg"])
        if "position_max_deg" in act:
            kwargs["act_max"] = _deg_array(act["position_max_deg"])
        return cls(**kwargs)


# --------------------------------------------------------------------------
# atmosphere and air data
# --------------------------------------------------------------------------


def isa_density(h: float) -> float:
    """ISA density (kg/m^3), troposphere plus isothermal lower stratosphere."""
    if h < 11000.0:
        return 1.225 * (1.0 - 2.25577e-5 * h) ** 4.2558797
    return 0.3639176 * math.exp(-(h - 11000.0) / 6341.62)


def air_data(state: RigidBodyState, cfg: AircraftConfig | None = None) -> AeroQuantities:
    return _air_data(state.u, state.v, state.w, -state.zE)


def _air_data(u: float, v: float, w: float, h: float) -> AeroQuantities:
    vt = math.sqrt(u * u + v * v + w * w)
    alpha = math.atan2(w, u)
    beta = math.asin(max(-1.0, min(1.0, v / vt))) if vt > 0 else 0.0
    qbar = 0.5 * isa_density(h) * vt * vt
    return AeroQuantities(alpha, beta, vt, qbar, h)


# --------------------------------------------------------------------------
# aerodynamic model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AeroResult:
    """Body forces (aero + thrust, no gravity), coefficients and decomposed terms.

    ``CD_aux``/``CL_aux`` are the drag/lift coefficients with the pitch-rate
    contribution removed; ``CDq``/``CLq`` multiply ``q cbar / 2V``.
    """

    Fx: float
    Fy: float
    Fz: float
    Cx: float
    Cy: float
    Cz: float
    Cl: float
    Cm: float
    Cn: float
    CD_aux: float
    CL_aux: float
    CDq: float
    CLq: float
    Czalpha: float
    nz: float

    @property
    def moments(self) -> np.ndarray:
        return np.array([self.Cl, self.Cm, self.Cn])


def _powers(x: float, n: int) -> List[float]:
    out = [1.0]
    for _ in range(n):
        out.append(out[-1] * x)
    return out


def _mix(d) -> Tuple[float, float, float, float]:
    """Surface vector -> (de, dt, da, dr) effective deflections."""
    return 0.5 * (d[0] + d[1]), 0.5 * (d[0] - d[1]), 0.5 * (d[2] - d[3]), d[4]


def _coefficients(cfg: AircraftConfig, alpha, beta, vt, p, q, r, d, with_partials=False):
    """Evaluate all tables.  Returns a dict of coefficients (and control partials)."""
    T = cfg.aero
    de, dt, da, dr = _mix(d)
    mono = cfg.aero.monomials(alpha, beta, de)
    inv2v = 1.0 / (2.0 * max(vt, VT_FLOOR))
    phat = p * cfg.span * inv2v
    qhat = q * cfg.chord * inv2v
    rhat = r * cfg.span * inv2v

    arr = T.values(mono)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise AeroModelError(TABLE_NAMES[bad], float(arr[bad]))
    vals = dict(zip(TABLE_NAMES, arr.tolist()))

    dx = cfg.aero.xcg_ref - cfg.xcg
    Cx = vals["Cx0"] + vals["Cxq"] * qhat
    Cy = vals["Cy0"] + vals["Cyda"] * da + vals["Cydr"] * dr + vals["Cyp"] * phat + vals["Cyr"] * rhat
    Cz = vals["Cz0"] + vals["Czq"] * qhat
    Cl = (vals["Cl0"] + vals["Clp"] * phat + vals["Clr"] * rhat
          + vals["Clda"] * da + vals["Cldr"] * dr + vals["Cldt"] * dt)
    Cm = vals["Cm0"] + vals["Cmq"] * qhat + Cz * dx
    Cn = (vals["Cn0"] + vals["Cnp"] * phat + vals["Cnr"] * rhat + vals["Cnda"] * da
          + vals["Cndr"] * dr + vals["Cndt"] * dt - Cy * dx * cfg.chord / cfg.span)
    out = dict(vals=vals, Cx=Cx, Cy=Cy, Cz=Cz, Cl=Cl, Cm=Cm, Cn=Cn, qhat=qhat, mono=mono, dx=dx)
    if with_partials:
        d_de = T.d_de(mono)
        dCz_de = d_de[_IDX["Cz0"]]
        dCm_de = d_de[_IDX["Cm0"]] + dCz_de * dx
        dCy = (vals["Cyda"], vals["Cydr"])
        k = dx * cfg.chord / cfg.span
        # columns: rht, lht, ra, la, rud ; chain rule through _mix
        phi = np.empty((3, 5))
        phi[0] = [0.5 * vals["Cldt"], -0.5 * vals["Cldt"], 0.5 * vals["Clda"], -0.5 * vals["Clda"], vals["Cldr"]]
        phi[1] = [0.5 * dCm_de, 0.5 * dCm_de, 0.0, 0.0, 0.0]
        cn_da = vals["Cnda"] - dCy[0] * k
        cn_dr = vals["Cndr"] - dCy[1] * k
        phi[2] = [0.5 * vals["Cndt"], -0.5 * vals["Cndt"], 0.5 * cn_da, -0.5 * cn_da, cn_dr]
        out["phi"] = phi
    return out


def aero_model(state: RigidBodyState, aero: AeroQuantities, surfaces: SurfaceSet, cfg: AircraftConfig) -> AeroResult:
    """Body forces and moment coefficients at the given state and deflections."""
    return _aero(cfg, aero.alpha, aero.beta, aero.vt, aero.qbar, state.p, state.q, state.r, surfaces.as_array())


def _aero(cfg: AircraftConfig, alpha, beta, vt, qbar, p, q, r, d) -> AeroResult:
    return _aero_from(cfg, _coefficients(cfg, alpha, beta, vt, p, q, r, d), alpha, qbar)


def _aero_from(cfg: AircraftConfig, c: dict, alpha: float, qbar: float) -> AeroResult:
    vals = c["vals"]
    qs = qbar * cfg.wing_area
    Cx, Cz = c["Cx"], c["Cz"]
    sa, ca = math.sin(alpha), math.cos(alpha)
    # stability-axis drag and lift; rate parts split out per unit qhat
    Cxq, Czq = vals["Cxq"], vals["Czq"]
    CD = -Cx * ca - Cz * sa
    CL = Cx * sa - Cz * ca
    CDq = -Cxq * ca - Czq * sa
    CLq = Cxq * sa - Czq * ca
    d_a = cfg.aero.d_alpha(c["mono"])
    Czalpha = d_a[_IDX["Cz0"]] + d_a[_IDX["Czq"]] * c["qhat"]
    Fz = qs * Cz
    return AeroResult(
        Fx=qs * Cx + cfg.thrust,
        Fy=qs * c["Cy"],
        Fz=Fz,
        Cx=Cx, Cy=c["Cy"], Cz=Cz,
        Cl=c["Cl"], Cm=c["Cm"], Cn=c["Cn"],
        CD_aux=CD - CDq * c["qhat"],
        CL_aux=CL - CLq * c["qhat"],
        CDq=CDq, CLq=CLq,
        Czalpha=Czalpha,
        nz=-Fz / (cfg.mass * cfg.gravity),
    )


def aero_with_partials(state: RigidBodyState, surfaces: SurfaceSet, cfg: AircraftConfig
                       ) -> Tuple[AeroQuantities, AeroResult, np.ndarray]:
    """Air data, aero result and the 3x5 control partials from one table evaluation."""
    ad = air_data(state)
    c = _coefficients(cfg, ad.alpha, ad.beta, ad.vt, state.p, state.q, state.r, surfaces.as_array(), with_partials=True)
    res = _aero_from(cfg, c, ad.alpha, ad.qbar)
    return replace(ad, nz=res.nz), res, c["phi"]


def moment_partials(state: RigidBodyState, surfaces: SurfaceSet, cfg: AircraftConfig) -> np.ndarray:
    """Analytic 3x5 matrix d(Cl, Cm, Cn)/d(surface deflections)."""
    ad = air_data(state)
    c = _coefficients(cfg, ad.alpha, ad.beta, ad.vt, state.p, state.q, state.r, surfaces.as_array(), with_partials=True)
    return c["phi"]


# --------------------------------------------------------------------------
# equations of motion
# --------------------------------------------------------------------------


def _derivative(x, d, cfg: AircraftConfig) -> np.ndarray:
    u, v, w, p, q, r, xE, yE, zE, phi, theta, psi = x
    ct = math.cos(theta)
    if abs(ct) < SINGULARITY_MARGIN:
        raise KinematicSingularityError(f"theta={theta:.6f} rad is at the Euler singularity")
    vt = math.sqrt(u * u + v * v + w * w)
    m = cfg.mass
    g = cfg.gravity
    if vt > VT_FLOOR:
        ad = _air_data(u, v, w, -zE)
        res = _aero(cfg, ad.alpha, ad.beta, vt, ad.qbar, p, q, r, d)
        X, Y, Z = res.Fx, res.Fy, res.Fz
        qs = ad.qbar * cfg.wing_area
        L = qs * cfg.span * res.Cl
        M = qs * cfg.chord * res.Cm
        N = qs * cfg.span * res.Cn
    else:
        X, Y, Z = cfg.thrust, 0.0, 0.0
        L = M = N = 0.0

    sp, cp = math.sin(phi), math.cos(phi)
    st = math.sin(theta)
    sy, cy = math.sin(psi), math.cos(psi)

    # translational dynamics, gravity resolved in body axes
    udot = X / m - g * st + r * v - q * w
    vdot = Y / m + g * ct * sp + p * w - r * u
    wdot = Z / m + g * ct * cp + q * u - p * v

    # rotational dynamics; pdot and rdot coupled through Ixz
    Ixx, Iyy, Izz, Ixz = cfg.Ixx, cfg.Iyy, cfg.Izz, cfg.Ixz
    a1 = q * r * (Iyy - Izz) + p * q * Ixz + L
    a3 = p * q * (Ixx - Iyy) - q * r * Ixz + N
    det = Ixx * Izz - Ixz * Ixz
    pdot = (Izz * a1 + Ixz * a3) / det
    rdot = (Ixz * a1 + Ixx * a3) / det
    qdot = (p * r * (Izz - Ixx) + (r * r - p * p) * Ixz + M) / Iyy

    # translational kinematics (body -> NED)
    xdot = u * ct * cy + v * (sp * st * cy - cp * sy) + w * (cp * st * cy + sp * sy)
    ydot = u * ct * sy + v * (sp * st * sy + cp * cy) + w * (cp * st * sy - sp * cy)
    zdot = -u * st + v * sp * ct + w * cp * ct

    # rotational kinematics
    phidot = p + (st / ct) * (q * sp + r * cp)
    thetadot = q * cp - r * sp
    psidot = (q * sp + r * cp) / ct

    return np.array([udot, vdot, wdot, pdot, qdot, rdot, xdot, ydot, zdot, phidot, thetadot, psidot])


def state_derivative(state: RigidBodyState, surfaces: SurfaceSet, cfg: AircraftConfig) -> RigidBodyState:
    return RigidBodyState.from_array(_derivative(state.as_array(), surfaces.as_array(), cfg))


def actuator_step(bank: ActuatorBank, commanded: SurfaceSet | Sequence[float], dt: float) -> ActuatorBank:
    """Advance every surface one step of a rate- and position-limited first-order lag.

    The lag is discretised exactly under a zero-order hold on the command.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cmd = commanded.as_array() if isinstance(commanded, SurfaceSet) else np.asarray(commanded, dtype=float)
    d = bank.deflection
    step = (cmd - d) * (1.0 - np.exp(-dt / bank.tau))
    max_step = bank.rate_limit * dt
    step = np.clip(step, -max_step, max_step)
    new = np.clip(d + step, bank.pos_min, bank.pos_max)
    return replace(bank, deflection=new)


def rk4_step(x: np.ndarray, d: np.ndarray, cfg: AircraftConfig, dt: float, deriv=_derivative) -> np.ndarray:
    k1 = deriv(x, d, cfg)
    k2 = deriv(x + 0.5 * dt * k1, d, cfg)
    k3 = deriv(x + 0.5 * dt * k2, d, cfg)
    k4 = deriv(x + dt * k3, d, cfg)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(
    state: RigidBodyState,
    bank: ActuatorBank,
    commanded: SurfaceSet | Sequence[float],
    cfg: AircraftConfig,
    dt: float,
    step_index: int = 0,
) -> Tuple[RigidBodyState, ActuatorBank]:
    """One RK4 step with surfaces frozen at their start-of-step positions,
    followed by one actuator update."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = rk4_step(state.as_array(), bank.deflection, cfg, dt)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(step_index)
    x[9] = _wrap_pi(x[9])
    x[11] = _wrap_pi(x[11])
    return RigidBodyState.from_array(x), actuator_step(bank, commanded, dt)


def _wrap_pi(a: float) -> float:
    if -math.pi <= a <= math.pi:
        return a
    return (a + math.pi) % (2.0 * math.pi) - math.pi


# --------------------------------------------------------------------------
# trim
# --------------------------------------------------------------------------


def trim_level(cfg: AircraftConfig, vt: float, h: float) -> Tuple[RigidBodyState, np.ndarray, float]:
    """Wings-level, unaccelerated flight: solve alpha, symmetric tail and thrust.

    Returns (state, surface deflections, thrust).
    """
    from scipy.optimize import fsolve

    qs = 0.5 * isa_density(h) * vt * vt * cfg.wing_area
    W = cfg.mass * cfg.gravity

    def residual(z):
        alpha, de, T = z
        d = np.array([de, de, 0.0, 0.0, 0.0])
        c = _coefficients(cfg, alpha, 0.0, vt, 0.0, 0.0, 0.0, d)
        X = qs * c["Cx"] + T
        Z = qs * c["Cz"]
        # body-axis force balance with theta = alpha (level flight)
        return [X - W * math.sin(alpha), Z + W * math.cos(alpha), c["Cm"]]

    alpha, de, T = fsolve(residual, [0.05, -0.02, 20000.0], xtol=1e-12)
    state = RigidBodyState.from_flight(vt, alpha=alpha, theta=alpha, h=h)
    return state, np.array([de, de, 0.0, 0.0, 0.0]), float(T)
