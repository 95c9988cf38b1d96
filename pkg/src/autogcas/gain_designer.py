"""Offline design of the critically damped ECBF gain schedule over (phi, theta, V_T).

Each grid node is a dive condition.  With ``k2 = 2 sqrt(k1)`` substituted the
design is a one-dimensional search over ``k1``: a log-spaced sweep followed by
golden-section refinement, scoring every candidate by a closed-loop recovery.
"""

from __future__ import annotations

import datetime as _dt
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .airframe import RigidBodyState
from .config import SimConfig
from .gcas import K1_MIN, EcbfGains, GainSchedule
from .harness.log import SimLog
from .harness.scenario import Scenario
from .harness.simulate import AbortedRunError, run_scenario

K_MAX = 400.0
N_SWEEP = 32
N_GOLDEN = 8
EIG_TOL = 1e-9
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# recorded J3 for a candidate that hit the ground; such candidates never win
COLLISION_J3 = 1.0e6


class GainVerificationError(ValueError):
    pass


class ObjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveWeights:
    w1: float = 0.2
    w2: float = 0.3
    w3: float = 0.5

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not np.any(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be non-negative, finite and not all zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3], dtype=float)

    @classmethod
    def parse(cls, text: str) -> "ObjectiveWeights":
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 3:
            raise ValueError("weights need three comma-separated values")
        return cls(*parts)


@dataclass(frozen=True)
class DesignPoint:
    """Grid dive condition plus the seeded remaining initial states."""

    phi: float
    theta: float
    vt: float
    alpha: float = math.radians(2.0)
    psi: float = 0.0
    h: float = 3000.0

    def __post_init__(self):
        if not self.theta < 0:
            raise ValueError("design points must be dives (theta < 0)")
        if not self.vt > 0:
            raise ValueError("airspeed must be positive")

    @classmethod
    def random(cls, phi: float, theta: float, vt: float, rng: np.random.Generator) -> "DesignPoint":
        """Remaining states drawn so the aircraft starts in a clean dive with room to recover."""
        alpha = math.radians(rng.uniform(0.0, 4.0))
        psi = math.radians(rng.uniform(-30.0, 30.0))
        # altitude scales with the pull-out height loss at a 0.2 rad/s pitch rate
        loss = vt / 0.2 * (1.0 - math.cos(theta))
        h = 100.0 + 1.5 * loss + 20.0 * abs(math.sin(theta)) * vt / 10.0 + rng.uniform(300.0, 800.0)
        return cls(phi, theta, vt, alpha, psi, h)

    def initial_state(self) -> RigidBodyState:
        return RigidBodyState.from_flight(self.vt, alpha=self.alpha, phi=self.phi, theta=self.theta,
                                          psi=self.psi, h=self.h)


@dataclass(frozen=True)
class SimOptions:
    duration: float = 90.0
    dt: float = 0.01
    h_buff: float = 100.0
    stop_after_recovery: float = 2.0


@dataclass(frozen=True)
class Candidate:
    k1: float
    J: Tuple[float, float, float]
    collided: bool
    min_h: float


@dataclass
class PointReport:
    point: DesignPoint
    gains: EcbfGains
    candidates: List[Candidate]
    J_total: float
    failed: bool


def objective_components(log: SimLog, h_buff: float, h_dted: float = 0.0) -> Tuple[float, float, float]:
    """Raw (J1, J2, J3): negative command integral, negative peak command, buffer miss."""
    if len(log) == 0:
        raise ObjectiveError("empty log")
    q = log["q_gcas"]
    t = log.t
    j1 = -float(np.trapezoid(q, t)) if len(log) > 1 else 0.0
    j2 = -float(np.max(q))
    j3 = abs(float(np.min(log["h"])) - (h_buff + h_dted))
    return j1, j2, j3


def normalise(values: np.ndarray) -> np.ndarray:
    """Column-wise min-max scaling to [0, 1]; a constant column maps to zeros."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(axis=0), v.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (v - lo) / span


def evaluate_objective(log: SimLog, weights: ObjectiveWeights, h_buff: float, h_dted: float = 0.0,
                       reference: Optional[Sequence[Tuple[float, float, float]]] = None
                       ) -> Tuple[float, float, float, float]:
    """(J_T, J1, J2, J3) for one log.

    ``reference`` is the candidate set used for normalisation (the log's own
    components are included); without it the single-log set normalises every
    term to zero.
    """
    comps = objective_components(log, h_buff, h_dted)
    pool = np.array(list(reference or []) + [comps], dtype=float)
    jn = normalise(pool)[-1]
    return float(weights.as_array() @ jn), comps[0], comps[1], comps[2]


def totals(candidates: Sequence[Candidate], weights: ObjectiveWeights) -> np.ndarray:
    """Weighted normalised totals; colliding candidates score +inf."""
    J = np.array([c.J for c in candidates], dtype=float)
    ok = np.array([not c.collided for c in candidates])
    out = np.full(len(candidates), np.inf)
    if ok.any():
        jn = normalise(J[ok])
        assert np.all((jn >= 0.0) & (jn <= 1.0))
        out[ok] = jn @ weights.as_array()
    return out


def _simulate(dp: DesignPoint, k1: float, cfg: SimConfig, opts: SimOptions) -> Candidate:
    sched = GainSchedule.constant(EcbfGains.from_k1(k1))
    sc = Scenario(dp.initial_state(), duration=opts.duration, dt=opts.dt, h_buff=opts.h_buff,
                  stop_after_recovery=opts.stop_after_recovery, name="design")
    try:
        log = run_scenario(sc, cfg, sched)
    except AbortedRunError as exc:
        log = exc.log
        if len(log) == 0:
            return Candidate(k1, (0.0, 0.0, COLLISION_J3), True, math.nan)
    j1, j2, j3 = objective_components(log, opts.h_buff)
    collided = log.terminated is not None
    return Candidate(k1, (j1, j2, COLLISION_J3 if collided else j3), collided, float(np.min(log["h"])))


def optimize_point(dp: DesignPoint, weights: ObjectiveWeights, cfg: SimConfig,
                   opts: SimOptions = SimOptions(), k_max: float = K_MAX,
                   n_sweep: int = N_SWEEP, n_golden: int = N_GOLDEN) -> PointReport:
    grid = np.geomspace(K1_MIN, k_max, n_sweep)
    cands = [_simulate(dp, float(k), cfg, opts) for k in grid]
    score = totals(cands, weights)
    if not np.isfinite(score).any():
        # every candidate collided: fall back to the earliest-acting gain
        return PointReport(dp, EcbfGains.from_k1(K1_MIN), cands, math.inf, True)

    # golden-section refinement in log(k1) around the best sweep point, with the
    # normalisation frozen at the sweep's ranges
    best = int(np.argmin(score))
    lo = math.log(grid[max(best - 1, 0)])
    hi = math.log(grid[min(best + 1, n_sweep - 1)])
    ok_J = np.array([c.J for c in cands if not c.collided])
    j_lo, j_hi = ok_J.min(axis=0), ok_J.max(axis=0)
    span = np.where(j_hi > j_lo, j_hi - j_lo, 1.0)
    w = weights.as_array()

    def frozen(c: Candidate) -> float:
        return math.inf if c.collided else float(((np.array(c.J) - j_lo) / span) @ w)

    a, b = lo, hi
    x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    c1, c2 = _simulate(dp, math.exp(x1), cfg, opts), _simulate(dp, math.exp(x2), cfg, opts)
    refine = [c1, c2]
    for _ in range(max(n_golden - 2, 0)):
        if frozen(c1) <= frozen(c2):
            b, x2, c2 = x2, x1, c1
            x1 = b - GOLDEN * (b - a)
            c1 = _simulate(dp, math.exp(x1), cfg, opts)
            refine.append(c1)
        else:
            a, x1, c1 = x1, x2, c2
            x2 = a + GOLDEN * (b - a)
            c2 = _simulate(dp, math.exp(x2), cfg, opts)
            refine.append(c2)

    # final choice renormalised over every evaluated candidate
    allc = cands + refine
    score = totals(allc, weights)
    i = int(np.argmin(score))
    return PointReport(dp, EcbfGains.from_k1(allc[i].k1), allc, float(score[i]), False)


@dataclass(frozen=True)
class GridSpec:
    phi: np.ndarray = field(default_factory=lambda: np.radians(np.arange(-150.0, 151.0, 50.0)))
    theta: np.ndarray = field(default_factory=lambda: np.radians(np.arange(-60.0, -9.0, 10.0)))
    vt: np.ndarray = field(default_factory=lambda: np.arange(200.0, 351.0, 30.0))

    def __post_init__(self):
        for name in ("phi", "theta", "vt"):
            ax = np.asarray(getattr(self, name), dtype=float)
            if ax.ndim != 1 or ax.size == 0:
                raise ValueError(f"grid axis {name} must be a non-empty vector")
            object.__setattr__(self, name, ax)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.phi.size, self.theta.size, self.vt.size)

    @classmethod
    def loads(cls, text: str) -> "GridSpec":
        """Lines ``phi_deg ...``, ``theta_deg ...``, ``vt_mps ...``; '#' starts a comment."""
        axes: Dict[str, np.ndarray] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, *vals = line.split()
            if key not in ("phi_deg", "theta_deg", "vt_mps"):
                raise ValueError(f"unknown grid key {key!r}")
            arr = np.array([float(v) for v in vals])
            axes[key] = arr if key == "vt_mps" else np.radians(arr)
        missing = {"phi_deg", "theta_deg", "vt_mps"} - set(axes)
        if missing:
            raise ValueError(f"grid file missing {sorted(missing)}")
        return cls(axes["phi_deg"], axes["theta_deg"], axes["vt_mps"])


def node_entropy(phi: float, theta: float, vt: float) -> List[int]:
    """Seed words for a node, keyed by its coordinates (milli-degrees, mm/s).

    Keying by value rather than grid index means a node is designed the same
    way whatever other nodes the grid contains.
    """
    return [int(round(v * 1000.0)) & 0xFFFFFFFF for v in (math.degrees(phi), math.degrees(theta), vt)]


def _design_node(args) -> PointReport:
    idx, phi, theta, vt, weights, cfg, seed, opts = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, *node_entropy(phi, theta, vt)]))
    dp = DesignPoint.random(phi, theta, vt, rng)
    return optimize_point(dp, weights, cfg, opts)


def build_schedule(grid: GridSpec, weights: ObjectiveWeights, cfg: SimConfig, seed: int = 0,
                   opts: SimOptions = SimOptions(), workers: int = 1, progress=None
                   ) -> Tuple[GainSchedule, List[PointReport]]:
    """Optimise every node; failed nodes are kept (at ``K1_MIN``) and listed in the metadata."""
    jobs = []
    for i, phi in enumerate(grid.phi):
        for j, th in enumerate(grid.theta):
            for k, vt in enumerate(grid.vt):
                jobs.append(((i, j, k), float(phi), float(th), float(vt), weights, cfg, seed, opts))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_design_node, jobs))
    else:
        reports = []
        for n, job in enumerate(jobs):
            reports.append(_design_node(job))
            if progress is not None:
                progress(n + 1, len(jobs), reports[-1])
    k2 = np.array([r.gains.k2 for r in reports]).reshape(grid.shape)
    failed = [job[0] for job, r in zip(jobs, reports) if r.failed]
    meta = {
        "weights": ",".join(repr(float(w)) for w in weights.as_array()),
        "seed": str(seed),
        "date": _dt.date.today().isoformat(),
        "k1_range": f"{K1_MIN!r},{K_MAX!r}",
        "search": f"log-sweep {N_SWEEP} + golden {N_GOLDEN}",
        "failures": ";".join(f"{i},{j},{k}" for i, j, k in failed) or "none",
    }
    schedule = GainSchedule(grid.phi, grid.theta, grid.vt, k2, meta)
    for g in schedule.gains():
        verify_gains(g)
    return schedule, reports


@dataclass(frozen=True)
class GainReport:
    kappa: EcbfGains
    eigenvalues: Tuple[complex, complex]


def verify_gains(kappa) -> GainReport:
    """Check that [[0, 1], [-k1, -k2]] has the repeated real eigenvalue -k2/2.

    A double root is ill-conditioned for a numerical eigensolver (it only
    resolves to about sqrt(eps)), so the test is on the characteristic
    polynomial instead: p(s) = s^2 + k2 s + k1 has a double root at -k2/2 iff
    p(-k2/2) = k1 - k2^2/4 = 0.  The numerical eigenvalues are cross-checked
    against -k2/2 at the conditioning bound.
    """
    k1, k2 = (kappa.k1, kappa.k2) if hasattr(kappa, "k1") else kappa
    target = -k2 / 2.0
    delta = abs(k1 - k2 * k2 / 4.0)
    ev = np.linalg.eigvals(np.array([[0.0, 1.0], [-k1, -k2]]))
    loose = math.sqrt(np.finfo(float).eps) * 16.0 * max(1.0, abs(target))
    ok = (k2 > 0 and delta <= EIG_TOL * max(1.0, k1)
          and np.all(np.abs(ev - target) <= loose))
    if not ok:
        raise GainVerificationError(f"kappa=({k1}, {k2}) eigenvalues {ev} are not a repeated root at {target}")
    return GainReport(kappa, (complex(target), complex(target)))
