"""Seeded Monte Carlo campaigns over randomized dive initial conditions on flat ground."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..airframe import RigidBodyState, SurfaceSet, aero_with_partials
from ..config import SimConfig
from ..fep import alpha_limit
from ..gcas import GainSchedule
from .metrics import RunMetrics, run_metrics
from .scenario import Scenario
from .simulate import AbortedRunError, run_scenario

# (min, max) per quantity; angles in degrees, rates in deg/s
DEFAULT_RANGES: Dict[str, Tuple[float, float]] = {
    "alpha_deg": (-10.0, 20.0),
    "beta_deg": (-10.0, 10.0),
    "phi_deg": (-150.0, 150.0),
    "theta_deg": (-75.0, -10.0),
    "psi_deg": (-30.0, 30.0),
    "p_dps": (-120.0, 120.0),
    "q_dps": (-10.0, 20.0),
    "r_dps": (-15.0, 15.0),
    "vt": (200.0, 350.0),
    "h": (1000.0, 5000.0),
}
# draw order is part of the reproducibility contract
_DRAW_ORDER = tuple(DEFAULT_RANGES)
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class McConfig:
    n: int = 200
    seed: int = 0
    ranges: Dict[str, Tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_RANGES))
    duration: float = 150.0
    dt: float = 0.01
    h_buff: float = 100.0
    stop_after_recovery: Optional[float] = 3.0
    # redraw initial states that already violate the protected alpha / nz envelope
    require_envelope: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        missing = set(_DRAW_ORDER) - set(self.ranges)
        if missing:
            raise ValueError(f"missing ranges: {sorted(missing)}")
        for k, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise ValueError(f"range {k}: min above max")


@dataclass(frozen=True)
class McRun:
    index: int
    initial: Dict[str, float]
    metrics: RunMetrics
    redraws: int = 0


@dataclass
class McResult:
    runs: List[McRun]
    report: Dict[str, object]

    def dumps(self) -> str:
        return json.dumps(self.report, indent=2, sort_keys=True, allow_nan=True)


def _state_from_draw(d: Dict[str, float]) -> RigidBodyState:
    rad = math.radians
    return RigidBodyState.from_flight(
        vt=d["vt"], alpha=rad(d["alpha_deg"]), beta=rad(d["beta_deg"]), phi=rad(d["phi_deg"]),
        theta=rad(d["theta_deg"]), psi=rad(d["psi_deg"]), p=rad(d["p_dps"]), q=rad(d["q_dps"]),
        r=rad(d["r_dps"]), h=d["h"])


def inside_envelope(state: RigidBodyState, cfg: SimConfig) -> bool:
    """Initial alpha below its limit and |nz| within the load-factor limit (undeflected surfaces)."""
    ad, coeffs, _ = aero_with_partials(state, SurfaceSet(0.0, 0.0, 0.0, 0.0, 0.0), cfg.aircraft)
    return ad.alpha <= alpha_limit(ad, coeffs, cfg.aircraft, cfg.fep) and abs(coeffs.nz) <= cfg.fep.nz_limit


def draw_initial(mc: McConfig, index: int, cfg: SimConfig) -> Tuple[Dict[str, float], int]:
    """Initial condition of run ``index``; independent of every other run."""
    rng = np.random.default_rng(np.random.SeedSequence([mc.seed, index]))
    for attempt in range(MAX_REDRAWS):
        d = {k: float(rng.uniform(*mc.ranges[k])) for k in _DRAW_ORDER}
        if not mc.require_envelope or inside_envelope(_state_from_draw(d), cfg):
            return d, attempt
    raise RuntimeError(f"run {index}: no in-envelope initial state after {MAX_REDRAWS} draws")


def _run_one(args) -> McRun:
    mc, index, cfg, schedule, runs_dir = args
    draw, redraws = draw_initial(mc, index, cfg)
    sc = Scenario(_state_from_draw(draw), duration=mc.duration, dt=mc.dt, h_buff=mc.h_buff,
                  seed=index, name=f"mc-{index:05d}", stop_after_recovery=mc.stop_after_recovery)
    csv_path = None if runs_dir is None else Path(runs_dir) / f"run_{index:05d}.csv"
    try:
        log = run_scenario(sc, cfg, schedule, csv_path=csv_path)
        metrics = run_metrics(log)
    except AbortedRunError as exc:
        log = exc.log
        m = run_metrics(log) if len(log) else None
        metrics = RunMetrics(
            min_altitude=m.min_altitude if m else math.nan, max_q_cmd=m.max_q_cmd if m else math.nan,
            max_abs_nz=m.max_abs_nz if m else math.nan, dtw=math.nan, success=False,
            activated=bool(m and m.activated), terminated=log.terminated)
    return McRun(index, draw, metrics, redraws)


def _histogram(values: np.ndarray, bins: int = 20) -> Dict[str, list]:
    v = values[np.isfinite(values)]
    if v.size == 0:
        return {"edges": [], "counts": []}
    counts, edges = np.histogram(v, bins=bins)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def _summary(values: np.ndarray) -> Dict[str, object]:
    v = values[np.isfinite(values)]
    if v.size == 0:
        return {"n": 0}
    return {"n": int(v.size), "mean": float(v.mean()), "std": float(v.std()),
            "min": float(v.min()), "max": float(v.max()), "histogram": _histogram(v)}


def aggregate(runs: List[McRun], mc: McConfig, cfg: SimConfig) -> Dict[str, object]:
    runs = sorted(runs, key=lambda r: r.index)
    ok = [r.metrics.success for r in runs]
    col = lambda name: np.array([getattr(r.metrics, name) for r in runs], dtype=float)
    return {
        "n": len(runs),
        "seed": mc.seed,
        "success_rate": float(np.mean(ok)),
        "n_success": int(np.sum(ok)),
        "failures": [{"index": r.index, "initial": r.initial, "min_altitude": r.metrics.min_altitude,
                      "terminated": r.metrics.terminated} for r in runs if not r.metrics.success],
        "metrics": {
            "min_altitude": _summary(col("min_altitude")),
            "max_q_cmd": _summary(col("max_q_cmd")),
            "max_abs_nz": _summary(col("max_abs_nz")),
            "dtw": _summary(col("dtw")),
        },
        "activated": int(sum(r.metrics.activated for r in runs)),
        "redraws": int(sum(r.redraws for r in runs)),
        "ranges": {k: list(v) for k, v in mc.ranges.items()},
        "config": cfg.describe(),
        "runs": [dict(index=r.index, **r.metrics.as_dict()) for r in runs],
    }


def monte_carlo(mc: McConfig, cfg: SimConfig, schedule: GainSchedule, runs_dir=None) -> McResult:
    """Run the campaign; the report is assembled in run-index order."""
    if runs_dir is not None:
        Path(runs_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(mc, i, cfg, schedule, runs_dir) for i in range(mc.n)]
    if mc.workers > 1:
        with ProcessPoolExecutor(max_workers=mc.workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    runs.sort(key=lambda r: r.index)
    return McResult(runs, aggregate(runs, mc, cfg))
