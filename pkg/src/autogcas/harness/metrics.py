"""Nuisance quantification: closest-approach timeliness, command aggressiveness and DTW."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .log import SimLog

SUCCESS_TOLERANCE = 5.0
# two commands within this of a bound count as "at the bound"
SATURATION_ATOL = 1e-9


class NotApplicableError(ValueError):
    """The log has no GCAS activation, so nuisance measures are undefined."""


@dataclass(frozen=True)
class NuisanceFlags:
    timely: bool
    aggressive: bool
    cpa_clearance: float  # min over t of (h - h_dted) - h_buff, in m
    saturation: float     # fraction of [activation, t_CPA) spent at a q bound
    t_activation: float
    t_cpa: float


@dataclass(frozen=True)
class RunMetrics:
    min_altitude: float
    max_q_cmd: float
    max_abs_nz: float
    dtw: float
    success: bool
    activated: bool
    timely: Optional[bool] = None
    aggressive: Optional[bool] = None
    terminated: Optional[str] = None

    def as_dict(self) -> dict:
        return asdict(self)


def _q_bounds(log: SimLog):
    return tuple(log.meta.get("q_bounds", (np.nan, np.nan)))


def saturation_mask(q_cmd: np.ndarray, bounds) -> np.ndarray:
    lo, hi = bounds
    return (np.abs(q_cmd - hi) <= SATURATION_ATOL) | (np.abs(q_cmd - lo) <= SATURATION_ATOL)


def nuisance_check(log: SimLog, tolerance_m: float = 30.0, saturation_fraction: float = 0.8) -> NuisanceFlags:
    ia = log.activation_index()
    if ia is None:
        raise NotApplicableError("GCAS never activated")
    ic = log.cpa_index()
    clearance = float(log["h"][ic] - log["h_dted"][ic] - log.h_buff)
    window = log["q_cmd"][ia:ic]
    sat = float(np.mean(saturation_mask(window, _q_bounds(log)))) if window.size else 0.0
    return NuisanceFlags(
        timely=abs(clearance) <= tolerance_m,
        aggressive=window.size > 0 and sat >= saturation_fraction,
        cpa_clearance=clearance,
        saturation=sat,
        t_activation=float(log.t[ia]),
        t_cpa=float(log.t[ic]),
    )


def reference_command(log: SimLog) -> np.ndarray:
    """Ideal nuisance-free pitch command on the log's time base.

    Zero before activation, ``q_max`` from activation up to the closest
    approach, then a linear return to zero by the end of the log.
    """
    ia = log.activation_index()
    if ia is None:
        raise NotApplicableError("GCAS never activated")
    ic = log.cpa_index()
    q_max = _q_bounds(log)[1]
    t = log.t
    ref = np.zeros(len(log))
    ref[ia:ic] = q_max
    tail = t[ic:]
    span = t[-1] - t[ic]
    ref[ic:] = q_max * (1.0 - (tail - t[ic]) / span) if span > 0 else q_max
    return ref


def _normalise(x: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi - lo <= 0.0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def dtw_distance(a: Sequence[float], b: Sequence[float], normalise: bool = True) -> float:
    """Dynamic time warping with absolute-difference cost.

    Each input is min-max scaled to [0, 1] first (a constant sequence becomes
    all zeros).  The table is filled one anti-diagonal at a time.
    """
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("DTW needs non-empty sequences")
    if normalise:
        x, y = _normalise(x), _normalise(y)
    n, m = x.size, y.size
    inf = math.inf
    # D is stored per anti-diagonal s = i + j, indexed by i
    prev2 = np.full(n, inf)
    prev1 = np.full(n, inf)
    prev1[0] = abs(x[0] - y[0])
    if n == 1 and m == 1:
        return float(prev1[0])
    for s in range(1, n + m - 1):
        i_lo, i_hi = max(0, s - m + 1), min(n - 1, s)
        i = np.arange(i_lo, i_hi + 1)
        cost = np.abs(x[i] - y[s - i])
        cur = np.full(n, inf)
        best = prev1[i].copy()                     # (i, j-1)
        im1 = i - 1
        ok = im1 >= 0
        best[ok] = np.minimum(best[ok], prev1[im1[ok]])   # (i-1, j)
        best[ok] = np.minimum(best[ok], prev2[im1[ok]])   # (i-1, j-1)
        cur[i] = cost + best
        prev2, prev1 = prev1, cur
    return float(prev1[n - 1])


def run_metrics(log: SimLog, tolerance_m: float = 30.0, saturation_fraction: float = 0.8,
                success_tolerance: float = SUCCESS_TOLERANCE) -> RunMetrics:
    if len(log) == 0:
        raise ValueError("empty log")
    clearance = float(np.min(log["h"] - log["h_dted"]))
    contact = log.terminated is not None
    success = not contact and clearance >= log.h_buff - success_tolerance
    ia = log.activation_index()
    if ia is None:
        dtw, timely, aggressive = math.nan, None, None
    else:
        flags = nuisance_check(log, tolerance_m, saturation_fraction)
        timely, aggressive = flags.timely, flags.aggressive
        dtw = dtw_distance(log["q_gcas"], reference_command(log))
    return RunMetrics(
        min_altitude=float(np.min(log["h"])),
        max_q_cmd=float(np.max(log["q_cmd"])),
        max_abs_nz=float(np.max(np.abs(log["nz"]))),
        dtw=dtw,
        success=bool(success),
        activated=ia is not None,
        timely=timely,
        aggressive=aggressive,
        terminated=log.terminated,
    )
