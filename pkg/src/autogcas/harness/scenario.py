"""Scenario definition: initial state, pilot script, terrain and safety switches."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import yaml

from ..airframe import RigidBodyState
from ..terrain import TerrainGrid, peaks_terrain


@dataclass(frozen=True)
class PilotScript:
    """Piecewise-constant (p, q, r) rate commands in rad/s.

    Row ``i`` holds from ``times[i]`` until the next row; before the first
    row the command is zero.
    """

    times: np.ndarray = field(default_factory=lambda: np.zeros(1))
    rates: np.ndarray = field(default_factory=lambda: np.zeros((1, 3)))

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        r = np.asarray(self.rates, dtype=float).reshape(-1, 3)
        if t.size != r.shape[0]:
            raise ValueError("script times and rates differ in length")
        if np.any(np.diff(t) < 0):
            raise ValueError("script times must be non-decreasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "rates", r)

    def at(self, t: float) -> Tuple[float, float, float]:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i < 0:
            return 0.0, 0.0, 0.0
        p, q, r = self.rates[i]
        return float(p), float(q), float(r)

    @classmethod
    def zero(cls) -> "PilotScript":
        return cls()


@dataclass(frozen=True)
class Scenario:
    initial: RigidBodyState
    script: PilotScript = field(default_factory=PilotScript.zero)
    duration: float = 60.0
    dt: float = 0.01
    # None means flat ground at zero without scanning
    terrain: Optional[TerrainGrid] = None
    h_buff: float = 100.0
    gcas: bool = True
    fep: bool = True
    seed: int = 0
    name: str = "scenario"
    thrust: Optional[float] = None
    # initial surface deflections (rht, lht, ra, la, rud) in rad; None starts centred
    surfaces: Optional[Tuple[float, ...]] = None
    # stop this long after the recovery is complete (None: run the full duration)
    stop_after_recovery: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.h_buff < 0:
            raise ValueError("h_buff must be non-negative")
        if self.surfaces is not None and len(self.surfaces) != 5:
            raise ValueError("surfaces must have 5 entries")

    def with_safety(self, gcas: bool, fep: bool) -> "Scenario":
        return replace(self, gcas=gcas, fep=fep)


def _initial_from_mapping(d: dict) -> RigidBodyState:
    rad = math.radians
    return RigidBodyState.from_flight(
        vt=float(d["vt"]),
        alpha=rad(float(d.get("alpha_deg", 0.0))),
        beta=rad(float(d.get("beta_deg", 0.0))),
        phi=rad(float(d.get("phi_deg", 0.0))),
        theta=rad(float(d.get("theta_deg", 0.0))),
        psi=rad(float(d.get("psi_deg", 0.0))),
        p=rad(float(d.get("p_dps", 0.0))),
        q=rad(float(d.get("q_dps", 0.0))),
        r=rad(float(d.get("r_dps", 0.0))),
        h=float(d["h"]),
        x=float(d.get("x", 0.0)),
        y=float(d.get("y", 0.0)),
    )


def _terrain_from_mapping(spec, base_dir: Path) -> Optional[TerrainGrid]:
    if spec is None or spec == "flat":
        return None
    if isinstance(spec, dict) and "file" in spec:
        path = Path(spec["file"])
        return TerrainGrid.load(path if path.is_absolute() else base_dir / path)
    if isinstance(spec, dict) and "peaks" in spec:
        pk = spec["peaks"]
        return peaks_terrain(tuple(pk["x_range"]), tuple(pk["y_range"]), float(pk.get("resolution", 50.0)),
                             float(pk["horizontal_scale"]), float(pk["vertical_scale"]))
    raise ValueError(f"unrecognised terrain spec {spec!r}")


def scenario_from_mapping(d: dict, base_dir: Path = Path(".")) -> Scenario:
    """Build a scenario from a YAML mapping; script rows are [t, p_dps, q_dps, r_dps]."""
    rows = d.get("script") or [[0.0, 0.0, 0.0, 0.0]]
    arr = np.asarray(rows, dtype=float).reshape(-1, 4)
    script = PilotScript(arr[:, 0], np.radians(arr[:, 1:]))
    kw = dict(
        initial=_initial_from_mapping(d["initial"]),
        script=script,
        terrain=_terrain_from_mapping(d.get("terrain"), base_dir),
    )
    for key in ("duration", "dt", "h_buff", "thrust", "stop_after_recovery"):
        if d.get(key) is not None:
            kw[key] = float(d[key])
    for key in ("gcas", "fep"):
        if key in d:
            kw[key] = bool(d[key])
    if "seed" in d:
        kw["seed"] = int(d["seed"])
    kw["name"] = str(d.get("name", "scenario"))
    return Scenario(**kw)


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        return scenario_from_mapping(yaml.safe_load(fh), path.parent)
