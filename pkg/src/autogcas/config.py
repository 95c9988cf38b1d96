"""Top-level simulation configuration and its YAML loader."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .airframe import DATA_DIR, AircraftConfig
from .fep import FepConfig
from .flight_control import CasGains, RateBounds
from .gcas import ACTIVATION_THRESHOLD
from .terrain import ScanPattern

DEFAULT_CONFIG = DATA_DIR / "default_config.yaml"
DEFAULT_SCHEDULE = DATA_DIR / "default_schedule.txt"


@dataclass(frozen=True)
class SimConfig:
    aircraft: AircraftConfig = field(default_factory=AircraftConfig)
    cas: CasGains = field(default_factory=CasGains)
    bounds: RateBounds = field(default_factory=RateBounds)
    fep: FepConfig = field(default_factory=FepConfig)
    scan: ScanPattern = field(default_factory=ScanPattern)
    h_buff: float = 100.0
    activation_threshold: float = ACTIVATION_THRESHOLD

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path = DATA_DIR) -> "SimConfig":
        ctrl = data.get("control", {})
        kw = {"aircraft": AircraftConfig.from_mapping(data, base_dir)}
        if "gains" in ctrl:
            kw["cas"] = CasGains(*(float(v) for v in ctrl["gains"]))
        if "rate_bounds_dps" in ctrl:
            rb = ctrl["rate_bounds_dps"]
            kw["bounds"] = RateBounds(**{k: tuple(math.radians(float(v)) for v in rb[k]) for k in ("p", "q", "r") if k in rb})
        if "fep" in data:
            kw["fep"] = FepConfig.from_mapping(data["fep"])
        if "scan" in data:
            kw["scan"] = ScanPattern(**{k: float(v) for k, v in data["scan"].items()})
        g = data.get("gcas", {})
        if "h_buff" in g:
            kw["h_buff"] = float(g["h_buff"])
        if "activation_threshold" in g:
            kw["activation_threshold"] = float(g["activation_threshold"])
        return cls(**kw)

    @classmethod
    def load(cls, path=DEFAULT_CONFIG) -> "SimConfig":
        path = Path(path)
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        # relative aero files resolve next to the config, falling back to the shipped data
        base = path.parent
        aero = data.get("aircraft", {}).get("aero_file")
        if aero is not None and not (base / aero).exists():
            base = DATA_DIR
        return cls.from_mapping(data, base)

    def describe(self) -> dict:
        """Flat summary of the undocumented-by-design parameters, for logs and reports."""
        b = self.bounds
        return {
            "cas_gains": [self.cas.Kp, self.cas.Kq, self.cas.Kr],
            "rate_bounds_dps": {k: [math.degrees(v) for v in getattr(b, k)] for k in ("p", "q", "r")},
            "alpha_stall_deg": math.degrees(self.fep.alpha_stall),
            "nz_limit": self.fep.nz_limit,
            "gamma_alpha": self.fep.gamma_alpha,
            "gamma_phi": self.fep.gamma_phi,
            "epsilon": self.fep.epsilon,
            "phi_limit_deg": math.degrees(self.fep.phi_limit),
            "h_buff": self.h_buff,
            "thrust": self.aircraft.thrust,
            "scan": [self.scan.ahead, self.scan.half_width, self.scan.resolution],
        }


def default_config() -> SimConfig:
    return SimConfig.load(DEFAULT_CONFIG)
