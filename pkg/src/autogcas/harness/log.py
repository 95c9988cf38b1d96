"""Per-step simulation log with a stable column layout."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

# Stable CSV column order.  Angles in rad, rates in rad/s, lengths in m.
COLUMNS = (
    "t",
    "u", "v", "w", "p", "q", "r", "xE", "yE", "zE", "phi", "theta", "psi",
    "alpha", "beta", "vt", "qbar", "h", "hdot", "nz",
    "p_pilot", "q_pilot", "r_pilot",
    "q_gcas", "q_cmd", "p_cmd", "r_cmd",
    "gcas_active", "gcas_feasible", "gcas_margin",
    "aoa_active", "aoa_feasible", "aoa_margin", "alpha_limit",
    "bank_active", "bank_feasible", "bank_margin",
    "k1", "k2", "h_dted", "h_terrain", "b", "f_h", "g_h",
    "cmd_rht", "cmd_lht", "cmd_ra", "cmd_la", "cmd_rud",
    "act_rht", "act_lht", "act_ra", "act_la", "act_rud",
    "alloc_residual", "alloc_clamped",
)
COLUMN_INDEX = {name: i for i, name in enumerate(COLUMNS)}


class CsvSink:
    """Streams log rows to a CSV file as they are produced."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(COLUMNS)

    def write(self, row: Sequence[float]) -> None:
        self._writer.writerow([repr(float(v)) for v in row])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class SimLog:
    """One row per integration step, recorded before the step is taken."""

    data: np.ndarray
    dt: float
    h_buff: float
    meta: Dict[str, object] = field(default_factory=dict)
    # set when the run stopped on ground contact or divergence
    terminated: Optional[str] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(COLUMNS))

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, COLUMN_INDEX[name]]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def activation_index(self) -> Optional[int]:
        idx = np.flatnonzero(self["gcas_active"] > 0.5)
        return int(idx[0]) if idx.size else None

    def cpa_index(self) -> int:
        """Index of the closest approach to the terrain estimate, min of h - h_dted."""
        if len(self) == 0:
            raise ValueError("empty log")
        return int(np.argmin(self["h"] - self["h_dted"]))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(COLUMNS)
        for row in self.data:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, dt: Optional[float] = None, h_buff: float = 100.0,
                 meta: Optional[Dict[str, object]] = None) -> "SimLog":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != COLUMNS:
            raise ValueError("CSV header does not match the log layout")
        data = np.array(rows[1:], dtype=float)
        if dt is None:
            dt = float(data[1, 0] - data[0, 0]) if len(data) > 1 else 0.01
        return cls(data, dt, h_buff, dict(meta or {}))
