from __future__ import annotations

from dataclasses import astuple, dataclass, field, fields

import numpy as np

from .loop_core import TraceRecord

COLUMNS = tuple(f.name for f in fields(TraceRecord))


@dataclass
class Trace:
    """Ordered per-sample telemetry of one run, with array views by column."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    def append(self, record: TraceRecord):
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(name)
        return np.array([getattr(r, name) for r in self.records])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def phi(self) -> np.ndarray:
        return self.column("phi")

    @property
    def ratio(self) -> np.ndarray:
        return self.column("ratio")

    def rows(self):
        for r in self.records:
            yield astuple(r)

    @classmethod
    def from_phi(cls, phi, interval: float = 1.0) -> "Trace":
        """Synthetic trace carrying only a phase-error sequence (for analysis tests)."""
        out = cls()
        for k, p in enumerate(phi):
            out.append(TraceRecord(k, k * interval, 1, "positive", 1.0 / interval,
                                   0.0, 0.0, float(p), 0.0))
        return out
