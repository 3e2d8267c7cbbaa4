"""Instrumented memory accounting.

All bulk working buffers the engine allocates are charged here so residual
and peak footprints are measurable without an external profiler.  The
ledger distinguishes two tiers:

* transient charges (``charge``/``release``) — chunk working buffers and
  loaded volumes; must return to the job baseline when the job ends;
* persistent commits (``commit_persistent``) — dataset storage replaced at
  job completion; moves the baseline together with the current counter so
  residual-vs-baseline stays exactly zero across jobs.

The peak is a high-water mark, resettable only at job boundaries via
``job_start``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass


@dataclass(frozen=True)
class LedgerSnapshot:
    current_bytes: int
    peak_bytes: int
    baseline_bytes: int

    @property
    def residual_bytes(self) -> int:
        return self.current_bytes - self.baseline_bytes


class MemoryLedger:
    """Process-global monitor with atomic counters (see module docstring)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._current = 0
        self._peak = 0
        self._baseline = 0

    def charge(self, nbytes: int) -> None:
        if nbytes < 0:
            raise ValueError("charge must be non-negative")
        with self._lock:
            self._current += nbytes
            if self._current > self._peak:
                self._peak = self._current

    def release(self, nbytes: int) -> None:
        if nbytes < 0:
            raise ValueError("release must be non-negative")
        with self._lock:
            self._current -= nbytes

    def job_start(self) -> int:
        """Mark a job boundary: baseline := current, peak reset to current."""
        with self._lock:
            self._baseline = self._current
            self._peak = self._current
            return self._baseline

    def commit_persistent(self, delta_bytes: int) -> None:
        """Account a change in persistent (dataset) storage.

        Shifts current and baseline together, so transient residual
        accounting is unaffected by committed results.
        """
        with self._lock:
            self._current += delta_bytes
            self._baseline += delta_bytes
            if self._current > self._peak:
                self._peak = self._current

    def snapshot(self) -> LedgerSnapshot:
        with self._lock:
            return LedgerSnapshot(self._current, self._peak, self._baseline)


#: Shared process-global ledger used by the engine, service, and bench.
LEDGER = MemoryLedger()
