"""Per-phase wall-clock accounting."""

import time

PHASES = ("rhs", "jacobian", "solve", "sample", "adaptU", "adaptP")


class PhaseTimer:
    """Accumulates monotonic-clock time into named phases.

    ``start(name)`` closes whichever phase is running and opens `name`;
    ``stop()`` closes the running phase.
    """

    def __init__(self):
        self.totals = dict.fromkeys(PHASES, 0.0)
        self._phase = None
        self._t0 = 0.0

    def start(self, phase):
        now = time.perf_counter()
        if self._phase is not None:
            self.totals[self._phase] += now - self._t0
        self._phase = phase
        self._t0 = now

    def stop(self):
        if self._phase is not None:
            self.totals[self._phase] += time.perf_counter() - self._t0
            self._phase = None

    @property
    def current(self):
        return self._phase

    def snapshot(self):
        return dict(self.totals)
