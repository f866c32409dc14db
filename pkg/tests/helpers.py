"""Shared test utilities: scripted and recording RNGs, tiny corpora."""

from __future__ import annotations

import numpy as np


class ScriptedRng:
    """Plays back a fixed script of integer and float draws.

    integers(n) pops from ``ints`` (values are used as-is and must respect
    the bound); random() pops from ``floats``.
    """

    def __init__(self, ints=(), floats=()):
        self._ints = list(ints)
        self._floats = list(floats)

    def integers(self, *args):
        high = args[-1] if len(args) > 1 else args[0]
        v = self._ints.pop(0)
        assert 0 <= v < high, f"scripted int {v} out of range [0, {high})"
        return v

    def random(self):
        return self._floats.pop(0)


class RecordingRng:
    """Wraps a real generator and records every draw for replay checks."""

    def __init__(self, seed):
        self._rng = np.random.default_rng(seed)
        self.ints: list[int] = []
        self.floats: list[float] = []

    def integers(self, *args, **kwargs):
        v = int(self._rng.integers(*args, **kwargs))
        self.ints.append(v)
        return v

    def random(self):
        v = float(self._rng.random())
        self.floats.append(v)
        return v
