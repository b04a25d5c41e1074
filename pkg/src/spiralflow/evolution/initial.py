"""Initial-data generators for the Cauchy and annulus problems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigError, UsageError


@dataclass(frozen=True, eq=False)
class InitialData:
    """Tagged initial datum.

    kind ``bump``: Phi + amplitude * exp(-((r - center)/width)^2).
    kind ``steepen``: Phi(0) + s (Phi - Phi(0)) with s >= 1, so U0_r = s Phi_r <= Phi_r.
    kind ``custom``: explicit nodal samples.
    """

    kind: str
    params: tuple = ()
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("bump", "steepen", "custom"):
            raise ConfigError(f"unknown initial data kind {self.kind!r}")
        if self.kind == "bump":
            if len(self.params) != 3 or not self.params[2] > 0:
                raise ConfigError("bump needs amplitude, center, width > 0")
        if self.kind == "steepen":
            if len(self.params) != 1 or not self.params[0] >= 1.0:
                raise ConfigError("steepening factor must be >= 1")
        if self.kind == "custom":
            if self.samples is None or not np.all(np.isfinite(self.samples)):
                raise ConfigError("custom initial data needs finite samples")

    @classmethod
    def bump(cls, amplitude, center, width):
        return cls("bump", (float(amplitude), float(center), float(width)))

    @classmethod
    def steepen(cls, s):
        return cls("steepen", (float(s),))

    @classmethod
    def custom(cls, samples):
        return cls("custom", (), np.array(samples, dtype=float))

    @classmethod
    def parse(cls, text: str) -> "InitialData":
        """Parse ``bump:a,c,w`` or ``steepen:s``."""
        kind, _, rest = text.partition(":")
        try:
            vals = [float(v) for v in rest.split(",")] if rest else []
        except ValueError as exc:
            raise ConfigError(f"cannot parse initial data {text!r}") from exc
        if kind == "custom":
            raise ConfigError("custom data cannot be given on the command line")
        return cls(kind, tuple(vals))

    def label(self) -> str:
        if self.kind == "custom":
            return "custom"
        return f"{self.kind}:" + ",".join(f"{v:g}" for v in self.params)

    def sample(self, r, phi: Optional[Callable] = None) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "custom":
            if self.samples.shape != r.shape:
                raise UsageError("custom samples do not match the grid")
            return self.samples.copy()
        if phi is None:
            raise UsageError(f"{self.kind} data needs the steady profile")
        base = phi(r)
        if self.kind == "bump":
            a, c, w = self.params
            return base + a * np.exp(-(((r - c) / w) ** 2))
        s = self.params[0]
        return base[0] + s * (base - base[0])
