"""Two-sided Wiener paths, the Wiener shift and the factor Q(t) = exp(eps W(t)).

Paths live on a uniform grid that has t = 0 as a node. Random numbers come from
numpy's Philox counter-based generator: ``SeedSequence(seed).spawn(2)`` yields
one key for the forward half (t > 0) and one for the backward half (t < 0), so a
given (seed, t_min, t_max, dt) reproduces the same node values bit for bit.

A path stores the underlying node array once and an ``origin`` index marking the
node that plays the role of t = 0. Shifting only moves the origin, which keeps
the group law of the shift exact in floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_SNAP = 1e-9  # relative slack (in units of dt) when matching times to nodes


class WindowError(ValueError):
    """A requested time lies outside the stored window of a path."""


@dataclass(frozen=True)
class NoiseConfig:
    epsilon: float = 0.5
    seed: int = 1
    t_min: float = -40.0
    t_max: float = 10.0
    dt: float = 1e-3

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_min <= 0.0 <= self.t_max:
            raise ValueError(f"need t_min <= 0 <= t_max, got [{self.t_min}, {self.t_max}]")
        for name in ("t_min", "t_max"):
            k = getattr(self, name) / self.dt
            if abs(k - round(k)) > 1e-6:
                raise ValueError(f"{name}={getattr(self, name)} is not a multiple of dt={self.dt}")


@dataclass(frozen=True, eq=False)
class WienerPath:
    """Sampled two-sided Brownian path ``W(t) = base[origin + t/dt] - base[origin]``."""

    base: np.ndarray
    origin: int
    dt: float
    seed: int

    def __post_init__(self):
        if not 0 <= self.origin < self.base.size:
            raise WindowError("origin outside the stored nodes")
        self.base.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.base.size

    @property
    def t_min(self) -> float:
        return -self.origin * self.dt

    @property
    def t_max(self) -> float:
        return (self.base.size - 1 - self.origin) * self.dt

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.base.size) - self.origin) * self.dt

    @property
    def values(self) -> np.ndarray:
        return self.base - self.base[self.origin]

    def _position(self, t):
        x = np.asarray(t, dtype=float) / self.dt + self.origin
        lo, hi = -_SNAP, self.base.size - 1 + _SNAP
        if np.any(x < lo) or np.any(x > hi) or not np.all(np.isfinite(x)):
            raise WindowError(f"time {t} outside window [{self.t_min}, {self.t_max}]")
        return x

    def node_index(self, t: float) -> int:
        """Offset (in nodes, relative to the origin) of a time that must be a node."""
        x = float(self._position(t))
        k = round(x)
        if abs(x - k) > _SNAP:
            raise ValueError(f"time {t} is not a node of the path grid (dt={self.dt})")
        return k - self.origin

    def value_at(self, t):
        """W(t) by linear interpolation; exact at nodes. Accepts scalars or arrays."""
        x = self._position(t)
        k = np.rint(x)
        on_node = np.abs(x - k) <= _SNAP
        i = np.clip(np.floor(x), 0, self.base.size - 2).astype(int)
        w = x - i
        b0 = self.base[self.origin]
        interp = (1.0 - w) * (self.base[i] - b0) + w * (self.base[i + 1] - b0)
        node = self.base[np.clip(k, 0, self.base.size - 1).astype(int)] - b0
        out = np.where(on_node, node, interp)
        return float(out) if out.ndim == 0 else out


def sample_path(config: NoiseConfig) -> WienerPath:
    """Draw the path for ``config``; W(0) = 0 and the two halves are independent."""
    n_pos = int(round(config.t_max / config.dt))
    n_neg = int(round(-config.t_min / config.dt))
    pos_seq, neg_seq = np.random.SeedSequence(config.seed).spawn(2)
    scale = math.sqrt(config.dt)
    pos = np.cumsum(np.random.Generator(np.random.Philox(pos_seq)).standard_normal(n_pos) * scale)
    neg = np.cumsum(np.random.Generator(np.random.Philox(neg_seq)).standard_normal(n_neg) * scale)
    base = np.concatenate([neg[::-1], [0.0], pos])
    return WienerPath(base=base, origin=n_neg, dt=config.dt, seed=config.seed)


def shift(path: WienerPath, s: float) -> WienerPath:
    """Wiener shift: the returned path satisfies ``W'(r) = W(s + r) - W(s)``."""
    k = path.node_index(s)
    return WienerPath(base=path.base, origin=path.origin + k, dt=path.dt, seed=path.seed)


def q_factor(path: WienerPath | None, epsilon: float, t):
    """Q(t) = exp(epsilon * W(t)); ``path=None`` stands for the deterministic case."""
    if path is None or epsilon == 0.0:
        if path is not None:
            path._position(t)
        return 1.0 if np.ndim(t) == 0 else np.ones(np.shape(t))
    return np.exp(epsilon * path.value_at(t))


def save_path(path: WienerPath, file) -> None:
    lines = [f"{path.t_min!r} {path.t_max!r} {path.dt!r} {path.seed}"]
    lines.extend(f"{v:.17g}" for v in path.values)
    Path(file).write_text("\n".join(lines) + "\n")


def load_path(file) -> WienerPath:
    text = Path(file).read_text().split("\n")
    t_min, t_max, dt, seed = text[0].split()
    values = np.array([float(v) for v in text[1:] if v.strip()])
    dt = float(dt)
    origin = int(round(-float(t_min) / dt))
    if values.size != int(round((float(t_max) - float(t_min)) / dt)) + 1:
        raise ValueError("node count does not match the header window")
    return WienerPath(base=values, origin=origin, dt=dt, seed=int(seed))
