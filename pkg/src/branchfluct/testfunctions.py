"""Nonnegative Gaussian-bump test functions and time profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TestFunction:
    """``phi(x) = sum_j h_j exp(-|x - c_j|**2 / (2 sigma_j**2))`` on R^d.

    Parameters
    ----------
    centers : (m, d) array
    widths : (m,) array of positive sigmas
    heights : (m,) array of nonnegative heights
    """

    __test__ = False  # not a pytest class

    centers: np.ndarray
    widths: np.ndarray
    heights: np.ndarray
    family: str = field(default="gaussian-sum")

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.atleast_1d(np.asarray(self.widths, dtype=float))
        h = np.atleast_1d(np.asarray(self.heights, dtype=float))
        if not (len(c) == len(w) == len(h)):
            raise ValueError("centers, widths and heights must have matching lengths")
        if np.any(w <= 0):
            raise ValueError("widths must be positive")
        if np.any(h < 0):
            raise ValueError("heights must be nonnegative")
        for name, v in (("centers", c), ("widths", w), ("heights", h)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def gaussian(cls, d: int, sigma: float = 1.0, height: float = 1.0, center=None) -> "TestFunction":
        c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        return cls(c[None, :], [sigma], [height])

    @classmethod
    def zero(cls, d: int) -> "TestFunction":
        return cls(np.zeros((1, d)), [1.0], [0.0])

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def nonnegative(self) -> bool:
        return True

    @property
    def is_zero(self) -> bool:
        return not np.any(self.heights > 0)

    @property
    def components(self):
        return list(zip(self.centers, self.widths, self.heights))

    def integral(self) -> float:
        """Closed-form total mass ``sum_j h_j (2 pi sigma_j**2)**(d/2)``."""
        return float(np.sum(self.heights * (2.0 * math.pi * self.widths ** 2) ** (self.d / 2.0)))

    def sup(self) -> float:
        return float(np.sum(self.heights))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = np.zeros(x.shape[:-1])
        for c, s, h in self.components:
            if h == 0:
                continue
            r2 = np.sum((x - c) ** 2, axis=-1)
            out += h * np.exp(-r2 / (2.0 * s * s))
        return out

    def fourier(self, k) -> np.ndarray:
        """``int phi(x) exp(i k.x) dx`` for wavevectors ``k`` of shape (n, d)."""
        k = np.atleast_2d(np.asarray(k, dtype=float))
        out = np.zeros(len(k), dtype=complex)
        for c, s, h in self.components:
            k2 = np.sum(k * k, axis=-1)
            out += h * (2 * math.pi * s * s) ** (self.d / 2.0) * np.exp(-0.5 * s * s * k2 + 1j * k @ c)
        return out

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.centers, self.widths, self.heights * factor)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return TestFunction(np.vstack([self.centers, other.centers]),
                            np.concatenate([self.widths, other.widths]),
                            np.concatenate([self.heights, other.heights]))

    def support_radius(self, rel: float = 1e-16) -> float:
        """Radius around the origin outside which ``phi < rel * sup``."""
        reach = np.linalg.norm(self.centers, axis=1) + self.widths * math.sqrt(2 * math.log(1 / rel))
        return float(reach.max())

    def to_dict(self) -> dict:
        return {"centers": self.centers.tolist(), "widths": self.widths.tolist(),
                "heights": self.heights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        return cls(d["centers"], d["widths"], d["heights"])


# ---------------------------------------------------------------------------
# time profiles on [0, 1]


@dataclass(frozen=True)
class TimeProfile:
    """Time factor ``psi`` of a space-time test function ``phi(x) psi(t)``.

    Kinds
    -----
    ``constant``  psi = value.
    ``indicator`` psi = value * 1[t <= t1].
    ``point``     psi = value * delta_{t1}: pairing evaluates the path at t1.
    ``bump``      smooth compactly supported bump on (a, b).
    """

    kind: str = "constant"
    value: float = 1.0
    t1: float = 1.0
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "indicator", "point", "bump"):
            raise ValueError(f"unknown time profile {self.kind!r}")
        if self.kind in ("indicator", "point") and not 0.0 <= self.t1 <= 1.0:
            raise ValueError("t1 must lie in [0, 1]")
        if self.kind == "bump" and not 0.0 <= self.a < self.b <= 1.0:
            raise ValueError("bump needs 0 <= a < b <= 1")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.value)
        if self.kind == "indicator":
            return np.where(t <= self.t1, self.value, 0.0)
        if self.kind == "point":
            raise ValueError("a point-mass profile has no pointwise values")
        u = (t - self.a) / (self.b - self.a)
        inside = (u > 0) & (u < 1)
        out = np.zeros_like(t)
        ui = u[inside]
        out[inside] = self.value * np.exp(1.0 - 1.0 / (1.0 - (2 * ui - 1) ** 2))
        return out

    def tail_integral(self, t) -> np.ndarray:
        """``chi(t) = int_t^1 psi(s) ds``; for a point mass this is ``value * 1[t < t1]``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return self.value * (1.0 - t)
        if self.kind == "indicator":
            return self.value * np.maximum(self.t1 - t, 0.0)
        if self.kind == "point":
            return np.where(t < self.t1, self.value, 0.0)
        from scipy import integrate
        flat = [integrate.quad(lambda s: float(self(s)), max(ti, self.a), self.b)[0] if ti < self.b else 0.0
                for ti in np.atleast_1d(t).ravel()]
        return np.asarray(flat).reshape(t.shape)

    def total(self) -> float:
        return float(self.tail_integral(0.0))

    def max_slope(self) -> float:
        """Rough bound on |psi'|, used for grid-resolution warnings."""
        if self.kind in ("constant",):
            return 0.0
        if self.kind in ("indicator", "point"):
            return math.inf
        return 4.0 * self.value / (self.b - self.a)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "t1": self.t1, "a": self.a, "b": self.b}
